// Copyright 2026 The SBSE Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "sbse/rng.hpp"

#include <cmath>
#include <set>

#include "catch2/catch_amalgamated.hpp"

using namespace sbse;

TEST_CASE("derive_seed is deterministic and collision-free over indices") {
  REQUIRE(derive_seed(1, "a", 0) == derive_seed(1, "a", 0));
  REQUIRE(derive_seed(1, "a", 0) != derive_seed(1, "b", 0));
  REQUIRE(derive_seed(1, "a", 0) != derive_seed(2, "a", 0));

  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 10000; ++i) {
    seen.insert(derive_seed(42, "record", i));
  }
  REQUIRE(seen.size() == 10000);
}

TEST_CASE("uniform stays in range and below() respects its bound") {
  Rng rng(7);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    REQUIRE(rng.below(17) < 17);
  }
  Rng a(3), b(3);
  for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());
}

TEST_CASE("gaussian moments match the standard normal") {
  Rng rng(2024);
  const int n = 100000;
  double mean = 0.0, var = 0.0;
  for (int i = 0; i < n; ++i) {
    const double g = rng.gaussian();
    mean += g;
    var += g * g;
  }
  mean /= n;
  var /= n;
  REQUIRE(std::abs(mean) < 4.0 / std::sqrt(static_cast<double>(n)));
  REQUIRE(var == Catch::Approx(1.0).margin(0.02));
}

TEST_CASE("complex gaussian has unit total variance, half per component") {
  Rng rng(99);
  const int n = 100000;
  double total = 0.0, re2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto z = rng.gaussian_complex();
    total += std::norm(z);
    re2 += z.real() * z.real();
  }
  REQUIRE(total / n == Catch::Approx(1.0).margin(0.02));
  REQUIRE(re2 / n == Catch::Approx(0.5).margin(0.01));
}
