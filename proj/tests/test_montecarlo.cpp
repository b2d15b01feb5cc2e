// Copyright 2026 The lvlab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include "lvlab/montecarlo.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

using namespace lvlab;

TEST_CASE("identical (seed, stream) pairs give identical matrices") {
  RngStream a(42, 7), b(42, 7);
  const Matrix x = gaussian_matrix(20, 30, 1.5, a);
  const Matrix y = gaussian_matrix(20, 30, 1.5, b);
  CHECK(x == y);
  RngStream c(42, 8);
  CHECK(gaussian_matrix(20, 30, 1.5, c) != x);
  RngStream e(43, 7);
  CHECK(gaussian_matrix(20, 30, 1.5, e) != x);
}

TEST_CASE("substreams are distinct from each other and from the parent") {
  const RngStream parent(1, 2);
  RngStream p = parent, s0 = parent.substream(0), s1 = parent.substream(1);
  const auto a = p(), b = s0(), c = s1();
  CHECK(a != b);
  CHECK(b != c);
  CHECK(a != c);
  RngStream again = parent.substream(1);
  CHECK(again() == c);
}

TEST_CASE("sigma = 0 gives an all-zero matrix") {
  RngStream rng(0, 0);
  const Matrix z = gaussian_matrix(5, 4, 0.0, rng);
  CHECK(z.isZero(0.0));
  for (Index i = 0; i < z.size(); ++i) CHECK_FALSE(std::signbit(z.data()[i]));
}

TEST_CASE("gaussian_matrix rejects non-finite sigma and empty shapes") {
  RngStream rng(0, 0);
  CHECK_THROWS_AS(gaussian_matrix(2, 2, std::numeric_limits<double>::quiet_NaN(), rng), std::invalid_argument);
  CHECK_THROWS_AS(gaussian_matrix(2, 2, std::numeric_limits<double>::infinity(), rng), std::invalid_argument);
  CHECK_THROWS_AS(gaussian_matrix(0, 2, 1.0, rng), std::invalid_argument);
}

TEST_CASE("1000 x 1000 standard Gaussian matrix moments") {
  RngStream rng(2024, 1);
  const Matrix g = gaussian_matrix(1000, 1000, 1.0, rng);
  const double mean = g.mean();
  const double var = (g.array() - mean).square().sum() / static_cast<double>(g.size() - 1);
  CHECK(std::abs(mean) < 4.0 / 1000.0);
  CHECK(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("accumulate: constant and two-point observations") {
  const Estimate ones = estimate_of({1.0, 1.0, 1.0});
  CHECK(ones.mean == 1.0);
  CHECK(ones.m2 == 0.0);
  CHECK(ones.count == 3);
  CHECK(ones.standard_error() == 0.0);

  const Estimate two = estimate_of({0.0, 2.0});
  CHECK(two.mean == 1.0);
  CHECK(two.m2 == 2.0);
  CHECK(two.ci95_halfwidth() == doctest::Approx(1.96 * two.standard_error()));
}

TEST_CASE("accumulate rejects non-finite observations") {
  CHECK_THROWS_AS(accumulate({}, std::numeric_limits<double>::quiet_NaN()), std::invalid_argument);
  CHECK_THROWS_AS(accumulate({}, -std::numeric_limits<double>::infinity()), std::invalid_argument);
}

TEST_CASE("10^6 standard Gaussian draws have mean within 4e-3 of 0") {
  RngStream rng(5, 5);
  Estimate e;
  for (int k = 0; k < 1'000'000; ++k) e = accumulate(e, rng.gaussian());
  CHECK(std::abs(e.mean) < 4e-3);
  CHECK(e.standard_error() == doctest::Approx(1e-3).epsilon(0.01));
}

TEST_CASE("streaming statistics match a two-pass computation") {
  RngStream rng(11, 3);
  std::vector<double> xs(10'000);
  for (auto& x : xs) x = 3.0 + 0.5 * rng.gaussian() + rng.uniform();
  const Estimate e = estimate_of(xs);
  long double sum = 0.0L;
  for (double x : xs) sum += x;
  const long double mean = sum / xs.size();
  long double ss = 0.0L;
  for (double x : xs) ss += (x - mean) * (x - mean);
  CHECK(std::abs(e.mean - static_cast<double>(mean)) <= 1e-12 * std::abs(static_cast<double>(mean)));
  CHECK(std::abs(e.m2 - static_cast<double>(ss)) <= 1e-12 * static_cast<double>(ss));
}

TEST_CASE("uniform and below stay in range") {
  RngStream rng(9, 9);
  for (int k = 0; k < 100'000; ++k) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    REQUIRE(rng.below(7) < 7);
  }
  CHECK(rng.below(1) == 0);
}

TEST_CASE("below is unbiased over a small range") {
  RngStream rng(3, 1);
  std::vector<int> hist(5, 0);
  const int n = 500'000;
  for (int k = 0; k < n; ++k) ++hist[rng.below(5)];
  for (int h : hist) CHECK(std::abs(h - n / 5) < 4.0 * std::sqrt(n * 0.2 * 0.8));
}

TEST_CASE("parallel_trials reduces in trial order regardless of thread count") {
  const RngStream base(77, 0);
  auto fn = [&](std::int64_t t) {
    RngStream r = base.substream(static_cast<std::uint64_t>(t));
    return r.gaussian() * r.gaussian();
  };
  auto run = [&](int threads) {
    Estimate e;
    std::vector<std::int64_t> order;
    parallel_trials<double>(
        40'000, fn,
        [&](std::int64_t t, double v) {
          order.push_back(t);
          e = accumulate(e, v);
        },
        threads);
    for (std::size_t k = 0; k < order.size(); ++k) REQUIRE(order[k] == static_cast<std::int64_t>(k));
    return e;
  };
  Estimate serial;
  serial_trials<double>(40'000, fn, [&](std::int64_t, double v) { serial = accumulate(serial, v); });
  const Estimate one = run(1), four = run(4);
  CHECK(one.mean == serial.mean);
  CHECK(one.m2 == serial.m2);
  CHECK(four.mean == serial.mean);
  CHECK(four.m2 == serial.m2);
}

TEST_CASE("thread_count honors overrides") {
  set_thread_count(3);
  CHECK(thread_count() == 3);
  set_thread_count(0);
  CHECK(thread_count() >= 1);
}
