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


#include "lvlab/sweep.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <vector>

using namespace lvlab;

namespace {

SweepRecord rec(Index d, double eta, std::uint64_t seed, double loss) {
  SweepRecord r;
  r.d = d;
  r.m = 8 * d;
  r.eta_E = eta;
  r.seed = seed;
  r.final_loss = loss;
  r.diverged = std::isinf(loss);
  return r;
}

SweepConfig tiny_config() {
  SweepConfig c;
  c.configurations = {{4, 32}, {8, 64}};
  c.lr_grid = {0.001, 0.01, 0.1};
  c.seeds = {0, 1};
  c.steps = 10;
  c.parametrization = parse_parametrization_config(R"({"parametrization": "LVP", "base_eta": 0.2})");
  c.teacher_rank = 2;
  return c;
}

}  // namespace

TEST_CASE("optimal_lr: geometric mean of the 20% band") {
  const std::vector<SweepRecord> r{rec(64, 0.1, 0, 1.0), rec(64, 0.2, 0, 1.1), rec(64, 0.4, 0, 2.0)};
  const OptimalLR o = optimal_lr(r);
  CHECK(o.eta_opt == doctest::Approx(std::sqrt(0.1 * 0.2)).epsilon(1e-15));
  CHECK(o.eta_opt == doctest::Approx(0.1414).epsilon(1e-3));
  CHECK(o.n_qualifying == 2);
  CHECK(o.best_mean_loss == 1.0);
  CHECK(o.d == 64);
  CHECK(o.m == 512);
}

TEST_CASE("optimal_lr: single point, zero threshold and seed averaging") {
  CHECK(optimal_lr(std::vector<SweepRecord>{rec(8, 0.3, 0, 5.0)}).eta_opt == 0.3);

  std::vector<SweepRecord> convex;
  for (int k = 0; k < 9; ++k) {
    const double eta = std::pow(2.0, k - 4);
    convex.push_back(rec(8, eta, 0, 1.0 + std::pow(std::log2(eta) - 1.0, 2)));
  }
  const OptimalLR o = optimal_lr(convex, 0.0);
  CHECK(o.eta_opt == 2.0);
  CHECK(o.n_qualifying == 1);

  // Seed 1 makes eta = 0.2 worse on average.
  const std::vector<SweepRecord> seeds{rec(8, 0.1, 0, 1.0), rec(8, 0.1, 1, 1.0), rec(8, 0.2, 0, 0.9),
                                       rec(8, 0.2, 1, 3.0)};
  CHECK(optimal_lr(seeds, 0.0).eta_opt == doctest::Approx(0.1).epsilon(1e-15));
}

TEST_CASE("optimal_lr: diverged seeds disqualify a learning rate; all diverged is an error") {
  const double inf = std::numeric_limits<double>::infinity();
  const std::vector<SweepRecord> mixed{rec(8, 0.1, 0, 1.0), rec(8, 0.2, 0, 0.5), rec(8, 0.2, 1, inf),
                                       rec(8, 0.1, 1, 1.0)};
  CHECK(optimal_lr(mixed).eta_opt == doctest::Approx(0.1).epsilon(1e-15));
  const std::vector<SweepRecord> dead{rec(8, 0.1, 0, inf), rec(8, 0.2, 0, inf)};
  CHECK_THROWS_AS(optimal_lr(dead), NoOptimumError);
}

TEST_CASE("optimal_lr is invariant under scaling the losses") {
  std::vector<SweepRecord> r{rec(16, 0.01, 0, 3.0), rec(16, 0.02, 0, 2.5), rec(16, 0.04, 0, 2.9),
                             rec(16, 0.08, 0, 7.0)};
  const double base = optimal_lr(r).eta_opt;
  for (auto& x : r) x.final_loss *= 37.5;
  CHECK(optimal_lr(r).eta_opt == base);
}

TEST_CASE("fit_slope on exact power laws") {
  for (double p : {0.0, -0.5, -1.0}) {
    std::vector<std::pair<Index, double>> pts;
    for (Index d = 64; d <= 512; d *= 2) pts.emplace_back(d, 0.3 * std::pow(static_cast<double>(d), p));
    const SlopeFit f = fit_slope(pts);
    CHECK(std::abs(f.slope - p) <= 1e-9);
    CHECK(f.distance_to(p) <= 1e-9);
    CHECK(f.distance_to(p - 0.5) == doctest::Approx(0.5));
    CHECK(f.per_d_optimal.size() == 4);
  }
}

TEST_CASE("fit_slope: scaling eta* moves only the intercept") {
  const std::vector<std::pair<Index, double>> pts{{64, 0.01}, {128, 0.008}, {256, 0.004}, {512, 0.0031}};
  std::vector<std::pair<Index, double>> scaled = pts;
  for (auto& p : scaled) p.second *= 8.0;
  const SlopeFit a = fit_slope(pts), b = fit_slope(scaled);
  CHECK(b.slope == doctest::Approx(a.slope).epsilon(1e-12));
  CHECK(b.r_squared == doctest::Approx(a.r_squared).epsilon(1e-12));
  CHECK(b.intercept == doctest::Approx(a.intercept + 3.0).epsilon(1e-12));
  CHECK(a.r_squared < 1.0);
  CHECK(a.slope_se > 0.0);
}

TEST_CASE("fit_slope needs three points over distinct widths") {
  CHECK_THROWS_AS(fit_slope(std::vector<std::pair<Index, double>>{{64, 0.1}, {128, 0.05}}), std::invalid_argument);
  CHECK_THROWS_AS(fit_slope(std::vector<std::pair<Index, double>>{{64, 0.1}, {64, 0.05}, {64, 0.2}}),
                  std::invalid_argument);
}

TEST_CASE("geometric grid: 13 points over four decades") {
  const auto g = geometric_grid(0.01, 4.0, 13);
  REQUIRE(g.size() == 13);
  CHECK(g.front() == doctest::Approx(1e-4).epsilon(1e-12));
  CHECK(g[6] == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(g.back() == doctest::Approx(1.0).epsilon(1e-12));
  for (std::size_t k = 1; k < g.size(); ++k) CHECK(g[k] > g[k - 1]);
  CHECK_THROWS_AS(geometric_grid(-1.0, 4.0, 13), std::invalid_argument);
}

TEST_CASE("validate") {
  SweepConfig c = tiny_config();
  CHECK_NOTHROW(validate(c, 3));
  CHECK_THROWS_AS(validate(c, 5), std::invalid_argument);
  c.lr_grid = {0.1, 0.01, 0.2};
  CHECK_THROWS_AS(validate(c, 1), std::invalid_argument);
  c.lr_grid = {0.0, 0.1};
  CHECK_THROWS_AS(validate(c, 1), std::invalid_argument);
  c = tiny_config();
  c.seeds.clear();
  CHECK_THROWS_AS(validate(c, 1), std::invalid_argument);
}

TEST_CASE("run_sweep: one cell, record count, determinism, serial agreement") {
  SweepConfig one = tiny_config();
  one.configurations = {{4, 32}};
  one.lr_grid = {0.01};
  one.seeds = {0};
  CHECK(run_sweep(one).size() == 1);

  const SweepConfig c = tiny_config();
  const auto a = run_sweep(c);
  CHECK(a.size() == 2 * 3 * 2);
  const auto b = run_sweep(c);
  const auto s = run_sweep_serial(c);
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(a[k].final_loss == b[k].final_loss);
    CHECK(a[k].final_loss == s[k].final_loss);
    CHECK(a[k].d == s[k].d);
    CHECK(a[k].eta_E == s[k].eta_E);
    CHECK(a[k].seed == s[k].seed);
  }
  CHECK(a[0].d == 4);
  CHECK(a[0].eta_E == 0.001);
  CHECK(a[1].seed == 1);
}

TEST_CASE("run_sweep records divergence instead of failing") {
  SweepConfig c = tiny_config();
  c.lr_grid = {0.01, 1e9};
  const auto r = run_sweep(c);
  bool any = false;
  for (const auto& x : r)
    if (x.eta_E == 1e9) {
      any = any || x.diverged;
      if (x.diverged) CHECK(std::isinf(x.final_loss));
    }
  CHECK(any);
}

TEST_CASE("cells share init and targets across learning rates, not across seeds") {
  const SweepConfig c = tiny_config();
  const TrainConfig a = cell_config(c, {8, 64}, 0.01, 0);
  const TrainConfig b = cell_config(c, {8, 64}, 0.1, 0);
  const TrainConfig s = cell_config(c, {8, 64}, 0.01, 1);
  CHECK(a.init_stream == b.init_stream);
  CHECK(a.target_stream == b.target_stream);
  CHECK(a.init_stream != s.init_stream);
  CHECK(a.eta_W == doctest::Approx(0.2 / 8));
  CHECK(a.sigma_E == doctest::Approx(1.0 / std::sqrt(8.0)));
  CHECK(a.eta_E == 0.01);
}

TEST_CASE("parse_sweep_config") {
  const auto p = parse_sweep_config(R"({
    "widths": [64, 128, 256], "vocab_ratio": 8,
    "lr_grid": {"points": 7, "decades": 2, "center": "lvp"},
    "seeds": 3, "seed": 11, "steps": 40, "base_eta": 0.2,
    "targets": {"kind": "teacher", "rank": 8}
  })");
  const SweepConfig& c = p.config;
  REQUIRE(c.configurations.size() == 3);
  CHECK(c.configurations[1] == WidthConfig{128, 1024});
  CHECK(c.seeds == std::vector<std::uint64_t>{0, 1, 2});
  CHECK(c.master_seed == 11);
  CHECK(c.steps == 40);
  CHECK(c.teacher_rank == 8);
  REQUIRE(c.lr_grid.size() == 7);
  CHECK(c.lr_grid[3] == doctest::Approx(0.2 / 128.0 * std::sqrt(128.0)).epsilon(1e-12));
  CHECK(c.precision == Precision::kFloat);

  const auto q = parse_sweep_config(R"({"configurations": [[4, 40]], "lr_grid": [0.1], "seeds": [5, 9],
                                         "precision": "double", "targets": {"kind": "gaussian_residual"}})");
  CHECK(q.config.configurations[0] == WidthConfig{4, 40});
  CHECK(q.config.seeds == std::vector<std::uint64_t>{5, 9});
  CHECK(q.config.targets == TargetKind::kGaussianResidual);

  CHECK_THROWS_AS(parse_sweep_config("{"), std::invalid_argument);
  CHECK_THROWS_AS(parse_sweep_config(R"({"lr_grid": [0.1]})"), std::invalid_argument);
  CHECK_THROWS_AS(parse_sweep_config(R"({"widths": [4], "lr_grid": [0.2, 0.1]})"), std::invalid_argument);
  CHECK_THROWS_AS(parse_sweep_config(R"({"widths": [4], "lr_grid": [0.1], "precision": "half"})"),
                  std::invalid_argument);
  CHECK_THROWS_AS(parse_sweep_config(R"({"widths": [4], "lr_grid": [0.1], "optimizer": "lion"})"),
                  std::invalid_argument);
}

TEST_CASE("pre-sweep picks a base constant before the grid is built") {
  auto p = parse_sweep_config(R"({"widths": [4, 8], "steps": 10, "seeds": 1,
                                   "lr_grid": {"points": 5, "decades": 2},
                                   "base_eta": {"presweep": [0.001, 0.2, 1000.0]},
                                   "targets": {"rank": 2}})");
  REQUIRE(p.presweep);
  const auto result = resolve_sweep_config(p);
  REQUIRE(result);
  CHECK(result->candidates.size() == 3);
  CHECK(result->base_eta == 0.2);
  CHECK(p.config.parametrization.base_eta == 0.2);
  CHECK(p.config.lr_grid.size() == 5);
  CHECK_FALSE(p.presweep);
}

TEST_CASE("sweep.csv round trip") {
  const double inf = std::numeric_limits<double>::infinity();
  const std::vector<SweepRecord> r{rec(64, 0.1, 0, 0.123456789012345678), rec(64, 1.0 / 3.0, 2, inf)};
  std::stringstream ss;
  write_sweep_csv(ss, r);
  CHECK(ss.str().rfind("d,m,eta_E,seed,final_loss,diverged\n", 0) == 0);
  const auto back = read_sweep_csv(ss);
  REQUIRE(back.size() == 2);
  CHECK(back[0].final_loss == r[0].final_loss);
  CHECK(back[1].eta_E == r[1].eta_E);
  CHECK(back[1].diverged);
  CHECK(std::isinf(back[1].final_loss));

  std::istringstream bad("d,m,eta_E,seed,final_loss,diverged\n64,512,0.1,0,1.0,0\n64,512,x,0,1,0\n");
  try {
    read_sweep_csv(bad);
    FAIL("expected an error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  std::istringstream header("d,m,eta,seed,final_loss,diverged\n");
  CHECK_THROWS(read_sweep_csv(header));
}

TEST_CASE("analysis outputs") {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<SweepRecord> r;
  for (Index d : {64, 128, 256, 512}) {
    const double c = 1.0 / std::sqrt(static_cast<double>(d));
    r.push_back(rec(d, 0.5 * c, 0, 2.0));
    r.push_back(rec(d, c, 0, 1.0));
    r.push_back(rec(d, 2.0 * c, 0, 3.0));
  }
  r.push_back(rec(1024, 0.1, 0, inf));
  const SweepAnalysis a = analyze_sweep(r);
  REQUIRE(a.fit);
  CHECK(a.fit->slope == doctest::Approx(-0.5).epsilon(1e-12));
  REQUIRE(a.failed.size() == 1);
  CHECK(a.failed[0].d == 1024);

  std::ostringstream opt;
  write_optimal_csv(opt, a);
  CHECK(opt.str().rfind("d,m,eta_opt,n_qualifying\n", 0) == 0);
  CHECK(opt.str().find("1024,8192,error:no_optimum,0\n") != std::string::npos);

  const auto j = nlohmann::json::parse(slopes_json(*a.fit));
  CHECK(j.at("slope").get<double>() == doctest::Approx(-0.5));
  CHECK(j.at("ref_distances").at("-1/2").get<double>() < 1e-12);
  CHECK(j.at("ref_distances").at("0").get<double>() == doctest::Approx(0.5));
  CHECK(j.at("r_squared").get<double>() == doctest::Approx(1.0));
  CHECK_FALSE(j.at("low_r_squared").get<bool>());
  CHECK(j.at("per_d_optimal").size() == 4);
}

TEST_CASE("format_real round trips") {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, 12345.678, 0.0}) CHECK(std::stod(format_real(v)) == v);
  CHECK(format_real(std::numeric_limits<double>::infinity()) == "inf");
}
