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

// Verification suites shared by `lvlab verify` and the acceptance runner.
// Each suite returns rows of the CSV
//
//   check,d,m,token,empirical,se,theory,ratio,pass
//
// where `pass` is "pass", "fail" or "info" (reported, not asserted).

#ifndef LVLAB_CHECKS_HPP
#define LVLAB_CHECKS_HPP

#include "lvlab/common.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace lvlab {

enum class Verdict { kPass, kFail, kInfo };

struct CheckRow {
  std::string check;
  std::optional<Index> d;
  std::optional<Index> m;
  std::optional<Index> token;
  double empirical = 0.0;
  std::optional<double> se;
  std::optional<double> theory;
  Verdict verdict = Verdict::kInfo;

  /// empirical / theory when theory is set and nonzero.
  std::optional<double> ratio() const;
};

void write_check_csv(std::ostream& out, const std::vector<CheckRow>& rows);

/// True when no row failed.
bool all_pass(const std::vector<CheckRow>& rows);

struct SteinSuite {
  std::vector<double> rhos{0.0, 0.25, 0.5, 1.0};
  std::int64_t trials = 1'000'000;
  double z_limit = 4.0;
};
std::vector<CheckRow> run_stein_suite(const SteinSuite& suite, std::uint64_t seed);

struct CovarianceSuite {
  Index d = 64;
  Index m = 256;
  double sigma_W = 1.0;
  std::int64_t trials = 20'000;
  double rel_tol = 0.02;
  double z_limit = 4.0;
};
std::vector<CheckRow> run_covariance_suite(const CovarianceSuite& suite, std::uint64_t seed);

struct HeteroSuite {
  Index d = 64;
  Index m = 256;
  double zipf_a = 1.0;
  std::vector<Index> tokens{1, 10, 100};
  std::int64_t trials = 20'000;
  double rel_tol = 0.03;
  double z_limit = 4.0;
};
/// Per token: the closed-form variance (asserted), the exact second moment
/// (asserted) and the worst coordinate mean (asserted).
std::vector<CheckRow> run_hetero_suite(const HeteroSuite& suite, std::uint64_t seed);

struct ReconstructionSuite {
  int instances = 50;
  Index max_m = 256;
  Index max_d = 64;
  double rel_tol = 1e-10;
};
/// Random (m, d, token, scales, learning rates, targets) per instance.
std::vector<CheckRow> run_reconstruction_suite(const ReconstructionSuite& suite, std::uint64_t seed);

struct ThetaBandSuite {
  std::vector<Index> widths{16, 32, 64};
  std::vector<Index> vocab_sizes{128, 512, 2048};
  std::vector<Index> tokens{1, 2, 4};
  std::int64_t inits = 200;
  double zipf_a = 1.0;
  std::string parametrization = "LVP";
  double base_eta = 0.2;
  double band_lo = 0.7;
  double band_hi = 1.4;
};
std::vector<CheckRow> run_theta_band_suite(const ThetaBandSuite& suite, std::uint64_t seed);

struct RegimeSuite {
  Index d_min = 16;
  Index d_max = 1024;
  Index m_fixed = 64;
  double tol = 0.1;
  double zipf_a = 1.0;
  double balance_factor = 2.0;  ///< allowed max/min of the balance ratio along m = 8d
  Index balance_d_min = 64;
  Index balance_d_max = 1024;
};
std::vector<CheckRow> run_regime_suite(const RegimeSuite& suite);

}  // namespace lvlab

#endif  // LVLAB_CHECKS_HPP
