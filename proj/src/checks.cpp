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


#include "lvlab/checks.hpp"

#include "lvlab/feature_learning.hpp"
#include "lvlab/montecarlo.hpp"
#include "lvlab/sweep.hpp"
#include "lvlab/zipf.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <sstream>

namespace lvlab {

namespace {

// Stream ids of the suites under one master seed.
constexpr std::uint64_t kSteinStream = 101;
constexpr std::uint64_t kCovarianceStream = 102;
constexpr std::uint64_t kHeteroStream = 103;
constexpr std::uint64_t kReconstructionStream = 104;
constexpr std::uint64_t kThetaBandStream = 105;

Verdict verdict(bool ok) { return ok ? Verdict::kPass : Verdict::kFail; }

const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::kPass:
      return "pass";
    case Verdict::kFail:
      return "fail";
    case Verdict::kInfo:
      return "info";
  }
  return "";
}

std::string label(const std::string& base, double value) {
  std::ostringstream os;
  os << base << value;
  return os.str();
}

CheckRow worst_mean_row(const std::string& name, const std::vector<Estimate>& means, double z_limit) {
  CheckRow row;
  row.check = name;
  std::size_t worst = 0;
  double worst_z = -1.0;
  for (std::size_t k = 0; k < means.size(); ++k) {
    const double se = means[k].standard_error();
    const double z = se > 0.0 ? std::abs(means[k].mean) / se : (means[k].mean == 0.0 ? 0.0 : HUGE_VAL);
    if (z > worst_z) {
      worst_z = z;
      worst = k;
    }
  }
  row.empirical = means[worst].mean;
  row.se = means[worst].standard_error();
  row.theory = 0.0;
  row.verdict = verdict(worst_z <= z_limit);
  return row;
}

}  // namespace

std::optional<double> CheckRow::ratio() const {
  if (!theory || *theory == 0.0) return std::nullopt;
  return empirical / *theory;
}

void write_check_csv(std::ostream& out, const std::vector<CheckRow>& rows) {
  out << "check,d,m,token,empirical,se,theory,ratio,pass\n";
  auto opt_index = [&](const std::optional<Index>& v) {
    if (v) out << *v;
    out << ',';
  };
  auto opt_real = [&](const std::optional<double>& v) {
    if (v) out << format_real(*v);
    out << ',';
  };
  for (const auto& row : rows) {
    out << row.check << ',';
    opt_index(row.d);
    opt_index(row.m);
    opt_index(row.token);
    out << format_real(row.empirical) << ',';
    opt_real(row.se);
    opt_real(row.theory);
    opt_real(row.ratio());
    out << verdict_name(row.verdict) << '\n';
  }
}

bool all_pass(const std::vector<CheckRow>& rows) {
  return std::none_of(rows.begin(), rows.end(), [](const CheckRow& r) { return r.verdict == Verdict::kFail; });
}

std::vector<CheckRow> run_stein_suite(const SteinSuite& suite, std::uint64_t seed) {
  std::vector<CheckRow> rows;
  const RngStream base(seed, kSteinStream);
  for (std::size_t k = 0; k < suite.rhos.size(); ++k) {
    const SteinResult r = stein_check(suite.rhos[k], suite.trials, base.substream(k));
    CheckRow row;
    row.check = label("stein_rho=", suite.rhos[k]);
    row.empirical = r.estimate.mean;
    row.se = r.estimate.standard_error();
    row.theory = r.theory;
    row.verdict = verdict(std::abs(r.estimate.mean - r.theory) <= suite.z_limit * *row.se);
    rows.push_back(row);
  }
  return rows;
}

std::vector<CheckRow> run_covariance_suite(const CovarianceSuite& suite, std::uint64_t seed) {
  const SignProductResult r =
      idealized_sign_product(suite.d, suite.m, suite.sigma_W, suite.trials, RngStream(seed, kCovarianceStream));
  CheckRow var;
  var.check = "covariance_variance";
  var.d = suite.d;
  var.m = suite.m;
  var.empirical = r.per_coord_variance.mean;
  var.se = r.per_coord_variance.standard_error();
  var.theory = r.theory_variance;
  var.verdict = verdict(std::abs(var.empirical / r.theory_variance - 1.0) <= suite.rel_tol);
  CheckRow mean = worst_mean_row("covariance_mean_worst", r.coordinate_means, suite.z_limit);
  mean.d = suite.d;
  mean.m = suite.m;
  return {var, mean};
}

std::vector<CheckRow> run_hetero_suite(const HeteroSuite& suite, std::uint64_t seed) {
  const TokenDistribution dist = zipf_distribution(suite.m, suite.zipf_a);
  std::vector<Token> tokens;
  for (Index t : suite.tokens) tokens.emplace_back(t);
  const auto results = idealized_hetero(suite.d, dist, tokens, suite.trials, RngStream(seed, kHeteroStream));
  std::vector<CheckRow> rows;
  for (const auto& r : results) {
    for (int kind = 0; kind < 2; ++kind) {
      CheckRow row;
      row.check = kind == 0 ? "hetero_variance" : "hetero_variance_exact";
      row.d = suite.d;
      row.m = suite.m;
      row.token = r.token.rank();
      row.empirical = r.per_coord_variance.mean;
      row.se = r.per_coord_variance.standard_error();
      row.theory = kind == 0 ? r.theory_variance : r.exact_variance;
      row.verdict = verdict(std::abs(row.empirical / *row.theory - 1.0) <= suite.rel_tol);
      rows.push_back(row);
    }
    CheckRow mean = worst_mean_row("hetero_mean_worst", r.coordinate_means, suite.z_limit);
    mean.d = suite.d;
    mean.m = suite.m;
    mean.token = r.token.rank();
    rows.push_back(mean);
  }
  return rows;
}

std::vector<CheckRow> run_reconstruction_suite(const ReconstructionSuite& suite, std::uint64_t seed) {
  std::vector<CheckRow> rows;
  const RngStream base(seed, kReconstructionStream);
  for (int k = 0; k < suite.instances; ++k) {
    RngStream r = base.substream(static_cast<std::uint64_t>(k));
    const Index m = 1 + static_cast<Index>(r.below(static_cast<std::uint64_t>(suite.max_m)));
    const Index d = 1 + static_cast<Index>(r.below(static_cast<std::uint64_t>(suite.max_d)));
    const Token token(1 + static_cast<Index>(r.below(static_cast<std::uint64_t>(m))));
    const double sigma_E = 0.1 + 1.9 * r.uniform();
    const double sigma_W = 0.1 + 1.9 * r.uniform();
    const double eta_E = std::pow(10.0, -4.0 + 4.0 * r.uniform());
    const double eta_W = std::pow(10.0, -4.0 + 4.0 * r.uniform());
    const double zipf_a = 0.6 + 0.8 * r.uniform();
    const TokenDistribution dist = zipf_distribution(m, zipf_a);
    const ModelState state = init_model(m, d, sigma_E, sigma_W, r);
    const Targets targets = make_targets(state, r);
    const OneStepDecomposition dec = one_step_decomposition(state, dist, targets, eta_E, eta_W, token);
    CheckRow row;
    row.check = "one_step_reconstruction";
    row.d = d;
    row.m = m;
    row.token = token.rank();
    row.empirical = dec.reconstruction_error();
    row.theory = 0.0;
    row.verdict = verdict(row.empirical <= suite.rel_tol);
    rows.push_back(row);
  }
  return rows;
}

std::vector<CheckRow> run_theta_band_suite(const ThetaBandSuite& suite, std::uint64_t seed) {
  std::vector<CheckRow> rows;
  const RngStream base(seed, kThetaBandStream);
  std::uint64_t cell = 0;
  for (Index d : suite.widths) {
    for (Index m : suite.vocab_sizes) {
      OneStepExperiment ex;
      ex.d = d;
      ex.m = m;
      ex.zipf_exponent = suite.zipf_a;
      ex.param = preset(suite.parametrization);
      ex.base_eta = suite.base_eta;
      for (Index t : suite.tokens) ex.tokens.emplace_back(t);
      ex.inits = suite.inits;
      for (const AvgNormReport& rep : one_step_average_norms(ex, base.substream(cell++))) {
        CheckRow row;
        row.check = "theta_band_" + rep.component;
        row.d = d;
        row.m = m;
        row.token = rep.token.rank();
        row.empirical = rep.empirical;
        row.se = rep.se;
        if (rep.theory > 0.0) {
          row.theory = rep.theory;
          row.verdict = verdict(rep.ratio >= suite.band_lo && rep.ratio <= suite.band_hi);
        }
        rows.push_back(row);
      }
    }
  }
  return rows;
}

std::vector<CheckRow> run_regime_suite(const RegimeSuite& suite) {
  std::vector<CheckRow> rows;
  std::vector<Index> widths;
  for (Index d = suite.d_min; d <= suite.d_max; d *= 2) widths.push_back(d);

  const RegimePath fixed{RegimePath::Kind::kFixed, static_cast<double>(suite.m_fixed)};
  const RegimePath cubic{RegimePath::Kind::kCubic, 0.0};
  for (const auto& [path, limit] : {std::pair{fixed, 1.0}, std::pair{cubic, 0.5}}) {
    const PathSlope s = delta_E_path_slope(path, widths);
    CheckRow upper;
    upper.check = "regime_slope_upper_end:" + path.name();
    upper.empirical = s.upper_end;
    upper.theory = limit;
    upper.verdict = verdict(std::abs(s.upper_end - limit) <= suite.tol);
    CheckRow full = upper;
    full.check = "regime_slope_full_range:" + path.name();
    full.empirical = s.full_range;
    full.verdict = Verdict::kInfo;
    CheckRow lower = upper;
    lower.check = "regime_slope_lower_end:" + path.name();
    lower.empirical = s.lower_end;
    lower.verdict = Verdict::kInfo;
    rows.push_back(upper);
    rows.push_back(full);
    rows.push_back(lower);
  }

  // Dominant addend of the delta_E radical: the ratio of 2d(d-1)/(pi m) to d.
  const auto dominant_row = [](const std::string& name, Index d, Index m, bool expect_mup) {
    const auto dd = static_cast<double>(d);
    CheckRow row;
    row.check = name;
    row.d = d;
    row.m = m;
    row.empirical = 2.0 * (dd - 1.0) / (std::numbers::pi * static_cast<double>(m));
    row.theory = 1.0;
    row.verdict = verdict((row.empirical > 1.0) == expect_mup);
    return row;
  };
  rows.push_back(dominant_row("regime_dominant_mup_term", suite.d_max, suite.m_fixed, true));
  rows.push_back(dominant_row("regime_dominant_lv_term", suite.d_max, suite.d_max * suite.d_max * suite.d_max, false));

  double lo = HUGE_VAL, hi = 0.0;
  const Parametrization lvp = preset(Preset::kLVP);
  for (Index d = suite.balance_d_min; d <= suite.balance_d_max; d *= 2) {
    const TokenDistribution dist = zipf_distribution(8 * d, suite.zipf_a);
    const RegimeReport rep = regime_report(d, dist, lvp, Token(1));
    CheckRow row;
    row.check = "regime_balance_ratio";
    row.d = d;
    row.m = 8 * d;
    row.token = 1;
    row.empirical = rep.balance_ratio;
    rows.push_back(row);
    lo = std::min(lo, rep.balance_ratio);
    hi = std::max(hi, rep.balance_ratio);
  }
  CheckRow spread;
  spread.check = "regime_balance_spread";
  spread.empirical = hi / lo;
  spread.theory = suite.balance_factor;
  spread.verdict = verdict(hi / lo < suite.balance_factor);
  rows.push_back(spread);
  return rows;
}

}  // namespace lvlab
