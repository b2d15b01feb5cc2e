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

// One SignSGD step of the embedding model split into feature-learning terms,
// the closed-form average-norm predictions for those terms, and Monte Carlo
// estimators for the idealized sign-Gaussian constructions behind them.
//
// For token i, with R = E0 W0 - Z, S_W = S(E0^T D R) and s_i the i-th row of
// S(D R W0^T), one step gives
//
//   E_{i,1} W_1 = E_{i,0} W_0 - delta_W - delta_E + delta_WE,
//   delta_W  = eta_W E_{i,0} S_W,
//   delta_E  = eta_E s_i W_0,
//   delta_WE = eta_E eta_W s_i S_W.

#ifndef LVLAB_FEATURE_LEARNING_HPP
#define LVLAB_FEATURE_LEARNING_HPP

#include "lvlab/common.hpp"
#include "lvlab/model.hpp"
#include "lvlab/montecarlo.hpp"
#include "lvlab/parametrization.hpp"
#include "lvlab/zipf.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace lvlab {

struct OneStepDecomposition {
  Token token{1};
  RowVector delta_W;
  RowVector delta_E;
  RowVector delta_WE;
  RowVector output_before;
  RowVector output_after;

  /// output_before - delta_W - delta_E + delta_WE.
  RowVector reconstruction() const { return output_before - delta_W - delta_E + delta_WE; }
  /// max_k |after_k - recon_k| / (|before_k| + |dW_k| + |dE_k| + |dWE_k|), 0 where the scale is 0.
  double reconstruction_error() const;
};

OneStepDecomposition one_step_decomposition(const ModelState& state0, const TokenDistribution& dist,
                                            const Targets& targets, double eta_E, double eta_W, Token token);

/// Several tokens sharing one step.
std::vector<OneStepDecomposition> one_step_decompositions(const ModelState& state0, const TokenDistribution& dist,
                                                          const Targets& targets, double eta_E, double eta_W,
                                                          std::span<const Token> tokens);

/// eta_E sigma_W sqrt(d + 2 d (d - 1) / (pi m)).
double theory_delta_E(double eta_E, double sigma_W, Index d, Index m);

/// eta_W sigma_E sqrt(d + (alpha_i^2 / mean_sq_freq) 2 d (d - 1) / (pi m)).
double theory_delta_W(double eta_W, double sigma_E, Index d, Index m, double alpha_i, double mean_sq_freq);

struct SteinResult {
  Estimate estimate;
  double theory = 0.0;
};

/// E[sign(Z) G] for standard Gaussians with correlation rho; theory sqrt(2/pi) rho.
SteinResult stein_check(double rho, std::int64_t trials, const RngStream& rng);

struct SignProductResult {
  Estimate mean_vector_norm;               ///< per trial |X| / sqrt(m)
  Estimate per_coord_variance;             ///< per trial (1/m) sum_k X_k^2
  std::vector<Estimate> coordinate_means;  ///< X_k across trials, k = 1..m
  double theory_variance = 0.0;
};

/// X = sum_j sign(<v, W_j>) W_j with W_j ~ N(0, sigma_W^2 I_m), v ~ N(0, I_m).
SignProductResult idealized_sign_product(Index d, Index m, double sigma_W, std::int64_t trials,
                                         const RngStream& rng);

struct HeteroResult {
  Token token{1};
  Estimate per_coord_variance;
  std::vector<Estimate> coordinate_means;
  double theory_variance = 0.0;  ///< hetero_theory_variance
  double exact_variance = 0.0;   ///< hetero_exact_variance
};

/// X = E_i sign(E^T M), E m x d standard Gaussian, row j of M ~ N(0, alpha_j^2 I_m).
/// All tokens are read off the same draws.
std::vector<HeteroResult> idealized_hetero(Index d, const TokenDistribution& dist, std::span<const Token> tokens,
                                           std::int64_t trials, const RngStream& rng);
HeteroResult idealized_hetero(Index d, const TokenDistribution& dist, Token token, std::int64_t trials,
                              const RngStream& rng);

/// d + (2/pi) amplification d (d - 1) / m.
double hetero_theory_variance(Index d, Index m, double amplification);

/// E[rho_i^2] with rho_i^2 = alpha_i^2 g_i^2 / sum_j alpha_j^2 g_j^2, g standard
/// Gaussian, from
///   int_0^inf alpha_i^2 (1 + 2 t alpha_i^2)^{-3/2} prod_{j != i} (1 + 2 t alpha_j^2)^{-1/2} dt.
/// Equals alpha_i^2 / sum_j alpha_j^2 only when the frequencies are uniform.
double hetero_rho_sq(const TokenDistribution& dist, Token token);

/// d + (2/pi) d (d - 1) E[rho_i^2], the second moment of X_k without the
/// uniform-frequency approximation.
double hetero_exact_variance(Index d, const TokenDistribution& dist, Token token);

/// Largest |mean| / SE over the coordinates (0 for zero-variance coordinates with zero mean).
double max_abs_z(const std::vector<Estimate>& coordinate_means);

enum class DominantTerm {
  kMuP,  ///< 2 d (d - 1) / (pi m) dominates the radical
  kLV,   ///< d dominates
};
std::string to_string(DominantTerm term);

struct RegimeReport {
  double delta_E_theory = 0.0;
  double delta_W_theory = 0.0;
  double balance_ratio = 0.0;  ///< delta_E_theory / delta_W_theory
  DominantTerm dominant_term_E = DominantTerm::kLV;
};

/// Evaluates both predictions with hyperparameters resolved at width d; W
/// uses the output-role rules.
RegimeReport regime_report(Index d, const TokenDistribution& dist, const Parametrization& param, Token token,
                           double base_eta = 1.0);

struct AvgNormReport {
  std::string component;  ///< "delta_E", "delta_W" or "delta_WE"
  Token token{1};
  Index d = 0;
  Index m = 0;
  Estimate mean_sq;       ///< |delta|^2 / m across inits
  double empirical = 0.0; ///< sqrt(mean_sq.mean)
  double se = 0.0;        ///< delta-method SE of `empirical`
  double theory = 0.0;    ///< 0 for delta_WE
  double ratio = 0.0;     ///< empirical / theory (0 without a theory value)
};

struct OneStepExperiment {
  Index d = 0;
  Index m = 0;
  double zipf_exponent = 1.0;
  Parametrization param;
  double base_eta = 1.0;
  std::vector<Token> tokens;
  std::int64_t inits = 0;
};

/// Average norms of the three terms over fresh inits with Z = EW - G.
/// Returns, per token, the delta_E, delta_W and delta_WE reports.
std::vector<AvgNormReport> one_step_average_norms(const OneStepExperiment& experiment, const RngStream& rng);

/// Path along which m depends on d for the scaling-exponent check.
struct RegimePath {
  enum class Kind { kFixed, kLinear, kCubic } kind = Kind::kFixed;
  double value = 0.0;  ///< m for kFixed, c in m = c d for kLinear; unused for kCubic
  Index m_at(Index d) const;
  std::string name() const;
};

struct PathSlope {
  double full_range = 0.0;  ///< OLS slope of log theory_delta_E on log d over all widths
  double lower_end = 0.0;   ///< slope between the two smallest widths
  double upper_end = 0.0;   ///< slope between the two largest widths
};

PathSlope delta_E_path_slope(const RegimePath& path, std::span<const Index> widths);

}  // namespace lvlab

#endif  // LVLAB_FEATURE_LEARNING_HPP
