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

// The lookup-embedding linear model f(u_i) = E_i W trained on the square loss
//
//   L(E, W) = sum_i alpha_i / (2m) * |E_i W - z_i|^2 .

#ifndef LVLAB_MODEL_HPP
#define LVLAB_MODEL_HPP

#include "lvlab/common.hpp"
#include "lvlab/montecarlo.hpp"
#include "lvlab/zipf.hpp"

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace lvlab {

struct ModelState {
  Matrix E;  ///< m x d
  Matrix W;  ///< d x m
  Index m = 0;
  Index d = 0;
  double sigma_E = 0.0;
  double sigma_W = 0.0;
};

/// E ~ N(0, sigma_E^2), W ~ N(0, sigma_W^2), i.i.d. E is drawn first.
ModelState init_model(Index m, Index d, double sigma_E, double sigma_W, RngStream& rng);

/// Target rows z_i, stored either densely (m x m) or as a product A B with
/// A: m x r and B: r x m, which is never materialized by the trainer.
class Targets {
 public:
  static Targets dense(Matrix Z);
  static Targets factored(Matrix A, Matrix B);

  Index size() const { return is_factored() ? A_.rows() : Z_.rows(); }
  bool is_factored() const { return factored_; }
  Index rank() const { return is_factored() ? A_.cols() : Z_.cols(); }

  /// Throws std::logic_error for factored targets.
  const Matrix& matrix() const;
  const Matrix& left() const { return A_; }
  const Matrix& right() const { return B_; }
  /// Z as a dense matrix (copies for dense targets).
  Matrix materialize() const;
  RowVector row(Index i) const;

 private:
  Targets() = default;
  bool factored_ = false;
  Matrix Z_;
  Matrix A_;
  Matrix B_;
};

struct TargetOptions {
  /// Sets G = 0, so Z = EW and the loss starts at zero.
  bool zero_noise = false;
};

/// Z = EW - G with G i.i.d. N(0, 1): the residual at initialization is
/// exactly standard Gaussian.
Targets make_targets(const ModelState& state, RngStream& rng, const TargetOptions& options = {});

/// Low-rank teacher Z = A B, A ~ N(0, 1) (m x rank), B ~ N(0, scale^2 / rank)
/// (rank x m), so every entry of Z has variance scale^2.
Targets make_teacher_targets(Index m, Index rank, double scale, RngStream& rng);

/// E_i W for token i.
RowVector forward(const ModelState& state, Token token);

double population_loss(const ModelState& state, const TokenDistribution& dist, const Targets& targets);

struct GradientPair {
  Matrix dE;  ///< m x d
  Matrix dW;  ///< d x m
};

enum class GradientScale {
  kTrue,         ///< derivatives of population_loss (carry the 1/m factor)
  kRawResidual,  ///< D_alpha (EW - Z) W^T and E^T D_alpha (EW - Z)
};

GradientPair infinite_batch_gradients(const ModelState& state, const TokenDistribution& dist, const Targets& targets,
                                      GradientScale scale = GradientScale::kTrue);

/// Same formulas with arbitrary nonnegative per-token weights in place of
/// alpha (no renormalization).
GradientPair weighted_gradients(const ModelState& state, const Vector& weights, const Targets& targets,
                                GradientScale scale = GradientScale::kTrue);

/// Empirical frequencies from `batch` multinomial draws replace alpha.
GradientPair finite_batch_gradients(const ModelState& state, const TokenDistribution& dist, const Targets& targets,
                                    std::uint64_t batch, RngStream& rng, GradientScale scale = GradientScale::kTrue);

/// Entrywise +1 where M >= 0, -1 elsewhere.
Matrix sign_map(const Matrix& M);

enum class OptimizerKind { kSignSGD, kAdam, kSGD };

/// Optimizer choice plus its per-parameter state.
class Optimizer {
 public:
  static Optimizer sign_sgd() { return Optimizer(OptimizerKind::kSignSGD); }
  static Optimizer sgd() { return Optimizer(OptimizerKind::kSGD); }
  static Optimizer adam(double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8);

  OptimizerKind kind() const { return kind_; }
  double beta1() const { return beta1_; }
  double beta2() const { return beta2_; }
  double epsilon() const { return epsilon_; }
  std::int64_t steps_taken() const { return t_; }

  std::string name() const;

 private:
  explicit Optimizer(OptimizerKind kind) : kind_(kind) {}
  friend ModelState step(ModelState, const GradientPair&, Optimizer&, double, double);

  OptimizerKind kind_;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double epsilon_ = 1e-8;
  std::int64_t t_ = 0;
  Matrix mE_, vE_, mW_, vW_;
};

/// Parses "signsgd", "sgd", "adam" (case-insensitive) with default moments.
Optimizer parse_optimizer(const std::string& name);

/// One optimizer update. Throws std::invalid_argument on a shape mismatch.
ModelState step(ModelState state, const GradientPair& grads, Optimizer& opt, double eta_E, double eta_W);

/// Loss above which a run counts as diverged.
inline constexpr double kDivergenceLoss = 1e12;

enum class TargetKind {
  kGaussianResidual,  ///< Z = EW - G, dense
  kTeacher,           ///< low-rank Z = A B
};

enum class Precision { kDouble, kFloat };

struct TrainConfig {
  Index m = 0;
  Index d = 0;
  double zipf_exponent = 1.0;
  double sigma_E = 0.0;
  double sigma_W = 0.0;
  double eta_E = 0.0;
  double eta_W = 0.0;
  OptimizerKind optimizer = OptimizerKind::kSignSGD;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  int steps = 0;
  std::uint64_t seed = 0;

  TargetKind targets = TargetKind::kGaussianResidual;
  Index teacher_rank = 0;      ///< 0 means rank d
  double teacher_scale = 0.0;  ///< 0 means sigma_E * sigma_W * sqrt(d)
  /// Streams for the model init and the targets. Runs that share these see
  /// the same initialization and the same targets.
  std::uint64_t init_stream = 1;
  std::uint64_t target_stream = 2;

  /// Float halves the cost of the big products; losses are still reported
  /// in double, and the last one is recomputed in double.
  Precision precision = Precision::kDouble;
  /// When false only the initial and final losses are computed.
  bool record_trajectory = true;
};

struct TrainResult {
  /// steps + 1 losses (entries not computed are NaN); +inf from the
  /// divergence step onward.
  std::vector<double> losses;
  bool diverged = false;
  int diverged_at = -1;
  double final_loss() const { return losses.empty() ? std::numeric_limits<double>::quiet_NaN() : losses.back(); }
};

/// Deterministic training run: init, targets, then `steps` full-batch steps.
TrainResult train(const TrainConfig& config, const TokenDistribution& dist);

/// Same as train() but starting from the given state and targets.
TrainResult train_from(ModelState state, const Targets& targets, const TokenDistribution& dist,
                       const TrainConfig& config);

/// CSV with header `step,loss,diverged`.
void write_trajectory_csv(std::ostream& out, const TrainResult& result);

}  // namespace lvlab

#endif  // LVLAB_MODEL_HPP
