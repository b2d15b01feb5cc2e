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

#include "lvlab/model.hpp"

#include "lvlab/kernels.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace lvlab {

namespace {

void check_sigma(double sigma, const char* what) {
  if (!std::isfinite(sigma) || sigma < 0.0)
    throw std::invalid_argument(std::string("init_model: ") + what + " must be finite and >= 0");
}

void check_shapes(const ModelState& state, const Targets& targets) {
  if (state.E.rows() != state.m || state.E.cols() != state.d || state.W.rows() != state.d ||
      state.W.cols() != state.m)
    throw std::invalid_argument("model state shapes are inconsistent");
  if (targets.size() != state.m) throw std::invalid_argument("targets do not match the vocabulary size");
}

void check_weights(const Vector& weights, Index m) {
  if (weights.size() != m) throw std::invalid_argument("frequency vector does not match the vocabulary size");
}

double grad_factor(GradientScale scale, Index m) {
  return scale == GradientScale::kTrue ? 1.0 / static_cast<double>(m) : 1.0;
}

}  // namespace

ModelState init_model(Index m, Index d, double sigma_E, double sigma_W, RngStream& rng) {
  if (m < 1 || d < 1) throw std::invalid_argument("init_model: m and d must be >= 1");
  check_sigma(sigma_E, "sigma_E");
  check_sigma(sigma_W, "sigma_W");
  ModelState s;
  s.m = m;
  s.d = d;
  s.sigma_E = sigma_E;
  s.sigma_W = sigma_W;
  s.E = gaussian_matrix(m, d, sigma_E, rng);
  s.W = gaussian_matrix(d, m, sigma_W, rng);
  return s;
}

Targets Targets::dense(Matrix Z) {
  if (Z.rows() != Z.cols()) throw std::invalid_argument("targets: Z must be m x m");
  if (!Z.allFinite()) throw std::invalid_argument("targets: non-finite entry");
  Targets t;
  t.Z_ = std::move(Z);
  return t;
}

Targets Targets::factored(Matrix A, Matrix B) {
  if (A.cols() != B.rows() || A.rows() != B.cols())
    throw std::invalid_argument("targets: factors must be m x r and r x m");
  if (!A.allFinite() || !B.allFinite()) throw std::invalid_argument("targets: non-finite entry");
  Targets t;
  t.factored_ = true;
  t.A_ = std::move(A);
  t.B_ = std::move(B);
  return t;
}

const Matrix& Targets::matrix() const {
  if (factored_) throw std::logic_error("targets are stored in factored form");
  return Z_;
}

Matrix Targets::materialize() const {
  if (!factored_) return Z_;
  return A_ * B_;
}

RowVector Targets::row(Index i) const {
  if (i < 0 || i >= size()) throw std::out_of_range("targets: row out of range");
  if (!factored_) return Z_.row(i);
  return A_.row(i) * B_;
}

Targets make_targets(const ModelState& state, RngStream& rng, const TargetOptions& options) {
  Matrix Z = state.E * state.W;
  if (!options.zero_noise) Z -= gaussian_matrix(state.m, state.m, 1.0, rng);
  return Targets::dense(std::move(Z));
}

Targets make_teacher_targets(Index m, Index rank, double scale, RngStream& rng) {
  if (m < 1 || rank < 1) throw std::invalid_argument("teacher targets: m and rank must be >= 1");
  if (!std::isfinite(scale) || scale < 0.0) throw std::invalid_argument("teacher targets: scale must be >= 0");
  Matrix A = gaussian_matrix(m, rank, 1.0, rng);
  Matrix B = gaussian_matrix(rank, m, scale / std::sqrt(static_cast<double>(rank)), rng);
  return Targets::factored(std::move(A), std::move(B));
}

RowVector forward(const ModelState& state, Token token) {
  if (token.rank() < 1 || token.rank() > state.m) throw std::out_of_range("forward: token out of range");
  return state.E.row(token.index()) * state.W;
}

double population_loss(const ModelState& state, const TokenDistribution& dist, const Targets& targets) {
  check_shapes(state, targets);
  const Vector weights = dist.frequencies();
  check_weights(weights, state.m);
  const int threads = thread_count();
  if (targets.is_factored()) {
    const Matrix BBt = targets.right() * targets.right().transpose();
    return kernels::factored_loss(state.E, state.W, targets.left(), targets.right(), BBt, weights, threads);
  }
  Matrix R = state.E * state.W - targets.matrix();
  double total = 0.0;
  for (Index i = state.m - 1; i >= 0; --i) total += weights(i) * R.row(i).squaredNorm();
  return total / (2.0 * static_cast<double>(state.m));
}

GradientPair weighted_gradients(const ModelState& state, const Vector& weights, const Targets& targets,
                                GradientScale scale) {
  check_shapes(state, targets);
  check_weights(weights, state.m);
  const int threads = thread_count();
  const double c = grad_factor(scale, state.m);
  kernels::LossAndGradients<double> lg;
  if (targets.is_factored()) {
    const Matrix BBt = targets.right() * targets.right().transpose();
    lg = kernels::factored_loss_and_gradients(state.E, state.W, targets.left(), targets.right(), BBt, weights, c,
                                              false, threads);
  } else {
    lg = kernels::dense_loss_and_gradients(state.E, state.W, targets.matrix(), weights, c, false, threads);
  }
  return {std::move(lg.dE), std::move(lg.dW)};
}

GradientPair infinite_batch_gradients(const ModelState& state, const TokenDistribution& dist, const Targets& targets,
                                      GradientScale scale) {
  return weighted_gradients(state, dist.frequencies(), targets, scale);
}

GradientPair finite_batch_gradients(const ModelState& state, const TokenDistribution& dist, const Targets& targets,
                                    std::uint64_t batch, RngStream& rng, GradientScale scale) {
  if (batch < 1) throw std::invalid_argument("finite_batch_gradients: batch size must be >= 1");
  const auto counts = sample_counts(dist, batch, rng);
  Vector empirical(static_cast<Index>(counts.size()));
  for (std::size_t k = 0; k < counts.size(); ++k)
    empirical(static_cast<Index>(k)) = static_cast<double>(counts[k]) / static_cast<double>(batch);
  return weighted_gradients(state, empirical, targets, scale);
}

Matrix sign_map(const Matrix& M) {
  return M.unaryExpr([](double v) { return v >= 0.0 ? 1.0 : -1.0; });
}

Optimizer Optimizer::adam(double beta1, double beta2, double epsilon) {
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw std::invalid_argument("adam: moments must lie in [0, 1)");
  if (!(epsilon > 0.0)) throw std::invalid_argument("adam: epsilon must be > 0");
  Optimizer opt(OptimizerKind::kAdam);
  opt.beta1_ = beta1;
  opt.beta2_ = beta2;
  opt.epsilon_ = epsilon;
  return opt;
}

std::string Optimizer::name() const {
  switch (kind_) {
    case OptimizerKind::kSignSGD:
      return "signsgd";
    case OptimizerKind::kAdam:
      return "adam";
    case OptimizerKind::kSGD:
      return "sgd";
  }
  return "unknown";
}

Optimizer parse_optimizer(const std::string& name) {
  std::string lower = name;
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "signsgd") return Optimizer::sign_sgd();
  if (lower == "sgd") return Optimizer::sgd();
  if (lower == "adam") return Optimizer::adam();
  throw std::invalid_argument("unknown optimizer '" + name + "'");
}

ModelState step(ModelState state, const GradientPair& grads, Optimizer& opt, double eta_E, double eta_W) {
  if (grads.dE.rows() != state.E.rows() || grads.dE.cols() != state.E.cols() || grads.dW.rows() != state.W.rows() ||
      grads.dW.cols() != state.W.cols())
    throw std::invalid_argument("step: gradient shapes do not match the model");
  const int threads = thread_count();
  switch (opt.kind_) {
    case OptimizerKind::kSignSGD:
      kernels::sign_descent(state.E, grads.dE, eta_E, threads);
      kernels::sign_descent(state.W, grads.dW, eta_W, threads);
      break;
    case OptimizerKind::kSGD:
      kernels::gradient_descent(state.E, grads.dE, eta_E, threads);
      kernels::gradient_descent(state.W, grads.dW, eta_W, threads);
      break;
    case OptimizerKind::kAdam:
      if (opt.t_ == 0) {
        opt.mE_ = opt.vE_ = Matrix::Zero(state.E.rows(), state.E.cols());
        opt.mW_ = opt.vW_ = Matrix::Zero(state.W.rows(), state.W.cols());
      } else if (opt.mE_.rows() != state.E.rows() || opt.mE_.cols() != state.E.cols() ||
                 opt.mW_.rows() != state.W.rows() || opt.mW_.cols() != state.W.cols()) {
        throw std::invalid_argument("step: Adam state does not match the model");
      }
      kernels::adam_descent(state.E, grads.dE, opt.mE_, opt.vE_, eta_E, opt.beta1_, opt.beta2_, opt.epsilon_,
                            opt.t_ + 1, threads);
      kernels::adam_descent(state.W, grads.dW, opt.mW_, opt.vW_, eta_W, opt.beta1_, opt.beta2_, opt.epsilon_,
                            opt.t_ + 1, threads);
      break;
  }
  ++opt.t_;
  return state;
}

namespace {

template <typename S>
TrainResult run_training(const ModelState& state, const Targets& targets, const TokenDistribution& dist,
                         const TrainConfig& cfg) {
  const Index m = state.m;
  const int threads = thread_count();
  MatrixT<S> E = state.E.cast<S>();
  MatrixT<S> W = state.W.cast<S>();
  const VectorT<S> weights = dist.frequencies().cast<S>();
  const double c = 1.0 / static_cast<double>(m);

  MatrixT<S> Z, A, B, BBt;
  if (targets.is_factored()) {
    A = targets.left().cast<S>();
    B = targets.right().cast<S>();
    BBt = (targets.right() * targets.right().transpose()).cast<S>();
  } else {
    Z = targets.matrix().cast<S>();
  }

  MatrixT<S> mE, vE, mW, vW;
  if (cfg.optimizer == OptimizerKind::kAdam) {
    mE = vE = MatrixT<S>::Zero(E.rows(), E.cols());
    mW = vW = MatrixT<S>::Zero(W.rows(), W.cols());
  }
  const S eta_E = static_cast<S>(cfg.eta_E);
  const S eta_W = static_cast<S>(cfg.eta_W);

  TrainResult result;
  result.losses.assign(static_cast<std::size_t>(cfg.steps) + 1, std::numeric_limits<double>::quiet_NaN());
  auto mark_diverged = [&](int at) {
    result.diverged = true;
    result.diverged_at = at;
    for (std::size_t k = static_cast<std::size_t>(at); k < result.losses.size(); ++k)
      result.losses[k] = std::numeric_limits<double>::infinity();
  };
  auto bad = [](double loss) { return !std::isfinite(loss) || loss > kDivergenceLoss; };

  for (int t = 0; t < cfg.steps; ++t) {
    const bool with_loss = cfg.record_trajectory || t == 0;
    kernels::LossAndGradients<S> lg =
        targets.is_factored()
            ? kernels::factored_loss_and_gradients(E, W, A, B, BBt, weights, c, with_loss, threads)
            : kernels::dense_loss_and_gradients(E, W, Z, weights, c, with_loss, threads);
    if (with_loss) {
      if (bad(lg.loss)) {
        mark_diverged(t);
        return result;
      }
      result.losses[static_cast<std::size_t>(t)] = lg.loss;
    }
    if (!lg.dE.allFinite() || !lg.dW.allFinite()) {
      mark_diverged(t);
      return result;
    }
    switch (cfg.optimizer) {
      case OptimizerKind::kSignSGD:
        kernels::sign_descent(E, lg.dE, eta_E, threads);
        kernels::sign_descent(W, lg.dW, eta_W, threads);
        break;
      case OptimizerKind::kSGD:
        kernels::gradient_descent(E, lg.dE, eta_E, threads);
        kernels::gradient_descent(W, lg.dW, eta_W, threads);
        break;
      case OptimizerKind::kAdam:
        kernels::adam_descent(E, lg.dE, mE, vE, eta_E, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_epsilon, t + 1,
                              threads);
        kernels::adam_descent(W, lg.dW, mW, vW, eta_W, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_epsilon, t + 1,
                              threads);
        break;
    }
  }

  ModelState last;
  last.m = state.m;
  last.d = state.d;
  last.E = E.template cast<double>();
  last.W = W.template cast<double>();
  double final_loss = std::numeric_limits<double>::infinity();
  if (last.E.allFinite() && last.W.allFinite()) final_loss = population_loss(last, dist, targets);
  if (bad(final_loss)) {
    mark_diverged(cfg.steps);
  } else {
    result.losses.back() = final_loss;
  }
  return result;
}

}  // namespace

TrainResult train_from(ModelState state, const Targets& targets, const TokenDistribution& dist,
                       const TrainConfig& config) {
  check_shapes(state, targets);
  if (dist.size() != state.m) throw std::invalid_argument("train: distribution does not match the vocabulary size");
  if (config.steps < 0) throw std::invalid_argument("train: steps must be >= 0");
  if (!std::isfinite(config.eta_E) || !std::isfinite(config.eta_W) || config.eta_E < 0.0 || config.eta_W < 0.0)
    throw std::invalid_argument("train: learning rates must be finite and >= 0");
  if (config.optimizer == OptimizerKind::kAdam) Optimizer::adam(config.adam_beta1, config.adam_beta2, config.adam_epsilon);
  return config.precision == Precision::kFloat ? run_training<float>(state, targets, dist, config)
                                               : run_training<double>(state, targets, dist, config);
}

TrainResult train(const TrainConfig& config, const TokenDistribution& dist) {
  RngStream init_rng(config.seed, config.init_stream);
  ModelState state = init_model(config.m, config.d, config.sigma_E, config.sigma_W, init_rng);
  RngStream target_rng(config.seed, config.target_stream);
  if (config.targets == TargetKind::kGaussianResidual) {
    const Targets targets = make_targets(state, target_rng);
    return train_from(std::move(state), targets, dist, config);
  }
  const Index rank = config.teacher_rank > 0 ? config.teacher_rank : config.d;
  const double scale = config.teacher_scale > 0.0
                           ? config.teacher_scale
                           : config.sigma_E * config.sigma_W * std::sqrt(static_cast<double>(config.d));
  const Targets targets = make_teacher_targets(config.m, rank, scale, target_rng);
  return train_from(std::move(state), targets, dist, config);
}

void write_trajectory_csv(std::ostream& out, const TrainResult& result) {
  out << "step,loss,diverged\n";
  const auto old_precision = out.precision(17);
  for (std::size_t t = 0; t < result.losses.size(); ++t) {
    const bool div = result.diverged && static_cast<int>(t) >= result.diverged_at;
    out << t << ',';
    if (std::isinf(result.losses[t])) {
      out << "inf";
    } else if (std::isnan(result.losses[t])) {
      out << "nan";
    } else {
      out << result.losses[t];
    }
    out << ',' << (div ? 1 : 0) << '\n';
  }
  out.precision(old_precision);
}

}  // namespace lvlab
