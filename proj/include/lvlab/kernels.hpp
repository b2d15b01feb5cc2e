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

// Hot loops of the embedding/projection model.
//
// The production kernels use Eigen GEMMs for the products and OpenMP for the
// element-wise and row-wise passes. Every element-wise pass is bit-identical
// to its serial counterpart because each output entry is written by exactly
// one iteration. The `reference` namespace holds plain-loop implementations
// written straight from the definitions; they are O(m^2 d) and exist for
// tests and benchmarks.

#ifndef LVLAB_KERNELS_HPP
#define LVLAB_KERNELS_HPP

#include "lvlab/common.hpp"

#include <algorithm>
#include <cmath>

namespace lvlab::kernels {

/// Gradient pair plus the population loss at the same point.
template <typename S>
struct LossAndGradients {
  double loss = 0.0;
  MatrixT<S> dE;
  MatrixT<S> dW;
};

/// param -= eta * sign(grad), sign(0) = +1.
template <typename S>
void sign_descent(MatrixT<S>& param, const MatrixT<S>& grad, S eta, int threads) {
  const Index n = param.size();
  S* p = param.data();
  const S* g = grad.data();
#pragma omp parallel for schedule(static) num_threads(threads)
  for (Index k = 0; k < n; ++k) p[k] -= g[k] >= S(0) ? eta : -eta;
}

/// param -= eta * grad.
template <typename S>
void gradient_descent(MatrixT<S>& param, const MatrixT<S>& grad, S eta, int threads) {
  const Index n = param.size();
  S* p = param.data();
  const S* g = grad.data();
#pragma omp parallel for schedule(static) num_threads(threads)
  for (Index k = 0; k < n; ++k) p[k] -= eta * g[k];
}

/// One bias-corrected Adam update; `step` is the 1-based step count.
template <typename S>
void adam_descent(MatrixT<S>& param, const MatrixT<S>& grad, MatrixT<S>& first, MatrixT<S>& second, S eta,
                  double beta1, double beta2, double epsilon, long step, int threads) {
  const Index n = param.size();
  const S b1 = static_cast<S>(beta1), b2 = static_cast<S>(beta2), eps = static_cast<S>(epsilon);
  const S c1 = static_cast<S>(1.0 - std::pow(beta1, static_cast<double>(step)));
  const S c2 = static_cast<S>(1.0 - std::pow(beta2, static_cast<double>(step)));
  S* p = param.data();
  const S* g = grad.data();
  S* m1 = first.data();
  S* m2 = second.data();
#pragma omp parallel for schedule(static) num_threads(threads)
  for (Index k = 0; k < n; ++k) {
    m1[k] = b1 * m1[k] + (S(1) - b1) * g[k];
    m2[k] = b2 * m2[k] + (S(1) - b2) * g[k] * g[k];
    const S mhat = m1[k] / c1;
    const S vhat = m2[k] / c2;
    p[k] -= eta * mhat / (std::sqrt(vhat) + eps);
  }
}

/// X X^T through a symmetric rank-k update (half the work of a GEMM).
template <typename S>
MatrixT<S> gram(const MatrixT<S>& X) {
  MatrixT<S> G = MatrixT<S>::Zero(X.rows(), X.rows());
  G.template selfadjointView<Eigen::Lower>().rankUpdate(X);
  G.template triangularView<Eigen::StrictlyUpper>() = G.transpose();
  return G;
}

/// Scales row i of `rows` by weights(i).
template <typename S>
void scale_rows(MatrixT<S>& rows, const VectorT<S>& weights, int threads) {
#pragma omp parallel for schedule(static) num_threads(threads)
  for (Index i = 0; i < rows.rows(); ++i) rows.row(i) *= weights(i);
}

/// Dense targets: R = EW - Z, loss = sum_i w_i |R_i|^2 / (2m),
/// dE = c D_w R W^T, dW = c E^T D_w R with c = `grad_scale`.
/// The loss is skipped (left at 0) when `with_loss` is false.
template <typename S>
LossAndGradients<S> dense_loss_and_gradients(const MatrixT<S>& E, const MatrixT<S>& W, const MatrixT<S>& Z,
                                             const VectorT<S>& weights, double grad_scale, bool with_loss,
                                             int threads) {
  const Index m = E.rows();
  MatrixT<S> R(m, W.cols());
  R.noalias() = E * W;
  R -= Z;
  LossAndGradients<S> out;
  if (with_loss) {
    Eigen::VectorXd row_loss(m);
#pragma omp parallel for schedule(static) num_threads(threads)
    for (Index i = 0; i < m; ++i)
      row_loss(i) = static_cast<double>(weights(i)) * R.row(i).template cast<double>().squaredNorm();
    out.loss = row_loss.sum() / (2.0 * static_cast<double>(m));
  }
  const VectorT<S> w = weights * static_cast<S>(grad_scale);
  scale_rows(R, w, threads);
  out.dE.noalias() = R * W.transpose();
  out.dW.noalias() = E.transpose() * R;
  return out;
}

/// sum_i w_i |E_i W - A_i B|^2 / (2m) from F = (EW - AB) W^T, Q = W B^T and
/// BBt = B B^T, using |E_i W - A_i B|^2 = E_i . F_i + A_i . (A_i BBt - E_i Q).
template <typename S>
double factored_loss_from_grams(const MatrixT<S>& E, const MatrixT<S>& A, const MatrixT<S>& F, const MatrixT<S>& Q,
                                const MatrixT<S>& BBt, const VectorT<S>& weights, int threads) {
  const Index m = E.rows();
  MatrixT<S> G(m, A.cols());
  G.noalias() = A * BBt;
  G.noalias() -= E * Q;
  Eigen::VectorXd row_loss(m);
#pragma omp parallel for schedule(static) num_threads(threads)
  for (Index i = 0; i < m; ++i) {
    const double sq = static_cast<double>(E.row(i).dot(F.row(i))) + static_cast<double>(A.row(i).dot(G.row(i)));
    row_loss(i) = static_cast<double>(weights(i)) * std::max(sq, 0.0);
  }
  return row_loss.sum() / (2.0 * static_cast<double>(m));
}

/// Low-rank targets Z = A B (A: m x r, B: r x m), never materialized.
/// Works through d x d and d x r Gram matrices, so a call costs
/// O(m d (d + r)). `BBt` is B B^T, fixed during training.
template <typename S>
LossAndGradients<S> factored_loss_and_gradients(const MatrixT<S>& E, const MatrixT<S>& W, const MatrixT<S>& A,
                                                const MatrixT<S>& B, const MatrixT<S>& BBt,
                                                const VectorT<S>& weights, double grad_scale, bool with_loss,
                                                int threads) {
  const Index m = E.rows();
  const Index d = E.cols();
  const MatrixT<S> P = gram(W);
  MatrixT<S> Q(d, A.cols());
  Q.noalias() = W * B.transpose();

  // F = (EW - AB) W^T
  MatrixT<S> F(m, d);
  F.noalias() = E * P;
  F.noalias() -= A * Q.transpose();

  LossAndGradients<S> out;
  if (with_loss) out.loss = factored_loss_from_grams(E, A, F, Q, BBt, weights, threads);

  // K_E = E^T D E = (D^{1/2} E)^T (D^{1/2} E), K_A = E^T D A.
  const VectorT<S> w = weights * static_cast<S>(grad_scale);
  const VectorT<S> root_w = w.cwiseSqrt();
  MatrixT<S> RE = E;
  scale_rows(RE, root_w, threads);
  const MatrixT<S> KE = gram(MatrixT<S>(RE.transpose()));
  MatrixT<S> DE = std::move(RE);
  scale_rows(DE, root_w, threads);
  MatrixT<S> KA(d, A.cols());
  KA.noalias() = DE.transpose() * A;

  out.dW.noalias() = KE * W;
  out.dW.noalias() -= KA * B;
  scale_rows(F, w, threads);
  out.dE = std::move(F);
  return out;
}

/// Loss only, for low-rank targets.
template <typename S>
double factored_loss(const MatrixT<S>& E, const MatrixT<S>& W, const MatrixT<S>& A, const MatrixT<S>& B,
                     const MatrixT<S>& BBt, const VectorT<S>& weights, int threads) {
  const MatrixT<S> P = gram(W);
  MatrixT<S> Q = W * B.transpose();
  MatrixT<S> F(E.rows(), E.cols());
  F.noalias() = E * P;
  F.noalias() -= A * Q.transpose();
  return factored_loss_from_grams(E, A, F, Q, BBt, weights, threads);
}

namespace reference {

/// Straight-from-definition loops over the dense targets (serial).
LossAndGradients<double> loss_and_gradients(const Matrix& E, const Matrix& W, const Matrix& Z,
                                            const Vector& weights, double grad_scale);

void sign_descent(Matrix& param, const Matrix& grad, double eta);

}  // namespace reference

}  // namespace lvlab::kernels

#endif  // LVLAB_KERNELS_HPP
