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


#include "lvlab/kernels.hpp"

#include <stdexcept>

namespace lvlab::kernels::reference {

LossAndGradients<double> loss_and_gradients(const Matrix& E, const Matrix& W, const Matrix& Z,
                                            const Vector& weights, double grad_scale) {
  const Index m = E.rows();
  const Index d = E.cols();
  if (W.rows() != d || W.cols() != m || Z.rows() != m || Z.cols() != m || weights.size() != m)
    throw std::invalid_argument("reference::loss_and_gradients: shape mismatch");

  Matrix R(m, m);
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < m; ++j) {
      double acc = 0.0;
      for (Index k = 0; k < d; ++k) acc += E(i, k) * W(k, j);
      R(i, j) = acc - Z(i, j);
    }

  LossAndGradients<double> out;
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < m; ++j) out.loss += weights(i) * R(i, j) * R(i, j);
  out.loss /= 2.0 * static_cast<double>(m);

  out.dE = Matrix::Zero(m, d);
  out.dW = Matrix::Zero(d, m);
  for (Index i = 0; i < m; ++i)
    for (Index k = 0; k < d; ++k) {
      double acc = 0.0;
      for (Index j = 0; j < m; ++j) acc += R(i, j) * W(k, j);
      out.dE(i, k) = grad_scale * weights(i) * acc;
    }
  for (Index k = 0; k < d; ++k)
    for (Index j = 0; j < m; ++j) {
      double acc = 0.0;
      for (Index i = 0; i < m; ++i) acc += E(i, k) * weights(i) * R(i, j);
      out.dW(k, j) = grad_scale * acc;
    }
  return out;
}

void sign_descent(Matrix& param, const Matrix& grad, double eta) {
  if (param.rows() != grad.rows() || param.cols() != grad.cols())
    throw std::invalid_argument("reference::sign_descent: shape mismatch");
  for (Index i = 0; i < param.rows(); ++i)
    for (Index j = 0; j < param.cols(); ++j) param(i, j) -= grad(i, j) >= 0.0 ? eta : -eta;
}

}  // namespace lvlab::kernels::reference
