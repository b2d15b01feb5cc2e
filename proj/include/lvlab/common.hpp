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

#ifndef LVLAB_COMMON_HPP
#define LVLAB_COMMON_HPP

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <string>

namespace lvlab {

// Row-major so that row i of an m x d embedding is the vector for token i.
template <typename Scalar>
using MatrixT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using VectorT = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = MatrixT<double>;
using Vector = VectorT<double>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

using Index = Eigen::Index;

/// Number of worker threads for parallel kernels. Honors LVLAB_THREADS when
/// set to a positive integer, otherwise the OpenMP default.
int thread_count();

/// Overrides thread_count() for the current process (0 restores the default).
void set_thread_count(int n);

/// Warning sink used by library code. Defaults to stderr.
using WarningHandler = std::function<void(const std::string&)>;
void set_warning_handler(WarningHandler handler);
void warn(const std::string& message);

}  // namespace lvlab

#endif  // LVLAB_COMMON_HPP
