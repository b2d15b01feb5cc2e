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

#ifndef LVLAB_MONTECARLO_HPP
#define LVLAB_MONTECARLO_HPP

#include "lvlab/common.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <vector>

namespace lvlab {

/// Seeded xoshiro256** stream. The state is derived by hashing
/// (master_seed, stream_id), so any number of streams can be created
/// independently and in any order without coordination.
class RngStream {
 public:
  using result_type = std::uint64_t;

  RngStream(std::uint64_t master_seed, std::uint64_t stream_id);

  std::uint64_t master_seed() const { return master_seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  /// Child stream keyed by (this stream, k). Children of distinct k, and the
  /// parent itself, do not share state.
  RngStream substream(std::uint64_t k) const;

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()();

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform integer in [0, n). Unbiased (rejection on the top bits).
  std::uint64_t below(std::uint64_t n);
  /// Standard normal via the Marsaglia polar method.
  double gaussian();

 private:
  std::uint64_t master_seed_;
  std::uint64_t stream_id_;
  std::array<std::uint64_t, 4> s_{};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// SplitMix64 finalizer; exposed for stream-id derivation.
std::uint64_t mix64(std::uint64_t x);

/// Streaming mean / second central moment (Welford).
///
/// `m2` is the sum of squared deviations from the running mean, so for the
/// observations {0, 2} it equals 2. `standard_error()` is the standard error
/// of the mean, sqrt(m2 / (n - 1) / n).
struct Estimate {
  double mean = 0.0;
  double m2 = 0.0;
  std::int64_t count = 0;

  double variance() const { return count >= 2 ? m2 / static_cast<double>(count - 1) : 0.0; }
  double standard_error() const;
  double ci95_halfwidth() const { return 1.96 * standard_error(); }
};

/// Returns `estimate` updated with one more observation. Throws
/// std::invalid_argument on non-finite input.
Estimate accumulate(Estimate estimate, double observation);

/// Folds a sequence of observations in order.
Estimate estimate_of(const std::vector<double>& observations);

/// rows x cols matrix of i.i.d. N(0, sigma^2) entries, filled in row-major
/// order from `rng`.
Matrix gaussian_matrix(Index rows, Index cols, double sigma, RngStream& rng);

/// In-place variant; `out` keeps its shape.
template <typename Derived>
void fill_gaussian(Eigen::MatrixBase<Derived>& out, double sigma, RngStream& rng) {
  for (Index i = 0; i < out.rows(); ++i)
    for (Index j = 0; j < out.cols(); ++j)
      out(i, j) = static_cast<typename Derived::Scalar>(sigma * rng.gaussian() + 0.0);  // +0.0: no -0 at sigma = 0
}

namespace detail {
constexpr std::int64_t kTrialChunk = 1 << 14;
}

/// Evaluates fn(trial) for trial in [0, count) on `threads` OpenMP workers,
/// then hands each result to reduce(trial, result) sequentially in trial
/// order. Results are buffered one chunk at a time, so the reduction is
/// independent of the schedule.
template <typename Result, typename Fn, typename Reduce>
void parallel_trials(std::int64_t count, Fn&& fn, Reduce&& reduce, int threads = thread_count()) {
  std::vector<Result> buffer;
  for (std::int64_t begin = 0; begin < count; begin += detail::kTrialChunk) {
    const std::int64_t end = std::min(count, begin + detail::kTrialChunk);
    buffer.assign(static_cast<std::size_t>(end - begin), Result{});
#pragma omp parallel for schedule(dynamic, 16) num_threads(threads)
    for (std::int64_t t = begin; t < end; ++t) buffer[static_cast<std::size_t>(t - begin)] = fn(t);
    for (std::int64_t t = begin; t < end; ++t) reduce(t, buffer[static_cast<std::size_t>(t - begin)]);
  }
}

/// Serial reference for parallel_trials.
template <typename Result, typename Fn, typename Reduce>
void serial_trials(std::int64_t count, Fn&& fn, Reduce&& reduce) {
  for (std::int64_t t = 0; t < count; ++t) {
    Result r = fn(t);
    reduce(t, r);
  }
}

}  // namespace lvlab

#endif  // LVLAB_MONTECARLO_HPP
