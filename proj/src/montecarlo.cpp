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

#include "lvlab/montecarlo.hpp"

#include <cmath>
#include <stdexcept>

namespace lvlab {

namespace {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

inline std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

RngStream::RngStream(std::uint64_t master_seed, std::uint64_t stream_id)
    : master_seed_(master_seed), stream_id_(stream_id) {
  std::uint64_t x = mix64(master_seed + kGolden) ^ mix64(stream_id * kGolden + 0x632be59bd9b4e019ULL);
  for (auto& word : s_) {
    x += kGolden;
    word = mix64(x);
  }
  // xoshiro must not start from the all-zero state.
  if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = kGolden;
}

RngStream RngStream::substream(std::uint64_t k) const {
  return RngStream(master_seed_, mix64(stream_id_ ^ mix64(k + 0xd1b54a32d192ed03ULL)));
}

RngStream::result_type RngStream::operator()() {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double RngStream::uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

std::uint64_t RngStream::below(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("below: n must be positive");
  // Lemire's multiply-shift with rejection.
  std::uint64_t x = (*this)();
  __uint128_t m = static_cast<__uint128_t>(x) * n;
  auto low = static_cast<std::uint64_t>(m);
  if (low < n) {
    const std::uint64_t threshold = (0 - n) % n;
    while (low < threshold) {
      x = (*this)();
      m = static_cast<__uint128_t>(x) * n;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

double RngStream::gaussian() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double f = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * f;
  has_spare_ = true;
  return u * f;
}

double Estimate::standard_error() const {
  if (count < 2) return 0.0;
  return std::sqrt(variance() / static_cast<double>(count));
}

Estimate accumulate(Estimate e, double x) {
  if (!std::isfinite(x)) throw std::invalid_argument("accumulate: non-finite observation");
  e.count += 1;
  const double delta = x - e.mean;
  e.mean += delta / static_cast<double>(e.count);
  e.m2 += delta * (x - e.mean);
  return e;
}

Estimate estimate_of(const std::vector<double>& observations) {
  Estimate e;
  for (double x : observations) e = accumulate(e, x);
  return e;
}

Matrix gaussian_matrix(Index rows, Index cols, double sigma, RngStream& rng) {
  if (rows < 1 || cols < 1) throw std::invalid_argument("gaussian_matrix: shape must be positive");
  if (!std::isfinite(sigma) || sigma < 0.0)
    throw std::invalid_argument("gaussian_matrix: sigma must be finite and nonnegative");
  Matrix out(rows, cols);
  fill_gaussian(out, sigma, rng);
  return out;
}

}  // namespace lvlab
