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

#include "lvlab/zipf.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>

namespace lvlab {

TokenDistribution TokenDistribution::from_weights(std::vector<double> weights, std::optional<double> exponent) {
  if (weights.empty()) throw std::invalid_argument("token distribution: empty vocabulary");
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (!std::isfinite(weights[i]) || weights[i] < 0.0)
      throw std::invalid_argument("token distribution: weights must be finite and nonnegative");
    if (i > 0 && weights[i] > weights[i - 1])
      throw std::invalid_argument("token distribution: weights must be ranked (non-increasing)");
  }
  // Smallest first keeps the normalizer accurate for long tails.
  double total = 0.0;
  for (auto it = weights.rbegin(); it != weights.rend(); ++it) total += *it;
  if (!(total > 0.0)) throw std::invalid_argument("token distribution: weights sum to zero");

  TokenDistribution dist;
  dist.exponent_ = exponent;
  dist.alphas_ = std::move(weights);
  for (double& w : dist.alphas_) w /= total;
  dist.cumulative_.resize(dist.alphas_.size());
  double running = 0.0;
  for (std::size_t i = 0; i < dist.alphas_.size(); ++i) {
    running += dist.alphas_[i];
    dist.cumulative_[i] = std::min(running, 1.0);
  }
  dist.cumulative_.back() = 1.0;
  return dist;
}

Vector TokenDistribution::frequencies() const {
  return Eigen::Map<const Vector>(alphas_.data(), static_cast<Index>(alphas_.size()));
}

TokenDistribution zipf_distribution(Index m, double a) {
  if (m < 1) throw std::invalid_argument("zipf_distribution: m must be >= 1");
  if (!std::isfinite(a) || a <= 0.0) throw std::invalid_argument("zipf_distribution: exponent must be finite and > 0");
  if (a <= 0.5) {
    std::ostringstream msg;
    msg << "zipf exponent " << a << " <= 1/2: mean squared frequency no longer decays like 1/m";
    warn(msg.str());
  }
  std::vector<double> w(static_cast<std::size_t>(m));
  for (Index i = 0; i < m; ++i) w[static_cast<std::size_t>(i)] = std::pow(static_cast<double>(i + 1), -a);
  return TokenDistribution::from_weights(std::move(w), a);
}

FrequencyStats frequency_stats(const TokenDistribution& dist) {
  FrequencyStats stats;
  const auto& alphas = dist.alphas();
  double sum_sq = 0.0;
  for (auto it = alphas.rbegin(); it != alphas.rend(); ++it) sum_sq += (*it) * (*it);
  stats.mean_squared_frequency = sum_sq / static_cast<double>(alphas.size());
  stats.amplification.reserve(alphas.size());
  for (double alpha : alphas) stats.amplification.push_back(alpha * alpha / stats.mean_squared_frequency);
  return stats;
}

std::vector<Lemma1Row> lemma1_scan(double a, std::span<const Index> m_values, FrequencyMode mode) {
  std::vector<Lemma1Row> rows;
  rows.reserve(m_values.size());
  for (Index m : m_values) {
    if (m < 1) throw std::invalid_argument("lemma1_scan: m must be >= 1");
    double value = 0.0;
    if (mode == FrequencyMode::kUnnormalized) {
      for (Index i = m; i >= 1; --i) value += std::pow(static_cast<double>(i), -2.0 * a);
    } else {
      const auto dist = zipf_distribution(m, a);
      value = frequency_stats(dist).mean_squared_frequency * static_cast<double>(m);
    }
    rows.push_back({m, value});
  }
  return rows;
}

ExponentFit fit_exponent(std::span<const std::uint64_t> counts) {
  std::vector<std::uint64_t> sorted(counts.begin(), counts.end());
  std::stable_sort(sorted.begin(), sorted.end(), std::greater<>());
  while (!sorted.empty() && sorted.back() == 0) sorted.pop_back();
  if (sorted.empty()) throw std::invalid_argument("fit_exponent: all counts are zero");
  if (sorted.size() < 10) throw std::invalid_argument("fit_exponent: need at least 10 nonzero counts");

  const auto n = static_cast<double>(sorted.size());
  double sx = 0.0, sy = 0.0;
  for (std::size_t r = 0; r < sorted.size(); ++r) {
    sx += std::log(static_cast<double>(r + 1));
    sy += std::log(static_cast<double>(sorted[r]));
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t r = 0; r < sorted.size(); ++r) {
    const double dx = std::log(static_cast<double>(r + 1)) - mx;
    const double dy = std::log(static_cast<double>(sorted[r])) - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  ExponentFit fit;
  const double slope = sxy / sxx;
  fit.exponent = slope == 0.0 ? 0.0 : -slope;
  fit.intercept = my - slope * mx;
  const double ss_res = std::max(0.0, syy - slope * sxy);
  fit.r_squared = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
  fit.ranks_used = static_cast<Index>(sorted.size());
  return fit;
}

Token sample_token(const TokenDistribution& dist, RngStream& rng) {
  const auto& cum = dist.cumulative();
  const double u = rng.uniform();
  auto it = std::upper_bound(cum.begin(), cum.end(), u);
  // u < 1 = cum.back(), so `it` is always valid; skip zero-probability ties.
  return Token(static_cast<Index>(it - cum.begin()) + 1);
}

std::vector<std::uint64_t> sample_counts(const TokenDistribution& dist, std::uint64_t draws, RngStream& rng) {
  std::vector<std::uint64_t> counts(static_cast<std::size_t>(dist.size()), 0);
  for (std::uint64_t k = 0; k < draws; ++k) ++counts[static_cast<std::size_t>(sample_token(dist, rng).index())];
  return counts;
}

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

std::vector<CountRecord> read_counts(std::istream& in) {
  std::vector<CountRecord> records;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string_view view = trim(line);
    if (view.empty() || view.front() == '#') continue;
    const auto tab = view.find('\t');
    if (tab == std::string_view::npos) throw CountsParseError(lineno, "expected <id><TAB><count>");
    const std::string_view id = trim(view.substr(0, tab));
    const std::string_view count = trim(view.substr(tab + 1));
    if (id.empty()) throw CountsParseError(lineno, "empty token id");
    CountRecord rec;
    rec.id = std::string(id);
    const auto [ptr, ec] = std::from_chars(count.data(), count.data() + count.size(), rec.count);
    if (ec != std::errc() || ptr != count.data() + count.size())
      throw CountsParseError(lineno, "count is not a nonnegative integer: '" + std::string(count) + "'");
    records.push_back(std::move(rec));
  }
  return records;
}

void write_counts(std::ostream& out, std::span<const std::uint64_t> counts, const std::string& comment) {
  if (!comment.empty()) out << "# " << comment << '\n';
  for (std::size_t i = 0; i < counts.size(); ++i) out << (i + 1) << '\t' << counts[i] << '\n';
}

}  // namespace lvlab
