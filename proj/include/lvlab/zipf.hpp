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

#ifndef LVLAB_ZIPF_HPP
#define LVLAB_ZIPF_HPP

#include "lvlab/common.hpp"
#include "lvlab/montecarlo.hpp"

#include <cstdint>
#include <istream>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace lvlab {

/// 1-based frequency rank of a token (rank 1 is the most frequent).
class Token {
 public:
  constexpr explicit Token(Index rank) : rank_(rank) {}
  constexpr Index rank() const { return rank_; }
  /// 0-based row in E / Z.
  constexpr Index index() const { return rank_ - 1; }
  friend constexpr bool operator==(Token, Token) = default;

 private:
  Index rank_;
};

/// Ranked token probabilities together with a cumulative table for sampling.
class TokenDistribution {
 public:
  /// Normalizes `weights` (nonnegative, finite, non-increasing, positive sum).
  static TokenDistribution from_weights(std::vector<double> weights,
                                        std::optional<double> exponent = std::nullopt);

  Index size() const { return static_cast<Index>(alphas_.size()); }
  double alpha(Token t) const { return alphas_.at(static_cast<std::size_t>(t.index())); }
  const std::vector<double>& alphas() const { return alphas_; }
  const std::vector<double>& cumulative() const { return cumulative_; }
  /// Zipf exponent when the distribution was generated from one.
  std::optional<double> exponent() const { return exponent_; }
  /// Frequencies as a vector, the diagonal of D_alpha.
  Vector frequencies() const;

 private:
  TokenDistribution() = default;
  std::vector<double> alphas_;
  std::vector<double> cumulative_;
  std::optional<double> exponent_;
};

/// alpha_i = i^{-a} / sum_j j^{-a}, i = 1..m. Warns when a <= 1/2.
TokenDistribution zipf_distribution(Index m, double a);

struct FrequencyStats {
  double mean_squared_frequency = 0.0;  ///< (1/m) sum_k alpha_k^2
  std::vector<double> amplification;    ///< alpha_i^2 / mean_squared_frequency
};

FrequencyStats frequency_stats(const TokenDistribution& dist);

enum class FrequencyMode {
  kUnnormalized,  ///< alpha_i = i^{-a}, no normalizing constant
  kNormalized,    ///< probabilities from zipf_distribution
};

struct Lemma1Row {
  Index m = 0;
  double scaled_mean_sq = 0.0;  ///< m * mean squared frequency
};

/// m * (1/m) sum_i alpha_i^2 for each m, i.e. sum_i alpha_i^2.
std::vector<Lemma1Row> lemma1_scan(double a, std::span<const Index> m_values, FrequencyMode mode);

struct ExponentFit {
  double exponent = 0.0;  ///< negated log-log slope
  double intercept = 0.0;
  double r_squared = 0.0;
  Index ranks_used = 0;
};

/// Least-squares fit of log(count) on log(rank) after sorting counts in
/// descending order (stable); zero counts are dropped. Needs at least 10
/// nonzero counts.
ExponentFit fit_exponent(std::span<const std::uint64_t> counts);

/// Draws a token with P(rank = i) = alpha_i.
Token sample_token(const TokenDistribution& dist, RngStream& rng);

/// Multinomial counts of `draws` samples, indexed by rank - 1.
std::vector<std::uint64_t> sample_counts(const TokenDistribution& dist, std::uint64_t draws, RngStream& rng);

/// Malformed token-count input; carries the 1-based line number.
class CountsParseError : public std::runtime_error {
 public:
  CountsParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct CountRecord {
  std::string id;
  std::uint64_t count = 0;
};

/// Reads `<rank-or-id>\t<count>` lines; '#' lines and blank lines are skipped.
std::vector<CountRecord> read_counts(std::istream& in);
void write_counts(std::ostream& out, std::span<const std::uint64_t> counts, const std::string& comment = "");

}  // namespace lvlab

#endif  // LVLAB_ZIPF_HPP
