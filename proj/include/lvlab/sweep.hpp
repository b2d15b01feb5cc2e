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

// Embedding learning-rate sweeps over (d, m) configurations, optimal-LR
// extraction and log-log slope fits.

#ifndef LVLAB_SWEEP_HPP
#define LVLAB_SWEEP_HPP

#include "lvlab/common.hpp"
#include "lvlab/model.hpp"
#include "lvlab/parametrization.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace lvlab {

struct WidthConfig {
  Index d = 0;
  Index m = 0;
  friend bool operator==(const WidthConfig&, const WidthConfig&) = default;
};

struct SweepConfig {
  std::vector<WidthConfig> configurations;
  std::vector<double> lr_grid;  ///< eta_E values, strictly increasing
  std::vector<std::uint64_t> seeds;
  std::uint64_t master_seed = 0;
  int steps = 300;
  OptimizerKind optimizer = OptimizerKind::kSignSGD;
  double zipf_exponent = 1.0;
  /// Supplies sigma_E, sigma_W and eta_W at each width; eta_E comes from the grid.
  ParametrizationConfig parametrization;
  TargetKind targets = TargetKind::kTeacher;
  Index teacher_rank = 0;      ///< 0: rank d
  double teacher_scale = 0.0;  ///< 0: sigma_E sigma_W sqrt(d)
  Precision precision = Precision::kFloat;
  double threshold = 0.20;
};

/// Throws std::invalid_argument when the grid is not strictly increasing and
/// positive, has fewer than `min_points` points, or the other fields are out of range.
void validate(const SweepConfig& config, std::size_t min_points = 5);

/// `points` geometric values spanning `decades` orders of magnitude centred on `center`.
std::vector<double> geometric_grid(double center, double decades, int points);

/// Candidate base constants for the pre-sweep.
struct PresweepSpec {
  std::vector<double> candidates;
};

/// Parses a JSON sweep config. Keys:
///   "widths": [64, 128] with "vocab_ratio": 8, or "configurations": [[d, m], ...]
///   "lr_grid": [..] or {"points": 13, "decades": 4, "center": 0.01 | "lvp"}
///   "seeds": 3 or [0, 1, 2], "seed": master seed
///   "steps", "optimizer", "zipf_exponent", "threshold", "precision": "float" | "double"
///   "parametrization": "LVP", "base_eta": 0.2 or {"presweep": [..]}
///   "targets": {"kind": "teacher" | "gaussian_residual", "rank": 0, "scale": 0}
/// A "center" of "lvp" is base_eta * d^(-1/2) at the geometric mean width.
/// When base_eta is a pre-sweep, `presweep` is filled and the grid is built
/// after presweep_base_eta(); call finalize_grid().
struct ParsedSweepConfig {
  SweepConfig config;
  std::optional<PresweepSpec> presweep;
  struct GridSpec {
    int points = 13;
    double decades = 4.0;
    std::optional<double> center;  ///< empty: LVP prediction
  };
  std::optional<GridSpec> grid_spec;
  void finalize_grid();
};

ParsedSweepConfig parse_sweep_config(std::string_view json_text);

struct SweepRecord {
  Index d = 0;
  Index m = 0;
  double eta_E = 0.0;
  std::uint64_t seed = 0;
  double final_loss = 0.0;  ///< +inf when diverged
  bool diverged = false;
};

/// Training config of one cell. Cells that differ only in eta_E share the
/// init and the targets.
TrainConfig cell_config(const SweepConfig& config, const WidthConfig& width, double eta_E, std::uint64_t seed);

/// One train() per (configuration, eta_E, seed), in parallel over cells.
/// Records are ordered by configuration, then eta_E, then seed.
std::vector<SweepRecord> run_sweep(const SweepConfig& config);

/// Same cells, one at a time.
std::vector<SweepRecord> run_sweep_serial(const SweepConfig& config);

struct PresweepResult {
  double base_eta = 0.0;
  std::vector<double> candidates;
  std::vector<double> mean_losses;
};

/// Tunes the shared base constant at the smallest width: every candidate runs
/// with the parametrization's learning rates (eta_E included) and the one
/// with the lowest seed-mean loss wins.
PresweepResult presweep_base_eta(const SweepConfig& config, std::span<const double> candidates);

/// Runs the configured pre-sweep (if any), stores the winning base constant,
/// builds the grid and validates the result.
std::optional<PresweepResult> resolve_sweep_config(ParsedSweepConfig& parsed);

/// All records of a configuration diverged.
class NoOptimumError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct OptimalLR {
  Index d = 0;
  Index m = 0;
  double eta_opt = 0.0;
  int n_qualifying = 0;
  double best_mean_loss = 0.0;
};

/// Seed-averaged loss per eta_E; the optimum is the geometric mean of all
/// eta_E whose mean loss is within (1 + threshold) of the best.
OptimalLR optimal_lr(std::span<const SweepRecord> records, double threshold = 0.20);

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  double slope_se = 0.0;  ///< 0 with exactly two distinct points of residual freedom
  std::vector<std::pair<Index, double>> per_d_optimal;
  /// |slope - ref| for ref in {0, -1/2, -1}.
  double distance_to(double reference) const { return slope > reference ? slope - reference : reference - slope; }
};

/// Least squares of log2 eta* on log2 d. Needs at least three points and two
/// distinct widths.
SlopeFit fit_slope(std::span<const std::pair<Index, double>> per_d_optimal);

struct SweepAnalysis {
  std::vector<OptimalLR> optima;
  std::vector<WidthConfig> failed;  ///< configurations with no optimum
  std::optional<SlopeFit> fit;
  std::string fit_error;
};

SweepAnalysis analyze_sweep(std::span<const SweepRecord> records, double threshold = 0.20);

void write_sweep_csv(std::ostream& out, std::span<const SweepRecord> records);
/// Throws std::runtime_error with the line number on malformed input.
std::vector<SweepRecord> read_sweep_csv(std::istream& in);
void write_optimal_csv(std::ostream& out, const SweepAnalysis& analysis);
/// {"slope", "intercept", "r_squared", "slope_se", "ci95", "ref_distances", "low_r_squared", "per_d_optimal"}.
std::string slopes_json(const SlopeFit& fit);

/// Decimal form that round-trips a double exactly ("inf" for +infinity).
std::string format_real(double value);

}  // namespace lvlab

#endif  // LVLAB_SWEEP_HPP
