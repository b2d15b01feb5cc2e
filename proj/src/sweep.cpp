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


#include "lvlab/sweep.hpp"

#include "lvlab/montecarlo.hpp"
#include "lvlab/zipf.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

namespace lvlab {

namespace {

using nlohmann::json;

[[noreturn]] void config_error(const std::string& what) { throw std::invalid_argument("sweep config: " + what); }

std::uint64_t cell_key(const WidthConfig& w, std::uint64_t seed) {
  return mix64(static_cast<std::uint64_t>(w.d) ^
               mix64(static_cast<std::uint64_t>(w.m) ^ mix64(seed + 0x5851f42d4c957f2dULL)));
}

double geometric_mean_width(const std::vector<WidthConfig>& configs) {
  double s = 0.0;
  for (const auto& c : configs) s += std::log(static_cast<double>(c.d));
  return std::exp(s / static_cast<double>(configs.size()));
}

std::vector<SweepRecord> make_records(const SweepConfig& config) {
  std::vector<SweepRecord> records;
  records.reserve(config.configurations.size() * config.lr_grid.size() * config.seeds.size());
  for (const auto& w : config.configurations)
    for (double eta : config.lr_grid)
      for (std::uint64_t seed : config.seeds) {
        SweepRecord r;
        r.d = w.d;
        r.m = w.m;
        r.eta_E = eta;
        r.seed = seed;
        records.push_back(r);
      }
  return records;
}

void fill_record(SweepRecord& rec, const SweepConfig& config, const std::map<Index, TokenDistribution>& dists) {
  const WidthConfig w{rec.d, rec.m};
  const TrainResult result = train(cell_config(config, w, rec.eta_E, rec.seed), dists.at(rec.m));
  rec.diverged = result.diverged;
  rec.final_loss = result.diverged ? std::numeric_limits<double>::infinity() : result.final_loss();
}

std::map<Index, TokenDistribution> distributions(const SweepConfig& config) {
  std::map<Index, TokenDistribution> out;
  for (const auto& w : config.configurations)
    if (!out.count(w.m)) out.emplace(w.m, zipf_distribution(w.m, config.zipf_exponent));
  return out;
}

}  // namespace

std::vector<double> geometric_grid(double center, double decades, int points) {
  if (!(center > 0.0) || !std::isfinite(center)) throw std::invalid_argument("geometric_grid: center must be > 0");
  if (!(decades > 0.0)) throw std::invalid_argument("geometric_grid: decades must be > 0");
  if (points < 2) throw std::invalid_argument("geometric_grid: need at least two points");
  std::vector<double> grid(static_cast<std::size_t>(points));
  for (int k = 0; k < points; ++k)
    grid[static_cast<std::size_t>(k)] =
        center * std::pow(10.0, decades * (static_cast<double>(k) / (points - 1) - 0.5));
  return grid;
}

void validate(const SweepConfig& config, std::size_t min_points) {
  if (config.configurations.empty()) config_error("no (d, m) configurations");
  for (const auto& w : config.configurations)
    if (w.d < 1 || w.m < 1) config_error("d and m must be >= 1");
  if (config.lr_grid.size() < min_points)
    config_error("lr_grid needs at least " + std::to_string(min_points) + " points");
  for (std::size_t k = 0; k < config.lr_grid.size(); ++k) {
    if (!(config.lr_grid[k] > 0.0) || !std::isfinite(config.lr_grid[k])) config_error("lr_grid values must be > 0");
    if (k > 0 && !(config.lr_grid[k] > config.lr_grid[k - 1])) config_error("lr_grid must be strictly increasing");
  }
  if (config.seeds.empty()) config_error("no seeds");
  if (config.steps < 0) config_error("steps must be >= 0");
  if (!(config.threshold >= 0.0)) config_error("threshold must be >= 0");
  if (!(config.zipf_exponent > 0.0)) config_error("zipf_exponent must be > 0");
  if (!(config.parametrization.base_eta > 0.0)) config_error("base_eta must be > 0");
}

void ParsedSweepConfig::finalize_grid() {
  if (!grid_spec) return;
  const double center = grid_spec->center.value_or(config.parametrization.base_eta /
                                                   std::sqrt(geometric_mean_width(config.configurations)));
  config.lr_grid = geometric_grid(center, grid_spec->decades, grid_spec->points);
}

ParsedSweepConfig parse_sweep_config(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    config_error(e.what());
  }
  if (!j.is_object()) config_error("top level must be an object");

  ParsedSweepConfig parsed;
  SweepConfig& c = parsed.config;
  try {
    if (j.contains("configurations")) {
      for (const auto& pair : j.at("configurations")) {
        if (!pair.is_array() || pair.size() != 2) config_error("configurations must be [d, m] pairs");
        c.configurations.push_back({pair[0].get<Index>(), pair[1].get<Index>()});
      }
    } else if (j.contains("widths")) {
      const Index ratio = j.value("vocab_ratio", Index{8});
      for (const auto& d : j.at("widths")) c.configurations.push_back({d.get<Index>(), ratio * d.get<Index>()});
    } else {
      config_error("missing \"widths\" or \"configurations\"");
    }

    const json& seeds = j.contains("seeds") ? j.at("seeds") : json(1);
    if (seeds.is_number_integer()) {
      for (std::uint64_t s = 0; s < seeds.get<std::uint64_t>(); ++s) c.seeds.push_back(s);
    } else {
      for (const auto& s : seeds) c.seeds.push_back(s.get<std::uint64_t>());
    }
    c.master_seed = j.value("seed", std::uint64_t{0});
    c.steps = j.value("steps", 300);
    c.optimizer = parse_optimizer(j.value("optimizer", std::string("signsgd"))).kind();
    c.zipf_exponent = j.value("zipf_exponent", 1.0);
    c.threshold = j.value("threshold", 0.20);
    const std::string precision = j.value("precision", std::string("float"));
    if (precision == "float") {
      c.precision = Precision::kFloat;
    } else if (precision == "double") {
      c.precision = Precision::kDouble;
    } else {
      config_error("precision must be \"float\" or \"double\"");
    }

    json pj = json::object();
    pj["parametrization"] = j.value("parametrization", std::string("LVP"));
    const json base = j.contains("base_eta") ? j.at("base_eta") : json(0.2);
    if (base.is_object()) {
      PresweepSpec spec;
      for (const auto& v : base.at("presweep")) spec.candidates.push_back(v.get<double>());
      if (spec.candidates.empty()) config_error("presweep needs candidates");
      parsed.presweep = spec;
      pj["base_eta"] = spec.candidates.front();
    } else {
      pj["base_eta"] = base.get<double>();
    }
    if (j.contains("overrides")) pj["overrides"] = j.at("overrides");
    c.parametrization = parse_parametrization_config(pj.dump());

    if (j.contains("targets")) {
      const json& t = j.at("targets");
      const std::string kind = t.value("kind", std::string("teacher"));
      if (kind == "teacher") {
        c.targets = TargetKind::kTeacher;
      } else if (kind == "gaussian_residual") {
        c.targets = TargetKind::kGaussianResidual;
      } else {
        config_error("targets.kind must be \"teacher\" or \"gaussian_residual\"");
      }
      c.teacher_rank = t.value("rank", Index{0});
      c.teacher_scale = t.value("scale", 0.0);
    }

    const json& grid = j.contains("lr_grid") ? j.at("lr_grid") : json::object();
    if (grid.is_array()) {
      for (const auto& v : grid) c.lr_grid.push_back(v.get<double>());
    } else if (grid.is_object()) {
      ParsedSweepConfig::GridSpec spec;
      spec.points = grid.value("points", 13);
      spec.decades = grid.value("decades", 4.0);
      if (grid.contains("center") && !(grid.at("center").is_string() && grid.at("center") == "lvp"))
        spec.center = grid.at("center").get<double>();
      parsed.grid_spec = spec;
    } else {
      config_error("lr_grid must be a list or an object");
    }
  } catch (const json::exception& e) {
    config_error(e.what());
  }
  if (!parsed.presweep) {
    parsed.finalize_grid();
    validate(c, 1);
    if (c.lr_grid.size() < 5) warn("sweep config: fewer than 5 learning rates; the optimum is not resolvable");
  }
  return parsed;
}

TrainConfig cell_config(const SweepConfig& config, const WidthConfig& width, double eta_E, std::uint64_t seed) {
  const ResolvedHP hp = config.parametrization.resolve(width.d);
  TrainConfig t;
  t.m = width.m;
  t.d = width.d;
  t.zipf_exponent = config.zipf_exponent;
  t.sigma_E = hp.sigma_E;
  t.sigma_W = hp.sigma_W_out;
  t.eta_E = eta_E;
  t.eta_W = hp.eta_W_out;
  t.optimizer = config.optimizer;
  t.steps = config.steps;
  t.seed = config.master_seed;
  const std::uint64_t key = cell_key(width, seed);
  t.init_stream = mix64(key ^ 1);
  t.target_stream = mix64(key ^ 2);
  t.targets = config.targets;
  t.teacher_rank = config.teacher_rank;
  t.teacher_scale = config.teacher_scale;
  t.precision = config.precision;
  t.record_trajectory = false;
  return t;
}

std::vector<SweepRecord> run_sweep(const SweepConfig& config) {
  validate(config, 1);
  const auto dists = distributions(config);
  std::vector<SweepRecord> records = make_records(config);
  // Largest cells first so that dynamic scheduling balances well.
  std::vector<std::size_t> order(records.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return records[a].m * records[a].d * records[a].d > records[b].m * records[b].d * records[b].d;
  });
  const auto n = static_cast<std::int64_t>(order.size());
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 1) num_threads(thread_count())
  for (std::int64_t k = 0; k < n; ++k) {
    try {
      fill_record(records[order[static_cast<std::size_t>(k)]], config, dists);
    } catch (...) {
#pragma omp critical(lvlab_sweep_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return records;
}

std::vector<SweepRecord> run_sweep_serial(const SweepConfig& config) {
  validate(config, 1);
  const auto dists = distributions(config);
  std::vector<SweepRecord> records = make_records(config);
  for (auto& rec : records) fill_record(rec, config, dists);
  return records;
}

PresweepResult presweep_base_eta(const SweepConfig& config, std::span<const double> candidates) {
  if (candidates.empty()) throw std::invalid_argument("presweep: no candidates");
  validate(config, 1);
  const WidthConfig smallest = *std::min_element(
      config.configurations.begin(), config.configurations.end(),
      [](const WidthConfig& a, const WidthConfig& b) { return a.d < b.d || (a.d == b.d && a.m < b.m); });
  const TokenDistribution dist = zipf_distribution(smallest.m, config.zipf_exponent);

  PresweepResult out;
  out.candidates.assign(candidates.begin(), candidates.end());
  out.mean_losses.assign(candidates.size(), 0.0);
  const auto n_cells = static_cast<std::int64_t>(candidates.size() * config.seeds.size());
  std::vector<double> losses(static_cast<std::size_t>(n_cells));
#pragma omp parallel for schedule(dynamic, 1) num_threads(thread_count())
  for (std::int64_t k = 0; k < n_cells; ++k) {
    const std::size_t c = static_cast<std::size_t>(k) / config.seeds.size();
    const std::size_t s = static_cast<std::size_t>(k) % config.seeds.size();
    SweepConfig local = config;
    local.parametrization.base_eta = candidates[c];
    const ResolvedHP hp = local.parametrization.resolve(smallest.d);
    const TrainResult r = train(cell_config(local, smallest, hp.eta_E, config.seeds[s]), dist);
    losses[static_cast<std::size_t>(k)] = r.diverged ? std::numeric_limits<double>::infinity() : r.final_loss();
  }
  std::size_t best = 0;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    double sum = 0.0;
    for (std::size_t s = 0; s < config.seeds.size(); ++s) sum += losses[c * config.seeds.size() + s];
    out.mean_losses[c] = sum / static_cast<double>(config.seeds.size());
    if (out.mean_losses[c] < out.mean_losses[best]) best = c;
  }
  if (!std::isfinite(out.mean_losses[best])) throw NoOptimumError("presweep: every candidate diverged");
  out.base_eta = candidates[best];
  return out;
}

std::optional<PresweepResult> resolve_sweep_config(ParsedSweepConfig& parsed) {
  std::optional<PresweepResult> result;
  if (parsed.presweep) {
    parsed.finalize_grid();
    result = presweep_base_eta(parsed.config, parsed.presweep->candidates);
    parsed.config.parametrization.base_eta = result->base_eta;
    parsed.presweep.reset();
  }
  parsed.finalize_grid();
  validate(parsed.config, 1);
  return result;
}

OptimalLR optimal_lr(std::span<const SweepRecord> records, double threshold) {
  if (records.empty()) throw std::invalid_argument("optimal_lr: no records");
  if (!(threshold >= 0.0)) throw std::invalid_argument("optimal_lr: threshold must be >= 0");
  std::map<double, std::pair<double, int>> by_eta;  // eta -> (sum, count)
  for (const auto& r : records) {
    if (r.d != records.front().d || r.m != records.front().m)
      throw std::invalid_argument("optimal_lr: records span several configurations");
    auto& slot = by_eta[r.eta_E];
    slot.first += r.diverged ? std::numeric_limits<double>::infinity() : r.final_loss;
    slot.second += 1;
  }
  double best = std::numeric_limits<double>::infinity();
  for (const auto& [eta, acc] : by_eta) best = std::min(best, acc.first / acc.second);

  OptimalLR out;
  out.d = records.front().d;
  out.m = records.front().m;
  if (!std::isfinite(best))
    throw NoOptimumError("no optimum for d=" + std::to_string(out.d) + ", m=" + std::to_string(out.m) +
                         ": every learning rate diverged");
  double log_sum = 0.0;
  for (const auto& [eta, acc] : by_eta) {
    if (acc.first / acc.second <= (1.0 + threshold) * best) {
      log_sum += std::log(eta);
      ++out.n_qualifying;
    }
  }
  out.eta_opt = std::exp(log_sum / out.n_qualifying);
  out.best_mean_loss = best;
  return out;
}

SlopeFit fit_slope(std::span<const std::pair<Index, double>> per_d_optimal) {
  if (per_d_optimal.size() < 3) throw std::invalid_argument("fit_slope: need at least three widths");
  std::vector<double> x, y;
  for (const auto& [d, eta] : per_d_optimal) {
    if (d < 1 || !(eta > 0.0)) throw std::invalid_argument("fit_slope: widths and learning rates must be positive");
    x.push_back(std::log2(static_cast<double>(d)));
    y.push_back(std::log2(eta));
  }
  const auto n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    mx += x[k];
    my += y[k];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxx += (x[k] - mx) * (x[k] - mx);
    sxy += (x[k] - mx) * (y[k] - my);
    syy += (y[k] - my) * (y[k] - my);
  }
  if (!(sxx > 0.0)) throw std::invalid_argument("fit_slope: all widths are equal");
  SlopeFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  const double ss_res = std::max(0.0, syy - fit.slope * sxy);
  fit.r_squared = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
  fit.slope_se = std::sqrt(ss_res / (n - 2.0) / sxx);
  fit.per_d_optimal.assign(per_d_optimal.begin(), per_d_optimal.end());
  return fit;
}

SweepAnalysis analyze_sweep(std::span<const SweepRecord> records, double threshold) {
  SweepAnalysis analysis;
  std::vector<WidthConfig> order;
  std::map<std::pair<Index, Index>, std::vector<SweepRecord>> groups;
  for (const auto& r : records) {
    auto& g = groups[{r.d, r.m}];
    if (g.empty()) order.push_back({r.d, r.m});
    g.push_back(r);
  }
  std::vector<std::pair<Index, double>> per_d;
  for (const auto& w : order) {
    try {
      const OptimalLR opt = optimal_lr(groups.at({w.d, w.m}), threshold);
      analysis.optima.push_back(opt);
      per_d.emplace_back(opt.d, opt.eta_opt);
    } catch (const NoOptimumError&) {
      analysis.failed.push_back(w);
    }
  }
  try {
    analysis.fit = fit_slope(per_d);
  } catch (const std::invalid_argument& e) {
    analysis.fit_error = e.what();
  }
  return analysis;
}

std::string format_real(double value) {
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  if (std::isnan(value)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

void write_sweep_csv(std::ostream& out, std::span<const SweepRecord> records) {
  out << "d,m,eta_E,seed,final_loss,diverged\n";
  for (const auto& r : records)
    out << r.d << ',' << r.m << ',' << format_real(r.eta_E) << ',' << r.seed << ',' << format_real(r.final_loss)
        << ',' << (r.diverged ? 1 : 0) << '\n';
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_real(const std::string& s, std::size_t lineno) {
  if (s == "inf") return std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw std::runtime_error("line " + std::to_string(lineno) + ": not a number: '" + s + "'");
  return v;
}

template <typename T>
T parse_integer(const std::string& s, std::size_t lineno) {
  T v{};
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw std::runtime_error("line " + std::to_string(lineno) + ": not an integer: '" + s + "'");
  return v;
}

}  // namespace

std::vector<SweepRecord> read_sweep_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("line 1: empty sweep table");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_csv(line);
  const std::vector<std::string> expected = {"d", "m", "eta_E", "seed", "final_loss", "diverged"};
  if (header != expected) throw std::runtime_error("line 1: expected header d,m,eta_E,seed,final_loss,diverged");
  std::vector<SweepRecord> records;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != expected.size())
      throw std::runtime_error("line " + std::to_string(lineno) + ": expected 6 columns");
    SweepRecord r;
    r.d = parse_integer<Index>(cells[0], lineno);
    r.m = parse_integer<Index>(cells[1], lineno);
    r.eta_E = parse_real(cells[2], lineno);
    r.seed = parse_integer<std::uint64_t>(cells[3], lineno);
    r.final_loss = parse_real(cells[4], lineno);
    const int div = parse_integer<int>(cells[5], lineno);
    if (div != 0 && div != 1) throw std::runtime_error("line " + std::to_string(lineno) + ": diverged must be 0 or 1");
    r.diverged = div == 1;
    records.push_back(r);
  }
  return records;
}

void write_optimal_csv(std::ostream& out, const SweepAnalysis& analysis) {
  out << "d,m,eta_opt,n_qualifying\n";
  for (const auto& o : analysis.optima)
    out << o.d << ',' << o.m << ',' << format_real(o.eta_opt) << ',' << o.n_qualifying << '\n';
  for (const auto& w : analysis.failed) out << w.d << ',' << w.m << ",error:no_optimum,0\n";
}

std::string slopes_json(const SlopeFit& fit) {
  json j;
  j["slope"] = fit.slope;
  j["intercept"] = fit.intercept;
  j["r_squared"] = fit.r_squared;
  j["slope_se"] = fit.slope_se;
  j["ci95"] = {fit.slope - 1.96 * fit.slope_se, fit.slope + 1.96 * fit.slope_se};
  j["ref_distances"] = {{"0", fit.distance_to(0.0)}, {"-1/2", fit.distance_to(-0.5)}, {"-1", fit.distance_to(-1.0)}};
  j["low_r_squared"] = fit.r_squared < 0.8;
  json per_d = json::array();
  for (const auto& [d, eta] : fit.per_d_optimal) per_d.push_back({{"d", d}, {"eta_opt", eta}});
  j["per_d_optimal"] = per_d;
  return j.dump(2) + "\n";
}

}  // namespace lvlab
