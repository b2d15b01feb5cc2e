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


#include "cli.hpp"

#include "svg.hpp"

#include "lvlab/checks.hpp"
#include "lvlab/sweep.hpp"
#include "lvlab/zipf.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>
#include <stdexcept>

#ifndef LVLAB_VERSION
#define LVLAB_VERSION "0.0.0"
#endif

namespace lvlab::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Bad input that is not a flag-parsing error: missing files, malformed CSVs.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int k = 0; k < len; ++k) {
    out += hex[digest[k] >> 4];
    out += hex[digest[k] & 15];
  }
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// UTC time, or SOURCE_DATE_EPOCH when set.
std::string timestamp() {
  std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH")) t = static_cast<std::time_t>(std::strtoll(epoch, nullptr, 10));
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct Context {
  Context(const std::vector<std::string>& a, std::ostream& o, std::ostream& e) : args(a), out(o), err(e) {}

  std::vector<std::string> args;
  std::ostream& out;
  std::ostream& err;
  std::uint64_t seed = 0;
  std::string out_dir;
  int threads = 0;
  std::string config_text;  // hashed into the manifest along with the arguments
  std::vector<std::string> outputs;

  bool has_out() const { return !out_dir.empty(); }

  void write(const std::string& name, const std::string& content) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw UsageError("cannot create " + out_dir + ": " + ec.message());
    const fs::path path = fs::path(out_dir) / name;
    std::ofstream f(path, std::ios::binary);
    f << content;
    if (!f) throw UsageError("cannot write " + path.string());
    outputs.push_back(name);
  }

  void write_manifest() {
    if (!has_out()) return;
    std::string hashed = config_text;
    for (std::size_t k = 0; k < args.size(); ++k) {
      if (args[k] == "--out" || args[k] == "--threads") {
        ++k;
        continue;
      }
      if (args[k].rfind("--out=", 0) == 0 || args[k].rfind("--threads=", 0) == 0) continue;
      hashed += '\0' + args[k];
    }
    json m;
    m["command_line"] = json(std::vector<std::string>{"lvlab"});
    for (const auto& a : args) m["command_line"].push_back(a);
    m["config_hash"] = "sha256:" + sha256_hex(hashed);
    m["seed"] = seed;
    m["version"] = LVLAB_VERSION;
    m["timestamp"] = timestamp();
    m["outputs"] = outputs;
    write("manifest.json", m.dump(2) + "\n");
  }
};

void add_common(CLI::App* sub, Context& ctx) {
  sub->add_option("--seed", ctx.seed, "Master seed")->capture_default_str();
  sub->add_option("--out", ctx.out_dir, "Output directory");
  sub->add_option("--threads", ctx.threads, "Worker threads (overrides LVLAB_THREADS)")
      ->check(CLI::NonNegativeNumber);
}

int finish_checks(Context& ctx, const std::string& name, const std::vector<CheckRow>& rows) {
  std::ostringstream csv;
  write_check_csv(csv, rows);
  ctx.out << csv.str();
  if (ctx.has_out()) {
    ctx.write(name + ".csv", csv.str());
    ctx.write_manifest();
  }
  return all_pass(rows) ? kExitPass : kExitCheckFailure;
}

// ---------------------------------------------------------------------------
// CSV input for report.

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name, const std::string& path) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw UsageError(path + ": missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  }
};

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

Table read_table(const std::string& path) {
  std::istringstream in(read_file(path));
  Table t;
  std::string line;
  if (!std::getline(in, line) || line.empty()) throw UsageError(path + ": empty CSV");
  t.header = split(line, ',');
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto row = split(line, ',');
    if (row.size() != t.header.size())
      throw UsageError(path + ": line " + std::to_string(lineno) + ": expected " +
                       std::to_string(t.header.size()) + " fields");
    t.rows.push_back(std::move(row));
  }
  return t;
}

double parse_number(const std::string& s, const std::string& path) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw UsageError(path + ": not a number: '" + s + "'");
  }
}

const char* const kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2"};

std::string optimal_lr_svg(const std::string& path) {
  const Table t = read_table(path);
  const std::size_t cd = t.column("d", path);
  const std::size_t ce = t.column("eta_opt", path);
  svg::Series s;
  s.label = "optimal eta_E";
  for (const auto& row : t.rows) {
    if (row[ce].rfind("error:", 0) == 0) continue;
    s.points.emplace_back(parse_number(row[cd], path), parse_number(row[ce], path));
  }
  if (s.points.empty()) throw UsageError(path + ": no optimal learning rates");
  std::sort(s.points.begin(), s.points.end());
  double lx = 0.0, ly = 0.0;
  for (const auto& [x, y] : s.points) {
    lx += std::log(x);
    ly += std::log(y);
  }
  const double n = static_cast<double>(s.points.size());
  const double x0 = std::exp(lx / n), y0 = std::exp(ly / n);
  svg::LogLogPlot plot;
  plot.title = "Optimal embedding learning rate vs width";
  plot.x_label = "d";
  plot.y_label = "eta_E*";
  plot.series.push_back(s);
  plot.references = {{"slope 0", 0.0, x0, y0, "#2ca02c"},
                     {"slope -1/2", -0.5, x0, y0, "#d62728"},
                     {"slope -1", -1.0, x0, y0, "#9467bd"}};
  return svg::render(plot);
}

std::string rank_frequency_svg(const std::string& path) {
  std::istringstream in(read_file(path));
  std::vector<std::uint64_t> counts;
  try {
    for (const auto& r : read_counts(in)) counts.push_back(r.count);
  } catch (const CountsParseError& e) {
    throw UsageError(path + ": " + e.what());
  }
  if (counts.empty()) throw UsageError(path + ": no counts");
  std::stable_sort(counts.begin(), counts.end(), std::greater<>());
  svg::Series s;
  s.label = "counts";
  s.line = false;
  for (std::size_t k = 0; k < counts.size(); ++k)
    if (counts[k] > 0) s.points.emplace_back(static_cast<double>(k + 1), static_cast<double>(counts[k]));
  svg::LogLogPlot plot;
  plot.title = "Rank-frequency";
  plot.x_label = "rank";
  plot.y_label = "count";
  plot.series.push_back(s);
  try {
    const ExponentFit fit = fit_exponent(counts);
    std::ostringstream label;
    label << "fit a=" << std::round(fit.exponent * 1000.0) / 1000.0;
    plot.references.push_back({label.str(), -fit.exponent, 1.0, std::exp(fit.intercept), "#d62728"});
  } catch (const std::invalid_argument&) {
  }
  return svg::render(plot);
}

std::string loss_vs_lr_svg(const std::string& path) {
  std::istringstream in(read_file(path));
  std::vector<SweepRecord> records;
  try {
    records = read_sweep_csv(in);
  } catch (const std::runtime_error& e) {
    throw UsageError(path + ": " + e.what());
  }
  if (records.empty()) throw UsageError(path + ": empty CSV");
  std::map<std::pair<Index, Index>, std::map<double, std::pair<double, int>>> sums;
  for (const auto& r : records) {
    auto& cell = sums[{r.d, r.m}][r.eta_E];
    cell.first += r.final_loss;
    cell.second += 1;
  }
  svg::LogLogPlot plot;
  plot.title = "Final loss vs embedding learning rate";
  plot.x_label = "eta_E";
  plot.y_label = "seed-mean final loss";
  std::size_t k = 0;
  for (const auto& [dm, per_eta] : sums) {
    svg::Series s;
    s.label = "d=" + std::to_string(dm.first) + " m=" + std::to_string(dm.second);
    s.color = kPalette[k++ % std::size(kPalette)];
    for (const auto& [eta, acc] : per_eta) s.points.emplace_back(eta, acc.first / acc.second);
    plot.series.push_back(s);
  }
  return svg::render(plot);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Context ctx{args, out, err};
  CLI::App app{"lvlab: embedding learning-rate scaling lab", "lvlab"};
  app.set_version_flag("--version", LVLAB_VERSION);
  app.require_subcommand(1);
  std::function<int()> action;

  // verify ------------------------------------------------------------------
  CLI::App* verify = app.add_subcommand("verify", "Monte Carlo and formula checks (CSV)");
  verify->require_subcommand(1);

  SteinSuite stein;
  CLI::App* v_stein = verify->add_subcommand("stein", "E[sign(Z) G] = sqrt(2/pi) rho");
  v_stein->add_option("--rho", stein.rhos, "Correlations")->capture_default_str()->check(CLI::Range(-1.0, 1.0));
  v_stein->add_option("--trials", stein.trials)->capture_default_str()->check(CLI::PositiveNumber);
  v_stein->add_option("--z-limit", stein.z_limit)->capture_default_str();
  add_common(v_stein, ctx);
  v_stein->callback([&] { action = [&] { return finish_checks(ctx, "stein", run_stein_suite(stein, ctx.seed)); }; });

  CovarianceSuite cov;
  CLI::App* v_cov = verify->add_subcommand("covariance", "Per-coordinate variance of sum_j sign(<v, W_j>) W_j");
  v_cov->add_option("--d", cov.d)->capture_default_str()->check(CLI::PositiveNumber);
  v_cov->add_option("--m", cov.m)->capture_default_str()->check(CLI::PositiveNumber);
  v_cov->add_option("--sigma-w", cov.sigma_W)->capture_default_str()->check(CLI::NonNegativeNumber);
  v_cov->add_option("--trials", cov.trials)->capture_default_str()->check(CLI::Range(2, 1 << 30));
  v_cov->add_option("--rel-tol", cov.rel_tol)->capture_default_str();
  v_cov->add_option("--z-limit", cov.z_limit)->capture_default_str();
  add_common(v_cov, ctx);
  v_cov->callback([&] { action = [&] { return finish_checks(ctx, "covariance", run_covariance_suite(cov, ctx.seed)); }; });

  HeteroSuite het;
  CLI::App* v_het = verify->add_subcommand("hetero", "Sign map under Zipf-weighted residuals");
  v_het->add_option("--d", het.d)->capture_default_str()->check(CLI::PositiveNumber);
  v_het->add_option("--m", het.m)->capture_default_str()->check(CLI::PositiveNumber);
  v_het->add_option("--zipf-a", het.zipf_a)->capture_default_str()->check(CLI::PositiveNumber);
  v_het->add_option("--token", het.tokens, "Token ranks")->capture_default_str()->check(CLI::PositiveNumber);
  v_het->add_option("--trials", het.trials)->capture_default_str()->check(CLI::Range(2, 1 << 30));
  v_het->add_option("--rel-tol", het.rel_tol)->capture_default_str();
  v_het->add_option("--z-limit", het.z_limit)->capture_default_str();
  add_common(v_het, ctx);
  v_het->callback([&] {
    action = [&] {
      for (Index t : het.tokens)
        if (t > het.m) throw CLI::ValidationError("--token", "token rank exceeds --m");
      return finish_checks(ctx, "hetero", run_hetero_suite(het, ctx.seed));
    };
  });

  ReconstructionSuite recon;
  ThetaBandSuite band;
  std::string part = "all";
  CLI::App* v_one = verify->add_subcommand("one-step", "One-step decomposition: reconstruction and norm bands");
  v_one->add_option("--part", part)->capture_default_str()->check(CLI::IsMember({"all", "reconstruction", "band"}));
  v_one->add_option("--d", band.widths, "Widths for the band check")->capture_default_str()->check(CLI::PositiveNumber);
  v_one->add_option("--m", band.vocab_sizes, "Vocabulary sizes for the band check")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  v_one->add_option("--token", band.tokens)->capture_default_str()->check(CLI::PositiveNumber);
  v_one->add_option("--inits", band.inits)->capture_default_str()->check(CLI::Range(2, 1 << 30));
  v_one->add_option("--zipf-a", band.zipf_a)->capture_default_str()->check(CLI::PositiveNumber);
  v_one->add_option("--parametrization", band.parametrization)->capture_default_str();
  v_one->add_option("--base-eta", band.base_eta)->capture_default_str()->check(CLI::PositiveNumber);
  v_one->add_option("--band-lo", band.band_lo)->capture_default_str();
  v_one->add_option("--band-hi", band.band_hi)->capture_default_str();
  v_one->add_option("--instances", recon.instances)->capture_default_str()->check(CLI::PositiveNumber);
  v_one->add_option("--max-m", recon.max_m)->capture_default_str()->check(CLI::PositiveNumber);
  v_one->add_option("--max-d", recon.max_d)->capture_default_str()->check(CLI::PositiveNumber);
  v_one->add_option("--tol", recon.rel_tol, "Reconstruction tolerance")->capture_default_str();
  add_common(v_one, ctx);
  v_one->callback([&] {
    action = [&] {
      for (Index m : band.vocab_sizes)
        for (Index t : band.tokens)
          if (t > m) throw CLI::ValidationError("--token", "token rank exceeds --m");
      std::vector<CheckRow> rows;
      if (part != "band") rows = run_reconstruction_suite(recon, ctx.seed);
      if (part != "reconstruction") {
        auto b = run_theta_band_suite(band, ctx.seed);
        rows.insert(rows.end(), b.begin(), b.end());
      }
      return finish_checks(ctx, "one_step", rows);
    };
  });

  RegimeSuite reg;
  CLI::App* v_reg = verify->add_subcommand("regimes", "Width exponents of the delta_E prediction along m(d) paths");
  v_reg->add_option("--d-min", reg.d_min)->capture_default_str()->check(CLI::Range(2, 1 << 20));
  v_reg->add_option("--d-max", reg.d_max)->capture_default_str()->check(CLI::Range(4, 1 << 20));
  v_reg->add_option("--m", reg.m_fixed, "Vocabulary size of the fixed-m path")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  v_reg->add_option("--tol", reg.tol)->capture_default_str();
  v_reg->add_option("--zipf-a", reg.zipf_a)->capture_default_str()->check(CLI::PositiveNumber);
  add_common(v_reg, ctx);
  v_reg->callback([&] {
    action = [&] {
      if (reg.d_max < 2 * reg.d_min) throw CLI::ValidationError("--d-max", "need d-max >= 2 d-min");
      return finish_checks(ctx, "regimes", run_regime_suite(reg));
    };
  });

  // zipf --------------------------------------------------------------------
  CLI::App* zipf = app.add_subcommand("zipf", "Token-frequency utilities");
  zipf->require_subcommand(1);

  Index gen_m = 4096;
  double gen_a = 1.0;
  std::uint64_t gen_draws = 1'000'000;
  CLI::App* z_gen = zipf->add_subcommand("gen", "Multinomial counts from a Zipf law");
  z_gen->add_option("--m", gen_m)->capture_default_str()->check(CLI::PositiveNumber);
  z_gen->add_option("--a", gen_a)->capture_default_str()->check(CLI::PositiveNumber);
  z_gen->add_option("--draws", gen_draws)->capture_default_str();
  add_common(z_gen, ctx);
  z_gen->callback([&] {
    action = [&] {
      RngStream rng(ctx.seed, 0);
      const auto counts = sample_counts(zipf_distribution(gen_m, gen_a), gen_draws, rng);
      std::ostringstream os;
      std::ostringstream comment;
      comment << "zipf m=" << gen_m << " a=" << gen_a << " draws=" << gen_draws << " seed=" << ctx.seed;
      write_counts(os, counts, comment.str());
      if (ctx.has_out()) {
        ctx.write("counts.tsv", os.str());
        ctx.write_manifest();
      } else {
        ctx.out << os.str();
      }
      return kExitPass;
    };
  });

  std::string counts_path;
  CLI::App* z_fit = zipf->add_subcommand("fit", "Fit the Zipf exponent of a counts file");
  z_fit->add_option("--counts", counts_path, "<rank-or-id>\\t<count> per line")->required();
  add_common(z_fit, ctx);
  z_fit->callback([&] {
    action = [&] {
      ctx.config_text = read_file(counts_path);
      std::istringstream in(ctx.config_text);
      std::vector<std::uint64_t> counts;
      try {
        for (const auto& r : read_counts(in)) counts.push_back(r.count);
      } catch (const CountsParseError& e) {
        throw UsageError(counts_path + ": " + e.what());
      }
      const ExponentFit fit = fit_exponent(counts);
      std::ostringstream csv;
      csv << "a_hat,intercept,r_squared,ranks_used\n"
          << format_real(fit.exponent) << ',' << format_real(fit.intercept) << ',' << format_real(fit.r_squared)
          << ',' << fit.ranks_used << '\n';
      ctx.out << csv.str();
      if (ctx.has_out()) {
        ctx.write("zipf_fit.csv", csv.str());
        ctx.write_manifest();
      }
      return kExitPass;
    };
  });

  double lemma_a = 1.0;
  Index lemma_m_max = Index{1} << 14;
  std::string lemma_mode = "unnormalized";
  CLI::App* z_lemma = zipf->add_subcommand("lemma1", "m times the mean squared frequency for m = 1, 2, 4, ...");
  z_lemma->add_option("--a", lemma_a)->capture_default_str()->check(CLI::PositiveNumber);
  z_lemma->add_option("--m-max", lemma_m_max)->capture_default_str()->check(CLI::PositiveNumber);
  z_lemma->add_option("--mode", lemma_mode)->capture_default_str()->check(CLI::IsMember({"unnormalized", "normalized"}));
  add_common(z_lemma, ctx);
  z_lemma->callback([&] {
    action = [&] {
      std::vector<Index> ms;
      for (Index m = 1; m <= lemma_m_max; m *= 2) ms.push_back(m);
      const bool unnormalized = lemma_mode == "unnormalized";
      const auto rows = lemma1_scan(lemma_a, ms, unnormalized ? FrequencyMode::kUnnormalized : FrequencyMode::kNormalized);
      // Partial sums of i^{-2a} are bounded by zeta(2a) when 2a > 1.
      const bool bounded = unnormalized && 2.0 * lemma_a > 1.0;
      const double bound = bounded ? std::riemann_zeta(2.0 * lemma_a) : 0.0;
      bool ok = true;
      std::ostringstream csv;
      csv << "m,scaled_mean_sq,bound,pass\n";
      for (const auto& r : rows) {
        csv << r.m << ',' << format_real(r.scaled_mean_sq) << ',';
        if (bounded) {
          const bool pass = r.scaled_mean_sq <= bound;
          ok = ok && pass;
          csv << format_real(bound) << ',' << (pass ? "pass" : "fail") << '\n';
        } else {
          csv << ",info\n";
        }
      }
      ctx.out << csv.str();
      if (ctx.has_out()) {
        ctx.write("lemma1.csv", csv.str());
        ctx.write_manifest();
      }
      return ok ? kExitPass : kExitCheckFailure;
    };
  });

  // sweep -------------------------------------------------------------------
  CLI::App* sweep = app.add_subcommand("sweep", "Embedding learning-rate sweeps");
  sweep->require_subcommand(1);

  std::string config_path;
  bool serial = false;
  CLI::App* s_run = sweep->add_subcommand("run", "Run a sweep config; writes sweep.csv, optimal.csv, slopes.json");
  s_run->add_option("--config", config_path, "JSON sweep config")->required();
  s_run->add_flag("--serial", serial, "Run cells one at a time");
  add_common(s_run, ctx);

  std::string sweep_csv;
  double threshold = 0.20;
  CLI::App* s_an = sweep->add_subcommand("analyze", "Optimal learning rates and the width slope from a sweep.csv");
  s_an->add_option("--csv", sweep_csv, "sweep.csv")->required();
  s_an->add_option("--threshold", threshold)->capture_default_str()->check(CLI::NonNegativeNumber);
  add_common(s_an, ctx);

  const auto write_analysis = [&](const SweepAnalysis& a) {
    std::ostringstream opt;
    write_optimal_csv(opt, a);
    if (ctx.has_out()) {
      ctx.write("optimal.csv", opt.str());
      if (a.fit) ctx.write("slopes.json", slopes_json(*a.fit));
    } else {
      ctx.out << opt.str();
      if (a.fit) ctx.out << slopes_json(*a.fit);
    }
    for (const auto& w : a.failed)
      ctx.err << "lvlab: no optimum for d=" << w.d << " m=" << w.m << " (every run diverged)\n";
    if (a.fit) {
      ctx.err << "slope " << a.fit->slope << " (r^2 " << a.fit->r_squared << ")\n";
      if (a.fit->r_squared < 0.8) ctx.err << "lvlab: warning: r^2 below 0.8\n";
    } else {
      ctx.err << "lvlab: no slope fit: " << a.fit_error << '\n';
    }
    return a.failed.empty() ? kExitPass : kExitCheckFailure;
  };

  s_run->callback([&] {
    action = [&] {
      if (ctx.out_dir.empty()) ctx.out_dir = ".";
      ctx.config_text = read_file(config_path);
      ParsedSweepConfig parsed = parse_sweep_config(ctx.config_text);
      if (s_run->count("--seed")) parsed.config.master_seed = ctx.seed;
      ctx.seed = parsed.config.master_seed;
      const auto pre = resolve_sweep_config(parsed);
      if (pre) {
        std::ostringstream csv;
        csv << "base_eta,mean_loss\n";
        for (std::size_t k = 0; k < pre->candidates.size(); ++k)
          csv << format_real(pre->candidates[k]) << ',' << format_real(pre->mean_losses[k]) << '\n';
        ctx.write("presweep.csv", csv.str());
        ctx.err << "base_eta " << pre->base_eta << " from the pre-sweep\n";
      }
      const SweepConfig& config = parsed.config;
      const auto records = serial ? run_sweep_serial(config) : run_sweep(config);
      std::ostringstream csv;
      write_sweep_csv(csv, records);
      ctx.write("sweep.csv", csv.str());
      const int code = write_analysis(analyze_sweep(records, config.threshold));
      ctx.write_manifest();
      return code;
    };
  });

  s_an->callback([&] {
    action = [&] {
      ctx.config_text = read_file(sweep_csv);
      std::istringstream in(ctx.config_text);
      std::vector<SweepRecord> records;
      try {
        records = read_sweep_csv(in);
      } catch (const std::runtime_error& e) {
        throw UsageError(sweep_csv + ": " + e.what());
      }
      if (records.empty()) throw UsageError(sweep_csv + ": no records");
      const int code = write_analysis(analyze_sweep(records, threshold));
      ctx.write_manifest();
      return code;
    };
  });

  // report ------------------------------------------------------------------
  std::string report_optimal, report_counts, report_sweep;
  CLI::App* report = app.add_subcommand("report", "SVG plots from optimal.csv, sweep.csv and counts files");
  report->add_option("--optimal", report_optimal, "optimal.csv -> optimal_lr.svg");
  report->add_option("--sweep", report_sweep, "sweep.csv -> loss_vs_lr.svg");
  report->add_option("--counts", report_counts, "counts file -> rank_frequency.svg");
  add_common(report, ctx);
  report->callback([&] {
    action = [&] {
      if (report_optimal.empty() && report_counts.empty() && report_sweep.empty())
        throw UsageError("report needs --optimal, --sweep or --counts");
      if (ctx.out_dir.empty()) ctx.out_dir = ".";
      // Render everything before writing anything.
      std::vector<std::pair<std::string, std::string>> files;
      if (!report_optimal.empty()) files.emplace_back("optimal_lr.svg", optimal_lr_svg(report_optimal));
      if (!report_sweep.empty()) files.emplace_back("loss_vs_lr.svg", loss_vs_lr_svg(report_sweep));
      if (!report_counts.empty()) files.emplace_back("rank_frequency.svg", rank_frequency_svg(report_counts));
      for (const auto& [name, content] : files) ctx.write(name, content);
      ctx.write_manifest();
      return kExitPass;
    };
  });

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
    if (ctx.threads > 0) set_thread_count(ctx.threads);
    const int code = action ? action() : kExitUsage;
    set_thread_count(0);
    return code;
  } catch (const CLI::ParseError& e) {
    set_thread_count(0);
    return app.exit(e, out, err) == 0 ? kExitPass : kExitUsage;
  } catch (const UsageError& e) {
    err << "lvlab: " << e.what() << '\n';
  } catch (const std::invalid_argument& e) {
    err << "lvlab: " << e.what() << '\n';
  } catch (const std::exception& e) {
    err << "lvlab: error: " << e.what() << '\n';
  }
  set_thread_count(0);
  return kExitUsage;
}

}  // namespace lvlab::cli
