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


#include "lvlab/feature_learning.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace lvlab {

namespace {

void check_token(Token token, Index m) {
  if (token.rank() < 1 || token.rank() > m) throw std::out_of_range("token rank out of range");
}

// Value of +1/-1 used by every sign in this file (ties go to +1).
inline double sign_of(double v) { return v >= 0.0 ? 1.0 : -1.0; }

}  // namespace

double OneStepDecomposition::reconstruction_error() const {
  const RowVector recon = reconstruction();
  double worst = 0.0;
  for (Index k = 0; k < recon.size(); ++k) {
    const double scale = std::abs(output_before(k)) + std::abs(delta_W(k)) + std::abs(delta_E(k)) +
                         std::abs(delta_WE(k));
    const double diff = std::abs(output_after(k) - recon(k));
    if (scale > 0.0) {
      worst = std::max(worst, diff / scale);
    } else if (diff > 0.0) {
      return std::numeric_limits<double>::infinity();
    }
  }
  return worst;
}

std::vector<OneStepDecomposition> one_step_decompositions(const ModelState& state0, const TokenDistribution& dist,
                                                          const Targets& targets, double eta_E, double eta_W,
                                                          std::span<const Token> tokens) {
  for (Token t : tokens) check_token(t, state0.m);
  const GradientPair grads = infinite_batch_gradients(state0, dist, targets, GradientScale::kRawResidual);
  Optimizer opt = Optimizer::sign_sgd();
  const ModelState state1 = step(state0, grads, opt, eta_E, eta_W);
  const Matrix S_W = sign_map(grads.dW);

  std::vector<OneStepDecomposition> out;
  out.reserve(tokens.size());
  for (Token t : tokens) {
    const Index i = t.index();
    const RowVector s_i = grads.dE.row(i).unaryExpr([](double v) { return sign_of(v); });
    OneStepDecomposition dec;
    dec.token = t;
    dec.output_before = forward(state0, t);
    dec.output_after = forward(state1, t);
    dec.delta_W = eta_W * (state0.E.row(i) * S_W);
    dec.delta_E = eta_E * (s_i * state0.W);
    dec.delta_WE = (eta_E * eta_W) * (s_i * S_W);
    out.push_back(std::move(dec));
  }
  return out;
}

OneStepDecomposition one_step_decomposition(const ModelState& state0, const TokenDistribution& dist,
                                            const Targets& targets, double eta_E, double eta_W, Token token) {
  const Token tokens[] = {token};
  return std::move(one_step_decompositions(state0, dist, targets, eta_E, eta_W, tokens).front());
}

double theory_delta_E(double eta_E, double sigma_W, Index d, Index m) {
  if (d < 1 || m < 1) throw std::invalid_argument("theory_delta_E: d and m must be >= 1");
  const auto dd = static_cast<double>(d);
  const auto mm = static_cast<double>(m);
  return eta_E * sigma_W * std::sqrt(dd + 2.0 * dd * (dd - 1.0) / (std::numbers::pi * mm));
}

double theory_delta_W(double eta_W, double sigma_E, Index d, Index m, double alpha_i, double mean_sq_freq) {
  if (d < 1 || m < 1) throw std::invalid_argument("theory_delta_W: d and m must be >= 1");
  if (!(mean_sq_freq > 0.0)) throw std::invalid_argument("theory_delta_W: mean squared frequency must be > 0");
  const auto dd = static_cast<double>(d);
  const auto mm = static_cast<double>(m);
  const double amplification = alpha_i * alpha_i / mean_sq_freq;
  return eta_W * sigma_E * std::sqrt(dd + amplification * 2.0 * dd * (dd - 1.0) / (std::numbers::pi * mm));
}

double hetero_theory_variance(Index d, Index m, double amplification) {
  const auto dd = static_cast<double>(d);
  return dd + (2.0 / std::numbers::pi) * amplification * dd * (dd - 1.0) / static_cast<double>(m);
}

double hetero_rho_sq(const TokenDistribution& dist, Token token) {
  check_token(token, dist.size());
  const auto& alphas = dist.alphas();
  const double a_i = dist.alpha(token);
  if (a_i == 0.0) return 0.0;
  double largest = 0.0, smallest = std::numeric_limits<double>::infinity();
  for (double a : alphas) {
    if (a > 0.0) {
      largest = std::max(largest, a * a);
      smallest = std::min(smallest, a * a);
    }
  }
  // Substituting t = e^s gives an integrand analytic in a strip of half-width
  // pi around the real axis, so the trapezoid rule converges geometrically.
  const double lo = -std::log(largest) - 40.0;
  const double hi = -std::log(smallest) + 90.0;
  const double h = 0.05;
  const double a2 = a_i * a_i;
  const std::size_t skip = static_cast<std::size_t>(token.index());
  double total = 0.0;
  for (double s = lo; s <= hi; s += h) {
    const double t = std::exp(s);
    double log_f = std::log(a2) - 1.5 * std::log1p(2.0 * t * a2) + s;
    for (std::size_t j = 0; j < alphas.size(); ++j)
      if (j != skip) log_f -= 0.5 * std::log1p(2.0 * t * alphas[j] * alphas[j]);
    total += std::exp(log_f);
  }
  return total * h;
}

double hetero_exact_variance(Index d, const TokenDistribution& dist, Token token) {
  const auto dd = static_cast<double>(d);
  return dd + (2.0 / std::numbers::pi) * dd * (dd - 1.0) * hetero_rho_sq(dist, token);
}

SteinResult stein_check(double rho, std::int64_t trials, const RngStream& rng) {
  if (!(std::abs(rho) <= 1.0)) throw std::invalid_argument("stein_check: |rho| must be <= 1");
  if (trials < 1) throw std::invalid_argument("stein_check: trials must be >= 1");
  const double tail = std::sqrt(1.0 - rho * rho);
  SteinResult result;
  result.theory = std::sqrt(2.0 / std::numbers::pi) * rho;
  parallel_trials<double>(
      trials,
      [&](std::int64_t t) {
        RngStream r = rng.substream(static_cast<std::uint64_t>(t));
        const double z = r.gaussian();
        const double g = rho * z + tail * r.gaussian();
        return sign_of(z) * g;
      },
      [&](std::int64_t, double obs) { result.estimate = accumulate(result.estimate, obs); });
  return result;
}

SignProductResult idealized_sign_product(Index d, Index m, double sigma_W, std::int64_t trials,
                                         const RngStream& rng) {
  if (d < 1 || m < 1) throw std::invalid_argument("idealized_sign_product: d and m must be >= 1");
  if (trials < 1) throw std::invalid_argument("idealized_sign_product: trials must be >= 1");
  SignProductResult result;
  result.coordinate_means.assign(static_cast<std::size_t>(m), Estimate{});
  const auto dd = static_cast<double>(d);
  result.theory_variance = sigma_W * sigma_W * (dd + 2.0 * dd * (dd - 1.0) / (std::numbers::pi * static_cast<double>(m)));
  parallel_trials<RowVector>(
      trials,
      [&](std::int64_t t) {
        RngStream r = rng.substream(static_cast<std::uint64_t>(t));
        const Matrix W = gaussian_matrix(d, m, sigma_W, r);
        const Vector v = gaussian_matrix(m, 1, 1.0, r);
        const Vector proj = W * v;
        const RowVector s = proj.transpose().unaryExpr([](double x) { return sign_of(x); });
        return RowVector(s * W);
      },
      [&](std::int64_t, const RowVector& X) {
        const auto mm = static_cast<double>(m);
        result.per_coord_variance = accumulate(result.per_coord_variance, X.squaredNorm() / mm);
        result.mean_vector_norm = accumulate(result.mean_vector_norm, X.norm() / std::sqrt(mm));
        for (Index k = 0; k < m; ++k)
          result.coordinate_means[static_cast<std::size_t>(k)] =
              accumulate(result.coordinate_means[static_cast<std::size_t>(k)], X(k));
      });
  return result;
}

std::vector<HeteroResult> idealized_hetero(Index d, const TokenDistribution& dist, std::span<const Token> tokens,
                                           std::int64_t trials, const RngStream& rng) {
  const Index m = dist.size();
  if (d < 1) throw std::invalid_argument("idealized_hetero: d must be >= 1");
  if (trials < 1) throw std::invalid_argument("idealized_hetero: trials must be >= 1");
  for (Token t : tokens) check_token(t, m);
  const FrequencyStats stats = frequency_stats(dist);
  const Vector alphas = dist.frequencies();
  const auto n_tokens = static_cast<Index>(tokens.size());

  std::vector<HeteroResult> results(tokens.size());
  for (std::size_t k = 0; k < tokens.size(); ++k) {
    results[k].token = tokens[k];
    results[k].coordinate_means.assign(static_cast<std::size_t>(m), Estimate{});
    results[k].theory_variance =
        hetero_theory_variance(d, m, stats.amplification[static_cast<std::size_t>(tokens[k].index())]);
    results[k].exact_variance = hetero_exact_variance(d, dist, tokens[k]);
  }

  parallel_trials<Matrix>(
      trials,
      [&](std::int64_t t) {
        RngStream r = rng.substream(static_cast<std::uint64_t>(t));
        const Matrix E = gaussian_matrix(m, d, 1.0, r);
        Matrix M = gaussian_matrix(m, m, 1.0, r);
        for (Index j = 0; j < m; ++j) M.row(j) *= alphas(j);
        const Matrix S = sign_map(E.transpose() * M);
        Matrix X(n_tokens, m);
        for (Index k = 0; k < n_tokens; ++k) X.row(k) = E.row(tokens[static_cast<std::size_t>(k)].index()) * S;
        return X;
      },
      [&](std::int64_t, const Matrix& X) {
        for (Index k = 0; k < n_tokens; ++k) {
          HeteroResult& res = results[static_cast<std::size_t>(k)];
          res.per_coord_variance =
              accumulate(res.per_coord_variance, X.row(k).squaredNorm() / static_cast<double>(m));
          for (Index c = 0; c < m; ++c)
            res.coordinate_means[static_cast<std::size_t>(c)] =
                accumulate(res.coordinate_means[static_cast<std::size_t>(c)], X(k, c));
        }
      });
  return results;
}

HeteroResult idealized_hetero(Index d, const TokenDistribution& dist, Token token, std::int64_t trials,
                              const RngStream& rng) {
  const Token tokens[] = {token};
  return std::move(idealized_hetero(d, dist, tokens, trials, rng).front());
}

double max_abs_z(const std::vector<Estimate>& coordinate_means) {
  double worst = 0.0;
  for (const Estimate& e : coordinate_means) {
    const double se = e.standard_error();
    if (se > 0.0) {
      worst = std::max(worst, std::abs(e.mean) / se);
    } else if (e.mean != 0.0) {
      return std::numeric_limits<double>::infinity();
    }
  }
  return worst;
}

std::string to_string(DominantTerm term) { return term == DominantTerm::kMuP ? "µP-term" : "LV-term"; }

RegimeReport regime_report(Index d, const TokenDistribution& dist, const Parametrization& param, Token token,
                           double base_eta) {
  const Index m = dist.size();
  check_token(token, m);
  const ResolvedHP hp = resolve(param, d, base_eta);
  const FrequencyStats stats = frequency_stats(dist);
  RegimeReport report;
  report.delta_E_theory = theory_delta_E(hp.eta_E, hp.sigma_W_out, d, m);
  report.delta_W_theory =
      theory_delta_W(hp.eta_W_out, hp.sigma_E, d, m, dist.alpha(token), stats.mean_squared_frequency);
  report.balance_ratio = report.delta_E_theory / report.delta_W_theory;
  const auto dd = static_cast<double>(d);
  const double mup_term = 2.0 * dd * (dd - 1.0) / (std::numbers::pi * static_cast<double>(m));
  report.dominant_term_E = mup_term > dd ? DominantTerm::kMuP : DominantTerm::kLV;
  return report;
}

std::vector<AvgNormReport> one_step_average_norms(const OneStepExperiment& ex, const RngStream& rng) {
  if (ex.inits < 1) throw std::invalid_argument("one_step_average_norms: inits must be >= 1");
  if (ex.tokens.empty()) throw std::invalid_argument("one_step_average_norms: no tokens");
  const TokenDistribution dist = zipf_distribution(ex.m, ex.zipf_exponent);
  for (Token t : ex.tokens) check_token(t, ex.m);
  const ResolvedHP hp = resolve(ex.param, ex.d, ex.base_eta);
  const FrequencyStats stats = frequency_stats(dist);
  const std::size_t n_tokens = ex.tokens.size();
  const auto mm = static_cast<double>(ex.m);

  // Per token: |delta_E|^2/m, |delta_W|^2/m, |delta_WE|^2/m.
  std::vector<Estimate> acc(3 * n_tokens);
  parallel_trials<std::vector<double>>(
      ex.inits,
      [&](std::int64_t t) {
        RngStream r = rng.substream(static_cast<std::uint64_t>(t));
        const ModelState state = init_model(ex.m, ex.d, hp.sigma_E, hp.sigma_W_out, r);
        const Targets targets = make_targets(state, r);
        const auto decs = one_step_decompositions(state, dist, targets, hp.eta_E, hp.eta_W_out, ex.tokens);
        std::vector<double> obs(3 * n_tokens);
        for (std::size_t k = 0; k < n_tokens; ++k) {
          obs[3 * k] = decs[k].delta_E.squaredNorm() / mm;
          obs[3 * k + 1] = decs[k].delta_W.squaredNorm() / mm;
          obs[3 * k + 2] = decs[k].delta_WE.squaredNorm() / mm;
        }
        return obs;
      },
      [&](std::int64_t, const std::vector<double>& obs) {
        for (std::size_t k = 0; k < obs.size(); ++k) acc[k] = accumulate(acc[k], obs[k]);
      });

  std::vector<AvgNormReport> reports;
  for (std::size_t k = 0; k < n_tokens; ++k) {
    const Token token = ex.tokens[k];
    const double theories[3] = {
        theory_delta_E(hp.eta_E, hp.sigma_W_out, ex.d, ex.m),
        theory_delta_W(hp.eta_W_out, hp.sigma_E, ex.d, ex.m, dist.alpha(token), stats.mean_squared_frequency),
        0.0};
    const char* names[3] = {"delta_E", "delta_W", "delta_WE"};
    for (int c = 0; c < 3; ++c) {
      AvgNormReport rep;
      rep.component = names[c];
      rep.token = token;
      rep.d = ex.d;
      rep.m = ex.m;
      rep.mean_sq = acc[3 * k + static_cast<std::size_t>(c)];
      rep.empirical = std::sqrt(rep.mean_sq.mean);
      rep.se = rep.empirical > 0.0 ? rep.mean_sq.standard_error() / (2.0 * rep.empirical) : 0.0;
      rep.theory = theories[c];
      rep.ratio = rep.theory > 0.0 ? rep.empirical / rep.theory : 0.0;
      reports.push_back(rep);
    }
  }
  return reports;
}

Index RegimePath::m_at(Index d) const {
  switch (kind) {
    case Kind::kFixed:
      return static_cast<Index>(std::llround(value));
    case Kind::kLinear:
      return std::max<Index>(1, static_cast<Index>(std::llround(value * static_cast<double>(d))));
    case Kind::kCubic:
      return d * d * d;
  }
  return 0;
}

std::string RegimePath::name() const {
  switch (kind) {
    case Kind::kFixed:
      return "m=" + std::to_string(static_cast<long long>(std::llround(value)));
    case Kind::kLinear: {
      std::string c = std::to_string(value);
      c.erase(c.find_last_not_of('0') + 1);
      if (!c.empty() && c.back() == '.') c.pop_back();
      return "m=" + c + "d";
    }
    case Kind::kCubic:
      return "m=d^3";
  }
  return "";
}

PathSlope delta_E_path_slope(const RegimePath& path, std::span<const Index> widths) {
  if (widths.size() < 2) throw std::invalid_argument("delta_E_path_slope: need at least two widths");
  std::vector<double> x, y;
  for (Index d : widths) {
    x.push_back(std::log2(static_cast<double>(d)));
    y.push_back(std::log2(theory_delta_E(1.0, 1.0, d, path.m_at(d))));
  }
  const auto n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    mx += x[k];
    my += y[k];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxx += (x[k] - mx) * (x[k] - mx);
    sxy += (x[k] - mx) * (y[k] - my);
  }
  if (!(sxx > 0.0)) throw std::invalid_argument("delta_E_path_slope: widths must differ");
  PathSlope s;
  s.full_range = sxy / sxx;
  s.lower_end = (y[1] - y[0]) / (x[1] - x[0]);
  const std::size_t last = x.size() - 1;
  s.upper_end = (y[last] - y[last - 1]) / (x[last] - x[last - 1]);
  return s;
}

}  // namespace lvlab
