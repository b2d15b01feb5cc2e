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

#include "lvlab/parametrization.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>

namespace lvlab {

WidthExponent WidthExponent::from_double(double value) {
  const double scaled = value * kDenominator;
  if (!std::isfinite(value) || scaled != std::round(scaled) || std::abs(scaled) > 64)
    throw std::invalid_argument("width exponent must be a multiple of 1/2, got " + std::to_string(value));
  return halves(static_cast<int>(std::lround(scaled)));
}

double WidthExponent::apply(std::int64_t d) const {
  if (d < 1) throw std::invalid_argument("width must be >= 1");
  const auto base = static_cast<double>(d);
  const int whole = halves_ / 2;  // truncates toward zero
  const bool half = halves_ % 2 != 0;
  double out = 1.0;
  for (int k = 0; k < std::abs(whole); ++k) out *= base;
  if (whole < 0) out = 1.0 / out;
  if (half) out = halves_ > 0 ? out * std::sqrt(base) : out / std::sqrt(base);
  return out;
}

Parametrization preset(Preset which) {
  const auto h = WidthExponent::halves;
  switch (which) {
    case Preset::kSP:
      return {"SP", {h(0), h(0)}, {h(-2), h(0)}, {h(-2), h(0)}};
    case Preset::kMUP:
      return {"MUP", {h(0), h(0)}, {h(-4), h(-2)}, {h(-2), h(-2)}};
    case Preset::kLVP:
      return {"LVP", {h(-2), h(-1)}, {h(-2), h(-2)}, {h(-2), h(-2)}};
    case Preset::kMUPText:
      return {"MUP_TEXT", {h(0), h(0)}, {h(-2), h(-2)}, {h(-2), h(-2)}};
  }
  throw std::invalid_argument("unknown preset");
}

Parametrization preset(std::string_view name) {
  std::string upper(name);
  std::transform(upper.begin(), upper.end(), upper.begin(), [](unsigned char c) { return std::toupper(c); });
  if (upper == "SP") return preset(Preset::kSP);
  if (upper == "MUP" || upper == "µP") return preset(Preset::kMUP);
  if (upper == "LVP") return preset(Preset::kLVP);
  if (upper == "MUP_TEXT") return preset(Preset::kMUPText);
  throw std::invalid_argument("unknown parametrization '" + std::string(name) + "'");
}

ResolvedHP resolve(const Parametrization& param, std::int64_t d, double base_eta, const RoleBases& bases) {
  if (d < 1) throw std::invalid_argument("resolve: width d must be >= 1");
  if (!std::isfinite(base_eta) || base_eta <= 0.0) throw std::invalid_argument("resolve: base_eta must be > 0");
  for (const auto& b : {bases.embedding, bases.output, bases.hidden})
    if (b && (!std::isfinite(*b) || *b < 0.0)) throw std::invalid_argument("resolve: role base must be >= 0");

  ResolvedHP hp;
  hp.d = d;
  hp.base_eta = base_eta;
  hp.sigma_E = std::sqrt(param.embedding.init_variance.apply(d));
  hp.sigma_W_out = std::sqrt(param.output.init_variance.apply(d));
  hp.sigma_hidden = std::sqrt(param.hidden.init_variance.apply(d));
  hp.eta_E = bases.embedding.value_or(base_eta) * param.embedding.lr.apply(d);
  hp.eta_W_out = bases.output.value_or(base_eta) * param.output.lr.apply(d);
  hp.eta_hidden = bases.hidden.value_or(base_eta) * param.hidden.lr.apply(d);
  return hp;
}

double lr_ratio(const ResolvedHP& hp) { return hp.eta_E / hp.eta_hidden; }

ParametrizationConfig parse_parametrization_config(std::string_view json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument(std::string("parametrization config: ") + e.what());
  }
  if (!j.is_object() || !j.contains("parametrization"))
    throw std::invalid_argument("parametrization config: missing \"parametrization\"");

  ParametrizationConfig cfg;
  cfg.param = preset(j.at("parametrization").get<std::string>());
  cfg.base_eta = j.value("base_eta", 1.0);
  if (!(cfg.base_eta > 0.0)) throw std::invalid_argument("parametrization config: base_eta must be > 0");

  if (j.contains("overrides")) {
    const auto& o = j.at("overrides");
    if (!o.is_object()) throw std::invalid_argument("parametrization config: overrides must be an object");
    bool touched = false;
    for (const auto& [key, value] : o.items()) {
      RoleRule* rule = nullptr;
      std::optional<double>* base = nullptr;
      std::string rest;
      for (auto [prefix, r, b] : {std::tuple{"embedding_", &cfg.param.embedding, &cfg.bases.embedding},
                                  std::tuple{"output_", &cfg.param.output, &cfg.bases.output},
                                  std::tuple{"hidden_", &cfg.param.hidden, &cfg.bases.hidden}}) {
        const std::string p(prefix);
        if (key.rfind(p, 0) == 0) {
          rule = r;
          base = b;
          rest = key.substr(p.size());
        }
      }
      if (rule == nullptr || !value.is_number())
        throw std::invalid_argument("parametrization config: bad override '" + key + "'");
      const double v = value.get<double>();
      if (rest == "lr_exponent") {
        rule->lr = WidthExponent::from_double(v);
      } else if (rest == "init_var_exponent") {
        rule->init_variance = WidthExponent::from_double(v);
      } else if (rest == "base_eta") {
        *base = v;
      } else {
        throw std::invalid_argument("parametrization config: unknown override '" + key + "'");
      }
      touched = true;
    }
    if (touched) cfg.param.name += "+overrides";
  }
  return cfg;
}

}  // namespace lvlab
