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

#ifndef LVLAB_PARAMETRIZATION_HPP
#define LVLAB_PARAMETRIZATION_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace lvlab {

/// A width exponent stored in halves, so d^e is a product of an integer
/// power of d and at most one sqrt(d).
class WidthExponent {
 public:
  static constexpr int kDenominator = 2;

  constexpr WidthExponent() = default;
  static constexpr WidthExponent halves(int numerator) {
    WidthExponent e;
    e.halves_ = numerator;
    return e;
  }
  /// Throws std::invalid_argument unless `value` is a multiple of 1/2.
  static WidthExponent from_double(double value);

  constexpr int numerator() const { return halves_; }
  constexpr double value() const { return static_cast<double>(halves_) / kDenominator; }
  /// d raised to this exponent.
  double apply(std::int64_t d) const;

  friend constexpr bool operator==(WidthExponent, WidthExponent) = default;

 private:
  int halves_ = 0;
};

/// Init variance = d^{init_variance}, learning rate = base * d^{lr}.
struct RoleRule {
  WidthExponent init_variance;
  WidthExponent lr;
  friend bool operator==(const RoleRule&, const RoleRule&) = default;
};

struct Parametrization {
  std::string name;
  RoleRule embedding;
  RoleRule output;
  RoleRule hidden;
};

enum class Preset { kSP, kMUP, kLVP, kMUPText };

/// SP, MUP (output init variance d^-2), LVP, and MUP_TEXT (MUP with output
/// init variance d^-1).
Parametrization preset(Preset which);
/// Accepts "SP", "MUP", "LVP", "MUP_TEXT" (case-insensitive).
Parametrization preset(std::string_view name);

struct ResolvedHP {
  std::int64_t d = 0;
  double base_eta = 0.0;
  double sigma_E = 0.0;
  double sigma_W_out = 0.0;
  double sigma_hidden = 0.0;
  double eta_E = 0.0;
  double eta_W_out = 0.0;
  double eta_hidden = 0.0;
};

/// Optional per-role base constants replacing the shared base_eta.
struct RoleBases {
  std::optional<double> embedding;
  std::optional<double> output;
  std::optional<double> hidden;
};

ResolvedHP resolve(const Parametrization& param, std::int64_t d, double base_eta, const RoleBases& bases = {});

/// eta_E / eta_hidden.
double lr_ratio(const ResolvedHP& hp);

/// Parsed form of {"parametrization": "LVP", "base_eta": 0.2, "overrides": {...}}.
///
/// Recognized override keys: {embedding,output,hidden}_{lr,init_var}_exponent
/// and {embedding,output,hidden}_base_eta.
struct ParametrizationConfig {
  Parametrization param;
  double base_eta = 0.0;
  RoleBases bases;

  ResolvedHP resolve(std::int64_t d) const { return lvlab::resolve(param, d, base_eta, bases); }
};

ParametrizationConfig parse_parametrization_config(std::string_view json_text);

}  // namespace lvlab

#endif  // LVLAB_PARAMETRIZATION_HPP
