// Copyright 2026 The CoLLM Toolkit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "collm/errors.hpp"
#include "collm/network.hpp"
#include "collm/tensor.hpp"

namespace collm {

struct RAdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Step-dependent scalars of one RAdam update.
struct RAdamCoefficients {
  double m_correction;  // 1 - beta1^t
  double v_correction;  // 1 - beta2^t
  double rho_t;
  double rectifier;     // r_t, only meaningful when rectified
  bool rectified;       // rho_t > 4
};

inline RAdamCoefficients radam_coefficients(const RAdamConfig& cfg, std::uint64_t t) {
  const double td = static_cast<double>(t);
  const double b2t = std::pow(cfg.beta2, td);
  RAdamCoefficients c{};
  c.m_correction = 1.0 - std::pow(cfg.beta1, td);
  c.v_correction = 1.0 - b2t;
  const double rho_inf = 2.0 / (1.0 - cfg.beta2) - 1.0;
  c.rho_t = rho_inf - 2.0 * td * b2t / c.v_correction;
  c.rectified = c.rho_t > 4.0;
  if (c.rectified) {
    c.rectifier = std::sqrt(((c.rho_t - 4.0) * (c.rho_t - 2.0) * rho_inf) /
                            ((rho_inf - 4.0) * (rho_inf - 2.0) * c.rho_t));
  }
  return c;
}

/// Rectified Adam. Moment buffers are created lazily on the first step and
/// keyed by parameter position, so the parameter list must keep its order.
template <typename T>
class RAdam {
 public:
  explicit RAdam(RAdamConfig cfg = {}) : cfg_(cfg) {}

  const RAdamConfig& config() const noexcept { return cfg_; }
  std::uint64_t steps() const noexcept { return t_; }
  const std::vector<Tensor<T>>& first_moments() const noexcept { return m_; }
  const std::vector<Tensor<T>>& second_moments() const noexcept { return v_; }

  /// Applies one update using each parameter's accumulated gradient.
  void step(const std::vector<NamedParam<T>>& params) {
    for (const auto& p : params) {
      if (!p.param->grad.all_finite()) {
        throw DataError("non-finite gradient in tensor '" + p.name + "' at optimizer step " +
                        std::to_string(t_ + 1));
      }
    }
    if (m_.empty()) {
      for (const auto& p : params) {
        m_.emplace_back(p.param->value.shape());
        v_.emplace_back(p.param->value.shape());
      }
    } else if (m_.size() != params.size()) {
      throw UsageError("RAdam: parameter list changed between steps");
    }
    ++t_;
    const RAdamCoefficients c = radam_coefficients(cfg_, t_);
    const T b1 = static_cast<T>(cfg_.beta1), b2 = static_cast<T>(cfg_.beta2);
    const T one_minus_b1 = static_cast<T>(1.0 - cfg_.beta1);
    const T one_minus_b2 = static_cast<T>(1.0 - cfg_.beta2);
    const T m_corr = static_cast<T>(c.m_correction);
    const T inv_vc = static_cast<T>(1.0 / c.v_correction);
    const T lr = static_cast<T>(cfg_.lr);
    const T step_scale = static_cast<T>(cfg_.lr * (c.rectified ? c.rectifier : 1.0));
    const T eps = static_cast<T>(cfg_.eps);

    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& value = params[i].param->value.values();
      const auto& grad = params[i].param->grad.values();
      auto& m = m_[i].values();
      auto& v = v_[i].values();
      for (std::size_t k = 0; k < value.size(); ++k) {
        const T g = grad[k];
        m[k] = b1 * m[k] + one_minus_b1 * g;
        v[k] = b2 * v[k] + one_minus_b2 * g * g;
        const T m_hat = m[k] / m_corr;
        if (c.rectified) {
          const T v_hat = std::sqrt(v[k] * inv_vc);
          value[k] -= step_scale * m_hat / (v_hat + eps);
        } else {
          value[k] -= lr * m_hat;
        }
      }
    }
  }

 private:
  RAdamConfig cfg_;
  std::uint64_t t_ = 0;
  std::vector<Tensor<T>> m_, v_;
};

}  // namespace collm
