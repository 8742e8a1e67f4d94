/*
 * Copyright 2026 The Empathy-LSTM Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "empathy/optim.hpp"

#include <cmath>

#include "empathy/errors.hpp"

namespace empathy {

std::string_view to_string(OptimizerKind kind) {
  return kind == OptimizerKind::sgd ? "sgd" : "adam";
}

OptimizerKind parse_optimizer(std::string_view name) {
  if (name == "sgd") return OptimizerKind::sgd;
  if (name == "adam") return OptimizerKind::adam;
  throw ConfigError("unknown optimizer '" + std::string(name) + "' (expected sgd or adam)");
}

Optimizer::Optimizer(OptimizerOptions options) : options_(options) {
  if (!(options_.learning_rate > 0.0)) {
    throw ConfigError("learning rate must be positive");
  }
}

void Optimizer::step(std::span<NamedParameter> params) {
  for (const auto& p : params) {
    if (!p.tensor.has_grad()) {
      throw ContractError("optimizer step: parameter '" + p.name + "' has no gradient");
    }
  }
  ++steps_;
  const double lr = options_.learning_rate;

  if (options_.kind == OptimizerKind::sgd) {
    for (auto& p : params) {
      auto w = p.tensor.mutable_values();
      auto g = p.tensor.grad();
      for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * g[i];
    }
    return;
  }

  if (first_.empty()) {
    for (const auto& p : params) {
      first_.emplace_back(p.tensor.size(), 0.0);
      second_.emplace_back(p.tensor.size(), 0.0);
    }
  }
  if (first_.size() != params.size()) {
    throw ContractError("optimizer step: parameter list changed between steps");
  }
  const double b1 = options_.beta1, b2 = options_.beta2;
  const double t = static_cast<double>(steps_);
  const double correction1 = 1.0 - std::pow(b1, t);
  const double correction2 = 1.0 - std::pow(b2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto w = params[k].tensor.mutable_values();
    auto g = params[k].tensor.grad();
    auto& m = first_[k];
    auto& v = second_[k];
    if (m.size() != w.size()) {
      throw ContractError("optimizer step: shape of '" + params[k].name + "' changed");
    }
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      w[i] -= lr * m_hat / (std::sqrt(v_hat) + options_.epsilon);
    }
  }
}

double clip_grad_norm(std::span<NamedParameter> params, double max_norm) {
  double total = 0.0;
  for (const auto& p : params) {
    for (double g : p.tensor.grad()) total += g * g;
  }
  const double norm = std::sqrt(total);
  if (norm > max_norm && norm > 0.0) {
    const double factor = max_norm / norm;
    for (auto& p : params) {
      if (!p.tensor.has_grad()) continue;
      for (auto& g : p.tensor.mutable_grad()) g *= factor;
    }
  }
  return norm;
}

void zero_grad(std::span<NamedParameter> params) {
  for (auto& p : params) p.tensor.zero_grad();
}

}  // namespace empathy
