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

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "empathy/tensor.hpp"

namespace empathy {

struct NamedParameter {
  std::string name;
  Tensor tensor;
};

enum class OptimizerKind { sgd, adam };

std::string_view to_string(OptimizerKind kind);
OptimizerKind parse_optimizer(std::string_view name);

struct OptimizerOptions {
  OptimizerKind kind = OptimizerKind::adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Gradient-based parameter update rule plus its per-parameter moment buffers.
/// Gradients are read, never cleared; call zero_grad() separately.
class Optimizer {
 public:
  explicit Optimizer(OptimizerOptions options);

  void step(std::span<NamedParameter> params);

  const OptimizerOptions& options() const { return options_; }
  std::uint64_t step_count() const { return steps_; }

  // Moment buffers, in parameter order; empty for SGD.
  const std::vector<std::vector<double>>& first_moments() const { return first_; }
  const std::vector<std::vector<double>>& second_moments() const { return second_; }

 private:
  OptimizerOptions options_;
  std::uint64_t steps_ = 0;
  std::vector<std::vector<double>> first_;
  std::vector<std::vector<double>> second_;
};

/// Rescales all gradients so their joint L2 norm is at most max_norm.
/// Returns the norm before clipping.
double clip_grad_norm(std::span<NamedParameter> params, double max_norm);

void zero_grad(std::span<NamedParameter> params);

}  // namespace empathy
