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

#include <array>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace empathy {

/// Input channels, declared in canonical fusion order.
enum class Modality { audio = 0, text = 1, visual = 2 };

inline constexpr std::array<Modality, 3> kAllModalities = {
    Modality::audio, Modality::text, Modality::visual};

std::string_view to_string(Modality m);
Modality parse_modality(std::string_view name);

/// Default per-second feature widths of the three extractors.
std::size_t default_input_dim(Modality m);

/// Row-major real matrix used for feature tracks (one row per second).
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  bool operator==(const Matrix&) const = default;
};

using FeatureMap = std::map<Modality, Matrix>;

}  // namespace empathy
