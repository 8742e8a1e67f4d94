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

#include <random>
#include <span>
#include <string>

#include <Eigen/Dense>

#include "empathy/data.hpp"

namespace empathy::testing {

/// R^2 of ordinary least squares from one modality's features (current step
/// plus `lags` previous steps) to one listener's valence, pooled over all of
/// that listener's sessions.
///
/// Features are first reduced by a fixed Gaussian projection to 2 * rank
/// columns. Noiseless synthetic features have rank `rank`, so the projection
/// keeps their span and the regression stays small and well posed.
inline double recoverability_r2(std::span<const Session> sessions, const std::string& listener,
                                Modality modality, std::size_t lags, std::size_t rank) {
  using Mat = Eigen::MatrixXd;
  const std::size_t k = 2 * rank;
  Mat projection;
  std::vector<Mat> blocks;
  std::vector<Eigen::VectorXd> targets;
  std::size_t rows = 0;
  for (const auto& s : sessions) {
    if (s.listener_id != listener) continue;
    const Matrix& f = s.features.at(modality);
    if (projection.size() == 0) {
      std::mt19937_64 rng(0);
      std::normal_distribution<double> normal(0.0, 1.0);
      projection.resize(static_cast<Eigen::Index>(f.cols), static_cast<Eigen::Index>(k));
      for (Eigen::Index i = 0; i < projection.size(); ++i) projection.data()[i] = normal(rng);
    }
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> view(
        f.data.data(), static_cast<Eigen::Index>(f.rows), static_cast<Eigen::Index>(f.cols));
    const Mat reduced = view * projection;
    const std::size_t usable = f.rows - lags;
    Mat x(static_cast<Eigen::Index>(usable), static_cast<Eigen::Index>(k * (lags + 1) + 1));
    Eigen::VectorXd y(static_cast<Eigen::Index>(usable));
    for (std::size_t t = lags; t < f.rows; ++t) {
      const auto r = static_cast<Eigen::Index>(t - lags);
      for (std::size_t l = 0; l <= lags; ++l) {
        x.block(r, static_cast<Eigen::Index>(l * k), 1, static_cast<Eigen::Index>(k)) =
            reduced.row(static_cast<Eigen::Index>(t - l));
      }
      x(r, x.cols() - 1) = 1.0;
      y(r) = s.valence[t];
    }
    rows += usable;
    blocks.push_back(std::move(x));
    targets.push_back(std::move(y));
  }
  if (blocks.empty()) return 0.0;
  Mat x(static_cast<Eigen::Index>(rows), blocks.front().cols());
  Eigen::VectorXd y(static_cast<Eigen::Index>(rows));
  Eigen::Index at = 0;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    x.middleRows(at, blocks[i].rows()) = blocks[i];
    y.segment(at, targets[i].size()) = targets[i];
    at += blocks[i].rows();
  }
  const Eigen::VectorXd beta = x.colPivHouseholderQr().solve(y);
  const double ss_res = (y - x * beta).squaredNorm();
  const double ss_tot = (y.array() - y.mean()).matrix().squaredNorm();
  return 1.0 - ss_res / ss_tot;
}

}  // namespace empathy::testing
