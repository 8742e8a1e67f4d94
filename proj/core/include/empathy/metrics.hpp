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

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace empathy {

/// Moments use 1/n (population) normalisation. Switching to 1/(n-1) only
/// requires changing this offset.
inline constexpr double kMomentDegreesOfFreedom = 0.0;

/// Lin's concordance correlation coefficient,
///   2 cov(x, y) / (var(x) + var(y) + (mean(x) - mean(y))^2).
/// One constant input gives 0; two identical constants give 1.
double ccc(std::span<const double> pred, std::span<const double> target);

/// Pearson correlation; std::nullopt when either input is constant.
std::optional<double> pearson(std::span<const double> pred,
                              std::span<const double> target);

struct Aggregate {
  double mean = 0.0;
  double sd = 0.0;  // population standard deviation
  std::size_t count = 0;
};

Aggregate aggregate(std::span<const double> values);

/// "0.29 +- 0.12" style rendering with the given number of decimals.
std::string format_mean_sd(const Aggregate& a, int decimals = 2);

struct SessionScore {
  std::string session_id;
  std::string story_id;
  std::string listener_id;
  double ccc = 0.0;
  std::optional<double> pearson;
};

struct EvalReport {
  std::string label;
  std::vector<SessionScore> sessions;
  std::map<std::string, Aggregate> per_story;
  Aggregate overall;
};

/// Fills per-story and overall aggregates from the per-session scores.
EvalReport make_report(std::string label, std::vector<SessionScore> sessions);

nlohmann::json report_to_json(const EvalReport& report);
/// One row per session followed by per-story and overall aggregate rows.
std::string report_to_csv(const EvalReport& report);

}  // namespace empathy
