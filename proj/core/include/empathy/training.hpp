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
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "empathy/data.hpp"
#include "empathy/metrics.hpp"
#include "empathy/model.hpp"
#include "empathy/optim.hpp"

namespace empathy {

enum class EarlyStopMetric { ccc, loss };
enum class LossKind { mse, ccc };

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 8;
  std::size_t segment_length = 60;
  OptimizerOptions optimizer;
  EarlyStopMetric early_stop_metric = EarlyStopMetric::ccc;
  bool early_stopping = true;
  std::size_t patience = 20;
  std::optional<double> grad_clip_norm = 5.0;
  LossKind loss = LossKind::mse;
  std::uint64_t seed = 0;

  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  std::optional<double> validation_ccc;
  std::optional<double> validation_loss;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  bool stopped_early = false;

  std::string to_csv() const;
};

nlohmann::json history_to_json(const TrainHistory& history);

struct TrainResult {
  EmpathyModel model;  // parameters of the best epoch
  TrainHistory history;
};

struct TrainHooks {
  // Called once for every session a run reads (audit trail).
  std::function<void(const Session&)> on_session_access;
  std::function<void(const EpochRecord&)> on_epoch;
};

/// Inference traces for whole sessions, batched.
std::vector<PredictionTrace> predict(const EmpathyModel& model,
                                     std::span<const Session* const> sessions);

/// Per-session CCC / Pearson of the clipped inference traces.
EvalReport evaluate(const EmpathyModel& model, std::span<const Session* const> sessions,
                    std::string label);

/// Training targets for one window: valence itself, or its first differences
/// (first delta measured from 0) when predicting deltas.
std::vector<double> training_targets(std::span<const double> valence, bool predict_delta);

/// Trains a copy of `initial` on segments of the training sessions and
/// returns the parameters of the best validation epoch. Without validation
/// sessions the last epoch is returned.
TrainResult train(const EmpathyModel& initial,
                  std::span<const Session* const> train_sessions,
                  std::span<const Session* const> validation_sessions,
                  const TrainConfig& config, const TrainHooks& hooks = {});

struct FineTuneConfig {
  std::string listener_id;
  std::size_t extra_epochs = 250;
  TrainConfig train;

  void validate() const;
};

/// Continues training from `seed_model` on one listener's training-story
/// sessions, early-stopped on that listener's validation-story sessions.
TrainResult fine_tune(const EmpathyModel& seed_model, std::span<const Session> sessions,
                      const DatasetSplit& split, const FineTuneConfig& config,
                      const TrainHooks& hooks = {});

struct FoldResult {
  std::size_t fold = 0;
  std::string held_out_story;
  double ccc = 0.0;          // mean CCC over the held-out story's sessions
  Aggregate per_session;     // same mean, with spread across sessions
  TrainHistory history;
};

struct CrossValReport {
  std::string label;
  std::vector<FoldResult> folds;
  Aggregate summary;  // mean and population SD across folds

  nlohmann::json to_json() const;
  std::string to_csv() const;
};

struct CrossValOptions {
  std::vector<std::string> stories;  // empty: every story in the corpus
  bool parallel_folds = false;
  bool vary_seed_per_fold = true;    // fold i uses seed + i
};

/// Leave-one-story-out: one independently initialised run per fold.
CrossValReport cross_validate(const ModelConfig& model_config, const TrainConfig& train_config,
                              std::span<const Session> sessions,
                              const CrossValOptions& options = {});

}  // namespace empathy
