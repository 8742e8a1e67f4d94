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

#include "empathy/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <future>
#include <numeric>
#include <random>

#include "empathy/errors.hpp"
#include "empathy/ops.hpp"

namespace empathy {

namespace {

std::string_view to_string(EarlyStopMetric m) { return m == EarlyStopMetric::ccc ? "ccc" : "loss"; }
std::string_view to_string(LossKind k) { return k == LossKind::mse ? "mse" : "ccc"; }

std::string number(double v) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.10g", v);
  return buffer;
}

void check_modalities(const ModelConfig& config, const Session& s) {
  for (auto m : config.modalities) {
    auto it = s.features.find(m);
    if (it == s.features.end()) {
      throw DataError("session " + s.session_id + " lacks the " + std::string(to_string(m)) +
                      " modality required by variant " + config.variant);
    }
    if (it->second.cols != config.input_dim(m)) {
      throw DataError("session " + s.session_id + ": " + std::string(to_string(m)) +
                      " features have width " + std::to_string(it->second.cols) +
                      ", model expects " + std::to_string(config.input_dim(m)));
    }
  }
}

struct Validation {
  double ccc = 0.0;
  double loss = 0.0;
};

Validation validate_sessions(const EmpathyModel& model, std::span<const Session* const> sessions) {
  const auto traces = predict(model, sessions);
  Validation v;
  double squared = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < sessions.size(); ++i) {
    const auto& target = sessions[i]->valence;
    v.ccc += ccc(traces[i].valence, target);
    for (std::size_t t = 0; t < target.size(); ++t) {
      const double d = traces[i].valence[t] - target[t];
      squared += d * d;
    }
    count += target.size();
  }
  v.ccc /= static_cast<double>(sessions.size());
  v.loss = squared / static_cast<double>(count);
  return v;
}

[[noreturn]] void rethrow_with_context(const std::string& context) {
  try {
    throw;
  } catch (const NumericalError& e) {
    throw NumericalError(context + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(context + ": " + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(context + ": " + e.what());
  } catch (const DimensionError& e) {
    throw DimensionError(context + ": " + e.what());
  } catch (const ContractError& e) {
    throw ContractError(context + ": " + e.what());
  } catch (const std::exception& e) {
    throw Error(context + ": " + e.what());
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

void TrainConfig::validate() const {
  if (epochs == 0) throw ConfigError("train config: epochs must be positive");
  if (batch_size == 0) throw ConfigError("train config: batch size must be positive");
  if (segment_length == 0) throw ConfigError("train config: segment length must be positive");
  if (!(optimizer.learning_rate > 0.0)) throw ConfigError("train config: learning rate must be positive");
  if (early_stopping && patience >= epochs) {
    throw ConfigError("train config: patience (" + std::to_string(patience) +
                      ") must be smaller than epochs (" + std::to_string(epochs) + ")");
  }
  if (grad_clip_norm && !(*grad_clip_norm > 0.0)) {
    throw ConfigError("train config: gradient clip norm must be positive");
  }
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"epochs", c.epochs},
                     {"batch_size", c.batch_size},
                     {"segment_length_s", c.segment_length},
                     {"optimizer", std::string(to_string(c.optimizer.kind))},
                     {"learning_rate", c.optimizer.learning_rate},
                     {"beta1", c.optimizer.beta1},
                     {"beta2", c.optimizer.beta2},
                     {"epsilon", c.optimizer.epsilon},
                     {"early_stop_metric", std::string(to_string(c.early_stop_metric))},
                     {"early_stopping", c.early_stopping},
                     {"patience", c.patience},
                     {"grad_clip_norm", c.grad_clip_norm ? nlohmann::json(*c.grad_clip_norm) : nlohmann::json(nullptr)},
                     {"loss", std::string(to_string(c.loss))},
                     {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  TrainConfig out;
  out.epochs = j.value("epochs", out.epochs);
  out.batch_size = j.value("batch_size", out.batch_size);
  out.segment_length = j.value("segment_length_s", out.segment_length);
  if (j.contains("optimizer")) out.optimizer.kind = parse_optimizer(j.at("optimizer").get<std::string>());
  out.optimizer.learning_rate = j.value("learning_rate", out.optimizer.learning_rate);
  out.optimizer.beta1 = j.value("beta1", out.optimizer.beta1);
  out.optimizer.beta2 = j.value("beta2", out.optimizer.beta2);
  out.optimizer.epsilon = j.value("epsilon", out.optimizer.epsilon);
  if (j.contains("early_stop_metric")) {
    const auto name = j.at("early_stop_metric").get<std::string>();
    if (name == "ccc") out.early_stop_metric = EarlyStopMetric::ccc;
    else if (name == "loss") out.early_stop_metric = EarlyStopMetric::loss;
    else throw ConfigError("unknown early-stop metric '" + name + "' (expected ccc or loss)");
  }
  out.early_stopping = j.value("early_stopping", out.early_stopping);
  out.patience = j.value("patience", out.patience);
  if (j.contains("grad_clip_norm")) {
    const auto& clip = j.at("grad_clip_norm");
    if (clip.is_null()) out.grad_clip_norm.reset();
    else out.grad_clip_norm = clip.get<double>();
  }
  if (j.contains("loss")) {
    const auto name = j.at("loss").get<std::string>();
    if (name == "mse") out.loss = LossKind::mse;
    else if (name == "ccc") out.loss = LossKind::ccc;
    else throw ConfigError("unknown loss '" + name + "' (expected mse or ccc)");
  }
  out.seed = j.value("seed", out.seed);
  c = std::move(out);
}

void FineTuneConfig::validate() const {
  if (extra_epochs < 1) throw ConfigError("fine-tune config: extra epochs must be at least 1");
  if (listener_id.empty()) throw ConfigError("fine-tune config: listener id is empty");
  TrainConfig effective = train;
  effective.epochs = extra_epochs;
  effective.validate();
}

std::string TrainHistory::to_csv() const {
  std::string out = "epoch,train_loss,validation_ccc,validation_loss,best\n";
  for (const auto& e : epochs) {
    out += std::to_string(e.epoch) + "," + number(e.train_loss) + "," +
           (e.validation_ccc ? number(*e.validation_ccc) : "") + "," +
           (e.validation_loss ? number(*e.validation_loss) : "") + "," +
           (e.epoch == best_epoch ? "1" : "0") + "\n";
  }
  return out;
}

nlohmann::json history_to_json(const TrainHistory& history) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& e : history.epochs) {
    epochs.push_back({{"epoch", e.epoch},
                      {"train_loss", e.train_loss},
                      {"validation_ccc", e.validation_ccc ? nlohmann::json(*e.validation_ccc) : nlohmann::json(nullptr)},
                      {"validation_loss", e.validation_loss ? nlohmann::json(*e.validation_loss) : nlohmann::json(nullptr)}});
  }
  return {{"epochs", epochs}, {"best_epoch", history.best_epoch}, {"stopped_early", history.stopped_early}};
}

// ---------------------------------------------------------------------------
// Inference and evaluation

std::vector<PredictionTrace> predict(const EmpathyModel& model,
                                     std::span<const Session* const> sessions) {
  std::vector<const FeatureMap*> features;
  features.reserve(sessions.size());
  for (const auto* s : sessions) {
    check_modalities(model.config(), *s);
    features.push_back(&s->features);
  }
  // Bound the padded batch so very large corpora do not materialise at once.
  constexpr std::size_t kChunk = 16;
  std::vector<PredictionTrace> traces;
  traces.reserve(sessions.size());
  for (std::size_t start = 0; start < features.size(); start += kChunk) {
    const std::size_t stop = std::min(features.size(), start + kChunk);
    auto chunk = model.forward_sequences(std::span(features).subspan(start, stop - start));
    for (auto& t : chunk) traces.push_back(std::move(t));
  }
  for (std::size_t i = 0; i < sessions.size(); ++i) traces[i].session_id = sessions[i]->session_id;
  return traces;
}

EvalReport evaluate(const EmpathyModel& model, std::span<const Session* const> sessions,
                    std::string label) {
  const auto traces = predict(model, sessions);
  std::vector<SessionScore> scores;
  for (std::size_t i = 0; i < sessions.size(); ++i) {
    const auto& s = *sessions[i];
    scores.push_back({s.session_id, s.story_id, s.listener_id,
                      ccc(traces[i].valence, s.valence), pearson(traces[i].valence, s.valence)});
  }
  return make_report(std::move(label), std::move(scores));
}

std::vector<double> training_targets(std::span<const double> valence, bool predict_delta) {
  std::vector<double> out(valence.begin(), valence.end());
  if (predict_delta) {
    for (std::size_t t = out.size(); t-- > 1;) out[t] = valence[t] - valence[t - 1];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training

TrainResult train(const EmpathyModel& initial,
                  std::span<const Session* const> train_sessions,
                  std::span<const Session* const> validation_sessions,
                  const TrainConfig& config, const TrainHooks& hooks) {
  config.validate();
  if (train_sessions.empty()) throw DataError("train: no training sessions");
  const ModelConfig& model_config = initial.config();

  std::vector<Segment> segments;
  for (const auto* s : train_sessions) {
    if (hooks.on_session_access) hooks.on_session_access(*s);
    check_modalities(model_config, *s);
    for (const auto& seg : segment_session(*s, config.segment_length)) segments.push_back(seg);
  }
  for (const auto* s : validation_sessions) {
    if (hooks.on_session_access) hooks.on_session_access(*s);
    check_modalities(model_config, *s);
  }
  if (segments.empty()) throw DataError("train: sessions are too short to form any segment");

  EmpathyModel model = initial.clone();
  Optimizer optimizer(config.optimizer);
  std::mt19937_64 rng(config.seed);

  TrainResult result{initial.clone(), {}};
  std::optional<double> best_score;
  std::vector<std::size_t> order(segments.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_total = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      const std::size_t B = stop - start;
      std::vector<SequenceView> views;
      std::size_t steps = 0;
      for (std::size_t i = start; i < stop; ++i) {
        const auto& seg = segments[order[i]];
        views.push_back({&seg.session->features, seg.begin, seg.length()});
        steps = std::max(steps, seg.length());
      }
      // Time-major [steps x B] targets, padded positions masked out.
      std::vector<double> target(steps * B, 0.0), mask(steps * B, 0.0);
      for (std::size_t b = 0; b < B; ++b) {
        const auto& seg = segments[order[start + b]];
        const auto values = training_targets(seg.valence(), model_config.predict_delta);
        for (std::size_t t = 0; t < values.size(); ++t) {
          target[t * B + b] = values[t];
          mask[t * B + b] = 1.0;
        }
      }
      SequenceBatch batch = make_batch(views, model_config.modalities, steps);

      double loss_value = 0.0;
      {
        Tape tape;
        Tensor raw = model.forward_raw(batch);
        Tensor target_t = Tensor::matrix(steps, B, std::move(target));
        Tensor mask_t = Tensor::matrix(steps, B, std::move(mask));
        Tensor loss = config.loss == LossKind::mse ? ops::mse_loss(raw, target_t, mask_t)
                                                   : ops::concordance_loss(raw, target_t, mask_t);
        loss_value = loss.item();
        if (!std::isfinite(loss_value)) {
          throw NumericalError("non-finite training loss at epoch " + std::to_string(epoch) +
                               ", batch " + std::to_string(batches + 1));
        }
        tape.backward(loss);
      }
      auto& params = model.parameters();
      if (config.grad_clip_norm) {
        const double norm = clip_grad_norm(params, *config.grad_clip_norm);
        if (!std::isfinite(norm)) {
          throw NumericalError("non-finite gradient norm at epoch " + std::to_string(epoch) +
                               ", batch " + std::to_string(batches + 1));
        }
      }
      optimizer.step(params);
      zero_grad(params);
      loss_total += loss_value;
      ++batches;
    }

    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = loss_total / static_cast<double>(batches);
    bool improved = false;
    if (!validation_sessions.empty()) {
      const auto v = validate_sessions(model, validation_sessions);
      record.validation_ccc = v.ccc;
      record.validation_loss = v.loss;
      const double score = config.early_stop_metric == EarlyStopMetric::ccc ? v.ccc : -v.loss;
      improved = !best_score || score > *best_score;
      if (improved) best_score = score;
    } else {
      improved = true;
    }
    if (improved) {
      result.model.copy_parameters_from(model);
      result.history.best_epoch = epoch;
    }
    result.history.epochs.push_back(record);
    if (hooks.on_epoch) hooks.on_epoch(record);

    if (config.early_stopping && !validation_sessions.empty() &&
        epoch - result.history.best_epoch > config.patience) {
      result.history.stopped_early = epoch < config.epochs;
      break;
    }
  }
  return result;
}

TrainResult fine_tune(const EmpathyModel& seed_model, std::span<const Session> sessions,
                      const DatasetSplit& split, const FineTuneConfig& config,
                      const TrainHooks& hooks) {
  config.validate();
  std::vector<const Session*> train_set, validation_set;
  bool known = false;
  for (const auto& s : sessions) {
    if (s.listener_id != config.listener_id) continue;
    known = true;
    const bool in_train = std::find(split.train.begin(), split.train.end(), s.story_id) != split.train.end();
    const bool in_validation =
        std::find(split.validation.begin(), split.validation.end(), s.story_id) != split.validation.end();
    if (in_train) train_set.push_back(&s);
    if (in_validation) validation_set.push_back(&s);
  }
  if (!known) throw DataError("fine_tune: unknown listener '" + config.listener_id + "'");
  if (train_set.empty()) {
    throw DataError("fine_tune: listener '" + config.listener_id + "' has no training-story sessions");
  }
  TrainConfig effective = config.train;
  effective.epochs = config.extra_epochs;
  return train(seed_model, train_set, validation_set, effective, hooks);
}

// ---------------------------------------------------------------------------
// Cross-validation

nlohmann::json CrossValReport::to_json() const {
  nlohmann::json folds_json = nlohmann::json::array();
  for (const auto& f : folds) {
    folds_json.push_back({{"fold", f.fold},
                          {"held_out_story", f.held_out_story},
                          {"ccc", f.ccc},
                          {"per_session_sd", f.per_session.sd},
                          {"sessions", f.per_session.count},
                          {"best_epoch", f.history.best_epoch}});
  }
  return {{"label", label},
          {"folds", folds_json},
          {"mean", summary.mean},
          {"sd", summary.sd},
          {"summary", format_mean_sd(summary)}};
}

std::string CrossValReport::to_csv() const {
  std::string header = "model";
  std::string row = label;
  for (const auto& f : folds) {
    header += "," + f.held_out_story;
    row += "," + number(f.ccc);
  }
  header += ",mean,sd\n";
  row += "," + number(summary.mean) + "," + number(summary.sd) + "\n";
  return header + row;
}

CrossValReport cross_validate(const ModelConfig& model_config, const TrainConfig& train_config,
                              std::span<const Session> sessions, const CrossValOptions& options) {
  SplitPolicy policy;
  policy.kind = SplitPolicy::Kind::leave_one_story_out;
  policy.stories = options.stories;
  const auto folds = make_splits(sessions, policy);

  auto run_fold = [&](std::size_t index) -> FoldResult {
    try {
      const auto& fold = folds[index];
      const std::uint64_t offset = options.vary_seed_per_fold ? index : 0;
      ModelConfig mc = model_config;
      mc.seed = model_config.seed + offset;
      TrainConfig tc = train_config;
      tc.seed = train_config.seed + offset;
      const auto train_set = select_stories(sessions, fold.train);
      const auto held_out = select_stories(sessions, fold.validation);
      auto trained = train(EmpathyModel(mc), train_set, held_out, tc);
      const auto report = evaluate(trained.model, held_out, fold.validation.front());
      FoldResult r;
      r.fold = index;
      r.held_out_story = fold.validation.front();
      r.ccc = report.overall.mean;
      r.per_session = report.overall;
      r.history = std::move(trained.history);
      return r;
    } catch (...) {
      rethrow_with_context("fold " + std::to_string(index) + " (held-out story " +
                           folds[index].validation.front() + ")");
    }
  };

  CrossValReport report;
  report.label = model_config.variant;
  if (options.parallel_folds) {
    std::vector<std::future<FoldResult>> pending;
    for (std::size_t i = 0; i < folds.size(); ++i) {
      pending.push_back(std::async(std::launch::async, run_fold, i));
    }
    for (auto& p : pending) report.folds.push_back(p.get());
  } else {
    for (std::size_t i = 0; i < folds.size(); ++i) report.folds.push_back(run_fold(i));
  }
  std::vector<double> values;
  for (const auto& f : report.folds) values.push_back(f.ccc);
  report.summary = aggregate(values);
  return report;
}

}  // namespace empathy
