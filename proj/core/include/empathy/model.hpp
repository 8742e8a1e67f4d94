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
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "empathy/modality.hpp"
#include "empathy/optim.hpp"
#include "empathy/tensor.hpp"

namespace empathy {

/// Architecture of one empathy predictor.
struct ModelConfig {
  std::string variant;                 // label only, e.g. "AT"
  std::vector<Modality> modalities;    // kept in canonical order
  std::map<Modality, std::size_t> input_dims = {
      {Modality::audio, 990}, {Modality::text, 300}, {Modality::visual, 4096}};
  std::size_t embed_dim = 128;
  std::size_t hidden_dim = 512;
  std::size_t attention_window = 3;
  std::size_t attention_mlp_hidden = 128;
  std::size_t head_dim = 128;
  bool use_attention = true;
  bool predict_delta = false;
  // Delta prediction is reserved for the text-only model unless this is set.
  bool allow_delta_with_any_modalities = false;
  std::uint64_t seed = 0;

  void validate() const;
  std::size_t input_dim(Modality m) const;
  std::size_t fused_dim() const { return modalities.size() * embed_dim; }
  bool has(Modality m) const;

  bool operator==(const ModelConfig&) const = default;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

/// The seven modality combinations, in the order A, T, V, AT, AV, TV, ATV.
std::span<const std::string_view> variant_names();

/// Builds the configuration of a named variant. Unimodal text and visual
/// models drop the attention layer; the text model regresses valence deltas.
ModelConfig variant_factory(std::string_view name);

struct RecurrentState {
  Tensor hidden;  // [batch x hidden_dim]
  Tensor cell;    // [batch x hidden_dim]
};

struct AttentionContext {
  Tensor weights;  // [batch x available history], rows sum to 1
  Tensor context;  // [batch x hidden_dim]
};

/// A batch of equal-length sequences. Feature rows are time-major:
/// row t * batch + b holds step t of sequence b.
struct SequenceBatch {
  std::size_t steps = 0;
  std::size_t batch = 0;
  std::map<Modality, Tensor> features;
};

/// A window [begin, begin + length) of one feature track set.
struct SequenceView {
  const FeatureMap* features = nullptr;
  std::size_t begin = 0;
  std::size_t length = 0;
};

/// Packs sequences into a SequenceBatch of `steps` rows each. Sequences
/// shorter than `steps` are zero-padded at the end.
SequenceBatch make_batch(std::span<const SequenceView> sequences,
                         std::span<const Modality> modalities,
                         std::size_t steps);

struct PredictionTrace {
  std::string session_id;
  std::vector<double> valence;
};

/// Running sum starting from zero (delta mode) or identity, then optional
/// clipping to the rating range [-1, 1].
std::vector<double> integrate_outputs(std::span<const double> raw,
                                      bool predict_delta, bool clip);

/// Encoders, feature-level fusion, LSTM, local attention and regression head.
class EmpathyModel {
 public:
  explicit EmpathyModel(ModelConfig config);

  const ModelConfig& config() const { return config_; }
  std::vector<NamedParameter>& parameters() { return params_; }
  const std::vector<NamedParameter>& parameters() const { return params_; }
  const Tensor& parameter(std::string_view name) const;
  Tensor& parameter(std::string_view name);
  std::size_t parameter_count() const;

  /// Independent deep copy (parameters do not alias).
  EmpathyModel clone() const;
  /// Overwrites parameter values from another model with the same layout.
  void copy_parameters_from(const EmpathyModel& other);

  /// tanh(features * W + b); features is [rows x input_dim] or [input_dim].
  Tensor encode_modality(const Tensor& features, Modality m) const;
  /// Concatenates one embedding per configured modality, canonical order.
  Tensor fuse(std::span<const Tensor> embeddings) const;

  RecurrentState initial_state(std::size_t batch) const;
  RecurrentState lstm_step(const Tensor& fused, const RecurrentState& prev) const;
  /// Same cell, with the input projection fused * W_x + b precomputed.
  RecurrentState lstm_step_projected(const Tensor& projected,
                                     const RecurrentState& prev) const;
  Tensor project_input(const Tensor& fused) const;

  /// Raw attention scores f(x_t), one per window position: [rows x W].
  Tensor attention_scores(const Tensor& fused) const;
  /// recent_hidden holds h_t, h_{t-1}, ... (newest first), 1 to W entries.
  AttentionContext local_attention(const Tensor& fused,
                                   std::span<const Tensor> recent_hidden) const;
  AttentionContext attend(const Tensor& scores,
                          std::span<const Tensor> recent_hidden) const;

  /// Context at step t of a hidden-state sequence h_0..h_{T-1}; only the
  /// last W states up to and including h_t are visible.
  AttentionContext attend_at(const Tensor& scores, std::span<const Tensor> hidden_sequence,
                             std::size_t t) const;
  /// Head: affine, tanh, affine to one unclamped value per row.
  Tensor predict_step(const Tensor& summary) const;

  /// Raw per-step outputs [steps x batch], differentiable when a tape is active.
  Tensor forward_raw(const SequenceBatch& batch) const;

  /// Inference over whole sequences: integrated (delta mode) and clipped.
  PredictionTrace forward_sequence(const FeatureMap& features) const;
  std::vector<PredictionTrace> forward_sequences(
      std::span<const FeatureMap* const> sequences) const;

 private:
  Tensor& add_parameter(std::string name, Shape shape);

  ModelConfig config_;
  std::vector<NamedParameter> params_;
};

/// Versioned binary checkpoint: magic, JSON header (config + parameter
/// names and shapes), then little-endian float64 parameter data.
std::string serialize_checkpoint(const EmpathyModel& model);
EmpathyModel deserialize_checkpoint(std::string_view bytes);
void save_checkpoint(const EmpathyModel& model, const std::filesystem::path& path);
EmpathyModel load_checkpoint(const std::filesystem::path& path);

}  // namespace empathy
