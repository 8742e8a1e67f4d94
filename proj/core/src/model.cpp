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

#include "empathy/model.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <random>

#include "binary_io.hpp"
#include "empathy/errors.hpp"
#include "empathy/ops.hpp"

namespace empathy {

namespace {

constexpr std::array<std::string_view, 7> kVariantNames = {
    "A", "T", "V", "AT", "AV", "TV", "ATV"};

constexpr char kCheckpointMagic[8] = {'E', 'M', 'P', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kCheckpointVersion = 1;

std::string enc_name(Modality m, const char* part) {
  return "encoder." + std::string(to_string(m)) + "." + part;
}

}  // namespace

// ---------------------------------------------------------------------------
// ModelConfig

bool ModelConfig::has(Modality m) const {
  return std::find(modalities.begin(), modalities.end(), m) != modalities.end();
}

std::size_t ModelConfig::input_dim(Modality m) const {
  auto it = input_dims.find(m);
  return it == input_dims.end() ? default_input_dim(m) : it->second;
}

void ModelConfig::validate() const {
  if (modalities.empty()) throw ConfigError("model config: no modalities selected");
  for (std::size_t i = 1; i < modalities.size(); ++i) {
    if (static_cast<int>(modalities[i - 1]) >= static_cast<int>(modalities[i])) {
      throw ConfigError("model config: modalities must be distinct and in audio, text, visual order");
    }
  }
  for (auto m : modalities) {
    if (input_dim(m) == 0) {
      throw ConfigError("model config: input dimension of " + std::string(to_string(m)) + " must be positive");
    }
  }
  if (embed_dim == 0 || hidden_dim == 0 || attention_window == 0 ||
      attention_mlp_hidden == 0 || head_dim == 0) {
    throw ConfigError("model config: all dimensions and the attention window must be positive");
  }
  if (predict_delta && !allow_delta_with_any_modalities &&
      !(modalities.size() == 1 && modalities.front() == Modality::text)) {
    throw ConfigError("model config: delta prediction is only enabled for the text-only model "
                      "(set allow_delta_with_any_modalities to override)");
  }
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  nlohmann::json mods = nlohmann::json::array();
  for (auto m : c.modalities) mods.push_back(std::string(to_string(m)));
  nlohmann::json dims = nlohmann::json::object();
  for (const auto& [m, d] : c.input_dims) dims[std::string(to_string(m))] = d;
  j = nlohmann::json{{"variant", c.variant},
                     {"modalities", mods},
                     {"input_dims", dims},
                     {"embed_dim", c.embed_dim},
                     {"hidden_dim", c.hidden_dim},
                     {"attention_window", c.attention_window},
                     {"attention_mlp_hidden", c.attention_mlp_hidden},
                     {"head_dim", c.head_dim},
                     {"use_attention", c.use_attention},
                     {"predict_delta", c.predict_delta},
                     {"allow_delta_with_any_modalities", c.allow_delta_with_any_modalities},
                     {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  ModelConfig out;
  out.variant = j.value("variant", std::string());
  if (j.contains("modalities")) {
    out.modalities.clear();
    for (const auto& m : j.at("modalities")) out.modalities.push_back(parse_modality(m.get<std::string>()));
    std::sort(out.modalities.begin(), out.modalities.end());
  }
  if (j.contains("input_dims")) {
    for (const auto& [name, dim] : j.at("input_dims").items()) {
      out.input_dims[parse_modality(name)] = dim.get<std::size_t>();
    }
  }
  out.embed_dim = j.value("embed_dim", out.embed_dim);
  out.hidden_dim = j.value("hidden_dim", out.hidden_dim);
  out.attention_window = j.value("attention_window", out.attention_window);
  out.attention_mlp_hidden = j.value("attention_mlp_hidden", out.attention_mlp_hidden);
  out.head_dim = j.value("head_dim", out.head_dim);
  out.use_attention = j.value("use_attention", out.use_attention);
  out.predict_delta = j.value("predict_delta", out.predict_delta);
  out.allow_delta_with_any_modalities =
      j.value("allow_delta_with_any_modalities", out.allow_delta_with_any_modalities);
  out.seed = j.value("seed", out.seed);
  c = std::move(out);
}

std::span<const std::string_view> variant_names() { return kVariantNames; }

ModelConfig variant_factory(std::string_view name) {
  std::string upper(name);
  for (auto& ch : upper) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  if (std::find(kVariantNames.begin(), kVariantNames.end(), upper) == kVariantNames.end()) {
    throw ConfigError("unknown variant '" + std::string(name) +
                      "' (expected one of A, T, V, AT, AV, TV, ATV)");
  }
  ModelConfig config;
  config.variant = upper;
  if (upper.find('A') != std::string::npos) config.modalities.push_back(Modality::audio);
  if (upper.find('T') != std::string::npos) config.modalities.push_back(Modality::text);
  if (upper.find('V') != std::string::npos) config.modalities.push_back(Modality::visual);
  config.use_attention = !(upper == "T" || upper == "V");
  config.predict_delta = upper == "T";
  return config;
}

// ---------------------------------------------------------------------------
// Batching and trace helpers

SequenceBatch make_batch(std::span<const SequenceView> sequences,
                         std::span<const Modality> modalities,
                         std::size_t steps) {
  if (sequences.empty() || steps == 0) {
    throw ContractError("make_batch: need at least one sequence and one step");
  }
  SequenceBatch batch;
  batch.steps = steps;
  batch.batch = sequences.size();
  const std::size_t count = sequences.size();
  for (auto m : modalities) {
    std::size_t dim = 0;
    for (const auto& seq : sequences) {
      auto it = seq.features->find(m);
      if (it == seq.features->end()) {
        throw DataError("sequence is missing the " + std::string(to_string(m)) + " modality");
      }
      if (dim != 0 && it->second.cols != dim) {
        throw DataError("inconsistent " + std::string(to_string(m)) + " feature widths in batch");
      }
      dim = it->second.cols;
    }
    std::vector<double> rows(steps * count * dim, 0.0);
    for (std::size_t b = 0; b < count; ++b) {
      const auto& view = sequences[b];
      const Matrix& src = view.features->at(m);
      if (view.begin + view.length > src.rows) {
        throw DataError("sequence window exceeds the " + std::string(to_string(m)) + " track");
      }
      for (std::size_t t = 0; t < steps && t < view.length; ++t) {
        auto r = src.row(view.begin + t);
        std::copy(r.begin(), r.end(), rows.begin() + (t * count + b) * dim);
      }
    }
    batch.features.emplace(m, Tensor::matrix(steps * count, dim, std::move(rows)));
  }
  return batch;
}

std::vector<double> integrate_outputs(std::span<const double> raw,
                                      bool predict_delta, bool clip) {
  std::vector<double> out(raw.begin(), raw.end());
  if (predict_delta) {
    double level = 0.0;
    for (auto& v : out) {
      level += v;
      v = level;
    }
  }
  if (clip) {
    for (auto& v : out) v = std::clamp(v, -1.0, 1.0);
  }
  return out;
}

// ---------------------------------------------------------------------------
// EmpathyModel

EmpathyModel::EmpathyModel(ModelConfig config) : config_(std::move(config)) {
  config_.validate();
  const std::size_t E = config_.embed_dim;
  const std::size_t H = config_.hidden_dim;
  const std::size_t F = config_.fused_dim();

  for (auto m : config_.modalities) {
    add_parameter(enc_name(m, "weight"), {config_.input_dim(m), E});
    add_parameter(enc_name(m, "bias"), {E});
  }
  add_parameter("lstm.input_weight", {F, 4 * H});
  add_parameter("lstm.hidden_weight", {H, 4 * H});
  add_parameter("lstm.bias", {4 * H});
  if (config_.use_attention) {
    add_parameter("attention.hidden_weight", {F, config_.attention_mlp_hidden});
    add_parameter("attention.hidden_bias", {config_.attention_mlp_hidden});
    add_parameter("attention.score_weight", {config_.attention_mlp_hidden, config_.attention_window});
    add_parameter("attention.score_bias", {config_.attention_window});
  }
  add_parameter("head.hidden_weight", {H, config_.head_dim});
  add_parameter("head.hidden_bias", {config_.head_dim});
  add_parameter("head.output_weight", {config_.head_dim, 1});
  add_parameter("head.output_bias", {1});

  // Uniform(+-1/sqrt(fan_in)); the LSTM fan-in covers [x_t; h_{t-1}].
  std::mt19937_64 rng(config_.seed);
  auto fill = [&rng](Tensor& t, double bound) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& v : t.mutable_values()) v = dist(rng);
  };
  for (auto& p : params_) {
    std::size_t fan_in = 0;
    const auto& name = p.name;
    if (name.rfind("lstm.", 0) == 0) {
      fan_in = F + H;
    } else if (name.rfind("encoder.", 0) == 0) {
      fan_in = config_.input_dim(parse_modality(name.substr(8, name.find('.', 8) - 8)));
    } else if (name.rfind("attention.hidden", 0) == 0) {
      fan_in = F;
    } else if (name.rfind("attention.score", 0) == 0) {
      fan_in = config_.attention_mlp_hidden;
    } else if (name.rfind("head.hidden", 0) == 0) {
      fan_in = H;
    } else {
      fan_in = config_.head_dim;
    }
    fill(p.tensor, 1.0 / std::sqrt(static_cast<double>(fan_in)));
  }
  auto bias = parameter("lstm.bias").mutable_values();
  std::fill(bias.begin() + static_cast<std::ptrdiff_t>(H),
            bias.begin() + static_cast<std::ptrdiff_t>(2 * H), 1.0);
}

Tensor& EmpathyModel::add_parameter(std::string name, Shape shape) {
  Tensor t(std::move(shape));
  t.set_requires_grad(true);
  params_.push_back({std::move(name), std::move(t)});
  return params_.back().tensor;
}

const Tensor& EmpathyModel::parameter(std::string_view name) const {
  for (const auto& p : params_) {
    if (p.name == name) return p.tensor;
  }
  throw ContractError("model has no parameter named '" + std::string(name) + "'");
}

Tensor& EmpathyModel::parameter(std::string_view name) {
  return const_cast<Tensor&>(std::as_const(*this).parameter(name));
}

std::size_t EmpathyModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.tensor.size();
  return n;
}

EmpathyModel EmpathyModel::clone() const {
  EmpathyModel copy(config_);
  copy.copy_parameters_from(*this);
  return copy;
}

void EmpathyModel::copy_parameters_from(const EmpathyModel& other) {
  if (other.params_.size() != params_.size()) {
    throw ContractError("copy_parameters_from: parameter layouts differ");
  }
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name != other.params_[i].name ||
        params_[i].tensor.shape() != other.params_[i].tensor.shape()) {
      throw ContractError("copy_parameters_from: mismatch at '" + params_[i].name + "'");
    }
    auto src = other.params_[i].tensor.values();
    std::copy(src.begin(), src.end(), params_[i].tensor.mutable_values().begin());
  }
}

Tensor EmpathyModel::encode_modality(const Tensor& features, Modality m) const {
  if (!config_.has(m)) {
    throw ContractError("encode_modality: " + std::string(to_string(m)) +
                        " is not part of variant " + config_.variant);
  }
  if (features.cols() != config_.input_dim(m)) {
    throw DimensionError("encode_modality: " + std::string(to_string(m)) +
                         " features have width " + std::to_string(features.cols()) +
                         ", expected " + std::to_string(config_.input_dim(m)));
  }
  return ops::tanh(ops::affine(features, parameter(enc_name(m, "weight")),
                               parameter(enc_name(m, "bias"))));
}

Tensor EmpathyModel::fuse(std::span<const Tensor> embeddings) const {
  if (embeddings.size() != config_.modalities.size()) {
    throw ContractError("fuse: expected " + std::to_string(config_.modalities.size()) +
                        " embeddings (one per modality), got " +
                        std::to_string(embeddings.size()));
  }
  return ops::concat(embeddings, embeddings.front().rank() - 1);
}

RecurrentState EmpathyModel::initial_state(std::size_t batch) const {
  return {Tensor({batch, config_.hidden_dim}), Tensor({batch, config_.hidden_dim})};
}

Tensor EmpathyModel::project_input(const Tensor& fused) const {
  return ops::affine(fused, parameter("lstm.input_weight"), parameter("lstm.bias"));
}

RecurrentState EmpathyModel::lstm_step(const Tensor& fused,
                                       const RecurrentState& prev) const {
  if (fused.rank() != 2 || fused.cols() != config_.fused_dim()) {
    throw DimensionError("lstm_step: input " + to_string(fused.shape()) +
                         " does not match fused width " + std::to_string(config_.fused_dim()));
  }
  return lstm_step_projected(project_input(fused), prev);
}

RecurrentState EmpathyModel::lstm_step_projected(const Tensor& projected,
                                                 const RecurrentState& prev) const {
  const std::size_t H = config_.hidden_dim;
  if (prev.hidden.rank() != 2 || prev.hidden.cols() != H ||
      prev.cell.shape() != prev.hidden.shape() ||
      projected.rank() != 2 || projected.cols() != 4 * H ||
      projected.rows() != prev.hidden.rows()) {
    throw DimensionError("lstm_step: state " + to_string(prev.hidden.shape()) +
                         " / " + to_string(prev.cell.shape()) +
                         " incompatible with gate pre-activations " +
                         to_string(projected.shape()));
  }
  // Gate blocks: input, forget, candidate, output.
  Tensor gates = ops::add(projected, ops::matmul(prev.hidden, parameter("lstm.hidden_weight")));
  Tensor input_gate = ops::sigmoid(ops::slice(gates, 1, 0, H));
  Tensor forget_gate = ops::sigmoid(ops::slice(gates, 1, H, 2 * H));
  Tensor candidate = ops::tanh(ops::slice(gates, 1, 2 * H, 3 * H));
  Tensor output_gate = ops::sigmoid(ops::slice(gates, 1, 3 * H, 4 * H));
  Tensor cell = ops::add(ops::mul(forget_gate, prev.cell), ops::mul(input_gate, candidate));
  Tensor hidden = ops::mul(output_gate, ops::tanh(cell));
  return {std::move(hidden), std::move(cell)};
}

Tensor EmpathyModel::attention_scores(const Tensor& fused) const {
  if (!config_.use_attention) {
    throw ContractError("attention_scores: variant " + config_.variant + " has no attention layer");
  }
  Tensor hidden = ops::tanh(ops::affine(fused, parameter("attention.hidden_weight"),
                                        parameter("attention.hidden_bias")));
  return ops::affine(hidden, parameter("attention.score_weight"),
                     parameter("attention.score_bias"));
}

AttentionContext EmpathyModel::local_attention(
    const Tensor& fused, std::span<const Tensor> recent_hidden) const {
  return attend(attention_scores(fused), recent_hidden);
}

AttentionContext EmpathyModel::attend(const Tensor& scores,
                                      std::span<const Tensor> recent_hidden) const {
  const std::size_t window = config_.attention_window;
  if (recent_hidden.empty()) throw ContractError("local_attention: empty hidden-state history");
  if (recent_hidden.size() > window) {
    throw ContractError("local_attention: " + std::to_string(recent_hidden.size()) +
                        " hidden states exceed window " + std::to_string(window));
  }
  if (scores.rank() != 2 || scores.cols() != window) {
    throw DimensionError("local_attention: scores " + to_string(scores.shape()) +
                         " do not match window " + std::to_string(window));
  }
  const std::size_t available = recent_hidden.size();
  // Absent history positions are masked by dropping their scores.
  Tensor visible = available == window ? scores : ops::slice(scores, 1, 0, available);
  Tensor weights = ops::softmax(visible);
  Tensor context;
  for (std::size_t i = 0; i < available; ++i) {
    Tensor term = ops::scale_rows(recent_hidden[i], ops::slice(weights, 1, i, i + 1));
    context = context.defined() ? ops::add(context, term) : term;
  }
  return {std::move(weights), std::move(context)};
}

AttentionContext EmpathyModel::attend_at(const Tensor& scores,
                                         std::span<const Tensor> hidden_sequence,
                                         std::size_t t) const {
  if (t >= hidden_sequence.size()) {
    throw ContractError("local_attention: step " + std::to_string(t) + " beyond " +
                        std::to_string(hidden_sequence.size()) + " hidden states");
  }
  const std::size_t available = std::min(t + 1, config_.attention_window);
  std::vector<Tensor> recent;
  recent.reserve(available);
  for (std::size_t i = 0; i < available; ++i) recent.push_back(hidden_sequence[t - i]);
  return attend(scores, recent);
}

Tensor EmpathyModel::predict_step(const Tensor& summary) const {
  if (summary.cols() != config_.hidden_dim) {
    throw DimensionError("predict_step: input " + to_string(summary.shape()) +
                         " does not match hidden width " + std::to_string(config_.hidden_dim));
  }
  Tensor hidden = ops::tanh(ops::affine(summary, parameter("head.hidden_weight"),
                                        parameter("head.hidden_bias")));
  return ops::affine(hidden, parameter("head.output_weight"), parameter("head.output_bias"));
}

Tensor EmpathyModel::forward_raw(const SequenceBatch& batch) const {
  if (batch.steps == 0 || batch.batch == 0) {
    throw ContractError("forward: sequence must contain at least one step");
  }
  const std::size_t B = batch.batch;
  std::vector<Tensor> embeddings;
  for (auto m : config_.modalities) {
    auto it = batch.features.find(m);
    if (it == batch.features.end()) {
      throw DataError("forward: input lacks the " + std::string(to_string(m)) + " modality");
    }
    if (it->second.rows() != batch.steps * B) {
      throw DimensionError("forward: " + std::string(to_string(m)) + " rows " +
                           std::to_string(it->second.rows()) + " != steps x batch");
    }
    embeddings.push_back(encode_modality(it->second, m));
  }
  // Everything that depends only on x_t is computed for all steps at once.
  Tensor fused = fuse(embeddings);
  Tensor projected = project_input(fused);
  Tensor scores;
  if (config_.use_attention) scores = attention_scores(fused);

  RecurrentState state = initial_state(B);
  std::vector<Tensor> hidden;
  std::vector<Tensor> summaries;
  hidden.reserve(batch.steps);
  summaries.reserve(batch.steps);
  for (std::size_t t = 0; t < batch.steps; ++t) {
    state = lstm_step_projected(ops::slice(projected, 0, t * B, (t + 1) * B), state);
    if (config_.use_attention) {
      hidden.push_back(state.hidden);
      summaries.push_back(
          attend_at(ops::slice(scores, 0, t * B, (t + 1) * B), hidden, t).context);
    } else {
      summaries.push_back(state.hidden);
    }
  }
  Tensor outputs = predict_step(ops::concat(summaries, 0));
  return ops::reshape(outputs, {batch.steps, B});
}

std::vector<PredictionTrace> EmpathyModel::forward_sequences(
    std::span<const FeatureMap* const> sequences) const {
  if (sequences.empty()) return {};
  std::size_t steps = 0;
  std::vector<std::size_t> lengths;
  for (const auto* seq : sequences) {
    std::size_t len = 0;
    for (auto m : config_.modalities) {
      auto it = seq->find(m);
      if (it == seq->end()) {
        throw DataError("forward: input lacks the " + std::string(to_string(m)) + " modality");
      }
      if (len != 0 && it->second.rows != len) {
        throw DataError("forward: modality tracks have different lengths");
      }
      len = it->second.rows;
    }
    if (len == 0) throw ContractError("forward: sequence must contain at least one step");
    lengths.push_back(len);
    steps = std::max(steps, len);
  }
  // The model is causal, so zero padding at the tail leaves earlier steps untouched.
  std::vector<SequenceView> views;
  for (std::size_t b = 0; b < sequences.size(); ++b) views.push_back({sequences[b], 0, lengths[b]});
  SequenceBatch batch = make_batch(views, config_.modalities, steps);
  Tensor raw = forward_raw(batch);
  auto values = raw.values();
  const std::size_t B = sequences.size();
  std::vector<PredictionTrace> traces(B);
  for (std::size_t b = 0; b < B; ++b) {
    std::vector<double> column(lengths[b]);
    for (std::size_t t = 0; t < lengths[b]; ++t) column[t] = values[t * B + b];
    traces[b].valence = integrate_outputs(column, config_.predict_delta, true);
  }
  return traces;
}

PredictionTrace EmpathyModel::forward_sequence(const FeatureMap& features) const {
  const FeatureMap* one[] = {&features};
  return std::move(forward_sequences(one).front());
}

// ---------------------------------------------------------------------------
// Checkpoints

std::string serialize_checkpoint(const EmpathyModel& model) {
  nlohmann::json header;
  header["format"] = "empathy-checkpoint";
  header["version"] = kCheckpointVersion;
  header["config"] = model.config();
  nlohmann::json params = nlohmann::json::array();
  for (const auto& p : model.parameters()) {
    params.push_back({{"name", p.name}, {"shape", p.tensor.shape()}});
  }
  header["parameters"] = params;
  const std::string text = header.dump();

  std::string out(kCheckpointMagic, sizeof(kCheckpointMagic));
  io::append_le<std::uint32_t>(out, kCheckpointVersion);
  io::append_le<std::uint64_t>(out, text.size());
  out += text;
  for (const auto& p : model.parameters()) io::append_doubles(out, p.tensor.values());
  return out;
}

EmpathyModel deserialize_checkpoint(std::string_view bytes) {
  io::Reader reader(bytes, "checkpoint");
  if (reader.take(sizeof(kCheckpointMagic)) !=
      std::string_view(kCheckpointMagic, sizeof(kCheckpointMagic))) {
    throw DataError("checkpoint: bad magic (not an empathy checkpoint)");
  }
  const auto version = reader.read_le<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw DataError("checkpoint: unsupported version " + std::to_string(version));
  }
  const auto header_size = reader.read_le<std::uint64_t>();
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(reader.take(header_size));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint: malformed header: ") + e.what());
  }
  EmpathyModel model(header.at("config").get<ModelConfig>());
  const auto& listed = header.at("parameters");
  if (listed.size() != model.parameters().size()) {
    throw DataError("checkpoint: parameter count does not match its config");
  }
  for (std::size_t i = 0; i < listed.size(); ++i) {
    auto& p = model.parameters()[i];
    if (listed[i].at("name").get<std::string>() != p.name ||
        listed[i].at("shape").get<Shape>() != p.tensor.shape()) {
      throw DataError("checkpoint: parameter " + std::to_string(i) +
                      " does not match the architecture ('" + p.name + "')");
    }
    reader.read_doubles(p.tensor.mutable_values());
  }
  if (reader.remaining() != 0) throw DataError("checkpoint: trailing bytes");
  return model;
}

void save_checkpoint(const EmpathyModel& model, const std::filesystem::path& path) {
  io::write_file(path, serialize_checkpoint(model));
}

EmpathyModel load_checkpoint(const std::filesystem::path& path) {
  return deserialize_checkpoint(io::read_file(path));
}

}  // namespace empathy
