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
#include <map>
#include <vector>

#include <nlohmann/json.hpp>

#include "empathy/data.hpp"

namespace empathy {

struct StoryDynamics {
  double jump_rate = 0.05;    // expected level changes per second
  std::size_t smoothing = 5;  // trailing moving-average width, seconds
};

struct ListenerResponse {
  double gain = 1.0;
  std::size_t lag = 0;  // seconds the listener trails the story
};

/// Corpus with a planted signal. Each story has a latent trajectory whose
/// first component is the valence driver and whose other components are
/// nuisance; audio and text are linear images of the story latent, visual
/// of the listener's own response; all plus Gaussian noise.
struct SyntheticConfig {
  std::size_t n_stories = 8;
  std::size_t n_listeners = 10;
  std::size_t duration_s = 300;
  std::uint64_t seed = 2019;

  std::vector<Modality> modalities = {Modality::audio, Modality::text, Modality::visual};
  std::map<Modality, std::size_t> dims = {
      {Modality::audio, 990}, {Modality::text, 300}, {Modality::visual, 4096}};
  std::size_t latent_dim = 4;
  double level_bound = 0.9;
  double noise_scale = 0.5;

  // Ranges used when `stories` / `listeners` are not given explicitly.
  double jump_rate_min = 0.02;
  double jump_rate_max = 0.08;
  std::size_t smoothing_min = 3;
  std::size_t smoothing_max = 8;
  double gain_min = 0.8;
  double gain_max = 1.0;
  std::size_t lag_max = 2;
  std::vector<StoryDynamics> stories;
  std::vector<ListenerResponse> listeners;

  std::size_t frames_per_second = 25;
  bool with_actor_features = false;

  void validate() const;
};

void to_json(nlohmann::json& j, const SyntheticConfig& s);
void from_json(const nlohmann::json& j, SyntheticConfig& s);

/// Emission matrix [latent_dim x dim] for one modality; shared by all
/// sessions of a corpus generated from the same seed.
Matrix synthetic_emission(const SyntheticConfig& synth, Modality m, bool actor = false);

/// Resolved per-story dynamics and per-listener responses.
std::vector<StoryDynamics> synthetic_story_dynamics(const SyntheticConfig& synth);
std::vector<ListenerResponse> synthetic_listener_responses(const SyntheticConfig& synth);

/// Story latent trajectory [duration x latent_dim].
Matrix synthetic_story_latent(const SyntheticConfig& synth, std::size_t story);

struct SyntheticSession {
  Session session;
  std::vector<Utterance> utterances;
};

/// Sessions ordered story-major (story01 listener01, story01 listener02, ...).
std::vector<SyntheticSession> generate_synthetic_corpus(const SyntheticConfig& synth);
std::vector<Session> generate_synthetic(const SyntheticConfig& synth);

}  // namespace empathy
