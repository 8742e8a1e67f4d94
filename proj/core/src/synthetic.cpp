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

#include "empathy/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include <Eigen/Dense>

#include "empathy/errors.hpp"

namespace empathy {

namespace {

enum class Stream : std::uint32_t {
  emission = 1,
  story_dynamics,
  story_latent,
  listener,
  session,
  utterances,
};

std::mt19937_64 stream(const SyntheticConfig& synth, Stream kind, std::uint64_t a = 0,
                       std::uint64_t b = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(synth.seed),
                    static_cast<std::uint32_t>(synth.seed >> 32),
                    static_cast<std::uint32_t>(kind),
                    static_cast<std::uint32_t>(a),
                    static_cast<std::uint32_t>(b)};
  return std::mt19937_64(seq);
}

std::string numbered(const char* prefix, std::size_t index) {
  char buffer[48];
  std::snprintf(buffer, sizeof(buffer), "%s%02zu", prefix, index + 1);
  return buffer;
}

/// Piecewise-constant levels with random jumps, smoothed by a trailing
/// moving average (joystick-like: long plateaus, fast transitions).
std::vector<double> jump_process(std::mt19937_64& rng, std::size_t steps,
                                 const StoryDynamics& dynamics, double bound) {
  std::uniform_real_distribution<double> level(-bound, bound);
  std::bernoulli_distribution jump(std::clamp(dynamics.jump_rate, 0.0, 1.0));
  std::vector<double> raw(steps);
  double current = level(rng);
  for (std::size_t t = 0; t < steps; ++t) {
    if (t > 0 && jump(rng)) current = level(rng);
    raw[t] = current;
  }
  const std::size_t width = std::max<std::size_t>(1, dynamics.smoothing);
  std::vector<double> out(steps);
  double window = 0.0;
  for (std::size_t t = 0; t < steps; ++t) {
    window += raw[t];
    if (t >= width) window -= raw[t - width];
    out[t] = window / static_cast<double>(std::min(t + 1, width));
  }
  return out;
}

/// rows x dim = latent * emission + noise_scale * N(0, 1).
Matrix emit(const Matrix& latent, const Matrix& emission, double noise_scale,
            std::mt19937_64& rng) {
  Matrix out(latent.rows, emission.cols);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::size_t t = 0; t < latent.rows; ++t) {
    auto row = out.row(t);
    for (std::size_t k = 0; k < latent.cols; ++k) {
      const double z = latent(t, k);
      const double* e = emission.data.data() + k * emission.cols;
      for (std::size_t j = 0; j < emission.cols; ++j) row[j] += z * e[j];
    }
    if (noise_scale > 0.0) {
      for (auto& v : row) v += noise_scale * noise(rng);
    }
  }
  return out;
}

}  // namespace

void SyntheticConfig::validate() const {
  if (n_stories == 0 || n_listeners == 0 || duration_s == 0) {
    throw ConfigError("synthetic config: stories, listeners and duration must be positive");
  }
  if (modalities.empty()) throw ConfigError("synthetic config: no modalities");
  if (latent_dim == 0) throw ConfigError("synthetic config: latent dimension is zero (emission rank 0)");
  for (auto m : modalities) {
    auto it = dims.find(m);
    const std::size_t d = it == dims.end() ? 0 : it->second;
    if (d < latent_dim) {
      throw ConfigError("synthetic config: " + std::string(to_string(m)) + " dimension " +
                        std::to_string(d) + " cannot carry a rank-" +
                        std::to_string(latent_dim) + " emission");
    }
  }
  if (!(level_bound > 0.0 && level_bound <= 1.0)) {
    throw ConfigError("synthetic config: level bound must lie in (0, 1]");
  }
  if (noise_scale < 0.0) throw ConfigError("synthetic config: negative noise scale");
  if (jump_rate_min < 0.0 || jump_rate_max < jump_rate_min || jump_rate_max > 1.0) {
    throw ConfigError("synthetic config: jump-rate range must satisfy 0 <= min <= max <= 1");
  }
  if (smoothing_min == 0 || smoothing_max < smoothing_min) {
    throw ConfigError("synthetic config: smoothing range must satisfy 1 <= min <= max");
  }
  if (gain_max < gain_min) throw ConfigError("synthetic config: gain range is empty");
  if (!stories.empty() && stories.size() != n_stories) {
    throw ConfigError("synthetic config: explicit story dynamics must cover every story");
  }
  if (!listeners.empty() && listeners.size() != n_listeners) {
    throw ConfigError("synthetic config: explicit listener responses must cover every listener");
  }
  if (frames_per_second == 0) throw ConfigError("synthetic config: frames per second must be positive");
}

void to_json(nlohmann::json& j, const SyntheticConfig& s) {
  nlohmann::json mods = nlohmann::json::array();
  for (auto m : s.modalities) mods.push_back(std::string(to_string(m)));
  nlohmann::json dims = nlohmann::json::object();
  for (const auto& [m, d] : s.dims) dims[std::string(to_string(m))] = d;
  nlohmann::json stories = nlohmann::json::array();
  for (const auto& d : s.stories) stories.push_back({{"jump_rate", d.jump_rate}, {"smoothing", d.smoothing}});
  nlohmann::json listeners = nlohmann::json::array();
  for (const auto& l : s.listeners) listeners.push_back({{"gain", l.gain}, {"lag", l.lag}});
  j = nlohmann::json{{"n_stories", s.n_stories},
                     {"n_listeners", s.n_listeners},
                     {"duration_s", s.duration_s},
                     {"seed", s.seed},
                     {"modalities", mods},
                     {"dims", dims},
                     {"latent_dim", s.latent_dim},
                     {"level_bound", s.level_bound},
                     {"noise_scale", s.noise_scale},
                     {"jump_rate_min", s.jump_rate_min},
                     {"jump_rate_max", s.jump_rate_max},
                     {"smoothing_min", s.smoothing_min},
                     {"smoothing_max", s.smoothing_max},
                     {"gain_min", s.gain_min},
                     {"gain_max", s.gain_max},
                     {"lag_max", s.lag_max},
                     {"stories", stories},
                     {"listeners", listeners},
                     {"frames_per_second", s.frames_per_second},
                     {"with_actor_features", s.with_actor_features}};
}

void from_json(const nlohmann::json& j, SyntheticConfig& s) {
  SyntheticConfig out;
  out.n_stories = j.value("n_stories", out.n_stories);
  out.n_listeners = j.value("n_listeners", out.n_listeners);
  out.duration_s = j.value("duration_s", out.duration_s);
  out.seed = j.value("seed", out.seed);
  if (j.contains("modalities")) {
    out.modalities.clear();
    for (const auto& m : j.at("modalities")) out.modalities.push_back(parse_modality(m.get<std::string>()));
    std::sort(out.modalities.begin(), out.modalities.end());
  }
  if (j.contains("dims")) {
    for (const auto& [name, d] : j.at("dims").items()) out.dims[parse_modality(name)] = d.get<std::size_t>();
  }
  out.latent_dim = j.value("latent_dim", out.latent_dim);
  out.level_bound = j.value("level_bound", out.level_bound);
  out.noise_scale = j.value("noise_scale", out.noise_scale);
  out.jump_rate_min = j.value("jump_rate_min", out.jump_rate_min);
  out.jump_rate_max = j.value("jump_rate_max", out.jump_rate_max);
  out.smoothing_min = j.value("smoothing_min", out.smoothing_min);
  out.smoothing_max = j.value("smoothing_max", out.smoothing_max);
  out.gain_min = j.value("gain_min", out.gain_min);
  out.gain_max = j.value("gain_max", out.gain_max);
  out.lag_max = j.value("lag_max", out.lag_max);
  if (j.contains("stories")) {
    for (const auto& d : j.at("stories")) {
      out.stories.push_back({d.at("jump_rate").get<double>(), d.at("smoothing").get<std::size_t>()});
    }
  }
  if (j.contains("listeners")) {
    for (const auto& l : j.at("listeners")) {
      out.listeners.push_back({l.at("gain").get<double>(), l.at("lag").get<std::size_t>()});
    }
  }
  out.frames_per_second = j.value("frames_per_second", out.frames_per_second);
  out.with_actor_features = j.value("with_actor_features", out.with_actor_features);
  s = std::move(out);
}

Matrix synthetic_emission(const SyntheticConfig& synth, Modality m, bool actor) {
  const std::size_t dim = synth.dims.at(m);
  auto rng = stream(synth, Stream::emission, static_cast<std::uint64_t>(m), actor ? 1 : 0);
  std::normal_distribution<double> entry(0.0, 1.0 / std::sqrt(static_cast<double>(synth.latent_dim)));
  Matrix e(synth.latent_dim, dim);
  for (auto& v : e.data) v = entry(rng);

  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> view(
      e.data.data(), static_cast<Eigen::Index>(e.rows), static_cast<Eigen::Index>(e.cols));
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(view.transpose());
  if (static_cast<std::size_t>(qr.rank()) != synth.latent_dim) {
    throw ConfigError("synthetic config: degenerate " + std::string(to_string(m)) +
                      " emission (rank " + std::to_string(qr.rank()) + " < " +
                      std::to_string(synth.latent_dim) + ")");
  }
  return e;
}

std::vector<StoryDynamics> synthetic_story_dynamics(const SyntheticConfig& synth) {
  if (!synth.stories.empty()) return synth.stories;
  std::vector<StoryDynamics> out;
  for (std::size_t s = 0; s < synth.n_stories; ++s) {
    auto rng = stream(synth, Stream::story_dynamics, s);
    std::uniform_real_distribution<double> rate(synth.jump_rate_min, synth.jump_rate_max);
    std::uniform_int_distribution<std::size_t> width(synth.smoothing_min, synth.smoothing_max);
    const double r = rate(rng);
    out.push_back({r, width(rng)});
  }
  return out;
}

std::vector<ListenerResponse> synthetic_listener_responses(const SyntheticConfig& synth) {
  if (!synth.listeners.empty()) return synth.listeners;
  std::vector<ListenerResponse> out;
  for (std::size_t l = 0; l < synth.n_listeners; ++l) {
    auto rng = stream(synth, Stream::listener, l);
    std::uniform_real_distribution<double> gain(synth.gain_min, synth.gain_max);
    std::uniform_int_distribution<std::size_t> lag(0, synth.lag_max);
    const double g = gain(rng);
    out.push_back({g, lag(rng)});
  }
  return out;
}

Matrix synthetic_story_latent(const SyntheticConfig& synth, std::size_t story) {
  const auto dynamics = synthetic_story_dynamics(synth).at(story);
  auto rng = stream(synth, Stream::story_latent, story);
  Matrix latent(synth.duration_s, synth.latent_dim);
  for (std::size_t k = 0; k < synth.latent_dim; ++k) {
    const auto track = jump_process(rng, synth.duration_s, dynamics, synth.level_bound);
    for (std::size_t t = 0; t < synth.duration_s; ++t) latent(t, k) = track[t];
  }
  return latent;
}

std::vector<SyntheticSession> generate_synthetic_corpus(const SyntheticConfig& synth) {
  synth.validate();
  const std::size_t T = synth.duration_s;
  const std::size_t L = synth.latent_dim;
  const double sigma = synth.noise_scale;
  const auto listeners = synthetic_listener_responses(synth);
  const auto dynamics = synthetic_story_dynamics(synth);

  std::map<Modality, Matrix> emissions;
  for (auto m : synth.modalities) emissions.emplace(m, synthetic_emission(synth, m));
  Matrix actor_emission;
  const bool actor_track = synth.with_actor_features && synth.dims.count(Modality::visual);
  if (actor_track) actor_emission = synthetic_emission(synth, Modality::visual, true);

  std::vector<SyntheticSession> corpus;
  corpus.reserve(synth.n_stories * synth.n_listeners);
  for (std::size_t story = 0; story < synth.n_stories; ++story) {
    const Matrix latent = synthetic_story_latent(synth, story);
    for (std::size_t listener = 0; listener < synth.n_listeners; ++listener) {
      auto rng = stream(synth, Stream::session, story, listener);
      std::normal_distribution<double> normal(0.0, 1.0);
      SyntheticSession out;
      Session& s = out.session;
      s.story_id = numbered("story", story);
      s.listener_id = numbered("listener", listener);
      s.actor_id = numbered("actor", story / 2);
      s.session_id = s.story_id + "_" + s.listener_id;

      const auto& response = listeners[listener];
      s.valence.resize(T);
      for (std::size_t t = 0; t < T; ++t) {
        const std::size_t source = t >= response.lag ? t - response.lag : 0;
        s.valence[t] = std::clamp(response.gain * latent(source, 0), -1.0, 1.0);
      }

      for (auto m : synth.modalities) {
        const Matrix& emission = emissions.at(m);
        if (m == Modality::audio) {
          s.features.emplace(m, emit(latent, emission, sigma, rng));
        } else if (m == Modality::text) {
          // Utterances of 2-8 s with small gaps or overlaps; each carries the
          // emission of the latent averaged over its span.
          auto urng = stream(synth, Stream::utterances, story, listener);
          std::uniform_real_distribution<double> first(0.0, 2.0);
          std::uniform_real_distribution<double> span(2.0, 8.0);
          std::uniform_real_distribution<double> step(-0.5, 1.0);
          double start = first(urng);
          while (start < static_cast<double>(T)) {
            const double end = start + span(urng);
            const std::size_t lo = static_cast<std::size_t>(std::floor(start));
            const std::size_t hi = std::min<std::size_t>(T, static_cast<std::size_t>(std::ceil(end)));
            Matrix mean(1, L);
            for (std::size_t t = lo; t < hi; ++t) {
              for (std::size_t k = 0; k < L; ++k) mean(0, k) += latent(t, k);
            }
            for (auto& v : mean.data) v /= static_cast<double>(hi - lo);
            Matrix feature = emit(mean, emission, sigma, urng);
            out.utterances.push_back({std::move(feature.data), start, end});
            start = std::max(start + 0.5, end + step(urng));
          }
          s.features.emplace(m, broadcast_utterances(out.utterances, T, emission.cols));
        } else {
          // Listener face: frame-level latent (response plus nuisance) averaged
          // over each second. The per-dimension noise of a 25-frame mean is
          // drawn directly with its exact distribution, sigma / sqrt(frames).
          StoryDynamics nuisance_dynamics = dynamics[story];
          Matrix face(T, L);
          for (std::size_t k = 1; k < L; ++k) {
            const auto track = jump_process(rng, T, nuisance_dynamics, synth.level_bound);
            for (std::size_t t = 0; t < T; ++t) face(t, k) = track[t];
          }
          const double frames = static_cast<double>(synth.frames_per_second);
          for (std::size_t t = 0; t < T; ++t) {
            face(t, 0) = s.valence[t];
            for (std::size_t k = 0; k < L; ++k) {
              double jitter = 0.0;
              for (std::size_t f = 0; f < synth.frames_per_second; ++f) jitter += sigma * normal(rng);
              face(t, k) += jitter / frames;
            }
          }
          s.features.emplace(m, emit(face, emission, sigma / std::sqrt(frames), rng));
        }
      }
      if (actor_track) {
        s.actor_features.emplace();
        s.actor_features->emplace(Modality::visual, emit(latent, actor_emission, sigma, rng));
      }
      corpus.push_back(std::move(out));
    }
  }
  return corpus;
}

std::vector<Session> generate_synthetic(const SyntheticConfig& synth) {
  auto corpus = generate_synthetic_corpus(synth);
  std::vector<Session> out;
  out.reserve(corpus.size());
  for (auto& c : corpus) out.push_back(std::move(c.session));
  return out;
}

}  // namespace empathy
