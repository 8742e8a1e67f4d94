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

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "empathy/modality.hpp"

namespace empathy {

/// One actor-listener video sampled at 1 Hz.
struct Session {
  std::string session_id;
  std::string story_id;
  std::string listener_id;
  std::string actor_id;
  FeatureMap features;                   // modality -> T x dim
  std::vector<double> valence;           // T ratings in [-1, 1]
  std::optional<FeatureMap> actor_features;

  std::size_t steps() const { return valence.size(); }

  /// Throws DataError unless every track has T rows and ratings are in range.
  void validate() const;

  bool operator==(const Session&) const = default;
};

/// Sessions are stored as a binary container unless the path ends in ".csv".
Session load_session(const std::filesystem::path& path);
void save_session(const Session& session, const std::filesystem::path& path);

std::string serialize_session(const Session& session);
Session deserialize_session(std::string_view bytes, std::string_view origin = "session");

std::string session_to_csv(const Session& session);
Session session_from_csv(std::string_view text, std::string_view origin = "session csv");

/// A transcript chunk and its averaged word-embedding features.
struct Utterance {
  std::vector<double> features;
  double start_s = 0.0;
  double end_s = 0.0;

  bool operator==(const Utterance&) const = default;
};

std::vector<Utterance> load_utterances(const std::filesystem::path& path);
void save_utterances(std::span<const Utterance> utterances,
                     const std::filesystem::path& path);
std::vector<Utterance> utterances_from_csv(std::string_view text,
                                           std::string_view origin = "utterance csv");
std::string utterances_to_csv(std::span<const Utterance> utterances);

/// Repeats each utterance's features over every 1-second window it overlaps.
/// A window overlapping several utterances takes the latest-starting one;
/// windows no utterance covers stay zero. Input must be sorted by start.
Matrix broadcast_utterances(std::span<const Utterance> utterances,
                            std::size_t steps, std::size_t dim = 300);

/// Contiguous step range [begin, end) of one session.
struct Segment {
  const Session* session = nullptr;
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t length() const { return end - begin; }
  std::span<const double> valence() const;
  std::span<const double> features(Modality m) const;  // rows begin..end of the track
};

inline constexpr std::size_t kMinimumRemainder = 10;

/// Non-overlapping segments of segment_length steps. A shorter tail is kept
/// when it has at least kMinimumRemainder steps.
std::vector<Segment> segment_session(const Session& session,
                                     std::size_t segment_length = 60);

struct DatasetSplit {
  std::vector<std::string> train;
  std::vector<std::string> validation;
  std::vector<std::string> test;

  bool operator==(const DatasetSplit&) const = default;
};

struct SplitPolicy {
  enum class Kind { fixed, leave_one_story_out };
  Kind kind = Kind::fixed;
  // fixed: first train_stories stories train, next validation_stories
  // validate, the rest test (stories in sorted order).
  std::size_t train_stories = 4;
  std::size_t validation_stories = 1;
  // leave_one_story_out: candidate stories; empty means all.
  std::vector<std::string> stories;
};

/// Sorted distinct story ids.
std::vector<std::string> story_ids(std::span<const Session> sessions);
std::vector<std::string> listener_ids(std::span<const Session> sessions);

/// One split for the fixed policy; one fold per story for leave-one-out
/// (train on the other candidate stories, validate on the held-out one).
std::vector<DatasetSplit> make_splits(std::span<const Session> sessions,
                                      const SplitPolicy& policy);

/// Sessions whose story is in `stories`, in corpus order.
std::vector<const Session*> select_stories(std::span<const Session> sessions,
                                           std::span<const std::string> stories);

}  // namespace empathy
