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

#include "empathy/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <set>

#include <nlohmann/json.hpp>

#include "binary_io.hpp"
#include "empathy/errors.hpp"

namespace empathy {

namespace {

constexpr char kSessionMagic[8] = {'E', 'M', 'P', 'S', 'E', 'S', 'S', '\0'};
constexpr std::uint32_t kSessionVersion = 1;
constexpr std::string_view kActorPrefix = "actor.";

void append_number(std::string& out, double v) {
  char buffer[32];
  auto [end, ec] = std::to_chars(buffer, buffer + sizeof(buffer), v);
  out.append(buffer, end);
}

double parse_number(std::string_view field, std::string_view origin,
                    std::size_t line, std::size_t column) {
  double v = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  while (first < last && (*first == ' ' || *first == '\t')) ++first;
  while (last > first && (last[-1] == ' ' || last[-1] == '\t' || last[-1] == '\r')) --last;
  if (first < last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || first == last) {
    throw DataError(std::string(origin) + ":" + std::to_string(line) +
                    ": field " + std::to_string(column) + " is not a number: '" +
                    std::string(field) + "'");
  }
  return v;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    auto nl = text.find('\n', start);
    auto line = text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }
  return lines;
}

void check_track(const Matrix& m, std::size_t steps, const std::string& name,
                 const std::string& id) {
  if (m.rows != steps) {
    throw DataError("session " + id + ": " + name + " track has " +
                    std::to_string(m.rows) + " steps, valence has " +
                    std::to_string(steps));
  }
  if (m.cols == 0 || m.data.size() != m.rows * m.cols) {
    throw DataError("session " + id + ": " + name + " track is malformed");
  }
  for (std::size_t i = 0; i < m.data.size(); ++i) {
    if (!std::isfinite(m.data[i])) {
      throw DataError("session " + id + ": non-finite " + name + " feature at step " +
                      std::to_string(i / m.cols));
    }
  }
}

nlohmann::json track_list(const FeatureMap& tracks) {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& [m, mat] : tracks) {
    list.push_back({{"name", std::string(to_string(m))}, {"dim", mat.cols}});
  }
  return list;
}

}  // namespace

// ---------------------------------------------------------------------------
// Session

void Session::validate() const {
  const std::size_t T = valence.size();
  if (T == 0) throw DataError("session " + session_id + ": no steps");
  for (std::size_t t = 0; t < T; ++t) {
    if (!std::isfinite(valence[t]) || valence[t] < -1.0 || valence[t] > 1.0) {
      throw DataError("session " + session_id + ": valence " + std::to_string(valence[t]) +
                      " at step " + std::to_string(t) + " is outside [-1, 1]");
    }
  }
  for (const auto& [m, mat] : features) check_track(mat, T, std::string(to_string(m)), session_id);
  if (actor_features) {
    for (const auto& [m, mat] : *actor_features) {
      check_track(mat, T, "actor " + std::string(to_string(m)), session_id);
    }
  }
}

std::string serialize_session(const Session& s) {
  s.validate();
  nlohmann::json header{{"session_id", s.session_id},
                        {"story_id", s.story_id},
                        {"listener_id", s.listener_id},
                        {"actor_id", s.actor_id},
                        {"T", s.steps()},
                        {"modalities", track_list(s.features)}};
  if (s.actor_features) header["actor_modalities"] = track_list(*s.actor_features);
  const std::string text = header.dump();
  std::string out(kSessionMagic, sizeof(kSessionMagic));
  io::append_le<std::uint32_t>(out, kSessionVersion);
  io::append_le<std::uint64_t>(out, text.size());
  out += text;
  for (const auto& [m, mat] : s.features) io::append_doubles(out, mat.data);
  io::append_doubles(out, s.valence);
  if (s.actor_features) {
    for (const auto& [m, mat] : *s.actor_features) io::append_doubles(out, mat.data);
  }
  return out;
}

Session deserialize_session(std::string_view bytes, std::string_view origin) {
  const std::string where(origin);
  io::Reader reader(bytes, where);
  if (reader.take(sizeof(kSessionMagic)) != std::string_view(kSessionMagic, sizeof(kSessionMagic))) {
    throw DataError(where + ": not a session container (bad magic)");
  }
  const auto version = reader.read_le<std::uint32_t>();
  if (version != kSessionVersion) {
    throw DataError(where + ": unsupported session format version " + std::to_string(version));
  }
  const auto header_size = reader.read_le<std::uint64_t>();
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(reader.take(header_size));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(where + ": malformed header: " + e.what());
  }
  Session s;
  try {
    s.session_id = header.at("session_id").get<std::string>();
    s.story_id = header.at("story_id").get<std::string>();
    s.listener_id = header.at("listener_id").get<std::string>();
    s.actor_id = header.at("actor_id").get<std::string>();
    const auto T = header.at("T").get<std::size_t>();
    auto read_tracks = [&](const nlohmann::json& list) {
      FeatureMap tracks;
      for (const auto& entry : list) {
        const auto m = parse_modality(entry.at("name").get<std::string>());
        Matrix mat(T, entry.at("dim").get<std::size_t>());
        if (!tracks.emplace(m, std::move(mat)).second) {
          throw DataError(where + ": duplicate modality " + std::string(to_string(m)));
        }
      }
      return tracks;
    };
    s.features = read_tracks(header.at("modalities"));
    // Matrices follow the header in listed order; the map is ordered the same
    // way only if the header is canonical, so read by header order.
    std::vector<Modality> order;
    for (const auto& entry : header.at("modalities")) order.push_back(parse_modality(entry.at("name").get<std::string>()));
    for (auto m : order) reader.read_doubles(s.features.at(m).data);
    s.valence.resize(T);
    reader.read_doubles(s.valence);
    if (header.contains("actor_modalities")) {
      s.actor_features = read_tracks(header.at("actor_modalities"));
      for (const auto& entry : header.at("actor_modalities")) {
        reader.read_doubles(s.actor_features->at(parse_modality(entry.at("name").get<std::string>())).data);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(where + ": header field error: " + e.what());
  }
  if (reader.remaining() != 0) {
    throw DataError(where + ": " + std::to_string(reader.remaining()) + " trailing bytes");
  }
  s.validate();
  return s;
}

std::string session_to_csv(const Session& s) {
  s.validate();
  std::string out;
  out += "# session_id=" + s.session_id + "\n";
  out += "# story_id=" + s.story_id + "\n";
  out += "# listener_id=" + s.listener_id + "\n";
  out += "# actor_id=" + s.actor_id + "\n";
  out += "step,valence";
  auto header_cols = [&out](const FeatureMap& tracks, std::string_view prefix) {
    for (const auto& [m, mat] : tracks) {
      for (std::size_t c = 0; c < mat.cols; ++c) {
        out += ",";
        out += prefix;
        out += to_string(m);
        out += ":" + std::to_string(c);
      }
    }
  };
  header_cols(s.features, "");
  if (s.actor_features) header_cols(*s.actor_features, kActorPrefix);
  out += "\n";
  for (std::size_t t = 0; t < s.steps(); ++t) {
    out += std::to_string(t);
    out += ",";
    append_number(out, s.valence[t]);
    auto row_values = [&](const FeatureMap& tracks) {
      for (const auto& [m, mat] : tracks) {
        for (double v : mat.row(t)) {
          out += ",";
          append_number(out, v);
        }
      }
    };
    row_values(s.features);
    if (s.actor_features) row_values(*s.actor_features);
    out += "\n";
  }
  return out;
}

Session session_from_csv(std::string_view text, std::string_view origin) {
  const std::string where(origin);
  const auto lines = split_lines(text);
  Session s;
  std::size_t index = 0;
  for (; index < lines.size() && !lines[index].empty() && lines[index].front() == '#'; ++index) {
    auto body = lines[index].substr(1);
    while (!body.empty() && body.front() == ' ') body.remove_prefix(1);
    auto eq = body.find('=');
    if (eq == std::string_view::npos) continue;
    const auto key = body.substr(0, eq);
    const std::string value(body.substr(eq + 1));
    if (key == "session_id") s.session_id = value;
    else if (key == "story_id") s.story_id = value;
    else if (key == "listener_id") s.listener_id = value;
    else if (key == "actor_id") s.actor_id = value;
  }
  if (index >= lines.size()) throw DataError(where + ": missing column header");
  const std::size_t header_line = index + 1;
  const auto columns = split_fields(lines[index]);
  if (columns.size() < 2 || columns[0] != "step" || columns[1] != "valence") {
    throw DataError(where + ":" + std::to_string(header_line) +
                    ": header must start with 'step,valence'");
  }

  // Column groups: (actor?, modality, first column, width).
  struct Group {
    bool actor;
    Modality modality;
    std::size_t first;
    std::size_t width;
  };
  std::vector<Group> groups;
  for (std::size_t c = 2; c < columns.size(); ++c) {
    auto name = columns[c];
    const bool actor = name.starts_with(kActorPrefix);
    if (actor) name.remove_prefix(kActorPrefix.size());
    const auto colon = name.find(':');
    if (colon == std::string_view::npos) {
      throw DataError(where + ":" + std::to_string(header_line) + ": column " +
                      std::to_string(c + 1) + " '" + std::string(columns[c]) +
                      "' is not of the form modality:index");
    }
    const auto m = parse_modality(name.substr(0, colon));
    if (!groups.empty() && groups.back().actor == actor && groups.back().modality == m) {
      ++groups.back().width;
    } else {
      for (const auto& g : groups) {
        if (g.actor == actor && g.modality == m) {
          throw DataError(where + ":" + std::to_string(header_line) +
                          ": columns of " + std::string(to_string(m)) + " are not contiguous");
        }
      }
      groups.push_back({actor, m, c, 1});
    }
  }

  std::vector<std::vector<double>> rows;
  for (++index; index < lines.size(); ++index) {
    if (lines[index].empty()) continue;
    const auto fields = split_fields(lines[index]);
    if (fields.size() != columns.size()) {
      throw DataError(where + ":" + std::to_string(index + 1) + ": expected " +
                      std::to_string(columns.size()) + " fields, found " +
                      std::to_string(fields.size()));
    }
    std::vector<double> row(fields.size());
    for (std::size_t c = 0; c < fields.size(); ++c) {
      row[c] = parse_number(fields[c], where, index + 1, c + 1);
    }
    if (row[0] != static_cast<double>(rows.size())) {
      throw DataError(where + ":" + std::to_string(index + 1) + ": step " +
                      std::string(fields[0]) + " out of sequence");
    }
    rows.push_back(std::move(row));
  }
  const std::size_t T = rows.size();
  s.valence.resize(T);
  for (std::size_t t = 0; t < T; ++t) s.valence[t] = rows[t][1];
  for (const auto& g : groups) {
    Matrix mat(T, g.width);
    for (std::size_t t = 0; t < T; ++t) {
      std::copy_n(rows[t].begin() + static_cast<std::ptrdiff_t>(g.first), g.width, mat.row(t).begin());
    }
    if (g.actor) {
      if (!s.actor_features) s.actor_features.emplace();
      s.actor_features->emplace(g.modality, std::move(mat));
    } else {
      s.features.emplace(g.modality, std::move(mat));
    }
  }
  s.validate();
  return s;
}

Session load_session(const std::filesystem::path& path) {
  const std::string bytes = io::read_file(path);
  if (path.extension() == ".csv") return session_from_csv(bytes, path.string());
  return deserialize_session(bytes, path.string());
}

void save_session(const Session& session, const std::filesystem::path& path) {
  if (path.extension() == ".csv") {
    io::write_file(path, session_to_csv(session));
  } else {
    io::write_file(path, serialize_session(session));
  }
}

// ---------------------------------------------------------------------------
// Utterances

std::vector<Utterance> utterances_from_csv(std::string_view text, std::string_view origin) {
  const std::string where(origin);
  std::vector<Utterance> out;
  const auto lines = split_lines(text);
  std::size_t dim = 0;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto line = lines[i];
    if (line.empty() || line.front() == '#') continue;
    const auto fields = split_fields(line);
    if (out.empty() && i == 0 && !fields.empty() && fields[0] == "start_s") continue;
    if (fields.size() < 3) {
      throw DataError(where + ":" + std::to_string(i + 1) +
                      ": need start_s, end_s and at least one feature");
    }
    Utterance u;
    u.start_s = parse_number(fields[0], where, i + 1, 1);
    u.end_s = parse_number(fields[1], where, i + 1, 2);
    if (!(u.start_s >= 0.0) || !(u.start_s < u.end_s)) {
      throw DataError(where + ":" + std::to_string(i + 1) +
                      ": utterance times must satisfy 0 <= start < end");
    }
    for (std::size_t c = 2; c < fields.size(); ++c) {
      u.features.push_back(parse_number(fields[c], where, i + 1, c + 1));
    }
    if (dim != 0 && u.features.size() != dim) {
      throw DataError(where + ":" + std::to_string(i + 1) + ": expected " +
                      std::to_string(dim) + " features, found " +
                      std::to_string(u.features.size()));
    }
    dim = u.features.size();
    out.push_back(std::move(u));
  }
  return out;
}

std::string utterances_to_csv(std::span<const Utterance> utterances) {
  std::string out = "start_s,end_s";
  const std::size_t dim = utterances.empty() ? 0 : utterances.front().features.size();
  for (std::size_t c = 0; c < dim; ++c) out += ",f" + std::to_string(c);
  out += "\n";
  for (const auto& u : utterances) {
    append_number(out, u.start_s);
    out += ",";
    append_number(out, u.end_s);
    for (double v : u.features) {
      out += ",";
      append_number(out, v);
    }
    out += "\n";
  }
  return out;
}

std::vector<Utterance> load_utterances(const std::filesystem::path& path) {
  return utterances_from_csv(io::read_file(path), path.string());
}

void save_utterances(std::span<const Utterance> utterances, const std::filesystem::path& path) {
  io::write_file(path, utterances_to_csv(utterances));
}

Matrix broadcast_utterances(std::span<const Utterance> utterances,
                            std::size_t steps, std::size_t dim) {
  if (steps == 0) throw ContractError("broadcast_utterances: need at least one window");
  for (std::size_t i = 0; i < utterances.size(); ++i) {
    if (utterances[i].features.size() != dim) {
      throw DimensionError("broadcast_utterances: utterance " + std::to_string(i) +
                           " has " + std::to_string(utterances[i].features.size()) +
                           " features, expected " + std::to_string(dim));
    }
    if (i > 0 && utterances[i].start_s < utterances[i - 1].start_s) {
      throw DataError("broadcast_utterances: utterances are not sorted by start time (index " +
                      std::to_string(i) + ")");
    }
  }
  Matrix out(steps, dim);
  // Sorted by start, so later writes are the more recent utterances.
  for (const auto& u : utterances) {
    // Window [t, t + 1) overlaps [start, end) iff start < t + 1 and end > t.
    const double first = std::max(0.0, std::floor(u.start_s));
    const double last = std::ceil(u.end_s) - 1.0;
    for (double t = first; t <= last && t < static_cast<double>(steps); t += 1.0) {
      auto row = out.row(static_cast<std::size_t>(t));
      std::copy(u.features.begin(), u.features.end(), row.begin());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Segments and splits

std::span<const double> Segment::valence() const {
  return std::span<const double>(session->valence).subspan(begin, length());
}

std::span<const double> Segment::features(Modality m) const {
  const Matrix& mat = session->features.at(m);
  return std::span<const double>(mat.data).subspan(begin * mat.cols, length() * mat.cols);
}

std::vector<Segment> segment_session(const Session& session, std::size_t segment_length) {
  if (segment_length == 0) throw ContractError("segment_session: segment length must be positive");
  std::vector<Segment> out;
  const std::size_t T = session.steps();
  std::size_t begin = 0;
  for (; begin + segment_length <= T; begin += segment_length) {
    out.push_back({&session, begin, begin + segment_length});
  }
  if (T - begin >= kMinimumRemainder) out.push_back({&session, begin, T});
  return out;
}

std::vector<std::string> story_ids(std::span<const Session> sessions) {
  std::set<std::string> ids;
  for (const auto& s : sessions) ids.insert(s.story_id);
  return {ids.begin(), ids.end()};
}

std::vector<std::string> listener_ids(std::span<const Session> sessions) {
  std::set<std::string> ids;
  for (const auto& s : sessions) ids.insert(s.listener_id);
  return {ids.begin(), ids.end()};
}

std::vector<DatasetSplit> make_splits(std::span<const Session> sessions,
                                      const SplitPolicy& policy) {
  const auto all = story_ids(sessions);
  if (policy.kind == SplitPolicy::Kind::fixed) {
    const std::size_t needed = policy.train_stories + policy.validation_stories;
    if (policy.train_stories == 0 || all.size() < needed || all.size() < 2) {
      throw DataError("fixed split needs at least " + std::to_string(std::max<std::size_t>(needed, 2)) +
                      " stories, corpus has " + std::to_string(all.size()));
    }
    DatasetSplit split;
    for (std::size_t i = 0; i < all.size(); ++i) {
      if (i < policy.train_stories) split.train.push_back(all[i]);
      else if (i < needed) split.validation.push_back(all[i]);
      else split.test.push_back(all[i]);
    }
    return {split};
  }

  std::vector<std::string> candidates = policy.stories.empty() ? all : policy.stories;
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  for (const auto& id : candidates) {
    if (!std::binary_search(all.begin(), all.end(), id)) {
      throw DataError("story '" + id + "' does not occur in the corpus");
    }
  }
  if (candidates.size() < 2) {
    throw DataError("leave-one-story-out needs at least 2 stories, got " +
                    std::to_string(candidates.size()));
  }
  std::vector<DatasetSplit> folds;
  for (const auto& held_out : candidates) {
    DatasetSplit fold;
    for (const auto& id : candidates) {
      (id == held_out ? fold.validation : fold.train).push_back(id);
    }
    folds.push_back(std::move(fold));
  }
  return folds;
}

std::vector<const Session*> select_stories(std::span<const Session> sessions,
                                           std::span<const std::string> stories) {
  std::vector<const Session*> out;
  for (const auto& s : sessions) {
    if (std::find(stories.begin(), stories.end(), s.story_id) != stories.end()) {
      out.push_back(&s);
    }
  }
  return out;
}

}  // namespace empathy
