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

#include "empathy/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "empathy/errors.hpp"

namespace empathy {

namespace {

struct Moments {
  double mean_x = 0, mean_y = 0, var_x = 0, var_y = 0, cov = 0;
};

Moments moments(std::span<const double> x, std::span<const double> y, const char* name) {
  if (x.size() != y.size()) {
    throw DimensionError(std::string(name) + ": length mismatch (" + std::to_string(x.size()) +
                         " vs " + std::to_string(y.size()) + ")");
  }
  if (x.size() < 2) throw ContractError(std::string(name) + ": need at least 2 samples");
  const double n = static_cast<double>(x.size());
  Moments m;
  for (std::size_t i = 0; i < x.size(); ++i) {
    m.mean_x += x[i];
    m.mean_y += y[i];
  }
  m.mean_x /= n;
  m.mean_y /= n;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - m.mean_x, dy = y[i] - m.mean_y;
    m.var_x += dx * dx;
    m.var_y += dy * dy;
    m.cov += dx * dy;
  }
  const double denom = n - kMomentDegreesOfFreedom;
  m.var_x /= denom;
  m.var_y /= denom;
  m.cov /= denom;
  return m;
}

std::string fixed(double v, int decimals) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.*f", decimals, v);
  return buffer;
}

std::string csv_number(double v) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.10g", v);
  return buffer;
}

}  // namespace

double ccc(std::span<const double> pred, std::span<const double> target) {
  const auto m = moments(pred, target, "ccc");
  const double gap = m.mean_x - m.mean_y;
  const double denom = m.var_x + m.var_y + gap * gap;
  if (denom == 0.0) return 1.0;  // identical constants
  return std::clamp(2.0 * m.cov / denom, -1.0, 1.0);
}

std::optional<double> pearson(std::span<const double> pred, std::span<const double> target) {
  const auto m = moments(pred, target, "pearson");
  if (m.var_x <= 0.0 || m.var_y <= 0.0) return std::nullopt;
  return std::clamp(m.cov / std::sqrt(m.var_x * m.var_y), -1.0, 1.0);
}

Aggregate aggregate(std::span<const double> values) {
  if (values.empty()) throw ContractError("aggregate: empty list");
  Aggregate a;
  a.count = values.size();
  const double n = static_cast<double>(values.size());
  for (double v : values) a.mean += v;
  a.mean /= n;
  double ss = 0.0;
  for (double v : values) ss += (v - a.mean) * (v - a.mean);
  a.sd = std::sqrt(ss / n);
  return a;
}

std::string format_mean_sd(const Aggregate& a, int decimals) {
  return fixed(a.mean, decimals) + " +- " + fixed(a.sd, decimals);
}

EvalReport make_report(std::string label, std::vector<SessionScore> sessions) {
  if (sessions.empty()) throw ContractError("make_report: no sessions");
  EvalReport report;
  report.label = std::move(label);
  report.sessions = std::move(sessions);
  std::map<std::string, std::vector<double>> by_story;
  std::vector<double> all;
  for (const auto& s : report.sessions) {
    by_story[s.story_id].push_back(s.ccc);
    all.push_back(s.ccc);
  }
  for (const auto& [story, values] : by_story) report.per_story[story] = aggregate(values);
  report.overall = aggregate(all);
  return report;
}

nlohmann::json report_to_json(const EvalReport& report) {
  nlohmann::json sessions = nlohmann::json::array();
  for (const auto& s : report.sessions) {
    sessions.push_back({{"session_id", s.session_id},
                        {"story_id", s.story_id},
                        {"listener_id", s.listener_id},
                        {"ccc", s.ccc},
                        {"pearson", s.pearson ? nlohmann::json(*s.pearson) : nlohmann::json("undefined")}});
  }
  auto agg = [](const Aggregate& a) {
    return nlohmann::json{{"mean", a.mean}, {"sd", a.sd}, {"count", a.count}};
  };
  nlohmann::json stories = nlohmann::json::object();
  for (const auto& [story, a] : report.per_story) stories[story] = agg(a);
  return {{"label", report.label},
          {"sessions", sessions},
          {"per_story", stories},
          {"overall", agg(report.overall)},
          {"summary", format_mean_sd(report.overall)}};
}

std::string report_to_csv(const EvalReport& report) {
  std::string out = "kind,id,story_id,listener_id,ccc,pearson,sd,count\n";
  for (const auto& s : report.sessions) {
    out += "session," + s.session_id + "," + s.story_id + "," + s.listener_id + "," +
           csv_number(s.ccc) + "," + (s.pearson ? csv_number(*s.pearson) : "undefined") + ",,\n";
  }
  for (const auto& [story, a] : report.per_story) {
    out += "story," + story + "," + story + ",," + csv_number(a.mean) + ",," +
           csv_number(a.sd) + "," + std::to_string(a.count) + "\n";
  }
  out += "overall," + report.label + ",,," + csv_number(report.overall.mean) + ",," +
         csv_number(report.overall.sd) + "," + std::to_string(report.overall.count) + "\n";
  return out;
}

}  // namespace empathy
