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

#include "cli.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "empathy/errors.hpp"
#include "empathy/metrics.hpp"
#include "empathy/model.hpp"
#include "empathy/synthetic.hpp"
#include "empathy/training.hpp"

namespace empathy::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Files

std::string number(double v) {
  char buffer[32];
  const auto result = std::to_chars(buffer, buffer + sizeof(buffer), v);
  return std::string(buffer, result.ptr);
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return text.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw DataError("cannot write " + path.string());
}

void write_json(const fs::path& path, const json& doc) { write_text(path, doc.dump(2) + "\n"); }

void make_dir(const fs::path& path) {
  std::error_code ec;
  fs::create_directories(path, ec);
  if (ec) throw DataError("cannot create directory " + path.string() + ": " + ec.message());
}

// ---------------------------------------------------------------------------
// Run configuration: defaults, then the --config file, then flags.

json without_seed(json j) {
  j.erase("seed");
  return j;
}

json model_defaults() {
  const ModelConfig c;
  return {{"embed_dim", c.embed_dim},
          {"hidden_dim", c.hidden_dim},
          {"attention_window", c.attention_window},
          {"attention_mlp_hidden", c.attention_mlp_hidden},
          {"head_dim", c.head_dim}};
}

json split_defaults() {
  const SplitPolicy p;
  return {{"train_stories", p.train_stories}, {"validation_stories", p.validation_stories}};
}

json defaults_for(const std::string& command) {
  json doc{{"command", command}, {"out", nullptr}};
  if (command == "gen-data") {
    doc["seed"] = SyntheticConfig{}.seed;
    doc["synthetic"] = without_seed(json(SyntheticConfig{}));
    return doc;
  }
  doc["data"] = nullptr;
  doc["seed"] = 0;
  doc["split"] = split_defaults();
  if (command == "train" || command == "xval") {
    doc["variant"] = nullptr;
    doc["model"] = model_defaults();
    doc["train"] = without_seed(json(TrainConfig{}));
  }
  if (command == "xval") {
    doc["stories"] = json::array();
    doc["parallel_folds"] = false;
  }
  if (command == "personalize") {
    doc["checkpoint"] = nullptr;
    doc["listener"] = "all";
    doc["extra_epochs"] = FineTuneConfig{}.extra_epochs;
    json train = without_seed(json(TrainConfig{}));
    train.erase("epochs");  // replaced by extra_epochs
    doc["train"] = train;
  }
  if (command == "eval") {
    doc["checkpoint"] = nullptr;
    doc["subset"] = "test";
    doc.erase("seed");
  }
  return doc;
}

void overlay(json& base, const json& patch, const std::string& where) {
  for (const auto& [key, value] : patch.items()) {
    if (!base.contains(key)) throw ConfigError("unknown config key '" + where + key + "'");
    if (base[key].is_object() && value.is_object()) {
      overlay(base[key], value, where + key + ".");
    } else {
      base[key] = value;
    }
  }
}

fs::path default_out(const json& doc) {
  const char* root = std::getenv(kOutRootVariable);
  const fs::path base = root != nullptr && *root != '\0' ? fs::path(root) : fs::path("runs");
  const std::string command = doc.at("command");
  if (command == "gen-data") return base / "corpus";
  if (doc.contains("variant") && doc.at("variant").is_string()) {
    return base / (command + "-" + doc.at("variant").get<std::string>());
  }
  return base / command;
}

json resolve(const std::string& command, const std::string& config_path, const json& flags) {
  json doc = defaults_for(command);
  if (!config_path.empty()) {
    json file;
    try {
      file = json::parse(read_text(config_path));
    } catch (const json::exception& e) {
      throw ConfigError(config_path + ": " + e.what());
    } catch (const DataError& e) {
      throw ConfigError(e.what());
    }
    if (!file.is_object()) throw ConfigError(config_path + ": expected a JSON object");
    if (file.contains("command") && file.at("command") != command) {
      throw ConfigError(config_path + " configures '" + file.at("command").dump() +
                        "', not '" + command + "'");
    }
    overlay(doc, file, "");
  }
  overlay(doc, flags, "");
  if (doc.at("out").is_null()) doc["out"] = default_out(doc).string();
  return doc;
}

template <class T>
T field(const json& doc, const std::string& key) {
  if (!doc.contains(key) || doc.at(key).is_null()) throw ConfigError("missing required setting '" + key + "'");
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("setting '" + key + "': " + e.what());
  }
}

SyntheticConfig synthetic_config(const json& doc) {
  json j = doc.at("synthetic");
  j["seed"] = doc.at("seed");
  SyntheticConfig synth;
  try {
    synth = j.get<SyntheticConfig>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("synthetic settings: ") + e.what());
  }
  synth.validate();
  return synth;
}

TrainConfig train_config(const json& doc) {
  json j = doc.at("train");
  j["seed"] = doc.at("seed");
  TrainConfig config;
  try {
    config = j.get<TrainConfig>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("train settings: ") + e.what());
  }
  config.validate();
  return config;
}

/// Variant architecture with size overrides; input widths come from the corpus.
ModelConfig model_config(const json& doc) {
  ModelConfig c = variant_factory(field<std::string>(doc, "variant"));
  const json& m = doc.at("model");
  c.embed_dim = field<std::size_t>(m, "embed_dim");
  c.hidden_dim = field<std::size_t>(m, "hidden_dim");
  c.attention_window = field<std::size_t>(m, "attention_window");
  c.attention_mlp_hidden = field<std::size_t>(m, "attention_mlp_hidden");
  c.head_dim = field<std::size_t>(m, "head_dim");
  c.seed = field<std::uint64_t>(doc, "seed");
  c.validate();
  return c;
}

DatasetSplit fixed_split(const json& doc, std::span<const Session> sessions) {
  SplitPolicy policy;
  policy.train_stories = field<std::size_t>(doc.at("split"), "train_stories");
  policy.validation_stories = field<std::size_t>(doc.at("split"), "validation_stories");
  return make_splits(sessions, policy).front();
}

/// Rejects bad settings before anything is written.
void check_settings(const std::string& command, const json& doc) {
  field<std::string>(doc, "out");
  if (command == "gen-data") {
    synthetic_config(doc);
    return;
  }
  field<std::string>(doc, "data");
  field<std::size_t>(doc.at("split"), "train_stories");
  field<std::size_t>(doc.at("split"), "validation_stories");
  if (command == "train" || command == "xval") {
    model_config(doc);
    train_config(doc);
  }
  if (command == "xval") {
    field<std::vector<std::string>>(doc, "stories");
    field<bool>(doc, "parallel_folds");
  }
  if (command == "personalize") {
    field<std::string>(doc, "checkpoint");
    field<std::string>(doc, "listener");
    json effective = doc;
    effective["train"]["epochs"] = field<std::size_t>(doc, "extra_epochs");
    train_config(effective);
  }
  if (command == "eval") {
    field<std::string>(doc, "checkpoint");
    const auto subset = field<std::string>(doc, "subset");
    if (subset != "train" && subset != "validation" && subset != "test" && subset != "all") {
      throw ConfigError("unknown subset '" + subset + "' (expected train, validation, test or all)");
    }
  }
}

// ---------------------------------------------------------------------------
// Shared command steps

/// Fills input widths from the corpus and checks it carries every modality.
void bind_to_corpus(ModelConfig& config, const Session& sample) {
  for (Modality m : config.modalities) {
    auto it = sample.features.find(m);
    if (it == sample.features.end()) {
      throw DataError("corpus has no " + std::string(to_string(m)) +
                      " features, required by variant " + config.variant);
    }
    config.input_dims[m] = it->second.cols;
  }
}

void check_compatible(const ModelConfig& config, const Session& sample) {
  for (Modality m : config.modalities) {
    auto it = sample.features.find(m);
    if (it == sample.features.end()) {
      throw DataError("corpus has no " + std::string(to_string(m)) +
                      " features, required by the checkpoint's variant " + config.variant);
    }
    if (it->second.cols != config.input_dim(m)) {
      throw DataError("corpus " + std::string(to_string(m)) + " features are " +
                      std::to_string(it->second.cols) + " wide, the checkpoint expects " +
                      std::to_string(config.input_dim(m)));
    }
  }
}

std::vector<const Session*> listener_sessions(std::span<const Session> sessions,
                                              std::span<const std::string> stories,
                                              const std::string& listener) {
  std::vector<const Session*> out;
  for (const Session* s : select_stories(sessions, stories)) {
    if (s->listener_id == listener) out.push_back(s);
  }
  return out;
}

json aggregate_json(const Aggregate& a) {
  return {{"mean", a.mean}, {"sd", a.sd}, {"count", a.count}, {"summary", format_mean_sd(a)}};
}

// ---------------------------------------------------------------------------
// Commands

int cmd_gen_data(const json& doc, std::ostream& out) {
  const SyntheticConfig synth = synthetic_config(doc);
  const fs::path dir = doc.at("out").get<std::string>();
  make_dir(dir / "sessions");
  write_json(dir / "run_config.json", doc);

  const auto corpus = generate_synthetic_corpus(synth);
  const bool has_text = std::find(synth.modalities.begin(), synth.modalities.end(), Modality::text) !=
                        synth.modalities.end();
  if (has_text) make_dir(dir / "utterances");

  std::vector<Session> sessions;  // ids only, for the manifest
  json listed = json::array();
  for (const auto& item : corpus) {
    const Session& s = item.session;
    const std::string file = "sessions/" + s.session_id + ".sess";
    save_session(s, dir / file);
    if (has_text) save_utterances(item.utterances, dir / "utterances" / (s.session_id + ".csv"));
    listed.push_back({{"id", s.session_id},
                      {"story", s.story_id},
                      {"listener", s.listener_id},
                      {"actor", s.actor_id},
                      {"file", file},
                      {"steps", s.steps()}});
    Session stub;
    stub.session_id = s.session_id;
    stub.story_id = s.story_id;
    stub.listener_id = s.listener_id;
    sessions.push_back(std::move(stub));
  }

  json splits = nullptr;
  try {
    const DatasetSplit split = make_splits(sessions, SplitPolicy{}).front();
    splits = {{"train", split.train}, {"validation", split.validation}, {"test", split.test}};
  } catch (const DataError&) {
    // Too few stories for the default split; commands choose their own.
  }
  json manifest{{"synthetic", json(synth)},
                {"sessions", listed},
                {"stories", story_ids(sessions)},
                {"listeners", listener_ids(sessions)},
                {"splits", splits}};
  write_json(dir / "manifest.json", manifest);
  out << "wrote " << sessions.size() << " sessions (" << synth.n_stories << " stories x "
      << synth.n_listeners << " listeners) to " << dir.string() << "\n";
  return kOk;
}

int cmd_train(const json& doc, std::ostream& out) {
  const fs::path dir = doc.at("out").get<std::string>();
  make_dir(dir);
  write_json(dir / "run_config.json", doc);

  const auto sessions = load_corpus(doc.at("data").get<std::string>());
  ModelConfig mc = model_config(doc);
  bind_to_corpus(mc, sessions.front());
  mc.validate();
  const TrainConfig tc = train_config(doc);
  const DatasetSplit split = fixed_split(doc, sessions);
  const auto train_set = select_stories(sessions, split.train);
  const auto validation_set = select_stories(sessions, split.validation);
  const auto test_set = select_stories(sessions, split.test);

  const EmpathyModel initial(mc);
  out << "training " << mc.variant << " (" << initial.parameter_count() << " parameters) on "
      << train_set.size() << " sessions, validating on " << validation_set.size() << "\n";
  TrainHooks hooks;
  hooks.on_epoch = [&out](const EpochRecord& e) {
    out << "epoch " << e.epoch << " train_loss " << number(e.train_loss);
    if (e.validation_ccc) out << " validation_ccc " << number(*e.validation_ccc);
    out << std::endl;
  };
  const TrainResult result = train(initial, train_set, validation_set, tc, hooks);
  save_checkpoint(result.model, dir / "checkpoint.bin");
  write_text(dir / "metrics.csv", result.history.to_csv());

  json report{{"variant", mc.variant},
              {"parameters", initial.parameter_count()},
              {"best_epoch", result.history.best_epoch},
              {"epochs_run", result.history.epochs.size()},
              {"stopped_early", result.history.stopped_early}};
  std::string header = "model";
  std::string row = mc.variant;
  const std::pair<const char*, const std::vector<const Session*>*> subsets[] = {
      {"validation", &validation_set}, {"test", &test_set}};
  for (const auto& [name, set] : subsets) {
    if (set->empty()) continue;
    const EvalReport r = evaluate(result.model, *set, mc.variant);
    report[name] = report_to_json(r);
    write_text(dir / (std::string(name) + ".csv"), report_to_csv(r));
    header += std::string(",") + name + "_ccc";
    row += "," + format_mean_sd(r.overall);
  }
  write_json(dir / "report.json", report);
  write_text(dir / "report.csv", header + "\n" + row + "\n");
  out << "best epoch " << result.history.best_epoch << "\n" << header << "\n" << row << "\n";
  return kOk;
}

int cmd_xval(const json& doc, std::ostream& out) {
  const fs::path dir = doc.at("out").get<std::string>();
  make_dir(dir);
  write_json(dir / "run_config.json", doc);

  const auto sessions = load_corpus(doc.at("data").get<std::string>());
  ModelConfig mc = model_config(doc);
  bind_to_corpus(mc, sessions.front());
  mc.validate();
  const TrainConfig tc = train_config(doc);

  CrossValOptions options;
  options.stories = doc.at("stories").get<std::vector<std::string>>();
  options.parallel_folds = doc.at("parallel_folds").get<bool>();
  if (options.stories.empty()) {
    // The training and validation stories of the fixed split.
    const auto all = story_ids(sessions);
    const std::size_t keep = doc.at("split").at("train_stories").get<std::size_t>() +
                             doc.at("split").at("validation_stories").get<std::size_t>();
    options.stories.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(std::min(keep, all.size())));
  }
  if (options.stories.size() < 2) {
    throw DataError("cross-validation needs at least 2 stories, got " +
                    std::to_string(options.stories.size()));
  }
  out << "cross-validating " << mc.variant << " over " << options.stories.size() << " folds"
      << (options.parallel_folds ? " in parallel" : "") << "\n";
  const CrossValReport report = cross_validate(mc, tc, sessions, options);

  make_dir(dir / "folds");
  for (const auto& f : report.folds) {
    write_text(dir / "folds" / ("fold" + std::to_string(f.fold) + "_metrics.csv"), f.history.to_csv());
  }
  write_json(dir / "report.json", report.to_json());
  write_text(dir / "report.csv", report.to_csv());
  out << report.to_csv() << "mean +- sd " << format_mean_sd(report.summary) << "\n";
  return kOk;
}

int cmd_personalize(const json& doc, std::ostream& out) {
  const fs::path dir = doc.at("out").get<std::string>();
  make_dir(dir);
  write_json(dir / "run_config.json", doc);

  const EmpathyModel seed_model = load_checkpoint(doc.at("checkpoint").get<std::string>());
  const auto sessions = load_corpus(doc.at("data").get<std::string>());
  check_compatible(seed_model.config(), sessions.front());
  const DatasetSplit split = fixed_split(doc, sessions);

  const auto known = listener_ids(sessions);
  const std::string requested = doc.at("listener").get<std::string>();
  std::vector<std::string> listeners;
  if (requested == "all") {
    listeners = known;
  } else if (std::find(known.begin(), known.end(), requested) != known.end()) {
    listeners = {requested};
  } else {
    throw DataError("unknown listener '" + requested + "'");
  }

  FineTuneConfig ft;
  ft.train = train_config(doc);
  ft.extra_epochs = doc.at("extra_epochs").get<std::size_t>();

  json rows = json::array();
  std::string csv = "listener,generalized_ccc,personalized_ccc,delta\n";
  std::vector<double> before_all, after_all;
  for (const auto& listener : listeners) {
    const auto validation = listener_sessions(sessions, split.validation, listener);
    std::optional<double> before, after;
    if (!validation.empty()) before = evaluate(seed_model, validation, listener).overall.mean;
    ft.listener_id = listener;
    const TrainResult tuned = fine_tune(seed_model, sessions, split, ft);
    if (!validation.empty()) after = evaluate(tuned.model, validation, listener).overall.mean;

    const fs::path listener_dir = dir / "listeners" / listener;
    make_dir(listener_dir);
    save_checkpoint(tuned.model, listener_dir / "checkpoint.bin");
    write_text(listener_dir / "metrics.csv", tuned.history.to_csv());

    json row{{"listener", listener},
             {"validation_sessions", validation.size()},
             {"best_epoch", tuned.history.best_epoch},
             {"generalized_ccc", before ? json(*before) : json(nullptr)},
             {"personalized_ccc", after ? json(*after) : json(nullptr)},
             {"delta", before && after ? json(*after - *before) : json(nullptr)}};
    rows.push_back(row);
    if (before && after) {
      before_all.push_back(*before);
      after_all.push_back(*after);
      csv += listener + "," + number(*before) + "," + number(*after) + "," + number(*after - *before) + "\n";
      out << listener << " generalized " << number(*before) << " personalized " << number(*after) << "\n";
    } else {
      csv += listener + ",,,\n";
      out << listener << " has no validation session; model saved without comparison\n";
    }
  }

  json report{{"variant", seed_model.config().variant}, {"models", listeners.size()}, {"listeners", rows}};
  if (!before_all.empty()) {
    const Aggregate g = aggregate(before_all);
    const Aggregate p = aggregate(after_all);
    report["generalized"] = aggregate_json(g);
    report["personalized"] = aggregate_json(p);
    report["delta"] = p.mean - g.mean;
    csv += "mean," + number(g.mean) + "," + number(p.mean) + "," + number(p.mean - g.mean) + "\n";
    out << "generalized " << format_mean_sd(g) << " -> personalized " << format_mean_sd(p) << "\n";
  }
  write_json(dir / "report.json", report);
  write_text(dir / "report.csv", csv);
  return kOk;
}

int cmd_eval(const json& doc, std::ostream& out) {
  const fs::path dir = doc.at("out").get<std::string>();
  make_dir(dir / "traces");
  write_json(dir / "run_config.json", doc);

  const EmpathyModel model = load_checkpoint(doc.at("checkpoint").get<std::string>());
  const auto sessions = load_corpus(doc.at("data").get<std::string>());
  check_compatible(model.config(), sessions.front());

  const std::string subset = doc.at("subset").get<std::string>();
  std::vector<const Session*> selected;
  if (subset == "all") {
    for (const auto& s : sessions) selected.push_back(&s);
  } else {
    const DatasetSplit split = fixed_split(doc, sessions);
    const auto& stories = subset == "train" ? split.train : subset == "validation" ? split.validation : split.test;
    selected = select_stories(sessions, stories);
  }
  if (selected.empty()) throw DataError("no sessions in the " + subset + " subset");

  const EvalReport report = evaluate(model, selected, model.config().variant);
  const auto traces = predict(model, selected);
  for (std::size_t i = 0; i < selected.size(); ++i) {
    const Session& s = *selected[i];
    std::string csv = "time,target,prediction\n";
    for (std::size_t t = 0; t < s.steps(); ++t) {
      csv += std::to_string(t) + "," + number(s.valence[t]) + "," + number(traces[i].valence[t]) + "\n";
    }
    write_text(dir / "traces" / (s.session_id + ".csv"), csv);
  }
  write_json(dir / "report.json", report_to_json(report));
  write_text(dir / "report.csv", report_to_csv(report));
  out << "evaluated " << selected.size() << " " << subset << " sessions: CCC "
      << format_mean_sd(report.overall) << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// Flag parsing

/// Collects the flags actually given on the command line as a config patch.
class FlagPatch {
 public:
  explicit FlagPatch(CLI::App* app) : app_(app) {}

  template <class T>
  CLI::Option* option(const std::string& name, const std::string& at, const std::string& help) {
    auto value = std::make_shared<T>();
    CLI::Option* opt = app_->add_option(name, *value, help);
    setters_.push_back([opt, value, at](json& patch) {
      if (opt->count() > 0) patch[json::json_pointer(at)] = *value;
    });
    return opt;
  }

  CLI::Option* flag(const std::string& name, const std::string& at, json value, const std::string& help) {
    CLI::Option* opt = app_->add_flag(name, help);
    setters_.push_back([opt, value, at](json& patch) {
      if (opt->count() > 0) patch[json::json_pointer(at)] = value;
    });
    return opt;
  }

  json build() const {
    json patch = json::object();
    for (const auto& set : setters_) set(patch);
    return patch;
  }

 private:
  CLI::App* app_;
  std::vector<std::function<void(json&)>> setters_;
};

void add_common(CLI::App* sub, FlagPatch& p, std::string& config_path, bool seeded = true) {
  sub->add_option("--config", config_path, "JSON run configuration; flags override it")
      ->check(CLI::ExistingFile);
  p.option<std::string>("--out", "/out", "output directory (default under $EMPATHY_OUT_ROOT)");
  if (seeded) p.option<std::uint64_t>("--seed", "/seed", "random seed");
}

void add_data(FlagPatch& p) {
  p.option<std::string>("--data", "/data", "corpus directory");
  p.option<std::size_t>("--train-stories", "/split/train_stories", "training stories of the fixed split");
  p.option<std::size_t>("--validation-stories", "/split/validation_stories",
                        "validation stories of the fixed split");
}

void add_model(FlagPatch& p) {
  p.option<std::string>("--variant", "/variant", "A, T, V, AT, AV, TV or ATV");
  p.option<std::size_t>("--embed-dim", "/model/embed_dim", "per-modality embedding width");
  p.option<std::size_t>("--hidden-dim", "/model/hidden_dim", "LSTM hidden width");
  p.option<std::size_t>("--window", "/model/attention_window", "attention window W");
  p.option<std::size_t>("--attention-dim", "/model/attention_mlp_hidden", "attention MLP width");
  p.option<std::size_t>("--head-dim", "/model/head_dim", "regression head width");
}

void add_training(FlagPatch& p, bool with_epochs) {
  if (with_epochs) p.option<std::size_t>("--epochs", "/train/epochs", "maximum epochs");
  p.option<std::size_t>("--batch-size", "/train/batch_size", "segments per batch");
  p.option<double>("--lr", "/train/learning_rate", "learning rate");
  p.option<std::string>("--optimizer", "/train/optimizer", "adam or sgd");
  p.option<std::size_t>("--patience", "/train/patience", "early-stopping patience in epochs");
  p.option<std::size_t>("--segment-length", "/train/segment_length_s", "training segment length (s)");
  p.option<std::string>("--loss", "/train/loss", "mse or ccc");
  p.option<std::string>("--early-stop-metric", "/train/early_stop_metric", "ccc or loss");
  p.flag("--no-early-stopping", "/train/early_stopping", false, "train for every epoch");
  p.option<double>("--grad-clip", "/train/grad_clip_norm", "global gradient-norm clip");
  p.flag("--no-grad-clip", "/train/grad_clip_norm", nullptr, "disable gradient clipping");
}

}  // namespace

std::vector<Session> load_corpus(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("corpus directory " + dir.string() + " does not exist");
  std::vector<fs::path> files;
  const fs::path manifest = dir / "manifest.json";
  if (fs::exists(manifest)) {
    try {
      const json m = json::parse(read_text(manifest));
      for (const auto& s : m.at("sessions")) files.push_back(dir / s.at("file").get<std::string>());
    } catch (const json::exception& e) {
      throw DataError(manifest.string() + ": " + e.what());
    }
  } else if (fs::is_directory(dir / "sessions")) {
    for (const auto& entry : fs::directory_iterator(dir / "sessions")) {
      const auto ext = entry.path().extension();
      if (ext == ".sess" || ext == ".csv") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
  }
  if (files.empty()) throw DataError("corpus " + dir.string() + " has no sessions");
  std::vector<Session> sessions;
  sessions.reserve(files.size());
  for (const auto& f : files) sessions.push_back(load_session(f));
  return sessions;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Continuous empathic-valence prediction from audio, text and visual features", "empathy"};
  app.require_subcommand(1);
  std::string config_path;
  std::map<std::string, FlagPatch> patches;

  auto* gen = app.add_subcommand("gen-data", "generate a synthetic corpus");
  auto& pg = patches.emplace("gen-data", FlagPatch(gen)).first->second;
  add_common(gen, pg, config_path);
  pg.option<std::size_t>("--stories", "/synthetic/n_stories", "number of stories");
  pg.option<std::size_t>("--listeners", "/synthetic/n_listeners", "number of listeners");
  pg.option<std::size_t>("--duration", "/synthetic/duration_s", "session length in seconds");
  pg.option<double>("--noise", "/synthetic/noise_scale", "feature noise scale");
  pg.option<std::size_t>("--latent-dim", "/synthetic/latent_dim", "latent trajectory width");
  pg.option<std::vector<std::string>>("--modalities", "/synthetic/modalities", "e.g. audio,text")
      ->delimiter(',');
  pg.option<std::size_t>("--audio-dim", "/synthetic/dims/audio", "audio feature width");
  pg.option<std::size_t>("--text-dim", "/synthetic/dims/text", "text feature width");
  pg.option<std::size_t>("--visual-dim", "/synthetic/dims/visual", "visual feature width");
  pg.option<double>("--gain-min", "/synthetic/gain_min", "smallest listener gain");
  pg.option<double>("--gain-max", "/synthetic/gain_max", "largest listener gain");
  pg.option<std::size_t>("--lag-max", "/synthetic/lag_max", "largest listener lag (s)");
  pg.flag("--actor-features", "/synthetic/with_actor_features", true, "also write actor tracks");

  auto* train_cmd = app.add_subcommand("train", "train one model variant");
  auto& pt = patches.emplace("train", FlagPatch(train_cmd)).first->second;
  add_common(train_cmd, pt, config_path);
  add_data(pt);
  add_model(pt);
  add_training(pt, true);

  auto* xval = app.add_subcommand("xval", "leave-one-story-out cross-validation");
  auto& px = patches.emplace("xval", FlagPatch(xval)).first->second;
  add_common(xval, px, config_path);
  add_data(px);
  add_model(px);
  add_training(px, true);
  px.option<std::vector<std::string>>("--stories", "/stories", "stories to cross-validate")->delimiter(',');
  px.flag("--parallel-folds", "/parallel_folds", true, "train folds concurrently");

  auto* personalize = app.add_subcommand("personalize", "fine-tune a model per listener");
  auto& pp = patches.emplace("personalize", FlagPatch(personalize)).first->second;
  add_common(personalize, pp, config_path);
  add_data(pp);
  pp.option<std::string>("--checkpoint", "/checkpoint", "generalized model to start from");
  pp.option<std::string>("--listener", "/listener", "listener id, or all");
  pp.option<std::size_t>("--epochs", "/extra_epochs", "fine-tuning epochs");
  add_training(pp, false);

  auto* eval = app.add_subcommand("eval", "score a checkpoint and export prediction traces");
  auto& pe = patches.emplace("eval", FlagPatch(eval)).first->second;
  add_common(eval, pe, config_path, false);
  add_data(pe);
  pe.option<std::string>("--checkpoint", "/checkpoint", "model checkpoint");
  pe.option<std::string>("--subset", "/subset", "train, validation, test or all");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    const json doc = resolve(command, config_path, patches.at(command).build());
    check_settings(command, doc);
    out << "empathy " << command << " with configuration\n" << doc.dump(2) << "\n";
    if (command == "gen-data") return cmd_gen_data(doc, out);
    if (command == "train") return cmd_train(doc, out);
    if (command == "xval") return cmd_xval(doc, out);
    if (command == "personalize") return cmd_personalize(doc, out);
    return cmd_eval(doc, out);
  } catch (const ConfigError& e) {
    err << "empathy " << command << ": usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const NumericalError& e) {
    err << "empathy " << command << ": numerical error: " << e.what() << "\n";
    return kNumerical;
  } catch (const DataError& e) {
    err << "empathy " << command << ": data error: " << e.what() << "\n";
    return kData;
  } catch (const DimensionError& e) {
    err << "empathy " << command << ": data error: " << e.what() << "\n";
    return kData;
  } catch (const fs::filesystem_error& e) {
    err << "empathy " << command << ": data error: " << e.what() << "\n";
    return kData;
  } catch (const std::exception& e) {
    err << "empathy " << command << ": error: " << e.what() << "\n";
    return kFailure;
  }
}

}  // namespace empathy::cli
