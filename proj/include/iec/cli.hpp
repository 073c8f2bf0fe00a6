#pragma once

// Command-line front end: synth, train, evaluate, benchmark.
//
// Exit codes: 0 success, 1 runtime error, 2 usage error.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "iec/ann.hpp"
#include "iec/dataset.hpp"
#include "iec/ensemble.hpp"
#include "iec/hddt.hpp"
#include "iec/metrics.hpp"

namespace iec::cli {

using Json = nlohmann::ordered_json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

struct DataArgs {
  std::string path;
  std::string label_col = "class";
  std::string positive = "1";
  std::vector<std::string> categorical;
};

struct ModelArgs {
  std::size_t min_leaf = 1;
  std::size_t max_depth = 0;  // 0 = unlimited
  std::size_t epochs = 2000;
  double learning_rate = 0.3;
  double init_scale = 0.5;

  hddt::TreeConfig tree() const {
    hddt::TreeConfig c;
    c.min_leaf = min_leaf;
    if (max_depth > 0) c.max_depth = max_depth;
    return c;
  }
  ann::TrainConfig net(std::uint64_t seed) const {
    return ann::TrainConfig{epochs, learning_rate, seed, init_scale};
  }
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::string format = "table";
  DataArgs data;
  ModelArgs model;

  // synth
  std::size_t n = 1000;
  std::size_t informative = 5;
  std::size_t noise = 5;
  double minority = 0.2;
  double separation = data::SynthConfig{}.separation;
  std::string out = "-";

  // train / evaluate
  std::string model_path;
  std::string baseline;

  // benchmark
  std::size_t repetitions = data::kDefaultRepetitions;
  double train_fraction = data::kDefaultTrainFraction;
  std::string dump_folds;
};

namespace detail {

inline const CLI::Validator kPositiveReal{
    [](std::string& s) -> std::string {
      double v = 0;
      if (!CLI::detail::lexical_cast(s, v) || !(v > 0) || !std::isfinite(v)) {
        return "must be a finite number > 0";
      }
      return {};
    },
    "POSITIVE"};

inline CLI::Validator open_interval(double lo, double hi) {
  return CLI::Validator(
      [lo, hi](std::string& s) -> std::string {
        double v = 0;
        if (!CLI::detail::lexical_cast(s, v) || !(v > lo && v < hi)) {
          return "must lie strictly between " + std::to_string(lo) + " and " +
                 std::to_string(hi);
        }
        return {};
      },
      "(" + CLI::detail::to_string(lo) + ", " + CLI::detail::to_string(hi) + ")");
}

/// key=value lines (with optional [command] sections, '#' comments) or a
/// JSON object whose nested objects are per-command sections.
inline std::map<std::string, std::map<std::string, std::string>> read_config(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  std::map<std::string, std::map<std::string, std::string>> sections;

  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    const auto doc = Json::parse(text);
    auto scalar = [](const Json& v) {
      return v.is_string() ? v.get<std::string>() : v.dump();
    };
    for (const auto& [key, value] : doc.items()) {
      if (value.is_object()) {
        for (const auto& [k, v] : value.items()) sections[key][k] = scalar(v);
      } else {
        sections[""][key] = scalar(value);
      }
    }
    return sections;
  }

  std::string section;
  std::istringstream lines(text);
  std::string line;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
  };
  while (std::getline(lines, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[' && line.back() == ']') {
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw DataError("config: expected key=value, got '" + line + "'");
    auto value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    }
    sections[section][trim(line.substr(0, eq))] = value;
  }
  return sections;
}

/// Config values become `--key value` arguments placed before the user's
/// own, skipped for any option the user already passed, so flags win.
inline std::vector<std::string> merge_config(const std::vector<std::string>& args) {
  std::string config_path;
  std::string command;
  std::vector<std::string> rest;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      config_path = args[++i];
      continue;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      config_path = args[i].substr(9);
      continue;
    }
    if (command.empty() && !args[i].empty() && args[i][0] != '-') command = args[i];
    rest.push_back(args[i]);
  }
  if (config_path.empty() || command.empty()) return rest;

  std::set<std::string> given;
  for (const auto& a : rest) {
    if (a.rfind("--", 0) == 0) given.insert(a.substr(2, a.find('=') - 2));
  }
  const auto sections = read_config(config_path);
  std::map<std::string, std::string> merged;
  if (auto it = sections.find(""); it != sections.end()) merged = it->second;
  if (auto it = sections.find(command); it != sections.end()) {
    for (const auto& [k, v] : it->second) merged[k] = v;
  }

  std::vector<std::string> out;
  bool inserted = false;
  for (const auto& a : rest) {
    out.push_back(a);
    if (!inserted && a == command) {
      inserted = true;
      for (const auto& [k, v] : merged) {
        if (given.count(k)) continue;
        out.push_back("--" + k);
        out.push_back(v);
      }
    }
  }
  return out;
}

inline std::set<std::string> as_set(const std::vector<std::string>& v) {
  return {v.begin(), v.end()};
}

inline data::Dataset load(const DataArgs& a) {
  return data::load_csv(a.path, a.label_col, a.positive, as_set(a.categorical));
}

template <class T>
void write_json_file(const std::string& path, const T& value) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << Json(value).dump(2) << '\n';
  if (!out) throw DataError("failed writing '" + path + "'");
}

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw DataError("'" + path + "' is not valid JSON: " + e.what());
  }
}

inline std::string join_names(const data::Schema& specs, const std::vector<std::size_t>& idx) {
  std::string s;
  for (auto f : idx) {
    if (!s.empty()) s += ", ";
    s += specs[f].name;
  }
  return s;
}

inline void write_detail_line(std::ostream& out, const metrics::MetricsReport& r) {
  out << "precision " << metrics::format_score(r.precision) << "  sensitivity "
      << metrics::format_score(r.sensitivity) << "  specificity "
      << metrics::format_score(r.specificity) << '\n';
}

inline void write_confusion_line(std::ostream& out, const metrics::ConfusionMatrix& cm) {
  out << "confusion tp=" << cm.tp << " fp=" << cm.fp << " tn=" << cm.tn << " fn=" << cm.fn
      << '\n';
}

// ---------------------------------------------------------------------------
// Commands

inline int cmd_synth(const RunConfig& c, std::ostream& out) {
  data::SynthConfig s;
  s.n = c.n;
  s.informative = c.informative;
  s.noise = c.noise;
  s.minority_fraction = c.minority;
  s.seed = c.seed;
  s.separation = c.separation;
  const auto d = data::synth_generate(s);
  if (c.out == "-") {
    data::write_csv(out, d);
  } else {
    std::ofstream f(c.out, std::ios::binary);
    if (!f) throw DataError("cannot write '" + c.out + "'");
    data::write_csv(f, d);
    if (!f) throw DataError("failed writing '" + c.out + "'");
  }
  return kExitOk;
}

inline int cmd_train(const RunConfig& c, std::ostream& out) {
  const auto d = load(c.data);
  const auto model = ensemble::fit(d, c.model.tree(), c.model.net(c.seed));
  if (!c.model_path.empty()) write_json_file(c.model_path, model);
  const auto cm = metrics::confusion(ensemble::predict(model, d), d.labels());
  const auto rep = metrics::report(cm);

  if (c.format == "json") {
    Json j;
    j["n_train"] = model.n_train;
    j["selected_features"] = model.selected_features;
    Json names = Json::array();
    for (auto f : model.selected_features) names.push_back(d.specs()[f].name);
    j["selected_feature_names"] = names;
    j["d_m"] = model.d_m;
    j["k"] = model.net.hidden_count;
    j["confusion"] = cm;
    j["train_metrics"] = rep;
    out << j.dump(2) << '\n';
    return kExitOk;
  }
  out << "training rows: " << model.n_train << '\n';
  out << "selected features: " << join_names(d.specs(), model.selected_features) << '\n';
  out << "d_m: " << model.d_m << '\n';
  out << "k: " << model.net.hidden_count << '\n';
  metrics::write_table(out, {{"IEC (train)", rep}});
  write_detail_line(out, rep);
  write_confusion_line(out, cm);
  return kExitOk;
}

inline int cmd_evaluate(const RunConfig& c, std::ostream& out) {
  std::string name;
  std::optional<data::Dataset> loaded;
  std::vector<Label> predicted;
  if (!c.baseline.empty()) {
    name = c.baseline;
    loaded = load(c.data);
    predicted.assign(loaded->n(), c.baseline == "constant1" ? Label{1} : Label{0});
  } else {
    const auto model = read_json_file(c.model_path).get<ensemble::IecModel>();
    loaded = data::load_csv_with_schema(c.data.path, c.data.label_col, c.data.positive,
                                        model.tree.specs);
    predicted = ensemble::predict(model, *loaded);
    name = "IEC";
  }
  const auto& d = *loaded;
  const auto cm = metrics::confusion(predicted, d.labels());
  const auto rep = metrics::report(cm);
  if (c.format == "json") {
    Json j{{"classifier", name}, {"rows", d.n()}, {"confusion", cm}, {"metrics", rep}};
    out << j.dump(2) << '\n';
    return kExitOk;
  }
  metrics::write_table(out, {{name, rep}});
  write_detail_line(out, rep);
  write_confusion_line(out, cm);
  return kExitOk;
}

struct FoldResult {
  std::string classifier;
  metrics::ConfusionMatrix confusion;
  metrics::MetricsReport report;
};

inline const std::vector<std::string>& benchmark_classifiers() {
  static const std::vector<std::string> names{"ANN", "HDDT", "IEC"};
  return names;
}

/// Per-fold results in (fold, classifier) order.
inline std::vector<std::vector<FoldResult>> run_benchmark_folds(const data::Dataset& d,
                                                               const RunConfig& c) {
  const auto splits = data::repeated_eval_indices(d, c.repetitions, c.train_fraction, c.seed);
  std::vector<std::vector<FoldResult>> folds;
  for (std::size_t r = 0; r < splits.size(); ++r) {
    try {
      const auto train = d.subset(splits[r].train);
      const auto test = d.subset(splits[r].test);
      const auto net_cfg = c.model.net(c.seed);
      const auto tree = hddt::grow_tree(train, c.model.tree());
      const auto ann_only = ensemble::fit_ann_only(train, net_cfg);
      const auto iec_model = ensemble::fit(train, c.model.tree(), net_cfg);

      std::vector<FoldResult> fold;
      auto add = [&](const std::string& name, const std::vector<Label>& pred) {
        const auto cm = metrics::confusion(pred, test.labels());
        fold.push_back({name, cm, metrics::report(cm)});
      };
      add("ANN", ensemble::predict(ann_only, test));
      add("HDDT", hddt::predict(tree, test));
      add("IEC", ensemble::predict(iec_model, test));
      folds.push_back(std::move(fold));
    } catch (const std::exception& e) {
      throw Error("benchmark fold " + std::to_string(r) + ": " + e.what());
    }
  }
  return folds;
}

inline std::vector<std::pair<std::string, metrics::MetricsReport>> aggregate(
    const std::vector<std::vector<FoldResult>>& folds) {
  std::vector<std::pair<std::string, metrics::MetricsReport>> rows;
  for (std::size_t k = 0; k < benchmark_classifiers().size(); ++k) {
    std::vector<metrics::MetricsReport> reports;
    for (const auto& fold : folds) reports.push_back(fold[k].report);
    rows.emplace_back(benchmark_classifiers()[k], metrics::mean_report(reports));
  }
  return rows;
}

inline int cmd_benchmark(const RunConfig& c, std::ostream& out) {
  const auto d = load(c.data);
  const auto folds = run_benchmark_folds(d, c);
  const auto rows = aggregate(folds);

  if (!c.dump_folds.empty()) {
    Json dump = Json::array();
    for (std::size_t r = 0; r < folds.size(); ++r) {
      Json fold{{"fold", r}, {"seed", data::repetition_seed(c.seed, r)}};
      for (const auto& f : folds[r]) {
        fold["results"].push_back(
            {{"classifier", f.classifier}, {"confusion", f.confusion}, {"metrics", f.report}});
      }
      dump.push_back(std::move(fold));
    }
    write_json_file(c.dump_folds, dump);
  }

  if (c.format == "json") {
    Json j{{"rows", d.n()},
           {"imbalance_cv", data::imbalance_cv(d)},
           {"repetitions", c.repetitions},
           {"train_fraction", c.train_fraction},
           {"seed", c.seed}};
    for (const auto& [name, rep] : rows) j["classifiers"].push_back({{"name", name}, {"metrics", rep}});
    out << j.dump(2) << '\n';
    return kExitOk;
  }
  out << "rows: " << d.n() << "  imbalance CV: " << metrics::format_score(data::imbalance_cv(d))
      << "  repetitions: " << c.repetitions << "  train fraction: " << c.train_fraction << '\n';
  metrics::write_table(out, rows);
  return kExitOk;
}

inline void add_common(CLI::App* app, RunConfig& c) {
  app->add_option("--seed", c.seed, "Random seed")->capture_default_str();
  app->add_option("--format", c.format, "Output format")
      ->check(CLI::IsMember({"table", "json"}))
      ->capture_default_str();
}

inline void add_data(CLI::App* app, RunConfig& c) {
  app->add_option("--data", c.data.path, "Input CSV")->required()->check(CLI::ExistingFile);
  app->add_option("--label-col", c.data.label_col, "Label column name")->capture_default_str();
  app->add_option("--positive", c.data.positive, "Label value of the positive class")
      ->capture_default_str();
}

inline void add_categorical(CLI::App* app, RunConfig& c) {
  app->add_option("--categorical", c.data.categorical, "Categorical column names")
      ->delimiter(',');
}

inline void add_model(CLI::App* app, RunConfig& c) {
  app->add_option("--min-leaf", c.model.min_leaf, "Minimum rows per tree leaf")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app->add_option("--max-depth", c.model.max_depth, "Tree depth limit (0 = unlimited)")
      ->capture_default_str();
  app->add_option("--epochs", c.model.epochs, "Gradient-descent epochs")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app->add_option("--lr", c.model.learning_rate, "Learning rate")
      ->check(kPositiveReal)
      ->capture_default_str();
  app->add_option("--init-scale", c.model.init_scale, "Uniform init half-width")
      ->check(kPositiveReal)
      ->capture_default_str();
}

}  // namespace detail

/// Runs the CLI on `args` (without the program name).
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RunConfig c;
  CLI::App app{"Imbalanced ensemble classifier: HDDT feature selection + one-hidden-layer ANN",
               "iec"};
  app.require_subcommand(1);
  app.add_option("--config", "Config file (key=value or JSON); flags win");

  auto* synth = app.add_subcommand("synth", "Write a synthetic imbalanced dataset as CSV");
  detail::add_common(synth, c);
  synth->add_option("--n", c.n, "Rows")->check(CLI::Range(std::size_t{10}, SIZE_MAX))
      ->capture_default_str();
  synth->add_option("--informative", c.informative, "Class-shifted features")->capture_default_str();
  synth->add_option("--noise", c.noise, "Class-independent features")->capture_default_str();
  synth->add_option("--minority", c.minority, "Positive-class fraction")
      ->check(detail::open_interval(0.0, 0.5))
      ->capture_default_str();
  synth->add_option("--separation", c.separation, "Class-mean distance per informative feature")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  synth->add_option("--out", c.out, "Output path ('-' for stdout)")->capture_default_str();

  auto* train = app.add_subcommand("train", "Fit an IEC model");
  detail::add_common(train, c);
  detail::add_data(train, c);
  detail::add_categorical(train, c);
  detail::add_model(train, c);
  train->add_option("--model", c.model_path, "Where to write the model JSON");

  auto* evaluate = app.add_subcommand("evaluate", "Score a model (or a baseline) on a CSV");
  detail::add_common(evaluate, c);
  detail::add_data(evaluate, c);
  detail::add_categorical(evaluate, c);
  auto* model_opt = evaluate->add_option("--model", c.model_path, "Model JSON")->check(CLI::ExistingFile);
  auto* baseline_opt = evaluate->add_option("--baseline", c.baseline, "Constant predictor instead of a model")
      ->check(CLI::IsMember({"constant0", "constant1"}));
  model_opt->excludes(baseline_opt);

  auto* bench = app.add_subcommand("benchmark", "Compare ANN-only, HDDT-only and IEC");
  detail::add_common(bench, c);
  detail::add_data(bench, c);
  detail::add_categorical(bench, c);
  detail::add_model(bench, c);
  bench->add_option("--repetitions", c.repetitions, "Stratified hold-out repetitions")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  bench->add_option("--train-fraction", c.train_fraction, "Training share per split")
      ->check(detail::open_interval(0.0, 1.0))
      ->capture_default_str();
  bench->add_option("--dump-folds", c.dump_folds, "Write per-fold results as JSON");

  std::vector<std::string> merged;
  try {
    merged = detail::merge_config(args);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    std::vector<const char*> argv{"iec"};
    for (const auto& a : merged) argv.push_back(a.c_str());
    app.parse(static_cast<int>(argv.size()), argv.data());
    if (evaluate->parsed() && model_opt->count() == 0 && baseline_opt->count() == 0) {
      throw CLI::RequiredError("--model or --baseline");
    }
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    err << "run with --help for usage\n";
    return kExitUsage;
  }

  try {
    if (synth->parsed()) {
      try {
        return detail::cmd_synth(c, out);
      } catch (const InvalidArgument& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
      }
    }
    if (train->parsed()) return detail::cmd_train(c, out);
    if (evaluate->parsed()) return detail::cmd_evaluate(c, out);
    return detail::cmd_benchmark(c, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace iec::cli
