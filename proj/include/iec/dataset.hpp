#pragma once

// Tabular binary-classification data: schema, CSV ingestion, min-max
// scaling, class-imbalance measurement, stratified splitting and a
// synthetic imbalanced generator.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "iec/common.hpp"

namespace iec::data {

enum class FeatureKind { Continuous, Categorical };

struct FeatureSpec {
  std::string name;
  FeatureKind kind = FeatureKind::Continuous;
  std::vector<std::string> categories;  // Categorical only, index order

  bool is_categorical() const noexcept { return kind == FeatureKind::Categorical; }

  friend bool operator==(const FeatureSpec&, const FeatureSpec&) = default;
};

using Schema = std::vector<FeatureSpec>;

inline void validate_schema(const Schema& specs) {
  std::set<std::string_view> names;
  for (const auto& s : specs) {
    if (!names.insert(s.name).second) {
      throw InvalidArgument("duplicate feature name '" + s.name + "'");
    }
    if (s.is_categorical() && s.categories.empty()) {
      throw InvalidArgument("categorical feature '" + s.name + "' has no categories");
    }
    if (!s.is_categorical() && !s.categories.empty()) {
      throw InvalidArgument("continuous feature '" + s.name + "' lists categories");
    }
  }
}

struct ClassCounts {
  std::size_t positive = 0;
  std::size_t negative = 0;

  std::size_t total() const noexcept { return positive + negative; }
  friend bool operator==(const ClassCounts&, const ClassCounts&) = default;
};

/// n x p feature matrix with a per-column schema and {0,1} labels
/// (1 = positive / minority class). Categorical cells hold category
/// indices stored as doubles.
class Dataset {
 public:
  Dataset(Schema specs, Matrix rows, std::vector<Label> labels)
      : specs_(std::move(specs)), rows_(std::move(rows)), labels_(std::move(labels)) {
    validate_schema(specs_);
    if (rows_.rows() == 0) throw InvalidArgument("dataset must have at least one row");
    if (rows_.cols() != specs_.size()) {
      throw InvalidArgument("dataset: column count does not match schema");
    }
    if (labels_.size() != rows_.rows()) {
      throw InvalidArgument("dataset: label count does not match row count");
    }
    for (auto y : labels_) {
      if (y > 1) throw InvalidArgument("dataset: labels must be 0 or 1");
    }
    for (std::size_t c = 0; c < specs_.size(); ++c) {
      const bool cat = specs_[c].is_categorical();
      const auto ncat = static_cast<double>(specs_[c].categories.size());
      for (std::size_t r = 0; r < rows_.rows(); ++r) {
        const double v = rows_(r, c);
        if (!std::isfinite(v)) throw InvalidArgument("dataset: non-finite cell");
        if (cat && (v < 0 || v >= ncat || v != std::floor(v))) {
          throw InvalidArgument("dataset: invalid category index in column '" +
                                specs_[c].name + "'");
        }
      }
    }
  }

  std::size_t n() const noexcept { return rows_.rows(); }
  std::size_t p() const noexcept { return specs_.size(); }
  const Schema& specs() const noexcept { return specs_; }
  const Matrix& rows() const noexcept { return rows_; }
  const std::vector<Label>& labels() const noexcept { return labels_; }

  double at(std::size_t r, std::size_t c) const noexcept { return rows_(r, c); }
  std::size_t category(std::size_t r, std::size_t c) const noexcept {
    return static_cast<std::size_t>(rows_(r, c));
  }

  ClassCounts class_counts() const noexcept {
    ClassCounts cc;
    for (auto y : labels_) (y ? cc.positive : cc.negative)++;
    return cc;
  }

  /// Rows picked by index, in the given order (duplicates allowed).
  Dataset subset(std::span<const std::size_t> indices) const {
    Matrix m(indices.size(), p());
    std::vector<Label> y(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) {
      const auto src = rows_.row(indices[i]);
      std::copy(src.begin(), src.end(), m.row(i).begin());
      y[i] = labels_[indices[i]];
    }
    return Dataset(specs_, std::move(m), std::move(y));
  }

  Dataset with_rows(Matrix rows) const { return Dataset(specs_, std::move(rows), labels_); }

  friend bool operator==(const Dataset&, const Dataset&) = default;

 private:
  Schema specs_;
  Matrix rows_;
  std::vector<Label> labels_;
};

inline void require_same_schema(const Schema& expected, const Schema& actual,
                                std::string_view what) {
  if (expected != actual) {
    throw DataError(std::string(what) + ": feature schema does not match the fitted schema");
  }
}

// ---------------------------------------------------------------------------
// CSV

namespace detail {

/// RFC-4180 record reader. Quoted fields may contain separators, doubled
/// quotes and line breaks.
inline std::vector<std::vector<std::string>> parse_csv(std::istream& in) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  bool quoted_field = false;
  char ch;

  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_started = false;
    quoted_field = false;
  };
  auto end_record = [&] {
    end_field();
    if (!(record.size() == 1 && record.front().empty())) records.push_back(std::move(record));
    record.clear();
  };

  while (in.get(ch)) {
    if (in_quotes) {
      if (ch == '"') {
        if (in.peek() == '"') {
          in.get(ch);
          field.push_back('"');
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(ch);
      }
      continue;
    }
    switch (ch) {
      case '"':
        if (field_started) throw DataError("csv: stray quote inside unquoted field");
        in_quotes = true;
        quoted_field = true;
        field_started = true;
        break;
      case ',':
        end_field();
        break;
      case '\r':
        if (in.peek() == '\n') in.get(ch);
        end_record();
        break;
      case '\n':
        end_record();
        break;
      default:
        if (quoted_field) throw DataError("csv: characters after closing quote");
        field.push_back(ch);
        field_started = true;
    }
  }
  if (in_quotes) throw DataError("csv: unterminated quoted field");
  if (field_started || !record.empty()) end_record();
  return records;
}

inline std::optional<double> parse_real(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) {
    return std::nullopt;
  }
  return v;
}

inline std::string format_real(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

inline std::string quote_csv(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> body;
  std::size_t label_index = 0;
};

inline CsvTable read_table(const std::string& path, const std::string& label_column) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  auto records = parse_csv(in);
  if (records.empty()) throw DataError("'" + path + "' is empty");
  CsvTable t;
  t.header = std::move(records.front());
  t.body.assign(std::make_move_iterator(records.begin() + 1),
                std::make_move_iterator(records.end()));
  if (t.body.empty()) throw DataError("'" + path + "' has a header but no data rows");
  const auto it = std::find(t.header.begin(), t.header.end(), label_column);
  if (it == t.header.end()) {
    throw DataError("label column '" + label_column + "' not found in '" + path + "'");
  }
  t.label_index = static_cast<std::size_t>(it - t.header.begin());
  for (std::size_t r = 0; r < t.body.size(); ++r) {
    if (t.body[r].size() != t.header.size()) {
      throw DataError("row " + std::to_string(r + 2) + " has " +
                      std::to_string(t.body[r].size()) + " fields, expected " +
                      std::to_string(t.header.size()));
    }
    for (const auto& f : t.body[r]) {
      if (f.empty()) {
        throw DataError("row " + std::to_string(r + 2) + ": missing value");
      }
    }
  }
  return t;
}

inline std::vector<Label> read_labels(const CsvTable& t, const std::string& positive_label) {
  std::vector<std::string> distinct;
  std::vector<Label> labels;
  labels.reserve(t.body.size());
  for (const auto& rec : t.body) {
    const auto& v = rec[t.label_index];
    if (std::find(distinct.begin(), distinct.end(), v) == distinct.end()) distinct.push_back(v);
    labels.push_back(v == positive_label ? 1 : 0);
  }
  if (distinct.size() > 2) {
    throw DataError("label column must hold two distinct values, found " +
                    std::to_string(distinct.size()));
  }
  if (distinct.size() == 2 &&
      std::find(distinct.begin(), distinct.end(), positive_label) == distinct.end()) {
    throw DataError("positive label '" + positive_label + "' does not occur in label column");
  }
  return labels;
}

inline double read_continuous(const std::string& cell, std::size_t row, const std::string& col) {
  const auto v = parse_real(cell);
  if (!v) {
    throw DataError("row " + std::to_string(row + 2) + ": non-numeric value '" + cell +
                    "' in continuous column '" + col + "'");
  }
  return *v;
}

}  // namespace detail

/// Reads a CSV with a header row. Columns named in `categorical_columns`
/// become categorical features with categories in first-appearance order;
/// every other non-label column must be numeric. The label column may hold
/// at most two distinct values; `positive_label` maps to 1.
inline Dataset load_csv(const std::string& path, const std::string& label_column,
                        const std::string& positive_label,
                        const std::set<std::string>& categorical_columns = {}) {
  const auto t = detail::read_table(path, label_column);
  for (const auto& c : categorical_columns) {
    if (std::find(t.header.begin(), t.header.end(), c) == t.header.end()) {
      throw DataError("categorical column '" + c + "' not found in '" + path + "'");
    }
  }
  auto labels = detail::read_labels(t, positive_label);

  Schema specs;
  std::vector<std::size_t> source;
  for (std::size_t c = 0; c < t.header.size(); ++c) {
    if (c == t.label_index) continue;
    FeatureSpec s{t.header[c], categorical_columns.count(t.header[c])
                                   ? FeatureKind::Categorical
                                   : FeatureKind::Continuous,
                  {}};
    specs.push_back(std::move(s));
    source.push_back(c);
  }

  Matrix m(t.body.size(), specs.size());
  for (std::size_t f = 0; f < specs.size(); ++f) {
    auto& spec = specs[f];
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t r = 0; r < t.body.size(); ++r) {
      const auto& cell = t.body[r][source[f]];
      if (spec.is_categorical()) {
        auto [it, fresh] = index.try_emplace(cell, spec.categories.size());
        if (fresh) spec.categories.push_back(cell);
        m(r, f) = static_cast<double>(it->second);
      } else {
        m(r, f) = detail::read_continuous(cell, r, spec.name);
      }
    }
  }
  return Dataset(std::move(specs), std::move(m), std::move(labels));
}

/// Reads a CSV against an existing schema (e.g. a fitted model's). Columns
/// are matched by name; categorical cells must name a known category.
inline Dataset load_csv_with_schema(const std::string& path, const std::string& label_column,
                                    const std::string& positive_label, const Schema& schema) {
  const auto t = detail::read_table(path, label_column);
  auto labels = detail::read_labels(t, positive_label);

  Matrix m(t.body.size(), schema.size());
  for (std::size_t f = 0; f < schema.size(); ++f) {
    const auto& spec = schema[f];
    const auto it = std::find(t.header.begin(), t.header.end(), spec.name);
    if (it == t.header.end() || spec.name == label_column) {
      throw DataError("column '" + spec.name + "' required by the schema is missing");
    }
    const auto col = static_cast<std::size_t>(it - t.header.begin());
    for (std::size_t r = 0; r < t.body.size(); ++r) {
      const auto& cell = t.body[r][col];
      if (spec.is_categorical()) {
        const auto cat = std::find(spec.categories.begin(), spec.categories.end(), cell);
        if (cat == spec.categories.end()) {
          throw DataError("row " + std::to_string(r + 2) + ": unknown category '" + cell +
                          "' in column '" + spec.name + "'");
        }
        m(r, f) = static_cast<double>(cat - spec.categories.begin());
      } else {
        m(r, f) = detail::read_continuous(cell, r, spec.name);
      }
    }
  }
  return Dataset(schema, std::move(m), std::move(labels));
}

/// Writes features then a label column holding 0/1.
inline void write_csv(std::ostream& out, const Dataset& d,
                      const std::string& label_column = "class") {
  for (const auto& s : d.specs()) out << detail::quote_csv(s.name) << ',';
  out << detail::quote_csv(label_column) << '\n';
  for (std::size_t r = 0; r < d.n(); ++r) {
    for (std::size_t c = 0; c < d.p(); ++c) {
      const auto& s = d.specs()[c];
      if (s.is_categorical()) {
        out << detail::quote_csv(s.categories[d.category(r, c)]);
      } else {
        out << detail::format_real(d.at(r, c));
      }
      out << ',';
    }
    out << static_cast<int>(d.labels()[r]) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Min-max scaling

struct ColumnRange {
  std::size_t column = 0;
  double min = 0;
  double max = 0;

  friend bool operator==(const ColumnRange&, const ColumnRange&) = default;
};

/// Fitted per-column ranges. For a Dataset only continuous columns are
/// listed; for a plain matrix every column is.
struct ScalingParams {
  std::vector<ColumnRange> ranges;

  friend bool operator==(const ScalingParams&, const ScalingParams&) = default;
};

/// (x - min) / (max - min) clamped to [0, 1]; a degenerate range maps to 0.5.
inline double scale_value(double x, const ColumnRange& r) noexcept {
  if (r.max == r.min) return 0.5;
  return std::clamp((x - r.min) / (r.max - r.min), 0.0, 1.0);
}

inline ScalingParams min_max_fit(const Matrix& m) {
  if (m.rows() == 0) throw InvalidArgument("min_max_fit: no rows");
  ScalingParams s;
  for (std::size_t c = 0; c < m.cols(); ++c) {
    ColumnRange r{c, m(0, c), m(0, c)};
    for (std::size_t i = 1; i < m.rows(); ++i) {
      r.min = std::min(r.min, m(i, c));
      r.max = std::max(r.max, m(i, c));
    }
    s.ranges.push_back(r);
  }
  return s;
}

inline ScalingParams min_max_fit(const Dataset& d) {
  const auto all = min_max_fit(d.rows());
  ScalingParams s;
  for (std::size_t c = 0; c < d.p(); ++c) {
    if (!d.specs()[c].is_categorical()) s.ranges.push_back(all.ranges[c]);
  }
  return s;
}

inline Matrix min_max_apply(Matrix m, const ScalingParams& s) {
  for (const auto& r : s.ranges) {
    if (r.column >= m.cols()) throw DataError("min_max_apply: column out of range");
  }
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (const auto& r : s.ranges) m(i, r.column) = scale_value(m(i, r.column), r);
  }
  return m;
}

inline Dataset min_max_apply(const Dataset& d, const ScalingParams& s) {
  std::vector<std::size_t> continuous;
  for (std::size_t c = 0; c < d.p(); ++c) {
    if (!d.specs()[c].is_categorical()) continuous.push_back(c);
  }
  if (continuous.size() != s.ranges.size()) {
    throw DataError("min_max_apply: scaling was fitted on a different schema");
  }
  for (std::size_t k = 0; k < continuous.size(); ++k) {
    if (s.ranges[k].column != continuous[k]) {
      throw DataError("min_max_apply: scaling was fitted on a different schema");
    }
  }
  return d.with_rows(min_max_apply(d.rows(), s));
}

// ---------------------------------------------------------------------------
// Imbalance, splitting

inline constexpr double kImbalanceThreshold = 0.30;

/// Population standard deviation of the two class counts over their mean.
inline double imbalance_cv(const ClassCounts& cc) {
  if (cc.positive == 0 || cc.negative == 0) {
    throw InvalidArgument("imbalance_cv: both classes must be present");
  }
  const double a = static_cast<double>(cc.positive);
  const double b = static_cast<double>(cc.negative);
  const double mean = (a + b) / 2.0;
  const double sd = std::abs(a - b) / 2.0;
  return sd / mean;
}

inline double imbalance_cv(const Dataset& d) { return imbalance_cv(d.class_counts()); }

inline bool is_imbalanced(const Dataset& d) { return imbalance_cv(d) >= kImbalanceThreshold; }

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

struct TrainTest {
  Dataset train;
  Dataset test;
};

/// Per-class shuffle; round(train_fraction * class_size) rows of each class
/// go to the training side. Index lists come back sorted.
inline SplitIndices stratified_split_indices(const Dataset& d, double train_fraction,
                                             std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw InvalidArgument("stratified_split: train_fraction must lie in (0, 1)");
  }
  Rng rng(seed);
  SplitIndices out;
  for (Label cls : {Label{0}, Label{1}}) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < d.n(); ++i) {
      if (d.labels()[i] == cls) members.push_back(i);
    }
    if (members.empty()) continue;
    const auto take =
        static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(members.size())));
    if (take == 0 || take == members.size()) {
      throw InvalidArgument("stratified_split: class " + std::to_string(cls) + " with " +
                            std::to_string(members.size()) +
                            " rows cannot appear on both sides");
    }
    rng.shuffle(members);
    out.train.insert(out.train.end(), members.begin(), members.begin() + take);
    out.test.insert(out.test.end(), members.begin() + take, members.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

inline TrainTest stratified_split(const Dataset& d, double train_fraction, std::uint64_t seed) {
  const auto idx = stratified_split_indices(d, train_fraction, seed);
  return {d.subset(idx.train), d.subset(idx.test)};
}

inline constexpr std::size_t kDefaultRepetitions = 5;
inline constexpr double kDefaultTrainFraction = 0.7;

inline std::uint64_t repetition_seed(std::uint64_t seed, std::size_t repetition) noexcept {
  return repetition == 0 ? seed : derive_seed(seed, repetition);
}

/// Repeated stratified hold-out: `repetitions` independent splits. The first
/// repetition uses `seed` itself, later ones derived seeds.
inline std::vector<SplitIndices> repeated_eval_indices(const Dataset& d,
                                                       std::size_t repetitions = kDefaultRepetitions,
                                                       double train_fraction = kDefaultTrainFraction,
                                                       std::uint64_t seed = 0) {
  if (repetitions < 1) throw InvalidArgument("repeated_eval_protocol: repetitions must be >= 1");
  std::vector<SplitIndices> out;
  out.reserve(repetitions);
  for (std::size_t r = 0; r < repetitions; ++r) {
    out.push_back(stratified_split_indices(d, train_fraction, repetition_seed(seed, r)));
  }
  return out;
}

inline std::vector<TrainTest> repeated_eval_protocol(const Dataset& d,
                                                     std::size_t repetitions = kDefaultRepetitions,
                                                     double train_fraction = kDefaultTrainFraction,
                                                     std::uint64_t seed = 0) {
  std::vector<TrainTest> out;
  for (const auto& idx : repeated_eval_indices(d, repetitions, train_fraction, seed)) {
    out.push_back({d.subset(idx.train), d.subset(idx.test)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic data

struct SynthConfig {
  std::size_t n = 1000;
  std::size_t informative = 5;
  std::size_t noise = 5;
  double minority_fraction = 0.2;
  std::uint64_t seed = 0;
  /// Distance between the two class means on each informative feature.
  double separation = 0.8;
};

/// Gaussian features with unit spread. Informative feature j has class means
/// +-separation/2 (sign alternating with j); noise features are N(0, 1) for
/// both classes. round(n * minority_fraction) rows are positive, placed at
/// random positions.
inline Dataset synth_generate(const SynthConfig& cfg) {
  if (cfg.n < 10) throw InvalidArgument("synth_generate: n must be >= 10");
  if (!(cfg.minority_fraction > 0.0 && cfg.minority_fraction < 0.5)) {
    throw InvalidArgument("synth_generate: minority_fraction must lie in (0, 0.5)");
  }
  if (cfg.informative + cfg.noise == 0) {
    throw InvalidArgument("synth_generate: need at least one feature");
  }
  if (!(cfg.separation >= 0.0) || !std::isfinite(cfg.separation)) {
    throw InvalidArgument("synth_generate: separation must be finite and >= 0");
  }
  Rng rng(cfg.seed);
  const auto n_pos = static_cast<std::size_t>(
      std::llround(cfg.minority_fraction * static_cast<double>(cfg.n)));
  std::vector<Label> labels(cfg.n, 0);
  std::fill(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(n_pos), Label{1});
  rng.shuffle(labels);

  Schema specs;
  for (std::size_t j = 0; j < cfg.informative; ++j) {
    specs.push_back({"inf" + std::to_string(j + 1), FeatureKind::Continuous, {}});
  }
  for (std::size_t j = 0; j < cfg.noise; ++j) {
    specs.push_back({"noise" + std::to_string(j + 1), FeatureKind::Continuous, {}});
  }

  Matrix m(cfg.n, specs.size());
  for (std::size_t i = 0; i < cfg.n; ++i) {
    for (std::size_t j = 0; j < specs.size(); ++j) {
      double v = rng.normal();
      if (j < cfg.informative) {
        const double sign = (j % 2 == 0) ? 1.0 : -1.0;
        v += sign * (labels[i] ? 0.5 : -0.5) * cfg.separation;
      }
      m(i, j) = v;
    }
  }
  return Dataset(std::move(specs), std::move(m), std::move(labels));
}

// ---------------------------------------------------------------------------
// JSON

NLOHMANN_JSON_SERIALIZE_ENUM(FeatureKind, {{FeatureKind::Continuous, "continuous"},
                                           {FeatureKind::Categorical, "categorical"}})

inline void to_json(nlohmann::ordered_json& j, const FeatureSpec& s) {
  j = nlohmann::ordered_json{{"name", s.name}, {"kind", s.kind}};
  if (s.is_categorical()) j["categories"] = s.categories;
}

inline void from_json(const nlohmann::ordered_json& j, FeatureSpec& s) {
  j.at("name").get_to(s.name);
  j.at("kind").get_to(s.kind);
  s.categories.clear();
  if (j.contains("categories")) j.at("categories").get_to(s.categories);
}

inline void to_json(nlohmann::ordered_json& j, const ColumnRange& r) {
  j = nlohmann::ordered_json{{"column", r.column}, {"min", r.min}, {"max", r.max}};
}

inline void from_json(const nlohmann::ordered_json& j, ColumnRange& r) {
  j.at("column").get_to(r.column);
  j.at("min").get_to(r.min);
  j.at("max").get_to(r.max);
  if (!(r.max >= r.min)) throw DataError("scaling range with max < min");
}

inline void to_json(nlohmann::ordered_json& j, const ScalingParams& s) {
  j = nlohmann::ordered_json{{"ranges", s.ranges}};
}

inline void from_json(const nlohmann::ordered_json& j, ScalingParams& s) {
  j.at("ranges").get_to(s.ranges);
}

}  // namespace iec::data
