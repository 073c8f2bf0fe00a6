#pragma once

// Hellinger Distance Decision Tree.
//
// A node's split is scored by the Hellinger distance between the
// positive-class and negative-class distributions over the split's
// partitions:
//
//   d_H = sqrt( sum_j ( sqrt(|X+j| / |X+|) - sqrt(|X-j| / |X-|) )^2 )
//
// Only within-class proportions enter the score, so it does not move when
// the class priors change. Trees are grown unpruned.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include <json.hpp>

#include "iec/common.hpp"
#include "iec/dataset.hpp"

namespace iec::hddt {

using data::ClassCounts;
using data::Dataset;

/// Upper bound of the Hellinger split score.
inline const double kMaxScore = std::sqrt(2.0);

/// Scores within this distance of the best one are treated as ties and
/// resolved by candidate order.
inline constexpr double kTieTolerance = 1e-12;

/// Hellinger distance between the class-conditional distributions over
/// `partitions`. Requires K >= 2 and both classes present overall.
inline double hellinger_split_score(std::span<const ClassCounts> partitions) {
  if (partitions.size() < 2) {
    throw InvalidArgument("hellinger_split_score: need at least two partitions");
  }
  std::size_t total_pos = 0;
  std::size_t total_neg = 0;
  for (const auto& p : partitions) {
    total_pos += p.positive;
    total_neg += p.negative;
  }
  if (total_pos == 0 || total_neg == 0) {
    throw InvalidArgument("hellinger_split_score: both classes must be present");
  }
  const double pos = static_cast<double>(total_pos);
  const double neg = static_cast<double>(total_neg);
  double sum = 0.0;
  for (const auto& p : partitions) {
    const double d = std::sqrt(static_cast<double>(p.positive) / pos) -
                     std::sqrt(static_cast<double>(p.negative) / neg);
    sum += d * d;
  }
  return std::min(std::sqrt(sum), kMaxScore);
}

struct NumericThreshold {
  double threshold = 0;
  friend bool operator==(const NumericThreshold&, const NumericThreshold&) = default;
};

/// K-way split; child i receives rows whose category is categories[i].
struct CategoricalPartition {
  std::vector<std::size_t> categories;
  friend bool operator==(const CategoricalPartition&, const CategoricalPartition&) = default;
};

struct SplitCandidate {
  std::size_t feature_index = 0;
  std::variant<NumericThreshold, CategoricalPartition> rule;
  double hd_score = 0;

  bool is_numeric() const noexcept { return std::holds_alternative<NumericThreshold>(rule); }
  double threshold() const { return std::get<NumericThreshold>(rule).threshold; }
  const std::vector<std::size_t>& categories() const {
    return std::get<CategoricalPartition>(rule).categories;
  }

  friend bool operator==(const SplitCandidate&, const SplitCandidate&) = default;
};

struct TreeNode {
  ClassCounts counts;
  Label label = 0;  // majority of counts, ties go to 1
  std::optional<SplitCandidate> split;
  std::vector<TreeNode> children;

  bool is_leaf() const noexcept { return !split.has_value(); }

  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct TreeConfig {
  std::size_t min_leaf = 1;
  std::optional<std::size_t> max_depth;  // unlimited when empty
};

struct HddtModel {
  TreeNode root;
  std::vector<double> importances;
  data::Schema specs;

  friend bool operator==(const HddtModel&, const HddtModel&) = default;
};

inline Label majority_label(const ClassCounts& c) noexcept {
  return c.positive >= c.negative ? Label{1} : Label{0};
}

namespace detail {

struct ScoredThreshold {
  double threshold;
  double score;
};

/// Midpoint between adjacent distinct values a < b, kept strictly inside.
inline double midpoint(double a, double b) noexcept {
  const double m = a + (b - a) / 2.0;
  return (m > a && m < b) ? m : a;
}

/// Index of the first entry whose score is within kTieTolerance of the max.
template <class Range, class Score>
std::size_t first_best(const Range& items, Score score) {
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& it : items) best = std::max(best, score(it));
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (score(items[i]) >= best - kTieTolerance) return i;
  }
  return 0;
}

/// Scores every midpoint threshold over (value, label) pairs sorted by value.
inline std::vector<ScoredThreshold> scan_thresholds(std::vector<std::pair<double, Label>> pairs,
                                                    std::size_t min_leaf) {
  std::sort(pairs.begin(), pairs.end(), [](const auto& a, const auto& b) {
    return a.first < b.first || (a.first == b.first && a.second < b.second);
  });
  ClassCounts total;
  for (const auto& [v, y] : pairs) (y ? total.positive : total.negative)++;
  std::vector<ScoredThreshold> out;
  if (total.positive == 0 || total.negative == 0) return out;

  ClassCounts left;
  for (std::size_t i = 0; i + 1 < pairs.size(); ++i) {
    (pairs[i].second ? left.positive : left.negative)++;
    if (pairs[i].first == pairs[i + 1].first) continue;
    const std::size_t n_left = i + 1;
    if (n_left < min_leaf || pairs.size() - n_left < min_leaf) continue;
    const ClassCounts parts[2] = {
        left, {total.positive - left.positive, total.negative - left.negative}};
    out.push_back({midpoint(pairs[i].first, pairs[i + 1].first), hellinger_split_score(parts)});
  }
  return out;
}

inline std::optional<SplitCandidate> numeric_candidate(std::vector<std::pair<double, Label>> pairs,
                                                       std::size_t feature, std::size_t min_leaf) {
  const auto scored = scan_thresholds(std::move(pairs), min_leaf);
  if (scored.empty()) return std::nullopt;
  const auto& best = scored[first_best(scored, [](const auto& s) { return s.score; })];
  return SplitCandidate{feature, NumericThreshold{best.threshold}, best.score};
}

/// K-way partition over the categories observed in `indices`.
inline std::optional<SplitCandidate> categorical_candidate(std::span<const std::size_t> cats,
                                                           std::span<const Label> labels,
                                                           std::size_t category_count,
                                                           std::size_t feature,
                                                           std::size_t min_leaf) {
  std::vector<ClassCounts> per(category_count);
  for (std::size_t i = 0; i < cats.size(); ++i) {
    if (cats[i] >= category_count) {
      throw InvalidArgument("best_split_categorical: category index out of range");
    }
    (labels[i] ? per[cats[i]].positive : per[cats[i]].negative)++;
  }
  CategoricalPartition part;
  std::vector<ClassCounts> parts;
  ClassCounts total;
  for (std::size_t c = 0; c < category_count; ++c) {
    if (per[c].total() == 0) continue;
    if (per[c].total() < min_leaf) return std::nullopt;
    part.categories.push_back(c);
    parts.push_back(per[c]);
    total.positive += per[c].positive;
    total.negative += per[c].negative;
  }
  if (parts.size() < 2 || total.positive == 0 || total.negative == 0) return std::nullopt;
  const double score = hellinger_split_score(parts);
  return SplitCandidate{feature, std::move(part), score};
}

/// Child index for `row`, or none for a category the split never saw.
inline std::optional<std::size_t> route_split(const SplitCandidate& split,
                                              std::span<const double> row) {
  const double v = row[split.feature_index];
  if (split.is_numeric()) return v <= split.threshold() ? 0 : 1;
  const auto& cats = split.categories();
  const auto it = std::find(cats.begin(), cats.end(), static_cast<std::size_t>(v));
  if (it == cats.end()) return std::nullopt;
  return static_cast<std::size_t>(it - cats.begin());
}

inline std::size_t route(const TreeNode& node, std::span<const double> row) {
  if (auto child = route_split(*node.split, row)) return *child;
  // Category never seen at this node: follow the most populous child.
  std::size_t best = 0;
  for (std::size_t i = 1; i < node.children.size(); ++i) {
    if (node.children[i].counts.total() > node.children[best].counts.total()) best = i;
  }
  return best;
}

class Grower {
 public:
  Grower(const Dataset& d, const TreeConfig& cfg)
      : d_(d), cfg_(cfg), total_(d.class_counts()), importances_(d.p(), 0.0) {}

  HddtModel run() {
    std::vector<std::size_t> all(d_.n());
    std::iota(all.begin(), all.end(), 0);
    TreeNode root = grow(all, 0);
    return HddtModel{std::move(root), std::move(importances_), d_.specs()};
  }

 private:
  ClassCounts count(std::span<const std::size_t> idx) const {
    ClassCounts c;
    for (auto i : idx) (d_.labels()[i] ? c.positive : c.negative)++;
    return c;
  }

  std::optional<SplitCandidate> best_split(std::span<const std::size_t> idx) const {
    std::vector<SplitCandidate> per_feature;
    std::vector<Label> labels(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) labels[i] = d_.labels()[idx[i]];
    for (std::size_t f = 0; f < d_.p(); ++f) {
      std::optional<SplitCandidate> c;
      const auto& spec = d_.specs()[f];
      if (spec.is_categorical()) {
        std::vector<std::size_t> cats(idx.size());
        for (std::size_t i = 0; i < idx.size(); ++i) cats[i] = d_.category(idx[i], f);
        c = categorical_candidate(cats, labels, spec.categories.size(), f, cfg_.min_leaf);
      } else {
        std::vector<std::pair<double, Label>> pairs(idx.size());
        for (std::size_t i = 0; i < idx.size(); ++i) pairs[i] = {d_.at(idx[i], f), labels[i]};
        c = numeric_candidate(std::move(pairs), f, cfg_.min_leaf);
      }
      if (c && c->hd_score > 0.0) per_feature.push_back(std::move(*c));
    }
    if (per_feature.empty()) return std::nullopt;
    return per_feature[first_best(per_feature, [](const auto& s) { return s.hd_score; })];
  }

  TreeNode grow(const std::vector<std::size_t>& idx, std::size_t depth) {
    TreeNode node;
    node.counts = count(idx);
    node.label = majority_label(node.counts);
    const bool pure = node.counts.positive == 0 || node.counts.negative == 0;
    const bool depth_hit = cfg_.max_depth && depth >= *cfg_.max_depth;
    if (pure || depth_hit || idx.size() < 2 * cfg_.min_leaf) return node;

    auto split = best_split(idx);
    if (!split) return node;

    std::size_t arity = split->is_numeric() ? 2 : split->categories().size();
    std::vector<std::vector<std::size_t>> parts(arity);
    // Every category in the split was observed here, so routing is exact.
    for (auto i : idx) parts[*route_split(*split, d_.rows().row(i))].push_back(i);

    // Class-balanced node mass keeps importances prior-free like the score.
    const double mass =
        0.5 * (static_cast<double>(node.counts.positive) / static_cast<double>(total_.positive) +
               static_cast<double>(node.counts.negative) / static_cast<double>(total_.negative));
    importances_[split->feature_index] += mass * split->hd_score;

    node.split = std::move(split);
    for (const auto& part : parts) node.children.push_back(grow(part, depth + 1));
    return node;
  }

  const Dataset& d_;
  TreeConfig cfg_;
  ClassCounts total_;
  std::vector<double> importances_;
};

}  // namespace detail

/// Best binary threshold on one numeric feature, or none when the values
/// are all equal or a class is missing. Ties resolve to the lowest threshold.
inline std::optional<SplitCandidate> best_split_numeric(std::span<const double> values,
                                                        std::span<const Label> labels) {
  if (values.size() != labels.size()) {
    throw InvalidArgument("best_split_numeric: values and labels differ in length");
  }
  std::vector<std::pair<double, Label>> pairs(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) pairs[i] = {values[i], labels[i]};
  return detail::numeric_candidate(std::move(pairs), 0, 1);
}

/// K-way split over the observed categories, or none if fewer than two
/// categories (or one class) are observed.
inline std::optional<SplitCandidate> best_split_categorical(std::span<const std::size_t> values,
                                                            std::span<const Label> labels,
                                                            std::size_t category_count) {
  if (values.size() != labels.size()) {
    throw InvalidArgument("best_split_categorical: values and labels differ in length");
  }
  if (category_count < 2) {
    throw InvalidArgument("best_split_categorical: category_count must be >= 2");
  }
  return detail::categorical_candidate(values, labels, category_count, 0, 1);
}

/// Grows an unpruned tree. A node becomes a leaf when it is pure, sits at
/// max_depth, holds fewer than 2 * min_leaf rows, or has no split with a
/// positive score. The split with the highest score wins; ties go to the
/// lower feature index, then the lower threshold.
///
/// importances[f] accumulates, over nodes splitting on f, the node's
/// class-balanced mass (pos_at_node/|X+| + neg_at_node/|X-|) / 2 times its
/// score.
inline HddtModel grow_tree(const Dataset& train, const TreeConfig& config = {}) {
  if (config.min_leaf < 1) throw InvalidArgument("grow_tree: min_leaf must be >= 1");
  return detail::Grower(train, config).run();
}

inline Label predict_row(const HddtModel& model, std::span<const double> row) {
  if (row.size() != model.specs.size()) {
    throw DataError("hddt predict: row width does not match the model schema");
  }
  const TreeNode* node = &model.root;
  while (!node->is_leaf()) node = &node->children[detail::route(*node, row)];
  return node->label;
}

inline std::vector<Label> predict(const HddtModel& model, const Dataset& rows) {
  data::require_same_schema(model.specs, rows.specs(), "hddt predict");
  std::vector<Label> out(rows.n());
  for (std::size_t i = 0; i < rows.n(); ++i) out[i] = predict_row(model, rows.rows().row(i));
  return out;
}

/// Features with positive importance, most important first (ties by index).
inline std::vector<std::size_t> select_features(const HddtModel& model) {
  std::vector<std::size_t> out;
  for (std::size_t f = 0; f < model.importances.size(); ++f) {
    if (model.importances[f] > 0.0) out.push_back(f);
  }
  std::stable_sort(out.begin(), out.end(), [&](std::size_t a, std::size_t b) {
    return model.importances[a] > model.importances[b];
  });
  return out;
}

/// Visits every node depth-first, parents before children.
template <class Fn>
void for_each_node(const TreeNode& node, Fn&& fn, std::size_t depth = 0) {
  fn(node, depth);
  for (const auto& child : node.children) for_each_node(child, fn, depth + 1);
}

inline std::size_t depth(const TreeNode& node) {
  std::size_t d = 0;
  for_each_node(node, [&](const TreeNode&, std::size_t k) { d = std::max(d, k); });
  return d;
}

// ---------------------------------------------------------------------------
// JSON

inline void to_json(nlohmann::ordered_json& j, const TreeNode& n) {
  j = nlohmann::ordered_json::object();
  j["kind"] = n.is_leaf() ? "leaf" : "internal";
  j["counts"] = {n.counts.positive, n.counts.negative};
  j["label"] = n.label;
  if (n.is_leaf()) return;
  auto& s = j["split"];
  s["feature"] = n.split->feature_index;
  if (n.split->is_numeric()) {
    s["type"] = "threshold";
    s["threshold"] = n.split->threshold();
  } else {
    s["type"] = "categorical";
    s["categories"] = n.split->categories();
  }
  s["score"] = n.split->hd_score;
  j["children"] = n.children;
}

inline void from_json(const nlohmann::ordered_json& j, TreeNode& n) {
  const auto counts = j.at("counts").get<std::vector<std::size_t>>();
  if (counts.size() != 2) throw DataError("tree node: counts must have two entries");
  n.counts = {counts[0], counts[1]};
  n.label = j.at("label").get<Label>();
  n.split.reset();
  n.children.clear();
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "leaf") return;
  if (kind != "internal") throw DataError("tree node: unknown kind '" + kind + "'");
  const auto& s = j.at("split");
  SplitCandidate split;
  s.at("feature").get_to(split.feature_index);
  s.at("score").get_to(split.hd_score);
  const auto type = s.at("type").get<std::string>();
  if (type == "threshold") {
    split.rule = NumericThreshold{s.at("threshold").get<double>()};
  } else if (type == "categorical") {
    split.rule = CategoricalPartition{s.at("categories").get<std::vector<std::size_t>>()};
  } else {
    throw DataError("tree node: unknown split type '" + type + "'");
  }
  n.split = std::move(split);
  j.at("children").get_to(n.children);
  const std::size_t arity = n.split->is_numeric() ? 2 : n.split->categories().size();
  if (n.children.size() != arity || arity < 2) {
    throw DataError("tree node: child count does not match split");
  }
}

inline void to_json(nlohmann::ordered_json& j, const HddtModel& m) {
  j = nlohmann::ordered_json{
      {"specs", m.specs}, {"importances", m.importances}, {"root", m.root}};
}

inline void from_json(const nlohmann::ordered_json& j, HddtModel& m) {
  j.at("specs").get_to(m.specs);
  data::validate_schema(m.specs);
  j.at("importances").get_to(m.importances);
  j.at("root").get_to(m.root);
  if (m.importances.size() != m.specs.size()) {
    throw DataError("hddt model: importances do not match schema width");
  }
  for_each_node(m.root, [&](const TreeNode& node, std::size_t) {
    if (!node.is_leaf() && node.split->feature_index >= m.specs.size()) {
      throw DataError("hddt model: split feature out of range");
    }
  });
}

}  // namespace iec::hddt
