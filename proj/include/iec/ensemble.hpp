#pragma once

// Imbalanced Ensemble Classifier: an HDDT picks the informative features,
// its own prediction is appended to them as one more input column, and a
// one-hidden-layer network is trained on the result.
//
//   fit:     grow tree -> select features -> augment -> min-max -> train net
//   predict: augment -> scale (clamped) -> 1/2-threshold classify

#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

#include "iec/ann.hpp"
#include "iec/common.hpp"
#include "iec/dataset.hpp"
#include "iec/hddt.hpp"

namespace iec::ensemble {

using data::Dataset;

inline constexpr int kModelVersion = 1;
inline constexpr const char* kModelFormat = "iec-model";

/// Width after one-hot expansion of the categorical features in `selected`.
inline std::size_t expanded_width(const data::Schema& specs,
                                  std::span<const std::size_t> selected) {
  std::size_t w = 0;
  for (auto f : selected) {
    if (f >= specs.size()) throw InvalidArgument("feature index out of range");
    w += specs[f].is_categorical() ? specs[f].categories.size() : 1;
  }
  return w;
}

/// Network inputs for `selected` features, in the given order; categorical
/// features expand to one indicator column per category.
inline Matrix encode_features(const Dataset& rows, std::span<const std::size_t> selected) {
  if (selected.empty()) throw InvalidArgument("encode_features: empty feature selection");
  const auto& specs = rows.specs();
  Matrix out(rows.n(), expanded_width(specs, selected));
  for (std::size_t r = 0; r < rows.n(); ++r) {
    std::size_t col = 0;
    for (auto f : selected) {
      if (specs[f].is_categorical()) {
        out(r, col + rows.category(r, f)) = 1.0;
        col += specs[f].categories.size();
      } else {
        out(r, col++) = rows.at(r, f);
      }
    }
  }
  return out;
}

/// encode_features(rows, selected) followed by one column holding the
/// tree's predicted label (OP).
inline Matrix augment(const Dataset& rows, const hddt::HddtModel& tree,
                      std::span<const std::size_t> selected) {
  data::require_same_schema(tree.specs, rows.specs(), "augment");
  const Matrix features = encode_features(rows, selected);
  const auto op = hddt::predict(tree, rows);
  Matrix out(rows.n(), features.cols() + 1);
  for (std::size_t r = 0; r < rows.n(); ++r) {
    const auto src = features.row(r);
    auto dst = out.row(r);
    std::copy(src.begin(), src.end(), dst.begin());
    dst.back() = static_cast<double>(op[r]);
  }
  return out;
}

struct IecModel {
  hddt::HddtModel tree;
  std::vector<std::size_t> selected_features;
  data::ScalingParams scaling;  // over the augmented matrix
  ann::MlpModel net;
  std::size_t d_m = 0;
  std::size_t n_train = 0;

  friend bool operator==(const IecModel&, const IecModel&) = default;
};

namespace detail {

inline std::vector<std::size_t> all_features(std::size_t p) {
  std::vector<std::size_t> out(p);
  for (std::size_t i = 0; i < p; ++i) out[i] = i;
  return out;
}

inline void require_both_classes(const Dataset& d, const char* who) {
  const auto cc = d.class_counts();
  if (cc.positive == 0 || cc.negative == 0) {
    throw InvalidArgument(std::string(who) + ": training data must contain both classes");
  }
}

inline void check_invariants(const IecModel& m) {
  const auto width = expanded_width(m.tree.specs, m.selected_features);
  if (m.selected_features.empty() || m.d_m != width + 1) {
    throw DataError("iec model: d_m does not match the selected features");
  }
  if (m.net.input_dim != m.d_m ||
      m.net.hidden_count != ann::hidden_neuron_count(m.n_train, m.d_m)) {
    throw DataError("iec model: network shape does not match d_m / n_train");
  }
  if (m.scaling.ranges.size() != m.d_m) {
    throw DataError("iec model: scaling does not cover the augmented matrix");
  }
  for (std::size_t c = 0; c < m.d_m; ++c) {
    if (m.scaling.ranges[c].column != c) throw DataError("iec model: scaling column order");
  }
}

}  // namespace detail

/// Runs the full pipeline on `train`. If the tree never splits (no feature
/// has positive importance) every raw feature is kept and OP is the root
/// leaf's constant label.
inline IecModel fit(const Dataset& train, const hddt::TreeConfig& tree_config = {},
                    const ann::TrainConfig& train_config = {}) {
  detail::require_both_classes(train, "iec fit");
  if (train.n() < 3) throw InvalidArgument("iec fit: need at least 3 training rows");
  train_config.validate();

  IecModel m;
  m.tree = hddt::grow_tree(train, tree_config);
  m.selected_features = hddt::select_features(m.tree);
  if (m.selected_features.empty()) m.selected_features = detail::all_features(train.p());

  const Matrix augmented = augment(train, m.tree, m.selected_features);
  m.d_m = augmented.cols();
  m.n_train = train.n();
  m.scaling = data::min_max_fit(augmented);
  const Matrix inputs = data::min_max_apply(augmented, m.scaling);
  const auto k = ann::hidden_neuron_count(m.n_train, m.d_m);
  m.net = ann::train(inputs, train.labels(), k, train_config);
  return m;
}

/// Scaled network inputs for `rows`; exposed so callers can inspect them.
inline Matrix network_inputs(const IecModel& m, const Dataset& rows) {
  return data::min_max_apply(augment(rows, m.tree, m.selected_features), m.scaling);
}

inline std::vector<Label> predict(const IecModel& m, const Dataset& rows) {
  return ann::classify(m.net, network_inputs(m, rows));
}

// ---------------------------------------------------------------------------
// Network-only baseline: every raw feature (one-hot), min-max scaled, same
// hidden-width rule and training.

struct AnnOnlyModel {
  data::Schema specs;
  data::ScalingParams scaling;
  ann::MlpModel net;

  friend bool operator==(const AnnOnlyModel&, const AnnOnlyModel&) = default;
};

inline AnnOnlyModel fit_ann_only(const Dataset& train, const ann::TrainConfig& train_config = {}) {
  detail::require_both_classes(train, "ann-only fit");
  if (train.n() < 3) throw InvalidArgument("ann-only fit: need at least 3 training rows");
  AnnOnlyModel m;
  m.specs = train.specs();
  const Matrix encoded = encode_features(train, detail::all_features(train.p()));
  m.scaling = data::min_max_fit(encoded);
  const Matrix inputs = data::min_max_apply(encoded, m.scaling);
  const auto k = ann::hidden_neuron_count(train.n(), inputs.cols());
  m.net = ann::train(inputs, train.labels(), k, train_config);
  return m;
}

inline std::vector<Label> predict(const AnnOnlyModel& m, const Dataset& rows) {
  data::require_same_schema(m.specs, rows.specs(), "ann-only predict");
  const Matrix encoded = encode_features(rows, detail::all_features(rows.p()));
  return ann::classify(m.net, data::min_max_apply(encoded, m.scaling));
}

// ---------------------------------------------------------------------------
// JSON

inline void to_json(nlohmann::ordered_json& j, const IecModel& m) {
  j = nlohmann::ordered_json{{"format", kModelFormat},
                             {"version", kModelVersion},
                             {"n_train", m.n_train},
                             {"d_m", m.d_m},
                             {"selected_features", m.selected_features},
                             {"tree", m.tree},
                             {"scaling", m.scaling},
                             {"net", m.net}};
}

inline void from_json(const nlohmann::ordered_json& j, IecModel& m) {
  if (j.value("format", std::string{}) != kModelFormat) {
    throw DataError("not an iec model document");
  }
  if (j.at("version").get<int>() != kModelVersion) {
    throw DataError("unsupported iec model version " + j.at("version").dump());
  }
  j.at("n_train").get_to(m.n_train);
  j.at("d_m").get_to(m.d_m);
  j.at("selected_features").get_to(m.selected_features);
  j.at("tree").get_to(m.tree);
  j.at("scaling").get_to(m.scaling);
  j.at("net").get_to(m.net);
  try {
    detail::check_invariants(m);
  } catch (const InvalidArgument& e) {
    throw DataError(e.what());
  }
}

}  // namespace iec::ensemble
