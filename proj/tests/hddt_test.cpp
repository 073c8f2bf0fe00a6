#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "iec/hddt.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace iec;
using namespace iec::hddt;
using iec::data::ClassCounts;
using iec::data::Dataset;
using iec::data::FeatureKind;

namespace {

const double kSqrt2 = std::sqrt(2.0);

double score(std::initializer_list<ClassCounts> parts) {
  const std::vector<ClassCounts> v(parts);
  return hellinger_split_score(v);
}

/// Structure only: splits and thresholds, not counts or leaf labels.
bool same_structure(const TreeNode& a, const TreeNode& b) {
  if (a.is_leaf() != b.is_leaf()) return false;
  if (a.is_leaf()) return true;
  if (a.split->feature_index != b.split->feature_index || a.split->rule != b.split->rule ||
      a.split->hd_score != b.split->hd_score || a.children.size() != b.children.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.children.size(); ++i) {
    if (!same_structure(a.children[i], b.children[i])) return false;
  }
  return true;
}

Dataset eight_rows() {
  // Root splits on x0 at 4.5; the right child splits on x1 at 3.
  return testutil::continuous({{1, 5}, {2, 3}, {3, 8}, {4, 1}, {5, 6}, {6, 7}, {7, 2}, {8, 4}},
                              {0, 0, 0, 0, 1, 1, 0, 1});
}

}  // namespace

// --- hellinger_split_score ----------------------------------------------------

TEST(HellingerScore, PerfectSeparationIsSqrt2) {
  for (std::size_t p = 1; p < 10; ++p) {
    for (std::size_t n = 1; n < 10; ++n) {
      EXPECT_DOUBLE_EQ(score({{p, 0}, {0, n}}), kSqrt2);
    }
  }
}

TEST(HellingerScore, ProportionPreservingIsZero) {
  EXPECT_EQ(score({{2, 1}, {2, 1}}), 0.0);
  EXPECT_EQ(score({{3, 6}, {1, 2}, {5, 10}}), 0.0);
}

TEST(HellingerScore, HandEvaluatedCases) {
  // sqrt((sqrt(3/4) - sqrt(1/2))^2 + (sqrt(1/4) - sqrt(1/2))^2)
  EXPECT_NEAR(score({{3, 1}, {1, 1}}), 0.26105238444010315, 1e-15);
  // K = 3, counts (2,0),(1,1),(0,2): sqrt(2/3 + 0 + 2/3)
  EXPECT_NEAR(score({{2, 0}, {1, 1}, {0, 2}}), 1.1547005383792515, 1e-15);
}

TEST(HellingerScore, Errors) {
  EXPECT_THROW(score({{3, 3}}), InvalidArgument);
  EXPECT_THROW(score({{3, 0}, {2, 0}}), InvalidArgument);
  EXPECT_THROW(score({{0, 3}, {0, 2}}), InvalidArgument);
}

TEST(HellingerScore, BoundedAndMaximalIffPure) {
  Rng rng(11);
  for (int t = 0; t < 2000; ++t) {
    const std::size_t k = 2 + rng.below(4);
    std::vector<ClassCounts> parts(k);
    std::vector<std::pair<int, int>> ref(k);
    std::size_t tp = 0, tn = 0;
    bool pure = true;
    for (std::size_t j = 0; j < k; ++j) {
      parts[j] = {rng.below(6), rng.below(6)};
      tp += parts[j].positive;
      tn += parts[j].negative;
      pure = pure && (parts[j].positive == 0 || parts[j].negative == 0);
      ref[j] = {static_cast<int>(parts[j].positive), static_cast<int>(parts[j].negative)};
    }
    if (tp == 0 || tn == 0) continue;
    const double s = hellinger_split_score(parts);
    ASSERT_GE(s, 0.0);
    ASSERT_LE(s, kSqrt2);
    ASSERT_NEAR(s, oracle::hellinger(ref), 1e-12);
    ASSERT_EQ(std::abs(s - kSqrt2) < 1e-12, pure);
  }
}

// --- best_split_numeric -------------------------------------------------------

TEST(BestSplitNumeric, Examples) {
  const std::vector<double> v{1, 2, 3, 4};
  const std::vector<Label> y{1, 1, 0, 0};
  const auto s = best_split_numeric(v, y);
  ASSERT_TRUE(s);
  EXPECT_EQ(s->threshold(), 2.5);
  EXPECT_DOUBLE_EQ(s->hd_score, kSqrt2);

  const std::vector<double> two{1, 2};
  const std::vector<Label> y2{1, 0};
  EXPECT_EQ(best_split_numeric(two, y2)->threshold(), 1.5);

  const std::vector<double> same{3, 3, 3};
  const std::vector<Label> y3{1, 0, 1};
  EXPECT_FALSE(best_split_numeric(same, y3));
}

TEST(BestSplitNumeric, MatchesBruteForceOverMidpoints) {
  // [1,2,3,4] / [1,1,0,0]: candidates 1.5, 2.5, 3.5
  const std::vector<double> v{4, 1, 3, 2};
  const std::vector<Label> y{0, 1, 0, 1};
  const auto ref = oracle::exhaustive_numeric({4, 1, 3, 2}, {0, 1, 0, 1});
  const auto s = best_split_numeric(v, y);
  ASSERT_TRUE(ref && s);
  EXPECT_EQ(s->threshold(), ref->threshold);
  EXPECT_EQ(ref->threshold, 2.5);
}

TEST(BestSplitNumeric, TiesGoToLowestThreshold) {
  // Both 1.5 and 3.5 isolate one row of each class symmetrically.
  const std::vector<double> v{1, 2, 3, 4};
  const std::vector<Label> y{1, 0, 0, 1};
  const auto s = best_split_numeric(v, y);
  ASSERT_TRUE(s);
  EXPECT_EQ(s->threshold(), 1.5);
}

TEST(BestSplitNumeric, LengthMismatch) {
  const std::vector<double> v{1, 2};
  const std::vector<Label> y{1};
  EXPECT_THROW(best_split_numeric(v, y), InvalidArgument);
}

TEST(BestSplitNumeric, ThresholdStrictlyBetweenNeighbours) {
  const std::vector<double> v{1.0, std::nextafter(1.0, 2.0)};
  const std::vector<Label> y{1, 0};
  const auto s = best_split_numeric(v, y);
  ASSERT_TRUE(s);
  // No double lies strictly between adjacent doubles; the lower one is used
  // so that `<=` still separates them.
  EXPECT_EQ(s->threshold(), 1.0);
}

// --- best_split_categorical ---------------------------------------------------

TEST(BestSplitCategorical, Examples) {
  const std::vector<std::size_t> pure_v{0, 0, 1, 1};
  const std::vector<Label> pure_y{1, 1, 0, 0};
  EXPECT_DOUBLE_EQ(best_split_categorical(pure_v, pure_y, 2)->hd_score, kSqrt2);

  const std::vector<std::size_t> one{1, 1, 1};
  const std::vector<Label> y1{1, 0, 1};
  EXPECT_FALSE(best_split_categorical(one, y1, 3));

  const std::vector<std::size_t> three{0, 0, 1, 1, 2, 2};
  const std::vector<Label> y3{1, 1, 1, 0, 0, 0};
  const auto s = best_split_categorical(three, y3, 3);
  ASSERT_TRUE(s);
  EXPECT_NEAR(s->hd_score, oracle::hellinger({{2, 0}, {1, 1}, {0, 2}}), 1e-15);
  EXPECT_EQ(s->categories(), (std::vector<std::size_t>{0, 1, 2}));
}

TEST(BestSplitCategorical, Errors) {
  const std::vector<std::size_t> v{0, 3};
  const std::vector<Label> y{1, 0};
  EXPECT_THROW(best_split_categorical(v, y, 2), InvalidArgument);
  const std::vector<Label> short_y{1};
  EXPECT_THROW(best_split_categorical(v, short_y, 4), InvalidArgument);
}

// --- grow_tree ----------------------------------------------------------------

TEST(GrowTree, SeparableIsDepthOne) {
  const auto d = testutil::continuous({{1}, {2}, {3}, {7}, {8}, {9}}, {0, 0, 0, 1, 1, 1});
  const auto m = grow_tree(d);
  ASSERT_FALSE(m.root.is_leaf());
  EXPECT_EQ(depth(m.root), 1u);
  EXPECT_EQ(m.root.split->threshold(), 5.0);
  EXPECT_EQ(predict(m, d), d.labels());
}

TEST(GrowTree, PureDatasetIsLeaf) {
  const auto d = testutil::continuous({{1}, {2}, {3}}, {0, 0, 0});
  const auto m = grow_tree(d);
  EXPECT_TRUE(m.root.is_leaf());
  EXPECT_EQ(m.root.label, 0);
  EXPECT_EQ(m.root.counts, (ClassCounts{0, 3}));
  EXPECT_TRUE(select_features(m).empty());
}

TEST(GrowTree, ConstantFeatureHasZeroImportance) {
  const auto d = testutil::continuous({{1, 4}, {2, 4}, {3, 4}, {4, 4}, {5, 4}},
                                      {0, 1, 0, 1, 1});
  const auto m = grow_tree(d);
  EXPECT_GT(m.importances[0], 0.0);
  EXPECT_EQ(m.importances[1], 0.0);
}

TEST(GrowTree, LeafTieFavoursPositive) {
  // Identical feature values, one row per class: no split is possible.
  const auto d = testutil::continuous({{1}, {1}}, {0, 1});
  const auto m = grow_tree(d);
  EXPECT_TRUE(m.root.is_leaf());
  EXPECT_EQ(m.root.label, 1);
}

TEST(GrowTree, MaxDepthAndMinLeaf) {
  const auto d = eight_rows();
  TreeConfig shallow;
  shallow.max_depth = 1;
  EXPECT_EQ(depth(grow_tree(d, shallow).root), 1u);
  TreeConfig stump;
  stump.max_depth = 0;
  EXPECT_TRUE(grow_tree(d, stump).root.is_leaf());
  TreeConfig big_leaves;
  big_leaves.min_leaf = 3;
  for_each_node(grow_tree(d, big_leaves).root, [](const TreeNode& n, std::size_t) {
    EXPECT_GE(n.counts.total(), 3u);
  });
  TreeConfig bad;
  bad.min_leaf = 0;
  EXPECT_THROW(grow_tree(d, bad), InvalidArgument);
}

TEST(GrowTree, NodeCountsPartitionParent) {
  const auto d = iec::data::synth_generate({.n = 300, .informative = 3, .noise = 2, .seed = 5});
  const auto m = grow_tree(d);
  EXPECT_EQ(m.root.counts, d.class_counts());
  for_each_node(m.root, [](const TreeNode& n, std::size_t) {
    if (n.is_leaf()) {
      EXPECT_EQ(n.label, majority_label(n.counts));
      return;
    }
    ASSERT_GE(n.children.size(), 2u);
    ClassCounts sum;
    for (const auto& c : n.children) {
      sum.positive += c.counts.positive;
      sum.negative += c.counts.negative;
    }
    EXPECT_EQ(sum, n.counts);
    EXPECT_GE(n.split->hd_score, 0.0);
    EXPECT_LE(n.split->hd_score, kSqrt2);
  });
}

TEST(GrowTree, CategoricalKWaySplit) {
  iec::data::Schema specs{{"g", FeatureKind::Categorical, {"a", "b", "c"}}};
  Dataset d(specs, Matrix(6, 1, std::vector<double>{0, 0, 1, 1, 2, 2}), {1, 1, 1, 0, 0, 0});
  const auto m = grow_tree(d);
  ASSERT_FALSE(m.root.is_leaf());
  EXPECT_FALSE(m.root.split->is_numeric());
  EXPECT_EQ(m.root.children.size(), 3u);
  EXPECT_NEAR(m.root.split->hd_score, 1.1547005383792515, 1e-15);
}

TEST(GrowTree, EmptyDatasetRejected) {
  EXPECT_THROW(testutil::continuous({}, {}), InvalidArgument);
}

TEST(GrowTree, ImportancesPositiveExactlyForSplitFeatures) {
  const auto d = iec::data::synth_generate({.n = 200, .informative = 2, .noise = 4, .seed = 8});
  TreeConfig cfg;
  cfg.max_depth = 2;
  const auto m = grow_tree(d, cfg);
  std::vector<bool> used(d.p(), false);
  for_each_node(m.root, [&](const TreeNode& n, std::size_t) {
    if (!n.is_leaf()) used[n.split->feature_index] = true;
  });
  for (std::size_t f = 0; f < d.p(); ++f) EXPECT_EQ(m.importances[f] > 0.0, used[f]);
}

TEST(GrowTree, DeterministicAndPermutationInvariant) {
  const auto d = iec::data::synth_generate({.n = 250, .informative = 3, .noise = 3, .seed = 2});
  const auto base = grow_tree(d);
  EXPECT_EQ(grow_tree(d), base);
  Rng rng(77);
  for (int t = 0; t < 5; ++t) {
    std::vector<std::size_t> perm(d.n());
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    EXPECT_EQ(grow_tree(d.subset(perm)), base);
  }
}

TEST(GrowTree, SkewInsensitiveUnderMinorityReplication) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto d = iec::data::synth_generate(
        {.n = 120, .informative = 2, .noise = 2, .minority_fraction = 0.25, .seed = seed});
    const auto base = grow_tree(d);
    for (std::size_t c : {2, 5, 10}) {
      const auto rep = grow_tree(testutil::replicate_minority(d, c));
      EXPECT_TRUE(same_structure(base.root, rep.root)) << "seed " << seed << " c " << c;
      EXPECT_EQ(select_features(base), select_features(rep));
    }
  }
}

// --- predict ------------------------------------------------------------------

TEST(Predict, ThresholdSemantics) {
  const auto d = testutil::continuous({{1}, {2}, {3}, {4}}, {1, 1, 0, 0});
  const auto m = grow_tree(d);
  ASSERT_EQ(m.root.split->threshold(), 2.5);
  const double below[] = {2.4};
  const double at[] = {2.5};
  const double above[] = {2.6};
  EXPECT_EQ(predict_row(m, below), 1);
  EXPECT_EQ(predict_row(m, at), 1);
  EXPECT_EQ(predict_row(m, above), 0);
}

TEST(Predict, UnseenCategoryFollowsLargestChild) {
  // Category "c" exists in the schema but never reaches the root split.
  iec::data::Schema specs{{"g", FeatureKind::Categorical, {"a", "b", "c"}}};
  Dataset d(specs, Matrix(5, 1, std::vector<double>{0, 0, 0, 1, 1}), {0, 0, 0, 1, 1});
  const auto m = grow_tree(d);
  ASSERT_EQ(m.root.split->categories(), (std::vector<std::size_t>{0, 1}));
  const double unseen[] = {2};
  EXPECT_EQ(predict_row(m, unseen), 0);  // child "a" holds 3 rows

  Dataset tied(specs, Matrix(4, 1, std::vector<double>{0, 0, 1, 1}), {0, 0, 1, 1});
  EXPECT_EQ(predict_row(grow_tree(tied), unseen), 0);  // tie -> first child
}

TEST(Predict, TrainingRowsMatchLeafLabels) {
  const auto d = iec::data::synth_generate({.n = 200, .informative = 2, .noise = 2, .seed = 3});
  TreeConfig cfg;
  cfg.max_depth = 3;
  const auto m = grow_tree(d, cfg);
  const auto pred = predict(m, d);
  for (std::size_t r = 0; r < d.n(); ++r) {
    const TreeNode* n = &m.root;
    while (!n->is_leaf()) {
      const double v = d.at(r, n->split->feature_index);
      n = &n->children[v <= n->split->threshold() ? 0 : 1];
    }
    ASSERT_EQ(pred[r], n->label);
  }
}

TEST(Predict, SchemaMismatch) {
  const auto m = grow_tree(testutil::continuous({{1}, {2}}, {0, 1}));
  EXPECT_THROW(predict(m, testutil::continuous({{1, 2}}, {0})), DataError);
}

// --- select_features ----------------------------------------------------------

TEST(SelectFeatures, Stump) {
  std::vector<std::vector<double>> rows;
  std::vector<Label> y;
  for (int i = 0; i < 6; ++i) {
    rows.push_back({1.0, 2.0, 3.0, static_cast<double>(i), 5.0});
    y.push_back(i >= 3);
  }
  const auto m = grow_tree(testutil::continuous(rows, y));
  EXPECT_EQ(select_features(m), std::vector<std::size_t>{3});
}

TEST(SelectFeatures, OrderedByWeightedScore) {
  const auto m = grow_tree(eight_rows());
  // x0 at the root: mass 1, score from counts (0,4 | 3,1).
  // x1 in the right child: mass (3/3 + 1/5)/2 = 0.6, score sqrt(2).
  EXPECT_NEAR(m.importances[0], 1.0514622242382672, 1e-12);
  EXPECT_NEAR(m.importances[1], 0.6 * std::sqrt(2.0), 1e-12);
  EXPECT_EQ(select_features(m), (std::vector<std::size_t>{0, 1}));
}

TEST(SelectFeatures, TiesByIndex) {
  HddtModel m;
  m.importances = {0.5, 0.0, 0.7, 0.5};
  EXPECT_EQ(select_features(m), (std::vector<std::size_t>{2, 0, 3}));
}

// --- JSON ---------------------------------------------------------------------

TEST(Json, RoundTrip) {
  iec::data::Schema specs{{"g", FeatureKind::Categorical, {"a", "b", "c"}},
                          {"x", FeatureKind::Continuous, {}}};
  Dataset d(specs, Matrix(6, 2, std::vector<double>{0, 1.5, 1, 2.5, 2, 0.1, 0, 9, 1, 0.3, 2, 4}),
            {1, 0, 0, 1, 0, 1});
  const auto m = grow_tree(d);
  const nlohmann::ordered_json j = m;
  const auto back = nlohmann::ordered_json::parse(j.dump()).get<HddtModel>();
  EXPECT_EQ(back, m);
  EXPECT_EQ(nlohmann::ordered_json(back).dump(), j.dump());
  EXPECT_EQ(j.at("root").at("kind"), "internal");
}

TEST(Json, RejectsMalformedTree) {
  auto j = nlohmann::ordered_json::parse(
      R"({"specs":[{"name":"x","kind":"continuous"}],"importances":[1.0],
          "root":{"kind":"internal","counts":[1,1],"label":1,
                  "split":{"feature":0,"type":"threshold","threshold":0.5,"score":1.4},
                  "children":[{"kind":"leaf","counts":[1,0],"label":1}]}})");
  EXPECT_THROW(j.get<HddtModel>(), DataError);
}
