#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "iec/metrics.hpp"

using namespace iec;
using namespace iec::metrics;

TEST(Confusion, Cells) {
  const std::vector<Label> a{1, 0, 1};
  EXPECT_EQ(confusion(a, a), (ConfusionMatrix{2, 0, 1, 0}));
  const std::vector<Label> flipped{0, 1, 0};
  const auto cm = confusion(flipped, a);
  EXPECT_EQ(cm.tp, 0u);
  EXPECT_EQ(cm.tn, 0u);
  const std::vector<Label> pred{1, 1, 0, 0};
  const std::vector<Label> act{1, 0, 1, 0};
  EXPECT_EQ(confusion(pred, act), (ConfusionMatrix{1, 1, 1, 1}));
}

TEST(Confusion, Errors) {
  const std::vector<Label> a{1, 0};
  const std::vector<Label> b{1};
  const std::vector<Label> none;
  EXPECT_THROW(confusion(a, b), InvalidArgument);
  EXPECT_THROW(confusion(none, none), InvalidArgument);
}

TEST(Confusion, PermutationInvariant) {
  Rng rng(6);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 1 + rng.below(30);
    std::vector<Label> p(n), a(n);
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = static_cast<Label>(rng.below(2));
      a[i] = static_cast<Label>(rng.below(2));
    }
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    rng.shuffle(perm);
    std::vector<Label> pp(n), ap(n);
    for (std::size_t i = 0; i < n; ++i) {
      pp[i] = p[perm[i]];
      ap[i] = a[perm[i]];
    }
    ASSERT_EQ(confusion(p, a), confusion(pp, ap));
  }
}

TEST(Report, WorkedExample) {
  const auto r = report({.tp = 40, .fp = 20, .tn = 30, .fn = 10});
  EXPECT_NEAR(r.sensitivity, 0.8, 1e-12);
  EXPECT_NEAR(r.specificity, 0.6, 1e-12);
  EXPECT_NEAR(r.g_mean, std::sqrt(0.48), 1e-12);
  EXPECT_NEAR(r.auc, 0.7, 1e-12);
  EXPECT_NEAR(r.precision, 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(r.f_measure, 8.0 / 11.0, 1e-12);
  EXPECT_NEAR(r.accuracy, 0.7, 1e-12);
  EXPECT_FALSE(r.undefined.any());
}

TEST(Report, PerfectMatrix) {
  const auto r = report({.tp = 5, .fp = 0, .tn = 7, .fn = 0});
  for (double v : {r.precision, r.sensitivity, r.specificity, r.g_mean, r.auc, r.f_measure,
                   r.accuracy}) {
    EXPECT_EQ(v, 1.0);
  }
}

TEST(Report, NothingPredictedPositive) {
  const auto r = report({.tp = 0, .fp = 0, .tn = 8, .fn = 2});
  EXPECT_EQ(r.precision, 0.0);
  EXPECT_EQ(r.f_measure, 0.0);
  EXPECT_TRUE(r.undefined.precision);
  EXPECT_TRUE(r.undefined.f_measure);
  EXPECT_FALSE(r.undefined.sensitivity);
}

TEST(Report, ConstantNegativeOnEightyTwenty) {
  std::vector<Label> actual(100, 0);
  std::fill(actual.begin(), actual.begin() + 20, Label{1});
  const std::vector<Label> predicted(100, 0);
  const auto r = evaluate(predicted, actual);
  EXPECT_NEAR(r.accuracy, 0.8, 1e-12);
  EXPECT_EQ(r.g_mean, 0.0);
  EXPECT_EQ(r.auc, 0.5);
}

TEST(Report, IdentitiesAndOrdering) {
  Rng rng(99);
  for (int t = 0; t < 5000; ++t) {
    const ConfusionMatrix cm{rng.below(50), rng.below(50), rng.below(50), rng.below(50)};
    if (cm.total() == 0) continue;
    const auto r = report(cm);
    ASSERT_EQ(r.auc, (r.sensitivity + r.specificity) / 2);
    ASSERT_NEAR(r.g_mean * r.g_mean, r.sensitivity * r.specificity, 1e-12);
    const double lo = std::min(r.sensitivity, r.specificity);
    const double hi = std::max(r.sensitivity, r.specificity);
    ASSERT_LE(lo, r.g_mean + 1e-15);
    ASSERT_LE(r.g_mean, r.auc + 1e-15);
    ASSERT_LE(r.auc, hi + 1e-15);
    for (double v : {r.precision, r.sensitivity, r.specificity, r.g_mean, r.auc, r.f_measure,
                     r.accuracy}) {
      ASSERT_GE(v, 0.0);
      ASSERT_LE(v, 1.0);
    }
  }
}

TEST(MeanReport, Basics) {
  const auto a = report({.tp = 40, .fp = 20, .tn = 30, .fn = 10});
  EXPECT_EQ(mean_report(std::vector<MetricsReport>{a}), a);
  MetricsReport x, y;
  x.accuracy = 0.9;
  y.accuracy = 0.7;
  EXPECT_NEAR(mean_report(std::vector<MetricsReport>{x, y}).accuracy, 0.8, 1e-15);
  EXPECT_THROW(mean_report(std::vector<MetricsReport>{}), InvalidArgument);
}

TEST(MeanReport, MatchesNaiveLoop) {
  Rng rng(3);
  std::vector<MetricsReport> reports;
  for (int i = 0; i < 5; ++i) {
    reports.push_back(report({rng.below(30) + 1, rng.below(30), rng.below(30) + 1, rng.below(30)}));
  }
  const auto m = mean_report(reports);
  double auc = 0, f = 0, g = 0, acc = 0, prec = 0, sens = 0, spec = 0;
  for (const auto& r : reports) {
    auc += r.auc;
    f += r.f_measure;
    g += r.g_mean;
    acc += r.accuracy;
    prec += r.precision;
    sens += r.sensitivity;
    spec += r.specificity;
  }
  EXPECT_DOUBLE_EQ(m.auc, auc / 5);
  EXPECT_DOUBLE_EQ(m.f_measure, f / 5);
  EXPECT_DOUBLE_EQ(m.g_mean, g / 5);
  EXPECT_DOUBLE_EQ(m.accuracy, acc / 5);
  EXPECT_DOUBLE_EQ(m.precision, prec / 5);
  EXPECT_DOUBLE_EQ(m.sensitivity, sens / 5);
  EXPECT_DOUBLE_EQ(m.specificity, spec / 5);
}

TEST(Output, JsonRoundTrip) {
  const auto r = report({.tp = 0, .fp = 0, .tn = 8, .fn = 2});
  const nlohmann::ordered_json j = r;
  EXPECT_EQ(j.begin().key(), "auc");
  EXPECT_EQ(j.at("undefined"), nlohmann::ordered_json({"precision", "f_measure"}));
  EXPECT_EQ(nlohmann::ordered_json::parse(j.dump()).get<MetricsReport>(), r);
}

TEST(Output, TableColumnOrder) {
  std::ostringstream out;
  write_table(out, {{"IEC", report({.tp = 40, .fp = 20, .tn = 30, .fn = 10})}});
  const auto text = out.str();
  const auto auc = text.find("AUC");
  const auto f = text.find("F-measure");
  const auto g = text.find("G-mean");
  const auto acc = text.find("Accuracy");
  ASSERT_NE(auc, std::string::npos);
  EXPECT_LT(auc, f);
  EXPECT_LT(f, g);
  EXPECT_LT(g, acc);
  EXPECT_NE(text.find("IEC            0.7000     0.7273     0.6928     0.7000"), std::string::npos)
      << text;
}
