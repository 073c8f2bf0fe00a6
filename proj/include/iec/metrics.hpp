#pragma once

// Confusion-matrix scores for imbalanced binary problems. The positive
// class (label 1) is the minority class. "AUC" here is the hard-label
// form (sensitivity + specificity) / 2, not a ranking AUC.

#include <cmath>
#include <cstddef>
#include <cstdio>
#include <iomanip>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "iec/common.hpp"

namespace iec::metrics {

struct ConfusionMatrix {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  std::size_t total() const noexcept { return tp + fp + tn + fn; }
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

inline ConfusionMatrix confusion(std::span<const Label> predicted, std::span<const Label> actual) {
  if (predicted.size() != actual.size()) {
    throw InvalidArgument("confusion: predicted and actual differ in length");
  }
  if (predicted.empty()) throw InvalidArgument("confusion: empty input");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (predicted[i] > 1 || actual[i] > 1) throw InvalidArgument("confusion: labels must be 0/1");
    if (predicted[i]) {
      (actual[i] ? cm.tp : cm.fp)++;
    } else {
      (actual[i] ? cm.fn : cm.tn)++;
    }
  }
  return cm;
}

/// Which metrics hit a zero denominator (and were set to 0).
struct UndefinedFlags {
  bool precision = false;
  bool sensitivity = false;
  bool specificity = false;
  bool f_measure = false;

  bool any() const noexcept { return precision || sensitivity || specificity || f_measure; }
  friend bool operator==(const UndefinedFlags&, const UndefinedFlags&) = default;
};

struct MetricsReport {
  double precision = 0;
  double sensitivity = 0;
  double specificity = 0;
  double g_mean = 0;
  double auc = 0;
  double f_measure = 0;
  double accuracy = 0;
  UndefinedFlags undefined;

  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

namespace detail {

inline double ratio(std::size_t num, std::size_t den, bool& undefined) noexcept {
  if (den == 0) {
    undefined = true;
    return 0.0;
  }
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace detail

/// Any metric with a zero denominator evaluates to 0 and is flagged.
inline MetricsReport report(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw InvalidArgument("report: empty confusion matrix");
  MetricsReport r;
  r.precision = detail::ratio(cm.tp, cm.tp + cm.fp, r.undefined.precision);
  r.sensitivity = detail::ratio(cm.tp, cm.tp + cm.fn, r.undefined.sensitivity);
  r.specificity = detail::ratio(cm.tn, cm.fp + cm.tn, r.undefined.specificity);
  r.g_mean = std::sqrt(r.sensitivity * r.specificity);
  r.auc = (r.sensitivity + r.specificity) / 2.0;
  if (r.precision + r.sensitivity == 0.0) {
    r.undefined.f_measure = true;
    r.f_measure = 0.0;
  } else {
    r.f_measure = 2.0 * r.precision * r.sensitivity / (r.precision + r.sensitivity);
  }
  r.accuracy = static_cast<double>(cm.tp + cm.tn) / static_cast<double>(cm.total());
  return r;
}

inline MetricsReport evaluate(std::span<const Label> predicted, std::span<const Label> actual) {
  return report(confusion(predicted, actual));
}

/// Per-metric arithmetic mean, summed in list order. A flag is set when
/// any input carried it.
inline MetricsReport mean_report(std::span<const MetricsReport> reports) {
  if (reports.empty()) throw InvalidArgument("mean_report: empty list");
  MetricsReport m;
  for (const auto& r : reports) {
    m.precision += r.precision;
    m.sensitivity += r.sensitivity;
    m.specificity += r.specificity;
    m.g_mean += r.g_mean;
    m.auc += r.auc;
    m.f_measure += r.f_measure;
    m.accuracy += r.accuracy;
    m.undefined.precision |= r.undefined.precision;
    m.undefined.sensitivity |= r.undefined.sensitivity;
    m.undefined.specificity |= r.undefined.specificity;
    m.undefined.f_measure |= r.undefined.f_measure;
  }
  const double n = static_cast<double>(reports.size());
  m.precision /= n;
  m.sensitivity /= n;
  m.specificity /= n;
  m.g_mean /= n;
  m.auc /= n;
  m.f_measure /= n;
  m.accuracy /= n;
  return m;
}

// ---------------------------------------------------------------------------
// Output

inline void to_json(nlohmann::ordered_json& j, const ConfusionMatrix& cm) {
  j = nlohmann::ordered_json{{"tp", cm.tp}, {"fp", cm.fp}, {"tn", cm.tn}, {"fn", cm.fn}};
}

inline void from_json(const nlohmann::ordered_json& j, ConfusionMatrix& cm) {
  j.at("tp").get_to(cm.tp);
  j.at("fp").get_to(cm.fp);
  j.at("tn").get_to(cm.tn);
  j.at("fn").get_to(cm.fn);
}

inline void to_json(nlohmann::ordered_json& j, const MetricsReport& r) {
  j = nlohmann::ordered_json{{"auc", r.auc},
                             {"f_measure", r.f_measure},
                             {"g_mean", r.g_mean},
                             {"accuracy", r.accuracy},
                             {"precision", r.precision},
                             {"sensitivity", r.sensitivity},
                             {"specificity", r.specificity}};
  auto& u = j["undefined"] = nlohmann::ordered_json::array();
  if (r.undefined.precision) u.push_back("precision");
  if (r.undefined.sensitivity) u.push_back("sensitivity");
  if (r.undefined.specificity) u.push_back("specificity");
  if (r.undefined.f_measure) u.push_back("f_measure");
}

inline void from_json(const nlohmann::ordered_json& j, MetricsReport& r) {
  j.at("auc").get_to(r.auc);
  j.at("f_measure").get_to(r.f_measure);
  j.at("g_mean").get_to(r.g_mean);
  j.at("accuracy").get_to(r.accuracy);
  j.at("precision").get_to(r.precision);
  j.at("sensitivity").get_to(r.sensitivity);
  j.at("specificity").get_to(r.specificity);
  r.undefined = {};
  if (j.contains("undefined")) {
    for (const auto& name : j.at("undefined")) {
      const auto s = name.get<std::string>();
      if (s == "precision") r.undefined.precision = true;
      else if (s == "sensitivity") r.undefined.sensitivity = true;
      else if (s == "specificity") r.undefined.specificity = true;
      else if (s == "f_measure") r.undefined.f_measure = true;
    }
  }
}

inline constexpr int kTableDigits = 4;

inline std::string format_score(double v, int digits = kTableDigits) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

/// Aligned table in the column order AUC, F-measure, G-mean, Accuracy.
/// Rows whose report hit a zero denominator get a trailing '*' and a
/// footnote.
inline void write_table(std::ostream& out,
                        const std::vector<std::pair<std::string, MetricsReport>>& rows) {
  std::size_t name_width = 10;
  for (const auto& [name, r] : rows) name_width = std::max(name_width, name.size());
  const auto pad = [](const std::string& s, std::size_t w) {
    return s.size() >= w ? s : std::string(w - s.size(), ' ') + s;
  };
  std::ostringstream line;
  line << std::left << std::setw(static_cast<int>(name_width)) << "Classifier";
  out << line.str() << "  " << pad("AUC", 9) << "  " << pad("F-measure", 9) << "  "
      << pad("G-mean", 9) << "  " << pad("Accuracy", 9) << '\n';
  bool flagged = false;
  for (const auto& [name, r] : rows) {
    std::ostringstream cell;
    cell << std::left << std::setw(static_cast<int>(name_width)) << name;
    out << cell.str() << "  " << pad(format_score(r.auc), 9) << "  "
        << pad(format_score(r.f_measure), 9) << "  " << pad(format_score(r.g_mean), 9) << "  "
        << pad(format_score(r.accuracy), 9);
    if (r.undefined.any()) {
      out << " *";
      flagged = true;
    }
    out << '\n';
  }
  if (flagged) out << "* a metric had a zero denominator and was reported as 0\n";
}

}  // namespace iec::metrics
