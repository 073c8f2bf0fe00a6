#pragma once

// One-hidden-layer feedforward network with logistic units:
//
//   psi(z) = sigmoid( sum_i c_i * sigmoid(a_i . z + b_i) + c_0 )
//
// trained by full-batch gradient descent on mean squared error and
// classified with the 1/2 threshold (psi(z) <= 1/2 -> 0).

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "iec/common.hpp"

namespace iec::ann {

inline double sigmoid(double x) noexcept {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

struct MlpModel {
  std::size_t input_dim = 0;
  std::size_t hidden_count = 0;
  std::vector<double> hidden_weights;  // hidden_count x input_dim, row-major
  std::vector<double> hidden_biases;
  std::vector<double> output_weights;
  double output_bias = 0;

  static MlpModel zeros(std::size_t input_dim, std::size_t hidden_count) {
    MlpModel m;
    m.input_dim = input_dim;
    m.hidden_count = hidden_count;
    m.hidden_weights.assign(input_dim * hidden_count, 0.0);
    m.hidden_biases.assign(hidden_count, 0.0);
    m.output_weights.assign(hidden_count, 0.0);
    return m;
  }

  std::size_t parameter_count() const noexcept { return hidden_count * (input_dim + 2) + 1; }

  void validate() const {
    if (input_dim < 1 || hidden_count < 1) {
      throw InvalidArgument("mlp: input_dim and hidden_count must be >= 1");
    }
    if (hidden_weights.size() != input_dim * hidden_count ||
        hidden_biases.size() != hidden_count || output_weights.size() != hidden_count) {
      throw InvalidArgument("mlp: parameter arrays do not match dimensions");
    }
    auto finite = [](const std::vector<double>& v) {
      for (double x : v) {
        if (!std::isfinite(x)) return false;
      }
      return true;
    };
    if (!finite(hidden_weights) || !finite(hidden_biases) || !finite(output_weights) ||
        !std::isfinite(output_bias)) {
      throw InvalidArgument("mlp: non-finite parameter");
    }
  }

  friend bool operator==(const MlpModel&, const MlpModel&) = default;
};

/// Parameters in a fixed order: hidden weights, hidden biases, output
/// weights, output bias.
inline std::vector<double> to_flat(const MlpModel& m) {
  std::vector<double> out;
  out.reserve(m.parameter_count());
  out.insert(out.end(), m.hidden_weights.begin(), m.hidden_weights.end());
  out.insert(out.end(), m.hidden_biases.begin(), m.hidden_biases.end());
  out.insert(out.end(), m.output_weights.begin(), m.output_weights.end());
  out.push_back(m.output_bias);
  return out;
}

inline void assign_flat(MlpModel& m, std::span<const double> flat) {
  if (flat.size() != m.parameter_count()) throw InvalidArgument("mlp: flat size mismatch");
  auto it = flat.begin();
  for (auto& w : m.hidden_weights) w = *it++;
  for (auto& b : m.hidden_biases) b = *it++;
  for (auto& c : m.output_weights) c = *it++;
  m.output_bias = *it;
}

struct TrainConfig {
  std::size_t epochs = 2000;
  double learning_rate = 0.3;
  std::uint64_t seed = 0;
  double init_scale = 0.5;

  void validate() const {
    if (epochs < 1) throw InvalidArgument("train: epochs must be >= 1");
    if (!(learning_rate > 0) || !std::isfinite(learning_rate)) {
      throw InvalidArgument("train: learning_rate must be finite and > 0");
    }
    if (!(init_scale > 0) || !std::isfinite(init_scale)) {
      throw InvalidArgument("train: init_scale must be finite and > 0");
    }
  }
};

/// Training produced a non-finite loss.
class TrainingDiverged : public Error {
 public:
  TrainingDiverged(std::size_t epoch)
      : Error("train: non-finite loss at epoch " + std::to_string(epoch)), epoch_(epoch) {}
  std::size_t epoch() const noexcept { return epoch_; }

 private:
  std::size_t epoch_;
};

/// Hidden-layer width round(sqrt(n / (d_m ln n))), at least 1.
inline std::size_t hidden_neuron_count(std::size_t n, std::size_t d_m) {
  if (n < 3) throw InvalidArgument("hidden_neuron_count: n must be >= 3");
  if (d_m < 1) throw InvalidArgument("hidden_neuron_count: d_m must be >= 1");
  const double nn = static_cast<double>(n);
  const double k = std::round(std::sqrt(nn / (static_cast<double>(d_m) * std::log(nn))));
  return k < 1.0 ? 1 : static_cast<std::size_t>(k);
}

namespace detail {

inline double hidden_activation(const MlpModel& m, std::size_t i, std::span<const double> z) {
  const double* a = m.hidden_weights.data() + i * m.input_dim;
  double s = m.hidden_biases[i];
  for (std::size_t j = 0; j < m.input_dim; ++j) s += a[j] * z[j];
  return sigmoid(s);
}

inline void check_width(const MlpModel& m, std::size_t width) {
  if (width != m.input_dim) {
    throw InvalidArgument("mlp: input has width " + std::to_string(width) + ", expected " +
                          std::to_string(m.input_dim));
  }
}

}  // namespace detail

inline double forward(const MlpModel& m, std::span<const double> z) {
  detail::check_width(m, z.size());
  double s = m.output_bias;
  for (std::size_t i = 0; i < m.hidden_count; ++i) {
    s += m.output_weights[i] * detail::hidden_activation(m, i, z);
  }
  return sigmoid(s);
}

inline Label classify_output(double psi) noexcept { return psi <= 0.5 ? Label{0} : Label{1}; }

inline Label classify(const MlpModel& m, std::span<const double> z) {
  return classify_output(forward(m, z));
}

inline std::vector<Label> classify(const MlpModel& m, const Matrix& rows) {
  detail::check_width(m, rows.cols());
  std::vector<Label> out(rows.rows());
  for (std::size_t r = 0; r < rows.rows(); ++r) out[r] = classify(m, rows.row(r));
  return out;
}

struct LossGradient {
  double loss = 0;
  MlpModel gradient;  // same shape as the model
};

inline void check_batch(const MlpModel& m, const Matrix& x, std::span<const Label> y) {
  detail::check_width(m, x.cols());
  if (x.rows() != y.size()) throw InvalidArgument("mlp: row and target counts differ");
  if (x.rows() == 0) throw InvalidArgument("mlp: empty batch");
}

/// Mean squared error (1/n) sum (psi(z_r) - y_r)^2.
inline double mse_loss(const MlpModel& m, const Matrix& x, std::span<const Label> y) {
  check_batch(m, x, y);
  double sum = 0;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const double e = forward(m, x.row(r)) - static_cast<double>(y[r]);
    sum += e * e;
  }
  return sum / static_cast<double>(x.rows());
}

/// Loss and its exact gradient by backpropagation. Rows are accumulated in
/// order so the result is bit-reproducible.
inline LossGradient mse_loss_gradient(const MlpModel& m, const Matrix& x,
                                      std::span<const Label> y) {
  check_batch(m, x, y);
  LossGradient out{0.0, MlpModel::zeros(m.input_dim, m.hidden_count)};
  auto& g = out.gradient;
  const double inv_n = 1.0 / static_cast<double>(x.rows());
  std::vector<double> h(m.hidden_count);

  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto z = x.row(r);
    double s = m.output_bias;
    for (std::size_t i = 0; i < m.hidden_count; ++i) {
      h[i] = detail::hidden_activation(m, i, z);
      s += m.output_weights[i] * h[i];
    }
    const double psi = sigmoid(s);
    const double err = psi - static_cast<double>(y[r]);
    out.loss += err * err;

    const double d_out = 2.0 * err * inv_n * psi * (1.0 - psi);
    g.output_bias += d_out;
    for (std::size_t i = 0; i < m.hidden_count; ++i) {
      g.output_weights[i] += d_out * h[i];
      const double d_hidden = d_out * m.output_weights[i] * h[i] * (1.0 - h[i]);
      g.hidden_biases[i] += d_hidden;
      double* ga = g.hidden_weights.data() + i * m.input_dim;
      for (std::size_t j = 0; j < m.input_dim; ++j) ga[j] += d_hidden * z[j];
    }
  }
  out.loss *= inv_n;
  return out;
}

/// theta <- theta - learning_rate * gradient
inline void gradient_step(MlpModel& m, const MlpModel& gradient, double learning_rate) {
  for (std::size_t i = 0; i < m.hidden_weights.size(); ++i) {
    m.hidden_weights[i] -= learning_rate * gradient.hidden_weights[i];
  }
  for (std::size_t i = 0; i < m.hidden_count; ++i) {
    m.hidden_biases[i] -= learning_rate * gradient.hidden_biases[i];
    m.output_weights[i] -= learning_rate * gradient.output_weights[i];
  }
  m.output_bias -= learning_rate * gradient.output_bias;
}

/// Uniform draws in [-init_scale, init_scale], in flat parameter order.
inline MlpModel initialize(std::size_t input_dim, std::size_t hidden_count,
                           const TrainConfig& cfg) {
  auto m = MlpModel::zeros(input_dim, hidden_count);
  m.validate();
  Rng rng(cfg.seed);
  std::vector<double> flat(m.parameter_count());
  for (auto& w : flat) w = rng.uniform(-cfg.init_scale, cfg.init_scale);
  assign_flat(m, flat);
  return m;
}

/// Full-batch gradient descent for exactly cfg.epochs epochs.
inline MlpModel train(const Matrix& x, std::span<const Label> y, std::size_t hidden_count,
                      const TrainConfig& cfg) {
  cfg.validate();
  if (hidden_count < 1) throw InvalidArgument("train: hidden_count must be >= 1");
  if (x.cols() < 1) throw InvalidArgument("train: need at least one input column");
  auto m = initialize(x.cols(), hidden_count, cfg);
  check_batch(m, x, y);
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto lg = mse_loss_gradient(m, x, y);
    if (!std::isfinite(lg.loss)) throw TrainingDiverged(epoch);
    gradient_step(m, lg.gradient, cfg.learning_rate);
  }
  if (!std::isfinite(mse_loss(m, x, y))) throw TrainingDiverged(cfg.epochs);
  return m;
}

// ---------------------------------------------------------------------------
// JSON

inline void to_json(nlohmann::ordered_json& j, const MlpModel& m) {
  j = nlohmann::ordered_json{{"input_dim", m.input_dim},
                             {"hidden_count", m.hidden_count},
                             {"hidden_weights", m.hidden_weights},
                             {"hidden_biases", m.hidden_biases},
                             {"output_weights", m.output_weights},
                             {"output_bias", m.output_bias}};
}

inline void from_json(const nlohmann::ordered_json& j, MlpModel& m) {
  j.at("input_dim").get_to(m.input_dim);
  j.at("hidden_count").get_to(m.hidden_count);
  j.at("hidden_weights").get_to(m.hidden_weights);
  j.at("hidden_biases").get_to(m.hidden_biases);
  j.at("output_weights").get_to(m.output_weights);
  j.at("output_bias").get_to(m.output_bias);
  try {
    m.validate();
  } catch (const InvalidArgument& e) {
    throw DataError(e.what());
  }
}

}  // namespace iec::ann
