#include "awe/adam.hpp"

#include <cmath>
#include <limits>

#include "awe/error.hpp"

namespace awe::nn {

Adam::Adam(const ParameterStore& params, AdamConfig config) : config_(config) {
  if (!(config.learning_rate > 0.0)) throw ConfigError("Adam learning rate must be > 0");
  if (!(config.beta1 >= 0.0 && config.beta1 < 1.0 && config.beta2 >= 0.0 && config.beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Tensor& p = params.at(i);
    m_.emplace_back(p.shape(), std::vector<double>(p.size(), 0.0));
    v_.emplace_back(p.shape(), std::vector<double>(p.size(), 0.0));
  }
}

void Adam::step(ParameterStore& params, const std::vector<Tensor>& grads) {
  if (grads.size() != params.size() || m_.size() != params.size()) {
    throw DimensionError("Adam: expected " + std::to_string(params.size()) + " gradients, got " +
                         std::to_string(grads.size()));
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (grads[i].size() != params.at(i).size()) {
      throw DimensionError("Adam: gradient shape " + grads[i].shape_string() +
                           " does not match parameter '" + params.name(i) + "' " +
                           params.at(i).shape_string());
    }
    if (!grads[i].all_finite()) {
      throw NumericError("Adam: non-finite gradient for parameter '" + params.name(i) + "'");
    }
  }
  ++steps_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  for (std::size_t i = 0; i < grads.size(); ++i) {
    Tensor& p = params.at(i);
    Tensor& m = m_[i];
    Tensor& v = v_[i];
    const Tensor& g = grads[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = b1 * m[j] + (1.0 - b1) * g[j];
      v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
      const double mhat = m[j] / c1;
      const double vhat = v[j] / c2;
      p[j] -= config_.learning_rate * mhat / (std::sqrt(vhat) + config_.epsilon);
    }
  }
}

double reduce_lr_on_plateau(std::span<const double> history, double initial_lr, double factor,
                            std::size_t patience) {
  if (history.empty()) throw ConfigError("reduce_lr_on_plateau: empty history");
  if (!(factor > 0.0 && factor < 1.0)) throw ConfigError("reduce_lr_on_plateau: factor must lie in (0, 1)");
  if (patience < 1) throw ConfigError("reduce_lr_on_plateau: patience must be >= 1");
  double lr = initial_lr;
  double best = -std::numeric_limits<double>::infinity();
  std::size_t bad = 0;
  for (double v : history) {
    if (v > best) {
      best = v;
      bad = 0;
    } else if (++bad >= patience) {
      lr *= factor;
      bad = 0;
    }
  }
  return lr;
}

}  // namespace awe::nn
