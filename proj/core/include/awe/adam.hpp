#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "awe/params.hpp"

namespace awe::nn {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adam with bias-corrected moments and no weight decay.
class Adam {
 public:
  Adam(const ParameterStore& params, AdamConfig config);

  // Applies one update. Throws NumericError naming the first parameter whose
  // gradient holds NaN/Inf; parameters are left untouched in that case.
  void step(ParameterStore& params, const std::vector<Tensor>& grads);

  double learning_rate() const { return config_.learning_rate; }
  void set_learning_rate(double lr) { config_.learning_rate = lr; }
  std::uint64_t step_count() const { return steps_; }
  const AdamConfig& config() const { return config_; }
  const std::vector<Tensor>& first_moments() const { return m_; }
  const std::vector<Tensor>& second_moments() const { return v_; }

 private:
  AdamConfig config_;
  std::uint64_t steps_ = 0;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

// Replays a validation-metric history (higher is better) from initial_lr:
// whenever the best value has not improved for `patience` consecutive epochs
// the rate is multiplied by `factor` and the counter restarts. Returns the
// rate to use after the last epoch.
double reduce_lr_on_plateau(std::span<const double> history, double initial_lr, double factor,
                            std::size_t patience);

}  // namespace awe::nn
