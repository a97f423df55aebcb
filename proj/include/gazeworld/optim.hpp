#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "gazeworld/tensor.hpp"

namespace gazeworld {

template <typename T>
struct AdamWConfig {
  T learning_rate = T(3e-4);
  T weight_decay = T(0.04);
  T beta1 = T(0.9);
  T beta2 = T(0.999);
  T eps = T(1e-8);
};

// Adam with decoupled weight decay: decay multiplies parameters directly and
// is never added to gradients.
template <typename T>
class AdamW {
 public:
  AdamW(AdamWConfig<T> config, std::vector<Tensor<T>> params);

  // Resets every managed parameter's gradient buffer to explicit zeros.
  void zero_grad();

  // One update over all managed parameters. Throws if any parameter has no
  // gradient buffer.
  void step();

  std::int64_t step_count() const { return step_; }
  const AdamWConfig<T>& config() const { return config_; }
  void set_learning_rate(T lr) { config_.learning_rate = lr; }
  const std::vector<Tensor<T>>& params() const { return params_; }

  // Checkpoint access to the raw moment buffers (aligned with params()).
  std::vector<std::vector<T>>& moment1() { return m_; }
  std::vector<std::vector<T>>& moment2() { return v_; }
  const std::vector<std::vector<T>>& moment1() const { return m_; }
  const std::vector<std::vector<T>>& moment2() const { return v_; }
  void restore(std::vector<std::vector<T>> m, std::vector<std::vector<T>> v, std::int64_t step);

 private:
  AdamWConfig<T> config_;
  std::vector<Tensor<T>> params_;
  std::vector<std::vector<T>> m_;
  std::vector<std::vector<T>> v_;
  std::int64_t step_ = 0;
};

// target <- tau*target + (1-tau)*online, elementwise, outside any graph.
template <typename T>
void ema_update(std::vector<Tensor<T>>& target_params, const std::vector<Tensor<T>>& online_params,
                T tau);

// Cosine ramp between the endpoints: tau(t) = end - (end-start)*(1+cos(pi*t/total))/2.
// Monotone nondecreasing on [0, total]; tau(0)=start, tau(total)=end.
double ema_schedule(std::int64_t step, std::int64_t total, double start = 0.998,
                    double end = 1.0);

struct GradCheckReport {
  double max_rel_err = 0.0;
  double max_abs_err = 0.0;
  std::size_t worst_param = 0;
  std::size_t worst_coord = 0;
};

// Central finite differences against analytic gradients, per coordinate:
// rel = |a - n| / max(|a|, |n|, abs_floor). Evaluates f twice per coordinate,
// so f must be a deterministic function of the parameter values. float64 only.
GradCheckReport grad_check(const std::function<Tensor<double>()>& f,
                           std::vector<Tensor<double>> params, double h = 1e-5,
                           double abs_floor = 1e-4);

}  // namespace gazeworld
