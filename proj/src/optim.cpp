#include "gazeworld/optim.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "gazeworld/kernels.hpp"

namespace gazeworld {

template <typename T>
AdamW<T>::AdamW(AdamWConfig<T> config, std::vector<Tensor<T>> params)
    : config_(config), params_(std::move(params)) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    m_.emplace_back(p.size(), T(0));
    v_.emplace_back(p.size(), T(0));
  }
}

template <typename T>
void AdamW<T>::zero_grad() {
  for (auto& p : params_) {
    auto g = p.grad_mut();
    std::fill(g.begin(), g.end(), T(0));
  }
}

template <typename T>
void AdamW<T>::step() {
  ++step_;
  const T bc1 = T(1) - std::pow(config_.beta1, static_cast<T>(step_));
  const T bc2 = T(1) - std::pow(config_.beta2, static_cast<T>(step_));
  const kernels::AdamScalars<T> s{
      config_.learning_rate,
      config_.beta1,
      config_.beta2,
      T(1) - config_.beta1,
      T(1) - config_.beta2,
      T(1) / bc1,
      T(1) / bc2,
      config_.eps,
      T(1) - config_.learning_rate * config_.weight_decay,
  };
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i];
    if (!p.has_grad()) {
      throw std::runtime_error("AdamW::step: parameter " + std::to_string(i) +
                               " has no gradient");
    }
    kernels::active<T>().adamw(p.raw_data().data(), m_[i].data(), v_[i].data(),
                               p.grad().data(), s, p.size());
  }
}

template <typename T>
void AdamW<T>::restore(std::vector<std::vector<T>> m, std::vector<std::vector<T>> v,
                       std::int64_t step) {
  if (m.size() != params_.size() || v.size() != params_.size()) {
    throw std::invalid_argument("AdamW::restore: moment count mismatch");
  }
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (m[i].size() != params_[i].size() || v[i].size() != params_[i].size()) {
      throw std::invalid_argument("AdamW::restore: moment shape mismatch");
    }
  }
  m_ = std::move(m);
  v_ = std::move(v);
  step_ = step;
}

template <typename T>
void ema_update(std::vector<Tensor<T>>& target_params,
                const std::vector<Tensor<T>>& online_params, T tau) {
  if (target_params.size() != online_params.size()) {
    throw std::invalid_argument("ema_update: parameter list length mismatch");
  }
  if (!(tau >= T(0) && tau <= T(1))) {
    throw std::invalid_argument("ema_update: tau must be in [0,1]");
  }
  for (std::size_t i = 0; i < target_params.size(); ++i) {
    if (target_params[i].shape() != online_params[i].shape()) {
      throw std::invalid_argument("ema_update: shape mismatch at parameter " + std::to_string(i));
    }
    kernels::active<T>().ema(target_params[i].raw_data().data(),
                             online_params[i].data().data(), tau,
                             target_params[i].size());
  }
}

double ema_schedule(std::int64_t step, std::int64_t total, double start, double end) {
  if (step < 0 || step > total) {
    throw std::invalid_argument("ema_schedule: step outside [0, total]");
  }
  if (total == 0) return end;
  const double phase = static_cast<double>(step) / static_cast<double>(total);
  return end - (end - start) * (1.0 + std::cos(std::numbers::pi * phase)) / 2.0;
}

GradCheckReport grad_check(const std::function<Tensor<double>()>& f,
                           std::vector<Tensor<double>> params, double h, double abs_floor) {
  for (auto& p : params) p.zero_grad();
  Tensor<double> loss = f();
  loss.backward();

  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (auto& p : params) {
    analytic.emplace_back(p.grad().begin(), p.grad().end());
    if (analytic.back().empty()) analytic.back().assign(p.size(), 0.0);
  }

  GradCheckReport report;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto buf = params[pi].raw_data();
    for (std::size_t ci = 0; ci < buf.size(); ++ci) {
      const double saved = buf[ci];
      buf[ci] = saved + h;
      const double fp = f().item();
      buf[ci] = saved - h;
      const double fm = f().item();
      buf[ci] = saved;
      const double numeric = (fp - fm) / (2.0 * h);
      const double a = analytic[pi][ci];
      const double abs_err = std::abs(a - numeric);
      const double rel =
          abs_err / std::max({std::abs(a), std::abs(numeric), abs_floor});
      if (rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.max_abs_err = abs_err;
        report.worst_param = pi;
        report.worst_coord = ci;
      }
    }
  }
  return report;
}

template class AdamW<float>;
template class AdamW<double>;
template void ema_update<float>(std::vector<Tensor<float>>&, const std::vector<Tensor<float>>&,
                                float);
template void ema_update<double>(std::vector<Tensor<double>>&,
                                 const std::vector<Tensor<double>>&, double);

}  // namespace gazeworld
