#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "dmchan/nn/tape.hpp"

namespace dmchan::nn {

enum class OptimizerKind { Adam, NAdam, RMSprop };

inline std::string_view to_string(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::Adam: return "adam";
    case OptimizerKind::NAdam: return "nadam";
    case OptimizerKind::RMSprop: return "rmsprop";
  }
  return "?";
}

inline OptimizerKind optimizer_from_string(std::string_view s) {
  if (s == "adam") return OptimizerKind::Adam;
  if (s == "nadam") return OptimizerKind::NAdam;
  if (s == "rmsprop") return OptimizerKind::RMSprop;
  throw std::invalid_argument("unknown optimizer '" + std::string(s) + "'");
}

struct OptimizerSettings {
  OptimizerKind kind = OptimizerKind::Adam;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double rho = 0.99;  // RMSprop decay
  double eps = 1e-8;
};

/**
 * First-order optimizer over a fixed list of parameters.
 *
 * Adam and RMSprop follow their textbook updates. NAdam uses Dozat's
 * Nesterov form without a momentum schedule:
 *   θ ← θ − lr · (β₁·m̂ + (1−β₁)·g/(1−β₁ᵗ)) / (√v̂ + ε).
 * step() leaves gradients in place; callers zero them.
 */
template <typename T>
class Optimizer {
 public:
  Optimizer() = default;

  Optimizer(OptimizerSettings settings, std::vector<Parameter<T>*> params)
      : settings_(settings), params_(std::move(params)) {
    for (auto* p : params_) {
      first_.emplace_back(p->value().size(), 0.0);
      second_.emplace_back(p->value().size(), 0.0);
    }
    initialized_ = true;
  }

  const OptimizerSettings& settings() const { return settings_; }
  std::uint64_t steps() const { return step_; }
  void set_lr(double lr) { settings_.lr = lr; }

  void step() {
    if (!initialized_) throw std::logic_error("optimizer_step: state not initialized");
    ++step_;
    const double t = static_cast<double>(step_);
    const double b1 = settings_.beta1, b2 = settings_.beta2, eps = settings_.eps, lr = settings_.lr;
    const double bc1 = 1.0 - std::pow(b1, t);
    const double bc2 = 1.0 - std::pow(b2, t);
    for (std::size_t k = 0; k < params_.size(); ++k) {
      Parameter<T>& p = *params_[k];
      if (p.value().size() != first_[k].size())
        throw ShapeError("optimizer_step: parameter " + p.name() + " changed shape");
      if (p.grad().size() != p.value().size()) p.zero_grad();
      auto& m = first_[k];
      auto& v = second_[k];
      auto value = p.value().data();
      auto grad = p.grad().data();
      for (std::size_t i = 0; i < value.size(); ++i) {
        const double g = static_cast<double>(grad[i]);
        double update = 0.0;
        switch (settings_.kind) {
          case OptimizerKind::Adam: {
            m[i] = b1 * m[i] + (1.0 - b1) * g;
            v[i] = b2 * v[i] + (1.0 - b2) * g * g;
            update = (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
            break;
          }
          case OptimizerKind::NAdam: {
            m[i] = b1 * m[i] + (1.0 - b1) * g;
            v[i] = b2 * v[i] + (1.0 - b2) * g * g;
            const double nesterov = b1 * (m[i] / bc1) + (1.0 - b1) * g / bc1;
            update = nesterov / (std::sqrt(v[i] / bc2) + eps);
            break;
          }
          case OptimizerKind::RMSprop: {
            v[i] = settings_.rho * v[i] + (1.0 - settings_.rho) * g * g;
            update = g / (std::sqrt(v[i]) + eps);
            break;
          }
        }
        value[i] = static_cast<T>(static_cast<double>(value[i]) - lr * update);
      }
    }
  }

 private:
  OptimizerSettings settings_;
  std::vector<Parameter<T>*> params_;
  std::vector<std::vector<double>> first_;
  std::vector<std::vector<double>> second_;
  std::uint64_t step_ = 0;
  bool initialized_ = false;
};

}  // namespace dmchan::nn
