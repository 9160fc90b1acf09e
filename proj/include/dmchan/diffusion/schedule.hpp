#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dmchan::diffusion {

enum class ScheduleKind { Constant, Sigmoid, Cosine, Custom };

inline std::string_view to_string(ScheduleKind k) {
  switch (k) {
    case ScheduleKind::Constant: return "constant";
    case ScheduleKind::Sigmoid: return "sigmoid";
    case ScheduleKind::Cosine: return "cosine";
    case ScheduleKind::Custom: return "custom";
  }
  return "?";
}

inline ScheduleKind schedule_from_string(std::string_view s) {
  if (s == "constant") return ScheduleKind::Constant;
  if (s == "sigmoid") return ScheduleKind::Sigmoid;
  if (s == "cosine") return ScheduleKind::Cosine;
  if (s == "custom") return ScheduleKind::Custom;
  throw std::invalid_argument("unknown schedule kind '" + std::string(s) + "'");
}

/// Noise std used by the DDPM stepper.
enum class DdpmVariance {
  Posterior,  ///< σ_t² = (1−α_t)(1−ᾱ_{t−1})/(1−ᾱ_t)
  Beta,       ///< σ_t² = β_t
};

struct ScheduleParams {
  double beta = 0.05;             ///< constant kind
  double sigmoid_offset = 0.001;  ///< β_t = offset + scale·sigmoid(1 + 12(t−1)/T)
  double sigmoid_scale = 0.05;
  double cosine_clamp = 0.999;    ///< cap on β_t for t < T
  DdpmVariance variance = DdpmVariance::Posterior;
};

/**
 * Per-step diffusion coefficients, 1-based in t.
 *
 * alpha_bar(0) = 1 by convention; beta/alpha/sigma are defined for t in 1..T.
 * Values are kept in double regardless of the network precision.
 */
class NoiseSchedule {
 public:
  NoiseSchedule() = default;

  /// Builds from explicit β_1..β_T, each in [0, 1].
  static NoiseSchedule from_betas(std::vector<double> betas, ScheduleKind kind = ScheduleKind::Custom,
                                  ScheduleParams params = {}) {
    if (betas.empty()) throw std::invalid_argument("noise schedule: T must be >= 1");
    NoiseSchedule s;
    s.kind_ = kind;
    s.params_ = params;
    const std::size_t T = betas.size();
    s.beta_.assign(T + 1, 0.0);
    s.alpha_.assign(T + 1, 1.0);
    s.alpha_bar_.assign(T + 1, 1.0);
    s.sigma_.assign(T + 1, 0.0);
    for (std::size_t t = 1; t <= T; ++t) {
      const double b = betas[t - 1];
      if (!(b >= 0.0 && b <= 1.0))
        throw std::invalid_argument("noise schedule: beta_" + std::to_string(t) + " = " + std::to_string(b) +
                                    " outside [0, 1]");
      s.beta_[t] = b;
      s.alpha_[t] = 1.0 - b;
      s.alpha_bar_[t] = s.alpha_bar_[t - 1] * s.alpha_[t];
    }
    for (std::size_t t = 1; t <= T; ++t) {
      double var = 0.0;
      if (params.variance == DdpmVariance::Beta) {
        var = s.beta_[t];
      } else if (s.beta_[t] > 0.0 && s.alpha_bar_[t] < 1.0) {
        var = s.beta_[t] * (1.0 - s.alpha_bar_[t - 1]) / (1.0 - s.alpha_bar_[t]);
      }
      s.sigma_[t] = std::sqrt(var);
    }
    return s;
  }

  ScheduleKind kind() const { return kind_; }
  const ScheduleParams& params() const { return params_; }
  std::size_t steps() const { return beta_.empty() ? 0 : beta_.size() - 1; }

  double beta(std::size_t t) const { return beta_.at(t); }
  double alpha(std::size_t t) const { return alpha_.at(t); }
  double alpha_bar(std::size_t t) const { return alpha_bar_.at(t); }
  double sigma(std::size_t t) const { return sigma_.at(t); }

  /// β_1..β_T.
  std::vector<double> betas() const { return {beta_.begin() + 1, beta_.end()}; }

  /// ᾱ_T / (1 − ᾱ_T).
  double terminal_snr() const {
    const double ab = alpha_bar_.back();
    return ab / (1.0 - ab);
  }

  bool zero_snr() const { return alpha_bar_.back() == 0.0; }

 private:
  ScheduleKind kind_ = ScheduleKind::Custom;
  ScheduleParams params_;
  std::vector<double> beta_;
  std::vector<double> alpha_;
  std::vector<double> alpha_bar_;
  std::vector<double> sigma_;
};

inline NoiseSchedule make_schedule(ScheduleKind kind, std::size_t T, ScheduleParams params = {}) {
  if (T < 1) throw std::invalid_argument("make_schedule: T must be >= 1");
  std::vector<double> betas(T);
  const double steps = static_cast<double>(T);
  switch (kind) {
    case ScheduleKind::Constant:
      if (!(params.beta > 0.0 && params.beta <= 1.0)) throw std::invalid_argument("make_schedule: beta outside (0, 1]");
      std::fill(betas.begin(), betas.end(), params.beta);
      break;
    case ScheduleKind::Sigmoid:
      for (std::size_t t = 1; t <= T; ++t) {
        const double z = 1.0 + 12.0 * static_cast<double>(t - 1) / steps;
        betas[t - 1] = params.sigmoid_offset + params.sigmoid_scale / (1.0 + std::exp(-z));
      }
      break;
    case ScheduleKind::Cosine: {
      // ᾱ_t = f(t)/f(0), f(t) = cos²(t/T · π/2); f(0) = 1.
      auto f = [steps](std::size_t t) {
        const double c = std::cos(static_cast<double>(t) / steps * 0.5 * std::numbers::pi);
        return c * c;
      };
      for (std::size_t t = 1; t < T; ++t) betas[t - 1] = std::min(1.0 - f(t) / f(t - 1), params.cosine_clamp);
      betas[T - 1] = 1.0;
      break;
    }
    case ScheduleKind::Custom:
      throw std::invalid_argument("make_schedule: custom schedules are built with NoiseSchedule::from_betas");
  }
  return NoiseSchedule::from_betas(std::move(betas), kind, params);
}

}  // namespace dmchan::diffusion
