#include <cmath>
#include <stdexcept>

#include "scenediff/diffusion.hpp"

namespace scenediff {

ScheduleKind schedule_kind_from_string(const std::string& name) {
  if (name == "linear") return ScheduleKind::kLinear;
  if (name == "cosine") return ScheduleKind::kCosine;
  throw std::invalid_argument("unknown schedule kind: " + name);
}

std::string to_string(ScheduleKind kind) {
  return kind == ScheduleKind::kLinear ? "linear" : "cosine";
}

VarianceSchedule make_schedule(int steps, double beta_min, double beta_max, ScheduleKind kind) {
  if (steps < 1) throw std::invalid_argument("schedule needs at least one step");
  if (!(beta_min > 0.0) || !(beta_min <= beta_max) || !(beta_max < 1.0)) {
    throw std::invalid_argument("schedule bounds must satisfy 0 < beta_min <= beta_max < 1");
  }
  VarianceSchedule s;
  s.kind = kind;
  s.beta_min = beta_min;
  s.beta_max = beta_max;
  s.betas.resize(steps);

  if (kind == ScheduleKind::kLinear) {
    for (int k = 0; k < steps; ++k) {
      s.betas[k] = steps == 1 ? beta_min
                              : beta_min + (beta_max - beta_min) * k / (steps - 1.0);
    }
  } else {
    // Squared-cosine cumulative schedule, betas clamped to the given bounds.
    const double offset = 0.008;
    auto f = [&](double k) {
      const double a = (k / steps + offset) / (1.0 + offset) * (3.141592653589793 / 2.0);
      return std::cos(a) * std::cos(a);
    };
    double prev = 1.0;
    for (int k = 1; k <= steps; ++k) {
      const double ab = f(k) / f(0);
      double beta = 1.0 - ab / prev;
      beta = std::min(std::max(beta, beta_min), beta_max);
      s.betas[k - 1] = beta;
      prev *= 1.0 - beta;
    }
  }

  s.alphas.resize(steps);
  s.alpha_bars.resize(steps);
  double bar = 1.0;
  for (int k = 0; k < steps; ++k) {
    s.alphas[k] = 1.0 - s.betas[k];
    bar *= s.alphas[k];
    s.alpha_bars[k] = bar;
  }
  return s;
}

VarianceSchedule make_default_schedule(int steps) {
  const double scale = 1000.0 / steps;
  return make_schedule(steps, 1e-4 * scale, std::min(0.02 * scale, 0.999), ScheduleKind::kLinear);
}

}  // namespace scenediff
