#include "erlangmix/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "erlangmix/special_math.hpp"

namespace erlangmix {

Rng::Rng(std::uint64_t seed) : engine_(seed) {}

double Rng::uniform() {
  // 53-bit mantissa, shifted by half an ulp so both endpoints are excluded.
  return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

double Rng::normal() { return normal_(engine_); }

double Rng::log_gamma(double shape) {
  if (!(shape > 0.0) || !std::isfinite(shape)) throw std::domain_error("gamma shape must be positive");
  // Marsaglia-Tsang; shapes below one are boosted by U^(1/shape).
  const double boost = shape < 1.0 ? std::log(uniform()) / shape : 0.0;
  const double a = shape < 1.0 ? shape + 1.0 : shape;
  const double d = a - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x;
    double v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x ||
        std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) {
      return std::log(d * v) + boost;
    }
  }
}

double Rng::gamma(double shape, double scale) {
  if (!(scale > 0.0)) throw std::domain_error("gamma scale must be positive");
  return std::exp(log_gamma(shape)) * scale;
}

double Rng::beta(double a, double b) {
  const double la = log_gamma(a);
  const double lb = log_gamma(b);
  // x / (x + y) computed from logs to survive underflow of tiny shapes.
  return 1.0 / (1.0 + std::exp(lb - la));
}

double Rng::exponential(double mean) {
  if (!(mean > 0.0)) throw std::domain_error("exponential mean must be positive");
  return -mean * std::log(uniform());
}

std::size_t Rng::categorical_log(std::span<const double> log_weights) {
  if (log_weights.empty()) throw std::domain_error("categorical over an empty set");
  const double hi = *std::max_element(log_weights.begin(), log_weights.end());
  if (!std::isfinite(hi)) throw std::domain_error("categorical weights are all zero or invalid");
  double total = 0.0;
  for (double lw : log_weights) total += std::exp(lw - hi);
  double target = uniform() * total;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < log_weights.size(); ++i) {
    const double w = std::exp(log_weights[i] - hi);
    if (w > 0.0) last_positive = i;
    if (target < w) return i;
    target -= w;
  }
  return last_positive;
}

std::size_t Rng::categorical(std::span<const double> weights) {
  std::vector<double> logs(weights.size());
  std::transform(weights.begin(), weights.end(), logs.begin(), [](double w) {
    if (w < 0.0) throw std::domain_error("categorical weights must be non-negative");
    return w > 0.0 ? std::log(w) : -std::numeric_limits<double>::infinity();
  });
  return categorical_log(logs);
}

std::uint64_t Rng::split() { return engine_(); }

}  // namespace erlangmix
