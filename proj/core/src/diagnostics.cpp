#include "erlangmix/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace erlangmix {

std::vector<double> autocorrelation(std::span<const double> x, std::size_t max_lag) {
  const std::size_t n = x.size();
  if (n == 0) return {};
  max_lag = std::min(max_lag, n - 1);
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  std::vector<double> acf(max_lag + 1, 0.0);
  for (std::size_t k = 0; k <= max_lag; ++k) {
    double s = 0.0;
    for (std::size_t i = 0; i + k < n; ++i) s += (x[i] - mean) * (x[i + k] - mean);
    acf[k] = s / static_cast<double>(n);
  }
  const double var = acf[0];
  if (var <= 0.0) return std::vector<double>(max_lag + 1, 0.0);
  for (double& a : acf) a /= var;
  return acf;
}

double effective_sample_size(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n < 4) return static_cast<double>(n);
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  const auto cov = [&](std::size_t k) {
    double s = 0.0;
    for (std::size_t i = 0; i + k < n; ++i) s += (x[i] - mean) * (x[i + k] - mean);
    return s / static_cast<double>(n);
  };
  const double var = cov(0);
  if (!(var > 0.0)) return static_cast<double>(n);
  // Pair sums Gamma_k = rho_2k + rho_2k+1, truncated at the first
  // non-positive one and forced non-increasing. Lags are computed on demand.
  double sum = 0.0;
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; 2 * k + 1 < n; ++k) {
    double gamma = (k == 0 ? 1.0 : cov(2 * k) / var) + cov(2 * k + 1) / var;
    if (gamma <= 0.0) break;
    gamma = std::min(gamma, prev);
    prev = gamma;
    sum += gamma;
  }
  const double tau = std::max(2.0 * sum - 1.0, 1.0 / static_cast<double>(n));
  return std::min(static_cast<double>(n) / tau, static_cast<double>(n) * std::log10(static_cast<double>(n)));
}

}  // namespace erlangmix
