#pragma once

#include <span>
#include <vector>

namespace erlangmix {

/// Sample autocorrelations at lags 0..max_lag (FFT-free direct sums).
std::vector<double> autocorrelation(std::span<const double> x, std::size_t max_lag);

/// Effective sample size by Geyer's initial monotone sequence estimator.
/// Returns the chain length for constant chains.
double effective_sample_size(std::span<const double> x);

}  // namespace erlangmix
