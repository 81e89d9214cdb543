#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace erlangmix {

/// Seeded random stream used by every sampler. Given the same seed the
/// sequence of variates is identical, which is the reproducibility contract
/// of the chain drivers and the CLI.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  /// Uniform on the open interval (0, 1).
  double uniform();
  double normal();
  /// Gamma with the given shape and scale (mean shape * scale).
  double gamma(double shape, double scale);
  /// log of a Gamma(shape, 1) variate; stays finite for shapes far below 1
  /// where the variate itself underflows.
  double log_gamma(double shape);
  double beta(double a, double b);
  double exponential(double mean);

  /// Index drawn with probability proportional to exp(log_weights[i]).
  /// Entries equal to -infinity are never selected.
  std::size_t categorical_log(std::span<const double> log_weights);
  std::size_t categorical(std::span<const double> weights);

  /// Seed for an independent child stream (used to fan out parallel chains).
  std::uint64_t split();

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace erlangmix
