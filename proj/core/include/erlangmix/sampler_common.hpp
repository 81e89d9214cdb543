#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "erlangmix/rng.hpp"

namespace erlangmix {

/// Candidate set ceil(M1/theta)..ceil(M2/theta) of the uniform prior on M.
struct MRange {
  int lo = 1;
  int hi = 1;
  int size() const { return hi - lo + 1; }
  bool contains(int M) const { return M >= lo && M <= hi; }
  double log_prior() const;  ///< log p(M | theta) for any M inside the range
};

MRange m_range(double M1, double M2, double theta);

/// Iteration schedule shared by both chain drivers. Iterations are numbered
/// from 1; iteration t is retained when t > burn_in() and (t - burn_in()) is a
/// multiple of thin.
struct ChainSchedule {
  int iterations = 20000;
  double burn_in_fraction = 0.25;
  int thin = 8;

  void validate() const;
  int burn_in() const;
  bool retains(int t) const;
  int retained_count() const;
};

struct MoveStats {
  std::int64_t proposed = 0;
  std::int64_t accepted = 0;
  double rate() const { return proposed > 0 ? static_cast<double>(accepted) / proposed : 0.0; }
  void record(bool ok) {
    ++proposed;
    accepted += ok ? 1 : 0;
  }
};

/// Log-scale random-walk step tuned by batch adaptation: after every batch of
/// 50 proposals log(step) moves by +/- min(0.01, k^-1/2) toward acceptance
/// 0.44, where k counts batches. Adaptation stops once frozen.
struct AdaptiveStep {
  static constexpr int kBatch = 50;
  static constexpr double kTarget = 0.44;

  double log_step = 0.0;
  int batch_accepted = 0;
  int batch_proposed = 0;
  int batches = 0;
  bool frozen = false;

  double step() const;
  void record(bool accepted);
};

/// Distinct values of a latent vector and their multiplicities. Equality is
/// exact: atoms are only ever copied, never recomputed.
struct ClusterView {
  std::vector<double> atoms;
  std::vector<int> counts;

  std::size_t n_star() const { return atoms.size(); }
  static ClusterView of(std::span<const double> values);
};

/// Per-observation Polya urn quantities: the base-measure integrated kernel
/// q0, the kernel q_j at each distinct leave-one-out atom, and the bin
/// probabilities Omega of a fresh draw. Stored in log space; omega is
/// normalized.
struct PolyaUrnWeights {
  double log_q0 = 0.0;
  std::vector<double> log_q;
  std::vector<double> omega;

  double q0() const;
  std::vector<double> q() const;
};

/// Urn weights from the per-component log kernel (m = 1..M), the log base
/// mass of each bin, and the component index (1-based) of each distinct atom.
PolyaUrnWeights polya_urn_weights(std::span<const double> log_kernel,
                                  std::span<const double> log_base_mass,
                                  std::span<const int> atom_components);

/// Normalized probabilities of a fresh draw (front) and of reusing each atom,
/// alpha q0 / A and n_j q_j / A.
std::vector<double> urn_choice_probabilities(const PolyaUrnWeights& w, double alpha,
                                             std::span<const int> counts);

/// log Ga(x | shape, scale).
double gamma_log_density(double x, double shape, double scale);

/// log p(M_star | M_center) for the inverse-quadratic proposal over range.
double inverse_quadratic_log_prob(int target, int center, const MRange& range);
int sample_inverse_quadratic(int center, const MRange& range, Rng& rng);

/// Observation in the latent-variable likelihood.
struct LatentObservation {
  double y = 0.0;
  bool event = true;
  double phi = 0.0;
};

/// Augmented log likelihood at every candidate M in range (index 0 is
/// range.lo). Only observations whose latent bin reaches a candidate depend
/// on it, which keeps the cost near O(n + range) for typical states.
std::vector<double> m_candidate_log_likelihood(std::span<const LatentObservation> obs,
                                               double theta, const MRange& range);

/// Categorical draw of M from its full conditional over range.
int sample_M(std::span<const LatentObservation> obs, double theta, const MRange& range, Rng& rng);

/// Two-component gamma mixture of the auxiliary-variable update for the DP
/// total mass, given eta ~ Beta(alpha + 1, n).
struct AlphaMixture {
  double weight_first = 0.0;  ///< weight of Ga(a + n*, scale)
  double shape_first = 0.0;
  double shape_second = 0.0;  ///< a + n* - 1
  double scale = 0.0;         ///< (1/b - log eta)^-1
};

AlphaMixture alpha_mixture(double eta, std::size_t n, std::size_t n_star, double a_alpha,
                           double b_alpha);

/// One auxiliary-variable draw of alpha (alpha ~ Ga(a_alpha, b_alpha) prior,
/// b_alpha a scale).
double draw_alpha(double alpha, std::size_t n, std::size_t n_star, double a_alpha, double b_alpha,
                  Rng& rng);

/// log(G(m theta) - G((m-1) theta)) for G = Exp(mean zeta), last bin open.
std::vector<double> exp_bin_log_masses(int M, double theta, double zeta);

/// Snaps a value drawn inside bin m back onto the bin as component_of sees it.
double snap_into_bin(double v, int m, int M, double theta);

}  // namespace erlangmix
