#include "erlangmix/sampler_common.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "erlangmix/errors.hpp"
#include "erlangmix/mixture_model.hpp"
#include "erlangmix/special_math.hpp"

namespace erlangmix {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

double MRange::log_prior() const { return -std::log(static_cast<double>(size())); }

MRange m_range(double M1, double M2, double theta) {
  if (!(theta > 0.0) || !std::isfinite(theta)) throw std::domain_error("theta must be positive");
  const double lo = std::ceil(M1 / theta);
  const double hi = std::ceil(M2 / theta);
  constexpr double kMax = static_cast<double>(std::numeric_limits<int>::max() / 2);
  if (hi > kMax) throw NumericError("M range exceeds integer limits (theta too small)");
  return {std::max(1, static_cast<int>(lo)), std::max(1, static_cast<int>(hi))};
}

void ChainSchedule::validate() const {
  if (iterations < 0) throw ConfigError("iterations must be non-negative");
  if (!(burn_in_fraction >= 0.0 && burn_in_fraction < 1.0)) {
    throw ConfigError("burn-in fraction must lie in [0, 1)");
  }
  if (thin < 1) throw ConfigError("thin must be >= 1");
}

int ChainSchedule::burn_in() const {
  return static_cast<int>(std::floor(burn_in_fraction * iterations));
}

bool ChainSchedule::retains(int t) const {
  const int b = burn_in();
  return t > b && t <= iterations && (t - b) % thin == 0;
}

int ChainSchedule::retained_count() const {
  if (thin < 1 || iterations <= burn_in()) return 0;
  return (iterations - burn_in()) / thin;
}

double AdaptiveStep::step() const { return std::exp(log_step); }

void AdaptiveStep::record(bool accepted) {
  if (frozen) return;
  ++batch_proposed;
  batch_accepted += accepted ? 1 : 0;
  if (batch_proposed < kBatch) return;
  ++batches;
  const double delta = std::min(0.01, 1.0 / std::sqrt(static_cast<double>(batches)));
  const double rate = static_cast<double>(batch_accepted) / batch_proposed;
  log_step += rate > kTarget ? delta : -delta;
  batch_accepted = 0;
  batch_proposed = 0;
}

ClusterView ClusterView::of(std::span<const double> values) {
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  ClusterView view;
  for (double v : sorted) {
    if (!view.atoms.empty() && view.atoms.back() == v) {
      ++view.counts.back();
    } else {
      view.atoms.push_back(v);
      view.counts.push_back(1);
    }
  }
  return view;
}

double PolyaUrnWeights::q0() const { return std::exp(log_q0); }

std::vector<double> PolyaUrnWeights::q() const {
  std::vector<double> out(log_q.size());
  std::transform(log_q.begin(), log_q.end(), out.begin(), [](double l) { return std::exp(l); });
  return out;
}

PolyaUrnWeights polya_urn_weights(std::span<const double> log_kernel,
                                  std::span<const double> log_base_mass,
                                  std::span<const int> atom_components) {
  if (log_kernel.size() != log_base_mass.size() || log_kernel.empty()) {
    throw std::domain_error("kernel and base-mass tables must have equal non-zero length");
  }
  const std::size_t M = log_kernel.size();
  std::vector<double> joint(M);
  for (std::size_t m = 0; m < M; ++m) {
    joint[m] = log_base_mass[m] == kNegInf ? kNegInf : log_kernel[m] + log_base_mass[m];
  }
  PolyaUrnWeights w;
  w.log_q0 = log_sum_exp(joint);
  w.omega.resize(M);
  for (std::size_t m = 0; m < M; ++m) {
    w.omega[m] = w.log_q0 == kNegInf ? 0.0 : std::exp(joint[m] - w.log_q0);
  }
  w.log_q.resize(atom_components.size());
  for (std::size_t j = 0; j < atom_components.size(); ++j) {
    w.log_q[j] = log_kernel[static_cast<std::size_t>(atom_components[j] - 1)];
  }
  return w;
}

std::vector<double> urn_choice_probabilities(const PolyaUrnWeights& w, double alpha,
                                             std::span<const int> counts) {
  if (counts.size() != w.log_q.size()) throw std::domain_error("atom counts do not match urn weights");
  std::vector<double> logs(counts.size() + 1);
  logs[0] = alpha > 0.0 ? std::log(alpha) + w.log_q0 : kNegInf;
  for (std::size_t j = 0; j < counts.size(); ++j) {
    logs[j + 1] = std::log(static_cast<double>(counts[j])) + w.log_q[j];
  }
  const double total = log_sum_exp(logs);
  if (total == kNegInf) throw NumericError("all Polya urn weights underflowed");
  for (double& l : logs) l = std::exp(l - total);
  return logs;
}

double gamma_log_density(double x, double shape, double scale) {
  if (!(x > 0.0)) return kNegInf;
  return (shape - 1.0) * std::log(x) - x / scale - shape * std::log(scale) - std::lgamma(shape);
}

double inverse_quadratic_log_prob(int target, int center, const MRange& range) {
  if (!range.contains(target)) return kNegInf;
  double norm = 0.0;
  for (int j = range.lo; j <= range.hi; ++j) {
    const double d = static_cast<double>(j - center);
    norm += 1.0 / (d * d + 1.0);
  }
  const double d = static_cast<double>(target - center);
  return -std::log(d * d + 1.0) - std::log(norm);
}

int sample_inverse_quadratic(int center, const MRange& range, Rng& rng) {
  std::vector<double> w(static_cast<std::size_t>(range.size()));
  for (int j = range.lo; j <= range.hi; ++j) {
    const double d = static_cast<double>(j - center);
    w[static_cast<std::size_t>(j - range.lo)] = 1.0 / (d * d + 1.0);
  }
  return range.lo + static_cast<int>(rng.categorical(w));
}

std::vector<double> m_candidate_log_likelihood(std::span<const LatentObservation> obs,
                                               double theta, const MRange& range) {
  const auto K = static_cast<std::size_t>(range.size());
  // diff[k] accumulates terms constant for every candidate index >= k.
  std::vector<double> diff(K + 1, 0.0);
  std::vector<double> out(K, 0.0);
  const double log_theta = std::log(theta);

  for (const auto& o : obs) {
    const int bin = component_of(o.phi, range.hi, theta);
    if (bin < range.lo) {
      diff[0] += observation_log_kernel(o.y, o.event, bin, theta);
      continue;
    }
    // Candidates j <= bin use component j; candidates j > bin use component bin.
    const double x = o.y / theta;
    const double log_x = std::log(x);
    double lpdf = erlang_log_pdf(o.y, {range.lo, theta});
    double lsf = o.event ? 0.0 : erlang_log_sf(o.y, {range.lo, theta});
    double at_bin = 0.0;
    for (int j = range.lo; j <= bin; ++j) {
      const double v = o.event ? lpdf : lsf;
      out[static_cast<std::size_t>(j - range.lo)] += v;
      at_bin = v;
      const double next_lpdf = lpdf + log_x - std::log(static_cast<double>(j));
      if (!o.event) lsf = log_add_exp(lsf, next_lpdf + log_theta);
      lpdf = next_lpdf;
    }
    if (bin < range.hi) diff[static_cast<std::size_t>(bin - range.lo + 1)] += at_bin;
  }
  double running = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    running += diff[k];
    out[k] += running;
  }
  return out;
}

int sample_M(std::span<const LatentObservation> obs, double theta, const MRange& range, Rng& rng) {
  const auto ll = m_candidate_log_likelihood(obs, theta, range);
  return range.lo + static_cast<int>(rng.categorical_log(ll));
}

AlphaMixture alpha_mixture(double eta, std::size_t n, std::size_t n_star, double a_alpha,
                           double b_alpha) {
  const double rate = 1.0 / b_alpha - std::log(eta);
  const double odds_first = a_alpha + static_cast<double>(n_star) - 1.0;
  const double odds_second = static_cast<double>(n) * rate;
  AlphaMixture mix;
  mix.weight_first = odds_first / (odds_second + odds_first);
  mix.shape_first = a_alpha + static_cast<double>(n_star);
  mix.shape_second = a_alpha + static_cast<double>(n_star) - 1.0;
  mix.scale = 1.0 / rate;
  return mix;
}

double draw_alpha(double alpha, std::size_t n, std::size_t n_star, double a_alpha, double b_alpha,
                  Rng& rng) {
  if (n == 0) throw std::domain_error("alpha update needs at least one observation");
  const double eta = rng.beta(alpha + 1.0, static_cast<double>(n));
  const AlphaMixture mix = alpha_mixture(eta, n, n_star, a_alpha, b_alpha);
  const bool first = rng.uniform() < mix.weight_first;
  const double shape = first ? mix.shape_first : mix.shape_second;
  return std::max(rng.gamma(shape, mix.scale), std::numeric_limits<double>::min());
}

std::vector<double> exp_bin_log_masses(int M, double theta, double zeta) {
  std::vector<double> out(static_cast<std::size_t>(M));
  const double r = theta / zeta;
  const double log_width = log1m_exp(-r);
  for (int m = 1; m <= M; ++m) {
    const double log_left = -(m - 1) * r;
    out[static_cast<std::size_t>(m - 1)] = m < M ? log_left + log_width : log_left;
  }
  return out;
}

double snap_into_bin(double v, int m, int M, double theta) {
  for (int guard = 0; guard < 64; ++guard) {
    const int c = component_of(v, M, theta);
    if (c == m) return v;
    if (c < m) {
      v = std::max(std::nextafter(v, std::numeric_limits<double>::infinity()),
                   (m - 1) * theta * (1.0 + 4e-12));
    } else {
      v = std::nextafter(std::min(v, m * theta), 0.0);
    }
  }
  throw NumericError("could not place latent draw inside its bin");
}

}  // namespace erlangmix
