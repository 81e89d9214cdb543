#include "erlangmix/posterior.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "erlangmix/errors.hpp"
#include "erlangmix/special_math.hpp"

namespace erlangmix {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kSurvivalFloor = 1e-12;

void check_level(double level) {
  if (!(level >= 0.0 && level < 1.0)) throw std::domain_error("credible level must lie in [0, 1)");
}

std::array<double, 2> interval_of(std::span<const double> draws, double level) {
  return {empirical_quantile(draws, 0.5 * (1.0 - level)), empirical_quantile(draws, 0.5 * (1.0 + level))};
}

std::vector<double> bin_masses(int M, double theta, const LogNormalParams& p) {
  auto out = ddp::lognormal_bin_log_masses(M, theta, p);
  for (double& v : out) v = std::exp(v);
  return out;
}

std::vector<double> edges(int M, double theta) {
  std::vector<double> out(static_cast<std::size_t>(M) + 1);
  for (int m = 0; m < M; ++m) out[static_cast<std::size_t>(m)] = m * theta;
  out.back() = kInf;
  return out;
}

}  // namespace

GStarSpec GStarSpec::from_state(const DpChainState& state) {
  return {state.alpha, state.zeta, state.phi};
}

std::vector<double> GStarSpec::dirichlet_parameters(int M, double theta) const {
  if (!(alpha >= 0.0) || !(zeta > 0.0)) throw std::domain_error("invalid G0* parameters");
  std::vector<double> params(static_cast<std::size_t>(M), 0.0);
  if (alpha > 0.0) {
    const auto log_mass = exp_bin_log_masses(M, theta, zeta);
    for (std::size_t m = 0; m < params.size(); ++m) params[m] = alpha * std::exp(log_mass[m]);
  }
  for (double a : atoms) params[static_cast<std::size_t>(component_of(a, M, theta) - 1)] += 1.0;
  return params;
}

std::vector<double> sample_dirichlet(std::span<const double> params, Rng& rng) {
  std::vector<double> logs(params.size(), kNegInf);
  bool any = false;
  for (std::size_t m = 0; m < params.size(); ++m) {
    if (!(params[m] >= 0.0) || !std::isfinite(params[m])) {
      throw std::domain_error("Dirichlet parameters must be finite and non-negative");
    }
    if (params[m] > 0.0) {
      logs[m] = rng.log_gamma(params[m]);
      any = true;
    }
  }
  if (!any) throw std::domain_error("Dirichlet parameters are all zero");
  const double total = log_sum_exp(logs);
  std::vector<double> out(params.size());
  for (std::size_t m = 0; m < params.size(); ++m) out[m] = std::exp(logs[m] - total);
  // Absorb rounding so the vector sums to one to working precision.
  const double s = std::accumulate(out.begin(), out.end(), 0.0);
  for (double& w : out) w /= s;
  return out;
}

WeightVector sample_weights_posterior(const GStarSpec& gstar, int M, double theta, Rng& rng) {
  return WeightVector(theta, sample_dirichlet(gstar.dirichlet_parameters(M, theta), rng));
}

std::vector<WeightVector> posterior_weight_draws(std::span<const DpChainState> draws, Rng& rng) {
  std::vector<WeightVector> out;
  out.reserve(draws.size());
  for (const auto& s : draws) {
    out.push_back(sample_weights_posterior(GStarSpec::from_state(s), s.M, s.theta, rng));
  }
  return out;
}

std::string_view to_string(FunctionalKind k) {
  switch (k) {
    case FunctionalKind::Density:
      return "density";
    case FunctionalKind::Survival:
      return "survival";
    case FunctionalKind::Hazard:
      return "hazard";
  }
  return "unknown";
}

double empirical_quantile(std::span<const double> values, double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::domain_error("quantile level must lie in [0, 1]");
  std::vector<double> v;
  v.reserve(values.size());
  for (double x : values) {
    if (!std::isnan(x)) v.push_back(x);
  }
  if (v.empty()) return kNaN;
  std::sort(v.begin(), v.end());
  const double h = p * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

std::array<CurveMatrix, 3> evaluate_curves(std::span<const WeightVector> weights,
                                           std::span<const double> grid) {
  std::array<CurveMatrix, 3> out;
  for (auto& c : out) {
    c.draws = weights.size();
    c.points = grid.size();
    c.values.resize(weights.size() * grid.size());
  }
  for (std::size_t d = 0; d < weights.size(); ++d) {
    for (std::size_t j = 0; j < grid.size(); ++j) {
      const MixtureFunctionals f = evaluate_mixture(grid[j], weights[d]);
      const double surv = std::exp(f.log_survival);
      const std::size_t k = d * grid.size() + j;
      out[0].values[k] = std::exp(f.log_density);
      out[1].values[k] = surv;
      out[2].values[k] = surv < kSurvivalFloor ? kNaN : f.hazard();
    }
  }
  return out;
}

FunctionalSummary summarize_curves(const CurveMatrix& curves, FunctionalKind kind,
                                   std::span<const double> grid, double level) {
  check_level(level);
  if (curves.draws == 0) throw std::domain_error("cannot summarize an empty set of draws");
  if (curves.points != grid.size()) throw std::domain_error("curve matrix does not match the grid");
  FunctionalSummary s;
  s.kind = kind;
  s.level = level;
  s.grid.assign(grid.begin(), grid.end());
  s.mean.resize(grid.size());
  s.lower.resize(grid.size());
  s.upper.resize(grid.size());
  std::vector<double> column(curves.draws);
  for (std::size_t j = 0; j < grid.size(); ++j) {
    double sum = 0.0;
    std::size_t used = 0;
    for (std::size_t d = 0; d < curves.draws; ++d) {
      column[d] = curves.at(d, j);
      if (!std::isnan(column[d])) {
        sum += column[d];
        ++used;
      }
    }
    s.mean[j] = used > 0 ? sum / static_cast<double>(used) : kNaN;
    if (level == 0.0) {
      s.lower[j] = s.upper[j] = s.mean[j];
    } else {
      const auto band = interval_of(column, level);
      s.lower[j] = std::min(band[0], s.mean[j]);
      s.upper[j] = std::max(band[1], s.mean[j]);
    }
  }
  return s;
}

FunctionalSummary summarize_functional(std::span<const WeightVector> weights, FunctionalKind kind,
                                       std::span<const double> grid, double level) {
  if (weights.empty()) throw std::domain_error("cannot summarize an empty chain");
  const auto curves = evaluate_curves(weights, grid);
  return summarize_curves(curves[static_cast<std::size_t>(kind)], kind, grid, level);
}

FunctionalSummary summarize_functional(std::span<const DpChainState> draws, FunctionalKind kind,
                                       std::span<const double> grid, double level, Rng& rng) {
  if (draws.empty()) throw std::domain_error("cannot summarize an empty chain");
  const auto weights = posterior_weight_draws(draws, rng);
  return summarize_functional(weights, kind, grid, level);
}

int effective_components(const WeightVector& w, double threshold) {
  return static_cast<int>(
      std::count_if(w.omega().begin(), w.omega().end(), [threshold](double x) { return x > threshold; }));
}

std::vector<double> uniform_grid(double max, std::size_t points) {
  if (!(max > 0.0) || !std::isfinite(max)) throw ConfigError("grid maximum must be positive");
  if (points == 0) throw ConfigError("grid needs at least one point");
  std::vector<double> grid(points);
  for (std::size_t k = 0; k < points; ++k) {
    grid[k] = max * static_cast<double>(k + 1) / static_cast<double>(points);
  }
  return grid;
}

std::vector<double> default_grid(const SurvivalDataset& data, std::size_t points) {
  if (data.empty()) throw ConfigError("default grid needs observations");
  std::vector<double> times(data.size());
  std::transform(data.records().begin(), data.records().end(), times.begin(),
                 [](const SurvivalRecord& r) { return r.time; });
  return uniform_grid(1.1 * empirical_quantile(times, 0.995), points);
}

GroupWeightPair sample_group_weights(const DdpChainState& state, const DdpHyperparams& hp,
                                     Rng& rng) {
  const int MC = state.M[0];
  const int MT = state.M[1];
  const auto nC = static_cast<std::size_t>(MC);
  const auto nT = static_cast<std::size_t>(MT);
  const BivariateNormalParams base = ddp::base_measure(state, hp);

  std::vector<double> params(nC * nT, 0.0);
  if (state.alpha > 0.0) {
    if (base.cov(0, 1) == 0.0) {
      const auto pC = bin_masses(MC, state.theta[0], {base.mean(0), base.cov(0, 0)});
      const auto pT = bin_masses(MT, state.theta[1], {base.mean(1), base.cov(1, 1)});
      for (std::size_t m = 0; m < nC; ++m) {
        for (std::size_t k = 0; k < nT; ++k) params[m * nT + k] = state.alpha * pC[m] * pT[k];
      }
    } else {
      const auto eC = edges(MC, state.theta[0]);
      const auto eT = edges(MT, state.theta[1]);
      for (std::size_t m = 0; m < nC; ++m) {
        for (std::size_t k = 0; k < nT; ++k) {
          params[m * nT + k] =
              state.alpha * bln_rectangle_mass({eC[m], eT[k]}, {eC[m + 1], eT[k + 1]}, base);
        }
      }
    }
  }
  for (const auto& a : state.phi) {
    const auto m = static_cast<std::size_t>(component_of(a[0], MC, state.theta[0]) - 1);
    const auto k = static_cast<std::size_t>(component_of(a[1], MT, state.theta[1]) - 1);
    params[m * nT + k] += 1.0;
  }
  const auto cells = sample_dirichlet(params, rng);
  std::vector<double> wC(nC, 0.0);
  std::vector<double> wT(nT, 0.0);
  for (std::size_t m = 0; m < nC; ++m) {
    for (std::size_t k = 0; k < nT; ++k) {
      wC[m] += cells[m * nT + k];
      wT[k] += cells[m * nT + k];
    }
  }
  return {WeightVector(state.theta[0], std::move(wC)), WeightVector(state.theta[1], std::move(wT))};
}

std::vector<GroupWeightPair> posterior_group_weight_draws(std::span<const DdpChainState> draws,
                                                          const DdpHyperparams& hp, Rng& rng) {
  std::vector<GroupWeightPair> out;
  out.reserve(draws.size());
  for (const auto& s : draws) out.push_back(sample_group_weights(s, hp, rng));
  return out;
}

ContrastSummary contrast_at_times(std::span<const GroupWeightPair> draws,
                                  std::span<const double> times, double level) {
  check_level(level);
  ContrastSummary out;
  out.level = level;
  out.time_points.assign(times.begin(), times.end());
  for (double t : times) {
    if (!(t > 0.0) || !std::isfinite(t)) throw ConfigError("contrast times must be positive");
    std::vector<double> ds(draws.size());
    std::vector<double> dh(draws.size());
    for (std::size_t d = 0; d < draws.size(); ++d) {
      const auto c = evaluate_mixture(t, draws[d].control);
      const auto tr = evaluate_mixture(t, draws[d].treatment);
      const double sc = std::exp(c.log_survival);
      const double st = std::exp(tr.log_survival);
      ds[d] = st - sc;
      dh[d] = (sc < kSurvivalFloor || st < kSurvivalFloor) ? kNaN : tr.hazard() - c.hazard();
    }
    out.survival_interval.push_back(interval_of(ds, level));
    out.hazard_interval.push_back(interval_of(dh, level));
    out.survival_draws.push_back(std::move(ds));
    out.hazard_draws.push_back(std::move(dh));
  }
  return out;
}

std::vector<PriorRealization> prior_realizations(double alpha, double zeta, int M, double theta,
                                                 std::size_t count, std::span<const double> grid,
                                                 Rng& rng) {
  if (!(alpha > 0.0)) throw std::domain_error("alpha must be positive");
  const GStarSpec prior{alpha, zeta, {}};
  const auto params = prior.dirichlet_parameters(M, theta);
  std::vector<PriorRealization> out;
  out.reserve(count);
  for (std::size_t r = 0; r < count; ++r) {
    WeightVector w(theta, sample_dirichlet(params, rng));
    std::vector<double> density(grid.size());
    for (std::size_t j = 0; j < grid.size(); ++j) {
      density[j] = std::exp(evaluate_mixture(grid[j], w).log_density);
    }
    out.push_back({std::move(w), std::move(density)});
  }
  return out;
}

double l1_distance(std::span<const double> grid, std::span<const double> a,
                   std::span<const double> b, double a0, double b0) {
  if (a.size() != grid.size() || b.size() != grid.size()) {
    throw std::domain_error("curves must match the grid");
  }
  double total = 0.0;
  double prev_t = 0.0;
  double prev = std::abs(a0 - b0);
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const double cur = std::abs(a[j] - b[j]);
    total += 0.5 * (prev + cur) * (grid[j] - prev_t);
    prev = cur;
    prev_t = grid[j];
  }
  return total;
}

}  // namespace erlangmix
