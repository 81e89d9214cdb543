#pragma once

#include <array>
#include <span>
#include <string_view>
#include <vector>

#include "erlangmix/ddp_sampler.hpp"
#include "erlangmix/dp_sampler.hpp"
#include "erlangmix/mixture_model.hpp"
#include "erlangmix/rng.hpp"

namespace erlangmix {

/// Centering measure of the conditional DP posterior given the latent atoms:
/// G0* = (alpha Exp(zeta) + sum_i delta_{phi_i}) / (alpha + n), with total
/// mass alpha* = alpha + n.
struct GStarSpec {
  double alpha = 1.0;
  double zeta = 1.0;
  std::vector<double> atoms;

  static GStarSpec from_state(const DpChainState& state);

  double alpha_star() const { return alpha + static_cast<double>(atoms.size()); }
  double base_weight() const { return alpha / alpha_star(); }
  double atom_weight() const { return 1.0 / alpha_star(); }

  /// alpha* G0*(B_m) = alpha Exp(zeta)(B_m) + #atoms in B_m, m = 1..M.
  std::vector<double> dirichlet_parameters(int M, double theta) const;
};

/// Dirichlet draw by normalized gamma variates, built on log-gamma draws so
/// that very small parameters stay representable. Zero parameters give
/// exactly zero weight. Throws std::domain_error if all are zero.
std::vector<double> sample_dirichlet(std::span<const double> params, Rng& rng);

WeightVector sample_weights_posterior(const GStarSpec& gstar, int M, double theta, Rng& rng);

/// One posterior weight vector per retained state.
std::vector<WeightVector> posterior_weight_draws(std::span<const DpChainState> draws, Rng& rng);

enum class FunctionalKind { Density, Survival, Hazard };
std::string_view to_string(FunctionalKind k);

/// Pointwise posterior mean and equal-tailed credible band on a grid.
/// Hazard points where a draw's survival falls below 1e-12 are excluded from
/// that point's summary; points with no usable draw are NaN.
struct FunctionalSummary {
  FunctionalKind kind = FunctionalKind::Density;
  double level = 0.95;
  std::vector<double> grid;
  std::vector<double> mean;
  std::vector<double> lower;
  std::vector<double> upper;
};

/// Type-7 (linear interpolation) empirical quantile; NaN entries ignored.
double empirical_quantile(std::span<const double> values, double p);

/// Per-draw curves: rows are draws, columns grid points.
struct CurveMatrix {
  std::size_t draws = 0;
  std::size_t points = 0;
  std::vector<double> values;
  double at(std::size_t d, std::size_t j) const { return values[d * points + j]; }
};

/// Density, survival and hazard of every weight draw on the grid in one pass.
std::array<CurveMatrix, 3> evaluate_curves(std::span<const WeightVector> weights,
                                           std::span<const double> grid);

/// Pointwise summary of one curve matrix. level == 0 collapses the band onto
/// the mean.
FunctionalSummary summarize_curves(const CurveMatrix& curves, FunctionalKind kind,
                                   std::span<const double> grid, double level);

FunctionalSummary summarize_functional(std::span<const WeightVector> weights, FunctionalKind kind,
                                       std::span<const double> grid, double level = 0.95);

FunctionalSummary summarize_functional(std::span<const DpChainState> draws, FunctionalKind kind,
                                       std::span<const double> grid, double level, Rng& rng);

/// Number of weights strictly above threshold.
int effective_components(const WeightVector& w, double threshold = 0.01);

/// 512 equally spaced positive points ending at 1.1 times the 99.5th
/// percentile of the observed times.
std::vector<double> default_grid(const SurvivalDataset& data, std::size_t points = 512);
std::vector<double> uniform_grid(double max, std::size_t points);

/// Group-specific weight vectors of one DDP posterior draw.
struct GroupWeightPair {
  WeightVector control;
  WeightVector treatment;
  const WeightVector& operator[](Group g) const { return g == Group::Control ? control : treatment; }
};

/// Joint draw of (omega_C, omega_T): a Dirichlet over the product cells
/// B_Cm x B_Tk with parameters alpha LN2(cell) + #atoms in cell, then
/// marginal sums. Each side is the Dirichlet of its own group by aggregation.
GroupWeightPair sample_group_weights(const DdpChainState& state, const DdpHyperparams& hp,
                                     Rng& rng);

std::vector<GroupWeightPair> posterior_group_weight_draws(std::span<const DdpChainState> draws,
                                                          const DdpHyperparams& hp, Rng& rng);

/// Per-draw S_T - S_C and h_T - h_C at fixed times with equal-tailed intervals.
struct ContrastSummary {
  std::vector<double> time_points;
  std::vector<std::vector<double>> survival_draws;  ///< [time][draw]
  std::vector<std::vector<double>> hazard_draws;    ///< [time][draw], NaN where masked
  std::vector<std::array<double, 2>> survival_interval;
  std::vector<std::array<double, 2>> hazard_interval;
  double level = 0.95;
};

ContrastSummary contrast_at_times(std::span<const GroupWeightPair> draws,
                                  std::span<const double> times, double level = 0.95);

struct PriorRealization {
  WeightVector weights;
  std::vector<double> density;  ///< on the supplied grid
};

/// Draws omega ~ Dir(alpha G0(B_1), ..., alpha G0(B_M)) with G0 = Exp(zeta)
/// and evaluates each realized density on grid.
std::vector<PriorRealization> prior_realizations(double alpha, double zeta, int M, double theta,
                                                 std::size_t count, std::span<const double> grid,
                                                 Rng& rng);

/// Trapezoid-rule integral of |a - b| over the grid, with the segment from
/// 0 to grid[0] included when a0 and b0 (the values at t = 0) are given.
double l1_distance(std::span<const double> grid, std::span<const double> a,
                   std::span<const double> b, double a0 = 0.0, double b0 = 0.0);

}  // namespace erlangmix
