#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "erlangmix/mixture_model.hpp"
#include "erlangmix/rng.hpp"
#include "erlangmix/sampler_common.hpp"

namespace erlangmix {

/// Priors of the one-group model. Gamma and inverse-gamma laws are written
/// (shape, scale): alpha ~ Ga(a_alpha, b_alpha), zeta ~ inv-Ga(a_zeta, b_zeta),
/// theta ~ Ga(a_theta, b_theta), M | theta ~ Unif(ceil(M1/theta)..ceil(M2/theta)).
struct DpHyperparams {
  double a_alpha = 2.0;
  double b_alpha = 1.0;
  double a_zeta = 3.0;
  double b_zeta = 4.0;
  double a_theta = 1.0;
  double b_theta = 1.0;
  double M1 = 13.0;
  double M2 = 39.0;

  void validate() const;
  MRange range(double theta) const { return m_range(M1, M2, theta); }
};

struct DpChainState {
  double theta = 1.0;
  int M = 1;
  double alpha = 1.0;
  double zeta = 1.0;
  std::vector<double> phi;
  AdaptiveStep theta_step;  ///< random-walk move on log theta
  AdaptiveStep joint_step;  ///< joint (M, theta) move
  std::int64_t iteration = 0;
};

/// Which updates a sweep performs. All on by default; tests switch some off
/// to hold parameters fixed.
struct DpMoveSet {
  bool phi = true;
  bool zeta = true;
  bool alpha = true;
  bool M = true;
  bool theta = true;
  bool joint = true;
};

struct DpRunOptions {
  DpMoveSet moves;
  std::optional<DpChainState> initial;
};

struct DpChainOutput {
  std::vector<DpChainState> draws;
  MoveStats theta_moves;
  MoveStats joint_moves;
};

namespace dp {

/// theta at its prior mean, M mid-range, zeta at the sample mean, alpha at its
/// prior mean, phi_i = y_i capped just above the top of the basis.
DpChainState initial_state(const SurvivalDataset& data, const DpHyperparams& hp);

std::vector<LatentObservation> latent_observations(const SurvivalDataset& data,
                                                   std::span<const double> phi);

/// Normalized full conditional of M over hp.range(state.theta).
std::vector<double> M_conditional(const DpChainState& state, const SurvivalDataset& data,
                                  const DpHyperparams& hp);
int update_M(DpChainState& state, const SurvivalDataset& data, const DpHyperparams& hp, Rng& rng);

/// log acceptance ratio of moving theta to theta_star with M held fixed
/// (prior, likelihood, log-scale Jacobian, and the p(M | theta) factor).
double theta_rw_log_ratio(const DpChainState& state, const SurvivalDataset& data,
                          const DpHyperparams& hp, double theta_star);
bool update_theta_rw(DpChainState& state, const SurvivalDataset& data, const DpHyperparams& hp,
                     Rng& rng);

/// log r* of the joint move to (M_star, theta_star), proposal correction
/// included.
double joint_log_ratio(const DpChainState& state, const SurvivalDataset& data,
                       const DpHyperparams& hp, int M_star, double theta_star);
bool update_joint_M_theta(DpChainState& state, const SurvivalDataset& data,
                          const DpHyperparams& hp, Rng& rng);

struct InverseGammaParams {
  double shape = 1.0;
  double scale = 1.0;
};

/// inv-Ga(a_zeta + n*, b_zeta + sum of distinct atoms).
InverseGammaParams zeta_conditional(std::span<const double> phi, const DpHyperparams& hp);
double update_zeta(DpChainState& state, const DpHyperparams& hp, Rng& rng);

double update_alpha(DpChainState& state, const DpHyperparams& hp, Rng& rng);

/// Urn quantities for one observation against a set of distinct atoms.
PolyaUrnWeights urn_weights(double y, bool event, int M, double theta, double zeta,
                            std::span<const double> atoms);

/// Gibbs update of phi_i given the other latent values.
double update_phi_i(DpChainState& state, const SurvivalDataset& data, std::size_t i, Rng& rng);

using DpSink = std::function<void(int iteration, const DpChainState& state)>;

/// Runs the sweep phi_1..phi_n, zeta, alpha, M, theta, (M, theta) for every
/// iteration of the schedule and hands retained states to sink. Step-size
/// adaptation runs during burn-in only.
void run_chain(const SurvivalDataset& data, const DpHyperparams& hp, const ChainSchedule& schedule,
               Rng& rng, const DpSink& sink, const DpRunOptions& options = {},
               MoveStats* theta_moves = nullptr, MoveStats* joint_moves = nullptr);

DpChainOutput run_chain(const SurvivalDataset& data, const DpHyperparams& hp,
                        const ChainSchedule& schedule, Rng& rng, const DpRunOptions& options = {});

}  // namespace dp
}  // namespace erlangmix
