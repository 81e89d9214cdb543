#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "erlangmix/mixture_model.hpp"
#include "erlangmix/rng.hpp"
#include "erlangmix/sampler_common.hpp"
#include "erlangmix/special_math.hpp"

namespace erlangmix {

/// Latent atom (phi_C, phi_T); index with index_of(Group).
using AtomPair = std::array<double, 2>;

/// theta_x ~ Ga(a_theta, b_theta) (shape, scale) and
/// M_x | theta_x ~ Unif(ceil(M1/theta_x)..ceil(M2/theta_x)).
struct GroupPrior {
  double a_theta = 2.0;
  double b_theta = 50.0;
  double M1 = 1000.0;
  double M2 = 4000.0;

  void validate() const;
  MRange range(double theta) const { return m_range(M1, M2, theta); }
};

/// Priors of the two-group model: base measure LN2(mu, Sigma) with Sigma
/// fixed, mu ~ N2(mu_bar, Sigma0), alpha ~ Ga(a_alpha, b_alpha).
struct DdpHyperparams {
  std::array<GroupPrior, 2> group{};
  Eigen::Vector2d mu_bar{5.0, 5.5};
  Eigen::Matrix2d Sigma0 = 10.0 * Eigen::Matrix2d::Identity();
  Eigen::Matrix2d Sigma = 3.0 * Eigen::Matrix2d::Identity();
  double a_alpha = 5.0;
  double b_alpha = 1.0;

  void validate() const;
  const GroupPrior& prior(Group g) const { return group[index_of(g)]; }
};

/// Running mean and covariance of log(theta_C, theta_T) feeding the adaptive
/// proposal. Before kWarmup accepted proposals only the fixed small-scale
/// proposal is used.
struct ThetaAdaptation {
  static constexpr int kWarmup = 100;

  std::int64_t samples = 0;
  std::int64_t accepted = 0;
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  Eigen::Matrix2d scatter = Eigen::Matrix2d::Zero();  ///< sum of outer products of deviations
  bool frozen = false;

  void push(const Eigen::Vector2d& log_theta);
  Eigen::Matrix2d covariance() const;
  bool warm() const { return accepted >= kWarmup; }
};

struct DdpChainState {
  std::array<double, 2> theta{1.0, 1.0};
  std::array<int, 2> M{1, 1};
  double alpha = 1.0;
  Eigen::Vector2d mu = Eigen::Vector2d::Zero();
  std::vector<AtomPair> phi;
  ThetaAdaptation adapt;
  std::int64_t iteration = 0;
};

/// Distinct atom pairs and multiplicities; equality is exact on both
/// coordinates.
struct PairClusterView {
  std::vector<AtomPair> atoms;
  std::vector<int> counts;

  std::size_t n_star() const { return atoms.size(); }
  static PairClusterView of(std::span<const AtomPair> values);
};

struct DdpMoveSet {
  bool phi = true;
  bool mu = true;
  bool alpha = true;
  bool M = true;
  bool theta = true;
};

struct DdpRunOptions {
  DdpMoveSet moves;
  std::optional<DdpChainState> initial;
};

struct DdpChainOutput {
  std::vector<DdpChainState> draws;
  MoveStats theta_moves;
};

namespace ddp {

/// theta_x at prior means, M_x mid-range, alpha at its prior mean, mu = mu_bar;
/// the observed coordinate of phi_i is y_i capped above the basis and the
/// other coordinate sits at exp(mu_bar) of its group.
DdpChainState initial_state(const SurvivalDataset& data, const DdpHyperparams& hp);

/// Latent observations of one group using that group's coordinate.
std::vector<LatentObservation> group_observations(const SurvivalDataset& data,
                                                  std::span<const AtomPair> phi, Group g);

/// Augmented log likelihood of one group's records at (M, theta).
double group_log_likelihood(const SurvivalDataset& data, std::span<const AtomPair> phi, Group g,
                            int M, double theta);

std::vector<double> M_conditional(const DdpChainState& state, const SurvivalDataset& data,
                                  const DdpHyperparams& hp, Group g);
int update_M_x(DdpChainState& state, const SurvivalDataset& data, const DdpHyperparams& hp,
               Group g, Rng& rng);

/// log r* of the joint move to theta_star (both Jacobians, both gamma priors,
/// p(M_x | theta_x) and the full augmented likelihood).
double theta_pair_log_ratio(const DdpChainState& state, const SurvivalDataset& data,
                            const DdpHyperparams& hp, const std::array<double, 2>& theta_star);

/// Draws the log-scale increment of the theta-pair proposal.
Eigen::Vector2d propose_log_increment(const ThetaAdaptation& adapt, Rng& rng);

bool update_theta_pair(DdpChainState& state, const SurvivalDataset& data,
                       const DdpHyperparams& hp, Rng& rng);

/// N2(mu_1, Sigma_1) full conditional given the distinct atom pairs.
BivariateNormalParams mu_conditional(std::span<const AtomPair> phi, const DdpHyperparams& hp);
Eigen::Vector2d update_mu(DdpChainState& state, const DdpHyperparams& hp, Rng& rng);

double update_alpha(DdpChainState& state, const DdpHyperparams& hp, Rng& rng);

/// Base measure LN2(mu, Sigma) at the state's mu.
BivariateNormalParams base_measure(const DdpChainState& state, const DdpHyperparams& hp);

/// log masses of bins ((m-1) theta, m theta], m = 1..M (last bin open) under a
/// lognormal law.
std::vector<double> lognormal_bin_log_masses(int M, double theta, const LogNormalParams& p);

/// Urn quantities for an observation of group g. `conditional` is the law of
/// the observed coordinate given the other coordinate; `atom_coords` are the
/// group-g coordinates of the distinct leave-one-out atoms.
PolyaUrnWeights urn_weights(double y, bool event, int M, double theta,
                            const LogNormalParams& conditional, std::span<const double> atom_coords);

/// Gibbs update of phi_i.
AtomPair update_phi_pair(DdpChainState& state, const SurvivalDataset& data,
                         const DdpHyperparams& hp, std::size_t i, Rng& rng);

using DdpSink = std::function<void(int iteration, const DdpChainState& state)>;

/// Sweeps phi pairs, mu, alpha, M_C, M_T, theta pair for every iteration and
/// hands retained states to sink. Throws ConfigError unless both groups have
/// records.
void run_chain(const SurvivalDataset& data, const DdpHyperparams& hp,
               const ChainSchedule& schedule, Rng& rng, const DdpSink& sink,
               const DdpRunOptions& options = {}, MoveStats* theta_moves = nullptr);

DdpChainOutput run_chain(const SurvivalDataset& data, const DdpHyperparams& hp,
                         const ChainSchedule& schedule, Rng& rng, const DdpRunOptions& options = {});

}  // namespace ddp
}  // namespace erlangmix
