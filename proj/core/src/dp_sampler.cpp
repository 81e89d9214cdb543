#include "erlangmix/dp_sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "erlangmix/errors.hpp"
#include "erlangmix/special_math.hpp"

namespace erlangmix {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kInitialLogStep = -1.2;  // step 0.3 on log theta
// Proposals whose M range would exceed this many candidates are rejected.
constexpr double kMaxRangeHi = 5e7;

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string(name) + " must be positive");
}

bool range_is_tractable(const DpHyperparams& hp, double theta) {
  return theta > 0.0 && std::isfinite(theta) && std::ceil(hp.M2 / theta) <= kMaxRangeHi;
}

// Distinct-atom bookkeeping for the phi sweep. Slots of emptied clusters are
// recycled; `active` lists occupied slots so each update costs O(n*).
class PhiSweep {
 public:
  PhiSweep(const SurvivalDataset& data, DpChainState& state)
      : data_(data), state_(state), M_(static_cast<std::size_t>(state.M)) {
    const std::size_t n = data.size();
    const auto log_mass = exp_bin_log_masses(state.M, state.theta, state.zeta);
    joint_.resize(n * M_);
    log_q0_.resize(n);
    std::vector<double> row(M_);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& r = data[i];
      if (r.event) {
        erlang_log_table(r.time, state.theta, row, {});
      } else {
        erlang_log_table(r.time, state.theta, {}, row);
      }
      double* joint = &joint_[i * M_];
      for (std::size_t m = 0; m < M_; ++m) joint[m] = row[m] + log_mass[m];
      log_q0_[i] = log_sum_exp(std::span<const double>(joint, M_));
    }
    log_mass_ = log_mass;

    const ClusterView view = ClusterView::of(state.phi);
    value_ = view.atoms;
    count_ = view.counts;
    comp_.resize(value_.size());
    for (std::size_t s = 0; s < value_.size(); ++s) {
      comp_[s] = component_of(value_[s], state.M, state.theta);
      position_.push_back(static_cast<int>(s));
      active_.push_back(static_cast<int>(s));
    }
    label_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto it = std::lower_bound(value_.begin(), value_.end(), state.phi[i]);
      label_[i] = static_cast<int>(it - value_.begin());
    }
  }

  void run(Rng& rng) {
    for (std::size_t i = 0; i < data_.size(); ++i) update(i, rng);
  }

 private:
  double log_kernel(std::size_t i, int m) const {
    const auto idx = static_cast<std::size_t>(m - 1);
    return joint_[i * M_ + idx] - log_mass_[idx];
  }

  void deactivate(int slot) {
    const int pos = position_[static_cast<std::size_t>(slot)];
    const int last = active_.back();
    active_[static_cast<std::size_t>(pos)] = last;
    position_[static_cast<std::size_t>(last)] = pos;
    active_.pop_back();
    free_.push_back(slot);
  }

  int create(double value, int comp) {
    int slot;
    if (!free_.empty()) {
      slot = free_.back();
      free_.pop_back();
      value_[static_cast<std::size_t>(slot)] = value;
      count_[static_cast<std::size_t>(slot)] = 1;
      comp_[static_cast<std::size_t>(slot)] = comp;
    } else {
      slot = static_cast<int>(value_.size());
      value_.push_back(value);
      count_.push_back(1);
      comp_.push_back(comp);
      position_.push_back(0);
    }
    position_[static_cast<std::size_t>(slot)] = static_cast<int>(active_.size());
    active_.push_back(slot);
    return slot;
  }

  void update(std::size_t i, Rng& rng) {
    const int old = label_[i];
    if (--count_[static_cast<std::size_t>(old)] == 0) deactivate(old);

    logw_.resize(active_.size() + 1);
    logw_[0] = std::log(state_.alpha) + log_q0_[i];
    for (std::size_t k = 0; k < active_.size(); ++k) {
      const auto s = static_cast<std::size_t>(active_[k]);
      logw_[k + 1] = std::log(static_cast<double>(count_[s])) + log_kernel(i, comp_[s]);
    }
    if (*std::max_element(logw_.begin(), logw_.end()) == kNegInf) {
      throw NumericError("all Polya urn weights underflowed for observation " + std::to_string(i + 1));
    }
    const std::size_t pick = rng.categorical_log(logw_);
    int slot;
    if (pick == 0) {
      const std::span<const double> joint(&joint_[i * M_], M_);
      const int m = static_cast<int>(rng.categorical_log(joint)) + 1;
      const double lo = (m - 1) * state_.theta;
      const double hi = m < state_.M ? m * state_.theta : std::numeric_limits<double>::infinity();
      double v = truncated_exp_sample(state_.zeta, lo, hi, rng.uniform());
      v = snap_into_bin(v, m, state_.M, state_.theta);
      slot = create(v, m);
    } else {
      slot = active_[pick - 1];
      ++count_[static_cast<std::size_t>(slot)];
    }
    label_[i] = slot;
    state_.phi[i] = value_[static_cast<std::size_t>(slot)];
  }

  const SurvivalDataset& data_;
  DpChainState& state_;
  std::size_t M_;
  std::vector<double> joint_;  // log kernel + log base mass, row per observation
  std::vector<double> log_q0_;
  std::vector<double> log_mass_;
  std::vector<double> value_;
  std::vector<int> count_;
  std::vector<int> comp_;
  std::vector<int> position_;
  std::vector<int> active_;
  std::vector<int> free_;
  std::vector<int> label_;
  std::vector<double> logw_;
};

double log_likelihood(const DpChainState& state, const SurvivalDataset& data, int M, double theta) {
  return augmented_log_likelihood(data, state.phi, M, theta);
}

}  // namespace

void DpHyperparams::validate() const {
  require_positive(a_alpha, "a_alpha");
  require_positive(b_alpha, "b_alpha");
  require_positive(a_zeta, "a_zeta");
  require_positive(b_zeta, "b_zeta");
  require_positive(a_theta, "a_theta");
  require_positive(b_theta, "b_theta");
  require_positive(M1, "M1");
  require_positive(M2, "M2");
  if (!(M2 > M1)) throw ConfigError("M2 must exceed M1");
}

namespace dp {

DpChainState initial_state(const SurvivalDataset& data, const DpHyperparams& hp) {
  hp.validate();
  if (data.empty()) throw ConfigError("the DP sampler needs a non-empty dataset");
  DpChainState s;
  s.theta = hp.a_theta * hp.b_theta;
  const MRange range = hp.range(s.theta);
  s.M = range.lo + (range.hi - range.lo) / 2;
  s.alpha = hp.a_alpha * hp.b_alpha;
  s.zeta = data.mean_time();
  const double cap = s.M * s.theta * (1.0 + 1e-6);
  s.phi.resize(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) s.phi[i] = std::min(data[i].time, cap);
  s.theta_step.log_step = kInitialLogStep;
  s.joint_step.log_step = kInitialLogStep;
  return s;
}

std::vector<LatentObservation> latent_observations(const SurvivalDataset& data,
                                                   std::span<const double> phi) {
  if (phi.size() != data.size()) throw std::domain_error("latent vector length must match the data");
  std::vector<LatentObservation> obs(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) obs[i] = {data[i].time, data[i].event, phi[i]};
  return obs;
}

std::vector<double> M_conditional(const DpChainState& state, const SurvivalDataset& data,
                                  const DpHyperparams& hp) {
  const auto obs = latent_observations(data, state.phi);
  auto ll = m_candidate_log_likelihood(obs, state.theta, hp.range(state.theta));
  const double total = log_sum_exp(ll);
  for (double& v : ll) v = std::exp(v - total);
  return ll;
}

int update_M(DpChainState& state, const SurvivalDataset& data, const DpHyperparams& hp, Rng& rng) {
  const auto obs = latent_observations(data, state.phi);
  state.M = sample_M(obs, state.theta, hp.range(state.theta), rng);
  return state.M;
}

double theta_rw_log_ratio(const DpChainState& state, const SurvivalDataset& data,
                          const DpHyperparams& hp, double theta_star) {
  if (!range_is_tractable(hp, theta_star)) return kNegInf;
  const MRange star = hp.range(theta_star);
  if (!star.contains(state.M)) return kNegInf;
  const MRange cur = hp.range(state.theta);
  return std::log(theta_star) - std::log(state.theta) +
         gamma_log_density(theta_star, hp.a_theta, hp.b_theta) -
         gamma_log_density(state.theta, hp.a_theta, hp.b_theta) + star.log_prior() -
         cur.log_prior() + log_likelihood(state, data, state.M, theta_star) -
         log_likelihood(state, data, state.M, state.theta);
}

bool update_theta_rw(DpChainState& state, const SurvivalDataset& data, const DpHyperparams& hp,
                     Rng& rng) {
  const double theta_star = state.theta * std::exp(state.theta_step.step() * rng.normal());
  const double lr = theta_rw_log_ratio(state, data, hp, theta_star);
  const bool accept = std::log(rng.uniform()) < lr;
  if (accept) state.theta = theta_star;
  state.theta_step.record(accept);
  return accept;
}

double joint_log_ratio(const DpChainState& state, const SurvivalDataset& data,
                       const DpHyperparams& hp, int M_star, double theta_star) {
  if (!range_is_tractable(hp, theta_star)) return kNegInf;
  const MRange star = hp.range(theta_star);
  if (!star.contains(M_star)) return kNegInf;
  const MRange cur = hp.range(state.theta);
  const double num = std::log(theta_star) + gamma_log_density(theta_star, hp.a_theta, hp.b_theta) +
                     star.log_prior() + log_likelihood(state, data, M_star, theta_star) +
                     inverse_quadratic_log_prob(state.M, M_star, cur);
  const double den = std::log(state.theta) + gamma_log_density(state.theta, hp.a_theta, hp.b_theta) +
                     cur.log_prior() + log_likelihood(state, data, state.M, state.theta) +
                     inverse_quadratic_log_prob(M_star, state.M, star);
  return num - den;
}

bool update_joint_M_theta(DpChainState& state, const SurvivalDataset& data,
                          const DpHyperparams& hp, Rng& rng) {
  const double theta_star = state.theta * std::exp(state.joint_step.step() * rng.normal());
  bool accept = false;
  if (range_is_tractable(hp, theta_star)) {
    const int M_star = sample_inverse_quadratic(state.M, hp.range(theta_star), rng);
    const double lr = joint_log_ratio(state, data, hp, M_star, theta_star);
    accept = std::log(rng.uniform()) < lr;
    if (accept) {
      state.theta = theta_star;
      state.M = M_star;
    }
  }
  state.joint_step.record(accept);
  return accept;
}

InverseGammaParams zeta_conditional(std::span<const double> phi, const DpHyperparams& hp) {
  const ClusterView view = ClusterView::of(phi);
  const double sum = std::accumulate(view.atoms.begin(), view.atoms.end(), 0.0);
  return {hp.a_zeta + static_cast<double>(view.n_star()), hp.b_zeta + sum};
}

double update_zeta(DpChainState& state, const DpHyperparams& hp, Rng& rng) {
  const auto post = zeta_conditional(state.phi, hp);
  state.zeta = post.scale / rng.gamma(post.shape, 1.0);
  return state.zeta;
}

double update_alpha(DpChainState& state, const DpHyperparams& hp, Rng& rng) {
  const std::size_t n_star = ClusterView::of(state.phi).n_star();
  state.alpha = draw_alpha(state.alpha, state.phi.size(), n_star, hp.a_alpha, hp.b_alpha, rng);
  return state.alpha;
}

PolyaUrnWeights urn_weights(double y, bool event, int M, double theta, double zeta,
                            std::span<const double> atoms) {
  std::vector<double> kernel(static_cast<std::size_t>(M));
  if (event) {
    erlang_log_table(y, theta, kernel, {});
  } else {
    erlang_log_table(y, theta, {}, kernel);
  }
  std::vector<int> comps(atoms.size());
  std::transform(atoms.begin(), atoms.end(), comps.begin(),
                 [&](double a) { return component_of(a, M, theta); });
  return polya_urn_weights(kernel, exp_bin_log_masses(M, theta, zeta), comps);
}

double update_phi_i(DpChainState& state, const SurvivalDataset& data, std::size_t i, Rng& rng) {
  if (i >= data.size()) throw std::out_of_range("observation index out of range");
  std::vector<double> others;
  others.reserve(state.phi.size());
  for (std::size_t k = 0; k < state.phi.size(); ++k) {
    if (k != i) others.push_back(state.phi[k]);
  }
  const ClusterView view = ClusterView::of(others);
  const auto w = urn_weights(data[i].time, data[i].event, state.M, state.theta, state.zeta, view.atoms);
  const auto probs = urn_choice_probabilities(w, state.alpha, view.counts);
  const std::size_t pick = rng.categorical(probs);
  if (pick > 0) {
    state.phi[i] = view.atoms[pick - 1];
    return state.phi[i];
  }
  const int m = static_cast<int>(rng.categorical(w.omega)) + 1;
  const double lo = (m - 1) * state.theta;
  const double hi = m < state.M ? m * state.theta : std::numeric_limits<double>::infinity();
  state.phi[i] = snap_into_bin(truncated_exp_sample(state.zeta, lo, hi, rng.uniform()), m, state.M,
                               state.theta);
  return state.phi[i];
}

void run_chain(const SurvivalDataset& data, const DpHyperparams& hp, const ChainSchedule& schedule,
               Rng& rng, const DpSink& sink, const DpRunOptions& options, MoveStats* theta_moves,
               MoveStats* joint_moves) {
  hp.validate();
  schedule.validate();
  if (data.empty()) throw ConfigError("the DP sampler needs a non-empty dataset");
  DpChainState state = options.initial ? *options.initial : initial_state(data, hp);
  if (state.phi.size() != data.size()) throw ConfigError("initial state does not match the data");
  if (!hp.range(state.theta).contains(state.M)) throw ConfigError("initial M outside its prior range");

  const int burn = schedule.burn_in();
  const DpMoveSet& moves = options.moves;
  for (int t = 1; t <= schedule.iterations; ++t) {
    if (t > burn) {
      state.theta_step.frozen = true;
      state.joint_step.frozen = true;
    }
    if (moves.phi) PhiSweep(data, state).run(rng);
    if (moves.zeta) update_zeta(state, hp, rng);
    if (moves.alpha) update_alpha(state, hp, rng);
    if (moves.M) update_M(state, data, hp, rng);
    if (moves.theta) {
      const bool ok = update_theta_rw(state, data, hp, rng);
      if (theta_moves) theta_moves->record(ok);
    }
    if (moves.joint) {
      const bool ok = update_joint_M_theta(state, data, hp, rng);
      if (joint_moves) joint_moves->record(ok);
    }
    state.iteration = t;
    if (schedule.retains(t)) sink(t, state);
  }
}

DpChainOutput run_chain(const SurvivalDataset& data, const DpHyperparams& hp,
                        const ChainSchedule& schedule, Rng& rng, const DpRunOptions& options) {
  DpChainOutput out;
  out.draws.reserve(static_cast<std::size_t>(std::max(0, schedule.retained_count())));
  run_chain(
      data, hp, schedule, rng, [&](int, const DpChainState& s) { out.draws.push_back(s); }, options,
      &out.theta_moves, &out.joint_moves);
  return out;
}

}  // namespace dp
}  // namespace erlangmix
