#include "erlangmix/ddp_sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "erlangmix/errors.hpp"

namespace erlangmix {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kMaxRangeHi = 5e7;
constexpr double kWarmupVariance = 0.01;
constexpr double kSafetyVariance = 0.01 / 2.0;
constexpr double kSafetyWeight = 0.05;
constexpr double kAdaptScale = 2.38 * 2.38 / 2.0;

constexpr std::array<Group, 2> kGroups{Group::Control, Group::Treatment};

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string(name) + " must be positive");
}

void require_pd(const Eigen::Matrix2d& m, const char* name) {
  const bool symmetric = std::abs(m(0, 1) - m(1, 0)) <= 1e-12 * (std::abs(m(0, 1)) + 1.0);
  if (!m.allFinite() || !symmetric || m.llt().info() != Eigen::Success) {
    throw ConfigError(std::string(name) + " must be symmetric positive definite");
  }
}

std::size_t other_of(std::size_t g) { return 1 - g; }

std::vector<double> kernel_row(double y, bool event, int M, double theta) {
  std::vector<double> row(static_cast<std::size_t>(M));
  if (event) {
    erlang_log_table(y, theta, row, {});
  } else {
    erlang_log_table(y, theta, {}, row);
  }
  return row;
}

std::vector<double> add_rows(std::span<const double> a, std::span<const double> b) {
  std::vector<double> out(a.size());
  for (std::size_t m = 0; m < a.size(); ++m) out[m] = (b[m] == kNegInf) ? kNegInf : a[m] + b[m];
  return out;
}

// Fresh draw from h: the unobserved coordinate from its own marginal, then
// the observed one from the bin mixture of truncated conditional lognormals.
// fixed_masses short-cuts the bin masses when Sigma is diagonal.
AtomPair draw_fresh(std::size_t g, std::span<const double> log_kernel, int M, double theta,
                    const BivariateNormalParams& base, const std::vector<double>* fixed_masses,
                    Rng& rng) {
  const std::size_t o = other_of(g);
  const double other = std::max(
      std::exp(base.mean(o) + std::sqrt(base.cov(o, o)) * rng.normal()),
      std::numeric_limits<double>::min());
  const LogNormalParams cond = bln_conditional(base, o, other);
  const std::vector<double> masses =
      fixed_masses ? *fixed_masses : ddp::lognormal_bin_log_masses(M, theta, cond);
  const auto joint = add_rows(log_kernel, masses);
  if (*std::max_element(joint.begin(), joint.end()) == kNegInf) {
    throw NumericError("fresh-atom bin weights underflowed");
  }
  const int m = static_cast<int>(rng.categorical_log(joint)) + 1;
  const double lo = (m - 1) * theta;
  const double hi = m < M ? m * theta : kInf;
  const double v = snap_into_bin(truncated_lognormal_sample(cond, lo, hi, rng.uniform()), m, M, theta);
  AtomPair out{};
  out[g] = v;
  out[o] = other;
  return out;
}

bool range_is_tractable(const GroupPrior& p, double theta) {
  return theta > 0.0 && std::isfinite(theta) && std::ceil(p.M2 / theta) <= kMaxRangeHi;
}

// Cluster bookkeeping for the phi-pair sweep; mirrors the one-group sweep
// with a per-group component cache for every atom.
class PairSweep {
 public:
  PairSweep(const SurvivalDataset& data, const DdpHyperparams& hp, DdpChainState& state)
      : data_(data), state_(state), base_(ddp::base_measure(state, hp)) {
    diagonal_ = base_.cov(0, 1) == 0.0;
    const std::size_t n = data.size();
    offset_.resize(n + 1, 0);
    for (std::size_t i = 0; i < n; ++i) {
      offset_[i + 1] = offset_[i] + static_cast<std::size_t>(state.M[group(i)]);
    }
    kernel_.resize(offset_[n]);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t g = group(i);
      const auto row = kernel_row(data[i].time, data[i].event, state.M[g], state.theta[g]);
      std::copy(row.begin(), row.end(), kernel_.begin() + static_cast<std::ptrdiff_t>(offset_[i]));
    }
    if (diagonal_) {
      for (std::size_t g = 0; g < 2; ++g) {
        const LogNormalParams marginal{base_.mean(g), base_.cov(g, g)};
        masses_[g] = ddp::lognormal_bin_log_masses(state.M[g], state.theta[g], marginal);
      }
    }

    const PairClusterView view = PairClusterView::of(state.phi);
    value_ = view.atoms;
    count_ = view.counts;
    for (std::size_t s = 0; s < value_.size(); ++s) {
      comp_.push_back(components(value_[s]));
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
  std::size_t group(std::size_t i) const { return index_of(*data_[i].group); }

  std::array<int, 2> components(const AtomPair& a) const {
    return {component_of(a[0], state_.M[0], state_.theta[0]),
            component_of(a[1], state_.M[1], state_.theta[1])};
  }

  std::span<const double> kernel(std::size_t i) const {
    return {kernel_.data() + offset_[i], offset_[i + 1] - offset_[i]};
  }

  void deactivate(int slot) {
    const int pos = position_[static_cast<std::size_t>(slot)];
    const int last = active_.back();
    active_[static_cast<std::size_t>(pos)] = last;
    position_[static_cast<std::size_t>(last)] = pos;
    active_.pop_back();
    free_.push_back(slot);
  }

  int create(const AtomPair& value) {
    int slot;
    if (!free_.empty()) {
      slot = free_.back();
      free_.pop_back();
      const auto s = static_cast<std::size_t>(slot);
      value_[s] = value;
      count_[s] = 1;
      comp_[s] = components(value);
    } else {
      slot = static_cast<int>(value_.size());
      value_.push_back(value);
      count_.push_back(1);
      comp_.push_back(components(value));
      position_.push_back(0);
    }
    position_[static_cast<std::size_t>(slot)] = static_cast<int>(active_.size());
    active_.push_back(slot);
    return slot;
  }

  void update(std::size_t i, Rng& rng) {
    const std::size_t g = group(i);
    const std::size_t o = other_of(g);
    const int old = label_[i];
    if (--count_[static_cast<std::size_t>(old)] == 0) deactivate(old);

    const auto k = kernel(i);
    const int M = state_.M[g];
    const double theta = state_.theta[g];
    std::vector<double> masses;
    if (!diagonal_) {
      masses = ddp::lognormal_bin_log_masses(M, theta, bln_conditional(base_, o, state_.phi[i][o]));
    }
    const auto joint = add_rows(k, diagonal_ ? masses_[g] : masses);

    logw_.resize(active_.size() + 1);
    logw_[0] = std::log(state_.alpha) + log_sum_exp(joint);
    for (std::size_t j = 0; j < active_.size(); ++j) {
      const auto s = static_cast<std::size_t>(active_[j]);
      logw_[j + 1] = std::log(static_cast<double>(count_[s])) +
                     k[static_cast<std::size_t>(comp_[s][g] - 1)];
    }
    if (*std::max_element(logw_.begin(), logw_.end()) == kNegInf) {
      throw NumericError("all Polya urn weights underflowed for observation " + std::to_string(i + 1));
    }
    const std::size_t pick = rng.categorical_log(logw_);
    int slot;
    if (pick == 0) {
      slot = create(draw_fresh(g, k, M, theta, base_, diagonal_ ? &masses_[g] : nullptr, rng));
    } else {
      slot = active_[pick - 1];
      ++count_[static_cast<std::size_t>(slot)];
    }
    label_[i] = slot;
    state_.phi[i] = value_[static_cast<std::size_t>(slot)];
  }

  const SurvivalDataset& data_;
  DdpChainState& state_;
  BivariateNormalParams base_;
  bool diagonal_ = false;
  std::array<std::vector<double>, 2> masses_;
  std::vector<std::size_t> offset_;
  std::vector<double> kernel_;
  std::vector<AtomPair> value_;
  std::vector<int> count_;
  std::vector<std::array<int, 2>> comp_;
  std::vector<int> position_;
  std::vector<int> active_;
  std::vector<int> free_;
  std::vector<int> label_;
  std::vector<double> logw_;
};

void check_two_groups(const SurvivalDataset& data) {
  if (!data.has_groups() || data.count(Group::Control) == 0 || data.count(Group::Treatment) == 0) {
    throw ConfigError(
        "the DDP sampler needs records from both groups; use the DP sampler for one-group data");
  }
}

}  // namespace

void GroupPrior::validate() const {
  require_positive(a_theta, "a_theta");
  require_positive(b_theta, "b_theta");
  require_positive(M1, "M1");
  require_positive(M2, "M2");
  if (!(M2 > M1)) throw ConfigError("M2 must exceed M1");
}

void DdpHyperparams::validate() const {
  for (const auto& g : group) g.validate();
  if (!mu_bar.allFinite()) throw ConfigError("mu_bar must be finite");
  require_pd(Sigma0, "Sigma0");
  require_pd(Sigma, "Sigma");
  require_positive(a_alpha, "a_alpha");
  require_positive(b_alpha, "b_alpha");
}

void ThetaAdaptation::push(const Eigen::Vector2d& log_theta) {
  ++samples;
  const Eigen::Vector2d delta = log_theta - mean;
  mean += delta / static_cast<double>(samples);
  scatter += delta * (log_theta - mean).transpose();
}

Eigen::Matrix2d ThetaAdaptation::covariance() const {
  if (samples < 2) return Eigen::Matrix2d::Zero();
  return scatter / static_cast<double>(samples - 1);
}

PairClusterView PairClusterView::of(std::span<const AtomPair> values) {
  std::vector<AtomPair> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  PairClusterView view;
  for (const auto& v : sorted) {
    if (!view.atoms.empty() && view.atoms.back() == v) {
      ++view.counts.back();
    } else {
      view.atoms.push_back(v);
      view.counts.push_back(1);
    }
  }
  return view;
}

namespace ddp {

DdpChainState initial_state(const SurvivalDataset& data, const DdpHyperparams& hp) {
  hp.validate();
  check_two_groups(data);
  DdpChainState s;
  for (std::size_t g = 0; g < 2; ++g) {
    const auto& p = hp.group[g];
    s.theta[g] = p.a_theta * p.b_theta;
    const MRange r = p.range(s.theta[g]);
    s.M[g] = r.lo + (r.hi - r.lo) / 2;
  }
  s.alpha = hp.a_alpha * hp.b_alpha;
  s.mu = hp.mu_bar;
  s.phi.resize(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const std::size_t g = index_of(*data[i].group);
    const std::size_t o = other_of(g);
    s.phi[i][g] = std::min(data[i].time, s.M[g] * s.theta[g] * (1.0 + 1e-6));
    s.phi[i][o] = std::exp(hp.mu_bar(static_cast<Eigen::Index>(o)));
  }
  return s;
}

std::vector<LatentObservation> group_observations(const SurvivalDataset& data,
                                                  std::span<const AtomPair> phi, Group g) {
  if (phi.size() != data.size()) throw std::domain_error("latent vector length must match the data");
  std::vector<LatentObservation> out;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data[i].group == g) out.push_back({data[i].time, data[i].event, phi[i][index_of(g)]});
  }
  return out;
}

double group_log_likelihood(const SurvivalDataset& data, std::span<const AtomPair> phi, Group g,
                            int M, double theta) {
  double total = 0.0;
  for (const auto& o : group_observations(data, phi, g)) {
    total += observation_log_kernel(o.y, o.event, component_of(o.phi, M, theta), theta);
  }
  return total;
}

std::vector<double> M_conditional(const DdpChainState& state, const SurvivalDataset& data,
                                  const DdpHyperparams& hp, Group g) {
  const std::size_t x = index_of(g);
  const auto obs = group_observations(data, state.phi, g);
  auto ll = m_candidate_log_likelihood(obs, state.theta[x], hp.group[x].range(state.theta[x]));
  const double total = log_sum_exp(ll);
  for (double& v : ll) v = std::exp(v - total);
  return ll;
}

int update_M_x(DdpChainState& state, const SurvivalDataset& data, const DdpHyperparams& hp,
               Group g, Rng& rng) {
  const std::size_t x = index_of(g);
  const auto obs = group_observations(data, state.phi, g);
  state.M[x] = sample_M(obs, state.theta[x], hp.group[x].range(state.theta[x]), rng);
  return state.M[x];
}

double theta_pair_log_ratio(const DdpChainState& state, const SurvivalDataset& data,
                            const DdpHyperparams& hp, const std::array<double, 2>& theta_star) {
  double lr = 0.0;
  for (const Group g : kGroups) {
    const std::size_t x = index_of(g);
    const GroupPrior& p = hp.group[x];
    if (!range_is_tractable(p, theta_star[x])) return kNegInf;
    const MRange star = p.range(theta_star[x]);
    if (!star.contains(state.M[x])) return kNegInf;
    const MRange cur = p.range(state.theta[x]);
    lr += std::log(theta_star[x]) - std::log(state.theta[x]) +
          gamma_log_density(theta_star[x], p.a_theta, p.b_theta) -
          gamma_log_density(state.theta[x], p.a_theta, p.b_theta) + star.log_prior() -
          cur.log_prior() + group_log_likelihood(data, state.phi, g, state.M[x], theta_star[x]) -
          group_log_likelihood(data, state.phi, g, state.M[x], state.theta[x]);
  }
  return lr;
}

Eigen::Vector2d propose_log_increment(const ThetaAdaptation& adapt, Rng& rng) {
  const Eigen::Vector2d z{rng.normal(), rng.normal()};
  if (!adapt.warm()) return std::sqrt(kWarmupVariance) * z;
  if (rng.uniform() < kSafetyWeight) return std::sqrt(kSafetyVariance) * z;
  // Square root of the (possibly singular) empirical covariance.
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(kAdaptScale * adapt.covariance());
  const Eigen::Vector2d root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal() * z;
}

bool update_theta_pair(DdpChainState& state, const SurvivalDataset& data,
                       const DdpHyperparams& hp, Rng& rng) {
  const Eigen::Vector2d step = propose_log_increment(state.adapt, rng);
  const std::array<double, 2> star{state.theta[0] * std::exp(step(0)),
                                   state.theta[1] * std::exp(step(1))};
  const double lr = theta_pair_log_ratio(state, data, hp, star);
  const bool accept = std::log(rng.uniform()) < lr;
  if (accept) state.theta = star;
  if (!state.adapt.frozen) {
    state.adapt.accepted += accept ? 1 : 0;
    state.adapt.push({std::log(state.theta[0]), std::log(state.theta[1])});
  }
  return accept;
}

BivariateNormalParams mu_conditional(std::span<const AtomPair> phi, const DdpHyperparams& hp) {
  const PairClusterView view = PairClusterView::of(phi);
  Eigen::Vector2d sum_log = Eigen::Vector2d::Zero();
  for (const auto& a : view.atoms) sum_log += Eigen::Vector2d{std::log(a[0]), std::log(a[1])};
  const Eigen::Matrix2d prior_prec = hp.Sigma0.inverse();
  const Eigen::Matrix2d kernel_prec = hp.Sigma.inverse();
  BivariateNormalParams out;
  out.cov = (prior_prec + static_cast<double>(view.n_star()) * kernel_prec).inverse();
  out.cov = 0.5 * (out.cov + out.cov.transpose());
  out.mean = out.cov * (prior_prec * hp.mu_bar + kernel_prec * sum_log);
  return out;
}

Eigen::Vector2d update_mu(DdpChainState& state, const DdpHyperparams& hp, Rng& rng) {
  const BivariateNormalParams post = mu_conditional(state.phi, hp);
  const Eigen::Matrix2d L = post.cov.llt().matrixL();
  state.mu = post.mean + L * Eigen::Vector2d{rng.normal(), rng.normal()};
  return state.mu;
}

double update_alpha(DdpChainState& state, const DdpHyperparams& hp, Rng& rng) {
  const std::size_t n_star = PairClusterView::of(state.phi).n_star();
  state.alpha = draw_alpha(state.alpha, state.phi.size(), n_star, hp.a_alpha, hp.b_alpha, rng);
  return state.alpha;
}

BivariateNormalParams base_measure(const DdpChainState& state, const DdpHyperparams& hp) {
  return {state.mu, hp.Sigma};
}

std::vector<double> lognormal_bin_log_masses(int M, double theta, const LogNormalParams& p) {
  std::vector<double> out(static_cast<std::size_t>(M));
  for (int m = 1; m <= M; ++m) {
    const double hi = m < M ? m * theta : kInf;
    out[static_cast<std::size_t>(m - 1)] = lognormal_log_interval_mass((m - 1) * theta, hi, p);
  }
  return out;
}

PolyaUrnWeights urn_weights(double y, bool event, int M, double theta,
                            const LogNormalParams& conditional, std::span<const double> atom_coords) {
  const auto kernel = kernel_row(y, event, M, theta);
  std::vector<int> comps(atom_coords.size());
  std::transform(atom_coords.begin(), atom_coords.end(), comps.begin(),
                 [&](double a) { return component_of(a, M, theta); });
  return polya_urn_weights(kernel, lognormal_bin_log_masses(M, theta, conditional), comps);
}

AtomPair update_phi_pair(DdpChainState& state, const SurvivalDataset& data,
                         const DdpHyperparams& hp, std::size_t i, Rng& rng) {
  if (i >= data.size()) throw std::out_of_range("observation index out of range");
  if (!data[i].group) throw ConfigError("record has no group label");
  const std::size_t g = index_of(*data[i].group);
  const std::size_t o = other_of(g);
  std::vector<AtomPair> others;
  others.reserve(state.phi.size());
  for (std::size_t k = 0; k < state.phi.size(); ++k) {
    if (k != i) others.push_back(state.phi[k]);
  }
  const PairClusterView view = PairClusterView::of(others);
  std::vector<double> coords(view.atoms.size());
  std::transform(view.atoms.begin(), view.atoms.end(), coords.begin(),
                 [g](const AtomPair& a) { return a[g]; });
  const BivariateNormalParams base = base_measure(state, hp);
  const int M = state.M[g];
  const double theta = state.theta[g];
  const auto w = urn_weights(data[i].time, data[i].event, M, theta,
                             bln_conditional(base, o, state.phi[i][o]), coords);
  const auto probs = urn_choice_probabilities(w, state.alpha, view.counts);
  const std::size_t pick = rng.categorical(probs);
  if (pick > 0) {
    state.phi[i] = view.atoms[pick - 1];
  } else {
    const auto kernel = kernel_row(data[i].time, data[i].event, M, theta);
    state.phi[i] = draw_fresh(g, kernel, M, theta, base, nullptr, rng);
  }
  return state.phi[i];
}

void run_chain(const SurvivalDataset& data, const DdpHyperparams& hp,
               const ChainSchedule& schedule, Rng& rng, const DdpSink& sink,
               const DdpRunOptions& options, MoveStats* theta_moves) {
  hp.validate();
  schedule.validate();
  check_two_groups(data);
  DdpChainState state = options.initial ? *options.initial : initial_state(data, hp);
  if (state.phi.size() != data.size()) throw ConfigError("initial state does not match the data");
  for (std::size_t g = 0; g < 2; ++g) {
    if (!hp.group[g].range(state.theta[g]).contains(state.M[g])) {
      throw ConfigError("initial M outside its prior range");
    }
  }

  const int burn = schedule.burn_in();
  const DdpMoveSet& moves = options.moves;
  for (int t = 1; t <= schedule.iterations; ++t) {
    if (t > burn) state.adapt.frozen = true;
    if (moves.phi) PairSweep(data, hp, state).run(rng);
    if (moves.mu) update_mu(state, hp, rng);
    if (moves.alpha) update_alpha(state, hp, rng);
    if (moves.M) {
      update_M_x(state, data, hp, Group::Control, rng);
      update_M_x(state, data, hp, Group::Treatment, rng);
    }
    if (moves.theta) {
      const bool ok = update_theta_pair(state, data, hp, rng);
      if (theta_moves) theta_moves->record(ok);
    }
    state.iteration = t;
    if (schedule.retains(t)) sink(t, state);
  }
}

DdpChainOutput run_chain(const SurvivalDataset& data, const DdpHyperparams& hp,
                         const ChainSchedule& schedule, Rng& rng, const DdpRunOptions& options) {
  DdpChainOutput out;
  out.draws.reserve(static_cast<std::size_t>(std::max(0, schedule.retained_count())));
  run_chain(
      data, hp, schedule, rng, [&](int, const DdpChainState& s) { out.draws.push_back(s); },
      options, &out.theta_moves);
  return out;
}

}  // namespace ddp
}  // namespace erlangmix
