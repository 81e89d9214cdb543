#include <doctest.h>

#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "erlangmix/dp_sampler.hpp"
#include "erlangmix/errors.hpp"
#include "oracles.hpp"

using namespace erlangmix;

namespace {

const SurvivalDataset kToy({{0.7, true, {}}, {2.3, false, {}}, {1.4, true, {}}});

double literal_aug(const SurvivalDataset& d, const std::vector<double>& phi, int M, double theta) {
  double s = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    s += oracle::obs_log_kernel(d[i].time, d[i].event, oracle::literal_bin(phi[i], M, theta), theta);
  }
  return s;
}

double gamma_logpdf(double x, double shape, double scale) {
  return (shape - 1.0) * std::log(x) - x / scale - std::lgamma(shape) - shape * std::log(scale);
}

int range_size(double M1, double M2, double theta) {
  return static_cast<int>(std::ceil(M2 / theta) - std::ceil(M1 / theta)) + 1;
}

DpChainState toy_state() {
  DpChainState s;
  s.theta = 0.8;
  s.M = 5;
  s.alpha = 1.5;
  s.zeta = 1.2;
  s.phi = {0.5, 2.1, 3.9};
  return s;
}

}  // namespace

TEST_CASE("hyperparameter validation") {
  DpHyperparams hp;
  CHECK_NOTHROW(hp.validate());
  hp.M2 = hp.M1;
  CHECK_THROWS_AS(hp.validate(), ConfigError);
  hp = {};
  hp.a_alpha = 0.0;
  CHECK_THROWS(hp.validate());
}

TEST_CASE("M full conditional") {
  DpHyperparams hp{2, 1, 3, 4, 1, 1, 4.0, 6.0};
  SUBCASE("single candidate") {
    DpHyperparams one = hp;
    one.M1 = one.M2 = 4.0;
    auto s = toy_state();
    s.theta = 1.0;
    s.M = 4;
    const auto p = dp::M_conditional(s, kToy, one);
    REQUIRE(p.size() == 1);
    CHECK(p[0] == 1.0);
  }
  SUBCASE("flat likelihood when every latent value sits in bin one") {
    auto s = toy_state();
    s.theta = 1.0;
    s.phi = {0.1, 0.5, 0.9};
    const auto p = dp::M_conditional(s, kToy, hp);
    REQUIRE(p.size() == 3);
    for (double v : p) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  }
  SUBCASE("enumeration oracle") {
    auto s = toy_state();
    s.theta = 0.5;
    s.phi = {0.3, 4.6, 2.2};
    const auto p = dp::M_conditional(s, kToy, hp);
    std::vector<double> want;
    for (int j = 8; j <= 12; ++j) want.push_back(std::exp(literal_aug(kToy, s.phi, j, s.theta)));
    const double tot = std::accumulate(want.begin(), want.end(), 0.0);
    REQUIRE(p.size() == want.size());
    for (std::size_t k = 0; k < p.size(); ++k) CHECK(std::abs(p[k] - want[k] / tot) <= 1e-12);
    CHECK(std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0) <= 1e-12);
  }
  SUBCASE("draws stay in range") {
    auto s = toy_state();
    s.theta = 0.5;
    s.M = 9;
    Rng rng(1);
    for (int k = 0; k < 200; ++k) {
      const int m = dp::update_M(s, kToy, hp, rng);
      CHECK((m >= 8 && m <= 12));
    }
  }
}

TEST_CASE("theta random-walk move") {
  const DpHyperparams hp{2, 1, 3, 4, 2.0, 0.5, 1.0, 6.0};
  const SurvivalDataset two({{0.9, true, {}}, {2.6, false, {}}});
  DpChainState s;
  s.theta = 1.0;
  s.M = 3;
  s.phi = {0.4, 2.5};

  SUBCASE("out-of-range proposal has zero prior") {
    CHECK(dp::theta_rw_log_ratio(s, two, hp, 0.2) == -std::numeric_limits<double>::infinity());
    CHECK(dp::theta_rw_log_ratio(s, two, hp, 3.5) == -std::numeric_limits<double>::infinity());
  }
  SUBCASE("identity proposal") { CHECK(dp::theta_rw_log_ratio(s, two, hp, s.theta) == 0.0); }
  SUBCASE("ratio matches independent evaluation") {
    for (double ts : {0.45, 0.8, 1.3, 2.2}) {
      const double want = std::log(ts) - std::log(s.theta) + gamma_logpdf(ts, 2.0, 0.5) -
                          gamma_logpdf(s.theta, 2.0, 0.5) - std::log(range_size(1.0, 6.0, ts)) +
                          std::log(range_size(1.0, 6.0, s.theta)) + literal_aug(two, s.phi, 3, ts) -
                          literal_aug(two, s.phi, 3, s.theta);
      CHECK(dp::theta_rw_log_ratio(s, two, hp, ts) == doctest::Approx(want).epsilon(1e-12));
    }
  }
  SUBCASE("empirical acceptance matches the analytic expectation") {
    const double eps = 0.6;
    s.theta_step.log_step = std::log(eps);
    s.theta_step.frozen = true;
    const auto lr = [&](double ts) {
      if (!(ts >= 1.0 / 3.0 && ts < 3.0)) return -std::numeric_limits<double>::infinity();
      return std::log(ts) - std::log(s.theta) + gamma_logpdf(ts, 2.0, 0.5) - gamma_logpdf(s.theta, 2.0, 0.5) -
             std::log(range_size(1.0, 6.0, ts)) + std::log(range_size(1.0, 6.0, s.theta)) +
             literal_aug(two, s.phi, 3, ts) - literal_aug(two, s.phi, 3, s.theta);
    };
    // E[min(1, r)] over z ~ N(0, 1), midpoint rule on a fine grid.
    double expected = 0.0;
    const int cells = 200000;
    const double zmax = 8.0;
    const double dz = 2.0 * zmax / cells;
    for (int k = 0; k < cells; ++k) {
      const double z = -zmax + (k + 0.5) * dz;
      const double phi = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
      expected += std::min(1.0, std::exp(lr(s.theta * std::exp(eps * z)))) * phi * dz;
    }
    Rng rng(2);
    const int trials = 100000;
    int accepted = 0;
    for (int k = 0; k < trials; ++k) {
      DpChainState t = s;
      accepted += dp::update_theta_rw(t, two, hp, rng) ? 1 : 0;
    }
    const double rate = static_cast<double>(accepted) / trials;
    const double se = std::sqrt(expected * (1.0 - expected) / trials);
    CHECK(std::abs(rate - expected) < 3.0 * se);
  }
}

TEST_CASE("joint (M, theta) move") {
  const DpHyperparams hp{2, 1, 3, 4, 2.0, 0.5, 1.0, 6.0};
  SUBCASE("proposal kernel normalizes over any range") {
    for (auto [lo, hi, c] : std::vector<std::array<int, 3>>{{1, 6, 3}, {4, 40, 1}, {10, 10, 10}, {2, 9, 30}}) {
      const MRange r{lo, hi};
      double s = 0.0;
      for (int j = lo; j <= hi; ++j) s += std::exp(inverse_quadratic_log_prob(j, c, r));
      CHECK(s == doctest::Approx(1.0).epsilon(1e-13));
    }
  }
  SUBCASE("symmetric configuration has unit proposal ratio") {
    const MRange r{1, 6};
    CHECK(inverse_quadratic_log_prob(3, 3, r) - inverse_quadratic_log_prob(3, 3, r) == 0.0);
    DpChainState s;
    s.theta = 1.0;
    s.M = 3;
    s.phi = {0.4, 2.5};
    const SurvivalDataset two({{0.9, true, {}}, {2.6, false, {}}});
    // Same M and a theta with the same range: r reduces to the theta-only ratio.
    CHECK(dp::joint_log_ratio(s, two, hp, 3, 1.1) == doctest::Approx(dp::theta_rw_log_ratio(s, two, hp, 1.1)).epsilon(1e-12));
  }
  SUBCASE("ratio matches the expanded formula") {
    DpChainState s;
    s.theta = 1.0;
    s.M = 3;
    s.phi = {0.4, 2.5, 1.7};
    const auto q = [](int j, int c, int lo, int hi) {
      double z = 0.0;
      for (int k = lo; k <= hi; ++k) z += 1.0 / ((k - c) * (k - c) + 1.0);
      return 1.0 / ((j - c) * (j - c) + 1.0) / z;
    };
    for (auto [Ms, ts] : std::vector<std::pair<int, double>>{{2, 0.7}, {5, 1.2}, {4, 0.4}, {1, 2.5}}) {
      const int lo_s = static_cast<int>(std::ceil(1.0 / ts));
      const int hi_s = static_cast<int>(std::ceil(6.0 / ts));
      if (Ms < lo_s || Ms > hi_s) {
        CHECK(dp::joint_log_ratio(s, kToy, hp, Ms, ts) == -std::numeric_limits<double>::infinity());
        continue;
      }
      const double want = std::log(ts) + gamma_logpdf(ts, 2.0, 0.5) - std::log(hi_s - lo_s + 1.0) +
                          literal_aug(kToy, s.phi, Ms, ts) + std::log(q(3, Ms, 1, 6)) -
                          (std::log(1.0) + gamma_logpdf(1.0, 2.0, 0.5) - std::log(6.0) +
                           literal_aug(kToy, s.phi, 3, 1.0) + std::log(q(Ms, 3, lo_s, hi_s)));
      CHECK(dp::joint_log_ratio(s, kToy, hp, Ms, ts) == doctest::Approx(want).epsilon(1e-12));
    }
  }
  SUBCASE("proposal draws follow the kernel") {
    Rng rng(3);
    const MRange r{2, 12};
    std::vector<int> counts(13, 0);
    const int draws = 200000;
    for (int k = 0; k < draws; ++k) ++counts[static_cast<std::size_t>(sample_inverse_quadratic(5, r, rng))];
    for (int j = 2; j <= 12; ++j) {
      const double p = std::exp(inverse_quadratic_log_prob(j, 5, r));
      CHECK(std::abs(counts[static_cast<std::size_t>(j)] / static_cast<double>(draws) - p) < 4.0 * std::sqrt(p * (1 - p) / draws));
    }
  }
}

TEST_CASE("zeta full conditional") {
  const DpHyperparams hp{2, 1, 3.0, 4.0, 1, 1, 13, 39};
  const std::vector<double> two{1.0, 3.0, 3.0, 1.0};
  auto post = dp::zeta_conditional(two, hp);
  CHECK(post.shape == 5.0);
  CHECK(post.scale == 8.0);
  post = dp::zeta_conditional(std::vector<double>{}, hp);
  CHECK(post.shape == 3.0);
  CHECK(post.scale == 4.0);
  post = dp::zeta_conditional(std::vector<double>{2.0, 2.0, 2.0}, hp);
  CHECK(post.shape == 4.0);
  CHECK(post.scale == 6.0);

  SUBCASE("draws follow the inverse gamma law") {
    DpChainState s;
    s.phi = {0.4, 0.4, 2.0, 5.5};
    Rng rng(4);
    std::vector<double> x(100000);
    for (auto& v : x) v = dp::update_zeta(s, hp, rng);
    // inv-Ga(a, b): P(Z <= z) = Q(a, b / z).
    const auto cdf = [](double z) { return boost::math::gamma_q(6.0, 11.9 / z); };
    CHECK(oracle::ks_statistic(x, cdf) < oracle::ks_critical_99(x.size()));
  }
}

TEST_CASE("alpha update") {
  SUBCASE("mixture weights") {
    const auto m = alpha_mixture(0.5, 10, 3, 2.0, 1.0);
    CHECK(m.weight_first == doctest::Approx(4.0 / (10.0 * (1.0 + std::log(2.0)) + 4.0)).epsilon(1e-15));
    CHECK(m.shape_first == 5.0);
    CHECK(m.shape_second == 4.0);
    CHECK(m.scale == doctest::Approx(1.0 / (1.0 + std::log(2.0))));
    for (double eta : {0.01, 0.3, 0.99}) {
      const auto w = alpha_mixture(eta, 50, 7, 0.5, 3.0);
      CHECK((w.weight_first >= 0.0 && w.weight_first <= 1.0));
    }
  }
  SUBCASE("iterated draws reach the grid posterior") {
    // p(alpha | n*, n) is proportional to Ga(alpha | a, b) alpha^n* Gamma(alpha) / Gamma(alpha + n).
    const std::size_t n = 40;
    const std::size_t n_star = 6;
    const double a = 2.0;
    const double b = 1.0;
    const auto log_post = [&](double al) {
      return gamma_logpdf(al, a, b) + n_star * std::log(al) + std::lgamma(al) - std::lgamma(al + n);
    };
    const double amax = 15.0;
    const int bins = 60;
    std::vector<double> want(bins);
    double tot = 0.0;
    for (int k = 0; k < bins; ++k) {
      want[static_cast<std::size_t>(k)] = oracle::integrate([&](double al) { return std::exp(log_post(al)); },
                                                           k * amax / bins, (k + 1) * amax / bins);
      tot += want[static_cast<std::size_t>(k)];
    }
    const double tail = oracle::integrate_tail([&](double al) { return std::exp(log_post(al)); }, amax);
    tot += tail;
    for (auto& v : want) v /= tot;
    want.push_back(tail / tot);

    Rng rng(5);
    std::vector<double> got(bins + 1, 0.0);
    double alpha = 1.0;
    const int sweeps = 100000;
    for (int k = 0; k < sweeps; ++k) {
      alpha = draw_alpha(alpha, n, n_star, a, b, rng);
      const auto idx = std::min<std::size_t>(static_cast<std::size_t>(alpha / amax * bins), bins);
      got[idx] += 1.0 / sweeps;
    }
    CHECK(oracle::total_variation(got, want) < 0.02);
  }
  SUBCASE("no observations is an error") {
    Rng rng(6);
    CHECK_THROWS_AS(draw_alpha(1.0, 0, 0, 1.0, 1.0, rng), std::domain_error);
  }
}

TEST_CASE("Polya urn weights against per-bin quadrature") {
  const int M = 3;
  const double theta = 1.0;
  const double zeta = 1.0;
  const std::vector<double> atoms{0.5, 2.5, 2.7};
  for (bool event : {true, false}) {
    CAPTURE(event);
    const auto w = dp::urn_weights(1.2, event, M, theta, zeta, atoms);
    const auto want = oracle::urn_by_quadrature(1.2, event, M, theta,
                                                [&](double p) { return std::exp(-p / zeta) / zeta; });
    CHECK(std::abs(w.q0() - want.q0) <= 1e-8 * want.q0);
    REQUIRE(w.omega.size() == 3);
    for (int m = 0; m < M; ++m) CHECK(std::abs(w.omega[static_cast<std::size_t>(m)] - want.bin[static_cast<std::size_t>(m)] / want.q0) <= 1e-8);
    const auto q = w.q();
    REQUIRE(q.size() == atoms.size());
    for (std::size_t j = 0; j < atoms.size(); ++j) {
      const double k = std::exp(oracle::obs_log_kernel(1.2, event, oracle::literal_bin(atoms[j], M, theta), theta));
      CHECK(std::abs(q[j] - k) <= 1e-8 * k);
    }
    // Choice probabilities alpha q0 / A and n_j q_j / A.
    const std::vector<int> counts{2, 1, 4};
    const double alpha = 0.7;
    const auto probs = urn_choice_probabilities(w, alpha, counts);
    double A = alpha * want.q0;
    for (std::size_t j = 0; j < atoms.size(); ++j) A += counts[j] * q[j];
    CHECK(std::abs(probs[0] - alpha * want.q0 / A) <= 1e-8);
    for (std::size_t j = 0; j < atoms.size(); ++j) CHECK(std::abs(probs[j + 1] - counts[j] * q[j] / A) <= 1e-8);
  }
}

TEST_CASE("latent value update") {
  SUBCASE("vanishing total mass never opens a new atom") {
    const auto w = dp::urn_weights(1.0, true, 4, 0.5, 1.0, std::vector<double>{0.3, 1.1});
    const auto probs = urn_choice_probabilities(w, 1e-300, std::vector<int>{1, 1});
    CHECK(probs[0] < 1e-290);
  }
  SUBCASE("single observation always draws fresh") {
    const SurvivalDataset one({{1.7, true, {}}});
    DpChainState s;
    s.theta = 0.5;
    s.M = 8;
    s.zeta = 2.0;
    s.phi = {1.7};
    Rng rng(7);
    for (int k = 0; k < 200; ++k) {
      const double before = s.phi[0];
      const double v = dp::update_phi_i(s, one, 0, rng);
      CHECK(v != before);
    }
  }
  SUBCASE("drawn values are positive and bin-consistent") {
    SurvivalDataset d({{0.2, true, {}}, {9.0, false, {}}, {3.3, true, {}}, {40.0, true, {}}});
    DpChainState s;
    s.theta = 0.35;
    s.M = 20;
    s.zeta = 3.0;
    s.alpha = 2.0;
    s.phi = {0.2, 5.0, 3.3, 6.9};
    Rng rng(8);
    for (int k = 0; k < 5000; ++k) {
      const std::size_t i = static_cast<std::size_t>(k) % d.size();
      const double v = dp::update_phi_i(s, d, i, rng);
      CHECK(v > 0.0);
      CHECK(std::isfinite(v));
      const int c = component_of(v, s.M, s.theta);
      CHECK((c >= 1 && c <= s.M));
    }
  }
}

TEST_CASE("chain driver") {
  const DpHyperparams hp{2, 1, 3, 4, 1, 1, 13, 39};
  const SurvivalDataset d({{1.2, true, {}}, {2.9, true, {}}, {7.1, false, {}}, {4.4, true, {}}, {0.6, true, {}},
                           {3.0, true, {}}, {5.2, false, {}}, {2.2, true, {}}});
  SUBCASE("empty schedule") {
    Rng rng(9);
    const auto out = dp::run_chain(d, hp, {0, 0.25, 1}, rng);
    CHECK(out.draws.empty());
  }
  SUBCASE("invalid schedule and empty data") {
    Rng rng(9);
    CHECK_THROWS_AS(dp::run_chain(d, hp, {10, 1.0, 1}, rng), ConfigError);
    CHECK_THROWS_AS(dp::run_chain(d, hp, {10, 0.2, 0}, rng), ConfigError);
    CHECK_THROWS_AS(dp::run_chain(SurvivalDataset{}, hp, {10, 0.2, 1}, rng), ConfigError);
  }
  SUBCASE("seeded determinism and the M-range invariant") {
    Rng a(10);
    Rng b(10);
    const ChainSchedule sched{600, 0.25, 3};
    const auto x = dp::run_chain(d, hp, sched, a);
    const auto y = dp::run_chain(d, hp, sched, b);
    REQUIRE(x.draws.size() == static_cast<std::size_t>(sched.retained_count()));
    REQUIRE(x.draws.size() == y.draws.size());
    for (std::size_t k = 0; k < x.draws.size(); ++k) {
      CHECK(x.draws[k].theta == y.draws[k].theta);
      CHECK(x.draws[k].M == y.draws[k].M);
      CHECK(x.draws[k].phi == y.draws[k].phi);
      const auto r = hp.range(x.draws[k].theta);
      CHECK(r.contains(x.draws[k].M));
      for (double p : x.draws[k].phi) CHECK(p > 0.0);
    }
    CHECK(x.draws.front().theta_step.frozen);
  }
  SUBCASE("initialization") {
    const auto s = dp::initial_state(d, hp);
    CHECK(s.theta == 1.0);
    CHECK(s.M == 26);
    CHECK(s.alpha == 2.0);
    CHECK(s.zeta == doctest::Approx(d.mean_time()));
    for (std::size_t i = 0; i < d.size(); ++i) CHECK(s.phi[i] == std::min(d[i].time, 26.0 * (1 + 1e-6)));
  }
}

TEST_CASE("collapsed posterior of a two-observation model") {
  const double y[2] = {0.8, 2.5};
  const bool ev[2] = {true, false};
  const SurvivalDataset d({{y[0], ev[0], {}}, {y[1], ev[1], {}}});
  const int M = 3;
  DpHyperparams hp{2, 1, 3, 4, 1, 1, 2.5, 3.5};
  DpChainState init;
  init.theta = 1.0;
  init.M = M;
  init.alpha = 0.8;
  init.zeta = 1.5;
  init.phi = {0.8, 2.5};
  DpRunOptions opt;
  opt.moves = {true, false, false, false, false, false};
  opt.initial = init;
  const auto want = oracle::two_obs_assignment_posterior(y, ev, M, 1.0, 0.8, 1.5);
  std::vector<double> got(static_cast<std::size_t>(M * M), 0.0);
  const int sweeps = 100000;
  Rng rng(11);
  dp::run_chain(d, hp, {sweeps, 0.0, 1}, rng, [&](int, const DpChainState& s) {
    const int a = component_of(s.phi[0], M, s.theta);
    const int b = component_of(s.phi[1], M, s.theta);
    got[static_cast<std::size_t>((a - 1) * M + (b - 1))] += 1.0 / sweeps;
  }, opt);
  CHECK(oracle::total_variation(got, want) < 0.03);
}
