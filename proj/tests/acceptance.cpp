// Acceptance run: one PASS/FAIL line per criterion. Stochastic criteria use
// fixed seeds chosen before any run (the CLI default seed 1 for the recovery
// studies) and go through the same code paths as the command-line tool.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <json.hpp>

#include "erlangmix/ddp_sampler.hpp"
#include "erlangmix/dp_sampler.hpp"
#include "erlangmix/mixture_model.hpp"
#include "erlangmix/posterior.hpp"
#include "erlangmix/special_math.hpp"
#include "erlangmix_cli/commands.hpp"
#include "erlangmix_cli/config.hpp"
#include "oracles.hpp"

using namespace erlangmix;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

const fs::path& work_dir() {
  static const fs::path dir = [] {
    const auto p = fs::temp_directory_path() / "erlangmix_acceptance";
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return dir;
}

std::vector<std::vector<std::string>> read_rows(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("missing " + p.string());
  std::string line;
  std::getline(in, line);
  std::vector<std::vector<std::string>> out;
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    out.push_back(std::move(f));
  }
  return out;
}

double num(const std::string& s) { return std::strtod(s.c_str(), nullptr); }

struct Band {
  std::vector<double> t, mean, lower, upper;
};

/// Rows of summary.csv for one group and functional.
Band read_band(const fs::path& dir, const std::string& group, const std::string& kind) {
  Band b;
  for (const auto& r : read_rows(dir / "summary.csv")) {
    if (r[0] != group || r[1] != kind) continue;
    b.t.push_back(num(r[2]));
    b.mean.push_back(num(r[3]));
    b.lower.push_back(num(r[4]));
    b.upper.push_back(num(r[5]));
  }
  return b;
}

double coverage(const Band& b, const std::function<double(double)>& truth) {
  std::size_t in = 0;
  for (std::size_t j = 0; j < b.t.size(); ++j) {
    const double v = truth(b.t[j]);
    if (v >= b.lower[j] && v <= b.upper[j]) ++in;
  }
  return static_cast<double>(in) / static_cast<double>(b.t.size());
}

double mean_width(const Band& b) {
  double s = 0.0;
  for (std::size_t j = 0; j < b.t.size(); ++j) s += b.upper[j] - b.lower[j];
  return s / static_cast<double>(b.t.size());
}

double censored_fraction(const SurvivalDataset& d) {
  return static_cast<double>(d.censored_count()) / static_cast<double>(d.size());
}

std::vector<double> trace_column(const fs::path& dir, std::size_t col) {
  std::vector<double> v;
  for (const auto& r : read_rows(dir / "trace.csv")) v.push_back(num(r[col]));
  return v;
}

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

double gamma_logpdf(double x, double shape, double scale) {
  return (shape - 1.0) * std::log(x) - x / scale - std::lgamma(shape) - shape * std::log(scale);
}

// ---------------------------------------------------------------------------

Outcome kernel_exactness() {
  double worst_log = 0.0;
  double worst_hazard = 0.0;
  const std::vector<int> shapes{1, 2, 3, 7, 20, 100, 500, 2000, 8000, 20000};
  const std::vector<double> scales{0.01, 0.1, 1.0, 7.5, 50.0};
  const std::vector<double> ratios{0.001, 0.05, 0.5, 0.9, 1.0, 1.1, 2.0, 5.0};
  for (int m : shapes) {
    for (double theta : scales) {
      for (double f : ratios) {
        const double t = theta * m * f;
        const double lp = erlang_log_pdf(t, {m, theta});
        const double ls = erlang_log_sf(t, {m, theta});
        const double olp = oracle::erlang_log_pdf(t, m, theta);
        const double ols = oracle::erlang_log_sf(t, m, theta);
        worst_log = std::max({worst_log, std::abs(lp - olp), std::abs(ls - ols)});
        const double h = erlang_hazard(t, {m, theta});
        const double oh = std::exp(olp - ols);
        worst_hazard = std::max(worst_hazard, std::abs(h / oh - 1.0));
      }
    }
  }
  // Survival against quadrature of the density where both are representable.
  double worst_quad = 0.0;
  for (auto [m, theta, t] : std::vector<std::tuple<int, double, double>>{{1, 1.0, 0.3}, {5, 0.2, 1.4}, {40, 2.0, 70.0}, {400, 0.5, 250.0}}) {
    const double q = oracle::integrate_tail([&](double s) { return std::exp(oracle::erlang_log_pdf(s, m, theta)); }, t);
    worst_quad = std::max(worst_quad, std::abs(std::exp(erlang_log_sf(t, {m, theta})) / q - 1.0));
  }
  const bool ok = worst_log <= 1e-8 && worst_hazard <= 1e-8 && worst_quad <= 1e-8;
  return {ok, fmt("max |dlog| %.2e, max hazard rel err %.2e, max quadrature rel err %.2e", worst_log, worst_hazard, worst_quad)};
}

Outcome functional_identities() {
  Rng rng(20);
  double worst_int = 0.0;
  double worst_fd = 0.0;
  double worst_h = 0.0;
  double worst_w = 0.0;
  for (int k = 0; k < 100; ++k) {
    const int M = 1 + static_cast<int>(rng.uniform() * 80);
    const double theta = std::exp(std::log(0.05) + rng.uniform() * std::log(100.0));
    const WeightVector w(theta, sample_dirichlet(std::vector<double>(static_cast<std::size_t>(M), 0.5), rng));
    const double total = oracle::integrate_tail([&](double t) { return std::exp(mixture_log_density(t, w)); }, 0.0);
    worst_int = std::max(worst_int, std::abs(total - 1.0));
    for (double f : {0.05, 0.3, 0.7, 1.0, 1.5}) {
      const double t = theta * M * f;
      const double h = 1e-4 * theta;
      const double fd = (std::exp(mixture_log_survival(t + h, w)) - std::exp(mixture_log_survival(t - h, w))) / (2 * h);
      const double dens = std::exp(mixture_log_density(t, w));
      worst_fd = std::max(worst_fd, std::abs(fd + dens));
      const auto hz = mixture_hazard(t, w);
      const double ratio = dens / std::exp(mixture_log_survival(t, w));
      if (std::isfinite(ratio) && ratio > 0.0) worst_h = std::max(worst_h, std::abs(hz.hazard / ratio - 1.0));
      const double ws = std::accumulate(hz.time_weights.begin(), hz.time_weights.end(), 0.0);
      worst_w = std::max(worst_w, std::abs(ws - 1.0));
    }
  }
  const bool ok = worst_int <= 1e-5 && worst_fd <= 1e-5 && worst_h <= 1e-10 && worst_w <= 1e-12;
  return {ok, fmt("integral %.1e, S'+f %.1e, h vs f/S %.1e, sum omega* %.1e", worst_int, worst_fd, worst_h, worst_w)};
}

Outcome conditional_laws() {
  const int n = 100000;
  const double crit = oracle::ks_critical_99(n);
  std::vector<std::string> notes;
  bool ok = true;
  const auto record = [&](const char* what, double d) {
    ok = ok && d < crit;
    notes.push_back(std::string(what) + fmt(" %.4f", d));
  };

  // zeta: inv-Ga(a + n*, b + sum of distinct atoms).
  {
    const DpHyperparams hp{2, 1, 3.0, 4.0, 1, 1, 13, 39};
    DpChainState s;
    s.phi = {0.4, 0.4, 2.0, 5.5};
    Rng rng(21);
    std::vector<double> x(n);
    for (auto& v : x) v = dp::update_zeta(s, hp, rng);
    record("zeta", oracle::ks_statistic(x, [](double z) { return boost::math::gamma_q(6.0, 11.9 / z); }));
  }
  // mu: bivariate normal conditional, checked on both coordinates.
  {
    DdpHyperparams hp;
    hp.mu_bar = {0.2, -0.1};
    hp.Sigma0 = Eigen::Matrix2d{{2.0, 0.5}, {0.5, 1.5}};
    hp.Sigma = Eigen::Matrix2d{{0.8, 0.3}, {0.3, 1.1}};
    DdpChainState s;
    s.phi = {{0.5, 2.0}, {1.5, 0.8}, {3.0, 1.2}, {0.5, 2.0}};
    // Independent closed form over the three distinct pairs.
    const Eigen::Matrix2d P0 = hp.Sigma0.inverse();
    const Eigen::Matrix2d P = hp.Sigma.inverse();
    const Eigen::Matrix2d V = (P0 + 3.0 * P).inverse();
    const Eigen::Vector2d L{std::log(0.5) + std::log(1.5) + std::log(3.0), std::log(2.0) + std::log(0.8) + std::log(1.2)};
    const Eigen::Vector2d m = V * (P0 * hp.mu_bar + P * L);
    Rng rng(22);
    std::vector<double> a(n);
    std::vector<double> b(n);
    for (int k = 0; k < n; ++k) {
      const auto v = ddp::update_mu(s, hp, rng);
      a[static_cast<std::size_t>(k)] = v(0);
      b[static_cast<std::size_t>(k)] = v(1);
    }
    record("mu_C", oracle::ks_statistic(a, [&](double v) { return oracle::normal_cdf((v - m(0)) / std::sqrt(V(0, 0))); }));
    record("mu_T", oracle::ks_statistic(b, [&](double v) { return oracle::normal_cdf((v - m(1)) / std::sqrt(V(1, 1))); }));
  }
  // alpha: start each step from an exact posterior draw, so one auxiliary
  // variable update must return an exact posterior draw.
  {
    const std::size_t nn = 40;
    const std::size_t n_star = 6;
    const double a = 2.0;
    const double b = 1.0;
    const auto log_dens = [&](double al) {
      return gamma_logpdf(al, a, b) + n_star * std::log(al) + std::lgamma(al) - std::lgamma(al + nn);
    };
    // Scaled by the value at a point near the mode so quadrature sees O(1) numbers.
    const double ref = log_dens(3.0);
    const auto dens = [&](double al) { return al > 0.0 ? std::exp(log_dens(al) - ref) : 0.0; };
    const double amax = 40.0;
    const int cells = 20000;
    std::vector<double> edge(cells + 1);
    std::vector<double> cdf(cells + 1, 0.0);
    for (int k = 0; k <= cells; ++k) edge[static_cast<std::size_t>(k)] = amax * k / cells;
    for (int k = 0; k < cells; ++k) {
      cdf[static_cast<std::size_t>(k + 1)] =
          cdf[static_cast<std::size_t>(k)] +
          boost::math::quadrature::gauss<double, 20>::integrate(dens, edge[static_cast<std::size_t>(k)], edge[static_cast<std::size_t>(k + 1)]);
    }
    const double tail = oracle::integrate_tail(dens, amax);
    const double total = cdf.back() + tail;
    for (auto& c : cdf) c /= total;
    const auto F = [&](double x) {
      if (x >= amax) return 1.0 - (1.0 - cdf.back()) * oracle::integrate_tail(dens, x) / tail;
      const auto k = static_cast<std::size_t>(x / amax * cells);
      const double f = (x - edge[k]) / (edge[k + 1] - edge[k]);
      return cdf[k] + f * (cdf[k + 1] - cdf[k]);
    };
    const auto Finv = [&](double u) {
      const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
      if (it == cdf.end()) return amax;
      const auto k = static_cast<std::size_t>(it - cdf.begin()) - 1;
      return edge[k] + (u - cdf[k]) / (cdf[k + 1] - cdf[k]) * (edge[k + 1] - edge[k]);
    };
    Rng rng(23);
    std::vector<double> x(n);
    for (auto& v : x) v = draw_alpha(Finv(rng.uniform()), nn, n_star, a, b, rng);
    record("alpha", oracle::ks_statistic(x, F));
  }
  // Conditional Dirichlet posterior of the weights: Beta marginals.
  {
    const GStarSpec g{1.5, 2.0, {0.3, 0.3, 1.7, 9.0}};
    const int M = 4;
    std::vector<double> params;
    for (int m = 1; m <= M; ++m) params.push_back(1.5 * oracle::exp_bin_mass(m, M, 1.0, 2.0));
    params[0] += 2.0;
    params[1] += 1.0;
    params[3] += 1.0;
    const double a0 = std::accumulate(params.begin(), params.end(), 0.0);
    Rng rng(24);
    std::vector<std::vector<double>> x(M, std::vector<double>(n));
    for (int k = 0; k < n; ++k) {
      const auto w = sample_weights_posterior(g, M, 1.0, rng);
      for (int m = 1; m <= M; ++m) x[static_cast<std::size_t>(m - 1)][static_cast<std::size_t>(k)] = w[m];
    }
    double worst = 0.0;
    for (std::size_t m = 0; m < static_cast<std::size_t>(M); ++m) {
      worst = std::max(worst, oracle::ks_statistic(x[m], [&](double v) {
        return boost::math::ibeta(params[m], a0 - params[m], v);
      }));
    }
    record("weights", worst);
  }
  std::string detail = fmt("KS vs %.4f:", crit);
  for (const auto& s : notes) detail += " " + s;
  return {ok, detail};
}

Outcome urn_weights() {
  const int M = 3;
  const double theta = 1.0;
  const std::vector<double> atoms{0.5, 2.5, 2.7};
  const LogNormalParams cond{0.3, 0.6};
  double worst = 0.0;
  for (bool event : {false, true}) {
    const auto check = [&](const PolyaUrnWeights& w, const oracle::UrnQuadrature& q) {
      worst = std::max(worst, std::abs(w.q0() / q.q0 - 1.0));
      for (int m = 0; m < M; ++m) worst = std::max(worst, std::abs(w.omega[static_cast<std::size_t>(m)] - q.bin[static_cast<std::size_t>(m)] / q.q0));
      const auto qj = w.q();
      for (std::size_t j = 0; j < atoms.size(); ++j) {
        const double k = std::exp(oracle::obs_log_kernel(1.2, event, oracle::literal_bin(atoms[j], M, theta), theta));
        worst = std::max(worst, std::abs(qj[j] / k - 1.0));
      }
    };
    check(dp::urn_weights(1.2, event, M, theta, 1.0, atoms),
          oracle::urn_by_quadrature(1.2, event, M, theta, [](double p) { return std::exp(-p); }));
    check(ddp::urn_weights(1.2, event, M, theta, cond, atoms),
          oracle::urn_by_quadrature(1.2, event, M, theta, [&](double p) {
            return std::exp(-0.5 * std::pow(std::log(p) - cond.mu, 2) / cond.sigma2) / (p * std::sqrt(2 * M_PI * cond.sigma2));
          }));
  }
  return {worst <= 1e-8, fmt("max error %.2e over q0, q_j and Omega (one- and two-group urns)", worst)};
}

Outcome collapsed_posterior() {
  // One group: n = 2, M and theta fixed, only the latent values move.
  const double y[2] = {0.8, 2.5};
  const bool ev[2] = {true, false};
  const SurvivalDataset d({{y[0], ev[0], {}}, {y[1], ev[1], {}}});
  const int M = 3;
  const DpHyperparams hp{2, 1, 3, 4, 1, 1, 2.5, 3.5};
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
  std::vector<double> got(want.size(), 0.0);
  const int sweeps = 100000;
  Rng rng(25);
  dp::run_chain(d, hp, {sweeps, 0.0, 1}, rng, [&](int, const DpChainState& s) {
    const int a = component_of(s.phi[0], M, s.theta);
    const int b = component_of(s.phi[1], M, s.theta);
    got[static_cast<std::size_t>((a - 1) * M + (b - 1))] += 1.0 / sweeps;
  }, opt);
  const double tv = oracle::total_variation(got, want);
  return {tv < 0.03, fmt("total variation %.4f over %.0f sweeps", tv, sweeps)};
}

Outcome example1_recovery() {
  auto c = cli::run_preset("example1");
  c.grid.max = 15.0;
  c.output = work_dir() / "example1";
  cli::cmd_fit(c);
  const auto& truth = c.generators[0].mixture;
  const auto band = read_band(c.output, "all", "density");
  const double cov = coverage(band, [&](double t) { return truth.pdf(t); });
  const auto diag = read_json(c.output / "diagnostics.json");
  const double eff = diag["effective_components_mean"]["all"].get<double>();
  const auto theta = trace_column(c.output, 2);
  const double theta_mean = std::accumulate(theta.begin(), theta.end(), 0.0) / static_cast<double>(theta.size());
  const bool ok = cov >= 0.90 && eff >= 2.0 && eff <= 8.0 && theta_mean < 1.0;
  return {ok, fmt("density coverage %.3f, effective components %.2f, posterior mean theta %.3f", cov, eff, theta_mean)};
}

Outcome example2_censoring() {
  std::map<double, double> width;
  std::string detail;
  bool ok = true;
  for (double g : {0.12, 0.335}) {
    auto c = cli::run_preset("example2");
    c.generators[0].censoring_target = g;
    c.grid.max = 600.0;
    c.grid.points = 300;
    c.output = work_dir() / ("example2_" + std::to_string(g));
    const double cens = censored_fraction(cli::load_run_data(c));
    cli::cmd_fit(c);
    const auto band = read_band(c.output, "all", "survival");
    const auto& truth = c.generators[0].mixture;
    const double cov = coverage(band, [&](double t) { return truth.survival(t); });
    width[g] = mean_width(band);
    ok = ok && std::abs(cens - g) <= 0.03 && cov >= 0.90;
    detail += fmt("g=%.3f: censored %.3f, survival coverage %.3f, mean width %.4f; ", g, cens, cov, width[g]);
  }
  ok = ok && width[0.335] > width[0.12];
  return {ok, detail};
}

Outcome example3_crossing() {
  auto c = cli::run_preset("example3");
  c.schedule = {100000, 0.25, 38};
  c.output = work_dir() / "example3";
  cli::cmd_fit(c);
  const auto hc = read_band(c.output, "C", "hazard");
  const auto ht = read_band(c.output, "T", "hazard");
  int pos = 0;
  int neg = 0;
  for (std::size_t j = 0; j < hc.t.size(); ++j) {
    const double d = ht.mean[j] - hc.mean[j];
    if (!std::isfinite(d)) continue;
    pos += d > 0.0;
    neg += d < 0.0;
  }
  const double cov_c = coverage(read_band(c.output, "C", "survival"), [&](double t) { return c.generators[0].mixture.survival(t); });
  const double cov_t = coverage(read_band(c.output, "T", "survival"), [&](double t) { return c.generators[1].mixture.survival(t); });
  const bool ok = pos > 0 && neg > 0 && cov_c >= 0.85 && cov_t >= 0.85;
  return {ok, fmt("hazard difference positive at %.0f and negative at %.0f grid points; survival coverage C %.3f, T %.3f", pos, neg, cov_c, cov_t)};
}

Outcome prior_ordering() {
  auto c = cli::prior_preset("fig1");
  c.count = 50;
  c.output = work_dir() / "fig1";
  cli::cmd_prior_sim(c);
  std::vector<double> l1;
  for (const auto& r : read_rows(c.output / "prior_l1.csv")) l1.push_back(num(r[5]));
  const bool ok = l1.size() == 3 && l1[0] > l1[1] && l1[1] > l1[2];
  return {ok, fmt("mean L1 at alpha 1, 10, 100: %.4f, %.4f, %.4f", l1.at(0), l1.at(1), l1.at(2))};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome reproducibility() {
  const auto run = [](const std::string& args) {
    const std::string cmd = std::string(ERLANGMIX_EXE) + " " + args + " >/dev/null 2>&1";
    return std::system(cmd.c_str()) == 0;
  };
  const fs::path base = work_dir() / "repro";
  bool ok = true;
  std::size_t compared = 0;
  for (const auto& [name, args] : std::vector<std::pair<std::string, std::string>>{
           {"simulate", "simulate --preset example3 --seed 11"},
           {"fit_dp", "fit --preset example1 --iterations 2000 --chains 2 --seed 12"},
           {"fit_ddp", "fit --preset example3 --iterations 1000 --seed 13"}}) {
    const auto a = base / (name + "_a");
    const auto b = base / (name + "_b");
    ok = ok && run(args + " --out " + a.string()) && run(args + " --out " + b.string());
    for (const auto& e : fs::directory_iterator(a)) {
      if (e.path().extension() != ".csv" && e.path().filename() != "manifest.json") continue;
      ++compared;
      ok = ok && slurp(e.path()) == slurp(b / e.path().filename());
    }
  }
  return {ok && compared > 0, fmt("%.0f output files (CSV tables and manifests) compared byte for byte", static_cast<double>(compared))};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"kernel exactness", kernel_exactness},
      {"functional identities", functional_identities},
      {"conditional-law exactness", conditional_laws},
      {"urn-weight correctness", urn_weights},
      {"collapsed-posterior agreement", collapsed_posterior},
      {"example 1 recovery", example1_recovery},
      {"example 2 censoring robustness", example2_censoring},
      {"example 3 crossing hazards", example3_crossing},
      {"prior-study ordering", prior_ordering},
      {"reproducibility", reproducibility},
  };
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("AC%zu %s %s (%.1f s): %s\n", k + 1, o.pass ? "PASS" : "FAIL", criteria[k].first, secs, o.detail.c_str());
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  fs::remove_all(work_dir());
  return failed == 0 ? 0 : 1;
}
