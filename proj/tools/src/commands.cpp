#include "erlangmix_cli/commands.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include "erlangmix/data_sim.hpp"
#include "erlangmix/diagnostics.hpp"
#include "erlangmix/errors.hpp"
#include "erlangmix/posterior.hpp"

#ifndef ERLANGMIX_VERSION
#define ERLANGMIX_VERSION "0.0.0"
#endif

namespace erlangmix::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr std::array<FunctionalKind, 3> kKinds{FunctionalKind::Density, FunctionalKind::Survival,
                                               FunctionalKind::Hazard};

std::string num(double v) { return format_double(v); }

std::ofstream open_out(const fs::path& dir, const std::string& name) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  std::ofstream out(dir / name);
  if (!out) throw ConfigError("cannot write " + (dir / name).string());
  return out;
}

void write_json(const fs::path& dir, const std::string& name, const json& j) {
  auto out = open_out(dir, name);
  out << j.dump(2) << '\n';
}

json manifest(const std::string& command, std::uint64_t seed, json config) {
  config.erase("output");
  return {{"command", command},
          {"version", ERLANGMIX_VERSION},
          {"seed", seed},
          {"config_hash", config_hash(config)},
          {"config", config}};
}

struct Generated {
  SurvivalDataset data;
  std::vector<std::optional<double>> kappa;
};

Generated generate_all(const RunConfig& c) {
  Rng rng(seed_streams(c.seed, 1).data);
  Generated g;
  for (const auto& spec : c.generators) {
    auto sample = generate_instrumented(spec, rng);
    g.data = SurvivalDataset::concat(g.data, sample.data);
    g.kappa.push_back(sample.kappa);
  }
  return g;
}

std::vector<double> run_grid(const GridSpec& grid, const SurvivalDataset& data) {
  return grid.max ? uniform_grid(*grid.max, grid.points) : default_grid(data, grid.points);
}

void write_summary_rows(std::ostream& out, const std::string& group,
                        const std::array<CurveMatrix, 3>& curves, std::span<const double> grid,
                        double level) {
  for (const FunctionalKind k : kKinds) {
    const auto s = summarize_curves(curves[static_cast<std::size_t>(k)], k, grid, level);
    for (std::size_t j = 0; j < grid.size(); ++j) {
      out << group << ',' << to_string(k) << ',' << num(grid[j]) << ',' << num(s.mean[j]) << ','
          << num(s.lower[j]) << ',' << num(s.upper[j]) << '\n';
    }
  }
}

constexpr const char* kSummaryHeader = "group,kind,t,mean,lower,upper\n";

// Group label -> weight draws, in output order.
using GroupedWeights = std::vector<std::pair<std::string, std::vector<WeightVector>>>;

void write_summary(const fs::path& dir, const std::string& name, const GroupedWeights& groups,
                   std::span<const double> grid, double level) {
  auto out = open_out(dir, name);
  out << kSummaryHeader;
  for (const auto& [label, weights] : groups) {
    write_summary_rows(out, label, evaluate_curves(weights, grid), grid, level);
  }
}

double mean_effective_components(const std::vector<WeightVector>& ws) {
  if (ws.empty()) return 0.0;
  double s = 0.0;
  for (const auto& w : ws) s += effective_components(w);
  return s / static_cast<double>(ws.size());
}

template <typename Fn>
void run_parallel(int chains, Fn&& fn) {
  if (chains == 1) {
    fn(0);
    return;
  }
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(chains));
  std::vector<std::thread> threads;
  for (int k = 0; k < chains; ++k) {
    threads.emplace_back([&, k] {
      try {
        fn(k);
      } catch (...) {
        errors[static_cast<std::size_t>(k)] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

void write_weights(std::ostream& out, int chain, std::size_t draw, const std::string& group,
                   const WeightVector& w) {
  for (int m = 1; m <= w.M(); ++m) {
    out << chain << ',' << draw << ',' << group << ',' << num(w.theta()) << ',' << m << ','
        << num(w[m]) << '\n';
  }
}

void fit_dp(const RunConfig& c, const SurvivalDataset& data, const SeedStreams& streams,
            std::span<const double> grid, json& diagnostics) {
  const auto k_chains = static_cast<std::size_t>(c.chains);
  std::vector<DpChainOutput> outputs(k_chains);
  std::vector<std::vector<WeightVector>> weights(k_chains);
  run_parallel(c.chains, [&](int k) {
    const auto i = static_cast<std::size_t>(k);
    Rng rng(streams.chain[i]);
    outputs[i] = dp::run_chain(data, c.dp, c.schedule, rng);
    Rng post(streams.post[i]);
    weights[i] = posterior_weight_draws(outputs[i].draws, post);
  });

  auto trace = open_out(c.output, "trace.csv");
  trace << "chain,iteration,theta,M,alpha,zeta,n_star\n";
  auto wout = open_out(c.output, "weights.csv");
  wout << "chain,draw,group,theta,m,omega\n";
  std::vector<WeightVector> pooled;
  json per_chain = json::array();
  for (std::size_t k = 0; k < k_chains; ++k) {
    const int chain = static_cast<int>(k) + 1;
    std::vector<double> thetas;
    for (std::size_t d = 0; d < outputs[k].draws.size(); ++d) {
      const auto& s = outputs[k].draws[d];
      thetas.push_back(s.theta);
      trace << chain << ',' << s.iteration << ',' << num(s.theta) << ',' << s.M << ',' << num(s.alpha)
            << ',' << num(s.zeta) << ',' << ClusterView::of(s.phi).n_star() << '\n';
      write_weights(wout, chain, d + 1, "all", weights[k][d]);
    }
    pooled.insert(pooled.end(), weights[k].begin(), weights[k].end());
    per_chain.push_back({{"chain", chain},
                         {"retained_draws", outputs[k].draws.size()},
                         {"acceptance", {{"theta_rw", outputs[k].theta_moves.rate()},
                                         {"joint_M_theta", outputs[k].joint_moves.rate()}}},
                         {"ess", {{"theta", effective_sample_size(thetas)}}},
                         {"effective_components_mean", {{"all", mean_effective_components(weights[k])}}}});
    if (c.chains > 1) {
      write_summary(c.output, "summary_chain" + std::to_string(chain) + ".csv", {{"all", weights[k]}},
                    grid, c.level);
    }
  }
  if (pooled.empty()) throw ConfigError("schedule retains no draws; increase iterations");
  write_summary(c.output, "summary.csv", {{"all", pooled}}, grid, c.level);
  diagnostics["chains"] = per_chain;
  diagnostics["effective_components_mean"] = {{"all", mean_effective_components(pooled)}};
}

void fit_ddp(const RunConfig& c, const SurvivalDataset& data, const SeedStreams& streams,
             std::span<const double> grid, json& diagnostics) {
  const auto k_chains = static_cast<std::size_t>(c.chains);
  std::vector<DdpChainOutput> outputs(k_chains);
  std::vector<std::vector<GroupWeightPair>> weights(k_chains);
  run_parallel(c.chains, [&](int k) {
    const auto i = static_cast<std::size_t>(k);
    Rng rng(streams.chain[i]);
    outputs[i] = ddp::run_chain(data, c.ddp, c.schedule, rng);
    Rng post(streams.post[i]);
    weights[i] = posterior_group_weight_draws(outputs[i].draws, c.ddp, post);
  });

  auto trace = open_out(c.output, "trace.csv");
  trace << "chain,iteration,theta_C,theta_T,M_C,M_T,alpha,mu_C,mu_T,n_star\n";
  auto wout = open_out(c.output, "weights.csv");
  wout << "chain,draw,group,theta,m,omega\n";
  std::vector<GroupWeightPair> pooled;
  std::vector<WeightVector> pooled_c;
  std::vector<WeightVector> pooled_t;
  json per_chain = json::array();
  for (std::size_t k = 0; k < k_chains; ++k) {
    const int chain = static_cast<int>(k) + 1;
    std::vector<double> th_c;
    std::vector<double> th_t;
    std::vector<WeightVector> wc;
    std::vector<WeightVector> wt;
    for (std::size_t d = 0; d < outputs[k].draws.size(); ++d) {
      const auto& s = outputs[k].draws[d];
      th_c.push_back(s.theta[0]);
      th_t.push_back(s.theta[1]);
      trace << chain << ',' << s.iteration << ',' << num(s.theta[0]) << ',' << num(s.theta[1]) << ','
            << s.M[0] << ',' << s.M[1] << ',' << num(s.alpha) << ',' << num(s.mu(0)) << ','
            << num(s.mu(1)) << ',' << PairClusterView::of(s.phi).n_star() << '\n';
      write_weights(wout, chain, d + 1, "C", weights[k][d].control);
      write_weights(wout, chain, d + 1, "T", weights[k][d].treatment);
      wc.push_back(weights[k][d].control);
      wt.push_back(weights[k][d].treatment);
    }
    per_chain.push_back({{"chain", chain},
                         {"retained_draws", outputs[k].draws.size()},
                         {"acceptance", {{"theta_pair", outputs[k].theta_moves.rate()}}},
                         {"ess", {{"theta_C", effective_sample_size(th_c)}, {"theta_T", effective_sample_size(th_t)}}},
                         {"effective_components_mean",
                          {{"C", mean_effective_components(wc)}, {"T", mean_effective_components(wt)}}}});
    if (c.chains > 1) {
      write_summary(c.output, "summary_chain" + std::to_string(chain) + ".csv", {{"C", wc}, {"T", wt}},
                    grid, c.level);
    }
    pooled.insert(pooled.end(), weights[k].begin(), weights[k].end());
    pooled_c.insert(pooled_c.end(), wc.begin(), wc.end());
    pooled_t.insert(pooled_t.end(), wt.begin(), wt.end());
  }
  if (pooled.empty()) throw ConfigError("schedule retains no draws; increase iterations");
  write_summary(c.output, "summary.csv", {{"C", pooled_c}, {"T", pooled_t}}, grid, c.level);
  diagnostics["chains"] = per_chain;
  diagnostics["effective_components_mean"] = {{"C", mean_effective_components(pooled_c)},
                                               {"T", mean_effective_components(pooled_t)}};

  if (!c.contrast_times.empty()) {
    const auto contrast = contrast_at_times(pooled, c.contrast_times, c.level);
    auto out = open_out(c.output, "contrast.csv");
    out << "t,quantity,mean,lower,upper\n";
    auto draws_out = open_out(c.output, "contrast_draws.csv");
    draws_out << "t,draw,survival_diff,hazard_diff\n";
    for (std::size_t i = 0; i < contrast.time_points.size(); ++i) {
      const double t = contrast.time_points[i];
      const auto mean_of = [](const std::vector<double>& v) {
        double s = 0.0;
        std::size_t n = 0;
        for (double x : v) {
          if (!std::isnan(x)) {
            s += x;
            ++n;
          }
        }
        return n > 0 ? s / static_cast<double>(n) : std::nan("");
      };
      out << num(t) << ",survival," << num(mean_of(contrast.survival_draws[i])) << ','
          << num(contrast.survival_interval[i][0]) << ',' << num(contrast.survival_interval[i][1]) << '\n';
      out << num(t) << ",hazard," << num(mean_of(contrast.hazard_draws[i])) << ','
          << num(contrast.hazard_interval[i][0]) << ',' << num(contrast.hazard_interval[i][1]) << '\n';
      for (std::size_t d = 0; d < contrast.survival_draws[i].size(); ++d) {
        draws_out << num(t) << ',' << d + 1 << ',' << num(contrast.survival_draws[i][d]) << ','
                  << num(contrast.hazard_draws[i][d]) << '\n';
      }
    }
  }
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? comma : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

template <typename T>
T parse_field(std::string_view s, std::size_t line) {
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw DataError("weights.csv line " + std::to_string(line) + ": bad field '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace

SeedStreams seed_streams(std::uint64_t seed, int chains) {
  Rng master(seed);
  SeedStreams s;
  s.data = master.split();
  for (int k = 0; k < chains; ++k) s.chain.push_back(master.split());
  for (int k = 0; k < chains; ++k) s.post.push_back(master.split());
  return s;
}

SurvivalDataset load_run_data(const RunConfig& c) {
  if (c.data_csv) return load_csv(*c.data_csv, c.csv);
  return generate_all(c).data;
}

void cmd_simulate(const RunConfig& c) {
  if (c.generators.empty()) throw ConfigError("simulate needs a generator (use a synthetic preset or config)");
  for (const auto& g : c.generators) g.validate();
  const Generated gen = generate_all(c);
  fs::create_directories(c.output);
  write_csv(c.output / "data.csv", gen.data, c.csv);

  const auto grid = run_grid(c.grid, gen.data);
  auto truth = open_out(c.output, "truth.csv");
  truth << "group,t,density,survival,hazard\n";
  json gens = json::array();
  for (std::size_t i = 0; i < c.generators.size(); ++i) {
    const auto& g = c.generators[i];
    const std::string label = g.group ? std::string(to_string(*g.group)) : "all";
    for (double t : grid) {
      truth << label << ',' << num(t) << ',' << num(g.mixture.pdf(t)) << ',' << num(g.mixture.survival(t))
            << ',' << num(g.mixture.hazard(t)) << '\n';
    }
    gens.push_back({{"group", label}, {"kappa", gen.kappa[i] ? json(*gen.kappa[i]) : json(nullptr)}});
  }
  json m = manifest("simulate", c.seed, to_json(c));
  m["records"] = gen.data.size();
  m["censored"] = gen.data.censored_count();
  m["generators"] = gens;
  write_json(c.output, "manifest.json", m);
}

void cmd_fit(const RunConfig& c) {
  c.validate();
  const SurvivalDataset data = load_run_data(c);
  if (c.model == ModelKind::Ddp && !data.has_groups()) {
    throw DataError("the ddp model needs a group column");
  }
  const SeedStreams streams = seed_streams(c.seed, c.chains);
  const auto grid = run_grid(c.grid, data);
  fs::create_directories(c.output);

  const auto start = std::chrono::steady_clock::now();
  json diagnostics;
  if (c.model == ModelKind::Dp) {
    fit_dp(c, data, streams, grid, diagnostics);
  } else {
    fit_ddp(c, data, streams, grid, diagnostics);
  }
  diagnostics["wall_clock_seconds"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_json(c.output, "diagnostics.json", diagnostics);

  json m = manifest("fit", c.seed, to_json(c));
  m["records"] = data.size();
  m["grid_max"] = grid.back();
  m["grid_points"] = grid.size();
  write_json(c.output, "manifest.json", m);
}

void cmd_prior_sim(const PriorSimConfig& c) {
  c.validate();
  double max = 0.0;
  for (const auto& s : c.settings) max = std::max(max, s.M * s.theta);
  const auto grid = uniform_grid(c.grid.max.value_or(max), c.grid.points);
  Rng rng(c.seed);

  auto wout = open_out(c.output, "prior_weights.csv");
  wout << "setting,alpha,M,theta,realization,m,omega\n";
  auto dout = open_out(c.output, "prior_density.csv");
  dout << "setting,realization,t,density,base_density\n";
  auto lout = open_out(c.output, "prior_l1.csv");
  lout << "setting,alpha,M,theta,zeta,mean_l1\n";
  for (std::size_t i = 0; i < c.settings.size(); ++i) {
    const auto& s = c.settings[i];
    const auto reals = prior_realizations(s.alpha, s.zeta, s.M, s.theta, c.count, grid, rng);
    std::vector<double> base(grid.size());
    for (std::size_t j = 0; j < grid.size(); ++j) base[j] = std::exp(-grid[j] / s.zeta) / s.zeta;
    double l1 = 0.0;
    for (std::size_t r = 0; r < reals.size(); ++r) {
      const auto& w = reals[r].weights;
      for (int m = 1; m <= w.M(); ++m) {
        wout << i + 1 << ',' << num(s.alpha) << ',' << s.M << ',' << num(s.theta) << ',' << r + 1 << ','
             << m << ',' << num(w[m]) << '\n';
      }
      for (std::size_t j = 0; j < grid.size(); ++j) {
        dout << i + 1 << ',' << r + 1 << ',' << num(grid[j]) << ',' << num(reals[r].density[j]) << ','
             << num(base[j]) << '\n';
      }
      l1 += l1_distance(grid, reals[r].density, base, w[1] / w.theta(), 1.0 / s.zeta);
    }
    lout << i + 1 << ',' << num(s.alpha) << ',' << s.M << ',' << num(s.theta) << ',' << num(s.zeta) << ','
         << num(reals.empty() ? 0.0 : l1 / static_cast<double>(reals.size())) << '\n';
  }
  write_json(c.output, "manifest.json", manifest("prior-sim", c.seed, to_json(c)));
}

void cmd_summarize(const SummarizeOptions& o) {
  if (!(o.level >= 0.0 && o.level < 1.0)) throw ConfigError("level must lie in [0, 1)");
  std::ifstream in(o.input / "weights.csv");
  if (!in) throw DataError("cannot open " + (o.input / "weights.csv").string());
  std::string line;
  std::getline(in, line);
  if (line.rfind("chain,draw,group,theta,m,omega", 0) != 0) throw DataError("weights.csv: unexpected header");

  GroupedWeights groups;
  std::string cur_key;
  std::string cur_group;
  double cur_theta = 0.0;
  std::vector<double> omega;
  const auto flush = [&] {
    if (omega.empty()) return;
    auto it = std::find_if(groups.begin(), groups.end(), [&](const auto& g) { return g.first == cur_group; });
    if (it == groups.end()) {
      groups.emplace_back(cur_group, std::vector<WeightVector>{});
      it = std::prev(groups.end());
    }
    it->second.emplace_back(cur_theta, omega);
    omega.clear();
  };
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != 6) throw DataError("weights.csv line " + std::to_string(line_no) + ": expected 6 fields");
    const std::string key = std::string(f[0]) + ',' + std::string(f[1]) + ',' + std::string(f[2]);
    if (key != cur_key) {
      flush();
      cur_key = key;
      cur_group = std::string(f[2]);
      cur_theta = parse_field<double>(f[3], line_no);
    }
    const int m = parse_field<int>(f[4], line_no);
    if (m != static_cast<int>(omega.size()) + 1) {
      throw DataError("weights.csv line " + std::to_string(line_no) + ": components out of order");
    }
    omega.push_back(parse_field<double>(f[5], line_no));
  }
  flush();
  if (groups.empty()) throw DataError("weights.csv holds no draws");

  double max = 0.0;
  if (o.grid.max) {
    max = *o.grid.max;
  } else {
    const json m = read_json_file(o.input / "manifest.json");
    if (!m.contains("grid_max")) throw ConfigError("manifest has no grid_max; pass --grid-max");
    max = m["grid_max"].get<double>();
  }
  const auto grid = uniform_grid(max, o.grid.points);
  write_summary(o.output, "summary.csv", groups, grid, o.level);
}

}  // namespace erlangmix::cli
