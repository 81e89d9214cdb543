#include "erlangmix_cli/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <initializer_list>

#include "erlangmix/errors.hpp"

namespace erlangmix::cli {

using nlohmann::json;

namespace {

void check_keys(const json& j, std::string_view where, std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) throw ConfigError(std::string(where) + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError("unknown key '" + key + "' in " + std::string(where));
    }
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid value for '") + key + "': " + e.what());
  }
}

LogNormalMixture single(double mu, double sigma) { return {{{1.0, {mu, sigma * sigma}}}}; }

GeneratorSpec generator(std::size_t n, LogNormalMixture m, std::optional<Group> g = std::nullopt) {
  GeneratorSpec s;
  s.n = n;
  s.mixture = std::move(m);
  s.group = g;
  return s;
}

std::optional<Group> group_from_string(const std::string& s) {
  if (s == "C") return Group::Control;
  if (s == "T") return Group::Treatment;
  throw ConfigError("group must be \"C\" or \"T\", found \"" + s + "\"");
}

json matrix_json(const Eigen::Matrix2d& m) {
  return json::array({json::array({m(0, 0), m(0, 1)}), json::array({m(1, 0), m(1, 1)})});
}

Eigen::Matrix2d matrix_from_json(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_array() || !j[1].is_array() || j[0].size() != 2 ||
      j[1].size() != 2) {
    throw ConfigError(std::string(what) + " must be a 2x2 array");
  }
  Eigen::Matrix2d m;
  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < 2; ++c) m(r, c) = j[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

json grid_json(const GridSpec& g) {
  return {{"max", g.max ? json(*g.max) : json(nullptr)}, {"points", g.points}};
}

void read_grid(const json& j, GridSpec& g) {
  check_keys(j, "grid", {"max", "points"});
  if (j.contains("max")) g.max = j["max"].is_null() ? std::nullopt : std::optional<double>(j["max"].get<double>());
  read(j, "points", g.points);
}

json group_prior_json(const GroupPrior& p) {
  return {{"a_theta", p.a_theta}, {"b_theta", p.b_theta}, {"M1", p.M1}, {"M2", p.M2}};
}

void read_group_prior(const json& j, GroupPrior& p, const char* where) {
  check_keys(j, where, {"a_theta", "b_theta", "M1", "M2"});
  read(j, "a_theta", p.a_theta);
  read(j, "b_theta", p.b_theta);
  read(j, "M1", p.M1);
  read(j, "M2", p.M2);
}

}  // namespace

void RunConfig::validate() const {
  schedule.validate();
  if (model == ModelKind::Dp) {
    dp.validate();
  } else {
    ddp.validate();
  }
  if (!data_csv && generators.empty()) throw ConfigError("no data source: give --data or a generator");
  for (const auto& g : generators) g.validate();
  if (model == ModelKind::Ddp && !data_csv) {
    const bool both = std::any_of(generators.begin(), generators.end(), [](const auto& g) { return g.group == Group::Control; }) &&
                      std::any_of(generators.begin(), generators.end(), [](const auto& g) { return g.group == Group::Treatment; });
    if (!both) throw ConfigError("the ddp model needs generators for both groups");
  }
  if (grid.max && !(*grid.max > 0.0)) throw ConfigError("grid max must be positive");
  if (grid.points == 0) throw ConfigError("grid needs at least one point");
  if (!(level >= 0.0 && level < 1.0)) throw ConfigError("level must lie in [0, 1)");
  if (chains < 1) throw ConfigError("chains must be >= 1");
  for (double t : contrast_times) {
    if (!(t > 0.0)) throw ConfigError("contrast times must be positive");
  }
}

void PriorSimConfig::validate() const {
  if (settings.empty()) throw ConfigError("prior study needs at least one setting");
  for (const auto& s : settings) {
    if (!(s.alpha > 0.0) || s.M < 1 || !(s.theta > 0.0) || !(s.zeta > 0.0)) {
      throw ConfigError("prior settings need alpha, theta, zeta > 0 and M >= 1");
    }
  }
  if (grid.points == 0) throw ConfigError("grid needs at least one point");
  if (grid.max && !(*grid.max > 0.0)) throw ConfigError("grid max must be positive");
}

RunConfig run_preset(std::string_view name) {
  RunConfig c;
  c.preset = std::string(name);
  if (name == "example1") {
    c.generators = {generator(200, {{{0.4, {1.0, 0.4 * 0.4}}, {0.6, {2.0, 0.2 * 0.2}}}})};
    c.dp = {2.0, 1.0, 3.0, 4.0, 1.0, 1.0, 13.0, 39.0};
  } else if (name == "example2") {
    c.generators = {generator(200, single(5.0, 0.6))};
    c.dp = {2.0, 1.0, 3.0, 1000.0, 2.0, 25.0, 1000.0, 3000.0};
  } else if (name == "example3") {
    c.model = ModelKind::Ddp;
    c.generators = {generator(100, single(5.0, 0.6), Group::Control),
                    generator(100, {{{0.4, {5.0, 0.4 * 0.4}}, {0.6, {6.0, 0.2 * 0.2}}}}, Group::Treatment)};
    c.ddp.group = {GroupPrior{2.0, 50.0, 1000.0, 4000.0}, GroupPrior{2.0, 50.0, 1000.0, 4000.0}};
    c.ddp.mu_bar = {5.0, 5.5};
    c.ddp.Sigma0 = 10.0 * Eigen::Matrix2d::Identity();
    c.ddp.Sigma = 3.0 * Eigen::Matrix2d::Identity();
    c.ddp.a_alpha = 5.0;
    c.ddp.b_alpha = 1.0;
    c.contrast_times = {100.0, 200.0, 300.0, 400.0, 500.0};
  } else if (name == "liver") {
    c.dp = {5.0, 1.0, 3.0, 80.0, 2.0, 2.0, 100.0, 300.0};
  } else if (name == "lung") {
    c.model = ModelKind::Ddp;
    c.csv = {"A", "B"};
    c.ddp.group = {GroupPrior{2.0, 50.0, 2500.0, 10000.0}, GroupPrior{2.0, 50.0, 2500.0, 10000.0}};
    c.ddp.mu_bar = {6.7, 6.3};
    c.ddp.Sigma0 = 10.0 * Eigen::Matrix2d::Identity();
    c.ddp.Sigma = 3.0 * Eigen::Matrix2d::Identity();
    c.ddp.a_alpha = 5.0;
    c.ddp.b_alpha = 1.0;
    c.contrast_times = {100.0, 300.0, 500.0, 700.0, 1000.0, 1500.0};
  } else {
    throw ConfigError("unknown preset '" + std::string(name) +
                      "' (expected example1, example2, example3, liver or lung)");
  }
  return c;
}

PriorSimConfig prior_preset(std::string_view name) {
  PriorSimConfig c;
  c.preset = std::string(name);
  if (name == "fig1") {
    c.settings = {{1.0, 50, 0.5, 5.0}, {10.0, 50, 0.5, 5.0}, {100.0, 50, 0.5, 5.0}};
    c.grid.max = 25.0;
  } else if (name == "fig2") {
    c.settings = {{10.0, 10, 2.0, 5.0}, {10.0, 40, 0.5, 5.0}, {10.0, 10, 0.5, 5.0}};
    c.grid.max = 25.0;
  } else {
    throw ConfigError("unknown prior preset '" + std::string(name) + "' (expected fig1 or fig2)");
  }
  return c;
}

json to_json(const RunConfig& c) {
  json gens = json::array();
  for (const auto& g : c.generators) {
    json comps = json::array();
    for (const auto& m : g.mixture.components) {
      comps.push_back({{"weight", m.weight}, {"mu", m.law.mu}, {"sigma", std::sqrt(m.law.sigma2)}});
    }
    gens.push_back({{"group", g.group ? json(std::string(to_string(*g.group))) : json(nullptr)},
                    {"n", g.n},
                    {"censoring", g.censoring_target ? json(*g.censoring_target) : json(nullptr)},
                    {"components", comps}});
  }
  json data = {{"csv", c.data_csv ? json(c.data_csv->string()) : json(nullptr)},
               {"control_label", c.csv.control_label},
               {"treatment_label", c.csv.treatment_label},
               {"generators", gens}};
  json dp = {{"a_alpha", c.dp.a_alpha}, {"b_alpha", c.dp.b_alpha}, {"a_zeta", c.dp.a_zeta},
             {"b_zeta", c.dp.b_zeta},   {"a_theta", c.dp.a_theta}, {"b_theta", c.dp.b_theta},
             {"M1", c.dp.M1},           {"M2", c.dp.M2}};
  json ddp = {{"control", group_prior_json(c.ddp.group[0])},
              {"treatment", group_prior_json(c.ddp.group[1])},
              {"mu_bar", json::array({c.ddp.mu_bar(0), c.ddp.mu_bar(1)})},
              {"Sigma0", matrix_json(c.ddp.Sigma0)},
              {"Sigma", matrix_json(c.ddp.Sigma)},
              {"a_alpha", c.ddp.a_alpha},
              {"b_alpha", c.ddp.b_alpha}};
  return {{"preset", c.preset},
          {"model", c.model == ModelKind::Dp ? "dp" : "ddp"},
          {"data", data},
          {"dp", dp},
          {"ddp", ddp},
          {"schedule",
           {{"iterations", c.schedule.iterations},
            {"burn_in_fraction", c.schedule.burn_in_fraction},
            {"thin", c.schedule.thin}}},
          {"seed", c.seed},
          {"grid", grid_json(c.grid)},
          {"contrast_times", c.contrast_times},
          {"level", c.level},
          {"chains", c.chains},
          {"output", c.output.string()}};
}

json to_json(const PriorSimConfig& c) {
  json settings = json::array();
  for (const auto& s : c.settings) {
    settings.push_back({{"alpha", s.alpha}, {"M", s.M}, {"theta", s.theta}, {"zeta", s.zeta}});
  }
  return {{"preset", c.preset}, {"settings", settings}, {"count", c.count},
          {"seed", c.seed},     {"grid", grid_json(c.grid)}, {"output", c.output.string()}};
}

RunConfig run_config_from_json(const json& j, RunConfig c) {
  check_keys(j, "config", {"preset", "model", "data", "dp", "ddp", "schedule", "seed", "grid",
                           "contrast_times", "level", "chains", "output"});
  if (j.contains("preset") && !j["preset"].get<std::string>().empty()) {
    c = run_preset(j["preset"].get<std::string>());
  }
  if (j.contains("model")) {
    const auto m = j["model"].get<std::string>();
    if (m == "dp") {
      c.model = ModelKind::Dp;
    } else if (m == "ddp") {
      c.model = ModelKind::Ddp;
    } else {
      throw ConfigError("model must be \"dp\" or \"ddp\"");
    }
  }
  if (j.contains("data")) {
    const json& d = j["data"];
    check_keys(d, "data", {"csv", "control_label", "treatment_label", "generators"});
    if (d.contains("csv")) {
      c.data_csv = d["csv"].is_null() ? std::nullopt
                                      : std::optional<std::filesystem::path>(d["csv"].get<std::string>());
    }
    read(d, "control_label", c.csv.control_label);
    read(d, "treatment_label", c.csv.treatment_label);
    if (d.contains("generators")) {
      c.generators.clear();
      for (const json& g : d["generators"]) {
        check_keys(g, "generator", {"group", "n", "censoring", "components"});
        GeneratorSpec s;
        read(g, "n", s.n);
        if (g.contains("group") && !g["group"].is_null()) s.group = group_from_string(g["group"].get<std::string>());
        if (g.contains("censoring") && !g["censoring"].is_null()) s.censoring_target = g["censoring"].get<double>();
        for (const json& m : g.at("components")) {
          check_keys(m, "component", {"weight", "mu", "sigma"});
          const double sigma = m.at("sigma").get<double>();
          s.mixture.components.push_back({m.at("weight").get<double>(), {m.at("mu").get<double>(), sigma * sigma}});
        }
        c.generators.push_back(std::move(s));
      }
    }
  }
  if (j.contains("dp")) {
    const json& d = j["dp"];
    check_keys(d, "dp", {"a_alpha", "b_alpha", "a_zeta", "b_zeta", "a_theta", "b_theta", "M1", "M2"});
    read(d, "a_alpha", c.dp.a_alpha);
    read(d, "b_alpha", c.dp.b_alpha);
    read(d, "a_zeta", c.dp.a_zeta);
    read(d, "b_zeta", c.dp.b_zeta);
    read(d, "a_theta", c.dp.a_theta);
    read(d, "b_theta", c.dp.b_theta);
    read(d, "M1", c.dp.M1);
    read(d, "M2", c.dp.M2);
  }
  if (j.contains("ddp")) {
    const json& d = j["ddp"];
    check_keys(d, "ddp", {"control", "treatment", "mu_bar", "Sigma0", "Sigma", "a_alpha", "b_alpha"});
    if (d.contains("control")) read_group_prior(d["control"], c.ddp.group[0], "ddp.control");
    if (d.contains("treatment")) read_group_prior(d["treatment"], c.ddp.group[1], "ddp.treatment");
    if (d.contains("mu_bar")) {
      const auto v = d["mu_bar"].get<std::vector<double>>();
      if (v.size() != 2) throw ConfigError("mu_bar must have two entries");
      c.ddp.mu_bar = {v[0], v[1]};
    }
    if (d.contains("Sigma0")) c.ddp.Sigma0 = matrix_from_json(d["Sigma0"], "Sigma0");
    if (d.contains("Sigma")) c.ddp.Sigma = matrix_from_json(d["Sigma"], "Sigma");
    read(d, "a_alpha", c.ddp.a_alpha);
    read(d, "b_alpha", c.ddp.b_alpha);
  }
  if (j.contains("schedule")) {
    const json& s = j["schedule"];
    check_keys(s, "schedule", {"iterations", "burn_in_fraction", "thin"});
    read(s, "iterations", c.schedule.iterations);
    read(s, "burn_in_fraction", c.schedule.burn_in_fraction);
    read(s, "thin", c.schedule.thin);
  }
  read(j, "seed", c.seed);
  if (j.contains("grid")) read_grid(j["grid"], c.grid);
  read(j, "contrast_times", c.contrast_times);
  read(j, "level", c.level);
  read(j, "chains", c.chains);
  if (j.contains("output")) c.output = j["output"].get<std::string>();
  return c;
}

PriorSimConfig prior_config_from_json(const json& j, PriorSimConfig c) {
  check_keys(j, "config", {"preset", "settings", "count", "seed", "grid", "output"});
  if (j.contains("preset") && !j["preset"].get<std::string>().empty()) {
    c = prior_preset(j["preset"].get<std::string>());
  }
  if (j.contains("settings")) {
    c.settings.clear();
    for (const json& s : j["settings"]) {
      check_keys(s, "setting", {"alpha", "M", "theta", "zeta"});
      PriorSetting p;
      read(s, "alpha", p.alpha);
      read(s, "M", p.M);
      read(s, "theta", p.theta);
      read(s, "zeta", p.zeta);
      c.settings.push_back(p);
    }
  }
  read(j, "count", c.count);
  read(j, "seed", c.seed);
  if (j.contains("grid")) read_grid(j["grid"], c.grid);
  if (j.contains("output")) c.output = j["output"].get<std::string>();
  return c;
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
}

std::string config_hash(const json& j) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char ch : j.dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace erlangmix::cli
