#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "erlangmix/data_sim.hpp"
#include "erlangmix/ddp_sampler.hpp"
#include "erlangmix/dp_sampler.hpp"
#include "erlangmix/sampler_common.hpp"

namespace erlangmix::cli {

enum class ModelKind { Dp, Ddp };

struct GridSpec {
  std::optional<double> max;  ///< unset: 1.1 x 99.5th percentile of the data
  std::size_t points = 512;
};

/// Everything `simulate` and `fit` need. Serialized as JSON; lognormal
/// components are written (weight, mu, sigma) with sigma the log-scale
/// standard deviation.
struct RunConfig {
  std::string preset;
  ModelKind model = ModelKind::Dp;
  std::optional<std::filesystem::path> data_csv;
  CsvOptions csv;
  std::vector<GeneratorSpec> generators;  ///< one per group, concatenated in order
  DpHyperparams dp;
  DdpHyperparams ddp;
  ChainSchedule schedule;
  std::uint64_t seed = 1;
  GridSpec grid;
  std::vector<double> contrast_times;
  double level = 0.95;
  int chains = 1;
  std::filesystem::path output = "out";

  void validate() const;
};

struct PriorSetting {
  double alpha = 1.0;
  int M = 50;
  double theta = 0.5;
  double zeta = 5.0;
};

struct PriorSimConfig {
  std::string preset;
  std::vector<PriorSetting> settings;
  std::size_t count = 5;
  std::uint64_t seed = 1;
  GridSpec grid;
  std::filesystem::path output = "out";

  void validate() const;
};

/// Named run presets: example1, example2, example3, liver, lung.
RunConfig run_preset(std::string_view name);
/// Named prior-study presets: fig1, fig2.
PriorSimConfig prior_preset(std::string_view name);

nlohmann::json to_json(const RunConfig& c);
nlohmann::json to_json(const PriorSimConfig& c);

/// Overlays the keys present in j onto base. Unknown keys are configuration
/// errors.
RunConfig run_config_from_json(const nlohmann::json& j, RunConfig base = {});
PriorSimConfig prior_config_from_json(const nlohmann::json& j, PriorSimConfig base = {});

nlohmann::json read_json_file(const std::filesystem::path& path);

/// 64-bit FNV-1a of a canonical JSON dump, as 16 hex digits.
std::string config_hash(const nlohmann::json& j);

}  // namespace erlangmix::cli
