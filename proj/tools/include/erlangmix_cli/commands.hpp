#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "erlangmix_cli/config.hpp"

namespace erlangmix::cli {

/// Writes data.csv, truth.csv and manifest.json into config.output.
void cmd_simulate(const RunConfig& config);

/// Runs config.chains chains and writes trace.csv, weights.csv, summary.csv
/// (plus summary_chain<k>.csv when pooling), contrast tables for ddp fits,
/// diagnostics.json and manifest.json.
void cmd_fit(const RunConfig& config);

/// Writes prior_weights.csv, prior_density.csv, prior_l1.csv, manifest.json.
void cmd_prior_sim(const PriorSimConfig& config);

struct SummarizeOptions {
  std::filesystem::path input;
  std::filesystem::path output;
  GridSpec grid;
  double level = 0.95;
};

/// Re-summarizes the weights.csv of a finished fit on a new grid.
void cmd_summarize(const SummarizeOptions& options);

/// Seeds derived from a run seed: the data stream first, then one chain
/// stream per chain, then one post-processing stream per chain.
struct SeedStreams {
  std::uint64_t data = 0;
  std::vector<std::uint64_t> chain;
  std::vector<std::uint64_t> post;
};

SeedStreams seed_streams(std::uint64_t seed, int chains);

/// Loads the data of a run: the CSV file if given, else the generators seeded
/// from config.seed (the same stream `simulate` uses).
SurvivalDataset load_run_data(const RunConfig& config);

}  // namespace erlangmix::cli
