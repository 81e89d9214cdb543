#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "erlangmix/mixture_model.hpp"
#include "erlangmix/rng.hpp"
#include "erlangmix/special_math.hpp"

namespace erlangmix {

struct MixtureComponent {
  double weight = 1.0;
  LogNormalParams law;
};

/// Finite mixture of lognormals: the data-generating truths of the synthetic
/// scenarios.
struct LogNormalMixture {
  std::vector<MixtureComponent> components;

  void validate() const;
  double pdf(double t) const;
  double cdf(double t) const;
  double survival(double t) const;
  double hazard(double t) const;
  double mean() const;
};

struct GeneratorSpec {
  LogNormalMixture mixture;
  std::size_t n = 200;
  std::optional<Group> group;
  /// Target fraction of censored records; unset or 0 means no censoring.
  std::optional<double> censoring_target;

  void validate() const;
};

/// Dataset plus the latent event and censoring times it was built from.
struct GeneratedSample {
  SurvivalDataset data;
  std::vector<double> event_times;
  std::vector<double> censoring_times;  ///< +infinity when uncensored
  std::optional<double> kappa;
};

GeneratedSample generate_instrumented(const GeneratorSpec& spec, Rng& rng);
SurvivalDataset generate(const GeneratorSpec& spec, Rng& rng);

/// P(c < t) for t from the mixture and independent c ~ Exp(mean kappa).
double censoring_probability(const LogNormalMixture& mixture, double kappa);

struct KappaCalibration {
  double kappa = 0.0;
  bool capped = false;  ///< target too small to reach below the cap
};

inline constexpr double kKappaCap = 1e9;

/// Bisection on log kappa until censoring_probability hits target.
KappaCalibration calibrate_kappa(const LogNormalMixture& mixture, double target);
KappaCalibration calibrate_kappa(const GeneratorSpec& spec);

/// Group labels as they appear in CSV files.
struct CsvOptions {
  std::string control_label = "C";
  std::string treatment_label = "T";
};

/// Parses `time,status[,group]` with a header row; status 1 = event,
/// 0 = censored. Errors are DataError messages naming the offending line.
SurvivalDataset parse_csv(std::istream& in, const CsvOptions& options = {});
SurvivalDataset load_csv(const std::filesystem::path& path, const CsvOptions& options = {});

/// Writes times at shortest round-trip precision.
void write_csv(std::ostream& out, const SurvivalDataset& data, const CsvOptions& options = {});
void write_csv(const std::filesystem::path& path, const SurvivalDataset& data,
               const CsvOptions& options = {});

/// Shortest decimal text that parses back to exactly v.
std::string format_double(double v);

}  // namespace erlangmix
