#include "erlangmix/data_sim.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string_view>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "erlangmix/errors.hpp"

namespace erlangmix {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kMinCensoring = 1e-4;

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? comma : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

[[noreturn]] void fail(std::size_t line, const std::string& what) {
  throw DataError("line " + std::to_string(line) + ": " + what);
}

double component_sf(double t, const LogNormalParams& p) {
  return std::exp(std_normal_log_sf((std::log(t) - p.mu) / std::sqrt(p.sigma2)));
}

}  // namespace

void LogNormalMixture::validate() const {
  if (components.empty()) throw ConfigError("mixture needs at least one component");
  double total = 0.0;
  for (const auto& c : components) {
    if (!(c.weight > 0.0) || !std::isfinite(c.weight)) throw ConfigError("mixture weights must be positive");
    if (!std::isfinite(c.law.mu) || !(c.law.sigma2 > 0.0) || !std::isfinite(c.law.sigma2)) {
      throw ConfigError("lognormal components need finite mu and positive sigma2");
    }
    total += c.weight;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("mixture weights must sum to one");
}

double LogNormalMixture::pdf(double t) const {
  if (!(t > 0.0)) return 0.0;
  double s = 0.0;
  for (const auto& c : components) s += c.weight * std::exp(lognormal_log_pdf(t, c.law));
  return s;
}

double LogNormalMixture::cdf(double t) const { return 1.0 - survival(t); }

double LogNormalMixture::survival(double t) const {
  if (!(t > 0.0)) return 1.0;
  double s = 0.0;
  for (const auto& c : components) s += c.weight * component_sf(t, c.law);
  return s;
}

double LogNormalMixture::hazard(double t) const {
  const double s = survival(t);
  return s > 0.0 ? pdf(t) / s : std::numeric_limits<double>::quiet_NaN();
}

double LogNormalMixture::mean() const {
  double m = 0.0;
  for (const auto& c : components) m += c.weight * std::exp(c.law.mu + 0.5 * c.law.sigma2);
  return m;
}

void GeneratorSpec::validate() const {
  mixture.validate();
  if (n < 1) throw ConfigError("sample size must be at least 1");
  if (censoring_target && !(*censoring_target >= 0.0 && *censoring_target < 1.0)) {
    throw ConfigError("censoring target must lie in [0, 1)");
  }
}

double censoring_probability(const LogNormalMixture& mixture, double kappa) {
  mixture.validate();
  if (!(kappa > 0.0)) throw std::domain_error("kappa must be positive");
  // P(c < t) = 1 - E[exp(-t / kappa)], integrated on the normal scale.
  double laplace = 0.0;
  for (const auto& c : mixture.components) {
    const double sigma = std::sqrt(c.law.sigma2);
    auto integrand = [&](double z) {
      const double phi = std::exp(-0.5 * z * z) * std::numbers::inv_sqrtpi / std::numbers::sqrt2;
      return phi * std::exp(-std::exp(c.law.mu + sigma * z) / kappa);
    };
    laplace += c.weight *
               boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, -12.0, 12.0, 15, 1e-13);
  }
  return std::clamp(1.0 - laplace, 0.0, 1.0);
}

KappaCalibration calibrate_kappa(const LogNormalMixture& mixture, double target) {
  mixture.validate();
  if (!(target > 0.0 && target < 1.0)) throw ConfigError("censoring target must lie in (0, 1)");
  if (target < kMinCensoring || censoring_probability(mixture, kKappaCap) > target) {
    return {kKappaCap, true};
  }
  // P(c < t) decreases in kappa; bracket on the log scale.
  double lo = std::log(mixture.mean()) - 40.0;
  double hi = std::log(kKappaCap);
  for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double p = censoring_probability(mixture, std::exp(mid));
    if (std::abs(p - target) < 1e-9) {
      lo = hi = mid;
      break;
    }
    (p > target ? lo : hi) = mid;
  }
  return {std::exp(0.5 * (lo + hi)), false};
}

KappaCalibration calibrate_kappa(const GeneratorSpec& spec) {
  if (!spec.censoring_target) throw ConfigError("generator has no censoring target");
  return calibrate_kappa(spec.mixture, *spec.censoring_target);
}

GeneratedSample generate_instrumented(const GeneratorSpec& spec, Rng& rng) {
  spec.validate();
  std::vector<double> weights;
  for (const auto& c : spec.mixture.components) weights.push_back(c.weight);

  GeneratedSample out;
  const bool censor = spec.censoring_target && *spec.censoring_target > 0.0;
  if (censor) out.kappa = calibrate_kappa(spec).kappa;

  std::vector<SurvivalRecord> records;
  records.reserve(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    const auto& law = spec.mixture.components[rng.categorical(weights)].law;
    const double t = std::exp(law.mu + std::sqrt(law.sigma2) * rng.normal());
    const double c = censor ? rng.exponential(*out.kappa) : kInf;
    out.event_times.push_back(t);
    out.censoring_times.push_back(c);
    const bool event = t <= c;
    records.push_back({event ? t : c, event, spec.group});
  }
  out.data = SurvivalDataset(std::move(records));
  return out;
}

SurvivalDataset generate(const GeneratorSpec& spec, Rng& rng) {
  return generate_instrumented(spec, rng).data;
}

SurvivalDataset parse_csv(std::istream& in, const CsvOptions& options) {
  std::string line;
  std::size_t line_no = 0;
  std::size_t columns = 0;
  while (columns == 0 && std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto header = split_fields(line);
    const bool ok = (header.size() == 2 || header.size() == 3) && header[0] == "time" &&
                    header[1] == "status" && (header.size() == 2 || header[2] == "group");
    if (!ok) fail(line_no, "expected header time,status[,group]");
    columns = header.size();
  }
  if (columns == 0) throw DataError("file is empty: expected header time,status[,group]");

  std::vector<SurvivalRecord> records;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != columns) {
      fail(line_no, "expected " + std::to_string(columns) + " fields, found " + std::to_string(fields.size()));
    }
    SurvivalRecord r;
    const auto tf = fields[0];
    const auto [ptr, ec] = std::from_chars(tf.data(), tf.data() + tf.size(), r.time);
    if (tf.empty() || ec != std::errc() || ptr != tf.data() + tf.size()) {
      fail(line_no, "time '" + std::string(tf) + "' is not a number");
    }
    if (!(std::isfinite(r.time) && r.time > 0.0)) fail(line_no, "time must be positive and finite");
    if (fields[1] == "1") {
      r.event = true;
    } else if (fields[1] == "0") {
      r.event = false;
    } else {
      fail(line_no, "status must be 0 or 1, found '" + std::string(fields[1]) + "'");
    }
    if (columns == 3) {
      if (fields[2] == options.control_label) {
        r.group = Group::Control;
      } else if (fields[2] == options.treatment_label) {
        r.group = Group::Treatment;
      } else {
        fail(line_no, "unknown group '" + std::string(fields[2]) + "'");
      }
    }
    records.push_back(r);
  }
  if (records.empty()) throw DataError("file has a header but no records");
  return SurvivalDataset(std::move(records));
}

SurvivalDataset load_csv(const std::filesystem::path& path, const CsvOptions& options) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return parse_csv(in, options);
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_csv(std::ostream& out, const SurvivalDataset& data, const CsvOptions& options) {
  const bool grouped = data.has_groups();
  out << (grouped ? "time,status,group\n" : "time,status\n");
  for (const auto& r : data.records()) {
    out << format_double(r.time) << ',' << (r.event ? '1' : '0');
    if (grouped) {
      out << ',' << (*r.group == Group::Control ? options.control_label : options.treatment_label);
    }
    out << '\n';
  }
}

void write_csv(const std::filesystem::path& path, const SurvivalDataset& data,
               const CsvOptions& options) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  write_csv(out, data, options);
}

}  // namespace erlangmix
