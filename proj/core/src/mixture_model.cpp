#include "erlangmix/mixture_model.hpp"

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

void require(bool ok, const char* what) {
  if (!ok) throw std::domain_error(what);
}

// log f and log S of the mixture over the components with positive weight.
MixtureFunctionals mixture_logs(double t, const WeightVector& w, bool want_density,
                                bool want_survival) {
  const auto M = static_cast<std::size_t>(w.M());
  std::vector<double> lpdf(want_density ? M : 0);
  std::vector<double> lsf(want_survival ? M : 0);
  erlang_log_table(t, w.theta(), lpdf, lsf);

  std::vector<double> dens_terms;
  std::vector<double> surv_terms;
  dens_terms.reserve(M);
  surv_terms.reserve(M);
  for (std::size_t m = 0; m < M; ++m) {
    const double om = w.omega()[m];
    if (om <= 0.0) continue;
    const double lw = std::log(om);
    if (want_density) dens_terms.push_back(lw + lpdf[m]);
    if (want_survival) surv_terms.push_back(lw + lsf[m]);
  }
  MixtureFunctionals out;
  out.log_density = want_density ? log_sum_exp(dens_terms) : 0.0;
  out.log_survival = want_survival ? log_sum_exp(surv_terms) : 0.0;
  return out;
}

void check_time(double t) { require(std::isfinite(t) && t > 0.0, "time must be positive and finite"); }

}  // namespace

std::string_view to_string(Group g) { return g == Group::Control ? "C" : "T"; }

SurvivalDataset::SurvivalDataset(std::vector<SurvivalRecord> records) : records_(std::move(records)) {
  if (records_.empty()) return;
  const bool grouped = records_.front().group.has_value();
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const auto& r = records_[i];
    if (!(std::isfinite(r.time) && r.time > 0.0)) {
      throw DataError("record " + std::to_string(i + 1) + ": time must be positive and finite");
    }
    if (r.group.has_value() != grouped) {
      throw DataError("record " + std::to_string(i + 1) +
                      ": group labels must be present on all records or none");
    }
  }
}

std::size_t SurvivalDataset::count(Group g) const {
  return static_cast<std::size_t>(std::count_if(records_.begin(), records_.end(),
                                                [g](const SurvivalRecord& r) { return r.group == g; }));
}

std::size_t SurvivalDataset::censored_count() const {
  return static_cast<std::size_t>(
      std::count_if(records_.begin(), records_.end(), [](const SurvivalRecord& r) { return !r.event; }));
}

double SurvivalDataset::mean_time() const {
  if (records_.empty()) return 0.0;
  double s = 0.0;
  for (const auto& r : records_) s += r.time;
  return s / static_cast<double>(records_.size());
}

SurvivalDataset SurvivalDataset::subset(Group g) const {
  std::vector<SurvivalRecord> out;
  for (const auto& r : records_) {
    if (r.group == g) out.push_back(r);
  }
  return SurvivalDataset(std::move(out));
}

SurvivalDataset SurvivalDataset::concat(const SurvivalDataset& a, const SurvivalDataset& b) {
  std::vector<SurvivalRecord> out = a.records_;
  out.insert(out.end(), b.records_.begin(), b.records_.end());
  return SurvivalDataset(std::move(out));
}

WeightVector::WeightVector(double theta, std::vector<double> omega)
    : theta_(theta), omega_(std::move(omega)) {
  require(std::isfinite(theta_) && theta_ > 0.0, "theta must be positive");
  require(!omega_.empty(), "weight vector needs at least one component");
  double total = 0.0;
  for (double w : omega_) {
    require(std::isfinite(w) && w >= 0.0, "weights must be non-negative");
    total += w;
  }
  require(std::abs(total - 1.0) <= 1e-9, "weights must sum to one");
}

double ExponentialCdf::operator()(double t) const {
  require(mean > 0.0, "exponential mean must be positive");
  return t <= 0.0 ? 0.0 : -std::expm1(-t / mean);
}

double EmpiricalMixtureCdf::operator()(double t) const {
  require(alpha >= 0.0 && zeta > 0.0, "invalid mixture CDF parameters");
  const double total = alpha + static_cast<double>(atoms.size());
  require(total > 0.0, "mixture CDF has no mass");
  const auto below = std::count_if(atoms.begin(), atoms.end(), [t](double a) { return a <= t; });
  return (alpha * ExponentialCdf{zeta}(t) + static_cast<double>(below)) / total;
}

double evaluate_cdf(const CdfHandle& g, double t) {
  return std::visit([t](const auto& cdf) { return cdf(t); }, g);
}

WeightVector weights_from_cdf(const CdfHandle& g, int M, double theta) {
  require(M >= 1, "M must be >= 1");
  require(std::isfinite(theta) && theta > 0.0, "theta must be positive");
  std::vector<double> omega(static_cast<std::size_t>(M));
  double prev = evaluate_cdf(g, 0.0);
  for (int m = 1; m < M; ++m) {
    const double cur = evaluate_cdf(g, m * theta);
    omega[static_cast<std::size_t>(m - 1)] = std::max(cur - prev, 0.0);
    prev = cur;
  }
  omega.back() = std::max(1.0 - prev, 0.0);
  return WeightVector(theta, std::move(omega));
}

double mixture_log_density(double t, const WeightVector& w) {
  check_time(t);
  return mixture_logs(t, w, true, false).log_density;
}

double mixture_log_survival(double t, const WeightVector& w) {
  check_time(t);
  return mixture_logs(t, w, false, true).log_survival;
}

HazardEvaluation mixture_hazard(double t, const WeightVector& w) {
  check_time(t);
  const auto M = static_cast<std::size_t>(w.M());
  std::vector<double> lpdf(M);
  std::vector<double> lsf(M);
  erlang_log_table(t, w.theta(), lpdf, lsf);

  std::vector<double> log_tw(M, kNegInf);
  for (std::size_t m = 0; m < M; ++m) {
    if (w.omega()[m] > 0.0) log_tw[m] = std::log(w.omega()[m]) + lsf[m];
  }
  const double log_s = log_sum_exp(log_tw);
  HazardEvaluation out;
  out.time_weights.resize(M);
  for (std::size_t m = 0; m < M; ++m) {
    const double tw = std::exp(log_tw[m] - log_s);
    out.time_weights[m] = tw;
    if (tw > 0.0) out.hazard += tw * std::exp(lpdf[m] - lsf[m]);
  }
  return out;
}

double MixtureFunctionals::hazard() const { return std::exp(log_density - log_survival); }

MixtureFunctionals evaluate_mixture(double t, const WeightVector& w) {
  require(std::isfinite(t) && t >= 0.0, "time must be non-negative and finite");
  if (t == 0.0) {
    const double w1 = w.omega().front();
    return {w1 > 0.0 ? std::log(w1 / w.theta()) : kNegInf, 0.0};
  }
  return mixture_logs(t, w, true, true);
}

double censored_log_likelihood(const SurvivalDataset& data, const WeightVector& w) {
  double total = 0.0;
  for (const auto& r : data.records()) {
    total += r.event ? mixture_log_density(r.time, w) : mixture_log_survival(r.time, w);
  }
  return total;
}

int component_of(double phi, int M, double theta) {
  require(phi > 0.0 && !std::isnan(phi), "latent value must be positive");
  require(M >= 1 && theta > 0.0, "invalid basis");
  const double r = phi / theta;
  if (r >= static_cast<double>(M)) return M;
  const double k = std::ceil(r * (1.0 - 1e-12));
  return std::clamp(static_cast<int>(k), 1, M);
}

double observation_log_kernel(double y, bool event, int m, double theta) {
  const ErlangParams p{m, theta};
  return event ? erlang_log_pdf(y, p) : erlang_log_sf(y, p);
}

double augmented_log_likelihood(const SurvivalDataset& data, std::span<const double> phi, int M,
                                double theta) {
  require(phi.size() == data.size(), "latent vector length must match the data");
  double total = 0.0;
  for (std::size_t i = 0; i < phi.size(); ++i) {
    const auto& r = data[i];
    total += observation_log_kernel(r.time, r.event, component_of(phi[i], M, theta), theta);
  }
  return total;
}

}  // namespace erlangmix
