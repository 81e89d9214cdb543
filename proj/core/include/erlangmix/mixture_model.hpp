#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

namespace erlangmix {

/// Two-arm study label. Index values double as coordinates of the bivariate
/// latent atoms (0 = control, 1 = treatment).
enum class Group : std::uint8_t { Control = 0, Treatment = 1 };

constexpr std::size_t index_of(Group g) { return static_cast<std::size_t>(g); }
std::string_view to_string(Group g);

struct SurvivalRecord {
  double time = 0.0;  ///< y = min(event time, censoring time)
  bool event = true;  ///< nu: true when the event time was observed
  std::optional<Group> group;
};

/// Right-censored survival sample. Validated on construction: positive finite
/// times, and either every record carries a group label or none does.
class SurvivalDataset {
 public:
  SurvivalDataset() = default;
  explicit SurvivalDataset(std::vector<SurvivalRecord> records);

  const std::vector<SurvivalRecord>& records() const { return records_; }
  const SurvivalRecord& operator[](std::size_t i) const { return records_[i]; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  bool has_groups() const { return !records_.empty() && records_.front().group.has_value(); }

  std::size_t count(Group g) const;
  std::size_t censored_count() const;
  double mean_time() const;

  /// Records of one arm, in original order.
  SurvivalDataset subset(Group g) const;
  static SurvivalDataset concat(const SurvivalDataset& a, const SurvivalDataset& b);

  friend bool operator==(const SurvivalDataset&, const SurvivalDataset&) = default;

 private:
  std::vector<SurvivalRecord> records_;
};

inline bool operator==(const SurvivalRecord& a, const SurvivalRecord& b) {
  return a.time == b.time && a.event == b.event && a.group == b.group;
}

/// Mixture weights over the Erlang basis Ga(m, theta), m = 1..M.
class WeightVector {
 public:
  WeightVector(double theta, std::vector<double> omega);

  int M() const { return static_cast<int>(omega_.size()); }
  double theta() const { return theta_; }
  const std::vector<double>& omega() const { return omega_; }
  double operator[](int m) const { return omega_[static_cast<std::size_t>(m - 1)]; }

 private:
  double theta_;
  std::vector<double> omega_;
};

/// Exp(mean) distribution function.
struct ExponentialCdf {
  double mean = 1.0;
  double operator()(double t) const;
};

/// (alpha * Exp(zeta) + sum of point masses at atoms) / (alpha + #atoms): the
/// centering measure of the conditional DP posterior.
struct EmpiricalMixtureCdf {
  double alpha = 1.0;
  double zeta = 1.0;
  std::vector<double> atoms;
  double operator()(double t) const;
};

using CdfHandle = std::variant<ExponentialCdf, EmpiricalMixtureCdf>;

double evaluate_cdf(const CdfHandle& g, double t);

/// omega_m = G(m theta) - G((m-1) theta), last bin absorbing the tail.
WeightVector weights_from_cdf(const CdfHandle& g, int M, double theta);

double mixture_log_density(double t, const WeightVector& w);
double mixture_log_survival(double t, const WeightVector& w);

struct HazardEvaluation {
  double hazard = 0.0;
  std::vector<double> time_weights;  ///< omega*_m(t), summing to one
};

HazardEvaluation mixture_hazard(double t, const WeightVector& w);

/// log f, log S and the hazard from a single pass over the basis. t may be
/// zero, where the continuous extensions f(0) = h(0) = omega_1 / theta and
/// S(0) = 1 are returned.
struct MixtureFunctionals {
  double log_density = 0.0;
  double log_survival = 0.0;
  double hazard() const;
};

MixtureFunctionals evaluate_mixture(double t, const WeightVector& w);

double censored_log_likelihood(const SurvivalDataset& data, const WeightVector& w);

/// Basis index m in 1..M whose bin ((m-1) theta, m theta] holds phi; the last
/// bin is ((M-1) theta, infinity). Values within a relative 1e-12 above a bin
/// edge resolve to the lower bin.
int component_of(double phi, int M, double theta);

/// nu log Ga(y | m, theta) + (1 - nu) log S_Ga(y | m, theta).
double observation_log_kernel(double y, bool event, int m, double theta);

/// Likelihood of the latent-variable model: observation i contributes through
/// the basis element selected by component_of(phi_i).
double augmented_log_likelihood(const SurvivalDataset& data, std::span<const double> phi, int M,
                                double theta);

}  // namespace erlangmix
