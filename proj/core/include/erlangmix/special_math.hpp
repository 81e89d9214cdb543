#pragma once

#include <cstddef>
#include <span>

#include <Eigen/Core>
#include <Eigen/LU>

namespace erlangmix {

/// Gamma distribution with integer shape (the Erlang kernel). Mean is
/// shape * scale and variance shape * scale^2.
struct ErlangParams {
  int shape = 1;
  double scale = 1.0;
};

/// Law of T where log T ~ Normal(mu, sigma2).
struct LogNormalParams {
  double mu = 0.0;
  double sigma2 = 1.0;
};

/// Normal law on the log scale of a positive 2-vector (the bivariate
/// lognormal LN2(mean, cov)).
struct BivariateNormalParams {
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  Eigen::Matrix2d cov = Eigen::Matrix2d::Identity();
};

void validate(const ErlangParams& p);
void validate(const LogNormalParams& p);
void validate(const BivariateNormalParams& p);

// Log-space arithmetic. -infinity stands for log(0) throughout.
double log_add_exp(double a, double b);
double log_sum_exp(std::span<const double> values);
/// log(1 - exp(a)) for a <= 0.
double log1m_exp(double a);
/// log(exp(a) - exp(b)) for a >= b.
double log_diff_exp(double a, double b);

double erlang_log_pdf(double t, const ErlangParams& p);

/// log Q(m, t/theta), the upper regularized incomplete gamma function, via
/// Poisson partial sums evaluated in log space.
double erlang_log_sf(double t, const ErlangParams& p);

/// Erlang hazard. At t == 0 returns the continuous extension (1/theta for
/// shape 1, zero otherwise).
double erlang_hazard(double t, const ErlangParams& p);

/// Fills log_pdf[m-1] and log_sf[m-1] for shapes m = 1..size at time t using
/// the Poisson recurrence S(m+1) = S(m) + Pois(m; t/theta). Either span may be
/// empty to skip that quantity; when both are non-empty they must have equal
/// size.
void erlang_log_table(double t, double theta, std::span<double> log_pdf,
                      std::span<double> log_sf);

double std_normal_cdf(double z);
double std_normal_log_cdf(double z);
double std_normal_log_sf(double z);
/// log(Phi(b) - Phi(a)) for a <= b, accurate in both tails.
double std_normal_log_interval(double a, double b);
double std_normal_quantile(double p);
/// Inverse of the upper tail: returns z with 1 - Phi(z) = q.
double std_normal_upper_quantile(double q);

double lognormal_log_pdf(double t, const LogNormalParams& p);
double lognormal_cdf(double t, const LogNormalParams& p);
/// log P(lo < T <= hi); lo may be 0 and hi may be +infinity.
double lognormal_log_interval_mass(double lo, double hi, const LogNormalParams& p);

/// Inverse-CDF draw from Exp(mean zeta) restricted to (lo, hi]. hi may be
/// +infinity. The result always lies in (lo, hi].
double truncated_exp_sample(double zeta, double lo, double hi, double u);

/// Inverse-CDF draw from the lognormal restricted to (lo, hi]. Deep-tail
/// intervals whose normal mass underflows fall back to the exponential tail
/// approximation of the truncated normal.
double truncated_lognormal_sample(const LogNormalParams& p, double lo, double hi,
                                  double u);

/// Conditional lognormal law of coordinate (1 - given_index) given that
/// coordinate given_index equals given_value. Conditioning is on the log of
/// the given value.
LogNormalParams bln_conditional(const BivariateNormalParams& params,
                                std::size_t given_index, double given_value);

double bln_log_pdf(const Eigen::Vector2d& point, const BivariateNormalParams& params);

/// P(X > h, Y > k) for a standard bivariate normal with correlation rho
/// (Genz's BVNU algorithm).
double std_bvn_upper(double h, double k, double rho);

/// P(lo < X <= hi) for a bivariate lognormal over an axis-aligned rectangle.
/// Bounds may be 0 and +infinity.
double bln_rectangle_mass(const Eigen::Vector2d& lo, const Eigen::Vector2d& hi,
                          const BivariateNormalParams& params);

}  // namespace erlangmix
