#include "erlangmix/special_math.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include <boost/math/special_functions/erf.hpp>

namespace erlangmix {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kLogSqrt2Pi = 0.91893853320467274178;
// Relative size below which a further Poisson term cannot change the sum.
constexpr double kSeriesEps = 1e-17;

void require(bool ok, const char* what) {
  if (!ok) throw std::domain_error(what);
}

void check_time(double t) { require(std::isfinite(t) && t > 0.0, "time must be positive and finite"); }

// Log of the Poisson probability mass at k for rate x > 0.
double log_poisson(int k, double x, double log_x) {
  return -x + k * log_x - std::lgamma(static_cast<double>(k) + 1.0);
}

// Mills-ratio asymptotic for log Phi(z), z very negative.
double log_cdf_asymptotic(double z) {
  const double z2 = z * z;
  double term = 1.0;
  double sum = 1.0;
  for (int n = 1; n <= 6; ++n) {
    term *= -(2.0 * n - 1.0) / z2;
    sum += term;
  }
  return -0.5 * z2 - kLogSqrt2Pi - std::log(-z) + std::log(sum);
}

}  // namespace

void validate(const ErlangParams& p) {
  require(p.shape >= 1, "Erlang shape must be >= 1");
  require(std::isfinite(p.scale) && p.scale > 0.0, "Erlang scale must be positive");
}

void validate(const LogNormalParams& p) {
  require(std::isfinite(p.mu), "lognormal location must be finite");
  require(std::isfinite(p.sigma2) && p.sigma2 > 0.0, "lognormal variance must be positive");
}

void validate(const BivariateNormalParams& p) {
  require(p.mean.allFinite() && p.cov.allFinite(), "bivariate normal parameters must be finite");
  require(std::abs(p.cov(0, 1) - p.cov(1, 0)) <= 1e-12 * (std::abs(p.cov(0, 1)) + 1.0),
          "covariance must be symmetric");
  require(p.cov(0, 0) > 0.0 && p.cov(1, 1) > 0.0, "covariance diagonal must be positive");
  require(p.cov.determinant() > 0.0, "covariance must be positive definite");
}

double log_add_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  return a > b ? a + std::log1p(std::exp(b - a)) : b + std::log1p(std::exp(a - b));
}

double log_sum_exp(std::span<const double> values) {
  double hi = kNegInf;
  for (double v : values) hi = std::max(hi, v);
  if (hi == kNegInf) return kNegInf;
  if (hi == kInf) return kInf;
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - hi);
  return hi + std::log(sum);
}

double log1m_exp(double a) {
  require(a <= 0.0, "log1m_exp requires a <= 0");
  if (a == 0.0) return kNegInf;
  // Maechler's switch point keeps full precision on both sides.
  return a > -std::numbers::ln2 ? std::log(-std::expm1(a)) : std::log1p(-std::exp(a));
}

double log_diff_exp(double a, double b) {
  require(a >= b || std::isnan(b), "log_diff_exp requires a >= b");
  if (b == kNegInf) return a;
  return a + log1m_exp(b - a);
}

double erlang_log_pdf(double t, const ErlangParams& p) {
  check_time(t);
  validate(p);
  const double x = t / p.scale;
  if (p.shape == 1) return -x - std::log(p.scale);
  return (p.shape - 1) * std::log(x) - x - std::log(p.scale) -
         std::lgamma(static_cast<double>(p.shape));
}

double erlang_log_sf(double t, const ErlangParams& p) {
  check_time(t);
  validate(p);
  const double x = t / p.scale;
  const int m = p.shape;
  if (m == 1) return -x;
  if (x == 0.0) return 0.0;
  const double log_x = std::log(x);

  if (x >= m) {
    // Q = sum_{k<m} Pois(k); terms shrink going down from k = m-1.
    double ratio = 1.0;
    double sum = 1.0;
    for (int k = m - 1; k >= 1; --k) {
      ratio *= k / x;
      sum += ratio;
      if (ratio < kSeriesEps * sum) break;
    }
    return log_poisson(m - 1, x, log_x) + std::log(sum);
  }

  // P = sum_{k>=m} Pois(k); terms shrink going up from k = m.
  double ratio = 1.0;
  double sum = 1.0;
  for (int k = m;; ++k) {
    ratio *= x / (k + 1.0);
    sum += ratio;
    if (ratio < kSeriesEps * sum) break;
  }
  const double log_p = log_poisson(m, x, log_x) + std::log(sum);
  return log1m_exp(std::min(log_p, 0.0));
}

double erlang_hazard(double t, const ErlangParams& p) {
  validate(p);
  require(std::isfinite(t) && t >= 0.0, "time must be non-negative and finite");
  if (p.shape == 1) return 1.0 / p.scale;
  if (t == 0.0) return 0.0;
  return std::exp(erlang_log_pdf(t, p) - erlang_log_sf(t, p));
}

void erlang_log_table(double t, double theta, std::span<double> log_pdf,
                      std::span<double> log_sf) {
  require(std::isfinite(t) && t >= 0.0, "time must be non-negative and finite");
  require(std::isfinite(theta) && theta > 0.0, "Erlang scale must be positive");
  require(log_pdf.empty() || log_sf.empty() || log_pdf.size() == log_sf.size(),
          "table spans must have equal size");
  const std::size_t size = std::max(log_pdf.size(), log_sf.size());
  const double x = t / theta;
  const double log_x = std::log(x);
  const double log_theta = std::log(theta);

  double lp = -x - log_theta;  // shape 1
  double ls = -x;
  for (std::size_t idx = 0; idx < size; ++idx) {
    if (idx > 0) ls = log_add_exp(ls, lp + log_theta);
    if (!log_pdf.empty()) log_pdf[idx] = lp;
    if (!log_sf.empty()) log_sf[idx] = ls;
    lp += log_x - std::log(static_cast<double>(idx + 1));
  }
}

double std_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double std_normal_log_cdf(double z) {
  if (z == kInf) return 0.0;
  if (z == kNegInf) return kNegInf;
  if (z < -35.0) return log_cdf_asymptotic(z);
  if (z > 5.0) return std::log1p(-0.5 * std::erfc(z / std::numbers::sqrt2));
  return std::log(0.5 * std::erfc(-z / std::numbers::sqrt2));
}

double std_normal_log_sf(double z) { return std_normal_log_cdf(-z); }

double std_normal_log_interval(double a, double b) {
  require(!(a > b), "interval bounds out of order");
  if (a == b) return kNegInf;
  if (a >= 0.0) return log_diff_exp(std_normal_log_sf(a), std_normal_log_sf(b));
  if (b <= 0.0) return log_diff_exp(std_normal_log_cdf(b), std_normal_log_cdf(a));
  const double outside = std::exp(std_normal_log_cdf(a)) + std::exp(std_normal_log_sf(b));
  return std::log1p(-outside);
}

double std_normal_quantile(double p) {
  require(p >= 0.0 && p <= 1.0, "probability must lie in [0, 1]");
  if (p == 0.0) return kNegInf;
  if (p == 1.0) return kInf;
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

double std_normal_upper_quantile(double q) {
  require(q >= 0.0 && q <= 1.0, "probability must lie in [0, 1]");
  if (q == 0.0) return kInf;
  if (q == 1.0) return kNegInf;
  return std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * q);
}

double lognormal_log_pdf(double t, const LogNormalParams& p) {
  check_time(t);
  validate(p);
  const double lt = std::log(t);
  const double d = lt - p.mu;
  return -0.5 * d * d / p.sigma2 - 0.5 * std::log(p.sigma2) - kLogSqrt2Pi - lt;
}

double lognormal_cdf(double t, const LogNormalParams& p) {
  validate(p);
  if (t <= 0.0) return 0.0;
  if (t == kInf) return 1.0;
  return std_normal_cdf((std::log(t) - p.mu) / std::sqrt(p.sigma2));
}

double lognormal_log_interval_mass(double lo, double hi, const LogNormalParams& p) {
  validate(p);
  require(lo >= 0.0 && !(lo > hi), "invalid interval");
  const double sigma = std::sqrt(p.sigma2);
  const double a = lo > 0.0 ? (std::log(lo) - p.mu) / sigma : kNegInf;
  const double b = hi == kInf ? kInf : (std::log(hi) - p.mu) / sigma;
  return std_normal_log_interval(a, b);
}

namespace {

double clamp_into(double v, double lo, double hi) {
  if (!(v > lo)) v = std::nextafter(lo, kInf);
  if (v > hi) v = hi;
  return v;
}

void check_interval(double lo, double hi, double u) {
  require(std::isfinite(lo) && lo >= 0.0, "lower bound must be finite and non-negative");
  require(lo < hi, "truncation interval requires lo < hi");
  require(u >= 0.0 && u < 1.0, "uniform draw must lie in [0, 1)");
}

// Truncated standard normal on (a, b] by inverse CDF, a < b.
double truncated_std_normal(double a, double b, double u) {
  constexpr double kTiny = 1e-300;
  if (a >= 0.0) {
    const double sa = 0.5 * std::erfc(a / std::numbers::sqrt2);
    const double sb = b == kInf ? 0.0 : 0.5 * std::erfc(b / std::numbers::sqrt2);
    if (sa > kTiny) return std_normal_upper_quantile(sa - u * (sa - sb));
    // Far upper tail: density ~ exp(-a (z - a)).
    return a + (truncated_exp_sample(1.0 / a, 0.0, b - a, u));
  }
  if (b <= 0.0) {
    const double ca = a == kNegInf ? 0.0 : 0.5 * std::erfc(-a / std::numbers::sqrt2);
    const double cb = 0.5 * std::erfc(-b / std::numbers::sqrt2);
    if (cb > kTiny) return std_normal_quantile(ca + u * (cb - ca));
    const double nb = -b;
    return -(nb + truncated_exp_sample(1.0 / nb, 0.0, -a - nb, u));
  }
  const double ca = std_normal_cdf(a);
  const double cb = std_normal_cdf(b);
  return std_normal_quantile(ca + u * (cb - ca));
}

}  // namespace

double truncated_exp_sample(double zeta, double lo, double hi, double u) {
  require(std::isfinite(zeta) && zeta > 0.0, "exponential mean must be positive");
  check_interval(lo, hi, u);
  double v;
  if (hi == kInf) {
    v = lo - zeta * std::log1p(-u);
  } else {
    v = lo - zeta * std::log1p(u * std::expm1(-(hi - lo) / zeta));
  }
  return clamp_into(v, lo, hi);
}

double truncated_lognormal_sample(const LogNormalParams& p, double lo, double hi, double u) {
  validate(p);
  check_interval(lo, hi, u);
  const double sigma = std::sqrt(p.sigma2);
  const double a = lo > 0.0 ? (std::log(lo) - p.mu) / sigma : kNegInf;
  const double b = hi == kInf ? kInf : (std::log(hi) - p.mu) / sigma;
  double v;
  if (!(a < b)) {
    v = hi;  // interval narrower than double resolution on the log scale
  } else {
    v = std::exp(p.mu + sigma * truncated_std_normal(a, b, u));
  }
  return clamp_into(v, lo, hi);
}

LogNormalParams bln_conditional(const BivariateNormalParams& params, std::size_t given_index,
                                double given_value) {
  validate(params);
  require(given_index <= 1, "given_index must be 0 or 1");
  require(std::isfinite(given_value) && given_value > 0.0, "conditioning value must be positive");
  const std::size_t g = given_index;
  const std::size_t o = 1 - given_index;
  const double slope = params.cov(o, g) / params.cov(g, g);
  LogNormalParams out;
  out.mu = params.mean(o) + slope * (std::log(given_value) - params.mean(g));
  out.sigma2 = params.cov(o, o) - params.cov(o, g) * params.cov(g, o) / params.cov(g, g);
  return out;
}

double bln_log_pdf(const Eigen::Vector2d& point, const BivariateNormalParams& params) {
  validate(params);
  require(point(0) > 0.0 && point(1) > 0.0, "bivariate lognormal support is positive");
  const Eigen::Vector2d d = point.array().log().matrix() - params.mean;
  const double quad = d.dot(params.cov.inverse() * d);
  return -0.5 * quad - std::log(2.0 * std::numbers::pi) - 0.5 * std::log(params.cov.determinant()) -
         std::log(point(0)) - std::log(point(1));
}

double std_bvn_upper(double h, double k, double rho) {
  require(rho >= -1.0 && rho <= 1.0, "correlation must lie in [-1, 1]");
  auto phid = [](double z) { return std_normal_cdf(z); };
  if (h == kInf || k == kInf) return 0.0;
  if (h == kNegInf) return k == kNegInf ? 1.0 : phid(-k);
  if (k == kNegInf) return phid(-h);
  if (rho == 0.0) return phid(-h) * phid(-k);

  static constexpr std::array<double, 3> w6 = {0.1713244923791705, 0.3607615730481384,
                                               0.4679139345726904};
  static constexpr std::array<double, 3> x6 = {0.9324695142031522, 0.6612093864662647,
                                               0.2386191860831970};
  static constexpr std::array<double, 6> w12 = {0.04717533638651177, 0.1069393259953183,
                                                0.1600783285433464,  0.2031674267230659,
                                                0.2334925365383547,  0.2491470458134029};
  static constexpr std::array<double, 6> x12 = {0.9815606342467191, 0.9041172563704750,
                                                0.7699026741943050, 0.5873179542866171,
                                                0.3678314989981802, 0.1252334085114692};
  static constexpr std::array<double, 10> w20 = {
      0.01761400713915212, 0.04060142980038694, 0.06267204833410906, 0.08327674157670475,
      0.1019301198172404,  0.1181945319615184,  0.1316886384491766,  0.1420961093183821,
      0.1491729864726037,  0.1527533871307259};
  static constexpr std::array<double, 10> x20 = {
      0.9931285991850949, 0.9639719272779138, 0.9122344282513259, 0.8391169718222188,
      0.7463319064601508, 0.6360536807265150, 0.5108670019508271, 0.3737060887154196,
      0.2277858511416451, 0.07652652113349733};

  std::span<const double> w;
  std::span<const double> xh;
  const double ar = std::abs(rho);
  if (ar < 0.3) {
    w = w6;
    xh = x6;
  } else if (ar < 0.75) {
    w = w12;
    xh = x12;
  } else {
    w = w20;
    xh = x20;
  }
  // Nodes come in pairs 1 - x and 1 + x on [0, 2].
  const double tp = 2.0 * std::numbers::pi;
  double hk = h * k;
  double bvn = 0.0;

  if (ar < 0.925) {
    const double hs = (h * h + k * k) / 2.0;
    const double asr = std::asin(rho) / 2.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      for (double node : {1.0 - xh[i], 1.0 + xh[i]}) {
        const double sn = std::sin(asr * node);
        bvn += w[i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
      }
    }
    return std::clamp(bvn * asr / tp + phid(-h) * phid(-k), 0.0, 1.0);
  }

  if (rho < 0.0) {
    k = -k;
    hk = -hk;
  }
  if (ar < 1.0) {
    const double as = 1.0 - rho * rho;
    double a = std::sqrt(as);
    const double bs = (h - k) * (h - k);
    const double c = (4.0 - hk) / 8.0;
    const double d = (12.0 - hk) / 80.0;
    double asr = -(bs / as + hk) / 2.0;
    if (asr > -100.0) bvn = a * std::exp(asr) * (1.0 - c * (bs - as) * (1.0 - d * bs) / 3.0 + c * d * as * as);
    if (hk > -100.0) {
      const double b = std::sqrt(bs);
      const double sp = std::sqrt(tp) * phid(-b / a);
      bvn -= std::exp(-hk / 2.0) * sp * b * (1.0 - c * bs * (1.0 - d * bs) / 3.0);
    }
    a /= 2.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      for (double node : {1.0 - xh[i], 1.0 + xh[i]}) {
        const double xs = (a * node) * (a * node);
        asr = -(bs / xs + hk) / 2.0;
        if (asr <= -100.0) continue;
        const double sp = 1.0 + c * xs * (1.0 + 5.0 * d * xs);
        const double rs = std::sqrt(1.0 - xs);
        const double ep = std::exp(-(hk / 2.0) * xs / ((1.0 + rs) * (1.0 + rs))) / rs;
        acc += w[i] * std::exp(asr) * (sp - ep);
      }
    }
    bvn = (a * acc - bvn) / tp;
  }
  if (rho > 0.0) {
    bvn += phid(-std::max(h, k));
  } else if (h >= k) {
    bvn = -bvn;
  } else {
    const double l = h < 0.0 ? phid(k) - phid(h) : phid(-h) - phid(-k);
    bvn = l - bvn;
  }
  return std::clamp(bvn, 0.0, 1.0);
}

double bln_rectangle_mass(const Eigen::Vector2d& lo, const Eigen::Vector2d& hi,
                          const BivariateNormalParams& params) {
  validate(params);
  std::array<double, 2> za{};
  std::array<double, 2> zb{};
  for (int c = 0; c < 2; ++c) {
    require(lo(c) >= 0.0 && !(lo(c) > hi(c)), "invalid rectangle");
    const double sd = std::sqrt(params.cov(c, c));
    za[c] = lo(c) > 0.0 ? (std::log(lo(c)) - params.mean(c)) / sd : kNegInf;
    zb[c] = hi(c) == kInf ? kInf : (std::log(hi(c)) - params.mean(c)) / sd;
  }
  const double rho = params.cov(0, 1) / std::sqrt(params.cov(0, 0) * params.cov(1, 1));
  const double mass = std_bvn_upper(za[0], za[1], rho) - std_bvn_upper(zb[0], za[1], rho) -
                      std_bvn_upper(za[0], zb[1], rho) + std_bvn_upper(zb[0], zb[1], rho);
  return std::max(mass, 0.0);
}

}  // namespace erlangmix
