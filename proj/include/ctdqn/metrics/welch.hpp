#pragma once

#include <cmath>
#include <span>
#include <stdexcept>

// Welch's unequal-variances t-test with the two-sided p-value evaluated
// through the regularized incomplete beta function (continued fraction,
// modified Lentz), absolute tolerance 1e-12.

namespace ctdqn::metrics {

struct WelchResult {
  double t = 0.0;
  double nu = 0.0;  // Welch-Satterthwaite degrees of freedom
  double p = 1.0;   // two-sided
  bool significant = false;  // p < 0.05
};

namespace detail {

inline double incomplete_beta_cf(double x, double a, double b) {
  // Continued fraction for I_x(a,b), modified Lentz.
  constexpr double tiny = 1e-300;
  constexpr double tol = 1e-14;
  constexpr int max_iter = 500;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= max_iter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < tol) break;
  }
  return h;
}

}  // namespace detail

inline double regularized_incomplete_beta(double x, double a, double b) {
  if (!(x >= 0.0 && x <= 1.0) || a <= 0.0 || b <= 0.0)
    throw std::invalid_argument("regularized_incomplete_beta: bad arguments");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                          a * std::log(x) + b * std::log1p(-x);
  if (x < (a + 1.0) / (a + b + 2.0))
    return std::exp(ln_front) * detail::incomplete_beta_cf(x, a, b) / a;
  return 1.0 - std::exp(ln_front) * detail::incomplete_beta_cf(1.0 - x, b, a) / b;
}

// Two-sided tail probability of Student's t with nu degrees of freedom:
// P(|T| >= |t|) = I_{nu/(nu + t^2)}(nu/2, 1/2).
inline double student_t_two_sided_p(double t, double nu) {
  if (nu <= 0.0) throw std::invalid_argument("student_t_two_sided_p: nu <= 0");
  const double x = nu / (nu + t * t);
  return regularized_incomplete_beta(x, 0.5 * nu, 0.5);
}

inline WelchResult welch_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2)
    throw std::invalid_argument("welch_t_test: each sample needs >= 2 elements");
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  double mean_a = 0.0, mean_b = 0.0;
  for (double v : a) mean_a += v;
  for (double v : b) mean_b += v;
  mean_a /= na;
  mean_b /= nb;
  double var_a = 0.0, var_b = 0.0;
  for (double v : a) var_a += (v - mean_a) * (v - mean_a);
  for (double v : b) var_b += (v - mean_b) * (v - mean_b);
  var_a /= na - 1.0;
  var_b /= nb - 1.0;
  if (var_a == 0.0 && var_b == 0.0)
    throw std::invalid_argument("welch_t_test: both samples have zero variance");

  const double sa = var_a / na;
  const double sb = var_b / nb;
  WelchResult r;
  r.t = (mean_a - mean_b) / std::sqrt(sa + sb);
  r.nu = (sa + sb) * (sa + sb) /
         (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
  r.p = student_t_two_sided_p(r.t, r.nu);
  r.significant = r.p < 0.05;
  return r;
}

}  // namespace ctdqn::metrics
