#include <cmath>
#include <cstddef>
#include <limits>

#include "latdiff/core/error.hpp"
#include "latdiff/evalkit/significance.hpp"

namespace latdiff {

namespace {

// Continued fraction for the regularized incomplete beta, modified Lentz.
// Converges fast for x < (a+1)/(a+b+2); the symmetry below maps the rest.
double betacf(double a, double b, double x) {
  constexpr double tiny = 1e-300;
  constexpr double eps = 1e-15;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 300; ++m) {
    const double m2 = 2.0 * m;
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
    if (std::fabs(del - 1.0) < eps) break;
  }
  return h;
}

double reg_inc_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) -
                          std::lgamma(b) + a * std::log(x) +
                          b * std::log1p(-x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
  return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

}  // namespace

double student_t_cdf(double t, double nu) {
  if (nu <= 0.0) fail(ErrorKind::InvalidArch, "student_t_cdf: nu must be > 0");
  if (t == 0.0) return 0.5;
  const double x = nu / (nu + t * t);
  const double half_tail = 0.5 * reg_inc_beta(0.5 * nu, 0.5, x);
  return t > 0.0 ? 1.0 - half_tail : half_tail;
}

double significance(const std::vector<double>& scores_a,
                    const std::vector<double>& scores_b) {
  if (scores_a.size() < 2 || scores_b.size() < 2)
    fail(ErrorKind::TooFewSamples,
         "significance: each sample needs at least 2 scores");
  const auto mean = [](const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  const auto var = [&](const std::vector<double>& v, double m) {
    double s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
  };
  const double ma = mean(scores_a), mb = mean(scores_b);
  const double va = var(scores_a, ma), vb = var(scores_b, mb);
  const double na = static_cast<double>(scores_a.size());
  const double nb = static_cast<double>(scores_b.size());
  const double sa = va / na, sb = vb / nb;
  if (sa + sb == 0.0) {
    if (ma == mb) return 0.5;
    return ma > mb ? 0.0 : 1.0;
  }
  const double t = (ma - mb) / std::sqrt(sa + sb);
  const double nu = (sa + sb) * (sa + sb) /
                    (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
  return 1.0 - student_t_cdf(t, nu);
}

}  // namespace latdiff
