#include "pllvi/special.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "pllvi/tensor.hpp"

namespace pllvi::special {
namespace {

constexpr double kLanczosG = 7.0;
constexpr std::array<double, 9> kLanczos = {
    0.99999999999980993,  676.5203681218851,     -1259.1392167224028,
    771.32342877765313,   -176.61502916214059,   12.507343278686905,
    -0.13857109526572012, 9.9843695780195716e-6, 1.5056327351493116e-7};

constexpr double kEps = 1e-16;
constexpr double kTiny = 1e-300;
constexpr int kMaxIter = 200000;

void require_positive(const char* op, double x) {
  if (!(x > 0.0) || !std::isfinite(x)) throw DomainError(op, "argument must be positive and finite, got " + std::to_string(x));
}

// Series for P(a, x); converges for every x but is only fast for x < a + 1.
double p_series(double a, double x) {
  if (x == 0.0) return 0.0;
  double ap = a;
  double del = 1.0 / a;
  double sum = del;
  for (int n = 0; n < kMaxIter; ++n) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::fabs(del) < std::fabs(sum) * kEps) break;
  }
  return sum * std::exp(-x + a * std::log(x) - lgamma(a));
}

// Modified Lentz continued fraction for Q(a, x); used for x > a + 1.
double q_continued_fraction(double a, double x) {
  double b = x + 1.0 - a;
  double c = 1.0 / kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kMaxIter; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return std::exp(-x + a * std::log(x) - lgamma(a)) * h;
}

double beta_continued_fraction(double a, double b, double x) {
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m < kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return h;
}

// Hurwitz zeta sum_{k>=0} (a + k)^-s for s > 1, a > 0, by Euler-Maclaurin
// after ten explicit terms.
double hurwitz_zeta(double s, double a) {
  constexpr int kTerms = 10;
  // B_2j / (2j)!
  static constexpr double kB[] = {1.0 / 12,          -1.0 / 720,          1.0 / 30240,         -1.0 / 1209600,
                                  1.0 / 47900160,    -691.0 / 1307674368000.0, 1.0 / 74724249600.0,
                                  -3617.0 / 10670622842880000.0};
  double sum = 0.0;
  for (int k = 0; k < kTerms; ++k) sum += std::pow(a + k, -s);
  const double w = a + kTerms;
  sum += std::pow(w, 1.0 - s) / (s - 1.0) + 0.5 * std::pow(w, -s);
  // rising factorial s (s + 1) ... (s + 2j - 2) times w^(-s - 2j + 1)
  double fact = s;
  double wp = std::pow(w, -s - 1.0);
  const double inv_w2 = 1.0 / (w * w);
  for (int j = 0; j < 8; ++j) {
    sum += kB[j] * fact * wp;
    fact *= (s + 2 * j + 1) * (s + 2 * j + 2);
    wp *= inv_w2;
  }
  return sum;
}

// lgamma(1 + z) = -gamma z + sum_{k>=2} (-1)^k zeta(k) z^k / k, used for |z| <= 0.2
// where the Lanczos form loses relative accuracy next to the zeros at 1 and 2.
double lgamma1p_series(double z) {
  constexpr int kOrder = 30;
  static const auto zeta = [] {
    std::array<double, kOrder + 1> t{};
    for (int k = 2; k <= kOrder; ++k) t[k] = hurwitz_zeta(k, 1.0);
    return t;
  }();
  constexpr double kEulerGamma = 0.57721566490153286061;
  double acc = 0.0;
  double zk = z;
  for (int k = 2; k <= kOrder; ++k) {
    zk *= -z;
    acc += zeta[k] * zk / k;
  }
  return -kEulerGamma * z - acc;
}

}  // namespace

double lgamma(double x) {
  if (!(x > 0.0) || !std::isfinite(x)) throw DomainError("lgamma", "argument must be positive and finite, got " + std::to_string(x));
  if (x < 0.5) {
    // Reflection: Gamma(x) Gamma(1 - x) = pi / sin(pi x).
    return std::log(std::numbers::pi / std::sin(std::numbers::pi * x)) - lgamma(1.0 - x);
  }
  if (std::fabs(x - 1.0) <= 0.2) return lgamma1p_series(x - 1.0);
  if (std::fabs(x - 2.0) <= 0.2) return lgamma1p_series(x - 2.0) + std::log1p(x - 2.0);
  const double z = x - 1.0;
  double acc = kLanczos[0];
  for (std::size_t i = 1; i < kLanczos.size(); ++i) acc += kLanczos[i] / (z + static_cast<double>(i));
  const double t = z + kLanczosG + 0.5;
  return 0.5 * std::log(2.0 * std::numbers::pi) + (z + 0.5) * std::log(t) - t + std::log(acc);
}

double digamma(double x) {
  require_positive("digamma", x);
  // Next to the positive root x0 the recurrence cancels; there
  // psi(x) = (x - x0) sum_k 1/((k + x)(k + x0)) = delta sum_j (delta^2/4)^j zeta(2j + 2, (x + x0)/2).
  constexpr double kRootHi = 1.4616321449683622, kRootLo = 9.549995429965697e-17;
  const double delta = (x - kRootHi) - kRootLo;
  if (std::fabs(delta) < 0.05) {
    const double e = 0.25 * delta * delta;
    const double c = x - 0.5 * delta;
    double acc = 0.0, ej = 1.0;
    for (int j = 0; j < 6; ++j, ej *= e) acc += ej * hurwitz_zeta(2 * j + 2, c);
    return delta * acc;
  }
  double result = 0.0;
  while (x < 10.0) {
    result -= 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  const double series =
      inv2 * (1.0 / 12 - inv2 * (1.0 / 120 - inv2 * (1.0 / 252 - inv2 * (1.0 / 240 - inv2 * (1.0 / 132 -
                                                                                       inv2 * (691.0 / 32760 - inv2 / 12))))));
  return result + std::log(x) - 0.5 * inv - series;
}

double trigamma(double x) {
  require_positive("trigamma", x);
  double result = 0.0;
  while (x < 6.0) {
    result += 1.0 / (x * x);
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  // 1/x + 1/(2x^2) + sum_k B_2k / x^(2k+1)
  const double series =
      inv * inv2 *
      (1.0 / 6 - inv2 * (1.0 / 30 - inv2 * (1.0 / 42 - inv2 * (1.0 / 30 - inv2 * (5.0 / 66 - inv2 * (691.0 / 2730 - inv2 * 7.0 / 6))))));
  return result + inv + 0.5 * inv2 + series;
}

double gamma_p(double a, double x) {
  require_positive("gamma_p", a);
  if (x < 0.0 || std::isnan(x)) throw DomainError("gamma_p", "x must be non-negative");
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  if (x < a + 1.0) return p_series(a, x);
  return 1.0 - q_continued_fraction(a, x);
}

double gamma_q(double a, double x) {
  require_positive("gamma_q", a);
  if (x < 0.0 || std::isnan(x)) throw DomainError("gamma_q", "x must be non-negative");
  if (x == 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  if (x < a + 1.0) return 1.0 - p_series(a, x);
  return q_continued_fraction(a, x);
}

double gamma_pdf(double a, double x) {
  require_positive("gamma_pdf", a);
  if (x <= 0.0) return 0.0;
  return std::exp((a - 1.0) * std::log(x) - x - lgamma(a));
}

double gamma_p_da(double a, double x) {
  require_positive("gamma_p_da", a);
  if (x <= 0.0) return 0.0;
  double h = 1e-4 * std::max(1.0, a);
  if (h >= a) h = 0.5 * a;
  if (x < a + 1.0) return (p_series(a + h, x) - p_series(a - h, x)) / (2.0 * h);
  return -(q_continued_fraction(a + h, x) - q_continued_fraction(a - h, x)) / (2.0 * h);
}

double gamma_p_inv(double a, double u) {
  require_positive("gamma_p_inv", a);
  if (!(u > 0.0 && u < 1.0)) throw DomainError("gamma_p_inv", "u must lie in (0, 1), got " + std::to_string(u));
  double x;
  if (a > 1.0) {
    const double z = normal_quantile(u);
    const double s = 1.0 / (9.0 * a);
    x = a * std::pow(std::max(1.0 - s + z * std::sqrt(s), 1e-3), 3.0);
  } else {
    x = std::exp((std::log(u) + lgamma(a + 1.0)) / a);
  }
  // Safeguarded Newton on P(a, x) - u with a shrinking bracket.
  double lo = 0.0;
  double hi = std::numeric_limits<double>::infinity();
  for (int it = 0; it < 200; ++it) {
    const double f = gamma_p(a, x) - u;
    if (f == 0.0) break;
    if (f < 0.0) lo = x; else hi = x;
    const double pdf = gamma_pdf(a, x);
    double next = pdf > 0.0 ? x - f / pdf : std::numeric_limits<double>::quiet_NaN();
    if (!(next > lo && next < hi)) next = std::isinf(hi) ? 2.0 * x + 1.0 : 0.5 * (lo + hi);
    if (std::fabs(next - x) <= 1e-15 * x) {
      x = next;
      break;
    }
    x = next;
  }
  return x;
}

double ibeta(double a, double b, double x) {
  require_positive("ibeta", a);
  require_positive("ibeta", b);
  if (x < 0.0 || x > 1.0 || std::isnan(x)) throw DomainError("ibeta", "x must lie in [0, 1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double front = std::exp(lgamma(a + b) - lgamma(a) - lgamma(b) + a * std::log(x) + b * std::log1p(-x));
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_two_sided_p(double t, double dof) {
  require_positive("student_t_two_sided_p", dof);
  if (std::isnan(t)) throw DomainError("student_t_two_sided_p", "t is NaN");
  if (std::isinf(t)) return 0.0;
  return ibeta(0.5 * dof, 0.5, dof / (dof + t * t));
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("normal_quantile", "p must lie in (0, 1)");
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double e = 0.5 * std::erfc(-x / std::numbers::sqrt2) - p;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

}  // namespace pllvi::special
