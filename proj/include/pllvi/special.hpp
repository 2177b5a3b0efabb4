#pragma once

// Scalar special functions used by the tape ops, the Dirichlet machinery and
// the significance test. All arguments must lie in the documented domain;
// violations throw DomainError.
namespace pllvi::special {

// log Gamma(x) for x > 0 (Lanczos, g = 7, 9 terms; reflection below 0.5).
double lgamma(double x);
// psi(x) = d/dx log Gamma(x), x > 0 (upward recurrence + asymptotic series).
double digamma(double x);
// psi'(x), x > 0.
double trigamma(double x);

// Regularized lower incomplete gamma P(a, x), a > 0, x >= 0.
double gamma_p(double a, double x);
// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x).
double gamma_q(double a, double x);
// Gamma(a, 1) density at x.
double gamma_pdf(double a, double x);
// x with P(a, x) = u, 0 < u < 1.
double gamma_p_inv(double a, double u);
// dP(a, x)/da by central differences with step h = 1e-4 * max(1, a). Uses the
// upper-tail form when x > a + 1 so the difference keeps relative accuracy.
double gamma_p_da(double a, double x);

// Regularized incomplete beta I_x(a, b).
double ibeta(double a, double b, double x);
// Two-sided p-value of Student's t with dof degrees of freedom (dof > 0, may be fractional).
double student_t_two_sided_p(double t, double dof);

// Inverse of the standard normal CDF (Acklam's rational approximation with one
// Halley refinement step).
double normal_quantile(double p);

}  // namespace pllvi::special
