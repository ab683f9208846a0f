#pragma once

namespace metaselect {

/// Regularized incomplete beta I_x(a, b), continued-fraction evaluation.
double incomplete_beta(double a, double b, double x);

/// P(T <= t) for Student's t with nu > 0 degrees of freedom.
double t_cdf(double t, double nu);

/// Two-sided tail probability P(|T| >= |t|).
double t_two_sided_p(double t, double nu);

}  // namespace metaselect
