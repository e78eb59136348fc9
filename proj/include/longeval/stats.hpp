#pragma once

namespace longeval::stats {

// I_x(a, b), evaluated with a modified Lentz continued fraction.
double regularized_incomplete_beta(double a, double b, double x);

// P(T <= t) for Student's t with `dof` degrees of freedom.
double student_t_cdf(double t, double dof);

}  // namespace longeval::stats
