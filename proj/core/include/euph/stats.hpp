#pragma once

#include <cstddef>
#include <span>

namespace euph {

double mean(std::span<const double> xs);

// Sample (n-1) standard deviation; 0 for fewer than two values.
double sample_stddev(std::span<const double> xs);

// I_x(a, b), evaluated with the modified-Lentz continued fraction.
double regularized_incomplete_beta(double a, double b, double x);

// P(T <= t) for Student's t with `df` degrees of freedom.
double student_t_cdf(double t, double df);

// P(|T| >= |t|).
double student_t_two_sided_p(double t, double df);

struct SignificanceResult {
  double t_statistic = 0;
  double p_value = 1;
  std::size_t n_pairs = 0;
  double degrees_of_freedom = 0;
  bool two_sided = true;
};

// Paired t-test on d_i = a_i - b_i. Throws NumericError("degenerate paired
// sample") when the differences have zero variance.
SignificanceResult paired_t_test(std::span<const double> a, std::span<const double> b);

}  // namespace euph
