#pragma once

#include <span>
#include <vector>

namespace metasched::stats {

double mean(std::span<const double> x);
// Sample variance (n-1 denominator); 0 for n < 2.
double variance(std::span<const double> x);
double stderr_mean(std::span<const double> x);
double median(std::vector<double> x);

// Pearson correlation; 0 if either side has zero variance.
double pearson(std::span<const double> x, std::span<const double> y);

// Least-squares slope of y on x.
double ls_slope(std::span<const double> x, std::span<const double> y);

// Survival function of the standard normal.
double normal_sf(double z);

// Regularized upper incomplete gamma Q(a, x).
double gamma_q(double a, double x);

// P(X > stat) for X ~ chi-squared with dof degrees of freedom.
double chi2_sf(double stat, int dof);

// Goodness-of-fit p-value for observed counts against expected probabilities.
double chi2_gof_pvalue(std::span<const long> counts, std::span<const double> probs);

// One-sided Mann-Whitney p-value for the alternative "a tends larger than b",
// normal approximation with tie correction.
double mann_whitney_p_greater(std::span<const double> a, std::span<const double> b);

}  // namespace metasched::stats
