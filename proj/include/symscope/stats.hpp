#pragma once

#include <vector>

namespace symscope {

double mean_of(const std::vector<double>& v);

// Unbiased sample variance (n-1 denominator). Needs n >= 2.
double sample_variance(const std::vector<double>& v);

// Pearson correlation. Preconditions: equal lengths >= 3, both vectors
// nonconstant; a zero-variance input raises a numeric error rather than
// returning NaN.
double pearson(const std::vector<double>& x, const std::vector<double>& y);

struct EffectSize {
    double d;  // (mean_in - mean_out) / pooled sd
    double p;  // two-sided Welch t-test
};

// Cohen's d with the classic pooled standard deviation; p-value from a
// Welch t-test (variances not assumed equal).
EffectSize cohens_d(const std::vector<double>& in_group, const std::vector<double>& out_group);

// Benjamini-Hochberg step-up at level q. Returns one reject flag per input
// p-value, original order.
std::vector<bool> bh_correct(const std::vector<double>& pvals, double q = 0.05);

// log2( p_joint / (p_x * p_y) ). Zero joint probability yields -infinity
// (the caller drops such features).
double pmi(double p_joint, double p_x, double p_y);

// Linear-interpolation quantile (the "type 7" convention) of an unsorted
// sample; p in [0,1].
double percentile(std::vector<double> values, double p);

struct Ci {
    double low;
    double high;
    bool excludes_zero() const { return low > 0.0 || high < 0.0; }
};

// Two-sided percentile bootstrap interval at the given confidence level.
Ci percentile_ci(const std::vector<double>& samples, double level);

// Standard normal CDF and its inverse (accurate to ~1e-15 after one
// Halley refinement of a rational approximation).
double normal_cdf(double x);
double normal_quantile(double p);

// P(T <= t) for Student's t with `df` degrees of freedom.
double students_t_cdf(double t, double df);

// P(Z1 > a, Z2 > b) for standard bivariate normal with correlation rho.
// Composite Gauss-Legendre integration, absolute error well under 1e-9.
double bivariate_normal_survival(double a, double b, double rho);

} // namespace symscope
