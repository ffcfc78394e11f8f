#include "symscope/stats.hpp"

#include "symscope/errors.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace symscope {

double mean_of(const std::vector<double>& v) {
    if (v.empty()) throw validation_error("mean of empty vector");
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_variance(const std::vector<double>& v) {
    if (v.size() < 2) throw validation_error("variance needs at least 2 values");
    double m = mean_of(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return ss / static_cast<double>(v.size() - 1);
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) {
        throw validation_error("pearson inputs differ in length: " + std::to_string(x.size()) + " vs " +
                               std::to_string(y.size()));
    }
    if (x.size() < 3) throw validation_error("pearson needs at least 3 pairs");
    const double mx = mean_of(x), my = mean_of(y);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx, dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) {
        throw numeric_error("correlation undefined: input has zero variance");
    }
    double r = sxy / std::sqrt(sxx * syy);
    return std::clamp(r, -1.0, 1.0);
}

EffectSize cohens_d(const std::vector<double>& in_group, const std::vector<double>& out_group) {
    const std::size_t n1 = in_group.size(), n2 = out_group.size();
    if (n1 < 2 || n2 < 2) throw validation_error("effect size needs at least 2 values per group");
    const double m1 = mean_of(in_group), m2 = mean_of(out_group);
    const double v1 = sample_variance(in_group), v2 = sample_variance(out_group);
    const double pooled_var =
        ((static_cast<double>(n1) - 1.0) * v1 + (static_cast<double>(n2) - 1.0) * v2) /
        (static_cast<double>(n1 + n2) - 2.0);
    if (pooled_var <= 0.0) {
        throw numeric_error("effect size undefined: zero pooled standard deviation");
    }
    EffectSize out;
    out.d = (m1 - m2) / std::sqrt(pooled_var);

    // Welch t: no equal-variance assumption for the p-value.
    const double se1 = v1 / static_cast<double>(n1), se2 = v2 / static_cast<double>(n2);
    const double se = se1 + se2;
    if (se <= 0.0) {
        throw numeric_error("effect size undefined: zero standard error");
    }
    const double t = (m1 - m2) / std::sqrt(se);
    const double df = se * se / (se1 * se1 / (static_cast<double>(n1) - 1.0) +
                                 se2 * se2 / (static_cast<double>(n2) - 1.0));
    out.p = 2.0 * (1.0 - students_t_cdf(std::abs(t), df));
    out.p = std::clamp(out.p, 0.0, 1.0);
    return out;
}

std::vector<bool> bh_correct(const std::vector<double>& pvals, double q) {
    const std::size_t m = pvals.size();
    std::vector<bool> reject(m, false);
    if (m == 0) return reject;
    for (double p : pvals) {
        if (p < 0.0 || p > 1.0 || std::isnan(p)) {
            throw validation_error("p-value outside [0,1]");
        }
    }
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return pvals[a] < pvals[b]; });
    // Step-up: largest k with p_(k) <= k*q/m; reject ranks 1..k.
    std::size_t cut = 0;
    for (std::size_t k = m; k >= 1; --k) {
        if (pvals[order[k - 1]] <= q * static_cast<double>(k) / static_cast<double>(m)) {
            cut = k;
            break;
        }
    }
    for (std::size_t k = 0; k < cut; ++k) reject[order[k]] = true;
    return reject;
}

double pmi(double p_joint, double p_x, double p_y) {
    if (p_x <= 0.0 || p_y <= 0.0) throw validation_error("pmi marginals must be positive");
    if (p_joint <= 0.0) return -std::numeric_limits<double>::infinity();
    return std::log2(p_joint / (p_x * p_y));
}

double percentile(std::vector<double> values, double p) {
    if (values.empty()) throw validation_error("percentile of empty sample");
    if (p < 0.0 || p > 1.0) throw validation_error("percentile level outside [0,1]");
    std::sort(values.begin(), values.end());
    const double h = (static_cast<double>(values.size()) - 1.0) * p;
    const std::size_t lo = static_cast<std::size_t>(h);
    if (lo + 1 >= values.size()) return values.back();
    const double frac = h - static_cast<double>(lo);
    return values[lo] + frac * (values[lo + 1] - values[lo]);
}

Ci percentile_ci(const std::vector<double>& samples, double level) {
    if (level <= 0.0 || level >= 1.0) throw validation_error("confidence level outside (0,1)");
    const double alpha = (1.0 - level) / 2.0;
    Ci ci;
    ci.low = percentile(samples, alpha);
    ci.high = percentile(samples, 1.0 - alpha);
    return ci;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / M_SQRT2); }

double normal_quantile(double p) {
    if (p <= 0.0) return -std::numeric_limits<double>::infinity();
    if (p >= 1.0) return std::numeric_limits<double>::infinity();
    // Acklam's rational approximation, then one Halley step against erfc.
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                               1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                               6.680131188771972e+01, -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                               -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                               3.754408661907416e+00};
    const double p_low = 0.02425;
    double x;
    if (p < p_low) {
        const double u = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * u + c[1]) * u + c[2]) * u + c[3]) * u + c[4]) * u + c[5]) /
            ((((d[0] * u + d[1]) * u + d[2]) * u + d[3]) * u + 1.0);
    } else if (p <= 1.0 - p_low) {
        const double u = p - 0.5;
        const double t = u * u;
        x = (((((a[0] * t + a[1]) * t + a[2]) * t + a[3]) * t + a[4]) * t + a[5]) * u /
            (((((b[0] * t + b[1]) * t + b[2]) * t + b[3]) * t + b[4]) * t + 1.0);
    } else {
        const double u = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * u + c[1]) * u + c[2]) * u + c[3]) * u + c[4]) * u + c[5]) /
            ((((d[0] * u + d[1]) * u + d[2]) * u + d[3]) * u + 1.0);
    }
    const double e = normal_cdf(x) - p;
    const double u = e * std::sqrt(2.0 * M_PI) * std::exp(x * x / 2.0);
    return x - u / (1.0 + x * u / 2.0);
}

double students_t_cdf(double t, double df) {
    boost::math::students_t_distribution<double> dist(df);
    return boost::math::cdf(dist, t);
}

namespace {

// 16-point Gauss-Legendre on [-1, 1].
const double kGlNode[8] = {0.0950125098376374, 0.2816035507792589, 0.4580167776572274,
                           0.6178762444026438, 0.7554044083550030, 0.8656312023878318,
                           0.9445750230732326, 0.9894009349916499};
const double kGlWeight[8] = {0.1894506104550685, 0.1826034150449236, 0.1691565193950025,
                             0.1495959888165767, 0.1246289712555339, 0.0951585116824928,
                             0.0622535239386479, 0.0271524594117541};

double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI); }

} // namespace

double bivariate_normal_survival(double a, double b, double rho) {
    if (rho <= -1.0 + 1e-12) {
        // Z2 = -Z1: both exceed iff a < Z1 < -b.
        return std::max(0.0, normal_cdf(-b) - normal_cdf(a));
    }
    if (rho >= 1.0 - 1e-12) {
        // Z2 = Z1.
        return 1.0 - normal_cdf(std::max(a, b));
    }
    const double lo = std::max(a, -9.0);
    const double hi = 9.0;
    if (lo >= hi) return 0.0;
    const double denom = std::sqrt(1.0 - rho * rho);
    // Integrate phi(z) * P(Z2 > b | Z1 = z) over z in [lo, hi] in segments
    // short enough for 16-node quadrature to be essentially exact.
    const int segments = std::max(1, static_cast<int>(std::ceil((hi - lo) / 0.5)));
    const double step = (hi - lo) / static_cast<double>(segments);
    double total = 0.0;
    for (int s = 0; s < segments; ++s) {
        const double mid = lo + (static_cast<double>(s) + 0.5) * step;
        const double half = step / 2.0;
        for (int i = 0; i < 8; ++i) {
            for (int sign = -1; sign <= 1; sign += 2) {
                const double z = mid + static_cast<double>(sign) * half * kGlNode[i];
                const double cond = normal_cdf(-(b - rho * z) / denom);
                total += kGlWeight[i] * half * normal_pdf(z) * cond;
            }
        }
    }
    return total;
}

} // namespace symscope
