#pragma once

// Statistical routines used by the bundled studies: normal and t
// distributions, Welch's test, the two-sample power formula and least
// squares with three covariance estimators.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include "simengine/errors.hpp"
#include "simengine/linalg.hpp"
#include "simengine/rng.hpp"

namespace simengine::stats {

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// Acklam's rational approximation (relative error 1.15e-9) followed by
/// one Halley step against the erfc-based CDF, which brings it to about
/// machine precision.
inline double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        if (p == 0.0) return -std::numeric_limits<double>::infinity();
        if (p == 1.0) return std::numeric_limits<double>::infinity();
        throw DistributionError("probability must lie in [0, 1]", "normal_quantile(p)");
    }
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
    // Halley; work in the upper tail when p > 0.5 to keep the residual exact.
    const double e = p <= 0.5 ? normal_cdf(x) - p : (1.0 - p) - normal_cdf(-x);
    const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
    return x - u / (1.0 + 0.5 * x * u);
}

namespace detail {

// Modified Lentz evaluation of the continued fraction for I_x(a, b).
inline double beta_continued_fraction(double a, double b, double x) {
    constexpr int max_iter = 10000;
    constexpr double eps = 1e-16;
    constexpr double tiny = 1e-300;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_iter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < eps) return h;
    }
    throw DistributionError("incomplete beta continued fraction did not converge", "incomplete_beta(a, b, x)");
}

}  // namespace detail

/// Regularized incomplete beta function I_x(a, b).
inline double incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0) || !(b > 0.0)) throw DistributionError("shape parameters must be positive", "incomplete_beta(a, b, x)");
    if (!(x >= 0.0 && x <= 1.0)) throw DistributionError("x must lie in [0, 1]", "incomplete_beta(a, b, x)");
    if (x == 0.0 || x == 1.0) return x;
    const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(log_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * detail::beta_continued_fraction(a, b, x) / a;
    return 1.0 - front * detail::beta_continued_fraction(b, a, 1.0 - x) / b;
}

/// CDF of Student's t with `df` (> 0, not necessarily integer) degrees of
/// freedom.
inline double t_cdf(double t, double df) {
    if (!(df > 0.0)) throw DistributionError("degrees of freedom must be positive", "t_cdf(t, df)");
    if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
    const double tail = 0.5 * incomplete_beta(0.5 * df, 0.5, df / (df + t * t));
    return t > 0 ? 1.0 - tail : tail;
}

struct WelchResult {
    double t = 0.0;
    double df = 0.0;
    double p_value = 1.0;
};

inline std::pair<double, double> mean_var(std::span<const double> xs) {
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return {mean, ss / static_cast<double>(xs.size() - 1)};
}

/// Two-sided Welch test; t = (mean1 - mean0) / se.
inline WelchResult welch_t_test(std::span<const double> group0, std::span<const double> group1) {
    if (group0.size() < 2 || group1.size() < 2)
        throw DistributionError("each group needs at least 2 observations", "welch_t_test(x, y)");
    const auto [m0, v0] = mean_var(group0);
    const auto [m1, v1] = mean_var(group1);
    const double w0 = v0 / static_cast<double>(group0.size());
    const double w1 = v1 / static_cast<double>(group1.size());
    if (w0 + w1 == 0.0) throw DistributionError("data are essentially constant", "welch_t_test(x, y)");
    WelchResult r;
    r.t = (m1 - m0) / std::sqrt(w0 + w1);
    r.df = (w0 + w1) * (w0 + w1) /
           (w0 * w0 / static_cast<double>(group0.size() - 1) + w1 * w1 / static_cast<double>(group1.size() - 1));
    r.p_value = incomplete_beta(0.5 * r.df, 0.5, r.df / (r.df + r.t * r.t));
    return r;
}

inline int reject_at(double p_value, double alpha = 0.05) { return p_value < alpha ? 1 : 0; }

/// Normal-approximation power of the two-sided two-sample test with
/// `n_per_group` observations per arm.
inline double power_formula(double n_per_group, double mu0, double mu1, double s0, double s1, double alpha = 0.05) {
    if (!(s0 > 0.0) || !(s1 > 0.0)) throw DistributionError("standard deviations must be positive", "power_formula");
    if (!(alpha > 0.0 && alpha < 1.0)) throw DistributionError("alpha must lie in (0, 1)", "power_formula");
    const double delta = mu1 - mu0;
    const double z = normal_quantile(1.0 - alpha / 2.0);
    return normal_cdf(std::sqrt(n_per_group * delta * delta / (s0 * s0 + s1 * s1)) - z);
}

/// Per-group sample size (z_{a/2} + z_b)^2 (s0^2 + s1^2) / (mu0 - mu1)^2,
/// before rounding up.
inline double required_n_exact(double alpha, double beta, double mu0, double mu1, double s0, double s1) {
    if (mu0 == mu1) throw DistributionError("means must differ", "required_n");
    if (!(s0 > 0.0) || !(s1 > 0.0)) throw DistributionError("standard deviations must be positive", "required_n");
    if (!(alpha > 0.0 && alpha < 1.0) || !(beta > 0.0 && beta < 1.0))
        throw DistributionError("alpha and beta must lie in (0, 1)", "required_n");
    const double z = normal_quantile(1.0 - alpha / 2.0) + normal_quantile(1.0 - beta);
    return z * z * (s0 * s0 + s1 * s1) / ((mu0 - mu1) * (mu0 - mu1));
}

inline std::uint64_t required_n(double alpha, double beta, double mu0, double mu1, double s0, double s1) {
    return static_cast<std::uint64_t>(std::ceil(required_n_exact(alpha, beta, mu0, mu1, s0, s1)));
}

// ---- simple linear regression ---------------------------------------------

struct OlsFit {
    double b0 = 0.0;
    double b1 = 0.0;
    std::vector<double> x;
    std::vector<double> residuals;
    Matrix xtx_inv;  // (X^T X)^-1
};

inline OlsFit ols_fit(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = x.size();
    if (n != y.size()) throw DistributionError("x and y differ in length", "ols_fit(x, y)");
    if (n < 3) throw DistributionError("at least 3 observations are needed", "ols_fit(x, y)");
    double sx = 0.0, sy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sx += x[i];
        sy += y[i];
    }
    const double xbar = sx / static_cast<double>(n), ybar = sy / static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0, sx2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - xbar) * (x[i] - xbar);
        sxy += (x[i] - xbar) * (y[i] - ybar);
        sx2 += x[i] * x[i];
    }
    if (!(sxx > 0.0)) throw DistributionError("singular design: x is constant", "ols_fit(x, y)");

    OlsFit fit;
    fit.b1 = sxy / sxx;
    fit.b0 = ybar - fit.b1 * xbar;
    fit.x.assign(x.begin(), x.end());
    fit.residuals.resize(n);
    for (std::size_t i = 0; i < n; ++i) fit.residuals[i] = y[i] - fit.b0 - fit.b1 * x[i];
    // det(X^T X) = n * Sxx
    const double det = static_cast<double>(n) * sxx;
    fit.xtx_inv = Matrix{{sx2 / det, -sx / det}, {-sx / det, static_cast<double>(n) / det}};
    return fit;
}

/// sigma^2 (X^T X)^-1 with sigma^2 = RSS / (n - 2).
inline Matrix vcov_model(const OlsFit& fit) {
    double rss = 0.0;
    for (double e : fit.residuals) rss += e * e;
    const double sigma2 = rss / static_cast<double>(fit.residuals.size() - 2);
    Matrix out = fit.xtx_inv;
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j) out(i, j) *= sigma2;
    return out;
}

/// HC0: (X^T X)^-1 X^T diag(e^2) X (X^T X)^-1.
inline Matrix vcov_sandwich_hc0(const OlsFit& fit) {
    Matrix meat(2, 2);
    for (std::size_t i = 0; i < fit.x.size(); ++i) {
        const double e2 = fit.residuals[i] * fit.residuals[i];
        meat(0, 0) += e2;
        meat(0, 1) += e2 * fit.x[i];
        meat(1, 1) += e2 * fit.x[i] * fit.x[i];
    }
    meat(1, 0) = meat(0, 1);
    return fit.xtx_inv * meat * fit.xtx_inv;
}

/// Variances of the coefficients over `resamples` nonparametric bootstrap
/// refits (rows drawn with replacement).
inline std::pair<double, double> vcov_bootstrap(std::span<const double> x, std::span<const double> y, RngStream& rng,
                                                std::size_t resamples = 100) {
    if (resamples < 2) throw DistributionError("at least 2 bootstrap resamples are needed", "vcov_bootstrap");
    const std::size_t n = x.size();
    std::vector<double> b0(resamples), b1(resamples), bx(n), by(n);
    for (std::size_t j = 0; j < resamples; ++j) {
        for (std::size_t i = 0; i < n; ++i) {
            const auto k = static_cast<std::size_t>(rng.below(n));
            bx[i] = x[k];
            by[i] = y[k];
        }
        const OlsFit fit = ols_fit(bx, by);
        b0[j] = fit.b0;
        b1[j] = fit.b1;
    }
    return {mean_var(b0).second, mean_var(b1).second};
}

}  // namespace simengine::stats
