#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

namespace rspim {

/// Student-t CDF with nu > 0 degrees of freedom. Absolute error <= 1e-10 for nu <= 1e6.
inline double t_cdf(double x, double nu) {
    if (!(nu > 0.0)) throw std::invalid_argument("t_cdf: degrees of freedom must be positive");
    if (std::isinf(x)) return x > 0 ? 1.0 : 0.0;
    return boost::math::cdf(boost::math::students_t(nu), x);
}

/// Inverse of t_cdf; |t_cdf(t_quantile(u, nu)) - u| <= 1e-9.
inline double t_quantile(double u, double nu) {
    if (!(nu > 0.0)) throw std::invalid_argument("t_quantile: degrees of freedom must be positive");
    if (!(u > 0.0 && u < 1.0)) throw std::invalid_argument("t_quantile: u must lie in (0,1)");
    return boost::math::quantile(boost::math::students_t(nu), u);
}

/// F(q, nu) CDF for x >= 0.
inline double f_cdf(double x, int q, int nu) {
    if (q <= 0 || nu <= 0) throw std::invalid_argument("f_cdf: degrees of freedom must be positive");
    if (x < 0.0) throw std::invalid_argument("f_cdf: x must be nonnegative");
    if (std::isinf(x)) return 1.0;
    return boost::math::cdf(boost::math::fisher_f(static_cast<double>(q), static_cast<double>(nu)), x);
}

/// Chi-square CDF with k degrees of freedom.
inline double chi2_cdf(double x, int k) {
    if (k <= 0) throw std::invalid_argument("chi2_cdf: degrees of freedom must be positive");
    if (x < 0.0) throw std::invalid_argument("chi2_cdf: x must be nonnegative");
    if (std::isinf(x)) return 1.0;
    return boost::math::cdf(boost::math::chi_squared(static_cast<double>(k)), x);
}

inline double normal_cdf(double z) {
    return boost::math::cdf(boost::math::normal(), z);
}

inline double normal_quantile(double u) {
    if (!(u > 0.0 && u < 1.0)) throw std::invalid_argument("normal_quantile: u must lie in (0,1)");
    return boost::math::quantile(boost::math::normal(), u);
}

/// Empirical CDF over a fixed sample; immutable after construction.
struct Ecdf {
    std::vector<double> sorted_samples;

    explicit Ecdf(std::vector<double> samples) : sorted_samples(std::move(samples)) {
        if (sorted_samples.empty()) throw std::invalid_argument("Ecdf: empty sample");
        for (double v : sorted_samples)
            if (!std::isfinite(v)) throw std::invalid_argument("Ecdf: non-finite sample value");
        std::sort(sorted_samples.begin(), sorted_samples.end());
    }

    std::size_t size() const { return sorted_samples.size(); }
};

/// Right-continuous empirical CDF value: fraction of samples <= t.
inline double ecdf_eval(const Ecdf& e, double t) {
    const auto& s = e.sorted_samples;
    auto it = std::upper_bound(s.begin(), s.end(), t);
    return static_cast<double>(it - s.begin()) / static_cast<double>(s.size());
}

/// Mid-rank empirical CDF: (count(< t) + 0.5*count(= t)) / m. Reduces discreteness
/// bias when the value is plugged into the probability integral transform.
inline double ecdf_midrank(const Ecdf& e, double t) {
    const auto& s = e.sorted_samples;
    auto lo = std::lower_bound(s.begin(), s.end(), t);
    auto hi = std::upper_bound(s.begin(), s.end(), t);
    double below = static_cast<double>(lo - s.begin());
    double equal = static_cast<double>(hi - lo);
    return (below + 0.5 * equal) / static_cast<double>(s.size());
}

/// Smallest sample value t with ecdf_midrank(t) >= u; clamped to the sample range.
inline double ecdf_midrank_quantile(const Ecdf& e, double u) {
    const auto& s = e.sorted_samples;
    if (u <= ecdf_midrank(e, s.front())) return s.front();
    if (u > ecdf_midrank(e, s.back())) return s.back();
    std::size_t lo = 0, hi = s.size() - 1;
    while (lo < hi) {
        std::size_t mid = (lo + hi) / 2;
        if (ecdf_midrank(e, s[mid]) >= u) hi = mid; else lo = mid + 1;
    }
    return s[lo];
}

/// Kolmogorov-Smirnov distance between the empirical CDF of `samples` and Unif(0,1).
inline double ks_distance(const std::vector<double>& samples) {
    if (samples.empty()) throw std::invalid_argument("ks_distance: empty sample");
    std::vector<double> x(samples);
    std::sort(x.begin(), x.end());
    const double m = static_cast<double>(x.size());
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double u = std::clamp(x[i], 0.0, 1.0);
        d = std::max(d, static_cast<double>(i + 1) / m - u);
        d = std::max(d, u - static_cast<double>(i) / m);
    }
    return d;
}

/// One-sided excess of the empirical CDF above the uniform CDF, sup_u (Fhat(u) - u).
/// Positive values flag anti-conservative deviations of null plausibility samples.
inline double ks_anticonservative(const std::vector<double>& samples) {
    if (samples.empty()) throw std::invalid_argument("ks_anticonservative: empty sample");
    std::vector<double> x(samples);
    std::sort(x.begin(), x.end());
    const double m = static_cast<double>(x.size());
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
        d = std::max(d, static_cast<double>(i + 1) / m - std::clamp(x[i], 0.0, 1.0));
    return d;
}

} // namespace rspim
