#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "rspim/numerics.hpp"
#include "rspim/refit.hpp"

namespace rspim {

/// Closed interval [lo, hi]; `none` marks an empty level set. Unbounded
/// endpoints are represented by +-infinity.
struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    bool none = false;

    double width() const { return none ? 0.0 : hi - lo; }
    bool contains(double v) const { return !none && v >= lo && v <= hi; }
    bool unbounded() const { return !none && (std::isinf(lo) || std::isinf(hi)); }
    static Interval empty() { Interval iv; iv.none = true; return iv; }
};

/// Merge closed intervals; touching endpoints coalesce. Result sorted by lo.
inline std::vector<Interval> merge_intervals(std::vector<Interval> segs) {
    std::erase_if(segs, [](const Interval& s) { return s.none; });
    std::sort(segs.begin(), segs.end(), [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
    std::vector<Interval> out;
    for (const auto& s : segs) {
        if (!out.empty() && s.lo <= out.back().hi) out.back().hi = std::max(out.back().hi, s.hi);
        else out.push_back(s);
    }
    return out;
}

enum class PivotKind { exact_t, exact_f, empirical };

/// A scalar pivot theta -> T(Z, theta) together with its reference CDF (exact
/// t/F or an empirical bootstrap law). When the statistic has the studentized
/// linear form (estimate - theta)/scale, closed-form level sets are available.
struct PivotSource {
    PivotKind kind = PivotKind::exact_t;
    double nu = 1.0;                            // exact_t / exact_f denominator dof
    int q = 1;                                  // exact_f numerator dof
    std::shared_ptr<const Ecdf> ecdf;           // empirical reference
    std::function<double(double)> statistic;    // used when !linear_stat
    bool linear_stat = false;
    double estimate = 0.0;
    double scale = 1.0;
    double stat_scale = 1.0;                    // multiplies T before the reference CDF

    double stat(double theta) const {
        if (linear_stat) {
            if (scale == 0.0) {
                if (theta == estimate) return 0.0;
                return estimate > theta ? std::numeric_limits<double>::infinity()
                                        : -std::numeric_limits<double>::infinity();
            }
            return (estimate - theta) / scale;
        }
        if (!statistic) throw std::invalid_argument("PivotSource: no statistic function");
        return statistic(theta);
    }

    double reference_cdf(double t) const {
        switch (kind) {
            case PivotKind::exact_t: return t_cdf(t, nu);
            case PivotKind::exact_f: return f_cdf(std::max(0.0, t), q, static_cast<int>(nu));
            case PivotKind::empirical:
                if (!ecdf) throw std::invalid_argument("PivotSource: empirical source without Ecdf");
                return ecdf_midrank(*ecdf, t);
        }
        throw std::logic_error("PivotSource: unknown kind");
    }

    static PivotSource exact_t_pivot(double estimate, double scale, double nu) {
        PivotSource src;
        src.kind = PivotKind::exact_t;
        src.nu = nu;
        src.linear_stat = true;
        src.estimate = estimate;
        src.scale = scale;
        return src;
    }

    static PivotSource empirical_pivot(std::shared_ptr<const Ecdf> ref, double estimate, double scale) {
        PivotSource src;
        src.kind = PivotKind::empirical;
        src.ecdf = std::move(ref);
        src.linear_stat = true;
        src.estimate = estimate;
        src.scale = scale;
        return src;
    }

    static PivotSource empirical_pivot(std::shared_ptr<const Ecdf> ref, std::function<double(double)> stat_fn) {
        PivotSource src;
        src.kind = PivotKind::empirical;
        src.ecdf = std::move(ref);
        src.statistic = std::move(stat_fn);
        return src;
    }

    static PivotSource exact_f_pivot(int q, double nu, std::function<double(double)> stat_fn) {
        PivotSource src;
        src.kind = PivotKind::exact_f;
        src.q = q;
        src.nu = nu;
        src.statistic = std::move(stat_fn);
        return src;
    }
};

/// Tent transform of the probability integral transform: pi = 1 - |2U - 1|
/// with U = F(T(theta)). Uniform U maps to uniform pi, which is what makes the
/// contour strongly valid.
inline double contour_from_pivot(const PivotSource& src, double theta) {
    const double t = src.stat(theta);
    if (src.linear_stat && src.scale == 0.0) return theta == src.estimate ? 1.0 : 0.0;
    double u;
    if (std::isinf(t)) u = t > 0 ? 1.0 : 0.0;
    else u = src.reference_cdf(src.stat_scale * t);
    return 1.0 - std::abs(2.0 * u - 1.0);
}

inline std::vector<double> contour_grid(const PivotSource& src, const std::vector<double>& grid) {
    std::vector<double> out;
    out.reserve(grid.size());
    for (double theta : grid) out.push_back(contour_from_pivot(src, theta));
    return out;
}

namespace detail {

// Bisection for pi(theta) = alpha on [a, b] where pi(a) >= alpha > pi(b) or the
// reverse; tolerance is absolute on theta.
inline double bisect_contour(const PivotSource& src, double alpha, double a, double b, double tol) {
    double fa = contour_from_pivot(src, a) - alpha;
    for (int it = 0; it < 200 && std::abs(b - a) > tol; ++it) {
        const double mid = 0.5 * (a + b);
        const double fm = contour_from_pivot(src, mid) - alpha;
        if ((fa >= 0.0) == (fm >= 0.0)) { a = mid; fa = fm; }
        else b = mid;
    }
    return 0.5 * (a + b);
}

} // namespace detail

/// Upper-level set {theta : pi(theta) >= alpha} of a unimodal contour.
///
/// Exact-t sources use the closed form estimate +- t_{1-alpha/2,nu} scale,
/// which coincides with the classical refit interval. Empirical sources locate
/// the mode by golden-section search over a coarse scan and then bisect each
/// side to 1e-8 * scale. A contour that never reaches alpha yields an
/// explicitly empty interval.
inline Interval level_set_interval(const PivotSource& src, double alpha,
                                   double lo_hint = std::numeric_limits<double>::quiet_NaN(),
                                   double hi_hint = std::numeric_limits<double>::quiet_NaN()) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("level_set_interval: alpha in (0,1)");
    if (src.kind == PivotKind::exact_f)
        throw std::invalid_argument("level_set_interval: F-pivot level sets are not scalar intervals");

    if (src.kind == PivotKind::exact_t && src.linear_stat) {
        if (src.scale == 0.0) return Interval{src.estimate, src.estimate, false};
        const double half = t_quantile(1.0 - alpha / 2.0, src.nu) * src.scale / src.stat_scale;
        return Interval{src.estimate - half, src.estimate + half, false};
    }

    // Mode and search scale.
    double mode, span;
    if (src.linear_stat) {
        if (src.scale == 0.0) return Interval{src.estimate, src.estimate, false};
        const double t_med = src.kind == PivotKind::empirical ? ecdf_midrank_quantile(*src.ecdf, 0.5) : 0.0;
        mode = src.estimate - src.scale * t_med / src.stat_scale;
        const double t_hi = src.kind == PivotKind::empirical
                                ? std::max(std::abs(src.ecdf->sorted_samples.front()),
                                           std::abs(src.ecdf->sorted_samples.back()))
                                : 10.0;
        span = std::max(1e-12, src.scale * (std::abs(t_hi) + 1.0) / src.stat_scale);
    } else {
        if (!(std::isfinite(lo_hint) && std::isfinite(hi_hint)) || !(lo_hint < hi_hint))
            throw std::invalid_argument("level_set_interval: non-linear statistic needs a finite search bracket");
        // Coarse scan, then golden-section refinement around the best point.
        const int scan = 128;
        double best = lo_hint, best_pi = -1.0;
        for (int i = 0; i <= scan; ++i) {
            const double th = lo_hint + (hi_hint - lo_hint) * i / scan;
            const double pi = contour_from_pivot(src, th);
            if (pi > best_pi) { best_pi = pi; best = th; }
        }
        const double step = (hi_hint - lo_hint) / scan;
        double a = best - step, b = best + step;
        const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
        double c1 = b - gr * (b - a), c2 = a + gr * (b - a);
        double f1 = contour_from_pivot(src, c1), f2 = contour_from_pivot(src, c2);
        for (int it = 0; it < 80 && (b - a) > 1e-10 * (1.0 + std::abs(best)); ++it) {
            if (f1 < f2) { a = c1; c1 = c2; f1 = f2; c2 = a + gr * (b - a); f2 = contour_from_pivot(src, c2); }
            else { b = c2; c2 = c1; f2 = f1; c1 = b - gr * (b - a); f1 = contour_from_pivot(src, c1); }
        }
        mode = 0.5 * (a + b);
        span = std::max(1e-12, (hi_hint - lo_hint) / 8.0);
    }

    if (contour_from_pivot(src, mode) < alpha) return Interval::empty();

    const double tol = 1e-8 * std::max(1.0, span);
    auto find_edge = [&](int dir) -> double {
        double inner = mode;
        double step = span;
        for (int k = 0; k < 90; ++k) {
            const double outer = mode + dir * step;
            if (contour_from_pivot(src, outer) < alpha)
                return detail::bisect_contour(src, alpha, inner, outer, tol);
            inner = outer;
            step *= 2.0;
        }
        return dir > 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
    };
    return Interval{find_edge(-1), find_edge(+1), false};
}

/// Fraction of null-coordinate plausibilities exceeding 1 - alpha; at most
/// alpha plus Monte Carlo error under strong validity.
inline double false_confidence_rate(const std::vector<double>& pi_at_null, double alpha) {
    if (pi_at_null.empty()) throw std::invalid_argument("false_confidence_rate: empty input");
    std::size_t count = 0;
    for (double pi : pi_at_null)
        if (pi > 1.0 - alpha) ++count;
    return static_cast<double>(count) / static_cast<double>(pi_at_null.size());
}

/// A contour with provenance labels for reports.
struct PlausibilityContour {
    PivotSource source;
    std::map<std::string, std::string> meta;

    double evaluate(double theta) const { return contour_from_pivot(source, theta); }
};

/// Exact-t pivot for one refit coordinate; j is a feature index in the support.
inline PivotSource pivot_from_refit(const RefitFit& fit, int j) {
    const int pos = fit.support.position_of(j);
    return PivotSource::exact_t_pivot(fit.beta_hat[pos], fit.se(pos), fit.dof);
}

} // namespace rspim
