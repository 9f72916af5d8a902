#pragma once

#include <map>
#include <optional>
#include <vector>

#include "rspim/core.hpp"
#include "rspim/refit.hpp"
#include "rspim/selectors.hpp"
#include "rspim/validify.hpp"

namespace rspim {

/// Per-split, per-coordinate refit summary; enough to rebuild the exact-t
/// contour and interval for that split.
struct SplitCoordFit {
    double estimate = 0.0;
    double se = 0.0;
};

struct SplitRun {
    SplitPlan plan;
    SelectedSupport support;
    bool no_selection = false;
    int dof = 0;
    double sigma2 = 0.0;
    std::map<int, SplitCoordFit> coord_fits;   // feature index -> summary
};

struct MultiSplitConfig {
    double frac_inf = 0.5;
    SelectorConfig selector{};
    int k_max = -1;       // < 0 -> floor(0.5 * n_inf)
    bool carved = false;  // pass-through flag; marks downstream results approximate
};

struct MultiSplitResult {
    std::vector<SplitRun> per_split;
    int r_count = 0;
};

/// One split-select-refit pass. An empty selection is recorded, not an error.
inline SplitRun run_single_split(const Dataset& d, const MultiSplitConfig& cfg, std::uint64_t seed) {
    SplitRun run;
    run.plan = make_split(static_cast<int>(d.n()), cfg.frac_inf, derive_seed(seed, 1));
    run.plan.carved = cfg.carved;
    const Eigen::MatrixXd x_sel = subset_rows(d.x, run.plan.sel_idx);
    const Eigen::VectorXd y_sel = subset_vector(d.y, run.plan.sel_idx);
    const int k_max = cfg.k_max > 0 ? cfg.k_max : default_k_max(run.plan.n_inf());

    run.support = run_selector(x_sel, y_sel, cfg.selector, k_max, derive_seed(seed, 2));
    if (run.support.size() == 0) {
        run.no_selection = true;
        return run;
    }

    const Eigen::MatrixXd x_inf = subset_rows(d.x, run.plan.inf_idx);
    const Eigen::VectorXd y_inf = subset_vector(d.y, run.plan.inf_idx);
    RefitFit fit = ols_refit(x_inf, y_inf, run.support);
    run.dof = fit.dof;
    run.sigma2 = fit.sigma2_hat;
    for (int pos = 0; pos < run.support.size(); ++pos)
        run.coord_fits[run.support.coords[pos]] = SplitCoordFit{fit.beta_hat[pos], fit.se(pos)};
    return run;
}

/// R independent splits with per-split seeds derived from the master seed;
/// results do not depend on thread scheduling.
inline MultiSplitResult run_splits(const Dataset& d, int R, const MultiSplitConfig& cfg,
                                   std::uint64_t master_seed, int threads = 1) {
    if (R < 1) throw std::invalid_argument("run_splits: R must be >= 1");
    MultiSplitResult out;
    out.r_count = R;
    out.per_split.resize(static_cast<std::size_t>(R));
    parallel_for(static_cast<std::size_t>(R), threads, [&](std::size_t r) {
        out.per_split[r] = run_single_split(d, cfg, derive_seed(master_seed, r));
    });
    return out;
}

inline double split_contour_value(const SplitRun& run, const SplitCoordFit& cf, double theta) {
    return contour_from_pivot(PivotSource::exact_t_pivot(cf.estimate, cf.se, run.dof), theta);
}

/// Maxitive aggregate contour max_r pi^(r)(theta) over the splits where j was
/// selected; nullopt when j was never selected.
inline std::optional<double> maxitive_contour(const MultiSplitResult& result, int j, double theta) {
    std::optional<double> best;
    for (const auto& run : result.per_split) {
        auto it = run.coord_fits.find(j);
        if (it == run.coord_fits.end()) continue;
        const double pi = split_contour_value(run, it->second, theta);
        if (!best || pi > *best) best = pi;
    }
    return best;
}

/// Union-of-splits interval: merged per-split level sets. nullopt when j was
/// never selected.
inline std::optional<std::vector<Interval>> union_interval(const MultiSplitResult& result, int j,
                                                           double alpha) {
    std::vector<Interval> segs;
    bool available = false;
    for (const auto& run : result.per_split) {
        auto it = run.coord_fits.find(j);
        if (it == run.coord_fits.end()) continue;
        available = true;
        segs.push_back(level_set_interval(
            PivotSource::exact_t_pivot(it->second.estimate, it->second.se, run.dof), alpha));
    }
    if (!available) return std::nullopt;
    return merge_intervals(std::move(segs));
}

/// Intersection-of-splits interval; a diagnostic that may be empty.
inline std::optional<Interval> intersection_interval(const MultiSplitResult& result, int j, double alpha) {
    bool available = false;
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    for (const auto& run : result.per_split) {
        auto it = run.coord_fits.find(j);
        if (it == run.coord_fits.end()) continue;
        available = true;
        Interval iv = level_set_interval(
            PivotSource::exact_t_pivot(it->second.estimate, it->second.se, run.dof), alpha);
        lo = std::max(lo, iv.lo);
        hi = std::min(hi, iv.hi);
    }
    if (!available) return std::nullopt;
    if (lo > hi) return Interval::empty();
    return Interval{lo, hi, false};
}

/// Fraction of splits in which feature j was selected.
inline double selection_frequency(const MultiSplitResult& result, int j) {
    int count = 0;
    for (const auto& run : result.per_split)
        if (run.coord_fits.count(j)) ++count;
    return result.per_split.empty() ? 0.0 : static_cast<double>(count) / result.per_split.size();
}

} // namespace rspim
