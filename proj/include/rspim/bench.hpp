#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "rspim/dgp.hpp"
#include "rspim/multisplit.hpp"
#include "rspim/robust_orth.hpp"

namespace rspim {

enum class MethodKind { rspim_single, rspim_union, rspim_wildboot, orth_crossfit, debiased_lasso };

inline const char* method_name(MethodKind m) {
    switch (m) {
        case MethodKind::rspim_single: return "rspim_single";
        case MethodKind::rspim_union: return "rspim_union";
        case MethodKind::rspim_wildboot: return "rspim_wildboot";
        case MethodKind::orth_crossfit: return "orth_crossfit";
        case MethodKind::debiased_lasso: return "debiased_lasso";
    }
    return "unknown";
}

struct ExperimentConfig {
    DesignConfig design{};
    MethodKind method = MethodKind::rspim_single;
    SelectorConfig selector{};
    double alpha = 0.1;
    int replications = 100;
    double shrink_c = 1.0;          // c = 1 is the raw, guaranteed procedure
    int r_splits = 1;               // rspim_union
    double frac_inf = 0.5;
    WildBootConfig wild_boot{};     // rspim_wildboot / orth_crossfit reference law
    int crossfit_folds = 5;
    int eval_null_count = -1;       // full-model methods; < 0 -> design.s
    std::uint64_t master_seed = 0;
    int threads = 1;
    std::string label;

    void validate() const {
        design.validate();
        if (replications < 1) throw std::invalid_argument("ExperimentConfig: replications must be >= 1");
        if (!(shrink_c > 0.0)) throw std::invalid_argument("ExperimentConfig: shrink_c must be positive");
        if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("ExperimentConfig: alpha in (0,1)");
        if (r_splits < 1) throw std::invalid_argument("ExperimentConfig: r_splits must be >= 1");
    }
};

/// A per-coordinate pivot that supports rescaling by the shrink factor c
/// without re-running the experiment: T^(c) = c * T against the method's own
/// reference law.
struct ScalablePivot {
    enum class Kind { exact_t, ecdf_t, normal_z, orth, union_of };

    Kind kind = Kind::exact_t;
    double estimate = 0.0;
    double scale = 1.0;        // studentization scale (se); 0 flags a degenerate fit
    double nu = 1.0;           // exact_t dof
    std::shared_ptr<const Ecdf> ref;   // ecdf_t / orth reference law
    OrthScore orth{};
    std::vector<ScalablePivot> members;   // union_of: one exact_t per split

    PivotSource source(double c) const {
        PivotSource src;
        switch (kind) {
            case Kind::exact_t:
                src = PivotSource::exact_t_pivot(estimate, scale, nu);
                break;
            case Kind::ecdf_t:
                src = PivotSource::empirical_pivot(ref, estimate, scale);
                break;
            case Kind::normal_z:
                src = PivotSource::exact_t_pivot(estimate, scale, 1e7);  // normal via large-dof t
                break;
            case Kind::orth: {
                OrthScore s = orth;
                src = PivotSource::empirical_pivot(ref, [s](double th) { return s.tstat(th); });
                break;
            }
            case Kind::union_of:
                throw std::logic_error("ScalablePivot: union has no single source");
        }
        src.stat_scale = c;
        return src;
    }

    double pi_at(double theta, double c) const {
        if (kind == Kind::union_of) {
            double best = 0.0;
            for (const auto& m : members) best = std::max(best, m.pi_at(theta, c));
            return best;
        }
        return contour_from_pivot(source(c), theta);
    }

    std::vector<Interval> intervals(double c, double alpha) const {
        if (kind == Kind::union_of) {
            std::vector<Interval> segs;
            for (const auto& m : members) {
                auto sub = m.intervals(c, alpha);
                segs.insert(segs.end(), sub.begin(), sub.end());
            }
            return merge_intervals(std::move(segs));
        }
        if (kind == Kind::orth) {
            const double se = std::abs(orth.sigma(orth.root()) / (std::sqrt(orth.n) * orth.mean_aa));
            Interval iv = level_set_interval(source(c), alpha, orth.root() - 80.0 * se,
                                             orth.root() + 80.0 * se);
            return {iv};
        }
        return {level_set_interval(source(c), alpha)};
    }

    bool covers(double theta, double c, double alpha) const { return pi_at(theta, c) >= alpha; }

    bool rejects(double theta0, double c, double alpha) const { return pi_at(theta0, c) < alpha; }

    static double total_length(const std::vector<Interval>& segs) {
        double len = 0.0;
        for (const auto& s : segs) {
            if (s.none) continue;
            len += s.hi - s.lo;
        }
        return len;
    }
};

/// One evaluated coordinate in one replication.
struct CoordOutcome {
    int rep = 0;
    int coord = 0;
    bool active = false;
    double beta_true = 0.0;
    double estimate = 0.0;
    ScalablePivot pivot;

    // Realized at the experiment's (c, alpha):
    double pi_truth = 0.0;
    double pi_zero = 0.0;
    std::vector<Interval> segments;
    bool covered = false;
    double length = 0.0;
    bool reject_null = false;
    bool unbounded = false;

    void finalize(double c, double alpha) {
        pi_truth = pivot.pi_at(beta_true, c);
        pi_zero = pivot.pi_at(0.0, c);
        segments = pivot.intervals(c, alpha);
        covered = pivot.covers(beta_true, c, alpha);
        reject_null = pivot.rejects(0.0, c, alpha);
        length = ScalablePivot::total_length(segments);
        unbounded = false;
        for (const auto& s : segments)
            if (s.unbounded()) unbounded = true;
        if (unbounded) length = std::numeric_limits<double>::infinity();
    }
};

struct BenchReport {
    std::string method;
    std::string label;
    double alpha = 0.1;
    double shrink_c = 1.0;
    int replications = 0;
    std::optional<double> conditional_coverage;
    std::optional<double> mil;                   // median interval length
    std::optional<double> power;                 // rejection rate on active coordinates
    std::optional<double> null_rejection;        // rejection rate on null coordinates
    std::optional<double> ks_null_plaus;         // KS of pi(beta0_j) vs Unif(0,1)
    std::optional<double> false_confidence;      // rate pi(0) > 1 - alpha on selected nulls
    long n_selected_total = 0;
    int no_selection_reps = 0;
    double infinite_or_na_rate = 0.0;
    std::vector<std::pair<double, double>> coverage_curve;   // (alpha, coverage)
};

struct ExperimentResult {
    ExperimentConfig config;
    std::vector<CoordOutcome> records;
    int no_selection_reps = 0;
    BenchReport report;
};

namespace detail {

// Seed streams inside one replication.
constexpr std::uint64_t kStreamDesign = 1, kStreamNoise = 2, kStreamSplit = 3,
                        kStreamSelector = 4, kStreamBoot = 5, kStreamFold = 6;

inline double median(std::vector<double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size();
    return m % 2 == 1 ? v[m / 2] : 0.5 * (v[m / 2 - 1] + v[m / 2]);
}

struct RepOutput {
    std::vector<CoordOutcome> records;
    bool no_selection = false;
};

inline std::vector<int> full_model_eval_coords(const ExperimentConfig& cfg) {
    const int s = cfg.design.s;
    const int n_null = std::min(cfg.eval_null_count < 0 ? s : cfg.eval_null_count, cfg.design.p - s);
    std::vector<int> coords;
    for (int j = 0; j < s; ++j) coords.push_back(j);
    for (int j = 0; j < n_null; ++j) coords.push_back(s + j);
    return coords;
}

inline RepOutput run_replication(const ExperimentConfig& cfg, int rep) {
    const std::uint64_t rep_seed = derive_seed(cfg.master_seed, static_cast<std::uint64_t>(rep));
    DesignConfig dc = cfg.design;
    const Eigen::VectorXd beta0 = make_beta(dc.p, dc.s, dc.snr_beta_norm, dc.beta_pattern, dc.custom_beta);
    Dataset d;
    d.x = gen_design(dc.n, dc.p, dc.rho, dc.corr_kind, derive_seed(rep_seed, kStreamDesign));
    d.y = gen_response(d.x, beta0, dc.sigma, dc.noise_kind, dc.t_df, derive_seed(rep_seed, kStreamNoise));

    RepOutput out;
    auto emit = [&](int coord, ScalablePivot pivot, double estimate) {
        CoordOutcome rec;
        rec.rep = rep;
        rec.coord = coord;
        rec.beta_true = beta0[coord];
        rec.active = beta0[coord] != 0.0;
        rec.estimate = estimate;
        rec.pivot = std::move(pivot);
        rec.finalize(cfg.shrink_c, cfg.alpha);
        out.records.push_back(std::move(rec));
    };

    SelectorConfig sel = cfg.selector;
    if (sel.kind == SelectorKind::oracle && sel.oracle_support.empty())
        for (int j = 0; j < dc.p; ++j)
            if (beta0[j] != 0.0) sel.oracle_support.push_back(j);
    if (sel.kind == SelectorKind::random_k && sel.random_k <= 0) sel.random_k = std::max(1, dc.s);

    switch (cfg.method) {
        case MethodKind::rspim_single:
        case MethodKind::rspim_wildboot: {
            MultiSplitConfig mcfg{cfg.frac_inf, sel, -1, false};
            SplitRun run = run_single_split(d, mcfg, derive_seed(rep_seed, kStreamSplit));
            if (run.no_selection) { out.no_selection = true; break; }
            const Eigen::MatrixXd x_inf = subset_rows(d.x, run.plan.inf_idx);
            const Eigen::VectorXd y_inf = subset_vector(d.y, run.plan.inf_idx);
            RefitFit fit = ols_refit(x_inf, y_inf, run.support);
            for (int pos = 0; pos < run.support.size(); ++pos) {
                const int j = run.support.coords[pos];
                ScalablePivot pv;
                pv.estimate = fit.beta_hat[pos];
                pv.scale = fit.se(pos);
                if (cfg.method == MethodKind::rspim_single) {
                    pv.kind = ScalablePivot::Kind::exact_t;
                    pv.nu = fit.dof;
                } else {
                    WildBootConfig wb = cfg.wild_boot;
                    wb.seed = derive_seed(derive_seed(rep_seed, kStreamBoot), static_cast<std::uint64_t>(j));
                    WildBootResult boot = wild_boot_t_ecdf(fit, x_inf, y_inf, j, wb);
                    pv.kind = ScalablePivot::Kind::ecdf_t;
                    pv.ref = boot.ecdf;
                    if (boot.degenerate) pv.scale = 0.0;
                }
                emit(j, std::move(pv), fit.beta_hat[pos]);
            }
            break;
        }
        case MethodKind::rspim_union: {
            MultiSplitConfig mcfg{cfg.frac_inf, sel, -1, false};
            MultiSplitResult msr = run_splits(d, cfg.r_splits, mcfg, derive_seed(rep_seed, kStreamSplit));
            std::vector<int> coords;
            for (const auto& run : msr.per_split)
                for (const auto& [j, cf] : run.coord_fits) coords.push_back(j);
            std::sort(coords.begin(), coords.end());
            coords.erase(std::unique(coords.begin(), coords.end()), coords.end());
            if (coords.empty()) { out.no_selection = true; break; }
            for (int j : coords) {
                ScalablePivot pv;
                pv.kind = ScalablePivot::Kind::union_of;
                double est_sum = 0.0;
                for (const auto& run : msr.per_split) {
                    auto it = run.coord_fits.find(j);
                    if (it == run.coord_fits.end()) continue;
                    ScalablePivot member;
                    member.kind = ScalablePivot::Kind::exact_t;
                    member.estimate = it->second.estimate;
                    member.scale = it->second.se;
                    member.nu = run.dof;
                    est_sum += it->second.estimate;
                    pv.members.push_back(std::move(member));
                }
                const double est = est_sum / static_cast<double>(pv.members.size());
                emit(j, std::move(pv), est);
            }
            break;
        }
        case MethodKind::orth_crossfit: {
            for (int j : full_model_eval_coords(cfg)) {
                PlmData plm;
                plm.d_treat = d.x.col(j);
                plm.x.resize(d.n(), d.p() - 1);
                int c = 0;
                for (int k = 0; k < dc.p; ++k)
                    if (k != j) plm.x.col(c++) = d.x.col(k);
                plm.y = d.y;
                CrossFitPlan plan = CrossFitPlan::make(
                    dc.n, cfg.crossfit_folds,
                    derive_seed(derive_seed(rep_seed, kStreamFold), static_cast<std::uint64_t>(j)));
                WildBootConfig wb = cfg.wild_boot;
                wb.seed = derive_seed(derive_seed(rep_seed, kStreamBoot), static_cast<std::uint64_t>(j));
                OrthContourResult res = orth_contour(plm, plan, cfg.selector.lasso, wb);
                ScalablePivot pv;
                pv.kind = ScalablePivot::Kind::orth;
                pv.orth = res.score;
                pv.ref = res.boot;
                pv.estimate = res.theta_hat;
                pv.scale = std::abs(res.root_se());
                emit(j, std::move(pv), res.theta_hat);
            }
            break;
        }
        case MethodKind::debiased_lasso: {
            DebiasedResult res = debiased_lasso_intervals(d, cfg.alpha, cfg.selector.lasso);
            for (int j : full_model_eval_coords(cfg)) {
                if (!std::isfinite(res.se[j])) continue;   // reported via failed_coords
                ScalablePivot pv;
                pv.kind = ScalablePivot::Kind::normal_z;
                pv.estimate = res.b_debiased[j];
                pv.scale = res.se[j];
                emit(j, std::move(pv), res.b_debiased[j]);
            }
            if (out.records.empty()) out.no_selection = true;
            break;
        }
    }
    return out;
}

} // namespace detail

/// Conditional coverage at shrink factor c over a fixed record set (shared
/// seeds across c values by construction).
inline std::optional<double> conditional_coverage_at(const std::vector<CoordOutcome>& records,
                                                     double c, double alpha) {
    if (records.empty()) return std::nullopt;
    std::size_t hit = 0;
    for (const auto& r : records)
        if (r.pivot.covers(r.beta_true, c, alpha)) ++hit;
    return static_cast<double>(hit) / static_cast<double>(records.size());
}

inline BenchReport summarize(const ExperimentConfig& cfg, const std::vector<CoordOutcome>& records,
                             int no_selection_reps) {
    BenchReport rep;
    rep.method = method_name(cfg.method);
    rep.label = cfg.label;
    rep.alpha = cfg.alpha;
    rep.shrink_c = cfg.shrink_c;
    rep.replications = cfg.replications;
    rep.n_selected_total = static_cast<long>(records.size());
    rep.no_selection_reps = no_selection_reps;

    int unbounded = 0;
    if (!records.empty()) {
        std::size_t covered = 0;
        std::vector<double> lengths, pis, pis_null;
        long active_n = 0, active_reject = 0, null_n = 0, null_reject = 0;
        for (const auto& r : records) {
            if (r.covered) ++covered;
            if (std::isfinite(r.length)) lengths.push_back(r.length);
            else ++unbounded;
            pis.push_back(std::clamp(r.pi_truth, 0.0, 1.0));
            if (r.active) { ++active_n; if (r.reject_null) ++active_reject; }
            else {
                ++null_n;
                if (r.reject_null) ++null_reject;
                pis_null.push_back(r.pi_zero);
            }
        }
        rep.conditional_coverage = static_cast<double>(covered) / records.size();
        if (!lengths.empty()) rep.mil = detail::median(lengths);
        if (active_n > 0) rep.power = static_cast<double>(active_reject) / active_n;
        if (null_n > 0) rep.null_rejection = static_cast<double>(null_reject) / null_n;
        rep.ks_null_plaus = ks_distance(pis);
        if (!pis_null.empty()) rep.false_confidence = false_confidence_rate(pis_null, cfg.alpha);

        const std::array<double, 9> alphas{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
        for (double a : alphas)
            rep.coverage_curve.emplace_back(a, *conditional_coverage_at(records, cfg.shrink_c, a));
    }
    const double denom = static_cast<double>(records.size() + no_selection_reps);
    rep.infinite_or_na_rate = denom > 0 ? (unbounded + no_selection_reps) / denom : 0.0;
    return rep;
}

/// Monte Carlo experiment: per replication, generate data, run the method,
/// and record per selected/evaluated coordinate the contour value at the
/// truth, the (possibly shrunk) interval, coverage, length, and the rejection
/// of beta_j = 0. Replications run concurrently on derived seeds.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    std::vector<detail::RepOutput> outputs(static_cast<std::size_t>(cfg.replications));
    parallel_for(static_cast<std::size_t>(cfg.replications), cfg.threads,
                 [&](std::size_t m) { outputs[m] = detail::run_replication(cfg, static_cast<int>(m)); });

    ExperimentResult res;
    res.config = cfg;
    for (auto& o : outputs) {
        if (o.no_selection) ++res.no_selection_reps;
        for (auto& r : o.records) res.records.push_back(std::move(r));
    }
    res.report = summarize(cfg, res.records, res.no_selection_reps);
    return res;
}

/// Interval from the scaled pivot c*T; for t-based intervals this is
/// beta_hat_j +- (1/c) t_{1-alpha/2,nu} se_j.
inline Interval shrunk_t_interval(const RefitFit& fit, int j, double alpha, double c) {
    if (!(c > 0.0)) throw std::invalid_argument("shrunk_t_interval: c must be positive");
    const int pos = fit.support.position_of(j);
    PivotSource src = PivotSource::exact_t_pivot(fit.beta_hat[pos], fit.se(pos), fit.dof);
    src.stat_scale = c;
    return level_set_interval(src, alpha);
}

struct CalibrationResult {
    double c_star = 1.0;
    double coverage_at_c_star = 0.0;
    std::vector<std::pair<double, double>> curve;   // (c, conditional coverage)
};

/// Pick c from the grid whose empirical conditional coverage is closest to the
/// target; ties resolve to the smaller (more conservative) c. Coverage is
/// evaluated on the shared record set, i.e. common random numbers across c.
inline CalibrationResult calibrate_c(const std::vector<CoordOutcome>& records, double alpha,
                                     std::vector<double> c_grid, double target) {
    if (c_grid.empty()) throw std::invalid_argument("calibrate_c: empty grid");
    if (records.empty()) throw std::runtime_error("calibrate_c: no selected coordinates to calibrate on");
    std::sort(c_grid.begin(), c_grid.end());
    CalibrationResult out;
    double best_gap = std::numeric_limits<double>::infinity();
    for (double c : c_grid) {
        const double cov = *conditional_coverage_at(records, c, alpha);
        out.curve.emplace_back(c, cov);
        const double gap = std::abs(cov - target);
        if (gap < best_gap - 1e-15) {
            best_gap = gap;
            out.c_star = c;
            out.coverage_at_c_star = cov;
        }
    }
    return out;
}

inline CalibrationResult calibrate_c(const ExperimentConfig& cfg, const std::vector<double>& c_grid,
                                     double target) {
    ExperimentResult res = run_experiment(cfg);
    return calibrate_c(res.records, cfg.alpha, c_grid, target);
}

/// Per-alpha conditional coverage on shared replications.
inline std::vector<std::pair<double, double>> coverage_curve(const std::vector<CoordOutcome>& records,
                                                             double c, const std::vector<double>& alphas) {
    std::vector<std::pair<double, double>> out;
    for (double a : alphas) {
        auto cov = conditional_coverage_at(records, c, a);
        out.emplace_back(a, cov ? *cov : std::numeric_limits<double>::quiet_NaN());
    }
    return out;
}

struct UniformityReport {
    double ks = 0.0;
    std::array<int, 20> histogram{};
    int m = 0;
};

/// KS distance of the null plausibilities pi(beta0_j) from Unif(0,1), plus a
/// 20-bin histogram.
inline UniformityReport null_uniformity_report(const std::vector<CoordOutcome>& records) {
    UniformityReport rep;
    std::vector<double> pis;
    for (const auto& r : records) pis.push_back(std::clamp(r.pi_truth, 0.0, 1.0));
    if (pis.empty()) return rep;
    rep.m = static_cast<int>(pis.size());
    rep.ks = ks_distance(pis);
    for (double v : pis) {
        int bin = std::min(19, static_cast<int>(v * 20.0));
        ++rep.histogram[static_cast<std::size_t>(bin)];
    }
    return rep;
}

/// Desk-scale experiment presets for the simulation modules A-E.
inline ExperimentConfig module_preset(char module) {
    ExperimentConfig cfg;
    cfg.label = std::string("module_") + module;
    switch (module) {
        case 'A':   // baseline calibration, fixed support, no post-selection
            cfg.design = DesignConfig{100, 20, 0.0, CorrKind::ar1, 3, 2.0};
            cfg.method = MethodKind::rspim_single;
            cfg.selector.kind = SelectorKind::oracle;
            cfg.replications = 2000;
            break;
        case 'B':   // Gaussian high-dimensional setting
            cfg.design = DesignConfig{100, 500, 0.5, CorrKind::ar1, 10, 5.0};
            cfg.method = MethodKind::rspim_single;
            cfg.selector.kind = SelectorKind::lasso_stability;
            cfg.replications = 500;
            break;
        case 'C':   // robustness: heteroskedastic noise, wild-bootstrap pivots
            cfg.design = DesignConfig{100, 200, 0.5, CorrKind::ar1, 5, 5.0};
            cfg.design.noise_kind = NoiseKind::heteroskedastic_x1;
            cfg.method = MethodKind::rspim_wildboot;
            cfg.selector.kind = SelectorKind::lasso_stability;
            cfg.replications = 500;
            break;
        case 'D':   // orthogonalized cross-fitting vs debiased lasso
            cfg.design = DesignConfig{200, 100, 0.5, CorrKind::ar1, 5, 5.0};
            cfg.method = MethodKind::orth_crossfit;
            cfg.replications = 400;
            break;
        case 'E':   // stress design: high correlation, weak signals
            cfg.design = DesignConfig{100, 200, 0.9, CorrKind::ar1, 5, 0.4 * std::sqrt(5.0)};
            cfg.method = MethodKind::rspim_single;
            cfg.selector.kind = SelectorKind::lasso_stability;
            cfg.replications = 500;
            break;
        default:
            throw std::invalid_argument("module_preset: module must be one of A,B,C,D,E");
    }
    return cfg;
}

} // namespace rspim
