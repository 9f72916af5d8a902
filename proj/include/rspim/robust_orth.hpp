#pragma once

#include <cmath>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "rspim/core.hpp"
#include "rspim/refit.hpp"
#include "rspim/selectors.hpp"
#include "rspim/validify.hpp"

namespace rspim {

enum class MultiplierKind { rademacher, mammen };

struct WildBootConfig {
    int n_boot = 999;
    MultiplierKind multiplier = MultiplierKind::rademacher;
    std::uint64_t seed = 0;
};

/// Mean-zero, unit-variance bootstrap multipliers. Mammen's two-point law also
/// has third moment one.
inline Eigen::VectorXd draw_multipliers(MultiplierKind kind, int m, std::uint64_t seed) {
    if (m < 1) throw std::invalid_argument("draw_multipliers: m must be >= 1");
    Eigen::VectorXd xi(m);
    Rng rng(derive_seed(seed, 0xB007));
    if (kind == MultiplierKind::rademacher) {
        for (int i = 0; i < m; ++i) xi[i] = rng.u01() < 0.5 ? -1.0 : 1.0;
    } else {
        const double sqrt5 = std::sqrt(5.0);
        const double lo = -(sqrt5 - 1.0) / 2.0;
        const double hi = (sqrt5 + 1.0) / 2.0;
        const double p_lo = (sqrt5 + 1.0) / (2.0 * sqrt5);
        for (int i = 0; i < m; ++i) xi[i] = rng.u01() < p_lo ? lo : hi;
    }
    return xi;
}

struct WildBootResult {
    std::shared_ptr<Ecdf> ecdf;
    int n_dropped = 0;
    bool degenerate = false;   // all centered residuals were zero
};

/// Wild-bootstrap reference law for the refit t-statistic of feature j:
/// y* = X_S beta_hat + xi .* e0 with centered residuals e0, refit on the same
/// design, t* centered at beta_hat. Degenerate bootstrap draws (zero residual
/// variance) are dropped and counted; more than 1% dropped is an error.
inline WildBootResult wild_boot_t_ecdf(const RefitFit& fit, const Eigen::MatrixXd& x_inf,
                                       const Eigen::VectorXd& y_inf, int j, const WildBootConfig& cfg) {
    if (cfg.n_boot < 100) throw std::invalid_argument("wild_boot_t_ecdf: n_boot must be >= 100");
    const int pos = fit.support.position_of(j);
    const Eigen::MatrixXd xs = select_columns(x_inf, fit.support.coords);
    const Eigen::Index n = xs.rows();
    const int d = fit.support.size();
    const double nu = static_cast<double>(fit.dof);

    Eigen::VectorXd resid = y_inf - xs * fit.beta_hat;
    resid.array() -= resid.mean();

    WildBootResult out;
    if (resid.cwiseAbs().maxCoeff() <= 1e-14 * std::max(1.0, y_inf.cwiseAbs().maxCoeff())) {
        out.degenerate = true;
        out.ecdf = std::make_shared<Ecdf>(std::vector<double>{0.0});
        return out;
    }

    const double v_jj = fit.gram_inv(pos, pos);
    std::vector<double> stats;
    stats.reserve(static_cast<std::size_t>(cfg.n_boot));
    Eigen::VectorXd e_star(n), w(d), delta(d);
    for (int b = 0; b < cfg.n_boot; ++b) {
        const Eigen::VectorXd xi = draw_multipliers(cfg.multiplier, static_cast<int>(n),
                                                    derive_seed(cfg.seed, static_cast<std::uint64_t>(b)));
        e_star = xi.cwiseProduct(resid);
        w.noalias() = xs.transpose() * e_star;
        delta.noalias() = fit.gram_inv * w;
        // ||(I - H) e*||^2 = ||e*||^2 - w^T gram_inv w
        const double rss = std::max(0.0, e_star.squaredNorm() - w.dot(delta));
        const double sigma2_star = rss / nu;
        if (sigma2_star <= 0.0) { ++out.n_dropped; continue; }
        stats.push_back(delta[pos] / std::sqrt(sigma2_star * v_jj));
    }
    if (out.n_dropped > cfg.n_boot / 100)
        throw std::runtime_error("wild_boot_t_ecdf: more than 1% of bootstrap refits were degenerate");
    if (stats.empty()) throw std::runtime_error("wild_boot_t_ecdf: no usable bootstrap draws");
    out.ecdf = std::make_shared<Ecdf>(std::move(stats));
    return out;
}

/// Residuals of X_j and Y after regressing out X_{S \ {j}} plus an intercept.
/// An empty S \ {j} reduces to centering.
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> orthogonalize_coordinate(
    const Eigen::MatrixXd& x_inf, const Eigen::VectorXd& y_inf, const SelectedSupport& support, int j) {
    if (j < 0 || j >= x_inf.cols()) throw std::invalid_argument("orthogonalize_coordinate: bad coordinate");
    std::vector<int> others;
    for (int k : support.coords)
        if (k != j) others.push_back(k);

    Eigen::VectorXd xj = x_inf.col(j);
    xj.array() -= xj.mean();
    Eigen::VectorXd yc = y_inf;
    yc.array() -= yc.mean();
    if (others.empty()) return {xj, yc};

    Eigen::MatrixXd z = select_columns(x_inf, others);
    for (Eigen::Index c = 0; c < z.cols(); ++c) z.col(c).array() -= z.col(c).mean();
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(z);
    Eigen::VectorXd x_res = xj - z * qr.solve(xj);
    Eigen::VectorXd y_res = yc - z * qr.solve(yc);
    return {x_res, y_res};
}

/// Fold partition of inference indices for cross-fitting.
struct CrossFitPlan {
    std::vector<std::vector<int>> folds;

    int b_folds() const { return static_cast<int>(folds.size()); }

    static CrossFitPlan make(int n, int b_folds, std::uint64_t seed) {
        if (b_folds < 2) throw std::invalid_argument("CrossFitPlan: need at least 2 folds");
        if (n < b_folds) throw std::invalid_argument("CrossFitPlan: more folds than observations");
        std::vector<int> perm(static_cast<std::size_t>(n));
        std::iota(perm.begin(), perm.end(), 0);
        Rng rng(derive_seed(seed, 0xF01D));
        rng.shuffle(perm);
        CrossFitPlan plan;
        plan.folds.resize(static_cast<std::size_t>(b_folds));
        for (int i = 0; i < n; ++i) plan.folds[static_cast<std::size_t>(i % b_folds)].push_back(perm[i]);
        for (auto& f : plan.folds) std::sort(f.begin(), f.end());
        return plan;
    }
};

struct PlmData {
    Eigen::VectorXd y;
    Eigen::VectorXd d_treat;
    Eigen::MatrixXd x;

    void validate() const {
        if (y.size() != d_treat.size() || y.size() != x.rows())
            throw std::invalid_argument("PlmData: length mismatch");
    }
};

/// Cross-fitted nuisance predictions: for each observation, g_hat ~ E[Y|X] and
/// m_hat ~ E[D|X] are fit by lasso on the complementary folds only.
struct NuisanceFit {
    Eigen::VectorXd g_hat;
    Eigen::VectorXd m_hat;
};

inline NuisanceFit cross_fit_nuisance(const PlmData& plm, const CrossFitPlan& plan, const LassoConfig& cfg) {
    plm.validate();
    const int n = static_cast<int>(plm.y.size());
    NuisanceFit out;
    out.g_hat.resize(n);
    out.m_hat.resize(n);
    for (const auto& fold : plan.folds) {
        std::vector<bool> in_fold(static_cast<std::size_t>(n), false);
        for (int i : fold) in_fold[static_cast<std::size_t>(i)] = true;
        std::vector<int> train;
        train.reserve(static_cast<std::size_t>(n - static_cast<int>(fold.size())));
        for (int i = 0; i < n; ++i)
            if (!in_fold[static_cast<std::size_t>(i)]) train.push_back(i);

        const Eigen::MatrixXd x_train = subset_rows(plm.x, train);
        LassoConfig g_cfg = cfg, m_cfg = cfg;
        if (g_cfg.lambda < 0.0)
            g_cfg.lambda = default_lasso_lambda(subset_vector(plm.y, train),
                                                static_cast<int>(plm.x.cols()), static_cast<int>(train.size()));
        if (m_cfg.lambda < 0.0)
            m_cfg.lambda = default_lasso_lambda(subset_vector(plm.d_treat, train),
                                                static_cast<int>(plm.x.cols()), static_cast<int>(train.size()));
        const Eigen::VectorXd g_beta = lasso_fit(x_train, subset_vector(plm.y, train), g_cfg).beta;
        const Eigen::VectorXd m_beta = lasso_fit(x_train, subset_vector(plm.d_treat, train), m_cfg).beta;
        for (int i : fold) {
            out.g_hat[i] = plm.x.row(i).dot(g_beta);
            out.m_hat[i] = plm.x.row(i).dot(m_beta);
        }
    }
    return out;
}

/// Sufficient statistics of the orthogonal score psi_i(theta) = a_i (r_i - theta a_i)
/// with a = D - m_hat and r = Y - g_hat. The studentized statistic is
/// T(theta) = sqrt(n) * mean(psi) / sd(psi).
struct OrthScore {
    double n = 0.0;
    double mean_ar = 0.0, mean_aa = 0.0;
    double var_ar = 0.0, cov_ar_aa = 0.0, var_aa = 0.0;

    double root() const { return mean_ar / mean_aa; }

    double sigma(double theta) const {
        const double v = var_ar - 2.0 * theta * cov_ar_aa + theta * theta * var_aa;
        return std::sqrt(std::max(v, 0.0));
    }

    double tstat(double theta) const {
        const double s = sigma(theta);
        if (s <= 0.0) throw std::runtime_error("OrthScore: zero score variance");
        return std::sqrt(n) * (mean_ar - theta * mean_aa) / s;
    }
};

inline OrthScore make_orth_score(const Eigen::VectorXd& a, const Eigen::VectorXd& r) {
    if (a.size() != r.size() || a.size() < 3) throw std::invalid_argument("make_orth_score: bad inputs");
    const double n = static_cast<double>(a.size());
    const Eigen::ArrayXd ar = a.array() * r.array();
    const Eigen::ArrayXd aa = a.array() * a.array();
    OrthScore s;
    s.n = n;
    s.mean_ar = ar.mean();
    s.mean_aa = aa.mean();
    s.var_ar = (ar - s.mean_ar).square().sum() / (n - 1.0);
    s.var_aa = (aa - s.mean_aa).square().sum() / (n - 1.0);
    s.cov_ar_aa = ((ar - s.mean_ar) * (aa - s.mean_aa)).sum() / (n - 1.0);
    return s;
}

/// Studentized cross-fitted orthogonal score at theta.
inline double orth_score_stat(const PlmData& plm, const NuisanceFit& nuis, double theta) {
    const Eigen::VectorXd a = plm.d_treat - nuis.m_hat;
    const Eigen::VectorXd r = plm.y - nuis.g_hat;
    return make_orth_score(a, r).tstat(theta);
}

inline double orth_score_stat(const PlmData& plm, const CrossFitPlan& plan, double theta,
                              const LassoConfig& cfg) {
    return orth_score_stat(plm, cross_fit_nuisance(plm, plan, cfg), theta);
}

/// Multiplier bootstrap of the studentized score, using the centered
/// per-observation scores at the score root (reused across theta).
inline std::shared_ptr<Ecdf> orth_boot_ecdf(const OrthScore& score, const Eigen::VectorXd& a,
                                            const Eigen::VectorXd& r, const WildBootConfig& cfg) {
    const int n = static_cast<int>(a.size());
    const double theta_hat = score.root();
    Eigen::ArrayXd phi = a.array() * (r.array() - theta_hat * a.array());
    phi -= phi.mean();
    std::vector<double> stats;
    stats.reserve(static_cast<std::size_t>(cfg.n_boot));
    for (int b = 0; b < cfg.n_boot; ++b) {
        const Eigen::VectorXd xi = draw_multipliers(cfg.multiplier, n,
                                                    derive_seed(cfg.seed, static_cast<std::uint64_t>(b)));
        const Eigen::ArrayXd contrib = xi.array() * phi;
        const double mean = contrib.mean();
        const double sd = std::sqrt((contrib - mean).square().sum() / (n - 1.0));
        if (sd <= 0.0) continue;
        stats.push_back(std::sqrt(static_cast<double>(n)) * mean / sd);
    }
    if (stats.empty()) throw std::runtime_error("orth_boot_ecdf: degenerate bootstrap");
    return std::make_shared<Ecdf>(std::move(stats));
}

struct OrthContourResult {
    OrthScore score;
    std::shared_ptr<Ecdf> boot;
    PlausibilityContour contour;
    double theta_hat = 0.0;

    /// Effective standard error of the root, for bracketing level sets.
    double root_se() const { return score.sigma(theta_hat) / (std::sqrt(score.n) * score.mean_aa); }

    Interval level_set(double alpha, double stat_scale = 1.0) const;
};

/// Validified orthogonal-score contour: T(theta) against the multiplier
/// bootstrap reference law.
inline OrthContourResult orth_contour(const PlmData& plm, const CrossFitPlan& plan,
                                      const LassoConfig& lasso_cfg, const WildBootConfig& wb_cfg) {
    NuisanceFit nuis = cross_fit_nuisance(plm, plan, lasso_cfg);
    const Eigen::VectorXd a = plm.d_treat - nuis.m_hat;
    const Eigen::VectorXd r = plm.y - nuis.g_hat;
    OrthContourResult out;
    out.score = make_orth_score(a, r);
    if (out.score.mean_aa <= 0.0) throw std::runtime_error("orth_contour: degenerate treatment residual");
    out.theta_hat = out.score.root();
    out.boot = orth_boot_ecdf(out.score, a, r, wb_cfg);
    OrthScore score = out.score;
    out.contour.source = PivotSource::empirical_pivot(out.boot,
                                                      [score](double th) { return score.tstat(th); });
    out.contour.meta["method"] = "orth_crossfit";
    return out;
}

inline Interval OrthContourResult::level_set(double alpha, double stat_scale) const {
    PivotSource src = contour.source;
    src.stat_scale = stat_scale;
    const double se = std::abs(root_se());
    return level_set_interval(src, alpha, theta_hat - 80.0 * se, theta_hat + 80.0 * se);
}

struct DebiasedResult {
    Eigen::VectorXd b_debiased;
    Eigen::VectorXd se;
    Eigen::VectorXd z_stat;              // b / se, for testing beta_j = 0
    std::vector<Interval> intervals;
    double sigma_hat = 0.0;
    std::vector<int> failed_coords;      // nodewise regressions with degenerate tau^2
};

/// Desparsified-lasso baseline: b = beta_lasso + Theta X^T (y - X beta_lasso)/n
/// with Theta rows from nodewise lasso regressions; normal intervals
/// b_j +- z_{1-alpha/2} se_j with se_j = sigma_hat ||z_j|| / (z_j^T X_j).
inline DebiasedResult debiased_lasso_intervals(const Dataset& d, double alpha, const LassoConfig& cfg) {
    if (d.n() < 20) throw std::invalid_argument("debiased_lasso_intervals: need n >= 20");
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("debiased_lasso_intervals: alpha in (0,1)");
    const int n = static_cast<int>(d.n());
    const int p = static_cast<int>(d.p());

    LassoConfig main_cfg = cfg;
    if (main_cfg.lambda < 0.0) main_cfg.lambda = default_lasso_lambda(d.y, p, n);
    const Eigen::VectorXd beta_lasso = lasso_fit(d.x, d.y, main_cfg).beta;
    const Eigen::VectorXd resid = d.y - d.x * beta_lasso;

    DebiasedResult out;
    out.sigma_hat = std::sqrt(resid.squaredNorm() / n);
    out.b_debiased.resize(p);
    out.se.resize(p);
    out.z_stat.resize(p);
    out.intervals.resize(static_cast<std::size_t>(p));
    const double z_crit = normal_quantile(1.0 - alpha / 2.0);

    Eigen::MatrixXd x_minus(n, p - 1);
    for (int j = 0; j < p; ++j) {
        int c = 0;
        for (int k = 0; k < p; ++k)
            if (k != j) x_minus.col(c++) = d.x.col(k);
        LassoConfig node_cfg = cfg;
        node_cfg.lambda = default_lasso_lambda(d.x.col(j), p, n);
        const Eigen::VectorXd gamma = p > 1 ? lasso_fit(x_minus, d.x.col(j), node_cfg).beta
                                            : Eigen::VectorXd();
        const Eigen::VectorXd z_j = p > 1 ? (d.x.col(j) - x_minus * gamma).eval() : d.x.col(j).eval();
        const double tau2_n = z_j.dot(d.x.col(j));   // n * tau_j^2
        if (tau2_n <= 1e-12 * d.x.col(j).squaredNorm() || z_j.norm() <= 0.0) {
            out.failed_coords.push_back(j);
            out.b_debiased[j] = beta_lasso[j];
            out.se[j] = std::numeric_limits<double>::infinity();
            out.z_stat[j] = 0.0;
            out.intervals[static_cast<std::size_t>(j)] =
                Interval{-std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(), false};
            continue;
        }
        out.b_debiased[j] = beta_lasso[j] + z_j.dot(resid) / tau2_n;
        out.se[j] = out.sigma_hat * z_j.norm() / tau2_n;
        out.z_stat[j] = out.b_debiased[j] / out.se[j];
        out.intervals[static_cast<std::size_t>(j)] =
            Interval{out.b_debiased[j] - z_crit * out.se[j], out.b_debiased[j] + z_crit * out.se[j], false};
    }
    return out;
}

} // namespace rspim
