#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "rspim/core.hpp"
#include "rspim/rng.hpp"

namespace rspim {

struct LassoConfig {
    double lambda = -1.0;      // < 0 selects the default rule
    int max_iter = 1000;       // full-sweep budget
    double tol = 1e-7;         // KKT tolerance
    bool standardize = true;   // unit-variance columns inside the solver
};

struct LassoFit {
    Eigen::VectorXd beta;
    int sweeps = 0;
    bool converged = true;
    double lambda = 0.0;       // penalty actually used
};

/// Default penalty: 0.5 * sd(y) * sqrt(2 log p / n_ref). The 0.5 constant keeps
/// screening effective when sd(y) is inflated by strong signal.
inline double default_lasso_lambda(const Eigen::VectorXd& y, int p, int n_ref) {
    const double n = static_cast<double>(y.size());
    const double mean = y.mean();
    const double sd = std::sqrt((y.array() - mean).square().sum() / std::max(1.0, n - 1.0));
    return 0.5 * sd * std::sqrt(2.0 * std::log(std::max(2, p)) / static_cast<double>(n_ref));
}

inline double soft_threshold(double z, double t) {
    if (z > t) return z - t;
    if (z < -t) return z + t;
    return 0.0;
}

namespace detail {

// Max KKT violation for (1/2n)||y - X b||^2 + lambda ||b||_1 given gradient g_j = x_j^T r / n.
inline double kkt_violation(const Eigen::MatrixXd& x, const Eigen::VectorXd& r,
                            const Eigen::VectorXd& beta, double lambda) {
    const double n = static_cast<double>(x.rows());
    double worst = 0.0;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        const double g = x.col(j).dot(r) / n;
        const double v = beta[j] == 0.0 ? std::max(0.0, std::abs(g) - lambda)
                                        : std::abs(g - lambda * (beta[j] > 0 ? 1.0 : -1.0));
        worst = std::max(worst, v);
    }
    return worst;
}

} // namespace detail

/// Cyclic coordinate descent for (1/2n)||y - X beta||^2 + lambda ||beta||_1.
/// Converges when every KKT residual is within cfg.tol. An optional trace
/// collects the objective after each full sweep.
inline LassoFit lasso_fit(const Eigen::MatrixXd& x_in, const Eigen::VectorXd& y, const LassoConfig& cfg,
                          std::vector<double>* objective_trace = nullptr) {
    if (x_in.rows() != y.size()) throw std::invalid_argument("lasso_fit: dimension mismatch");
    if (cfg.tol <= 0.0) throw std::invalid_argument("lasso_fit: tol must be positive");
    const Eigen::Index n = x_in.rows(), p = x_in.cols();
    const double nd = static_cast<double>(n);
    const double lambda = cfg.lambda >= 0.0 ? cfg.lambda
                                            : default_lasso_lambda(y, static_cast<int>(p), static_cast<int>(n));
    if (lambda < 0.0) throw std::invalid_argument("lasso_fit: lambda must be nonnegative");

    Eigen::VectorXd scale = Eigen::VectorXd::Ones(p);
    Eigen::MatrixXd x = x_in;
    if (cfg.standardize) {
        for (Eigen::Index j = 0; j < p; ++j) {
            const double mean = x.col(j).mean();
            const double sd = std::sqrt((x.col(j).array() - mean).square().sum() / std::max(1.0, nd - 1.0));
            if (sd > 1e-12) { scale[j] = sd; x.col(j) /= sd; }
        }
    }

    Eigen::VectorXd col_sq(p);
    for (Eigen::Index j = 0; j < p; ++j) col_sq[j] = x.col(j).squaredNorm() / nd;

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd r = y;
    std::vector<Eigen::Index> active;

    auto update_coord = [&](Eigen::Index j) -> double {
        if (col_sq[j] <= 0.0) return 0.0;
        const double z = x.col(j).dot(r) / nd + col_sq[j] * beta[j];
        const double bj = soft_threshold(z, lambda) / col_sq[j];
        const double delta = bj - beta[j];
        if (delta != 0.0) {
            r -= x.col(j) * delta;
            beta[j] = bj;
        }
        return std::abs(delta);
    };

    LassoFit fit;
    fit.lambda = lambda;
    bool converged = false;
    int sweeps = 0;
    while (sweeps < cfg.max_iter) {
        for (Eigen::Index j = 0; j < p; ++j) update_coord(j);
        ++sweeps;
        if (objective_trace)
            objective_trace->push_back(0.5 * r.squaredNorm() / nd + lambda * beta.cwiseAbs().sum());

        active.clear();
        for (Eigen::Index j = 0; j < p; ++j)
            if (beta[j] != 0.0) active.push_back(j);
        while (sweeps < cfg.max_iter) {
            double max_delta = 0.0;
            for (Eigen::Index j : active) max_delta = std::max(max_delta, update_coord(j));
            ++sweeps;
            if (max_delta <= 0.1 * cfg.tol) break;
        }

        if (detail::kkt_violation(x, r, beta, lambda) <= cfg.tol) { converged = true; break; }
    }

    fit.converged = converged;
    fit.sweeps = sweeps;
    fit.beta = beta.cwiseQuotient(scale);
    return fit;
}

struct StabilityConfig {
    int n_subsamples = 50;     // half-samples of the selection subsample
    double threshold = 0.6;    // selection-frequency threshold, in (0.5, 1)
    int q_cap = -1;            // per-subsample cap; < 0 -> min(ceil(1.5 sqrt(n_sel)), p)
    LassoConfig lasso{};
    std::uint64_t seed = 0;

    void validate() const {
        if (n_subsamples < 1) throw std::invalid_argument("StabilityConfig: n_subsamples must be >= 1");
        if (!(threshold > 0.5 && threshold < 1.0))
            throw std::invalid_argument("StabilityConfig: threshold must lie in (0.5, 1)");
    }
};

/// Truncation by a selector-provided ranking (higher score first, ties by
/// smaller index); empty scores rank by index.
inline SelectedSupport cap_support(const SelectedSupport& s, int k_max,
                                   const std::vector<double>& scores = {}) {
    SelectedSupport out = s;
    out.k_max = k_max;
    if (s.size() <= k_max) return out;
    if (!scores.empty() && scores.size() != s.coords.size())
        throw std::invalid_argument("cap_support: scores length mismatch");
    std::vector<int> order(s.coords.size());
    std::iota(order.begin(), order.end(), 0);
    if (!scores.empty())
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
            if (scores[a] != scores[b]) return scores[a] > scores[b];
            return s.coords[a] < s.coords[b];
        });
    order.resize(static_cast<std::size_t>(k_max));
    out.coords.clear();
    for (int idx : order) out.coords.push_back(s.coords[idx]);
    std::sort(out.coords.begin(), out.coords.end());
    return out;
}

/// Stability selection on the selection subsample: repeated half-sample lasso
/// fits with per-subsample top-q truncation by |coefficient|; features whose
/// selection frequency reaches the threshold are kept, then capped at k_max by
/// frequency (ties by smaller index).
inline SelectedSupport stability_select(const Eigen::MatrixXd& x_sel, const Eigen::VectorXd& y_sel,
                                        const StabilityConfig& cfg, int k_max) {
    cfg.validate();
    const int n_sel = static_cast<int>(x_sel.rows());
    const int p = static_cast<int>(x_sel.cols());
    if (n_sel < 4) throw std::invalid_argument("stability_select: selection sample too small");

    LassoConfig lasso = cfg.lasso;
    if (lasso.lambda < 0.0) lasso.lambda = default_lasso_lambda(y_sel, p, n_sel);
    const int q = cfg.q_cap >= 0 ? std::min(cfg.q_cap, p)
                                 : std::min(static_cast<int>(std::ceil(1.5 * std::sqrt(n_sel))), p);
    const int half = n_sel / 2;

    std::vector<int> counts(static_cast<std::size_t>(p), 0);
    std::vector<int> rows(static_cast<std::size_t>(n_sel));
    std::iota(rows.begin(), rows.end(), 0);
    for (int b = 0; b < cfg.n_subsamples; ++b) {
        Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(b)));
        std::vector<int> perm = rows;
        rng.shuffle(perm);
        perm.resize(static_cast<std::size_t>(half));
        LassoFit fit = lasso_fit(subset_rows(x_sel, perm), subset_vector(y_sel, perm), lasso);

        std::vector<std::pair<double, int>> nz;
        for (int j = 0; j < p; ++j)
            if (fit.beta[j] != 0.0) nz.emplace_back(std::abs(fit.beta[j]), j);
        if (static_cast<int>(nz.size()) > q) {
            std::stable_sort(nz.begin(), nz.end(), [](const auto& a, const auto& b) {
                if (a.first != b.first) return a.first > b.first;
                return a.second < b.second;
            });
            nz.resize(static_cast<std::size_t>(q));
        }
        for (const auto& [mag, j] : nz) ++counts[static_cast<std::size_t>(j)];
    }

    SelectedSupport out;
    out.selector_id = "lasso_stability";
    out.k_max = k_max;
    std::vector<double> freqs;
    for (int j = 0; j < p; ++j) {
        const double freq = static_cast<double>(counts[static_cast<std::size_t>(j)]) / cfg.n_subsamples;
        if (freq >= cfg.threshold - 1e-12) {
            out.coords.push_back(j);
            freqs.push_back(freq);
        }
    }
    return cap_support(out, k_max, freqs);
}

/// Expected count of falsely selected noise variables: q^2 / ((2 pi_thr - 1)(p - s)).
inline double pfer_bound(int q, double pi_thr, int p, int s) {
    if (q < 0) throw std::invalid_argument("pfer_bound: q must be nonnegative");
    if (q == 0) return 0.0;
    if (p <= s) throw std::invalid_argument("pfer_bound: need p > s");
    if (!(pi_thr > 0.5)) throw std::invalid_argument("pfer_bound: need pi_thr > 0.5");
    return static_cast<double>(q) * q / ((2.0 * pi_thr - 1.0) * (p - s));
}

/// Uniform random k-subset of features; depends only on the seed, so it is a
/// degenerate selection-data-only selector for selector-uniform validity checks.
inline SelectedSupport random_selector(int p, int k, std::uint64_t seed) {
    if (k <= 0) throw std::invalid_argument("random_selector: k must be positive (empty support not refittable)");
    if (k > p) throw std::invalid_argument("random_selector: k exceeds feature count");
    std::vector<int> perm(static_cast<std::size_t>(p));
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(derive_seed(seed, 0x7A9D));
    rng.shuffle(perm);
    perm.resize(static_cast<std::size_t>(k));
    std::sort(perm.begin(), perm.end());
    SelectedSupport out;
    out.coords = std::move(perm);
    out.selector_id = "random";
    out.k_max = k;
    return out;
}

enum class SelectorKind { lasso_stability, lasso, random_k, oracle };

/// Configuration for the selection step; selectors consume only the selection
/// subsample and a seed.
struct SelectorConfig {
    SelectorKind kind = SelectorKind::lasso_stability;
    StabilityConfig stability{};
    LassoConfig lasso{};
    int random_k = 0;                 // <= 0 falls back to caller-provided default
    std::vector<int> oracle_support;  // fixed support for the oracle selector
};

inline SelectedSupport run_selector(const Eigen::MatrixXd& x_sel, const Eigen::VectorXd& y_sel,
                                    const SelectorConfig& cfg, int k_max, std::uint64_t seed) {
    const int p = static_cast<int>(x_sel.cols());
    switch (cfg.kind) {
        case SelectorKind::lasso_stability: {
            StabilityConfig sc = cfg.stability;
            sc.seed = derive_seed(seed, 0x57AB);
            return stability_select(x_sel, y_sel, sc, k_max);
        }
        case SelectorKind::lasso: {
            LassoConfig lc = cfg.lasso;
            if (lc.lambda < 0.0)
                lc.lambda = default_lasso_lambda(y_sel, p, static_cast<int>(x_sel.rows()));
            LassoFit fit = lasso_fit(x_sel, y_sel, lc);
            SelectedSupport out;
            out.selector_id = "lasso";
            out.k_max = k_max;
            std::vector<double> mags;
            for (int j = 0; j < p; ++j)
                if (fit.beta[j] != 0.0) { out.coords.push_back(j); mags.push_back(std::abs(fit.beta[j])); }
            return cap_support(out, k_max, mags);
        }
        case SelectorKind::random_k: {
            const int k = std::min(cfg.random_k, k_max);
            return random_selector(p, k, derive_seed(seed, 0xA4D0));
        }
        case SelectorKind::oracle: {
            SelectedSupport out;
            out.coords = cfg.oracle_support;
            std::sort(out.coords.begin(), out.coords.end());
            out.selector_id = "oracle";
            out.k_max = k_max;
            return cap_support(out, k_max);
        }
    }
    throw std::logic_error("run_selector: unknown selector kind");
}

} // namespace rspim
