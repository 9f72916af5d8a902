#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rspim/rng.hpp"

namespace rspim {

/// Raised when a requested result does not exist (e.g. a coordinate that was
/// never selected). The CLI maps it to its own exit code.
struct NotAvailableError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class NoiseKind { gaussian, heteroskedastic_x1, student_t };

/// Design matrix plus response. Immutable by convention; operations copy.
struct Dataset {
    Eigen::MatrixXd x;                        // n x p
    Eigen::VectorXd y;                        // length n
    std::vector<std::string> feature_names;   // empty or length p

    Eigen::Index n() const { return x.rows(); }
    Eigen::Index p() const { return x.cols(); }

    void validate() const {
        if (x.rows() != y.size()) throw std::invalid_argument("Dataset: row count of x must equal length of y");
        if (x.cols() < 1) throw std::invalid_argument("Dataset: p must be >= 1");
        if (x.rows() < 2) throw std::invalid_argument("Dataset: n must be >= 2");
        if (!x.allFinite() || !y.allFinite()) throw std::invalid_argument("Dataset: entries must be finite");
        if (!feature_names.empty() && static_cast<Eigen::Index>(feature_names.size()) != x.cols())
            throw std::invalid_argument("Dataset: feature_names length must equal p");
    }
};

/// Disjoint selection/inference partition of observation indices, with seed provenance.
struct SplitPlan {
    std::vector<int> sel_idx;   // sorted
    std::vector<int> inf_idx;   // sorted
    std::uint64_t seed = 0;
    bool carved = false;        // downstream guarantees are approximate when set

    int n_sel() const { return static_cast<int>(sel_idx.size()); }
    int n_inf() const { return static_cast<int>(inf_idx.size()); }
};

/// Ordered set of selected feature indices with selector metadata.
struct SelectedSupport {
    std::vector<int> coords;    // sorted, distinct, each in [0, p)
    std::string selector_id;
    int k_max = 0;

    int size() const { return static_cast<int>(coords.size()); }
    bool contains(int j) const { return std::binary_search(coords.begin(), coords.end(), j); }
    /// Position of feature j inside coords; throws if absent.
    int position_of(int j) const {
        auto it = std::lower_bound(coords.begin(), coords.end(), j);
        if (it == coords.end() || *it != j)
            throw std::invalid_argument("SelectedSupport: coordinate " + std::to_string(j) + " not in support");
        return static_cast<int>(it - coords.begin());
    }
};

/// OLS refit on the inference subsample restricted to a support.
struct RefitFit {
    Eigen::VectorXd beta_hat;     // over support coords, in coords order
    double sigma2_hat = 0.0;
    Eigen::MatrixXd gram_inv;     // (X_S^T X_S)^{-1}
    int dof = 0;                  // nu = n_inf - d
    SelectedSupport support;

    /// Standard error of the coefficient at support position `pos`.
    double se(int pos) const { return std::sqrt(sigma2_hat * gram_inv(pos, pos)); }
};

/// Ground truth for synthetic experiments.
struct TrueModel {
    Eigen::VectorXd beta0;
    double sigma = 1.0;
    NoiseKind noise_kind = NoiseKind::gaussian;
    int t_df = 4;                // used when noise_kind == student_t

    std::vector<int> support0() const {
        std::vector<int> s;
        for (Eigen::Index j = 0; j < beta0.size(); ++j)
            if (beta0[j] != 0.0) s.push_back(static_cast<int>(j));
        return s;
    }
};

/// Uniform random partition into selection and inference subsets, reproducible
/// from the seed. floor(frac_inf * n) rows go to inference.
inline SplitPlan make_split(int n, double frac_inf, std::uint64_t seed) {
    if (n < 4) throw std::invalid_argument("make_split: n must be >= 4");
    if (!(frac_inf > 0.0 && frac_inf < 1.0)) throw std::invalid_argument("make_split: frac_inf must lie in (0,1)");
    const int n_inf = static_cast<int>(std::floor(frac_inf * n));
    if (n_inf < 2 || n - n_inf < 2)
        throw std::invalid_argument("make_split: both parts need at least 2 observations");

    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(derive_seed(seed, 0xA11C));
    rng.shuffle(perm);

    SplitPlan plan;
    plan.inf_idx.assign(perm.begin(), perm.begin() + n_inf);
    plan.sel_idx.assign(perm.begin() + n_inf, perm.end());
    std::sort(plan.inf_idx.begin(), plan.inf_idx.end());
    std::sort(plan.sel_idx.begin(), plan.sel_idx.end());
    plan.seed = seed;
    plan.carved = false;
    return plan;
}

/// Rows extracted in the given order; columns and feature names unchanged.
inline Dataset subset_dataset(const Dataset& d, const std::vector<int>& idx) {
    std::vector<bool> seen(static_cast<std::size_t>(d.n()), false);
    for (int i : idx) {
        if (i < 0 || i >= d.n()) throw std::invalid_argument("subset_dataset: index out of range");
        if (seen[static_cast<std::size_t>(i)]) throw std::invalid_argument("subset_dataset: duplicate index");
        seen[static_cast<std::size_t>(i)] = true;
    }
    Dataset out;
    out.x.resize(static_cast<Eigen::Index>(idx.size()), d.p());
    out.y.resize(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t r = 0; r < idx.size(); ++r) {
        out.x.row(static_cast<Eigen::Index>(r)) = d.x.row(idx[r]);
        out.y[static_cast<Eigen::Index>(r)] = d.y[idx[r]];
    }
    out.feature_names = d.feature_names;
    return out;
}

inline Eigen::MatrixXd subset_rows(const Eigen::MatrixXd& x, const std::vector<int>& idx) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), x.cols());
    for (std::size_t r = 0; r < idx.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = x.row(idx[r]);
    return out;
}

inline Eigen::VectorXd subset_vector(const Eigen::VectorXd& y, const std::vector<int>& idx) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t r = 0; r < idx.size(); ++r) out[static_cast<Eigen::Index>(r)] = y[idx[r]];
    return out;
}

/// Default selected-set size cap, floor(0.5 * n_inf); keeps refits well-posed.
inline int default_k_max(int n_inf) { return static_cast<int>(std::floor(0.5 * n_inf)); }

} // namespace rspim
