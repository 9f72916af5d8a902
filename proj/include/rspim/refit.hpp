#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rspim/core.hpp"
#include "rspim/numerics.hpp"

namespace rspim {

/// Linear contrast theta_S = L^T beta_S with hypothesized value theta0.
struct ContrastSpec {
    Eigen::MatrixXd l_matrix;   // |S| x q, full column rank
    Eigen::VectorXd theta0;     // length q
};

inline Eigen::MatrixXd select_columns(const Eigen::MatrixXd& x, const std::vector<int>& coords) {
    Eigen::MatrixXd out(x.rows(), static_cast<Eigen::Index>(coords.size()));
    for (std::size_t k = 0; k < coords.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = x.col(coords[k]);
    return out;
}

/// OLS refit on the inference subsample restricted to the selected support.
/// Uses a column-pivoted QR; near-singular designs raise an error naming the
/// offending columns rather than returning unstable estimates.
inline RefitFit ols_refit(const Eigen::MatrixXd& x_inf, const Eigen::VectorXd& y_inf,
                          const SelectedSupport& support) {
    const int d = support.size();
    const Eigen::Index n_inf = x_inf.rows();
    if (d < 1) throw std::invalid_argument("ols_refit: empty support");
    if (n_inf <= d) throw std::invalid_argument("ols_refit: need n_inf > |support|");
    for (int j : support.coords)
        if (j < 0 || j >= x_inf.cols()) throw std::invalid_argument("ols_refit: support index out of range");

    Eigen::MatrixXd xs = select_columns(x_inf, support.coords);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xs);
    const Eigen::MatrixXd r_full = qr.matrixR().topLeftCorner(d, d).triangularView<Eigen::Upper>();
    const double r_max = r_full.diagonal().cwiseAbs().maxCoeff();
    std::vector<int> bad;
    for (int k = 0; k < d; ++k)
        if (std::abs(r_full(k, k)) < 1e-10 * r_max)
            bad.push_back(support.coords[qr.colsPermutation().indices()[k]]);
    if (r_max <= 0.0 || !bad.empty()) {
        std::string msg = "ols_refit: singular design, offending columns:";
        if (bad.empty()) msg += " all";
        for (int j : bad) msg += " " + std::to_string(j);
        throw std::runtime_error(msg);
    }

    RefitFit fit;
    fit.support = support;
    fit.beta_hat = qr.solve(y_inf);
    fit.dof = static_cast<int>(n_inf) - d;
    const double rss = (y_inf - xs * fit.beta_hat).squaredNorm();
    fit.sigma2_hat = rss / fit.dof;

    Eigen::MatrixXd r_inv = r_full.triangularView<Eigen::Upper>()
                                .solve(Eigen::MatrixXd::Identity(d, d));
    Eigen::MatrixXd inv_permuted = r_inv * r_inv.transpose();
    const auto& perm = qr.colsPermutation();
    fit.gram_inv = perm * inv_permuted * perm.transpose();
    fit.gram_inv = 0.5 * (fit.gram_inv + fit.gram_inv.transpose()).eval();
    return fit;
}

/// t_j = (beta_hat_j - beta_j0) / (sigma_hat sqrt(v_jj)); t_nu under the truth,
/// conditional on split and support. j is a feature index inside the support.
/// A zero residual variance degenerates to 0 or +-infinity.
inline double t_pivot(const RefitFit& fit, int j, double beta_j0) {
    const int pos = fit.support.position_of(j);
    const double num = fit.beta_hat[pos] - beta_j0;
    const double se = fit.se(pos);
    if (se == 0.0) {
        if (num == 0.0) return 0.0;
        return num > 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
    }
    return num / se;
}

/// F = (L^T b - theta0)^T [L^T gram_inv L]^{-1} (L^T b - theta0) / (q sigma2).
inline double f_pivot(const RefitFit& fit, const ContrastSpec& c) {
    const int d = fit.support.size();
    const Eigen::Index q = c.l_matrix.cols();
    if (c.l_matrix.rows() != d) throw std::invalid_argument("f_pivot: contrast row count must equal |S|");
    if (q < 1 || q > d) throw std::invalid_argument("f_pivot: need 1 <= q <= |S|");
    if (c.theta0.size() != q) throw std::invalid_argument("f_pivot: theta0 length mismatch");

    Eigen::VectorXd delta = c.l_matrix.transpose() * fit.beta_hat - c.theta0;
    Eigen::MatrixXd mid = c.l_matrix.transpose() * fit.gram_inv * c.l_matrix;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(mid);
    if (!lu.isInvertible()) throw std::runtime_error("f_pivot: singular L^T gram_inv L");
    const double quad = delta.dot(lu.solve(delta));
    if (fit.sigma2_hat == 0.0)
        return quad == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return std::max(0.0, quad / (static_cast<double>(q) * fit.sigma2_hat));
}

/// Symmetric t interval beta_hat_j +- t_{1-alpha/2,nu} sigma_hat sqrt(v_jj).
inline std::pair<double, double> classical_t_interval(const RefitFit& fit, int j, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("classical_t_interval: alpha in (0,1)");
    const int pos = fit.support.position_of(j);
    const double half = t_quantile(1.0 - alpha / 2.0, fit.dof) * fit.se(pos);
    return {fit.beta_hat[pos] - half, fit.beta_hat[pos] + half};
}

/// Profile-likelihood contour 1 - chi2_cdf(-2 log R, d) with
/// -2 log R = n_inf log(RSS(theta) / RSS(beta_hat)), sigma profiled out.
inline std::vector<double> wilks_contour(const RefitFit& fit, const Eigen::MatrixXd& x_inf,
                                         const Eigen::VectorXd& y_inf,
                                         const std::vector<Eigen::VectorXd>& theta_grid) {
    const int d = fit.support.size();
    Eigen::MatrixXd xs = select_columns(x_inf, fit.support.coords);
    const double rss_hat = (y_inf - xs * fit.beta_hat).squaredNorm();
    const double n = static_cast<double>(x_inf.rows());
    std::vector<double> out;
    out.reserve(theta_grid.size());
    for (const auto& theta : theta_grid) {
        if (theta.size() != d) throw std::invalid_argument("wilks_contour: theta dimension must equal |S|");
        const double rss = (y_inf - xs * theta).squaredNorm();
        if (rss_hat <= 0.0) {
            out.push_back(rss <= 0.0 ? 1.0 : 0.0);
            continue;
        }
        const double lr = std::max(0.0, n * std::log(rss / rss_hat));
        out.push_back(1.0 - chi2_cdf(lr, d));
    }
    return out;
}

} // namespace rspim
