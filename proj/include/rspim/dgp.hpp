#pragma once

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

#include "rspim/core.hpp"
#include "rspim/rng.hpp"

namespace rspim {

enum class CorrKind { ar1, equicorrelated };
enum class BetaPattern { equal_magnitude, custom };

/// Synthetic-design configuration: correlated Gaussian rows, sparse signal,
/// one of three noise regimes.
struct DesignConfig {
    int n = 100;
    int p = 500;
    double rho = 0.0;
    CorrKind corr_kind = CorrKind::ar1;
    int s = 10;
    double snr_beta_norm = 5.0;              // target ||beta||_2
    BetaPattern beta_pattern = BetaPattern::equal_magnitude;
    Eigen::VectorXd custom_beta;             // used when beta_pattern == custom
    NoiseKind noise_kind = NoiseKind::gaussian;
    int t_df = 4;
    double sigma = 1.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (n < 4) throw std::invalid_argument("DesignConfig: n must be >= 4");
        if (p < 1) throw std::invalid_argument("DesignConfig: p must be >= 1");
        if (s > p || s < 0) throw std::invalid_argument("DesignConfig: need 0 <= s <= p");
        if (!(rho >= -1.0 && rho < 1.0)) throw std::invalid_argument("DesignConfig: rho must lie in [-1,1)");
        if (!(sigma >= 0.0)) throw std::invalid_argument("DesignConfig: sigma must be nonnegative");
    }
};

/// Rows i.i.d. N(0, Sigma) with Sigma_{jk} = rho^|j-k| (ar1) or
/// Sigma_{jk} = rho + (1-rho) 1{j=k} (equicorrelated). Deterministic in seed.
inline Eigen::MatrixXd gen_design(int n, int p, double rho, CorrKind kind, std::uint64_t seed) {
    if (n < 1 || p < 1) throw std::invalid_argument("gen_design: need n >= 1, p >= 1");
    if (kind == CorrKind::equicorrelated && p > 1 && !(rho > -1.0 / (p - 1)))
        throw std::invalid_argument("gen_design: equicorrelated requires rho > -1/(p-1)");
    Eigen::MatrixXd x(n, p);
    Rng rng(derive_seed(seed, 0xD5));
    if (kind == CorrKind::ar1) {
        const double innov = std::sqrt(std::max(0.0, 1.0 - rho * rho));
        for (int i = 0; i < n; ++i) {
            double prev = rng.normal();
            x(i, 0) = prev;
            for (int j = 1; j < p; ++j) {
                prev = rho * prev + innov * rng.normal();
                x(i, j) = prev;
            }
        }
    } else {
        // x = sqrt(1-rho) z + gamma (1^T z) 1 has covariance (1-rho) I + rho 11^T.
        const double a = std::sqrt(1.0 - rho);
        const double gamma = (std::sqrt(1.0 + (p - 1) * rho) - a) / p;
        Eigen::VectorXd z(p);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < p; ++j) z[j] = rng.normal();
            const double shift = gamma * z.sum();
            for (int j = 0; j < p; ++j) x(i, j) = a * z[j] + shift;
        }
    }
    return x;
}

inline Eigen::MatrixXd gen_design(const DesignConfig& cfg) {
    cfg.validate();
    return gen_design(cfg.n, cfg.p, cfg.rho, cfg.corr_kind, cfg.seed);
}

/// y = X beta0 + eps. Heteroskedastic noise is proportional to the first column,
/// rescaled so the average variance equals sigma^2; Student-t noise is scaled to
/// variance sigma^2 (requires df > 2).
inline Eigen::VectorXd gen_response(const Eigen::MatrixXd& x, const Eigen::VectorXd& beta0,
                                    double sigma, NoiseKind kind, int t_df, std::uint64_t seed) {
    if (x.cols() != beta0.size()) throw std::invalid_argument("gen_response: dimension mismatch");
    const Eigen::Index n = x.rows();
    Eigen::VectorXd y = x * beta0;
    if (sigma == 0.0) return y;
    Rng rng(derive_seed(seed, 0xE7));
    switch (kind) {
        case NoiseKind::gaussian:
            for (Eigen::Index i = 0; i < n; ++i) y[i] += sigma * rng.normal();
            break;
        case NoiseKind::heteroskedastic_x1: {
            const double m2 = x.col(0).squaredNorm() / static_cast<double>(n);
            if (m2 <= 0.0) throw std::invalid_argument("gen_response: first column is identically zero");
            const double scale = sigma / std::sqrt(m2);
            for (Eigen::Index i = 0; i < n; ++i) y[i] += scale * x(i, 0) * rng.normal();
            break;
        }
        case NoiseKind::student_t: {
            if (t_df <= 2) throw std::invalid_argument("gen_response: student_t noise requires df > 2");
            const double scale = sigma / std::sqrt(static_cast<double>(t_df) / (t_df - 2));
            for (Eigen::Index i = 0; i < n; ++i) {
                double z = rng.normal();
                double chi2 = 0.0;
                for (int k = 0; k < t_df; ++k) { double g = rng.normal(); chi2 += g * g; }
                y[i] += scale * z / std::sqrt(chi2 / t_df);
            }
            break;
        }
    }
    return y;
}

/// Sparse coefficient vector: first s coordinates nonzero with equal magnitude
/// snr_beta_norm/sqrt(s), rest zero. Custom patterns pass through after validation.
inline Eigen::VectorXd make_beta(int p, int s, double snr_beta_norm,
                                 BetaPattern pattern = BetaPattern::equal_magnitude,
                                 const Eigen::VectorXd& custom = Eigen::VectorXd()) {
    if (pattern == BetaPattern::custom) {
        if (custom.size() != p) throw std::invalid_argument("make_beta: custom pattern length mismatch");
        if (!custom.allFinite()) throw std::invalid_argument("make_beta: custom pattern must be finite");
        return custom;
    }
    if (s > p || s < 0) throw std::invalid_argument("make_beta: need 0 <= s <= p");
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    if (s > 0) beta.head(s).setConstant(snr_beta_norm / std::sqrt(static_cast<double>(s)));
    return beta;
}

/// Dataset plus ground truth for one replication.
inline std::pair<Dataset, TrueModel> gen_dataset(const DesignConfig& cfg) {
    cfg.validate();
    TrueModel truth;
    truth.beta0 = make_beta(cfg.p, cfg.s, cfg.snr_beta_norm, cfg.beta_pattern, cfg.custom_beta);
    truth.sigma = cfg.sigma;
    truth.noise_kind = cfg.noise_kind;
    truth.t_df = cfg.t_df;
    Dataset d;
    d.x = gen_design(cfg.n, cfg.p, cfg.rho, cfg.corr_kind, derive_seed(cfg.seed, 1));
    d.y = gen_response(d.x, truth.beta0, cfg.sigma, cfg.noise_kind, cfg.t_df, derive_seed(cfg.seed, 2));
    return {std::move(d), std::move(truth)};
}

/// Partially linear sample: Y = D theta0 + X gamma0 + eps, D = X delta0 + v.
struct PlmDesignConfig {
    int n = 400;
    int p = 50;
    int s = 5;
    double theta0 = 1.0;
    double rho = 0.0;
    CorrKind corr_kind = CorrKind::ar1;
    double g_norm = 1.0;           // ||gamma0||_2
    double m_norm = 1.0;           // ||delta0||_2
    double sigma = 1.0;            // sd of eps (up to noise kind scaling)
    double v_sigma = 1.0;          // sd of the treatment residual v
    NoiseKind noise_kind = NoiseKind::gaussian;
    int t_df = 4;
};

struct PlmSample {
    Eigen::VectorXd y;
    Eigen::VectorXd d_treat;
    Eigen::MatrixXd x;
    double theta0 = 0.0;
    Eigen::VectorXd g0_values;     // g0(X_i) per observation
    Eigen::VectorXd m0_values;     // m0(X_i) per observation
};

inline PlmSample gen_plm(const PlmDesignConfig& cfg, std::uint64_t seed) {
    if (cfg.n < 8 || cfg.p < 1 || cfg.s > cfg.p) throw std::invalid_argument("gen_plm: bad dimensions");
    PlmSample out;
    out.x = gen_design(cfg.n, cfg.p, cfg.rho, cfg.corr_kind, derive_seed(seed, 11));
    Eigen::VectorXd gamma0 = make_beta(cfg.p, cfg.s, cfg.g_norm);
    Eigen::VectorXd delta0 = make_beta(cfg.p, cfg.s, cfg.m_norm);
    out.m0_values = out.x * delta0;
    out.g0_values = out.x * gamma0;
    Rng v_rng(derive_seed(seed, 12));
    out.d_treat = out.m0_values;
    for (int i = 0; i < cfg.n; ++i) out.d_treat[i] += cfg.v_sigma * v_rng.normal();
    Eigen::VectorXd eps = gen_response(out.x, Eigen::VectorXd::Zero(cfg.p),
                                       cfg.sigma, cfg.noise_kind, cfg.t_df, derive_seed(seed, 13));
    out.y = out.d_treat * cfg.theta0 + out.g0_values + eps;
    out.theta0 = cfg.theta0;
    return out;
}

} // namespace rspim
