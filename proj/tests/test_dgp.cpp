#include <catch2/catch_amalgamated.hpp>

#include "rspim/dgp.hpp"

using namespace rspim;

namespace {

double sample_corr(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    const double ma = a.mean(), mb = b.mean();
    const Eigen::ArrayXd da = a.array() - ma, db = b.array() - mb;
    return (da * db).sum() / std::sqrt(da.square().sum() * db.square().sum());
}

} // namespace

TEST_CASE("gen_design column correlations match the target") {
    const int n = 100000;
    Eigen::MatrixXd x0 = gen_design(n, 2, 0.0, CorrKind::ar1, 7);
    CHECK(std::abs(sample_corr(x0.col(0), x0.col(1))) < 0.02);

    Eigen::MatrixXd x = gen_design(n, 3, 0.5, CorrKind::ar1, 8);
    CHECK_THAT(sample_corr(x.col(0), x.col(1)), Catch::Matchers::WithinAbs(0.5, 0.02));
    CHECK_THAT(sample_corr(x.col(0), x.col(2)), Catch::Matchers::WithinAbs(0.25, 0.02));

    Eigen::MatrixXd e = gen_design(n, 3, 0.4, CorrKind::equicorrelated, 9);
    CHECK_THAT(sample_corr(e.col(0), e.col(1)), Catch::Matchers::WithinAbs(0.4, 0.02));
    CHECK_THAT(sample_corr(e.col(0), e.col(2)), Catch::Matchers::WithinAbs(0.4, 0.02));
    CHECK_THAT(e.col(1).squaredNorm() / n, Catch::Matchers::WithinAbs(1.0, 0.03));
}

TEST_CASE("gen_design determinism and equicorrelated domain") {
    Eigen::MatrixXd a = gen_design(20, 5, 0.3, CorrKind::ar1, 42);
    Eigen::MatrixXd b = gen_design(20, 5, 0.3, CorrKind::ar1, 42);
    CHECK(a == b);
    CHECK_THROWS_AS(gen_design(10, 5, -0.3, CorrKind::equicorrelated, 1), std::invalid_argument);
    CHECK_NOTHROW(gen_design(10, 5, -0.2, CorrKind::equicorrelated, 1));
}

TEST_CASE("gen_response noise regimes") {
    const int n = 10000;
    Eigen::MatrixXd x = gen_design(n, 3, 0.0, CorrKind::ar1, 11);
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(3);

    Eigen::VectorXd y = gen_response(x, beta, 1.0, NoiseKind::gaussian, 4, 5);
    const double var = (y.array() - y.mean()).square().sum() / (n - 1);
    CHECK((var > 0.9 && var < 1.1));

    beta << 1, -2, 0.5;
    Eigen::VectorXd exact = gen_response(x, beta, 0.0, NoiseKind::gaussian, 4, 5);
    CHECK((exact - x * beta).cwiseAbs().maxCoeff() == 0.0);

    // Heteroskedastic residual spread tracks the first column.
    Eigen::VectorXd yh = gen_response(x, beta, 1.0, NoiseKind::heteroskedastic_x1, 4, 6);
    Eigen::VectorXd resid2 = (yh - x * beta).array().square();
    Eigen::VectorXd x1sq = x.col(0).array().square();
    CHECK(sample_corr(resid2, x1sq) > 0.1);
    const double avg_var = resid2.mean();
    CHECK((avg_var > 0.9 && avg_var < 1.1));

    // Heavy-tailed noise normalized to unit variance.
    Eigen::VectorXd yt = gen_response(x, beta, 1.0, NoiseKind::student_t, 4, 7);
    const double vt = (yt - x * beta).array().square().mean();
    CHECK((vt > 0.8 && vt < 1.25));
    CHECK_THROWS_AS(gen_response(x, beta, 1.0, NoiseKind::student_t, 2, 7), std::invalid_argument);
}

TEST_CASE("make_beta patterns") {
    CHECK(make_beta(10, 0, 3.0).isZero());
    Eigen::VectorXd b = make_beta(4, 4, 2.0);
    for (int j = 0; j < 4; ++j) CHECK_THAT(b[j], Catch::Matchers::WithinAbs(1.0, 1e-15));

    // Weak-signal preset: each active entry 0.4
    Eigen::VectorXd e = make_beta(200, 5, 0.4 * std::sqrt(5.0));
    for (int j = 0; j < 5; ++j) CHECK_THAT(e[j], Catch::Matchers::WithinAbs(0.4, 1e-12));
    CHECK(e.tail(195).isZero());

    for (int s : {1, 3, 7})
        CHECK_THAT(make_beta(20, s, 2.5).norm(), Catch::Matchers::WithinAbs(2.5, 1e-12));

    Eigen::VectorXd custom(3);
    custom << 1, 0, -1;
    CHECK(make_beta(3, 0, 0.0, BetaPattern::custom, custom) == custom);
    CHECK_THROWS_AS(make_beta(4, 0, 0.0, BetaPattern::custom, custom), std::invalid_argument);
}

TEST_CASE("gen_plm shapes and signal") {
    PlmDesignConfig cfg;
    cfg.n = 500;
    cfg.p = 20;
    cfg.s = 3;
    cfg.theta0 = 2.0;
    PlmSample s = gen_plm(cfg, 99);
    CHECK(s.y.size() == 500);
    CHECK(s.x.cols() == 20);
    // Treatment residual has roughly unit variance around m0.
    const double v = (s.d_treat - s.m0_values).array().square().mean();
    CHECK((v > 0.8 && v < 1.2));
    // Partialling out the true nuisances recovers theta0 approximately.
    Eigen::VectorXd a = s.d_treat - s.m0_values;
    Eigen::VectorXd r = s.y - s.g0_values;
    const double theta_hat = a.dot(r) / a.squaredNorm();
    CHECK_THAT(theta_hat, Catch::Matchers::WithinAbs(2.0, 0.2));
}
