#include <catch2/catch_amalgamated.hpp>

#include "rspim/dgp.hpp"
#include "rspim/robust_orth.hpp"

using namespace rspim;

namespace {

SelectedSupport support_of(std::vector<int> coords) {
    SelectedSupport s;
    s.coords = std::move(coords);
    s.k_max = static_cast<int>(s.coords.size());
    return s;
}

} // namespace

TEST_CASE("multiplier moments") {
    const int m = 40000;
    Eigen::VectorXd rad = draw_multipliers(MultiplierKind::rademacher, m, 1);
    CHECK(std::abs(rad.mean()) < 3.0 / std::sqrt(m));
    CHECK_THAT(rad.array().square().mean(), Catch::Matchers::WithinAbs(1.0, 1e-12));

    Eigen::VectorXd mam = draw_multipliers(MultiplierKind::mammen, m, 2);
    CHECK(std::abs(mam.mean()) < 3.0 / std::sqrt(m));
    CHECK_THAT(mam.array().square().mean(), Catch::Matchers::WithinAbs(1.0, 5.0 / std::sqrt(m)));
    CHECK_THAT(mam.array().cube().mean(), Catch::Matchers::WithinAbs(1.0, 9.0 / std::sqrt(m)));

    CHECK(draw_multipliers(MultiplierKind::mammen, 50, 3) == draw_multipliers(MultiplierKind::mammen, 50, 3));
}

TEST_CASE("wild bootstrap t law approximates the exact t law under Gaussian errors") {
    const int n = 120, d = 2;
    Eigen::MatrixXd x = gen_design(n, d, 0.2, CorrKind::ar1, 21);
    Eigen::VectorXd beta(d);
    beta << 1.0, -0.5;
    Eigen::VectorXd y = gen_response(x, beta, 1.0, NoiseKind::gaussian, 4, 22);
    RefitFit fit = ols_refit(x, y, support_of({0, 1}));

    WildBootConfig cfg;
    cfg.n_boot = 2000;
    cfg.seed = 303;
    WildBootResult boot = wild_boot_t_ecdf(fit, x, y, 0, cfg);
    CHECK(boot.n_dropped == 0);
    CHECK_FALSE(boot.degenerate);

    double ks = 0.0;
    const auto& s = boot.ecdf->sorted_samples;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double f = t_cdf(s[i], fit.dof);
        ks = std::max(ks, std::abs(f - static_cast<double>(i + 1) / s.size()));
        ks = std::max(ks, std::abs(f - static_cast<double>(i) / s.size()));
    }
    CHECK(ks < 0.05);
}

TEST_CASE("wild bootstrap flags zero residuals") {
    Eigen::MatrixXd x(6, 1);
    x << 1, 2, 3, 4, 5, 6;
    Eigen::VectorXd y = 2.0 * x.col(0);
    RefitFit fit = ols_refit(x, y, support_of({0}));
    WildBootConfig cfg;
    cfg.n_boot = 200;
    WildBootResult boot = wild_boot_t_ecdf(fit, x, y, 0, cfg);
    CHECK(boot.degenerate);
    CHECK(boot.ecdf->sorted_samples == std::vector<double>{0.0});
}

TEST_CASE("orthogonalize_coordinate") {
    const int n = 50;
    Eigen::MatrixXd x = gen_design(n, 6, 0.0, CorrKind::ar1, 31);
    Eigen::VectorXd y = gen_response(x, make_beta(6, 2, 2.0), 1.0, NoiseKind::gaussian, 4, 32);

    // Empty S \ {j}: centered originals.
    auto [xj_c, y_c] = orthogonalize_coordinate(x, y, support_of({2}), 2);
    CHECK_THAT(xj_c.mean(), Catch::Matchers::WithinAbs(0.0, 1e-12));
    CHECK((xj_c - (x.col(2).array() - x.col(2).mean()).matrix()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK_THAT(y_c.mean(), Catch::Matchers::WithinAbs(0.0, 1e-12));

    // Orthogonal regressor (after centering) passes through.
    Eigen::MatrixXd xo = x;
    Eigen::VectorXd c0 = x.col(0).array() - x.col(0).mean();
    Eigen::VectorXd c1 = x.col(1).array() - x.col(1).mean();
    xo.col(1) = (c1 - c0 * (c0.dot(c1) / c0.squaredNorm())).eval();
    auto [x1_res, y1_res] = orthogonalize_coordinate(xo, y, support_of({0, 1}), 1);
    CHECK((x1_res - (xo.col(1).array() - xo.col(1).mean()).matrix()).cwiseAbs().maxCoeff() < 1e-10);

    // Score root equals the partialled-out least-squares coefficient.
    auto [xt, yt] = orthogonalize_coordinate(x, y, support_of({0, 1, 2, 3}), 2);
    const double beta_fw = xt.dot(yt) / xt.squaredNorm();
    CHECK_THAT(xt.dot(yt - xt * beta_fw), Catch::Matchers::WithinAbs(0.0, 1e-8));

    // Frisch-Waugh: equals the full OLS coefficient with an intercept.
    Eigen::MatrixXd full(n, 5);
    full.col(0).setOnes();
    full.col(1) = x.col(0);
    full.col(2) = x.col(1);
    full.col(3) = x.col(2);
    full.col(4) = x.col(3);
    Eigen::VectorXd coef = full.colPivHouseholderQr().solve(y);
    CHECK_THAT(beta_fw, Catch::Matchers::WithinAbs(coef[3], 1e-8));
}

TEST_CASE("cross-fit plan partitions and leaks nothing across folds") {
    CrossFitPlan plan = CrossFitPlan::make(53, 5, 8);
    std::vector<int> all;
    for (const auto& f : plan.folds) {
        CHECK_FALSE(f.empty());
        all.insert(all.end(), f.begin(), f.end());
    }
    std::sort(all.begin(), all.end());
    std::vector<int> expect(53);
    std::iota(expect.begin(), expect.end(), 0);
    CHECK(all == expect);

    // Canary: corrupting fold b's responses must not change fold b's own
    // cross-fitted predictions.
    PlmDesignConfig cfg;
    cfg.n = 100;
    cfg.p = 10;
    cfg.s = 2;
    PlmSample s = gen_plm(cfg, 12);
    PlmData plm{s.y, s.d_treat, s.x};
    CrossFitPlan cf = CrossFitPlan::make(100, 4, 77);
    LassoConfig lcfg;
    NuisanceFit base = cross_fit_nuisance(plm, cf, lcfg);

    PlmData tampered = plm;
    for (int i : cf.folds[2]) tampered.y[i] += 1000.0;
    NuisanceFit poked = cross_fit_nuisance(tampered, cf, lcfg);
    for (int i : cf.folds[2]) CHECK(poked.g_hat[i] == base.g_hat[i]);
    // Other folds see the corruption through their training halves.
    double moved = 0.0;
    for (int i : cf.folds[0]) moved = std::max(moved, std::abs(poked.g_hat[i] - base.g_hat[i]));
    CHECK(moved > 0.0);
}

TEST_CASE("orthogonal score arithmetic and monotonicity") {
    // psi = (D - m)(Y - g - theta (D - m)): v = 2, residual 0.5 -> psi = 1.
    const double v = 2.0, resid = 0.5, theta = 0.25;
    const double y = 3.0, g = y - resid - theta * v;
    CHECK_THAT((v) * (y - g - theta * v), Catch::Matchers::WithinAbs(1.0, 1e-15));

    PlmDesignConfig cfg;
    cfg.n = 200;
    cfg.p = 8;
    cfg.s = 2;
    PlmSample s = gen_plm(cfg, 5);
    OrthScore score = make_orth_score(s.d_treat - s.m0_values, s.y - s.g0_values);
    double prev = std::numeric_limits<double>::infinity();
    for (double th = score.root() - 1.0; th <= score.root() + 1.0; th += 0.05) {
        const double t = score.tstat(th);
        CHECK(t <= prev + 1e-12);
        prev = t;
    }
    CHECK_THAT(score.tstat(score.root()), Catch::Matchers::WithinAbs(0.0, 1e-10));
}

TEST_CASE("oracle-nuisance orthogonal score is standard normal at the truth") {
    PlmDesignConfig cfg;
    cfg.n = 400;
    cfg.p = 50;
    cfg.s = 5;
    std::vector<double> pit;
    for (int m = 0; m < 1000; ++m) {
        PlmSample s = gen_plm(cfg, 100 + m);
        PlmData plm{s.y, s.d_treat, s.x};
        NuisanceFit oracle{s.g0_values + s.m0_values * s.theta0, s.m0_values};
        // g here is E[Y|X] = g0 + theta0 m0 (partialling-out form).
        pit.push_back(normal_cdf(orth_score_stat(plm, oracle, s.theta0)));
    }
    CHECK(ks_distance(pit) < 0.05);
}

TEST_CASE("orth contour is centered near the score root") {
    PlmDesignConfig cfg;
    cfg.n = 300;
    cfg.p = 20;
    cfg.s = 3;
    PlmSample s = gen_plm(cfg, 9);
    PlmData plm{s.y, s.d_treat, s.x};
    CrossFitPlan plan = CrossFitPlan::make(cfg.n, 5, 10);
    WildBootConfig wb;
    wb.n_boot = 500;
    wb.seed = 11;
    OrthContourResult res = orth_contour(plm, plan, LassoConfig{}, wb);
    const double peak = res.contour.evaluate(res.theta_hat);
    CHECK(peak > 0.9);
    CHECK(res.contour.evaluate(res.theta_hat + 10.0 * res.root_se()) < 0.2);
    Interval iv = res.level_set(0.1);
    CHECK(iv.contains(res.theta_hat));
    CHECK(iv.width() < 20.0 * res.root_se());
    CHECK_THAT(res.theta_hat, Catch::Matchers::WithinAbs(s.theta0, 10.0 * res.root_se()));
}

TEST_CASE("debiased lasso on an orthonormal-ish design recovers OLS") {
    const int n = 200, p = 10;
    Eigen::MatrixXd g = gen_design(n, p, 0.0, CorrKind::ar1, 61);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd x = std::sqrt(static_cast<double>(n)) *
                        (qr.householderQ() * Eigen::MatrixXd::Identity(n, p));
    Eigen::VectorXd beta = make_beta(p, 3, 2.0);
    Eigen::VectorXd y = gen_response(x, beta, 0.5, NoiseKind::gaussian, 4, 62);

    Dataset d{x, y, {}};
    LassoConfig cfg;
    cfg.lambda = 0.01;
    DebiasedResult res = debiased_lasso_intervals(d, 0.1, cfg);
    Eigen::VectorXd ols = x.colPivHouseholderQr().solve(y);
    CHECK((res.b_debiased - ols).cwiseAbs().maxCoeff() < 1e-3);
    CHECK(res.failed_coords.empty());
    for (int j = 0; j < p; ++j) {
        CHECK(res.se[j] > 0.0);
        CHECK(res.intervals[j].contains(res.b_debiased[j]));
    }
}
