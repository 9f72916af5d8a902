#include <catch2/catch_amalgamated.hpp>

#include "rspim/dgp.hpp"
#include "rspim/selectors.hpp"

using namespace rspim;

namespace {

// Assertable form of the solver's KKT contract on the raw objective.
double kkt_residual(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& beta,
                    double lambda) {
    const double n = static_cast<double>(x.rows());
    const Eigen::VectorXd r = y - x * beta;
    double worst = 0.0;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        const double g = x.col(j).dot(r) / n;
        const double v = beta[j] == 0.0 ? std::max(0.0, std::abs(g) - lambda)
                                        : std::abs(g - lambda * (beta[j] > 0 ? 1.0 : -1.0));
        worst = std::max(worst, v);
    }
    return worst;
}

Eigen::MatrixXd orthonormal_design(int n, int p, std::uint64_t seed) {
    Eigen::MatrixXd g = gen_design(n, p, 0.0, CorrKind::ar1, seed);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, p);
    return std::sqrt(static_cast<double>(n)) * q;   // X^T X = n I
}

} // namespace

TEST_CASE("lasso with zero penalty recovers OLS") {
    Eigen::MatrixXd x = gen_design(60, 5, 0.2, CorrKind::ar1, 3);
    Eigen::VectorXd beta(5);
    beta << 1, -0.5, 0, 2, 0.3;
    Eigen::VectorXd y = gen_response(x, beta, 0.5, NoiseKind::gaussian, 4, 4);
    LassoConfig cfg;
    cfg.lambda = 0.0;
    cfg.standardize = false;
    cfg.max_iter = 20000;
    cfg.tol = 1e-9;
    LassoFit fit = lasso_fit(x, y, cfg);
    Eigen::VectorXd ols = x.colPivHouseholderQr().solve(y);
    CHECK((fit.beta - ols).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("lasso on orthonormal columns equals soft thresholding") {
    const int n = 64, p = 8;
    Eigen::MatrixXd x = orthonormal_design(n, p, 17);
    Eigen::VectorXd beta = make_beta(p, 3, 3.0);
    Eigen::VectorXd y = gen_response(x, beta, 1.0, NoiseKind::gaussian, 4, 21);
    const double lambda = 0.35;
    LassoConfig cfg;
    cfg.lambda = lambda;
    cfg.standardize = false;
    LassoFit fit = lasso_fit(x, y, cfg);
    for (int j = 0; j < p; ++j) {
        const double z = x.col(j).dot(y) / n;
        CHECK_THAT(fit.beta[j], Catch::Matchers::WithinAbs(soft_threshold(z, lambda), 1e-10));
    }
}

TEST_CASE("lasso above the null threshold returns zero") {
    Eigen::MatrixXd x = gen_design(40, 12, 0.3, CorrKind::ar1, 5);
    Eigen::VectorXd y = gen_response(x, make_beta(12, 2, 1.5), 1.0, NoiseKind::gaussian, 4, 6);
    double lmax = 0.0;
    for (int j = 0; j < 12; ++j) lmax = std::max(lmax, std::abs(x.col(j).dot(y)) / 40.0);
    LassoConfig cfg;
    cfg.lambda = lmax * 1.0001;
    cfg.standardize = false;
    CHECK(lasso_fit(x, y, cfg).beta.isZero());
}

TEST_CASE("lasso satisfies KKT conditions on random instances") {
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
        const int n = 30 + static_cast<int>(seed % 3) * 10;
        const int p = 20 + static_cast<int>(seed % 5) * 15;
        Eigen::MatrixXd x = gen_design(n, p, 0.4, CorrKind::ar1, seed);
        Eigen::VectorXd y = gen_response(x, make_beta(p, 3, 2.0), 1.0, NoiseKind::gaussian, 4, seed + 100);
        LassoConfig cfg;
        cfg.lambda = 0.2;
        cfg.standardize = false;
        LassoFit fit = lasso_fit(x, y, cfg);
        CHECK(fit.converged);
        CHECK(kkt_residual(x, y, fit.beta, cfg.lambda) <= 1e-6);
    }
}

TEST_CASE("lasso objective is nonincreasing across sweeps") {
    Eigen::MatrixXd x = gen_design(50, 40, 0.5, CorrKind::ar1, 9);
    Eigen::VectorXd y = gen_response(x, make_beta(40, 4, 2.0), 1.0, NoiseKind::gaussian, 4, 10);
    LassoConfig cfg;
    cfg.lambda = 0.15;
    cfg.standardize = false;
    std::vector<double> trace;
    lasso_fit(x, y, cfg, &trace);
    REQUIRE(trace.size() >= 2);
    for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] <= trace[i - 1] + 1e-12);
}

TEST_CASE("standardized lasso maps coefficients back") {
    Eigen::MatrixXd x = gen_design(80, 10, 0.2, CorrKind::ar1, 12);
    x.col(3) *= 10.0;   // wildly different column scales
    Eigen::VectorXd beta = make_beta(10, 2, 2.0);
    Eigen::VectorXd y = gen_response(x, beta, 0.3, NoiseKind::gaussian, 4, 13);
    LassoConfig cfg;
    cfg.lambda = 0.05;
    LassoFit fit = lasso_fit(x, y, cfg);
    CHECK(fit.converged);
    CHECK((fit.beta.head(2) - beta.head(2)).cwiseAbs().maxCoeff() < 0.3);
}

TEST_CASE("stability selection keeps frequent features and caps the support") {
    // Strong signal on the first two coordinates; frequency thresholding keeps them.
    Eigen::MatrixXd x = gen_design(80, 30, 0.0, CorrKind::ar1, 31);
    Eigen::VectorXd y = gen_response(x, make_beta(30, 2, 4.0), 1.0, NoiseKind::gaussian, 4, 32);
    StabilityConfig cfg;
    cfg.seed = 5;
    SelectedSupport s = stability_select(x, y, cfg, 10);
    CHECK(s.contains(0));
    CHECK(s.contains(1));
    CHECK(s.size() <= 10);
    CHECK(s.selector_id == "lasso_stability");
    CHECK(std::is_sorted(s.coords.begin(), s.coords.end()));
}

TEST_CASE("stability selection is permutation equivariant") {
    const int n = 60, p = 12;
    Eigen::MatrixXd x = gen_design(n, p, 0.0, CorrKind::ar1, 77);
    Eigen::VectorXd y = gen_response(x, make_beta(p, 2, 4.0), 1.0, NoiseKind::gaussian, 4, 78);
    StabilityConfig cfg;
    cfg.seed = 9;
    SelectedSupport base = stability_select(x, y, cfg, p);

    // Swap two columns; the selected set relabels accordingly.
    std::vector<int> perm(p);
    std::iota(perm.begin(), perm.end(), 0);
    std::swap(perm[0], perm[5]);
    Eigen::MatrixXd xp(n, p);
    for (int j = 0; j < p; ++j) xp.col(j) = x.col(perm[j]);
    SelectedSupport moved = stability_select(xp, y, cfg, p);
    std::vector<int> relabeled;
    for (int j : moved.coords) relabeled.push_back(perm[j]);
    std::sort(relabeled.begin(), relabeled.end());
    CHECK(relabeled == base.coords);
}

TEST_CASE("screening on a strong-signal design") {
    // n=200, p=50, s=5, |beta_j| = 2, sigma = 1, rho = 0: the true support is
    // recovered in nearly every replication.
    int contain = 0;
    const int reps = 100;
    for (int m = 0; m < reps; ++m) {
        DesignConfig dc{200, 50, 0.0, CorrKind::ar1, 5, 2.0 * std::sqrt(5.0)};
        dc.seed = 1000 + m;
        auto [d, truth] = gen_dataset(dc);
        StabilityConfig cfg;
        cfg.seed = derive_seed(77, m);
        SelectedSupport s = stability_select(d.x.topRows(100), d.y.head(100), cfg, 25);
        bool ok = true;
        for (int j = 0; j < 5; ++j)
            if (!s.contains(j)) ok = false;
        if (ok) ++contain;
    }
    CHECK(contain >= 95);
}

TEST_CASE("pfer_bound formula") {
    CHECK_THAT(pfer_bound(5, 0.6, 100, 5), Catch::Matchers::WithinAbs(25.0 / (0.2 * 95.0), 1e-12));
    CHECK(pfer_bound(0, 0.6, 100, 5) == 0.0);
    double prev = 0.0;
    for (int q = 1; q <= 10; ++q) {
        const double b = pfer_bound(q, 0.7, 200, 10);
        CHECK(b > prev);
        prev = b;
    }
    double prev_thr = 1e100;
    for (double thr = 0.55; thr < 0.95; thr += 0.05) {
        const double b = pfer_bound(5, thr, 200, 10);
        CHECK(b < prev_thr);
        prev_thr = b;
    }
    CHECK_THROWS_AS(pfer_bound(5, 0.5, 100, 5), std::invalid_argument);
    CHECK_THROWS_AS(pfer_bound(5, 0.6, 5, 5), std::invalid_argument);
}

TEST_CASE("random selector") {
    SelectedSupport full = random_selector(8, 8, 4);
    std::vector<int> expect(8);
    std::iota(expect.begin(), expect.end(), 0);
    CHECK(full.coords == expect);
    CHECK_THROWS_AS(random_selector(8, 0, 4), std::invalid_argument);
    CHECK_THROWS_AS(random_selector(8, 9, 4), std::invalid_argument);
    CHECK(random_selector(100, 5, 1).coords == random_selector(100, 5, 1).coords);
    CHECK(random_selector(100, 5, 1).coords != random_selector(100, 5, 2).coords);
}

TEST_CASE("cap_support") {
    SelectedSupport s;
    s.coords = {1, 2, 3};
    CHECK(cap_support(s, 5).coords == s.coords);

    SelectedSupport big;
    for (int j = 0; j < 10; ++j) big.coords.push_back(j);
    std::vector<double> scores{0.1, 0.9, 0.5, 0.9, 0.2, 0.8, 0.3, 0.1, 0.0, 0.4};
    SelectedSupport capped = cap_support(big, 3, scores);
    CHECK(capped.coords == std::vector<int>{1, 3, 5});   // two 0.9s (tie by index), then 0.8
    SelectedSupport by_index = cap_support(big, 4);
    CHECK(by_index.coords == std::vector<int>{0, 1, 2, 3});
}
