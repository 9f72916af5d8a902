#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "rspim/numerics.hpp"
#include "rspim/rng.hpp"

using namespace rspim;

namespace {

// Independent oracle: adaptive Simpson quadrature of the Student-t density.
double t_density(double x, double nu) {
    const double logc = std::lgamma((nu + 1.0) / 2.0) - std::lgamma(nu / 2.0) -
                        0.5 * std::log(nu * M_PI);
    return std::exp(logc - (nu + 1.0) / 2.0 * std::log1p(x * x / nu));
}

double simpson(double a, double b, double fa, double fm, double fb, double nu, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = t_density(lm, nu), frm = t_density(rm, nu);
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if (depth <= 0 || std::abs(left + right - whole) < 15.0 * tol)
        return left + right + (left + right - whole) / 15.0;
    return simpson(a, m, fa, flm, fm, nu, tol / 2.0, depth - 1) +
           simpson(m, b, fm, frm, fb, nu, tol / 2.0, depth - 1);
}

double t_cdf_quadrature(double x, double nu) {
    const double a = std::min(0.0, x), b = std::max(0.0, x);
    const double integral = simpson(a, b, t_density(a, nu), t_density(0.5 * (a + b), nu),
                                    t_density(b, nu), nu, 1e-13, 40);
    return x >= 0.0 ? 0.5 + integral : 0.5 - integral;
}

} // namespace

TEST_CASE("t_cdf symmetry and closed forms") {
    for (double nu : {0.7, 1.0, 3.0, 10.0, 250.0, 1e6}) CHECK(t_cdf(0.0, nu) == 0.5);
    // Cauchy closed form 1/2 + atan(x)/pi
    for (double x : {-3.0, -1.0, 0.3, 1.0, 7.5})
        CHECK_THAT(t_cdf(x, 1.0), Catch::Matchers::WithinAbs(0.5 + std::atan(x) / M_PI, 1e-12));
    CHECK_THAT(t_cdf(1.0, 1.0), Catch::Matchers::WithinAbs(0.75, 1e-12));
    CHECK_THAT(t_cdf(1.812461, 10.0), Catch::Matchers::WithinAbs(0.95, 1e-6));
    CHECK_THROWS_AS(t_cdf(1.0, 0.0), std::invalid_argument);
}

TEST_CASE("t_cdf matches quadrature oracle") {
    for (double nu : {1.0, 2.5, 10.0, 117.0})
        for (double x : {-6.0, -2.2, -0.4, 0.0, 0.9, 1.812461, 3.3, 8.0})
            CHECK_THAT(t_cdf(x, nu), Catch::Matchers::WithinAbs(t_cdf_quadrature(x, nu), 1e-10));
}

TEST_CASE("t_quantile inverts t_cdf") {
    for (double nu : {1.0, 5.0, 30.0, 1000.0}) {
        CHECK(t_quantile(0.5, nu) == 0.0);
        for (double u = 0.01; u < 0.995; u += 0.01)
            CHECK_THAT(t_cdf(t_quantile(u, nu), nu), Catch::Matchers::WithinAbs(u, 1e-8));
    }
    // Cauchy closed form: quantile(u) = tan(pi (u - 1/2))
    CHECK_THAT(t_quantile(0.75, 1.0), Catch::Matchers::WithinAbs(1.0, 1e-10));
    CHECK_THAT(t_quantile(0.95, 1.0), Catch::Matchers::WithinAbs(std::tan(0.45 * M_PI), 1e-9));
    CHECK_THROWS_AS(t_quantile(0.0, 5.0), std::invalid_argument);
    CHECK_THROWS_AS(t_quantile(1.0, 5.0), std::invalid_argument);
}

TEST_CASE("f_cdf closed forms and t^2 identity") {
    CHECK(f_cdf(0.0, 3, 7) == 0.0);
    // F(2,2) has CDF x/(1+x)
    CHECK_THAT(f_cdf(1.0, 2, 2), Catch::Matchers::WithinAbs(0.5, 1e-12));
    for (double x : {0.25, 2.0, 9.0})
        CHECK_THAT(f_cdf(x, 2, 2), Catch::Matchers::WithinAbs(x / (1.0 + x), 1e-12));
    for (int nu : {1, 4, 29, 200})
        for (double t : {0.1, 0.77, 1.5, 2.4, 5.0})
            CHECK_THAT(f_cdf(t * t, 1, nu),
                       Catch::Matchers::WithinAbs(2.0 * t_cdf(t, nu) - 1.0, 1e-9));
    CHECK_THROWS_AS(f_cdf(1.0, 0, 5), std::invalid_argument);
    CHECK_THROWS_AS(f_cdf(-0.5, 1, 5), std::invalid_argument);
}

TEST_CASE("chi2_cdf closed forms") {
    CHECK(chi2_cdf(0.0, 4) == 0.0);
    for (double x : {0.3, 1.0, 4.2, 11.0})
        CHECK_THAT(chi2_cdf(x, 2), Catch::Matchers::WithinAbs(1.0 - std::exp(-x / 2.0), 1e-10));
    CHECK_THAT(chi2_cdf(3.841459, 1), Catch::Matchers::WithinAbs(0.95, 1e-6));
    // chi2_1 quantile at 0.95 equals the squared normal quantile at 0.975
    const double z = normal_quantile(0.975);
    CHECK_THAT(chi2_cdf(z * z, 1), Catch::Matchers::WithinAbs(0.95, 1e-12));
}

TEST_CASE("CDFs are nondecreasing with limits 0 and 1") {
    auto check_monotone = [](auto f) {
        double prev = -0.1;
        for (double x = -30.0; x <= 30.0; x += 0.5) {
            const double v = f(x);
            CHECK(v >= prev - 1e-15);
            CHECK((v >= 0.0 && v <= 1.0));
            prev = v;
        }
    };
    check_monotone([](double x) { return t_cdf(x, 7.0); });
    check_monotone([](double x) { return x < 0 ? 0.0 : f_cdf(x, 3, 9); });
    check_monotone([](double x) { return x < 0 ? 0.0 : chi2_cdf(x, 5); });
    CHECK(t_cdf(-40.0, 3.0) < 1e-4);
    CHECK(t_cdf(40.0, 3.0) > 1.0 - 1e-4);
}

TEST_CASE("ecdf evaluation") {
    Ecdf e(std::vector<double>{3.0, 1.0, 2.0});
    CHECK(ecdf_eval(e, 0.5) == 0.0);
    CHECK(ecdf_eval(e, 3.0) == 1.0);
    CHECK_THAT(ecdf_eval(e, 2.0), Catch::Matchers::WithinAbs(2.0 / 3.0, 1e-15));
    CHECK_THAT(ecdf_midrank(e, 2.0), Catch::Matchers::WithinAbs(0.5, 1e-15));
    CHECK(ecdf_midrank_quantile(e, 0.5) == 2.0);
    CHECK_THROWS_AS(Ecdf(std::vector<double>{}), std::invalid_argument);
}

TEST_CASE("ks_distance") {
    CHECK_THAT(ks_distance(std::vector<double>(50, 0.5)), Catch::Matchers::WithinAbs(0.5, 1e-15));
    for (int m : {10, 100, 1000}) {
        std::vector<double> grid;
        for (int k = 1; k <= m; ++k) grid.push_back(static_cast<double>(k) / (m + 1));
        CHECK(ks_distance(grid) <= 1.0 / (m + 1) + 1.0 / m + 1e-12);
    }
    Rng rng(20240801);
    std::vector<double> u(10000);
    for (auto& v : u) v = rng.u01();
    CHECK(ks_distance(u) < 0.025);
    CHECK_THROWS_AS(ks_distance({}), std::invalid_argument);
}

TEST_CASE("rng determinism and seed derivation") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.u01() == b.u01());
    CHECK(derive_seed(1, 2) != derive_seed(1, 3));
    CHECK(derive_seed(1, 2) != derive_seed(2, 2));
    Rng c(7);
    for (int i = 0; i < 1000; ++i) {
        const double v = c.u01();
        CHECK((v > 0.0 && v < 1.0));
    }
}
