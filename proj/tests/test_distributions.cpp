#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "fracif/distributions.hpp"

using namespace fracif;
namespace d = fracif::dist;

// Reference values computed independently with scipy 1.x and frozen.

TEST_CASE("incomplete beta against frozen references") {
    struct Case {
        double a, b, x, want;
    };
    const Case cases[] = {
        {0.5, 0.5, 0.25, 3.3333333333333337e-01}, {2.0, 3.0, 0.4, 5.2479999999999993e-01},
        {10.0, 0.5, 0.9, 1.5164090963470994e-01}, {0.1, 0.2, 0.7, 7.1632698299586117e-01},
        {50.0, 60.0, 0.45, 4.6423529143060444e-01}, {5.0, 5.0, 0.5, 5.0000000000000000e-01},
    };
    for (const auto& c : cases)
        CHECK(d::ibeta(c.a, c.b, c.x) == Catch::Approx(c.want).epsilon(1e-12));
    CHECK(d::ibeta(2, 3, 0.0) == 0.0);
    CHECK(d::ibeta(2, 3, 1.0) == 1.0);
    CHECK_THROWS_AS(d::ibeta(0.0, 1.0, 0.5), std::invalid_argument);
}

TEST_CASE("incomplete gamma against frozen references") {
    struct Case {
        double a, x, want;
    };
    const Case cases[] = {
        {0.5, 0.25, 5.2049987781304663e-01}, {3.0, 2.5, 4.5618688411667035e-01},
        {10.0, 12.0, 7.5760783832948753e-01}, {0.1, 0.01, 6.6262125995447962e-01},
        {100.0, 95.0, 3.1735681116980008e-01},
    };
    for (const auto& c : cases) {
        CHECK(d::gammp(c.a, c.x) == Catch::Approx(c.want).epsilon(1e-12));
        CHECK(d::gammq(c.a, c.x) == Catch::Approx(1.0 - c.want).epsilon(1e-10));
    }
}

TEST_CASE("F and chi-square upper tails against frozen references") {
    CHECK(d::f_sf(1.5, 2, 10) == Catch::Approx(2.6932907434290448e-01).epsilon(1e-12));
    CHECK(d::f_sf(3.0, 4, 4) == Catch::Approx(1.5625000000000000e-01).epsilon(1e-12));
    CHECK(d::f_sf(4.17, 1, 30) == Catch::Approx(5.0022588644401192e-02).epsilon(1e-12));
    CHECK(d::f_sf(2.0, 12, 40) == Catch::Approx(5.0421060810046915e-02).epsilon(1e-12));
    CHECK(d::chi2_sf(5.99, 2) == Catch::Approx(5.0036627086586287e-02).epsilon(1e-12));
    CHECK(d::chi2_sf(9.488, 4) == Catch::Approx(4.9994405577994630e-02).epsilon(1e-12));
    CHECK(d::chi2_sf(21.026, 12) == Catch::Approx(5.0001015416942317e-02).epsilon(1e-12));
    // complements agree
    CHECK(d::f_cdf(2.0, 12, 40) + d::f_sf(2.0, 12, 40) == Catch::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("normal and t quantiles against frozen references") {
    CHECK(d::normal_quantile(0.975) == Catch::Approx(1.9599639845400540).epsilon(1e-12));
    CHECK(d::normal_quantile(0.995) == Catch::Approx(2.5758293035489004).epsilon(1e-12));
    CHECK(d::normal_quantile(0.5) == 0.0);
    CHECK(d::normal_quantile(0.025) == Catch::Approx(-1.9599639845400545).epsilon(1e-12));
    CHECK(d::normal_quantile(1e-10) == Catch::Approx(-6.3613409024040557).epsilon(1e-10));
    CHECK(d::t_quantile(0.975, 5) == Catch::Approx(2.5705818356363141).epsilon(1e-10));
    CHECK(d::t_quantile(0.975, 29) == Catch::Approx(2.0452296421327030).epsilon(1e-10));
    CHECK(d::t_quantile(0.995, 10) == Catch::Approx(3.1692726726169500).epsilon(1e-10));
    CHECK(d::t_quantile(0.9, 1) == Catch::Approx(3.0776835372078066).epsilon(1e-10));
}

TEST_CASE("CDF/quantile round-trips agree to 1e-8") {
    for (double p : {0.01, 0.1, 0.3, 0.5, 0.7, 0.9, 0.975, 0.999}) {
        CHECK(d::normal_cdf(d::normal_quantile(p)) == Catch::Approx(p).margin(1e-12));
        CHECK(d::t_cdf(d::t_quantile(p, 7), 7) == Catch::Approx(p).margin(1e-8));
    }
}

TEST_CASE("gauss rules: hermite integrates exp(-x^2), legendre integrates polynomials") {
    for (int n : {1, 5, 15, 25}) {
        const auto& gh = d::gauss_hermite(n);
        double total = 0.0;
        for (double w : gh.weights) total += w;
        CHECK(total == Catch::Approx(std::sqrt(d::kPi)).epsilon(1e-12));
    }
    const auto& gl = d::gauss_legendre(20);
    double integral = 0.0;  // x^6 over [-1, 1] = 2/7
    for (std::size_t i = 0; i < gl.nodes.size(); ++i)
        integral += gl.weights[i] * std::pow(gl.nodes[i], 6);
    CHECK(integral == Catch::Approx(2.0 / 7.0).epsilon(1e-12));
}

TEST_CASE("studentized range: k=2 analytic identities") {
    // infinite df: q = sqrt(2) z_{1-alpha/2}
    for (double alpha : {0.01, 0.05, 0.10}) {
        double want = std::sqrt(2.0) * d::normal_quantile(1.0 - alpha / 2.0);
        CHECK(d::srange_quantile(alpha, 2, d::kInf) == Catch::Approx(want).margin(1e-6));
    }
    // finite df: q = sqrt(2) t_{1-alpha/2, df}
    for (double alpha : {0.01, 0.05, 0.10})
        for (double df : {3.0, 10.0, 29.0, 120.0}) {
            double want = std::sqrt(2.0) * d::t_quantile(1.0 - alpha / 2.0, df);
            CHECK(d::srange_quantile(alpha, 2, df) == Catch::Approx(want).margin(1e-6));
        }
}

TEST_CASE("studentized range: frozen references and round-trip") {
    CHECK(d::srange_quantile(0.05, 3, 10) == Catch::Approx(3.876776750013).margin(1e-6));
    CHECK(d::srange_quantile(0.05, 5, 29) == Catch::Approx(4.110862339586).margin(1e-6));
    CHECK(d::srange_quantile(0.01, 4, 20) == Catch::Approx(5.018016131511).margin(1e-6));
    CHECK(d::srange_cdf(d::srange_quantile(0.05, 4, 15), 4, 15) == Catch::Approx(0.95).margin(1e-8));
}

TEST_CASE("studentized range: monotone in confidence and group count") {
    double prev = 0.0;
    for (double alpha : {0.20, 0.10, 0.05, 0.01}) {
        double q = d::srange_quantile(alpha, 3, 12);
        CHECK(q > prev);
        prev = q;
    }
    prev = 0.0;
    for (int k : {2, 3, 5, 8, 12}) {
        double q = d::srange_quantile(0.05, k, 12);
        CHECK(q > prev);
        prev = q;
    }
}

TEST_CASE("studentized range: Monte Carlo spot check") {
    // 2e6 draws of range(3 normals) / (chi_10/sqrt(10))
    const double q = d::srange_quantile(0.05, 3, 10);
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> normal;
    std::chi_squared_distribution<double> chi(10.0);
    const int n = 2'000'000;
    int below = 0;
    for (int i = 0; i < n; ++i) {
        double a = normal(rng), b = normal(rng), c = normal(rng);
        double w = std::max({a, b, c}) - std::min({a, b, c});
        double s = std::sqrt(chi(rng) / 10.0);
        below += (w / s) <= q;
    }
    double phat = static_cast<double>(below) / n;
    double se = std::sqrt(0.95 * 0.05 / n);
    CHECK(std::abs(phat - 0.95) < 4.0 * se);
}

TEST_CASE("studentized range: input validation") {
    CHECK_THROWS_AS(d::srange_quantile(0.0, 3, 10), std::invalid_argument);
    CHECK_THROWS_AS(d::srange_quantile(0.05, 1, 10), std::invalid_argument);
    CHECK_THROWS_AS(d::srange_quantile(0.05, 3, 0.5), std::invalid_argument);
}
