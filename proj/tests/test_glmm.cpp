#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "fracif/glmm.hpp"

using namespace fracif;

namespace {

// clusters with intercepts standardized to exactly (0, sigma) so that
// recovery measures estimation error rather than the sampling noise of a
// 13-draw random-effect sample
std::vector<double> standardized_effects(std::mt19937_64& rng, int k, double sigma) {
    std::normal_distribution<double> nd;
    std::vector<double> u(k);
    for (auto& v : u) v = nd(rng);
    double mean = 0;
    for (double v : u) mean += v;
    mean /= k;
    double ss = 0;
    for (double v : u) ss += (v - mean) * (v - mean);
    double sd = std::sqrt(ss / (k - 1));
    for (auto& v : u) v = (v - mean) / sd * sigma;
    return u;
}

ClusteredOutcomes simulate_poisson(std::mt19937_64& rng, int k, int per_cluster, double beta0,
                                   double sigma) {
    auto u = standardized_effects(rng, k, sigma);
    ClusteredOutcomes data;
    for (int c = 0; c < k; ++c) {
        std::poisson_distribution<int> pois(std::exp(beta0 + u[c]));
        for (int i = 0; i < per_cluster; ++i)
            data.observations.push_back({static_cast<double>(pois(rng)), "f" + std::to_string(c)});
    }
    return data;
}

}  // namespace

TEST_CASE("fit_poisson_ri: constant outcomes collapse to the pooled intercept") {
    ClusteredOutcomes data;
    for (int c = 0; c < 4; ++c)
        for (int i = 0; i < 25; ++i) data.observations.push_back({3.0, "c" + std::to_string(c)});
    auto fit = fit_poisson_ri(data, 15);
    CHECK(fit.converged);
    CHECK(fit.sigma_boundary);
    CHECK(fit.sigma2 == 0.0);
    CHECK(fit.beta0 == Catch::Approx(std::log(3.0)).margin(1e-9));
}

TEST_CASE("fit_poisson_ri: preconditions") {
    ClusteredOutcomes one_cluster;
    for (int i = 0; i < 10; ++i) one_cluster.observations.push_back({1.0, "only"});
    CHECK_THROWS_AS(fit_poisson_ri(one_cluster), std::invalid_argument);

    ClusteredOutcomes zeros;
    for (int c = 0; c < 3; ++c)
        for (int i = 0; i < 5; ++i) zeros.observations.push_back({0.0, "c" + std::to_string(c)});
    CHECK_THROWS_AS(fit_poisson_ri(zeros), std::invalid_argument);
}

TEST_CASE("fit_poisson_ri: analytic gradient matches central differences") {
    std::mt19937_64 rng(31);
    auto data = simulate_poisson(rng, 8, 60, 0.4, 0.5);
    PoissonRiLikelihood lik(data, 15);
    std::uniform_real_distribution<double> b0d(-0.5, 1.2), lsd(-1.5, 0.2);
    for (int t = 0; t < 25; ++t) {
        double b0 = b0d(rng), ls = lsd(rng);
        std::array<double, 2> g{};
        lik.eval(b0, ls, &g);
        const double h = 1e-6;
        double fd0 = (lik.eval(b0 + h, ls) - lik.eval(b0 - h, ls)) / (2 * h);
        double fd1 = (lik.eval(b0, ls + h) - lik.eval(b0, ls - h)) / (2 * h);
        CHECK(g[0] == Catch::Approx(fd0).epsilon(1e-5));
        CHECK(g[1] == Catch::Approx(fd1).epsilon(1e-5));
    }
}

TEST_CASE("fit_poisson_ri: recovery of simulated truth") {
    std::mt19937_64 rng(32);
    int good = 0;
    const int seeds = 10;
    for (int s = 0; s < seeds; ++s) {
        auto data = simulate_poisson(rng, 13, 300, 0.5, 0.6);
        auto fit = fit_poisson_ri(data, 15);
        REQUIRE(fit.converged);
        bool ok = std::abs(fit.beta0 - 0.5) <= 0.15 &&
                  std::abs(fit.sigma2 - 0.36) <= 0.4 * 0.36;
        good += ok;
    }
    CHECK(good >= 9);
}

TEST_CASE("fit_poisson_ri: quadrature ladder converges") {
    std::mt19937_64 rng(33);
    auto data = simulate_poisson(rng, 6, 40, 0.3, 0.5);
    auto fit = fit_poisson_ri(data, 15);
    double ls = 0.5 * std::log(fit.sigma2);
    double ll1 = PoissonRiLikelihood(data, 1).eval(fit.beta0, ls);
    double ll5 = PoissonRiLikelihood(data, 5).eval(fit.beta0, ls);
    double ll15 = PoissonRiLikelihood(data, 15).eval(fit.beta0, ls);
    double ll25 = PoissonRiLikelihood(data, 25).eval(fit.beta0, ls);
    CHECK(std::abs(ll5 - ll15) <= std::abs(ll1 - ll15) + 1e-12);
    CHECK(std::abs(ll15 - ll25) < 1e-4);
}

TEST_CASE("fit_poisson_ri: log-likelihood trace is non-decreasing") {
    std::mt19937_64 rng(34);
    auto data = simulate_poisson(rng, 10, 80, 0.2, 0.7);
    auto fit = fit_poisson_ri(data, 15);
    REQUIRE(fit.loglik_trace.size() >= 2);
    for (std::size_t i = 1; i < fit.loglik_trace.size(); ++i)
        CHECK(fit.loglik_trace[i] >= fit.loglik_trace[i - 1] - 1e-9);
}

TEST_CASE("sandwich_se: replication algebra and vanishing total score") {
    std::mt19937_64 rng(35);
    auto data = simulate_poisson(rng, 9, 100, 0.4, 0.5);
    auto fit = fit_poisson_ri(data, 15);
    REQUIRE(fit.converged);
    REQUIRE_FALSE(fit.sigma_boundary);

    auto sw = sandwich_se(fit, data);
    CHECK(sw.score_sum_norm < 1e-6);  // first-order condition at the optimum

    ClusteredOutcomes duplicated = data;
    for (auto o : data.observations) {
        o.cluster += "#copy";
        duplicated.observations.push_back(o);
    }
    auto sw2 = sandwich_se(fit, duplicated);
    CHECK(sw2.se_beta0 / sw.se_beta0 == Catch::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-9));
    CHECK(sw2.se_sigma2 / sw.se_sigma2 == Catch::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-9));
}

TEST_CASE("sandwich_se: sane ratio to naive errors on well-specified data") {
    std::mt19937_64 rng(36);
    for (int s = 0; s < 5; ++s) {
        auto data = simulate_poisson(rng, 12, 150, 0.5, 0.5);
        auto fit = fit_poisson_ri(data, 15);
        if (!fit.converged || fit.sigma_boundary) continue;
        double ratio = fit.se_beta0_sandwich / fit.se_beta0_naive;
        CHECK(ratio > 0.5);
        CHECK(ratio < 2.0);
    }
}

TEST_CASE("fit_lognormal_ri: constant log outcomes and zero handling") {
    ClusteredOutcomes data;
    for (int c = 0; c < 3; ++c)
        for (int i = 0; i < 10; ++i)
            data.observations.push_back({std::exp(1.7), "c" + std::to_string(c)});
    auto fit = fit_lognormal_ri(data);
    CHECK(fit.sigma2 == 0.0);
    CHECK(fit.beta0 == Catch::Approx(1.7).margin(1e-6));

    ClusteredOutcomes with_zero = data;
    with_zero.observations.push_back({0.0, "c0"});
    CHECK_THROWS_AS(fit_lognormal_ri(with_zero), std::invalid_argument);
    LognormalOptions offset;
    offset.zero_offset = 0.01;
    CHECK_NOTHROW(fit_lognormal_ri(with_zero, offset));
}

TEST_CASE("fit_lognormal_ri: balanced case matches the closed-form ML solution") {
    std::mt19937_64 rng(37);
    std::normal_distribution<double> nd;
    const int k = 2, n = 40;
    ClusteredOutcomes data;
    std::vector<std::vector<double>> logs(k);
    for (int c = 0; c < k; ++c) {
        double u = c == 0 ? -0.5 : 0.5;
        for (int i = 0; i < n; ++i) {
            double v = 0.3 + u + 0.4 * nd(rng);
            logs[c].push_back(v);
            data.observations.push_back({std::exp(v), "c" + std::to_string(c)});
        }
    }
    // closed form: lambda = SSB*/J with SSB* = n sum (mean_j - grand)^2,
    // sigma_e^2 = SSW/(N-J), sigma_u^2 = (lambda - sigma_e^2)/n
    double grand = 0;
    std::vector<double> means(k, 0.0);
    for (int c = 0; c < k; ++c) {
        for (double v : logs[c]) means[c] += v;
        means[c] /= n;
        grand += means[c];
    }
    grand /= k;
    double ssb = 0, ssw = 0;
    for (int c = 0; c < k; ++c) {
        ssb += n * (means[c] - grand) * (means[c] - grand);
        for (double v : logs[c]) ssw += (v - means[c]) * (v - means[c]);
    }
    double sigma_e2 = ssw / (k * n - k);
    double sigma_u2 = std::max(0.0, (ssb / k - sigma_e2) / n);

    auto fit = fit_lognormal_ri(data);
    REQUIRE(fit.converged);
    CHECK(fit.beta0 == Catch::Approx(grand).margin(1e-8));
    CHECK(fit.sigma2 == Catch::Approx(sigma_u2).margin(1e-8));
}

TEST_CASE("fit_lognormal_ri: recovers simulated lognormal clusters") {
    std::mt19937_64 rng(38);
    std::normal_distribution<double> nd;
    int good = 0;
    for (int s = 0; s < 8; ++s) {
        std::vector<double> u(10);
        for (auto& v : u) v = nd(rng);
        double mean = 0, ss = 0;
        for (double v : u) mean += v;
        mean /= u.size();
        for (double v : u) ss += (v - mean) * (v - mean);
        for (auto& v : u) v = (v - mean) / std::sqrt(ss / (u.size() - 1)) * 0.6;
        ClusteredOutcomes data;
        for (std::size_t c = 0; c < u.size(); ++c)
            for (int i = 0; i < 200; ++i)
                data.observations.push_back(
                    {std::exp(0.5 + u[c] + 0.4 * nd(rng)), "c" + std::to_string(c)});
        auto fit = fit_lognormal_ri(data);
        if (std::abs(fit.beta0 - 0.5) <= 0.15 && std::abs(fit.sigma2 - 0.36) <= 0.4 * 0.36) ++good;
    }
    CHECK(good >= 7);
}

TEST_CASE("wald_variance_test: the printed-table star pattern") {
    CHECK(wald_variance_test(0.15, 0.06).significant);
    CHECK(wald_variance_test(0.48, 0.21).significant);
    CHECK(wald_variance_test(0.48, 0.21).z == Catch::Approx(0.48 / 0.21).epsilon(1e-12));
    CHECK_FALSE(wald_variance_test(0.09, 0.05).significant);  // z = 1.8 < 1.96
    CHECK_FALSE(wald_variance_test(0.28, 0.15).significant);
    auto zero = wald_variance_test(0.0, 0.5);
    CHECK(zero.z == 0.0);
    CHECK(zero.p_value == 1.0);
    CHECK_THROWS_AS(wald_variance_test(0.5, 0.0), std::invalid_argument);
}

TEST_CASE("variance_reduction: quoted computations") {
    CHECK(variance_reduction(0.48, 0.09).reduction_percent == Catch::Approx(81.25).margin(1e-12));
    CHECK(variance_reduction(0.48, 0.28).reduction_percent ==
          Catch::Approx(41.666666666666664).margin(1e-9));
    CHECK(variance_reduction(0.7, 0.7).reduction_percent == 0.0);
    CHECK_THROWS_AS(variance_reduction(0.0, 0.1), std::invalid_argument);
}

TEST_CASE("run_model_suite: no field effect means all variances near zero") {
    std::mt19937_64 rng(39);
    std::poisson_distribution<int> pois(3.0);
    IndicatorTable table;
    for (int f = 0; f < 4; ++f)
        for (int j = 0; j < 60; ++j) {
            IndicatorRow r;
            r.journal_id = "F" + std::to_string(f) + "J" + std::to_string(j);
            r.field_id = "F" + std::to_string(f);
            r.quasi_if_integer = static_cast<double>(pois(rng));
            r.quasi_if_fractional = r.quasi_if_integer / 3.0;
            r.cp_fractional = r.quasi_if_integer / 2.0;
            r.denominator_citable = 10;
            table.rows.push_back(r);
        }
    auto suite = run_model_suite(table);
    CHECK_FALSE(suite.m1.has_value());  // no reference IFs supplied
    CHECK(suite.m2.fit.sigma2 < 0.05);
    CHECK(suite.m3.fit.sigma2 < 0.05);
    REQUIRE(suite.m4.has_value());
    CHECK(suite.m4->fit.sigma2 < 0.05);
    CHECK(suite.m2.n_journals == 240);
}

TEST_CASE("run_model_suite: drops unassigned journals, requires two fields") {
    IndicatorTable table;
    for (int j = 0; j < 30; ++j) {
        IndicatorRow r;
        r.journal_id = "J" + std::to_string(j);
        if (j % 3 != 0) r.field_id = (j % 2) ? "A" : "B";
        r.quasi_if_integer = 1.0 + j % 5;
        r.quasi_if_fractional = 0.5;
        r.denominator_citable = 10;
        table.rows.push_back(r);
    }
    auto suite = run_model_suite(table);
    CHECK(suite.dropped_no_field.size() == 10);
    CHECK(suite.m2.n_journals == 20);
    CHECK_FALSE(suite.m4.has_value());  // nobody has a c/p value

    IndicatorTable single;
    for (int j = 0; j < 10; ++j) {
        IndicatorRow r;
        r.journal_id = "J" + std::to_string(j);
        r.field_id = "ONLY";
        r.quasi_if_integer = 1.0;
        r.quasi_if_fractional = 0.5;
        single.rows.push_back(r);
    }
    CHECK_THROWS_AS(run_model_suite(single), DataError);
}

TEST_CASE("model_report_csv: one labeled row per fitted model") {
    IndicatorTable table;
    std::mt19937_64 rng(40);
    std::poisson_distribution<int> pois(2.0);
    for (int f = 0; f < 3; ++f)
        for (int j = 0; j < 40; ++j) {
            IndicatorRow r;
            r.journal_id = "F" + std::to_string(f) + "J" + std::to_string(j);
            r.field_id = "F" + std::to_string(f);
            r.reference_if = 0.5 + pois(rng);
            r.quasi_if_integer = static_cast<double>(pois(rng));
            r.quasi_if_fractional = r.quasi_if_integer / 2.0;
            table.rows.push_back(r);
        }
    auto suite = run_model_suite(table);
    auto csv = model_report_csv(suite);
    CHECK(csv.find("model_id,beta0,") == 0);
    CHECK(csv.find("\nM1,") != std::string::npos);
    CHECK(csv.find("\nM2,") != std::string::npos);
    CHECK(csv.find("\nM3,") != std::string::npos);
}
