#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "fracif/distributions.hpp"
#include "fracif/stats.hpp"

using namespace fracif;

namespace {

std::vector<GroupSample> random_groups(std::mt19937_64& rng, int k, int n_lo, int n_hi) {
    std::uniform_int_distribution<int> nd(n_lo, n_hi);
    std::normal_distribution<double> value(0.0, 1.0);
    std::uniform_real_distribution<double> shift(-1.0, 1.0);
    std::vector<GroupSample> groups(k);
    for (int g = 0; g < k; ++g) {
        groups[g].group_id = "g" + std::to_string(g);
        double mu = shift(rng);
        int n = nd(rng);
        for (int i = 0; i < n; ++i) groups[g].observations.push_back(mu + value(rng));
    }
    return groups;
}

// direct-definition ANOVA oracle (plain loops, no shared code path)
std::pair<double, double> anova_oracle(const std::vector<GroupSample>& groups) {
    double grand = 0.0;
    std::size_t n = 0;
    for (const auto& g : groups)
        for (double x : g.observations) {
            grand += x;
            ++n;
        }
    grand /= static_cast<double>(n);
    double ssb = 0.0, ssw = 0.0;
    for (const auto& g : groups) {
        double mean = 0.0;
        for (double x : g.observations) mean += x;
        mean /= static_cast<double>(g.observations.size());
        ssb += static_cast<double>(g.observations.size()) * (mean - grand) * (mean - grand);
        for (double x : g.observations) ssw += (x - mean) * (x - mean);
    }
    double df1 = static_cast<double>(groups.size() - 1);
    double df2 = static_cast<double>(n - groups.size());
    return {(ssb / df1) / (ssw / df2), dist::f_sf((ssb / df1) / (ssw / df2), df1, df2)};
}

}  // namespace

TEST_CASE("descriptives: basic values and error paths") {
    std::vector<double> xs = {1, 2, 3};
    auto d = descriptives(xs);
    CHECK(d.mean == 2.0);
    CHECK(d.sd() == Catch::Approx(1.0));
    CHECK(d.median == 2.0);

    std::vector<double> one = {5};
    auto d1 = descriptives(one);
    CHECK(d1.mean == 5.0);
    CHECK_THROWS_AS(d1.sd(), std::invalid_argument);
    CHECK_THROWS_AS(descriptives(std::vector<double>{}), std::invalid_argument);
}

TEST_CASE("descriptives: mean of the five fractional quasi-IFs") {
    std::vector<double> xs = {0.595, 1.143, 0.255, 0.175, 1.416};
    CHECK(descriptives(xs).mean == Catch::Approx(0.7168).margin(1e-12));
}

TEST_CASE("pearson: exact limits and the covariance-formula oracle") {
    std::vector<double> xs = {1, 2, 3, 4, 5};
    std::vector<double> ys;
    for (double x : xs) ys.push_back(2 * x + 1);
    CHECK(pearson(xs, ys) == Catch::Approx(1.0));
    for (auto& y : ys) y = -y;
    CHECK(pearson(xs, ys) == Catch::Approx(-1.0));

    std::mt19937_64 rng(21);
    std::normal_distribution<double> nd;
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<double> a(50), b(50);
        for (int i = 0; i < 50; ++i) {
            a[i] = nd(rng);
            b[i] = 0.4 * a[i] + nd(rng);
        }
        double sa = 0, sb = 0;
        for (int i = 0; i < 50; ++i) {
            sa += a[i];
            sb += b[i];
        }
        sa /= 50;
        sb /= 50;
        double sxy = 0, sxx = 0, syy = 0;
        for (int i = 0; i < 50; ++i) {
            sxy += (a[i] - sa) * (b[i] - sb);
            sxx += (a[i] - sa) * (a[i] - sa);
            syy += (b[i] - sb) * (b[i] - sb);
        }
        CHECK(pearson(a, b) == Catch::Approx(sxy / std::sqrt(sxx * syy)).margin(1e-12));
    }
    std::vector<double> constant = {3, 3, 3, 3};
    std::vector<double> varying = {1, 2, 3, 4};
    CHECK_THROWS_AS(pearson(constant, varying), std::invalid_argument);
}

TEST_CASE("spearman: rank invariance and midrank ties") {
    std::vector<double> xs = {0.3, 1.5, 2.2, 9.1, 4.4, 3.3};
    std::vector<double> mono;
    for (double x : xs) mono.push_back(std::exp(x));  // strictly monotone transform
    CHECK(spearman(xs, mono) == Catch::Approx(1.0));
    std::vector<double> fwd = {1, 2, 3, 4, 5, 6};
    std::vector<double> rev = {6, 5, 4, 3, 2, 1};
    CHECK(spearman(fwd, rev) == Catch::Approx(-1.0));

    // ties: equals pearson on hand-computed midranks
    std::vector<double> a = {1.0, 2.0, 2.0, 3.0};
    std::vector<double> b = {10.0, 20.0, 30.0, 40.0};
    std::vector<double> ra = {1.0, 2.5, 2.5, 4.0};
    std::vector<double> rb = {1.0, 2.0, 3.0, 4.0};
    CHECK(spearman(a, b) == Catch::Approx(pearson(ra, rb)).margin(1e-14));
}

TEST_CASE("levene: symmetric and equal-deviation cases give F = 0") {
    std::vector<GroupSample> same = {{"a", {1, 2, 3, 9}}, {"b", {9, 1, 3, 2}}};
    auto r = levene(same);
    CHECK(r.statistic == Catch::Approx(0.0).margin(1e-12));

    std::vector<GroupSample> dev = {{"a", {1, 3}}, {"b", {4, 6}}};
    auto r2 = levene(dev);
    CHECK(r2.statistic == 0.0);
    CHECK(r2.p_value == 1.0);
}

TEST_CASE("levene: matches a direct-formula evaluation") {
    std::vector<GroupSample> groups = {{"a", {12.1, 14.2, 13.3, 15.9, 11.0}},
                                       {"b", {22.4, 21.1, 25.3, 24.0, 23.3, 19.9}},
                                       {"c", {5.5, 9.4, 7.2, 8.8}}};
    // z-transform by hand, then the ANOVA oracle
    std::vector<GroupSample> z;
    for (const auto& g : groups) {
        double mean = 0;
        for (double x : g.observations) mean += x;
        mean /= static_cast<double>(g.observations.size());
        GroupSample zg{g.group_id, {}};
        for (double x : g.observations) zg.observations.push_back(std::abs(x - mean));
        z.push_back(zg);
    }
    auto [f_want, p_want] = anova_oracle(z);
    auto r = levene(groups);
    CHECK(r.statistic == Catch::Approx(f_want).epsilon(1e-10));
    CHECK(r.p_value == Catch::Approx(p_want).epsilon(1e-10));

    auto rm = levene(groups, LeveneCenter::Median);
    CHECK(rm.statistic != r.statistic);  // Brown-Forsythe variant differs here
}

TEST_CASE("anova: the hand-computed two-group case") {
    std::vector<GroupSample> groups = {{"a", {1, 2, 3}}, {"b", {2, 3, 4}}};
    auto r = anova_oneway(groups);
    CHECK(r.statistic == Catch::Approx(1.5).epsilon(1e-14));  // SSB=1.5, SSW=4
    CHECK(r.df1 == 1.0);
    CHECK(r.df2 == 4.0);

    std::vector<GroupSample> same = {{"a", {1, 2, 3}}, {"b", {1, 2, 3}}};
    CHECK(anova_oneway(same).statistic == Catch::Approx(0.0).margin(1e-15));
}

TEST_CASE("anova: location and scale invariance") {
    std::mt19937_64 rng(22);
    for (int trial = 0; trial < 20; ++trial) {
        auto groups = random_groups(rng, 3, 4, 9);
        auto base = anova_oneway(groups);
        auto lev = levene(groups);
        auto shifted = groups;
        for (auto& g : shifted)
            for (auto& x : g.observations) x += 17.25;
        auto scaled = groups;
        for (auto& g : scaled)
            for (auto& x : g.observations) x *= 3.5;
        CHECK(anova_oneway(shifted).statistic == Catch::Approx(base.statistic).epsilon(1e-9));
        CHECK(anova_oneway(scaled).statistic == Catch::Approx(base.statistic).epsilon(1e-9));
        CHECK(levene(shifted).statistic == Catch::Approx(lev.statistic).epsilon(1e-9));
        CHECK(levene(scaled).statistic == Catch::Approx(lev.statistic).epsilon(1e-9));
    }
}

TEST_CASE("anova: degenerate zero within-variance") {
    std::vector<GroupSample> groups = {{"a", {1, 1, 1}}, {"b", {2, 2, 2}}};
    auto r = anova_oneway(groups);
    CHECK(r.degenerate);
    CHECK(r.p_value == 0.0);
    CHECK(std::isinf(r.statistic));
}

TEST_CASE("anova: oracle agreement on random datasets") {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 60; ++trial) {
        auto groups = random_groups(rng, 2 + trial % 4, 3, 10);
        auto [f_want, p_want] = anova_oracle(groups);
        auto r = anova_oneway(groups);
        CHECK(r.statistic == Catch::Approx(f_want).epsilon(1e-10));
        CHECK(r.p_value == Catch::Approx(p_want).epsilon(1e-10));
    }
}

TEST_CASE("kruskal-wallis: invariances and degenerate ties") {
    std::vector<GroupSample> same = {{"a", {1, 2, 3}}, {"b", {1, 2, 3}}};
    CHECK(kruskal_wallis(same).statistic == Catch::Approx(0.0).margin(1e-12));

    std::vector<GroupSample> tied = {{"a", {7, 7, 7}}, {"b", {7, 7}}};
    auto td = kruskal_wallis(tied);
    CHECK(td.statistic == 0.0);
    CHECK(td.degenerate);

    std::mt19937_64 rng(24);
    auto groups = random_groups(rng, 3, 5, 9);
    auto base = kruskal_wallis(groups);
    auto transformed = groups;
    for (auto& g : transformed)
        for (auto& x : g.observations) x = std::atan(x) * 3.0 + 5.0;  // strictly monotone
    auto t = kruskal_wallis(transformed);
    CHECK(t.statistic == base.statistic);  // exact rank invariance
    CHECK(t.p_value == base.p_value);
}

TEST_CASE("kruskal-wallis: exact enumeration on a tiny case") {
    // 3 groups of 3: full permutation distribution of H
    std::vector<GroupSample> groups = {{"a", {1.2, 3.4, 0.5}}, {"b", {2.2, 4.1, 3.9}},
                                       {"c", {0.1, 0.9, 2.8}}};
    auto obs = kruskal_wallis(groups);
    std::vector<double> pool;
    for (const auto& g : groups)
        for (double x : g.observations) pool.push_back(x);
    std::vector<int> labels = {0, 0, 0, 1, 1, 1, 2, 2, 2};
    std::sort(labels.begin(), labels.end());
    int total = 0, as_extreme = 0;
    do {
        std::vector<GroupSample> perm(3);
        for (int g = 0; g < 3; ++g) perm[g].group_id = "g" + std::to_string(g);
        for (std::size_t i = 0; i < pool.size(); ++i)
            perm[labels[i]].observations.push_back(pool[i]);
        auto h = kruskal_wallis(perm);
        ++total;
        as_extreme += h.statistic >= obs.statistic - 1e-12;
    } while (std::next_permutation(labels.begin(), labels.end()));
    double p_exact = static_cast<double>(as_extreme) / total;
    // chi-square approximation documented to be rough at this size
    CHECK(obs.p_value == Catch::Approx(p_exact).margin(0.06));
}

TEST_CASE("tukey: identical groups, separation, oracle") {
    std::vector<GroupSample> same = {{"a", {1, 2, 3, 4}}, {"b", {1, 2, 3, 4}}};
    auto t = tukey_hsd(same, 0.05);
    REQUIRE(t.size() == 2);
    CHECK_FALSE(t[0].significant);
    CHECK(t[0].mean_difference == 0.0);
    CHECK(t[0].ci_low == Catch::Approx(-t[0].ci_high));

    std::vector<GroupSample> apart = {{"a", {1.0, 1.1, 0.9, 1.05}}, {"b", {9.0, 9.1, 8.9, 9.05}}};
    CHECK(tukey_hsd(apart, 0.05)[0].significant);

    // 3-group direct-formula oracle
    std::vector<GroupSample> groups = {{"a", {3.1, 2.9, 3.5, 3.0}},
                                       {"b", {4.9, 5.3, 5.1, 4.7, 5.0}},
                                       {"c", {2.0, 2.2, 1.8}}};
    auto table = tukey_hsd(groups, 0.05);
    double ssw = 0, dfw = 0;
    std::vector<double> means, ns;
    for (const auto& g : groups) {
        double m = 0;
        for (double x : g.observations) m += x;
        m /= static_cast<double>(g.observations.size());
        means.push_back(m);
        ns.push_back(static_cast<double>(g.observations.size()));
        for (double x : g.observations) ssw += (x - m) * (x - m);
        dfw += static_cast<double>(g.observations.size()) - 1;
    }
    double mse = ssw / dfw;
    double q = studentized_range_quantile(0.05, 3, dfw);
    auto expect_se = [&](int i, int j) { return std::sqrt(mse * (1 / ns[i] + 1 / ns[j])); };
    CHECK(table[0].group_i == "a");
    CHECK(table[0].group_j == "b");
    CHECK(table[0].mean_difference == Catch::Approx(means[0] - means[1]).epsilon(1e-12));
    CHECK(table[0].standard_error == Catch::Approx(expect_se(0, 1)).epsilon(1e-10));
    CHECK(table[0].ci_low ==
          Catch::Approx(means[0] - means[1] - q / std::sqrt(2.0) * expect_se(0, 1)).epsilon(1e-10));

    std::vector<GroupSample> tiny = {{"a", {1}}, {"b", {1, 2}}};
    CHECK_THROWS_AS(tukey_hsd(tiny, 0.05), std::invalid_argument);
}

TEST_CASE("dunnett c: identical groups and antisymmetry") {
    std::vector<GroupSample> same = {{"a", {1, 2, 3, 4}}, {"b", {1, 2, 3, 4}}};
    auto t = dunnett_c(same, 0.05);
    REQUIRE(t.size() == 2);
    CHECK(t[0].mean_difference == 0.0);
    CHECK_FALSE(t[0].significant);

    std::mt19937_64 rng(25);
    for (int trial = 0; trial < 15; ++trial) {
        auto groups = random_groups(rng, 4, 3, 8);
        auto table = dunnett_c(groups, 0.05);
        REQUIRE(table.size() == 12);  // k(k-1) oriented pairs
        // (j,i) is the exact bit-level negation of (i,j)
        for (std::size_t a = 0; a < table.size(); ++a)
            for (std::size_t b = a + 1; b < table.size(); ++b)
                if (table[a].group_i == table[b].group_j && table[a].group_j == table[b].group_i) {
                    CHECK(table[a].mean_difference == -table[b].mean_difference);
                    CHECK(table[a].ci_low == -table[b].ci_high);
                    CHECK(table[a].ci_high == -table[b].ci_low);
                    CHECK(table[a].standard_error == table[b].standard_error);
                    CHECK(table[a].significant == table[b].significant);
                }
        // significance flag is exactly the CI-excludes-zero condition
        for (const auto& c : table)
            CHECK(c.significant == !(c.ci_low <= 0.0 && 0.0 <= c.ci_high));
    }
}

TEST_CASE("dunnett c: zero-variance pair is degenerate and flagged") {
    std::vector<GroupSample> groups = {{"a", {2, 2, 2}}, {"b", {2, 2, 2}}, {"c", {1, 2, 3}}};
    auto table = dunnett_c(groups, 0.05);
    const auto& ab = table[0];
    CHECK(ab.degenerate);
    CHECK_FALSE(ab.significant);  // identical constants: difference 0
}

TEST_CASE("pairwise_table_csv emits Table-4-shaped rows") {
    std::vector<GroupSample> groups = {{"1", {1, 2, 3, 4}}, {"2", {2, 3, 4, 5}}};
    auto csv = pairwise_table_csv(dunnett_c(groups, 0.05));
    CHECK(csv.find("group_i,group_j,mean_difference,std_error,ci_low,ci_high,significant") == 0);
    CHECK(csv.find("\n1,2,-1.0") != std::string::npos);
    CHECK(csv.find("\n2,1,1.0") != std::string::npos);
}

TEST_CASE("ks normality: preconditions") {
    std::vector<double> three = {1, 2, 3};
    CHECK_THROWS_AS(ks_normality(three), std::invalid_argument);
    std::vector<double> constant = {2, 2, 2, 2, 2, 2};
    CHECK_THROWS_AS(ks_normality(constant), std::invalid_argument);
}

TEST_CASE("ks normality: calibration near alpha on normal data") {
    std::mt19937_64 rng(26);
    std::normal_distribution<double> nd(3.0, 2.0);
    int rejects = 0;
    const int trials = 1000;
    for (int t = 0; t < trials; ++t) {
        std::vector<double> xs(60);
        for (auto& x : xs) x = nd(rng);
        rejects += ks_normality(xs).p_value < 0.05;
    }
    double rate = static_cast<double>(rejects) / trials;
    CHECK(rate > 0.02);
    CHECK(rate < 0.09);
}

TEST_CASE("ks normality: heavy tails are detected") {
    std::mt19937_64 rng(27);
    std::student_t_distribution<double> heavy(2.0);
    int rejects = 0;
    const int trials = 40;
    for (int t = 0; t < trials; ++t) {
        std::vector<double> xs(500);
        for (auto& x : xs) x = heavy(rng);
        rejects += ks_normality(xs).p_value < 0.05;
    }
    CHECK(rejects >= 38);  // vast majority of seeds
}

TEST_CASE("all p-values live in [0,1]") {
    std::mt19937_64 rng(28);
    for (int trial = 0; trial < 30; ++trial) {
        auto groups = random_groups(rng, 3, 3, 8);
        for (double p : {anova_oneway(groups).p_value, levene(groups).p_value,
                         kruskal_wallis(groups).p_value}) {
            CHECK(p >= 0.0);
            CHECK(p <= 1.0);
        }
    }
}
