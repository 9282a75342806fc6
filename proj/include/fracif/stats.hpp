#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fracif/distributions.hpp"
#include "fracif/util.hpp"

namespace fracif {

struct GroupSample {
    std::string group_id;
    std::vector<double> observations;
};

inline void validate_groups(std::span<const GroupSample> groups, std::size_t min_groups,
                            std::size_t min_per_group) {
    if (groups.size() < min_groups)
        throw std::invalid_argument("need at least " + std::to_string(min_groups) + " groups");
    for (const auto& g : groups) {
        if (g.observations.size() < min_per_group)
            throw std::invalid_argument("group " + g.group_id + " needs at least " +
                                        std::to_string(min_per_group) + " observations");
        for (double x : g.observations)
            if (!std::isfinite(x))
                throw std::invalid_argument("group " + g.group_id + " contains non-finite values");
    }
}

// --------------------------------------------------------------------------
// Descriptives
// --------------------------------------------------------------------------

struct Descriptives {
    std::size_t n = 0;
    double mean = 0.0;
    double median = 0.0;

    double variance() const {
        if (n < 2) throw std::invalid_argument("variance requires n >= 2");
        return variance_;
    }
    double sd() const {
        if (n < 2) throw std::invalid_argument("sd requires n >= 2");
        return std::sqrt(variance_);
    }

    double variance_ = 0.0;  // sample (n-1)
};

inline Descriptives descriptives(std::span<const double> xs) {
    if (xs.empty()) throw std::invalid_argument("descriptives: empty input");
    Descriptives d;
    d.n = xs.size();
    KahanSum sum;
    for (double x : xs) {
        if (!std::isfinite(x)) throw std::invalid_argument("descriptives: non-finite value");
        sum.add(x);
    }
    d.mean = sum.value() / static_cast<double>(d.n);
    if (d.n >= 2) {
        KahanSum ss;
        for (double x : xs) ss.add((x - d.mean) * (x - d.mean));
        d.variance_ = ss.value() / static_cast<double>(d.n - 1);
    }
    std::vector<double> sorted(xs.begin(), xs.end());
    std::sort(sorted.begin(), sorted.end());
    std::size_t mid = d.n / 2;
    d.median = (d.n % 2 == 1) ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
    return d;
}

// --------------------------------------------------------------------------
// Correlation
// --------------------------------------------------------------------------

inline double pearson(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size()) throw std::invalid_argument("pearson: length mismatch");
    if (xs.size() < 3) throw std::invalid_argument("pearson: need at least 3 pairs");
    for (std::size_t i = 0; i < xs.size(); ++i)
        if (!std::isfinite(xs[i]) || !std::isfinite(ys[i]))
            throw std::invalid_argument("pearson: non-finite value");
    const double n = static_cast<double>(xs.size());
    KahanSum sx, sy;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sx.add(xs[i]);
        sy.add(ys[i]);
    }
    double mx = sx.value() / n, my = sy.value() / n;
    KahanSum sxy, sxx, syy;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        double dx = xs[i] - mx, dy = ys[i] - my;
        sxy.add(dx * dy);
        sxx.add(dx * dx);
        syy.add(dy * dy);
    }
    if (sxx.value() <= 0.0 || syy.value() <= 0.0)
        throw std::invalid_argument("pearson: undefined for a constant series");
    double r = sxy.value() / std::sqrt(sxx.value() * syy.value());
    return std::clamp(r, -1.0, 1.0);
}

// Midranks (average rank for ties), 1-based.
inline std::vector<double> midranks(std::span<const double> xs) {
    std::vector<std::size_t> idx(xs.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
    std::vector<double> ranks(xs.size());
    std::size_t i = 0;
    while (i < idx.size()) {
        std::size_t j = i;
        while (j + 1 < idx.size() && xs[idx[j + 1]] == xs[idx[i]]) ++j;
        double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t t = i; t <= j; ++t) ranks[idx[t]] = avg;
        i = j + 1;
    }
    return ranks;
}

// Exact Spearman rho: Pearson correlation of midrank-transformed series.
inline double spearman(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size()) throw std::invalid_argument("spearman: length mismatch");
    if (xs.size() < 3) throw std::invalid_argument("spearman: need at least 3 pairs");
    for (std::size_t i = 0; i < xs.size(); ++i)
        if (!std::isfinite(xs[i]) || !std::isfinite(ys[i]))
            throw std::invalid_argument("spearman: non-finite value");
    auto rx = midranks(xs);
    auto ry = midranks(ys);
    return pearson(rx, ry);
}

// --------------------------------------------------------------------------
// Omnibus tests
// --------------------------------------------------------------------------

struct OmnibusResult {
    std::string test_name;
    double statistic = 0.0;
    double df1 = 0.0;
    double df2 = 0.0;  // 0 when not applicable
    double p_value = 1.0;
    bool degenerate = false;
};

inline OmnibusResult anova_oneway(std::span<const GroupSample> groups) {
    validate_groups(groups, 2, 1);
    std::size_t total_n = 0;
    for (const auto& g : groups) total_n += g.observations.size();
    if (total_n <= groups.size())
        throw std::invalid_argument("anova_oneway: total n must exceed number of groups");

    KahanSum grand_sum;
    for (const auto& g : groups)
        for (double x : g.observations) grand_sum.add(x);
    double grand_mean = grand_sum.value() / static_cast<double>(total_n);

    KahanSum ssb, ssw;
    for (const auto& g : groups) {
        KahanSum gs;
        for (double x : g.observations) gs.add(x);
        double gm = gs.value() / static_cast<double>(g.observations.size());
        double d = gm - grand_mean;
        ssb.add(static_cast<double>(g.observations.size()) * d * d);
        for (double x : g.observations) ssw.add((x - gm) * (x - gm));
    }

    OmnibusResult r;
    r.test_name = "anova_oneway";
    r.df1 = static_cast<double>(groups.size() - 1);
    r.df2 = static_cast<double>(total_n - groups.size());
    double msb = ssb.value() / r.df1;
    double msw = ssw.value() / r.df2;
    if (msw <= 0.0) {
        r.degenerate = true;
        if (msb <= 0.0) {
            r.statistic = 0.0;
            r.p_value = 1.0;
        } else {
            r.statistic = std::numeric_limits<double>::infinity();
            r.p_value = 0.0;
        }
        return r;
    }
    r.statistic = msb / msw;
    r.p_value = dist::f_sf(r.statistic, r.df1, r.df2);
    return r;
}

enum class LeveneCenter { Mean, Median };

// Levene's homogeneity-of-variance test: one-way ANOVA F on the absolute
// deviations from the group center (mean by default, median for the
// Brown-Forsythe variant).
inline OmnibusResult levene(std::span<const GroupSample> groups,
                            LeveneCenter center = LeveneCenter::Mean) {
    validate_groups(groups, 2, 2);
    std::vector<GroupSample> z(groups.size());
    for (std::size_t g = 0; g < groups.size(); ++g) {
        auto d = descriptives(groups[g].observations);
        double c = center == LeveneCenter::Mean ? d.mean : d.median;
        z[g].group_id = groups[g].group_id;
        z[g].observations.reserve(groups[g].observations.size());
        for (double x : groups[g].observations) z[g].observations.push_back(std::abs(x - c));
    }
    OmnibusResult r = anova_oneway(z);
    r.test_name = "levene";
    return r;
}

inline OmnibusResult kruskal_wallis(std::span<const GroupSample> groups) {
    validate_groups(groups, 2, 1);
    std::vector<double> pooled;
    std::vector<std::size_t> group_of;
    for (std::size_t g = 0; g < groups.size(); ++g)
        for (double x : groups[g].observations) {
            pooled.push_back(x);
            group_of.push_back(g);
        }
    const double n = static_cast<double>(pooled.size());
    auto ranks = midranks(pooled);

    std::vector<KahanSum> rank_sums(groups.size());
    for (std::size_t i = 0; i < pooled.size(); ++i) rank_sums[group_of[i]].add(ranks[i]);

    double h = 0.0;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        double rs = rank_sums[g].value();
        h += rs * rs / static_cast<double>(groups[g].observations.size());
    }
    h = 12.0 / (n * (n + 1.0)) * h - 3.0 * (n + 1.0);

    // tie correction: 1 - sum(t^3 - t) / (n^3 - n)
    std::vector<double> sorted = pooled;
    std::sort(sorted.begin(), sorted.end());
    double tie_term = 0.0;
    std::size_t i = 0;
    while (i < sorted.size()) {
        std::size_t j = i;
        while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
        double t = static_cast<double>(j - i + 1);
        tie_term += t * t * t - t;
        i = j + 1;
    }
    double correction = 1.0 - tie_term / (n * n * n - n);

    OmnibusResult r;
    r.test_name = "kruskal_wallis";
    r.df1 = static_cast<double>(groups.size() - 1);
    if (correction <= 0.0) {  // every observation tied
        r.statistic = 0.0;
        r.p_value = 1.0;
        r.degenerate = true;
        return r;
    }
    r.statistic = std::max(0.0, h / correction);
    r.p_value = r.statistic == 0.0 ? 1.0 : dist::chi2_sf(r.statistic, r.df1);
    return r;
}

// --------------------------------------------------------------------------
// Post-hoc pairwise comparisons
// --------------------------------------------------------------------------

struct PairwiseComparison {
    std::string group_i;
    std::string group_j;
    double mean_difference = 0.0;  // mean_i - mean_j
    double standard_error = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    bool significant = false;  // 0 outside [ci_low, ci_high]
    bool degenerate = false;
};

inline double studentized_range_quantile(double alpha, int k, double df) {
    return dist::srange_quantile(alpha, k, df);
}

namespace detail {

struct GroupMoments {
    double mean;
    double var;  // sample, n-1
    double n;
};

inline std::vector<GroupMoments> group_moments(std::span<const GroupSample> groups) {
    std::vector<GroupMoments> m;
    m.reserve(groups.size());
    for (const auto& g : groups) {
        auto d = descriptives(g.observations);
        m.push_back({d.mean, d.variance(), static_cast<double>(d.n)});
    }
    return m;
}

// Emits the comparison and its mirrored orientation.
inline void emit_both(std::vector<PairwiseComparison>& out, const GroupSample& gi,
                      const GroupSample& gj, double diff, double se, double critical_range,
                      bool degenerate) {
    PairwiseComparison c;
    c.group_i = gi.group_id;
    c.group_j = gj.group_id;
    c.mean_difference = diff;
    c.standard_error = se;
    c.ci_low = diff - critical_range;
    c.ci_high = diff + critical_range;
    c.significant = !(c.ci_low <= 0.0 && 0.0 <= c.ci_high);
    c.degenerate = degenerate;
    PairwiseComparison rev = c;
    rev.group_i = c.group_j;
    rev.group_j = c.group_i;
    rev.mean_difference = -diff;
    rev.ci_low = -c.ci_high;
    rev.ci_high = -c.ci_low;
    out.push_back(std::move(c));
    out.push_back(std::move(rev));
}

}  // namespace detail

// Tukey HSD with the Tukey-Kramer adjustment for unequal group sizes.
// All k(k-1) ordered pairs are emitted (both orientations).
inline std::vector<PairwiseComparison> tukey_hsd(std::span<const GroupSample> groups,
                                                 double alpha = 0.05) {
    validate_groups(groups, 2, 2);
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("tukey_hsd: alpha in (0,1)");
    auto m = detail::group_moments(groups);

    double ssw = 0.0, df_w = 0.0;
    for (const auto& g : m) {
        ssw += (g.n - 1.0) * g.var;
        df_w += g.n - 1.0;
    }
    double mse = ssw / df_w;
    double q = dist::srange_quantile(alpha, static_cast<int>(groups.size()), df_w);

    std::vector<PairwiseComparison> out;
    out.reserve(groups.size() * (groups.size() - 1));
    for (std::size_t i = 0; i < groups.size(); ++i) {
        for (std::size_t j = i + 1; j < groups.size(); ++j) {
            double se = std::sqrt(mse * (1.0 / m[i].n + 1.0 / m[j].n));
            double cr = q / std::sqrt(2.0) * se;
            bool degen = se <= 0.0;
            detail::emit_both(out, groups[i], groups[j], m[i].mean - m[j].mean, se, cr, degen);
        }
    }
    return out;
}

// Dunnett's C: pairwise comparisons without a homogeneity assumption.
// Per pair (i, j):
//   SE  = sqrt(s_i^2/n_i + s_j^2/n_j)
//   CR  = (q_i s_i^2/n_i + q_j s_j^2/n_j) / (s_i^2/n_i + s_j^2/n_j) * SE / sqrt(2)
// with q_g = studentized-range quantile at (alpha, k, n_g - 1). This is the
// one formula the significance networks hinge on, so it stays isolated here
// and is validated by a family-wise error calibration rather than trusted.
inline std::vector<PairwiseComparison> dunnett_c(std::span<const GroupSample> groups,
                                                 double alpha = 0.05) {
    validate_groups(groups, 2, 2);
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("dunnett_c: alpha in (0,1)");
    auto m = detail::group_moments(groups);
    const int k = static_cast<int>(groups.size());

    std::vector<double> q(groups.size());
    for (std::size_t g = 0; g < groups.size(); ++g)
        q[g] = dist::srange_quantile(alpha, k, m[g].n - 1.0);

    std::vector<PairwiseComparison> out;
    out.reserve(groups.size() * (groups.size() - 1));
    for (std::size_t i = 0; i < groups.size(); ++i) {
        for (std::size_t j = i + 1; j < groups.size(); ++j) {
            double vi = m[i].var / m[i].n, vj = m[j].var / m[j].n;
            double se = std::sqrt(vi + vj);
            double diff = m[i].mean - m[j].mean;
            bool degen = vi + vj <= 0.0;
            double cr = degen ? 0.0 : (q[i] * vi + q[j] * vj) / (vi + vj) * se / std::sqrt(2.0);
            detail::emit_both(out, groups[i], groups[j], diff, se, cr, degen);
        }
    }
    return out;
}

// group_i,group_j,mean_difference,std_error,ci_low,ci_high,significant
inline std::string pairwise_table_csv(std::span<const PairwiseComparison> table) {
    std::string out = "group_i,group_j,mean_difference,std_error,ci_low,ci_high,significant\n";
    for (const auto& c : table) {
        out += c.group_i + ',' + c.group_j + ',' + format_fixed(c.mean_difference, 9) + ',' +
               format_fixed(c.standard_error, 9) + ',' + format_fixed(c.ci_low, 9) + ',' +
               format_fixed(c.ci_high, 9) + ',' + (c.significant ? "true" : "false") + '\n';
    }
    return out;
}

// --------------------------------------------------------------------------
// Kolmogorov-Smirnov normality check (Lilliefors)
// --------------------------------------------------------------------------

// D against a normal with sample-estimated mean/sd; p-value from the
// Dallal-Wilkinson (1986) approximation, switching to Stephens' modified
// statistic polynomial when the approximation leaves its valid range
// (p > 0.1) - the convention used by standard Lilliefors implementations.
inline OmnibusResult ks_normality(std::span<const double> xs) {
    if (xs.size() < 5) throw std::invalid_argument("ks_normality: need n >= 5");
    auto d = descriptives(xs);
    if (d.variance() <= 0.0) throw std::invalid_argument("ks_normality: constant sample");

    std::vector<double> sorted(xs.begin(), xs.end());
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(sorted.size());
    double sd = d.sd();
    double dplus = 0.0, dminus = 0.0;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        double p = dist::normal_cdf((sorted[i] - d.mean) / sd);
        dplus = std::max(dplus, static_cast<double>(i + 1) / n - p);
        dminus = std::max(dminus, p - static_cast<double>(i) / n);
    }
    double ks = std::max(dplus, dminus);

    double kd, nd;
    if (n <= 100) {
        kd = ks;
        nd = n;
    } else {
        kd = ks * std::pow(n / 100.0, 0.49);
        nd = 100.0;
    }
    double p = std::exp(-7.01256 * kd * kd * (nd + 2.78019) +
                        2.99587 * kd * std::sqrt(nd + 2.78019) - 0.122119 + 0.974598 / std::sqrt(nd) +
                        1.67997 / nd);
    if (p > 0.1) {
        double kk = (std::sqrt(n) - 0.01 + 0.85 / std::sqrt(n)) * ks;
        if (kk <= 0.302)
            p = 1.0;
        else if (kk <= 0.5)
            p = 2.76773 - 19.828315 * kk + 80.709644 * kk * kk - 138.55152 * kk * kk * kk +
                81.541484 * kk * kk * kk * kk;
        else if (kk <= 0.9)
            p = -4.901232 + 40.662806 * kk - 97.490286 * kk * kk + 94.029866 * kk * kk * kk -
                32.355711 * kk * kk * kk * kk;
        else if (kk <= 1.31)
            p = 6.198765 - 19.558097 * kk + 23.186922 * kk * kk - 12.234627 * kk * kk * kk +
                2.423045 * kk * kk * kk * kk;
        else
            p = 0.0;
    }

    OmnibusResult r;
    r.test_name = "ks_normality";
    r.statistic = ks;
    r.df1 = n;
    r.p_value = std::clamp(p, 0.0, 1.0);
    return r;
}

}  // namespace fracif
