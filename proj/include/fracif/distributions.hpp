#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <mutex>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fracif/util.hpp"

// Distribution functions used by the test battery. Incomplete beta/gamma are
// series/continued-fraction evaluations targeting ~1e-14 relative accuracy
// (documented target 1e-10); quantiles invert the CDFs by safeguarded
// root finding.
namespace fracif::dist {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kInf = std::numeric_limits<double>::infinity();

// --------------------------------------------------------------------------
// Incomplete gamma: P(a,x) (lower, regularized) and Q(a,x) = 1 - P(a,x)
// --------------------------------------------------------------------------

namespace detail {

inline constexpr double kEps = 1e-15;
inline constexpr double kFpMin = 1e-300;
inline constexpr int kMaxIter = 1000;

inline double gamma_series(double a, double x) {
    double ap = a;
    double sum = 1.0 / a;
    double del = sum;
    for (int n = 0; n < kMaxIter; ++n) {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if (std::abs(del) < std::abs(sum) * kEps)
            return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
    }
    throw ConvergenceError("incomplete gamma series failed to converge (a=" +
                           std::to_string(a) + ", x=" + std::to_string(x) + ")");
}

inline double gamma_contfrac(double a, double x) {
    double b = x + 1.0 - a;
    double c = 1.0 / kFpMin;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= kMaxIter; ++i) {
        double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < kFpMin) d = kFpMin;
        c = b + an / c;
        if (std::abs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps)
            return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
    }
    throw ConvergenceError("incomplete gamma continued fraction failed to converge");
}

}  // namespace detail

inline double gammp(double a, double x) {
    if (a <= 0.0 || x < 0.0) throw std::invalid_argument("gammp: require a > 0, x >= 0");
    if (x == 0.0) return 0.0;
    if (x < a + 1.0) return detail::gamma_series(a, x);
    return 1.0 - detail::gamma_contfrac(a, x);
}

inline double gammq(double a, double x) {
    if (a <= 0.0 || x < 0.0) throw std::invalid_argument("gammq: require a > 0, x >= 0");
    if (x == 0.0) return 1.0;
    if (x < a + 1.0) return 1.0 - detail::gamma_series(a, x);
    return detail::gamma_contfrac(a, x);
}

// --------------------------------------------------------------------------
// Regularized incomplete beta I_x(a,b)
// --------------------------------------------------------------------------

namespace detail {

inline double beta_contfrac(double a, double b, double x) {
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kFpMin) d = kFpMin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::abs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::abs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) return h;
    }
    throw ConvergenceError("incomplete beta continued fraction failed to converge (a=" +
                           std::to_string(a) + ", b=" + std::to_string(b) +
                           ", x=" + std::to_string(x) + ")");
}

}  // namespace detail

inline double ibeta(double a, double b, double x) {
    if (a <= 0.0 || b <= 0.0) throw std::invalid_argument("ibeta: require a, b > 0");
    if (x < 0.0 || x > 1.0) throw std::invalid_argument("ibeta: require x in [0,1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    double bt = std::exp(std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                         a * std::log(x) + b * std::log1p(-x));
    if (x < (a + 1.0) / (a + b + 2.0)) return bt * detail::beta_contfrac(a, b, x) / a;
    return 1.0 - bt * detail::beta_contfrac(b, a, 1.0 - x) / b;
}

// --------------------------------------------------------------------------
// Normal
// --------------------------------------------------------------------------

inline double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * kPi); }

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

inline double normal_sf(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

inline double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("normal_quantile: p must be in (0,1)");
    if (p == 0.5) return 0.0;
    bool flip = p > 0.5;
    double target = flip ? 1.0 - p : p;
    // bisection on the lower tail, then Newton polish
    double lo = -40.0, hi = 0.0;
    for (int i = 0; i < 80; ++i) {
        double mid = 0.5 * (lo + hi);
        if (normal_cdf(mid) < target)
            lo = mid;
        else
            hi = mid;
    }
    double x = 0.5 * (lo + hi);
    for (int i = 0; i < 3; ++i) {
        double f = normal_cdf(x) - target;
        double d = normal_pdf(x);
        if (d <= 0.0) break;
        x -= f / d;
    }
    return flip ? -x : x;
}

// --------------------------------------------------------------------------
// Student t, F, chi-square
// --------------------------------------------------------------------------

inline double t_cdf(double x, double df) {
    if (df <= 0.0) throw std::invalid_argument("t_cdf: df must be positive");
    if (std::isinf(df)) return normal_cdf(x);
    if (x == 0.0) return 0.5;
    double tail = 0.5 * ibeta(0.5 * df, 0.5, df / (df + x * x));
    return x > 0.0 ? 1.0 - tail : tail;
}

inline double t_sf(double x, double df) { return t_cdf(-x, df); }

inline double t_quantile(double p, double df) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("t_quantile: p must be in (0,1)");
    if (df <= 0.0) throw std::invalid_argument("t_quantile: df must be positive");
    if (std::isinf(df)) return normal_quantile(p);
    if (p == 0.5) return 0.0;
    bool flip = p < 0.5;
    double target = flip ? 1.0 - p : p;
    double lo = 0.0, hi = 2.0;
    while (t_cdf(hi, df) < target && hi < 1e12) hi *= 2.0;
    for (int i = 0; i < 200; ++i) {
        double mid = 0.5 * (lo + hi);
        if (t_cdf(mid, df) < target)
            lo = mid;
        else
            hi = mid;
        if (hi - lo < 1e-14 * (1.0 + hi)) break;
    }
    double x = 0.5 * (lo + hi);
    return flip ? -x : x;
}

inline double f_cdf(double f, double df1, double df2) {
    if (df1 <= 0.0 || df2 <= 0.0) throw std::invalid_argument("f_cdf: dfs must be positive");
    if (f <= 0.0) return 0.0;
    return ibeta(0.5 * df1, 0.5 * df2, df1 * f / (df1 * f + df2));
}

inline double f_sf(double f, double df1, double df2) {
    if (df1 <= 0.0 || df2 <= 0.0) throw std::invalid_argument("f_sf: dfs must be positive");
    if (f <= 0.0) return 1.0;
    return ibeta(0.5 * df2, 0.5 * df1, df2 / (df2 + df1 * f));
}

inline double chi2_cdf(double x, double df) {
    if (df <= 0.0) throw std::invalid_argument("chi2_cdf: df must be positive");
    if (x <= 0.0) return 0.0;
    return gammp(0.5 * df, 0.5 * x);
}

inline double chi2_sf(double x, double df) {
    if (df <= 0.0) throw std::invalid_argument("chi2_sf: df must be positive");
    if (x <= 0.0) return 1.0;
    return gammq(0.5 * df, 0.5 * x);
}

// --------------------------------------------------------------------------
// Gauss-Legendre and Gauss-Hermite nodes (Newton on the recurrences), cached
// --------------------------------------------------------------------------

struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

namespace detail {

inline QuadratureRule gauss_legendre_build(int n) {
    QuadratureRule r;
    r.nodes.resize(n);
    r.weights.resize(n);
    int m = (n + 1) / 2;
    for (int i = 0; i < m; ++i) {
        double z = std::cos(kPi * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p1 = 1.0, p2 = 0.0;
            for (int j = 1; j <= n; ++j) {
                double p3 = p2;
                p2 = p1;
                p1 = ((2.0 * j - 1.0) * z * p2 - (j - 1.0) * p3) / j;
            }
            pp = n * (z * p1 - p2) / (z * z - 1.0);
            double z1 = z;
            z = z1 - p1 / pp;
            if (std::abs(z - z1) < 1e-15) break;
        }
        r.nodes[i] = -z;
        r.nodes[n - 1 - i] = z;
        r.weights[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        r.weights[n - 1 - i] = r.weights[i];
    }
    return r;
}

// physicists' convention: integrates f against exp(-x^2)
inline QuadratureRule gauss_hermite_build(int n) {
    QuadratureRule r;
    r.nodes.resize(n);
    r.weights.resize(n);
    const double pim4 = 0.7511255444649425;  // pi^{-1/4}
    int m = (n + 1) / 2;
    double z = 0.0, pp = 0.0;
    for (int i = 0; i < m; ++i) {
        if (i == 0)
            z = std::sqrt(2.0 * n + 1.0) - 1.85575 * std::pow(2.0 * n + 1.0, -1.0 / 6.0);
        else if (i == 1)
            z -= 1.14 * std::pow(n, 0.426) / z;
        else if (i == 2)
            z = 1.86 * z - 0.86 * r.nodes[0];
        else if (i == 3)
            z = 1.91 * z - 0.91 * r.nodes[1];
        else
            z = 2.0 * z - r.nodes[i - 2];
        for (int it = 0; it < 200; ++it) {
            double p1 = pim4, p2 = 0.0;
            for (int j = 1; j <= n; ++j) {
                double p3 = p2;
                p2 = p1;
                p1 = z * std::sqrt(2.0 / j) * p2 - std::sqrt((j - 1.0) / j) * p3;
            }
            pp = std::sqrt(2.0 * n) * p2;
            double z1 = z;
            z = z1 - p1 / pp;
            if (std::abs(z - z1) < 1e-15) break;
        }
        r.nodes[i] = z;
        r.nodes[n - 1 - i] = -z;
        r.weights[i] = 2.0 / (pp * pp);
        r.weights[n - 1 - i] = r.weights[i];
    }
    // nodes come out descending on the first half; sort ascending for sanity
    std::vector<std::pair<double, double>> pairs(n);
    for (int i = 0; i < n; ++i) pairs[i] = {r.nodes[i], r.weights[i]};
    std::sort(pairs.begin(), pairs.end());
    for (int i = 0; i < n; ++i) {
        r.nodes[i] = pairs[i].first;
        r.weights[i] = pairs[i].second;
    }
    return r;
}

template <QuadratureRule (*Build)(int)>
inline const QuadratureRule& cached_rule(int n) {
    static std::map<int, QuadratureRule> cache;
    static std::mutex mutex;
    std::lock_guard<std::mutex> lock(mutex);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, Build(n)).first;
    return it->second;
}

}  // namespace detail

inline const QuadratureRule& gauss_legendre(int n) {
    if (n < 1) throw std::invalid_argument("gauss_legendre: n must be >= 1");
    return detail::cached_rule<detail::gauss_legendre_build>(n);
}

inline const QuadratureRule& gauss_hermite(int n) {
    if (n < 1) throw std::invalid_argument("gauss_hermite: n must be >= 1");
    return detail::cached_rule<detail::gauss_hermite_build>(n);
}

// --------------------------------------------------------------------------
// Studentized range distribution Q_{k,df}
// --------------------------------------------------------------------------

namespace detail {

// CDF of the range of k iid standard normals:
//   P(W <= w) = k * Int phi(z) * [Phi(z) - Phi(z-w)]^{k-1} dz
inline double normal_range_cdf(double w, int k) {
    if (w <= 0.0) return 0.0;
    const QuadratureRule& gl = gauss_legendre(20);
    const double lo = -8.5, hi = 8.5;
    const int panels = 12;
    const double width = (hi - lo) / panels;
    KahanSum total;
    for (int p = 0; p < panels; ++p) {
        double a = lo + p * width, b = a + width;
        double c = 0.5 * (a + b), h = 0.5 * (b - a);
        for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
            double z = c + h * gl.nodes[i];
            double inner = normal_cdf(z) - normal_cdf(z - w);
            double val = normal_pdf(z) * std::pow(inner, k - 1);
            total.add(gl.weights[i] * h * val);
        }
    }
    double cdf = k * total.value();
    return std::min(1.0, std::max(0.0, cdf));
}

}  // namespace detail

// P(Q_{k,df} <= q); df may be infinity.
inline double srange_cdf(double q, int k, double df) {
    if (k < 2) throw std::invalid_argument("srange_cdf: k must be >= 2");
    if (!(df >= 1.0)) throw std::invalid_argument("srange_cdf: df must be >= 1 (or infinity)");
    if (q <= 0.0) return 0.0;
    if (std::isinf(df) || df > 1e7) return detail::normal_range_cdf(q, k);

    // outer integral over s = chi_df / sqrt(df)
    const double sd = 1.0 / std::sqrt(2.0 * df);
    const double lo = std::max(0.0, 1.0 - 12.0 * sd);
    const double hi = 1.0 + 12.0 * sd + 4.0 / df;
    const double log_norm =
        0.5 * df * std::log(df) - (0.5 * df - 1.0) * std::log(2.0) - std::lgamma(0.5 * df);
    const QuadratureRule& gl = gauss_legendre(15);
    const int panels = 24;
    const double width = (hi - lo) / panels;
    KahanSum total;
    for (int p = 0; p < panels; ++p) {
        double a = lo + p * width, b = a + width;
        double c = 0.5 * (a + b), h = 0.5 * (b - a);
        for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
            double s = c + h * gl.nodes[i];
            if (s <= 0.0) continue;
            double log_pdf = log_norm + (df - 1.0) * std::log(s) - 0.5 * df * s * s;
            if (log_pdf < -745.0) continue;
            total.add(gl.weights[i] * h * std::exp(log_pdf) * detail::normal_range_cdf(q * s, k));
        }
    }
    return std::min(1.0, std::max(0.0, total.value()));
}

// q such that P(Q_{k,df} <= q) = 1 - alpha, to ~1e-9 (Illinois iteration).
// Results are memoized: post-hoc procedures request the same quantile many
// times over.
inline double srange_quantile(double alpha, int k, double df) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::invalid_argument("srange_quantile: alpha must be in (0,1)");
    if (k < 2) throw std::invalid_argument("srange_quantile: k must be >= 2");
    if (!(df >= 1.0)) throw std::invalid_argument("srange_quantile: df must be >= 1 (or infinity)");

    struct Key {
        double alpha;
        int k;
        double df;
        bool operator<(const Key& o) const {
            if (alpha != o.alpha) return alpha < o.alpha;
            if (k != o.k) return k < o.k;
            return df < o.df;
        }
    };
    static std::map<Key, double> cache;
    static std::mutex mutex;
    {
        std::lock_guard<std::mutex> lock(mutex);
        auto it = cache.find({alpha, k, df});
        if (it != cache.end()) return it->second;
    }

    const double target = 1.0 - alpha;
    double lo = 1e-6, hi = 2.0;
    double flo = srange_cdf(lo, k, df) - target;
    double fhi = srange_cdf(hi, k, df) - target;
    int expand = 0;
    while (fhi < 0.0) {
        lo = hi;
        flo = fhi;
        hi *= 2.0;
        fhi = srange_cdf(hi, k, df) - target;
        if (++expand > 60)
            throw ConvergenceError("srange_quantile: failed to bracket quantile (alpha=" +
                                   std::to_string(alpha) + ", k=" + std::to_string(k) +
                                   ", df=" + std::to_string(df) + ")");
    }

    double q = hi;
    int side = 0;
    bool converged = false;
    for (int it = 0; it < 200; ++it) {
        q = (flo * hi - fhi * lo) / (flo - fhi);
        if (!(q > lo && q < hi)) q = 0.5 * (lo + hi);
        double fq = srange_cdf(q, k, df) - target;
        if (std::abs(fq) < 1e-13 || hi - lo < 1e-10) {
            converged = true;
            break;
        }
        if (fq < 0.0) {
            lo = q;
            flo = fq;
            if (side == -1) fhi *= 0.5;
            side = -1;
        } else {
            hi = q;
            fhi = fq;
            if (side == 1) flo *= 0.5;
            side = 1;
        }
    }
    if (!converged && hi - lo > 1e-7)
        throw ConvergenceError("srange_quantile: root finding did not converge (alpha=" +
                               std::to_string(alpha) + ", k=" + std::to_string(k) + ", df=" +
                               std::to_string(df) + ", bracket width=" + std::to_string(hi - lo) + ")");

    std::lock_guard<std::mutex> lock(mutex);
    cache.emplace(Key{alpha, k, df}, q);
    return q;
}

}  // namespace fracif::dist
