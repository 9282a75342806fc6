#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fracif/distributions.hpp"
#include "fracif/indicators.hpp"
#include "fracif/util.hpp"

namespace fracif {

// Level-1 outcomes grouped into level-2 clusters.
struct ClusteredOutcomes {
    struct Observation {
        double y = 0.0;
        std::string cluster;
    };
    std::vector<Observation> observations;

    std::size_t n_clusters() const {
        std::map<std::string, int> seen;
        for (const auto& o : observations) seen[o.cluster] = 1;
        return seen.size();
    }
};

struct FitResult {
    double beta0 = 0.0;                 // fixed intercept (log scale for Poisson)
    double sigma2 = 0.0;                // level-2 variance
    double se_beta0_naive = 0.0;
    double se_beta0_sandwich = 0.0;
    double se_sigma2_naive = 0.0;
    double se_sigma2_sandwich = 0.0;
    double loglik = 0.0;
    int n_quadrature = 0;
    bool converged = false;
    bool sigma_boundary = false;        // variance pinned at the zero boundary
    int iterations = 0;
    double outcome_mean = 0.0;          // raw-data diagnostics (overdispersion evidence)
    double outcome_variance = 0.0;
    std::size_t n_observations = 0;
    std::size_t n_clusters = 0;
    std::vector<double> loglik_trace;   // per accepted optimizer iteration
};

// --------------------------------------------------------------------------
// Marginal likelihood of the two-level random-intercept Poisson model,
// evaluated by adaptive Gauss-Hermite quadrature (1 node = Laplace).
//
// Cluster j with sufficient statistics (S_j = sum y_i, n_j):
//   L_j = Int exp(S_j (b0+u) - n_j e^{b0+u}) phi(u; 0, sigma^2) du
// Real-valued y uses the same kernel (quasi-likelihood); the Gamma(y+1)
// normalization enters as a constant through the continuous gamma function.
// --------------------------------------------------------------------------

class PoissonRiLikelihood {
public:
    PoissonRiLikelihood(const ClusteredOutcomes& data, int n_quadrature)
        : nodes_(n_quadrature) {
        if (n_quadrature < 1) throw std::invalid_argument("n_quadrature must be >= 1");
        std::map<std::string, std::size_t> index;
        for (const auto& o : data.observations) {
            if (!(o.y >= 0.0) || !std::isfinite(o.y))
                throw std::invalid_argument("outcomes must be finite and >= 0");
            auto [it, inserted] = index.emplace(o.cluster, clusters_.size());
            if (inserted) clusters_.push_back({o.cluster, 0.0, 0.0, 0.0});
            Cluster& c = clusters_[it->second];
            c.sum_y += o.y;
            c.n += 1.0;
            c.lgamma_const -= std::lgamma(o.y + 1.0);
            n_obs_ += 1;
        }
        if (clusters_.size() < 2)
            throw std::invalid_argument("need at least 2 clusters to identify sigma2");
        bool any_positive = false;
        for (const auto& c : clusters_) any_positive |= c.sum_y > 0.0;
        if (!any_positive) throw std::invalid_argument("all outcomes are zero");
        const auto& rule = dist::gauss_hermite(n_quadrature);
        log_weights_.resize(rule.nodes.size());
        for (std::size_t m = 0; m < rule.nodes.size(); ++m)
            log_weights_[m] = std::log(rule.weights[m]) + rule.nodes[m] * rule.nodes[m];
    }

    std::size_t n_clusters() const { return clusters_.size(); }
    std::size_t n_observations() const { return n_obs_; }
    int n_quadrature() const { return nodes_; }

    // log-likelihood at (beta0, log sigma); optionally the gradient and the
    // per-cluster score vectors (in the same parameterization).
    double eval(double beta0, double log_sigma, std::array<double, 2>* grad = nullptr,
                std::vector<std::array<double, 2>>* scores = nullptr) const {
        const double sigma = std::exp(log_sigma);
        const double sigma2 = sigma * sigma;
        const auto& rule = dist::gauss_hermite(nodes_);
        if (grad) (*grad) = {0.0, 0.0};
        if (scores) scores->assign(clusters_.size(), {0.0, 0.0});

        KahanSum total;
        for (std::size_t j = 0; j < clusters_.size(); ++j) {
            const Cluster& c = clusters_[j];
            double u_hat = posterior_mode(c, beta0, sigma2);
            double curv = c.n * std::exp(beta0 + u_hat) + 1.0 / sigma2;
            double tau = 1.0 / std::sqrt(curv);

            // log integrand including the normal density of u
            auto log_h = [&](double u) {
                return c.sum_y * (beta0 + u) - c.n * std::exp(beta0 + u) -
                       0.5 * u * u / sigma2 - std::log(sigma) - 0.5 * std::log(2.0 * dist::kPi);
            };

            double max_term = -dist::kInf;
            std::vector<double> terms(rule.nodes.size());
            std::vector<double> us(rule.nodes.size());
            for (std::size_t m = 0; m < rule.nodes.size(); ++m) {
                double u = u_hat + std::sqrt(2.0) * tau * rule.nodes[m];
                us[m] = u;
                terms[m] = log_weights_[m] + log_h(u);
                max_term = std::max(max_term, terms[m]);
            }
            KahanSum sum_exp;
            for (double t : terms) sum_exp.add(std::exp(t - max_term));
            double log_lj = std::log(std::sqrt(2.0) * tau) + max_term + std::log(sum_exp.value());
            total.add(log_lj + c.lgamma_const);

            if (grad || scores) {
                double denom = sum_exp.value();
                double g_b0 = 0.0, g_ls = 0.0;
                for (std::size_t m = 0; m < rule.nodes.size(); ++m) {
                    double p = std::exp(terms[m] - max_term) / denom;
                    double u = us[m];
                    g_b0 += p * (c.sum_y - c.n * std::exp(beta0 + u));
                    g_ls += p * (u * u / sigma2 - 1.0);
                }
                if (grad) {
                    (*grad)[0] += g_b0;
                    (*grad)[1] += g_ls;
                }
                if (scores) (*scores)[j] = {g_b0, g_ls};
            }
        }
        return total.value();
    }

private:
    struct Cluster {
        std::string id;
        double sum_y;
        double n;
        double lgamma_const;
    };

    // mode of S(b0+u) - n e^{b0+u} - u^2/(2 sigma^2): strictly concave,
    // Newton with step halving
    double posterior_mode(const Cluster& c, double beta0, double sigma2) const {
        double u = 0.0;
        auto d1 = [&](double x) { return c.sum_y - c.n * std::exp(beta0 + x) - x / sigma2; };
        for (int it = 0; it < 200; ++it) {
            double g = d1(u);
            double h = -c.n * std::exp(beta0 + u) - 1.0 / sigma2;
            double step = -g / h;
            double scale = 1.0;
            // keep exp(beta0+u) finite
            while (std::abs(u + scale * step) > 700.0 && scale > 1e-12) scale *= 0.5;
            u += scale * step;
            if (std::abs(scale * step) < 1e-13 * (1.0 + std::abs(u))) break;
        }
        return u;
    }

    std::vector<Cluster> clusters_;
    std::vector<double> log_weights_;
    std::size_t n_obs_ = 0;
    int nodes_;
};

// --------------------------------------------------------------------------
// Quasi-Newton (BFGS) minimizer with backtracking line search
// --------------------------------------------------------------------------

namespace detail {

struct OptimResult {
    std::vector<double> x;
    double f = 0.0;
    bool converged = false;
    int iterations = 0;
    std::vector<double> f_trace;  // accepted objective values
    bool hit_lower_bound = false;
};

// Minimizes f(x, grad). Lower bounds are enforced by clamping; a parameter
// resting on its bound is excluded from the convergence check on its
// gradient coordinate.
inline OptimResult bfgs_minimize(
    const std::function<double(const std::vector<double>&, std::vector<double>&)>& fn,
    std::vector<double> x0, const std::vector<double>& lower_bounds, double grad_tol = 1e-8,
    double step_tol = 1e-10, int max_iter = 500) {
    const std::size_t d = x0.size();
    OptimResult res;
    res.x = std::move(x0);

    std::vector<double> g(d), g_new(d);
    double f = fn(res.x, g);
    res.f_trace.push_back(f);

    // inverse Hessian approximation
    std::vector<std::vector<double>> H(d, std::vector<double>(d, 0.0));
    for (std::size_t i = 0; i < d; ++i) H[i][i] = 1.0;

    auto clamp = [&](std::vector<double>& x) {
        for (std::size_t i = 0; i < d; ++i) x[i] = std::max(x[i], lower_bounds[i]);
    };
    auto converged_at = [&](const std::vector<double>& x, const std::vector<double>& grad,
                            double step_norm) {
        double gmax = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            bool on_bound = x[i] <= lower_bounds[i] + 1e-12 && grad[i] > 0.0;
            if (!on_bound) gmax = std::max(gmax, std::abs(grad[i]));
        }
        return gmax < grad_tol && step_norm < step_tol;
    };

    for (int iter = 0; iter < max_iter; ++iter) {
        res.iterations = iter + 1;
        std::vector<double> p(d, 0.0);
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t k = 0; k < d; ++k) p[i] -= H[i][k] * g[k];

        double slope = 0.0;
        for (std::size_t i = 0; i < d; ++i) slope += p[i] * g[i];
        if (slope >= 0.0) {  // reset to steepest descent
            for (std::size_t i = 0; i < d; ++i) {
                for (std::size_t k = 0; k < d; ++k) H[i][k] = (i == k) ? 1.0 : 0.0;
                p[i] = -g[i];
            }
            slope = 0.0;
            for (std::size_t i = 0; i < d; ++i) slope += p[i] * g[i];
            if (slope == 0.0) {
                res.converged = true;
                break;
            }
        }

        double alpha = 1.0;
        std::vector<double> x_new(d);
        double f_new = f;
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            for (std::size_t i = 0; i < d; ++i) x_new[i] = res.x[i] + alpha * p[i];
            clamp(x_new);
            f_new = fn(x_new, g_new);
            if (std::isfinite(f_new) && f_new <= f + 1e-4 * alpha * slope) {
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) {
            // objective cannot decrease along this direction at double
            // precision; treat a small gradient as converged
            double gmax = 0.0;
            for (std::size_t i = 0; i < d; ++i) {
                bool on_bound = res.x[i] <= lower_bounds[i] + 1e-12 && g[i] > 0.0;
                if (!on_bound) gmax = std::max(gmax, std::abs(g[i]));
            }
            res.converged = gmax < 1e-5 * std::max(1.0, std::abs(f));
            break;
        }

        double step_norm = 0.0;
        std::vector<double> s(d), yv(d);
        for (std::size_t i = 0; i < d; ++i) {
            s[i] = x_new[i] - res.x[i];
            yv[i] = g_new[i] - g[i];
            step_norm = std::max(step_norm, std::abs(s[i]));
        }
        double f_prev = f;
        res.x = x_new;
        f = f_new;
        g = g_new;
        res.f_trace.push_back(f);

        // numerically stationary: the objective can no longer move even when
        // the formal step tolerance is not met (flat boundary directions)
        bool stationary = f_prev - f < 1e-14 * (1.0 + std::abs(f));
        if (converged_at(res.x, g, step_norm) ||
            (stationary && converged_at(res.x, g, 0.0))) {
            res.converged = true;
            break;
        }

        double sy = 0.0;
        for (std::size_t i = 0; i < d; ++i) sy += s[i] * yv[i];
        if (sy > 1e-12) {  // BFGS update of the inverse Hessian
            std::vector<double> Hy(d, 0.0);
            for (std::size_t i = 0; i < d; ++i)
                for (std::size_t k = 0; k < d; ++k) Hy[i] += H[i][k] * yv[k];
            double yHy = 0.0;
            for (std::size_t i = 0; i < d; ++i) yHy += yv[i] * Hy[i];
            for (std::size_t i = 0; i < d; ++i)
                for (std::size_t k = 0; k < d; ++k)
                    H[i][k] += (sy + yHy) * s[i] * s[k] / (sy * sy) -
                               (Hy[i] * s[k] + s[i] * Hy[k]) / sy;
        }
    }
    for (std::size_t i = 0; i < d; ++i)
        res.hit_lower_bound |= res.x[i] <= lower_bounds[i] + 1e-10;
    res.f = f;
    return res;
}

// Central-difference Hessian of a scalar function via its analytic gradient.
inline std::vector<std::vector<double>> numeric_hessian(
    const std::function<void(const std::vector<double>&, std::vector<double>&)>& grad_fn,
    const std::vector<double>& x, double rel_step = 1e-5) {
    const std::size_t d = x.size();
    std::vector<std::vector<double>> hess(d, std::vector<double>(d, 0.0));
    std::vector<double> gp(d), gm(d);
    for (std::size_t i = 0; i < d; ++i) {
        double h = rel_step * std::max(1.0, std::abs(x[i]));
        std::vector<double> xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        grad_fn(xp, gp);
        grad_fn(xm, gm);
        for (std::size_t k = 0; k < d; ++k) hess[i][k] = (gp[k] - gm[k]) / (2.0 * h);
    }
    // symmetrize
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t k = i + 1; k < d; ++k) {
            double v = 0.5 * (hess[i][k] + hess[k][i]);
            hess[i][k] = hess[k][i] = v;
        }
    return hess;
}

inline std::array<std::array<double, 2>, 2> invert2x2(const std::array<std::array<double, 2>, 2>& a,
                                                      double* condition = nullptr) {
    double det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    double norm = std::max(std::abs(a[0][0]) + std::abs(a[0][1]), std::abs(a[1][0]) + std::abs(a[1][1]));
    double cond = det == 0.0 ? dist::kInf : norm * norm / std::abs(det);
    if (condition) *condition = cond;
    if (det == 0.0 || !std::isfinite(det) || cond > 1e14)
        throw ConvergenceError("singular information matrix (condition number ~" +
                               std::to_string(cond) + ")");
    return {{{a[1][1] / det, -a[0][1] / det}, {-a[1][0] / det, a[0][0] / det}}};
}

}  // namespace detail

struct FitOptions {
    double grad_tol = 1e-8;
    double step_tol = 1e-10;
    int max_iter = 500;
    double log_sigma_floor = std::log(1e-6);
};

namespace detail {

inline void outcome_diagnostics(const ClusteredOutcomes& data, FitResult& r) {
    KahanSum s;
    for (const auto& o : data.observations) s.add(o.y);
    double n = static_cast<double>(data.observations.size());
    r.outcome_mean = s.value() / n;
    KahanSum ss;
    for (const auto& o : data.observations) ss.add((o.y - r.outcome_mean) * (o.y - r.outcome_mean));
    r.outcome_variance = n > 1 ? ss.value() / (n - 1.0) : 0.0;
    r.n_observations = data.observations.size();
}

// Starting sigma: sd of cluster log-means, floored at 0.1.
inline double starting_log_sigma(const ClusteredOutcomes& data) {
    std::map<std::string, std::pair<double, double>> acc;  // sum, n
    for (const auto& o : data.observations) {
        auto& a = acc[o.cluster];
        a.first += o.y;
        a.second += 1.0;
    }
    std::vector<double> log_means;
    for (const auto& [id, a] : acc) {
        double mean = a.first / a.second;
        if (mean > 0.0) log_means.push_back(std::log(mean));
    }
    double sd = 0.1;
    if (log_means.size() >= 2) {
        double m = 0.0;
        for (double v : log_means) m += v;
        m /= static_cast<double>(log_means.size());
        double ss = 0.0;
        for (double v : log_means) ss += (v - m) * (v - m);
        sd = std::max(0.1, std::sqrt(ss / static_cast<double>(log_means.size() - 1)));
    }
    return std::log(sd);
}

// Naive (inverse observed information) and cluster-robust sandwich standard
// errors, both delta-transformed from (beta0, log sigma) to (beta0, sigma2).
inline void fill_standard_errors(const PoissonRiLikelihood& lik, FitResult& r) {
    const double log_sigma = 0.5 * std::log(r.sigma2);
    std::vector<double> theta = {r.beta0, log_sigma};

    auto grad_fn = [&](const std::vector<double>& x, std::vector<double>& g) {
        std::array<double, 2> ga{};
        lik.eval(x[0], x[1], &ga);
        g = {ga[0], ga[1]};
    };
    auto hess = detail::numeric_hessian(grad_fn, theta);
    std::array<std::array<double, 2>, 2> info = {{{-hess[0][0], -hess[0][1]}, {-hess[1][0], -hess[1][1]}}};
    double condition = 0.0;
    auto naive_cov = detail::invert2x2(info, &condition);

    std::vector<std::array<double, 2>> scores;
    lik.eval(r.beta0, log_sigma, nullptr, &scores);
    std::array<std::array<double, 2>, 2> b{{{0.0, 0.0}, {0.0, 0.0}}};
    for (const auto& s : scores) {
        b[0][0] += s[0] * s[0];
        b[0][1] += s[0] * s[1];
        b[1][0] += s[1] * s[0];
        b[1][1] += s[1] * s[1];
    }
    // V = A^{-1} B A^{-1}
    auto mul = [](const std::array<std::array<double, 2>, 2>& x,
                  const std::array<std::array<double, 2>, 2>& y) {
        std::array<std::array<double, 2>, 2> z{{{0.0, 0.0}, {0.0, 0.0}}};
        for (int i = 0; i < 2; ++i)
            for (int k = 0; k < 2; ++k)
                for (int m = 0; m < 2; ++m) z[i][k] += x[i][m] * y[m][k];
        return z;
    };
    auto sandwich_cov = mul(mul(naive_cov, b), naive_cov);

    // d sigma2 / d log_sigma = 2 sigma2
    const double jac = 2.0 * r.sigma2;
    r.se_beta0_naive = std::sqrt(std::max(0.0, naive_cov[0][0]));
    r.se_beta0_sandwich = std::sqrt(std::max(0.0, sandwich_cov[0][0]));
    r.se_sigma2_naive = std::sqrt(std::max(0.0, naive_cov[1][1])) * jac;
    r.se_sigma2_sandwich = std::sqrt(std::max(0.0, sandwich_cov[1][1])) * jac;
}

}  // namespace detail

// ML fit of the two-level random-intercept Poisson model.
inline FitResult fit_poisson_ri(const ClusteredOutcomes& data, int n_quadrature = 15,
                                const FitOptions& opts = {}) {
    PoissonRiLikelihood lik(data, n_quadrature);
    FitResult r;
    r.n_quadrature = n_quadrature;
    r.n_clusters = lik.n_clusters();
    detail::outcome_diagnostics(data, r);

    double beta0_start = std::log(std::max(r.outcome_mean, 1e-12));
    std::vector<double> x0 = {beta0_start, detail::starting_log_sigma(data)};
    std::vector<double> lb = {-1e30, opts.log_sigma_floor};

    auto objective = [&](const std::vector<double>& x, std::vector<double>& g) {
        std::array<double, 2> ga{};
        double ll = lik.eval(x[0], x[1], &ga);
        g = {-ga[0], -ga[1]};
        return -ll;
    };
    auto fit = detail::bfgs_minimize(objective, x0, lb, opts.grad_tol, opts.step_tol, opts.max_iter);

    r.beta0 = fit.x[0];
    double sigma = std::exp(fit.x[1]);
    r.sigma2 = sigma * sigma;
    r.loglik = -fit.f;
    r.converged = fit.converged;
    r.iterations = fit.iterations;
    r.loglik_trace.reserve(fit.f_trace.size());
    for (double f : fit.f_trace) r.loglik_trace.push_back(-f);

    // a tiny interior optimum is indistinguishable from the zero boundary and
    // leaves the information matrix near-singular; classify it as boundary
    if (fit.x[1] <= opts.log_sigma_floor + 1e-9 || r.sigma2 < 1e-9) {
        // boundary: the variance component vanishes and the model collapses
        // to a pooled Poisson intercept
        r.sigma_boundary = true;
        r.sigma2 = 0.0;
        r.se_sigma2_naive = 0.0;
        r.se_sigma2_sandwich = 0.0;
        double sum_y = r.outcome_mean * static_cast<double>(r.n_observations);
        r.beta0 = std::log(std::max(r.outcome_mean, 1e-300));
        if (sum_y > 0.0) r.se_beta0_naive = r.se_beta0_sandwich = 1.0 / std::sqrt(sum_y);
        // converged iff the projected gradient vanishes at the constrained
        // optimum: intercept score zero, variance score pointing into the bound
        std::array<double, 2> g{};
        double ll = lik.eval(r.beta0, opts.log_sigma_floor, &g);
        r.loglik = ll;
        r.converged = std::abs(g[0]) < 1e-6 * std::max(1.0, std::abs(ll)) && g[1] < 1e-8;
        return r;
    }
    try {
        detail::fill_standard_errors(lik, r);
    } catch (const ConvergenceError&) {
        // near-singular information: leave the standard errors unset
        r.se_beta0_naive = r.se_beta0_sandwich = 0.0;
        r.se_sigma2_naive = r.se_sigma2_sandwich = 0.0;
    }
    return r;
}

struct SandwichSe {
    double se_beta0 = 0.0;
    double se_sigma2 = 0.0;
    double score_sum_norm = 0.0;  // norm of the summed per-cluster scores
};

// Recomputes the cluster-robust standard errors of a converged fit.
inline SandwichSe sandwich_se(const FitResult& fit, const ClusteredOutcomes& data) {
    if (!fit.converged) throw std::invalid_argument("sandwich_se: fit did not converge");
    if (fit.sigma_boundary || fit.sigma2 <= 0.0)
        throw std::invalid_argument("sandwich_se: variance on the zero boundary");
    PoissonRiLikelihood lik(data, fit.n_quadrature);
    FitResult tmp = fit;
    detail::fill_standard_errors(lik, tmp);

    std::vector<std::array<double, 2>> scores;
    lik.eval(fit.beta0, 0.5 * std::log(fit.sigma2), nullptr, &scores);
    double s0 = 0.0, s1 = 0.0;
    for (const auto& s : scores) {
        s0 += s[0];
        s1 += s[1];
    }
    return {tmp.se_beta0_sandwich, tmp.se_sigma2_sandwich, std::sqrt(s0 * s0 + s1 * s1)};
}

// --------------------------------------------------------------------------
// Log-normal variant: Gaussian random-intercept model on log(y), by ML.
// --------------------------------------------------------------------------

struct LognormalOptions {
    std::optional<double> zero_offset;  // fit log(y + eps) instead of erroring on zeros
};

inline FitResult fit_lognormal_ri(const ClusteredOutcomes& data, const LognormalOptions& lopts = {},
                                  const FitOptions& opts = {}) {
    if (data.observations.empty()) throw std::invalid_argument("no observations");
    std::vector<std::string> zero_journals;
    for (std::size_t i = 0; i < data.observations.size(); ++i)
        if (data.observations[i].y <= 0.0) zero_journals.push_back(std::to_string(i));
    if (!zero_journals.empty() && !lopts.zero_offset) {
        std::string msg = "fit_lognormal_ri: zero outcomes at indices";
        for (const auto& z : zero_journals) msg += " " + z;
        msg += " (supply zero_offset to fit log(y + eps))";
        throw std::invalid_argument(msg);
    }

    // per-cluster sufficient statistics of log y
    struct Cluster {
        double n = 0.0;
        double sum = 0.0;
        double ss = 0.0;  // within sum of squares, filled after means
        std::vector<double> values;
    };
    std::map<std::string, Cluster> clusters;
    for (const auto& o : data.observations) {
        double v = std::log(o.y + (lopts.zero_offset ? *lopts.zero_offset : 0.0));
        auto& c = clusters[o.cluster];
        c.n += 1.0;
        c.sum += v;
        c.values.push_back(v);
    }
    if (clusters.size() < 2) throw std::invalid_argument("need at least 2 clusters");
    for (auto& [id, c] : clusters) {
        double mean = c.sum / c.n;
        for (double v : c.values) c.ss += (v - mean) * (v - mean);
    }
    double total_n = 0.0;
    for (const auto& [id, c] : clusters) total_n += c.n;

    // loglik(beta0, log su, log se)
    auto eval = [&](const std::vector<double>& x, std::vector<double>& g) {
        double beta0 = x[0];
        double su2 = std::exp(2.0 * x[1]);
        double se2 = std::exp(2.0 * x[2]);
        double ll = -0.5 * total_n * std::log(2.0 * dist::kPi);
        double d_b0 = 0.0, d_su2 = 0.0, d_se2 = 0.0;
        for (const auto& [id, c] : clusters) {
            double lambda = se2 + c.n * su2;
            double mean = c.sum / c.n;
            double d = mean - beta0;
            ll += -0.5 * ((c.n - 1.0) * std::log(se2) + std::log(lambda) + c.ss / se2 +
                          c.n * d * d / lambda);
            d_b0 += c.n * d / lambda;
            double common = -0.5 / lambda + 0.5 * c.n * d * d / (lambda * lambda);
            d_su2 += c.n * common;
            d_se2 += common - 0.5 * (c.n - 1.0) / se2 + 0.5 * c.ss / (se2 * se2);
        }
        g = {-d_b0, -d_su2 * 2.0 * su2, -d_se2 * 2.0 * se2};
        return -ll;
    };

    double grand_mean = 0.0;
    for (const auto& [id, c] : clusters) grand_mean += c.sum;
    grand_mean /= total_n;
    std::vector<double> x0 = {grand_mean, std::log(0.3), std::log(0.5)};
    std::vector<double> lb = {-1e30, opts.log_sigma_floor, std::log(1e-8)};
    auto fit = detail::bfgs_minimize(eval, x0, lb, opts.grad_tol, opts.step_tol, opts.max_iter);

    FitResult r;
    r.n_quadrature = 0;
    r.n_clusters = clusters.size();
    detail::outcome_diagnostics(data, r);
    r.beta0 = fit.x[0];
    r.sigma2 = std::exp(2.0 * fit.x[1]);
    r.loglik = -fit.f;
    r.converged = fit.converged;
    r.iterations = fit.iterations;
    for (double f : fit.f_trace) r.loglik_trace.push_back(-f);
    if (fit.x[1] <= opts.log_sigma_floor + 1e-9) {
        r.sigma_boundary = true;
        r.sigma2 = 0.0;
        std::vector<double> g;
        double nll = eval(fit.x, g);
        r.loglik = -nll;
        double scale = 1e-6 * std::max(1.0, std::abs(nll));
        bool se_on_bound = fit.x[2] <= lb[2] + 1e-9;
        r.converged = std::abs(g[0]) < scale && g[1] > -1e-8 &&
                      (se_on_bound ? g[2] > -1e-8 : std::abs(g[2]) < scale);
        return r;
    }

    auto grad_fn = [&](const std::vector<double>& x, std::vector<double>& g) {
        std::vector<double> neg;
        eval(x, neg);
        g = {-neg[0], -neg[1], -neg[2]};
    };
    auto hess = detail::numeric_hessian(grad_fn, fit.x);
    // information on (beta0, log su); profile out log se via the full 3x3
    std::array<std::array<double, 3>, 3> info{};
    for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k) info[i][k] = -hess[i][k];
    // invert 3x3 by cofactors
    double det = info[0][0] * (info[1][1] * info[2][2] - info[1][2] * info[2][1]) -
                 info[0][1] * (info[1][0] * info[2][2] - info[1][2] * info[2][0]) +
                 info[0][2] * (info[1][0] * info[2][1] - info[1][1] * info[2][0]);
    if (det != 0.0 && std::isfinite(det)) {
        double cov00 = (info[1][1] * info[2][2] - info[1][2] * info[2][1]) / det;
        double cov11 = (info[0][0] * info[2][2] - info[0][2] * info[2][0]) / det;
        r.se_beta0_naive = r.se_beta0_sandwich = std::sqrt(std::max(0.0, cov00));
        r.se_sigma2_naive = r.se_sigma2_sandwich =
            std::sqrt(std::max(0.0, cov11)) * 2.0 * r.sigma2;
    }
    return r;
}

// --------------------------------------------------------------------------
// Wald test on the variance component, variance reduction, model suite
// --------------------------------------------------------------------------

struct WaldVarianceTest {
    double z = 0.0;
    double p_value = 1.0;
    bool significant = false;
};

// Two-sided Wald convention (z threshold 1.96 at alpha = .05). Boundary
// testing of a variance is conservative; a fit pinned at sigma2 = 0 reports
// z = 0, p = 1.
inline WaldVarianceTest wald_variance_test(double sigma2, double se_sigma2, double alpha = 0.05) {
    if (sigma2 < 0.0) throw std::invalid_argument("wald_variance_test: sigma2 must be >= 0");
    WaldVarianceTest t;
    if (sigma2 == 0.0) return t;
    if (!(se_sigma2 > 0.0))
        throw std::invalid_argument("wald_variance_test: standard error unavailable");
    t.z = sigma2 / se_sigma2;
    t.p_value = 2.0 * dist::normal_sf(t.z);
    t.significant = t.p_value < alpha;
    return t;
}

inline WaldVarianceTest wald_variance_test(const FitResult& fit, double alpha = 0.05,
                                           bool use_sandwich = true) {
    if (!fit.converged) throw std::invalid_argument("wald_variance_test: fit did not converge");
    if (fit.sigma_boundary || fit.sigma2 == 0.0) return {};
    double se = use_sandwich ? fit.se_sigma2_sandwich : fit.se_sigma2_naive;
    if (se <= 0.0 && fit.sigma2 < 1e-6) return {};  // effectively boundary, SE indeterminate
    return wald_variance_test(fit.sigma2, se, alpha);
}

struct VarianceComparison {
    double sigma2_base = 0.0;
    double sigma2_alt = 0.0;
    double reduction_percent = 0.0;
};

inline VarianceComparison variance_reduction(double sigma2_base, double sigma2_alt) {
    if (!(sigma2_base > 0.0))
        throw std::invalid_argument("variance_reduction: base variance must be positive");
    return {sigma2_base, sigma2_alt, (sigma2_base - sigma2_alt) / sigma2_base * 100.0};
}

// --------------------------------------------------------------------------
// M1..M4 model suite over an indicator table
//   M1: reference IF   M2: integer quasi-IF   M3: fractional quasi-IF
//   M4: fractional c/p ratio
// --------------------------------------------------------------------------

struct ModelRun {
    std::string model_id;
    FitResult fit;
    WaldVarianceTest wald;
    std::size_t n_journals = 0;
    std::size_t n_fields = 0;
};

struct ModelSuiteResult {
    std::optional<ModelRun> m1;  // absent when no reference IFs are supplied
    ModelRun m2;
    ModelRun m3;
    std::optional<ModelRun> m4;  // absent when no journal has a c/p ratio
    std::optional<VarianceComparison> m3_vs_m2;
    std::optional<VarianceComparison> m4_vs_m2;
    std::vector<std::string> dropped_no_field;  // journals without a field assignment
};

struct ModelSuiteOptions {
    int n_quadrature = 15;
    double alpha = 0.05;
    bool wald_sandwich = true;
    FitOptions fit;
};

// Fits the four models on identical journal sets (M2/M3 exactly; M1 is
// restricted to journals carrying a reference IF, M4 to journals with a c/p
// value). Journals without a field assignment are dropped and reported.
inline ModelSuiteResult run_model_suite(const IndicatorTable& table,
                                        const ModelSuiteOptions& opts = {}) {
    std::vector<const IndicatorRow*> rows;
    ModelSuiteResult result;
    for (const auto& r : table.rows) {
        if (r.field_id)
            rows.push_back(&r);
        else
            result.dropped_no_field.push_back(r.journal_id);
    }
    std::map<std::string, int> fields;
    for (const auto* r : rows) fields[*r->field_id] = 1;
    if (fields.size() < 2)
        throw DataError("run_model_suite: need at least 2 fields after filtering, have " +
                        std::to_string(fields.size()));

    auto fit_model = [&](const std::string& id,
                         const std::function<std::optional<double>(const IndicatorRow&)>& value)
        -> std::optional<ModelRun> {
        ClusteredOutcomes data;
        std::map<std::string, int> used_fields;
        for (const auto* r : rows) {
            auto v = value(*r);
            if (!v) continue;
            data.observations.push_back({*v, *r->field_id});
            used_fields[*r->field_id] = 1;
        }
        if (data.observations.empty()) return std::nullopt;
        if (used_fields.size() < 2)
            throw DataError("run_model_suite: model " + id + " has fewer than 2 fields");
        ModelRun run;
        run.model_id = id;
        run.fit = fit_poisson_ri(data, opts.n_quadrature, opts.fit);
        run.wald = wald_variance_test(run.fit, opts.alpha, opts.wald_sandwich);
        run.n_journals = data.observations.size();
        run.n_fields = used_fields.size();
        return run;
    };

    result.m1 = fit_model("M1", [](const IndicatorRow& r) { return r.reference_if; });
    auto m2 = fit_model("M2", [](const IndicatorRow& r) -> std::optional<double> {
        return r.quasi_if_integer;
    });
    auto m3 = fit_model("M3", [](const IndicatorRow& r) -> std::optional<double> {
        return r.quasi_if_fractional;
    });
    if (!m2 || !m3) throw DataError("run_model_suite: empty indicator table");
    result.m2 = *m2;
    result.m3 = *m3;
    result.m4 = fit_model("M4", [](const IndicatorRow& r) { return r.cp_fractional; });

    if (result.m2.fit.sigma2 > 0.0) {
        result.m3_vs_m2 = variance_reduction(result.m2.fit.sigma2, result.m3.fit.sigma2);
        if (result.m4)
            result.m4_vs_m2 = variance_reduction(result.m2.fit.sigma2, result.m4->fit.sigma2);
    }
    return result;
}

// model_id,beta0,se_beta0_naive,se_beta0_sandwich,sigma2,se_sigma2,z,p,
// n_journals,n_fields,loglik,converged ; se_sigma2 is the one the Wald test
// used (sandwich by default).
inline std::string model_report_csv(const ModelSuiteResult& suite, bool wald_sandwich = true) {
    std::string out =
        "model_id,beta0,se_beta0_naive,se_beta0_sandwich,sigma2,se_sigma2,z,p,n_journals,"
        "n_fields,loglik,converged\n";
    auto row = [&](const ModelRun& m) {
        const FitResult& f = m.fit;
        out += m.model_id + ',' + format_fixed(f.beta0, 6) + ',' +
               format_fixed(f.se_beta0_naive, 6) + ',' + format_fixed(f.se_beta0_sandwich, 6) +
               ',' + format_fixed(f.sigma2, 6) + ',' +
               format_fixed(wald_sandwich ? f.se_sigma2_sandwich : f.se_sigma2_naive, 6) + ',' +
               format_fixed(m.wald.z, 6) + ',' + format_fixed(m.wald.p_value, 6) + ',' +
               std::to_string(m.n_journals) + ',' + std::to_string(m.n_fields) + ',' +
               format_fixed(f.loglik, 6) + ',' + (f.converged ? "true" : "false") + '\n';
    };
    if (suite.m1) row(*suite.m1);
    row(suite.m2);
    row(suite.m3);
    if (suite.m4) row(*suite.m4);
    return out;
}

}  // namespace fracif
