#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "core.hpp"
#include "survival.hpp"
#include "tail.hpp"

namespace xtreat {

// ---------------------------------------------------------------------------
// covariance plug-ins
//
// Both Omega estimators are sums over the whole sample of products of
// influence terms psi. Outside the kernel window psi collapses to the
// constant -sqrt(h s / N), so the sum reduces to window suffix sums plus an
// N term; LocalSurvival serves every piece in O(log n).
// ---------------------------------------------------------------------------

inline double omega_F_local(const LocalSurvival& local, double y_n, double v1, double v2) {
    if (v2 < v1) std::swap(v1, v2);  // canonical order keeps Omega(v1,v2) bitwise symmetric
    const double thr1 = v1 * y_n;
    const double thr2 = v2 * y_n;
    const double f1 = local.survival(thr1);
    const double f2 = local.survival(thr2);
    if (!(f1 > 0.0) || !(f2 > 0.0)) throw std::runtime_error("threshold beyond data tail");
    const double n = static_cast<double>(local.n());
    const double c = std::sqrt(local.h() * f1 / n) * std::sqrt(local.h() * f2 / n);
    const double thr_hi = std::max(thr1, thr2);
    const double core = local.suffix_a2(thr_hi) / (f1 * f2) - local.suffix_a(thr1) / f1 -
                        local.suffix_a(thr2) / f2 + n;
    return c * core;
}

inline double omega_F_hat(const Dataset& ds, const std::vector<double>& weights,
                          const KernelSpec& k, double t, double h, double y_n, double v1,
                          double v2, BoundaryPolicy boundary = BoundaryPolicy::Raw) {
    return omega_F_local(LocalSurvival(ds, weights, k, t, h, boundary), y_n, v1, v2);
}

// Exceedance-scale form: `base` is 1 - alpha. Thresholds sit at the
// intermediate quantiles of levels 1 - v*base; v > 1 is allowed (the Pickands
// variance needs v in {2,4}) as long as the level stays inside (0,1).
inline double omega_Q_from_exceedance(const LocalSurvival& local, double base, double gamma_hat,
                                      double v1, double v2) {
    if (v2 < v1) std::swap(v1, v2);
    const double s1 = v1 * base;
    const double s2 = v2 * base;
    if (!(s1 > 0.0 && s1 < 1.0) || !(s2 > 0.0 && s2 < 1.0))
        throw std::domain_error("quantile level outside (0,1)");
    const double q1 = local.quantile_from_exceedance(s1);
    const double q2 = local.quantile_from_exceedance(s2);
    const double n = static_cast<double>(local.n());
    const double c = std::sqrt(local.h() * s1 / n) * std::sqrt(local.h() * s2 / n);
    const double q_hi = std::max(q1, q2);
    const double core = local.suffix_a2(q_hi) / (s1 * s2) - local.suffix_a(q1) / s1 -
                        local.suffix_a(q2) / s2 + n;
    return gamma_hat * gamma_hat * c * core;
}

inline double omega_Q_local(const LocalSurvival& local, double alpha, double gamma_hat,
                            double v1, double v2) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::domain_error("alpha must lie in (0,1)");
    return omega_Q_from_exceedance(local, 1.0 - alpha, gamma_hat, v1, v2);
}

inline double omega_Q_hat(const Dataset& ds, const std::vector<double>& weights,
                          const KernelSpec& k, double t, double h, double alpha,
                          double gamma_hat, double v1, double v2,
                          BoundaryPolicy boundary = BoundaryPolicy::Raw) {
    return omega_Q_local(LocalSurvival(ds, weights, k, t, h, boundary), alpha, gamma_hat, v1, v2);
}

// ---------------------------------------------------------------------------
// tail-index variances
// ---------------------------------------------------------------------------

// Theta' Sigma Theta / (sum_j log(1/v_j))^2 with Theta = (1-J, v_2^{-1/2},
// ..., v_J^{-1/2}). Sigma is the J x J matrix of Omega^Q values.
inline double hill_variance_quadform(const std::vector<std::vector<double>>& sigma,
                                     const std::vector<double>& vs) {
    const std::size_t J = vs.size();
    if (J < 2) throw std::invalid_argument("J must be >= 2 for variance");
    if (sigma.size() != J) throw std::invalid_argument("sigma must be J x J");
    for (const auto& row : sigma)
        if (row.size() != J) throw std::invalid_argument("sigma must be J x J");

    std::vector<double> theta(J);
    theta[0] = 1.0 - static_cast<double>(J);
    for (std::size_t j = 1; j < J; ++j) theta[j] = 1.0 / std::sqrt(vs[j]);

    double denom = 0.0;
    for (double v : vs) denom += std::log(1.0 / v);
    double quad = 0.0;
    for (std::size_t j1 = 0; j1 < J; ++j1)
        for (std::size_t j2 = 0; j2 < J; ++j2) quad += theta[j1] * theta[j2] * sigma[j1][j2];
    return quad / (denom * denom);
}

inline double hill_variance_local(const LocalSurvival& local, int k_n, const HillWeights& w,
                                  double gamma_hat) {
    if (w.J < 2) throw std::invalid_argument("J must be >= 2 for variance");
    const double base = static_cast<double>(k_n) / static_cast<double>(local.n());
    const std::size_t J = w.vs.size();
    std::vector<std::vector<double>> sigma(J, std::vector<double>(J, 0.0));
    for (std::size_t j1 = 0; j1 < J; ++j1)
        for (std::size_t j2 = j1; j2 < J; ++j2) {
            const double o = omega_Q_from_exceedance(local, base, gamma_hat, w.vs[j1], w.vs[j2]);
            sigma[j1][j2] = o;
            sigma[j2][j1] = o;
        }
    double out = hill_variance_quadform(sigma, w.vs);
    if (out < 0.0) {
        warn("Hill variance plug-in came out negative; flooring at 0");
        out = 0.0;
    }
    return out;
}

inline double hill_variance(const Dataset& ds, const std::vector<double>& weights,
                            const KernelSpec& k, double t, double h, int k_n,
                            const HillWeights& w, double gamma_hat,
                            BoundaryPolicy boundary = BoundaryPolicy::Raw) {
    return hill_variance_local(LocalSurvival(ds, weights, k, t, h, boundary), k_n, w, gamma_hat);
}

// The theorem statement carries {log2}^2 {2^gamma - 1}^2 in the denominator;
// its proof reaches the same display through {1 - 2^-gamma}^2, which differs
// by the delta-method factor (2^gamma log2)^2. The statement is the default;
// RatioScale reproduces the proof's scaling.
enum class PickandsVariance { Theorem, RatioScale };

inline double pickands_bracket(double w44, double w42, double w41, double w22, double w21,
                               double w11, double gamma) {
    const double p = std::pow(2.0, gamma);
    return std::pow(2.0, 2.0 * gamma + 2.0) * w44 -
           std::pow(2.0, gamma + 2.5) * (1.0 + p) * w42 +
           std::pow(2.0, gamma + 2.0) * w41 +
           2.0 * (1.0 + p) * (1.0 + p) * w22 -
           2.0 * std::sqrt(2.0) * (1.0 + p) * w21 +
           w11;
}

inline double pickands_variance_from_varpi(double w44, double w42, double w41, double w22,
                                           double w21, double w11, double gamma, double kappa02,
                                           double f_T,
                                           PickandsVariance flavor = PickandsVariance::Theorem) {
    if (gamma == 0.0) throw std::domain_error("Pickands variance undefined at gamma=0");
    const double log2 = std::log(2.0);
    const double p = std::pow(2.0, gamma);
    const double pref = gamma * gamma * kappa02 / (f_T * log2 * log2 * (p - 1.0) * (p - 1.0));
    double out = pref * pickands_bracket(w44, w42, w41, w22, w21, w11, gamma);
    if (flavor == PickandsVariance::RatioScale) out *= (p * log2) * (p * log2);
    return out;
}

inline double pickands_variance_local(const LocalSurvival& local, const KernelSpec& k, int k_n,
                                      double gamma_hat,
                                      PickandsVariance flavor = PickandsVariance::Theorem) {
    if (gamma_hat == 0.0) throw std::domain_error("Pickands variance undefined at gamma=0");
    const double base = static_cast<double>(k_n) / static_cast<double>(local.n());
    const double scale = local.f_T() / (gamma_hat * gamma_hat * k.kappa02);
    auto varpi = [&](double a, double b) {
        return omega_Q_from_exceedance(local, base, gamma_hat, a, b) * scale;
    };
    double out = pickands_variance_from_varpi(varpi(4, 4), varpi(4, 2), varpi(4, 1), varpi(2, 2),
                                              varpi(2, 1), varpi(1, 1), gamma_hat, k.kappa02,
                                              local.f_T(), flavor);
    if (out < 0.0) {
        warn("Pickands variance plug-in came out negative; flooring at 0");
        out = 0.0;
    }
    return out;
}

inline double pickands_variance(const Dataset& ds, const std::vector<double>& weights,
                                const KernelSpec& k, double t, double h, int k_n,
                                double gamma_hat,
                                PickandsVariance flavor = PickandsVariance::Theorem,
                                BoundaryPolicy boundary = BoundaryPolicy::Raw) {
    return pickands_variance_local(LocalSurvival(ds, weights, k, t, h, boundary), k, k_n,
                                   gamma_hat, flavor);
}

// Variance of the fit's tail-index estimator, dispatched on its method.
inline double gamma_variance_local(const LocalSurvival& local, const KernelSpec& k,
                                   const TailFit& fit,
                                   PickandsVariance flavor = PickandsVariance::Theorem) {
    return fit.method == GammaMethod::Hill
               ? hill_variance_local(local, fit.k_n, make_hill_weights(fit.J), fit.gamma_hat)
               : pickands_variance_local(local, k, fit.k_n, fit.gamma_hat, flavor);
}

// ---------------------------------------------------------------------------
// treatment effects
// ---------------------------------------------------------------------------

inline double eqte(const TailFit& fit1, const TailFit& fit2, double alpha) {
    const double denom = extreme_quantile(fit2, alpha);
    if (!(denom > 0.0)) throw std::domain_error("denominator quantile must be positive");
    return extreme_quantile(fit1, alpha) / denom;
}

inline double eate(const TailFit& fit1, const TailFit& fit2, double alpha) {
    const double denom = tail_mean(fit2, alpha);
    if (!(denom > 0.0)) throw std::domain_error("denominator tail mean must be positive");
    return tail_mean(fit1, alpha) / denom;
}

struct EffectEstimate {
    double t1 = 0.0, t2 = 0.0;
    double alpha = 0.0;
    double eqte = 1.0;
    double eate = 1.0;
    double var_gamma_t1 = 0.0, var_gamma_t2 = 0.0;
    int k_n = 0;
    double h = 0.0;
};

inline EffectEstimate effect_estimate(const TailFit& fit1, double var1, const TailFit& fit2,
                                      double var2, double alpha) {
    EffectEstimate e;
    e.t1 = fit1.t;
    e.t2 = fit2.t;
    e.alpha = alpha;
    e.eqte = eqte(fit1, fit2, alpha);
    e.eate = eate(fit1, fit2, alpha);
    e.var_gamma_t1 = var1;
    e.var_gamma_t2 = var2;
    e.k_n = fit1.k_n;
    e.h = fit1.h;
    return e;
}

// ---------------------------------------------------------------------------
// simultaneous confidence bands
// ---------------------------------------------------------------------------

enum class BandKind { Eqte, Eate, EateUnadjusted };

struct EffectBand {
    std::vector<double> rho;
    std::vector<double> center, lower, upper;
    std::vector<bool> usable;
    double confidence = 0.95;
};

inline std::vector<double> default_rho_grid(double alpha_n, double delta0,
                                            std::size_t points = 21) {
    return linspace(delta0 * alpha_n, alpha_n, points);
}

// Multiplicative band center * exp(+-z sqrt(s1+s2) log(k/(N(1-rho))) /
// sqrt(k h)). The log factor is negative for rho below the intermediate
// level 1-k/N; such grid points carry no valid band (for the adjusted EATE
// the factor also enters a denominator) and are flagged unusable with the
// band collapsed onto the center.
inline EffectBand effect_band(const TailFit& fit1, double var1, const TailFit& fit2, double var2,
                              double alpha_n, double delta0, double confidence,
                              const std::vector<double>& rho_grid, BandKind kind) {
    if (fit1.k_n != fit2.k_n || fit1.n != fit2.n || fit1.h != fit2.h)
        throw std::invalid_argument("band requires fits sharing k_n, h, and sample size");
    if (!(alpha_n > 0.0 && alpha_n < 1.0)) throw std::domain_error("alpha must lie in (0,1)");
    if (!(delta0 > 0.0 && delta0 < 1.0)) throw std::domain_error("delta0 must lie in (0,1)");
    if (!(confidence >= 0.0 && confidence < 1.0))
        throw std::domain_error("confidence must lie in [0,1)");
    if (!(var1 >= 0.0) || !(var2 >= 0.0))
        throw std::invalid_argument("variances must be nonnegative");
    if (rho_grid.empty()) throw std::invalid_argument("rho grid must be nonempty");
    const double grid_lo = delta0 * alpha_n;
    for (double r : rho_grid)
        if (!(r >= grid_lo && r <= alpha_n))
            throw std::invalid_argument("rho grid must lie in [delta0*alpha_n, alpha_n]");

    const double z = normal_quantile(0.5 * (1.0 + confidence));
    const double root_kh = std::sqrt(static_cast<double>(fit1.k_n) * fit1.h);
    const double k_over_n = static_cast<double>(fit1.k_n) / static_cast<double>(fit1.n);

    EffectBand band;
    band.confidence = confidence;
    band.rho.reserve(rho_grid.size());
    for (double rho : rho_grid) {
        const double center = kind == BandKind::Eqte ? eqte(fit1, fit2, rho)
                                                     : eate(fit1, fit2, rho);
        const double logfac = std::log(k_over_n / (1.0 - rho));
        double s1 = var1, s2 = var2;
        bool ok;
        if (kind == BandKind::Eate) {
            ok = logfac > 0.0;
            if (ok) {
                const double a1 = 1.0 + 1.0 / (logfac * (1.0 - fit1.gamma_hat));
                const double a2 = 1.0 + 1.0 / (logfac * (1.0 - fit2.gamma_hat));
                s1 = a1 * a1 * var1;
                s2 = a2 * a2 * var2;
            }
        } else {
            ok = logfac >= 0.0;
        }

        band.rho.push_back(rho);
        band.center.push_back(center);
        if (!ok) {
            band.lower.push_back(center);
            band.upper.push_back(center);
            band.usable.push_back(false);
            continue;
        }
        const double half = z * std::sqrt(s1 + s2) * logfac / root_kh;
        band.lower.push_back(center * std::exp(-half));
        band.upper.push_back(center * std::exp(half));
        band.usable.push_back(true);
    }
    return band;
}

inline EffectBand eqte_band(const TailFit& fit1, double var1, const TailFit& fit2, double var2,
                            double alpha_n, double delta0, double confidence,
                            const std::vector<double>& rho_grid) {
    return effect_band(fit1, var1, fit2, var2, alpha_n, delta0, confidence, rho_grid,
                       BandKind::Eqte);
}

inline EffectBand eate_band(const TailFit& fit1, double var1, const TailFit& fit2, double var2,
                            double alpha_n, double delta0, double confidence,
                            const std::vector<double>& rho_grid, bool adjusted = true) {
    return effect_band(fit1, var1, fit2, var2, alpha_n, delta0, confidence, rho_grid,
                       adjusted ? BandKind::Eate : BandKind::EateUnadjusted);
}

}  // namespace xtreat
