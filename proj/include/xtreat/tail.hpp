#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "core.hpp"
#include "survival.hpp"
#include "weights.hpp"

namespace xtreat {

enum class GammaMethod { Hill, Pickands };

// Hill weights 1 = v_1 > v_2 > ... > v_J > 0 with v_j = 1 - (j-1)/J.
struct HillWeights {
    int J = 8;
    std::vector<double> vs;
};

inline HillWeights make_hill_weights(int J) {
    if (J < 1) throw std::invalid_argument("J must be positive");
    HillWeights w;
    w.J = J;
    w.vs.resize(J);
    for (int j = 0; j < J; ++j)
        w.vs[j] = 1.0 - static_cast<double>(j) / static_cast<double>(J);
    return w;
}

// Per-treatment-level fit bundle feeding extrapolation, tail means, effects
// and bands downstream.
struct TailFit {
    double t = 0.0;
    double h = 0.0;
    int k_n = 0;
    std::size_t n = 0;
    double gamma_hat = 0.0;
    GammaMethod method = GammaMethod::Hill;
    int J = 8;
    double q_intermediate = 0.0;
    double f_T_hat = 0.0;
};

inline double intermediate_quantile(const Dataset& ds, const std::vector<double>& weights,
                                    const KernelSpec& k, double t, double h, double alpha,
                                    BoundaryPolicy boundary = BoundaryPolicy::Raw) {
    return LocalSurvival(ds, weights, k, t, h, boundary).quantile(alpha);
}

// Same computation as intermediate_quantile, applied at an extreme level; the
// step function saturates at the window maximum. Kept as a named baseline.
inline double naive_extreme_quantile(const Dataset& ds, const std::vector<double>& weights,
                                     const KernelSpec& k, double t, double h, double alpha,
                                     BoundaryPolicy boundary = BoundaryPolicy::Raw) {
    return LocalSurvival(ds, weights, k, t, h, boundary).quantile(alpha);
}

inline double pickands_gamma_from_quantiles(double q1, double q2, double q4) {
    const double upper = q4 - q2;
    const double lower = q2 - q1;
    if (!(lower > 0.0) || !(upper > 0.0))
        throw std::runtime_error("degenerate quantile spacing");
    return std::log(upper / lower) / std::log(2.0);
}

// q1, q2, q4 are the intermediate quantiles at exceedance levels k/N, k/(2N),
// k/(4N).
inline double pickands_gamma_local(const LocalSurvival& local, int k_n) {
    if (k_n < 4) throw std::invalid_argument("Pickands needs k_n >= 4");
    const double n = static_cast<double>(local.n());
    const double s1 = static_cast<double>(k_n) / n;
    if (!(s1 < 1.0)) throw std::invalid_argument("k_n must be below N");
    const double q1 = local.quantile_from_exceedance(s1);
    const double q2 = local.quantile_from_exceedance(s1 / 2.0);
    const double q4 = local.quantile_from_exceedance(s1 / 4.0);
    return pickands_gamma_from_quantiles(q1, q2, q4);
}

inline double pickands_gamma(const Dataset& ds, const std::vector<double>& weights,
                             const KernelSpec& k, double t, double h, int k_n,
                             BoundaryPolicy boundary = BoundaryPolicy::Raw) {
    return pickands_gamma_local(LocalSurvival(ds, weights, k, t, h, boundary), k_n);
}

// qs[j] is the quantile at exceedance level vs[j]*k/N; qs[0] (at v=1) anchors
// the ratios.
inline double hill_gamma_from_quantiles(const std::vector<double>& qs,
                                        const std::vector<double>& vs) {
    if (qs.size() != vs.size() || qs.empty())
        throw std::invalid_argument("need one quantile per Hill weight");
    double denom = 0.0, num = 0.0;
    for (std::size_t j = 0; j < vs.size(); ++j) {
        if (!(vs[j] > 0.0) || !(vs[j] <= 1.0))
            throw std::invalid_argument("Hill weights must lie in (0,1]");
        if (!(qs[j] > 0.0)) throw std::runtime_error("tail quantiles must be positive");
        denom += std::log(1.0 / vs[j]);
        num += std::log(qs[j] / qs[0]);
    }
    if (!(denom > 0.0))
        throw std::invalid_argument("Hill weights must include a value below 1");
    return num / denom;
}

inline double hill_gamma_local(const LocalSurvival& local, int k_n, const HillWeights& w) {
    if (k_n < w.J) throw std::invalid_argument("Hill needs k_n >= J");
    const double n = static_cast<double>(local.n());
    const double base = static_cast<double>(k_n) / n;
    if (!(base < 1.0)) throw std::invalid_argument("k_n must be below N");
    std::vector<double> qs(w.vs.size());
    for (std::size_t j = 0; j < w.vs.size(); ++j)
        qs[j] = local.quantile_from_exceedance(w.vs[j] * base);
    return hill_gamma_from_quantiles(qs, w.vs);
}

inline double hill_gamma(const Dataset& ds, const std::vector<double>& weights,
                         const KernelSpec& k, double t, double h, int k_n, const HillWeights& w,
                         BoundaryPolicy boundary = BoundaryPolicy::Raw) {
    return hill_gamma_local(LocalSurvival(ds, weights, k, t, h, boundary), k_n, w);
}

inline TailFit fit_tail_local(const LocalSurvival& local, int k_n,
                              GammaMethod method = GammaMethod::Hill, int J = 8) {
    if (k_n < 1) throw std::invalid_argument("k_n must be positive");
    TailFit fit;
    fit.t = local.t();
    fit.h = local.h();
    fit.k_n = k_n;
    fit.n = local.n();
    fit.method = method;
    fit.J = J;
    fit.f_T_hat = local.f_T();
    const double base = static_cast<double>(k_n) / static_cast<double>(local.n());
    fit.q_intermediate = local.quantile_from_exceedance(base);
    fit.gamma_hat = method == GammaMethod::Hill
                        ? hill_gamma_local(local, k_n, make_hill_weights(J))
                        : pickands_gamma_local(local, k_n);
    return fit;
}

inline TailFit fit_tail(const Dataset& ds, const std::vector<double>& weights,
                        const KernelSpec& k, double t, double h, int k_n,
                        GammaMethod method = GammaMethod::Hill, int J = 8,
                        BoundaryPolicy boundary = BoundaryPolicy::Raw) {
    return fit_tail_local(LocalSurvival(ds, weights, k, t, h, boundary), k_n, method, J);
}

// EVT extrapolation q(alpha) ~ q(1-k/N) * (k/(N(1-alpha)))^gamma. At the
// anchor level the factor is 1 by definition; returning the intermediate
// quantile directly keeps the identity exact instead of up to pow() rounding.
inline double extreme_quantile(const TailFit& fit, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::domain_error("alpha must lie in (0,1)");
    if (!(fit.q_intermediate > 0.0))
        throw std::domain_error("extrapolation requires a positive intermediate quantile");
    const double base = static_cast<double>(fit.k_n) / static_cast<double>(fit.n);
    if (alpha == 1.0 - base) return fit.q_intermediate;
    return fit.q_intermediate * std::pow(base / (1.0 - alpha), fit.gamma_hat);
}

inline double tail_mean(const TailFit& fit, double alpha) {
    if (fit.gamma_hat >= 1.0) throw std::domain_error("tail mean undefined for gamma >= 1");
    if (fit.gamma_hat >= 0.5)
        warn("tail index estimate " + std::to_string(fit.gamma_hat) +
             " is at or above 0.5; tail mean theory assumes gamma < 1/2");
    return extreme_quantile(fit, alpha) / (1.0 - fit.gamma_hat);
}

}  // namespace xtreat
