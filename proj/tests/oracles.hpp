#pragma once

// Brute-force reference implementations for the test suites. Everything here
// is a direct sum over the whole sample with no sorting, suffix arrays, or
// binary searches, so an indexing or normalization slip in the library
// surfaces as a numeric mismatch rather than a shared bug.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include <xtreat/xtreat.hpp>

namespace oracles {

struct Instance {
    xtreat::Dataset ds;
    std::vector<double> weights;
    xtreat::KernelSpec kernel;
    double t = 0.5;
    double h = 0.5;
    xtreat::BoundaryPolicy boundary = xtreat::BoundaryPolicy::Raw;
};

inline double kernel_weight(const Instance& in, std::size_t i) {
    return xtreat::boundary_kernel(in.kernel, in.ds.obs[i].t, in.t, in.h, in.boundary);
}

inline double brute_f_T(const Instance& in) {
    double s = 0.0;
    for (std::size_t i = 0; i < in.ds.n(); ++i) s += kernel_weight(in, i);
    return s / (static_cast<double>(in.ds.n()) * in.h);
}

inline double brute_survival(const Instance& in, double y) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < in.ds.n(); ++i) {
        const double w = in.weights[i] * kernel_weight(in, i);
        den += w;
        if (in.ds.obs[i].y > y) num += w;
    }
    return num / den;
}

// distinct outcome values inside the kernel window, ascending
inline std::vector<double> window_values(const Instance& in) {
    std::vector<double> ys;
    for (std::size_t i = 0; i < in.ds.n(); ++i)
        if (kernel_weight(in, i) > 0.0) ys.push_back(in.ds.obs[i].y);
    std::sort(ys.begin(), ys.end());
    ys.erase(std::unique(ys.begin(), ys.end()), ys.end());
    return ys;
}

// smallest sample value whose survival clears the target, scanning the step
// function left to right (the library bisects; the contract is the same)
inline double brute_quantile_exceedance(const Instance& in, double target) {
    const std::vector<double> ys = window_values(in);
    for (double z : ys)
        if (xtreat::survival_leq(brute_survival(in, z), target)) return z;
    return ys.back();
}

// influence term a_i = pi_i K_i / (h f_T(t)), zero outside the window
inline double brute_a(const Instance& in, std::size_t i, double f_T) {
    return in.weights[i] * kernel_weight(in, i) / (in.h * f_T);
}

// Omega_F via the psi representation: psi_i(v) = sqrt(h Fbar(v y_n)/N)
// * {a_i 1(Y_i > v y_n)/Fbar(v y_n) - 1}, summed as sum_i psi_i(v1) psi_i(v2).
inline double brute_omega_F(const Instance& in, double y_n, double v1, double v2) {
    const double f_T = brute_f_T(in);
    const double n = static_cast<double>(in.ds.n());
    const double thr1 = v1 * y_n;
    const double thr2 = v2 * y_n;
    const double f1 = brute_survival(in, thr1);
    const double f2 = brute_survival(in, thr2);
    const double c1 = std::sqrt(in.h * f1 / n);
    const double c2 = std::sqrt(in.h * f2 / n);
    double s = 0.0;
    for (std::size_t i = 0; i < in.ds.n(); ++i) {
        const double a = brute_a(in, i, f_T);
        const double p1 = c1 * ((in.ds.obs[i].y > thr1 ? a : 0.0) / f1 - 1.0);
        const double p2 = c2 * ((in.ds.obs[i].y > thr2 ? a : 0.0) / f2 - 1.0);
        s += p1 * p2;
    }
    return s;
}

// Omega_Q at exceedance base: thresholds are the intermediate quantiles at
// levels v*base, the indicator scales by the level itself, and the whole sum
// carries gamma_hat^2.
inline double brute_omega_Q(const Instance& in, double base, double gamma_hat, double v1,
                            double v2) {
    const double f_T = brute_f_T(in);
    const double n = static_cast<double>(in.ds.n());
    const double s1 = v1 * base;
    const double s2 = v2 * base;
    const double q1 = brute_quantile_exceedance(in, s1);
    const double q2 = brute_quantile_exceedance(in, s2);
    const double c1 = std::sqrt(in.h * s1 / n);
    const double c2 = std::sqrt(in.h * s2 / n);
    double s = 0.0;
    for (std::size_t i = 0; i < in.ds.n(); ++i) {
        const double a = brute_a(in, i, f_T);
        const double p1 = c1 * ((in.ds.obs[i].y > q1 ? a : 0.0) / s1 - 1.0);
        const double p2 = c2 * ((in.ds.obs[i].y > q2 ? a : 0.0) / s2 - 1.0);
        s += p1 * p2;
    }
    return gamma_hat * gamma_hat * s;
}

// Random small instance: heavy-tailed outcomes with occasional ties, mixed
// kernels and boundary policies, t anchored at a data point so the window is
// never empty, and a wide bandwidth so it is never thin either.
inline Instance random_instance(xtreat::SeededRng& rng, std::size_t n_max = 50) {
    for (;;) {
        Instance in;
        const std::size_t n =
            static_cast<std::size_t>(rng.uniform_int(10, static_cast<std::int64_t>(n_max)));
        const double gamma = rng.uniform(0.1, 0.6);
        in.ds.r = 0;
        in.ds.obs.reserve(n);
        const bool unit = rng.uniform() < 0.5;
        in.weights.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double t = rng.uniform();
            double y = std::pow(rng.uniform(), -gamma);
            if (rng.uniform() < 0.25) y = std::round(y * 10.0) / 10.0;
            in.ds.obs.push_back({t, {}, y, std::nullopt});
            in.weights.push_back(unit ? 1.0 : rng.uniform(0.5, 2.0));
        }
        const auto shapes = {xtreat::KernelShape::Epanechnikov, xtreat::KernelShape::Biweight,
                             xtreat::KernelShape::Triangular};
        in.kernel = xtreat::make_kernel(*(shapes.begin() + rng.uniform_int(0, 2)));
        in.boundary = rng.uniform() < 0.5 ? xtreat::BoundaryPolicy::Raw
                                          : xtreat::BoundaryPolicy::Reflect;
        in.t = in.ds.obs[static_cast<std::size_t>(rng.uniform_int(0, n - 1))].t;
        in.h = rng.uniform(0.4, 0.9);
        if (window_values(in).size() >= 8) return in;
    }
}

inline bool close(double a, double b, double tol) {
    return std::fabs(a - b) <= tol * std::max({1.0, std::fabs(a), std::fabs(b)});
}

}  // namespace oracles
