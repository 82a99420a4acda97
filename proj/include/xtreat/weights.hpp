#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "core.hpp"
#include "parallel.hpp"

namespace xtreat {

enum class WeightSource { UserSupplied, KernelRatio, Oracle };

// Configuration for the stabilized-weight estimator pi(t,x) =
// f_T(t) / f_{T|X}(t|x). Clip bounds keep the ratio away from 0 and infinity.
struct WeightModel {
    WeightSource source = WeightSource::KernelRatio;
    double t_bandwidth = 0.0;
    std::vector<double> x_bandwidths;
    double eta_lo = 0.05;
    double eta_hi = 20.0;
};

// Kernel density estimate of the treatment margin,
// f_hat(t) = N^-1 sum_i h^-1 K((T_i - t)/h). May legitimately return 0 when
// no observation falls within h of t; callers that divide must guard.
inline double estimate_f_T(const Dataset& ds, const KernelSpec& k, double h, double t,
                           BoundaryPolicy boundary = BoundaryPolicy::Raw) {
    if (!(h > 0.0)) throw std::invalid_argument("bandwidth must be positive");
    double s = 0.0;
    for (const auto& o : ds.obs) s += boundary_kernel(k, o.t, t, h, boundary);
    return s / (static_cast<double>(ds.n()) * h);
}

// Rule-of-thumb bandwidths for the conditional density in the weight ratio:
// 1.06 * sd * N^(-1/(4+r)) per coordinate, and the same rule for the
// treatment coordinate.
inline WeightModel default_weight_model(const Dataset& ds) {
    ds.validate();
    const std::size_t n = ds.n();
    if (n < 2) throw std::invalid_argument("weight model needs at least two observations");
    const double expo = -1.0 / (4.0 + static_cast<double>(ds.r));
    const double scale = std::pow(static_cast<double>(n), expo);

    auto rot = [&](auto get) {
        std::vector<double> vals(n);
        for (std::size_t i = 0; i < n; ++i) vals[i] = get(ds.obs[i]);
        const double sd = std::sqrt(sample_variance(vals));
        if (!(sd > 0.0)) throw std::invalid_argument("cannot set a bandwidth for a constant column");
        return 1.06 * sd * scale;
    };

    WeightModel m;
    m.t_bandwidth = rot([](const Observation& o) { return o.t; });
    m.x_bandwidths.resize(ds.r);
    for (int j = 0; j < ds.r; ++j)
        m.x_bandwidths[j] = rot([j](const Observation& o) { return o.x[j]; });
    return m;
}

// Stabilized weights via a kernel density ratio: the conditional density
// f_hat(t|x) is the (t,x) product-kernel joint divided by the x-marginal, so
// the covariate normalizing constants cancel. Results are clipped to
// [eta_lo, eta_hi] and then rescaled to sample mean 1.
inline std::vector<double> estimate_weights_kernel_ratio(const Dataset& ds,
                                                         const WeightModel& model,
                                                         const KernelSpec& k) {
    ds.validate();
    if (ds.has_weights())
        throw std::invalid_argument("dataset already carries weights; use load_weights");
    if (model.source != WeightSource::KernelRatio)
        throw std::invalid_argument("weight model source must be KernelRatio");
    if (!(model.eta_lo > 0.0 && model.eta_lo <= model.eta_hi))
        throw std::invalid_argument("clip bounds must satisfy 0 < eta_lo <= eta_hi");
    if (!(model.t_bandwidth > 0.0))
        throw std::invalid_argument("treatment bandwidth must be positive");
    if (static_cast<int>(model.x_bandwidths.size()) != ds.r)
        throw std::invalid_argument("need one covariate bandwidth per covariate");
    for (double b : model.x_bandwidths)
        if (!(b > 0.0)) throw std::invalid_argument("covariate bandwidths must be positive");

    const std::size_t n = ds.n();
    const double b0 = model.t_bandwidth;
    std::vector<double> w(n);
    std::vector<std::string> faults(n);

    parallel_for(n, [&](std::size_t i) {
        const Observation& oi = ds.obs[i];
        double joint = 0.0, marginal = 0.0, ft = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const Observation& oj = ds.obs[j];
            double kx = 1.0;
            for (int l = 0; l < ds.r; ++l) {
                kx *= kernel_eval(k, (oj.x[l] - oi.x[l]) / model.x_bandwidths[l]);
                if (kx == 0.0) break;
            }
            const double kt = kernel_eval(k, (oj.t - oi.t) / b0);
            joint += kt * kx;
            marginal += kx;
            ft += kt;
        }
        // f_hat(T_i | X_i) = joint / (b0 * marginal); f_hat(T_i) = ft / (N b0)
        const double cond = marginal > 0.0 ? joint / (b0 * marginal) : 0.0;
        if (!(cond > 1e-300)) {
            faults[i] = "conditional treatment density vanishes at observation " + std::to_string(i);
            return;
        }
        w[i] = (ft / (static_cast<double>(n) * b0)) / cond;
    });

    for (const auto& f : faults)
        if (!f.empty()) throw std::runtime_error(f);

    for (double& wi : w) wi = std::clamp(wi, model.eta_lo, model.eta_hi);
    double mean = 0.0;
    for (double wi : w) mean += wi;
    mean /= static_cast<double>(n);
    for (double& wi : w) wi /= mean;
    return w;
}

inline std::vector<double> load_weights(const Dataset& ds) {
    if (ds.obs.empty()) throw std::invalid_argument("dataset must contain at least one observation");
    std::vector<double> w;
    w.reserve(ds.n());
    for (std::size_t i = 0; i < ds.n(); ++i) {
        const auto& o = ds.obs[i];
        if (!o.weight)
            throw std::invalid_argument("observation " + std::to_string(i) + " carries no weight");
        if (!(*o.weight > 0.0))
            throw std::invalid_argument("observation " + std::to_string(i) +
                                        ": weight must be positive");
        w.push_back(*o.weight);
    }
    return w;
}

inline std::vector<double> unit_weights(std::size_t n) { return std::vector<double>(n, 1.0); }

}  // namespace xtreat
