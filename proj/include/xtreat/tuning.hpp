#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "core.hpp"
#include "parallel.hpp"
#include "survival.hpp"
#include "tail.hpp"

namespace xtreat {

// h_ROT = 1.06 sqrt(var(T)) N^(-1/5)
inline double rot_bandwidth(const Dataset& ds) {
    if (ds.n() < 2) throw std::invalid_argument("rule-of-thumb bandwidth needs N >= 2");
    std::vector<double> ts(ds.n());
    for (std::size_t i = 0; i < ds.n(); ++i) ts[i] = ds.obs[i].t;
    const double var = sample_variance(ts);
    if (!(var > 0.0)) throw std::invalid_argument("treatment has no variation");
    return 1.06 * std::sqrt(var) * std::pow(static_cast<double>(ds.n()), -0.2);
}

struct BandwidthCandidates {
    double lo = 0.0;
    double hi = 0.0;
    bool collapsed = false;

    double midpoint() const { return collapsed ? lo : 0.5 * (lo + hi); }
    std::vector<double> grid(std::size_t points) const {
        if (collapsed || points == 1) return {lo};
        return linspace(lo, hi, points);
    }
};

// Candidate interval [N^(-1/3), h_ROT]. At small N the rule inverts
// (h_ROT < N^(-1/3)); the interval then collapses to the lower endpoint.
inline BandwidthCandidates bandwidth_candidates(const Dataset& ds) {
    BandwidthCandidates c;
    c.lo = std::pow(static_cast<double>(ds.n()), -1.0 / 3.0);
    c.hi = rot_bandwidth(ds);
    if (c.hi < c.lo) {
        warn("bandwidth candidate interval inverted (h_ROT < N^(-1/3)); using the single point N^(-1/3)");
        c.hi = c.lo;
        c.collapsed = true;
    }
    return c;
}

// Leave-one-out criterion for one candidate h: squared error of the kernel
// regression of the exceedance indicator 1(Y > y_q) on T, weighted by the
// stabilized weights and averaged over the threshold list. Returns nothing
// if some observation has an empty leave-one-out window (candidate
// infeasible).
inline std::optional<double> loo_survival_error(const Dataset& ds,
                                                const std::vector<double>& weights,
                                                const KernelSpec& k, double h,
                                                const std::vector<double>& thresholds) {
    const std::size_t n = ds.n();
    std::vector<double> errs(n, 0.0);
    std::vector<char> infeasible(n, 0);
    parallel_for(n, [&](std::size_t i) {
        double denom = 0.0;
        std::vector<double> nums(thresholds.size(), 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const double kj = kernel_eval(k, (ds.obs[j].t - ds.obs[i].t) / h);
            if (kj <= 0.0) continue;
            const double wj = weights[j] * kj;
            denom += wj;
            for (std::size_t q = 0; q < thresholds.size(); ++q)
                if (ds.obs[j].y > thresholds[q]) nums[q] += wj;
        }
        if (!(denom > 0.0)) {
            infeasible[i] = 1;
            return;
        }
        double e = 0.0;
        for (std::size_t q = 0; q < thresholds.size(); ++q) {
            const double pred = nums[q] / denom;
            const double ind = ds.obs[i].y > thresholds[q] ? 1.0 : 0.0;
            e += (ind - pred) * (ind - pred);
        }
        errs[i] = weights[i] * e / static_cast<double>(thresholds.size());
    });
    for (char f : infeasible)
        if (f) return std::nullopt;
    double total = 0.0;
    for (double e : errs) total += e;
    return total;
}

inline double select_bandwidth(const Dataset& ds, const std::vector<double>& weights,
                               const KernelSpec& k, const std::vector<double>& candidates) {
    if (candidates.empty()) throw std::invalid_argument("candidate grid must be nonempty");
    if (weights.size() != ds.n())
        throw std::invalid_argument("one weight per observation required");

    std::vector<double> ys(ds.n());
    for (std::size_t i = 0; i < ds.n(); ++i) ys[i] = ds.obs[i].y;
    const std::vector<double> thresholds = {sample_quantile(ys, 0.5), sample_quantile(ys, 0.75),
                                            sample_quantile(ys, 0.9)};

    std::vector<double> sorted(candidates);
    std::sort(sorted.begin(), sorted.end());
    double best_h = 0.0;
    double best_err = std::numeric_limits<double>::infinity();
    bool any = false;
    for (double h : sorted) {
        if (!(h > 0.0)) throw std::invalid_argument("bandwidth candidates must be positive");
        const auto err = loo_survival_error(ds, weights, k, h, thresholds);
        if (!err) continue;  // empty leave-one-out window somewhere: skip candidate
        if (!any || *err <= best_err) {  // ties broken toward the larger h
            best_err = *err;
            best_h = h;
            any = true;
        }
    }
    if (!any) throw std::runtime_error("no feasible bandwidth candidate");
    return best_h;
}

inline double select_bandwidth(const Dataset& ds, const std::vector<double>& weights,
                               const KernelSpec& k, const BandwidthCandidates& candidates,
                               std::size_t grid_size) {
    return select_bandwidth(ds, weights, k, candidates.grid(grid_size));
}

struct KSelectOptions {
    bool exhaustive = false;    // scan every integer candidate instead of thinning
    BoundaryPolicy boundary = BoundaryPolicy::Raw;
};

struct KSelection {
    int k_n = 0;
    double D = 0.0;
    std::vector<int> candidates;
    std::vector<double> D_values;  // infinity marks an infeasible candidate
};

// Candidate tail sizes in [J, floor(0.2 N^0.95)]: every integer up to 64,
// then multiplicative steps of 1.1, always keeping the upper endpoint.
inline std::vector<int> k_candidates(std::size_t n, int J, bool exhaustive) {
    const int k_max = static_cast<int>(std::floor(0.2 * std::pow(static_cast<double>(n), 0.95)));
    if (k_max < J) throw std::invalid_argument("no tail-size candidates: floor(0.2 N^0.95) < J");
    std::vector<int> out;
    if (exhaustive) {
        for (int k = J; k <= k_max; ++k) out.push_back(k);
        return out;
    }
    int k = J;
    while (k <= k_max) {
        out.push_back(k);
        if (k < 64) {
            ++k;
        } else {
            k = std::max(k + 1, static_cast<int>(std::floor(static_cast<double>(k) * 1.1)));
        }
    }
    if (out.back() != k_max) out.push_back(k_max);
    return out;
}

// Selects k_N by the quantile-ratio distance: with Z_1 > ... > Z_N the
// descending order statistics,
//   D_l = sup_t max_{i<l} | F_t(Z_i)/F_t(Z_l) - (Z_l/Z_i)^(1/gamma_l(t)) |,
// minimized over the candidate set (argmin; ties to the smaller l).
inline KSelection select_k_detailed(const Dataset& ds, const std::vector<double>& weights,
                                    const KernelSpec& k, double h,
                                    const std::vector<double>& t_grid, int J,
                                    const KSelectOptions& opts = {}) {
    if (ds.n() < static_cast<std::size_t>(J) + 1)
        throw std::invalid_argument("need at least J+1 observations");
    if (t_grid.empty()) throw std::invalid_argument("t grid must be nonempty");

    std::vector<double> z(ds.n());
    for (std::size_t i = 0; i < ds.n(); ++i) z[i] = ds.obs[i].y;
    std::sort(z.begin(), z.end(), std::greater<>());

    std::vector<LocalSurvival> locals;
    locals.reserve(t_grid.size());
    for (double t : t_grid) locals.emplace_back(ds, weights, k, t, h, opts.boundary);

    const HillWeights hw = make_hill_weights(J);
    KSelection sel;
    sel.candidates = k_candidates(ds.n(), J, opts.exhaustive);
    sel.D_values.resize(sel.candidates.size(), std::numeric_limits<double>::infinity());

    parallel_for(sel.candidates.size(), [&](std::size_t ci) {
        const int l = sel.candidates[ci];
        const double z_l = z[static_cast<std::size_t>(l) - 1];
        if (!(z_l > 0.0)) return;  // power of a nonpositive ratio: infeasible
        double sup = 0.0;
        for (const auto& local : locals) {
            double gamma_l;
            try {
                gamma_l = hill_gamma_local(local, l, hw);
            } catch (const std::exception&) {
                return;  // degenerate fit at this candidate: infeasible
            }
            const double f_l = local.survival(z_l);
            if (!(f_l > 0.0)) return;  // F(Z_l) = 0: skip per the selection rule
            for (int i = 0; i + 1 < l; ++i) {
                const double z_i = z[static_cast<std::size_t>(i)];
                const double ratio = local.survival(z_i) / f_l;
                const double power = std::pow(z_l / z_i, 1.0 / gamma_l);
                sup = std::max(sup, std::fabs(ratio - power));
            }
        }
        sel.D_values[ci] = sup;
    });

    std::size_t best = sel.candidates.size();
    for (std::size_t ci = 0; ci < sel.candidates.size(); ++ci) {
        if (!std::isfinite(sel.D_values[ci])) continue;
        if (best == sel.candidates.size() || sel.D_values[ci] < sel.D_values[best]) best = ci;
    }
    if (best == sel.candidates.size()) throw std::runtime_error("all tail-size candidates infeasible");
    sel.k_n = sel.candidates[best];
    sel.D = sel.D_values[best];
    return sel;
}

inline int select_k(const Dataset& ds, const std::vector<double>& weights, const KernelSpec& k,
                    double h, const std::vector<double>& t_grid, int J,
                    const KSelectOptions& opts = {}) {
    return select_k_detailed(ds, weights, k, h, t_grid, J, opts).k_n;
}

inline std::vector<double> default_t_grid() { return linspace(0.1, 0.9, 9); }

}  // namespace xtreat
