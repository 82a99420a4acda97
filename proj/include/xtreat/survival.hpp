#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "core.hpp"

namespace xtreat {

// Tolerance absorbing representation error of quantile levels: with level
// alpha = 0.95 the exceedance target 1-alpha lands a few ulps away from the
// exact rational the survival steps hit, and the generalized inverse must not
// skip an exactly-tied order statistic because of it. The slack is far below
// any genuine survival step (min weight / total weight).
inline bool survival_leq(double surv, double target) {
    return surv <= target + 1e-12 * target + 1e-15;
}

// Everything the estimators need at one (t, h): the kernel-weighted sample
// restricted to the window, sorted by outcome, with suffix sums enabling
// O(log n) survival, quantile, and variance-component queries.
//
//   w_i = pi_i K_i                 (survival numerator terms)
//   a_i = pi_i K_i / (h f_T(t))    (influence-function terms)
//
// where K_i is the (possibly boundary-reflected) kernel weight.
class LocalSurvival {
  public:
    LocalSurvival(const Dataset& ds, const std::vector<double>& weights, const KernelSpec& k,
                  double t, double h, BoundaryPolicy boundary = BoundaryPolicy::Raw)
        : t_(t), h_(h), n_(ds.n()) {
        if (!(h > 0.0)) throw std::invalid_argument("bandwidth must be positive");
        if (weights.size() != ds.n())
            throw std::invalid_argument("one weight per observation required");

        double kernel_sum = 0.0;
        double weight_sum = 0.0;
        std::vector<std::pair<double, double>> members;  // (y, pi*K)
        for (std::size_t i = 0; i < ds.n(); ++i) {
            const double ki = boundary_kernel(k, ds.obs[i].t, t, h, boundary);
            if (ki <= 0.0) continue;
            kernel_sum += ki;
            const double wi = weights[i] * ki;
            weight_sum += wi;
            members.emplace_back(ds.obs[i].y, wi);
        }
        if (!(weight_sum > 0.0) || !std::isfinite(weight_sum))
            throw std::runtime_error("no data near treatment level " + std::to_string(t) +
                                     " with bandwidth " + std::to_string(h));

        f_T_ = kernel_sum / (static_cast<double>(n_) * h);

        std::sort(members.begin(), members.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        const std::size_t m = members.size();
        ys_.resize(m);
        suffix_w_.assign(m + 1, 0.0);
        suffix_a_.assign(m + 1, 0.0);
        suffix_a2_.assign(m + 1, 0.0);
        const double a_denom = h * f_T_;
        for (std::size_t j = m; j-- > 0;) {
            ys_[j] = members[j].first;
            const double w = members[j].second;
            const double a = w / a_denom;
            suffix_w_[j] = suffix_w_[j + 1] + w;
            suffix_a_[j] = suffix_a_[j + 1] + a;
            suffix_a2_[j] = suffix_a2_[j + 1] + a * a;
        }
        // denominator from the same accumulation as the numerators, so the
        // survival estimate is exactly one below the window and monotone
        total_weight_ = suffix_w_[0];

        // distinct outcome values with the survival value attained at each
        for (std::size_t j = 0; j < m; ++j) {
            if (j + 1 == m || ys_[j + 1] != ys_[j]) {
                distinct_.push_back(ys_[j]);
                surv_at_distinct_.push_back(suffix_w_[j + 1] / total_weight_);
            }
        }
    }

    double t() const { return t_; }
    double h() const { return h_; }
    std::size_t n() const { return n_; }
    std::size_t window_size() const { return ys_.size(); }
    double f_T() const { return f_T_; }
    double total_weight() const { return total_weight_; }
    double max_outcome() const { return ys_.back(); }

    double survival(double y) const {
        const std::size_t idx = std::upper_bound(ys_.begin(), ys_.end(), y) - ys_.begin();
        return suffix_w_[idx] / total_weight_;
    }

    // sum of a_i over observations with Y_i > y
    double suffix_a(double y) const {
        const std::size_t idx = std::upper_bound(ys_.begin(), ys_.end(), y) - ys_.begin();
        return suffix_a_[idx];
    }

    // sum of a_i^2 over observations with Y_i > y
    double suffix_a2(double y) const {
        const std::size_t idx = std::upper_bound(ys_.begin(), ys_.end(), y) - ys_.begin();
        return suffix_a2_[idx];
    }

    // inf{z : survival(z) <= target} for an exceedance target in (0,1); the
    // infimum is attained at a sample value because survival is a
    // right-continuous step function ending at 0.
    double quantile_from_exceedance(double target) const {
        if (!(target > 0.0)) throw std::domain_error("alpha must exceed 0");
        if (!(target < 1.0)) throw std::domain_error("alpha must be below 1");
        std::size_t lo = 0, hi = distinct_.size() - 1;
        while (lo < hi) {
            const std::size_t mid = lo + (hi - lo) / 2;
            if (survival_leq(surv_at_distinct_[mid], target))
                hi = mid;
            else
                lo = mid + 1;
        }
        return distinct_[lo];
    }

    double quantile(double alpha) const { return quantile_from_exceedance(1.0 - alpha); }

  private:
    double t_, h_;
    std::size_t n_;
    double f_T_ = 0.0;
    double total_weight_ = 0.0;
    std::vector<double> ys_;
    std::vector<double> suffix_w_, suffix_a_, suffix_a2_;
    std::vector<double> distinct_, surv_at_distinct_;
};

struct SurvivalCurve {
    double t = 0.0;
    double h = 0.0;
    std::vector<double> ys;
    std::vector<double> values;
};

inline double survival_at(const Dataset& ds, const std::vector<double>& weights,
                          const KernelSpec& k, double t, double h, double y,
                          BoundaryPolicy boundary = BoundaryPolicy::Raw) {
    return LocalSurvival(ds, weights, k, t, h, boundary).survival(y);
}

inline SurvivalCurve survival_curve(const Dataset& ds, const std::vector<double>& weights,
                                    const KernelSpec& k, double t, double h,
                                    const std::vector<double>& ys,
                                    BoundaryPolicy boundary = BoundaryPolicy::Raw) {
    for (std::size_t j = 0; j + 1 < ys.size(); ++j)
        if (!(ys[j] < ys[j + 1]))
            throw std::invalid_argument("threshold grid must be strictly increasing");
    const LocalSurvival local(ds, weights, k, t, h, boundary);
    SurvivalCurve curve;
    curve.t = t;
    curve.h = h;
    curve.ys = ys;
    curve.values.reserve(ys.size());
    for (double y : ys) curve.values.push_back(local.survival(y));
    return curve;
}

}  // namespace xtreat
