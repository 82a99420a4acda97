#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

#include "core.hpp"

namespace xtreat {

// BoxCox(y; l1, l2) = {(y + l2)^l1 - 1}/l1, with the usual log limit at l1 = 0.
inline double box_cox(double y, double lambda1, double lambda2) {
    const double shifted = y + lambda2;
    if (lambda1 == 0.0) {
        if (!(shifted > 0.0)) throw std::domain_error("Box-Cox log branch needs y + lambda2 > 0");
        return std::log(shifted);
    }
    if (shifted < 0.0 || (shifted == 0.0 && lambda1 < 0.0))
        throw std::domain_error("Box-Cox power branch needs y + lambda2 >= 0");
    return (std::pow(shifted, lambda1) - 1.0) / lambda1;
}

struct BoxCoxResult {
    double lambda1 = 1.0;
    double lambda2 = 0.0;
    double correlation = 0.0;
};

struct BoxCoxGrid {
    double lambda1_lo = -1.0, lambda1_hi = 2.0, lambda1_step = 0.01;
    double lambda2_lo = 0.0, lambda2_hi = 1.0, lambda2_step = 0.005;
    std::size_t max_points = 1000;  // order-statistic subsample cap
};

// Grid search for the transform whose sample quantiles correlate best with
// standard normal quantiles. Steps are taken as integer multiples of the
// step size so the reported argmax lands on clean grid values.
inline BoxCoxResult box_cox_search(const std::vector<double>& y, const BoxCoxGrid& grid = {}) {
    if (y.size() < 8) throw std::invalid_argument("Box-Cox search needs at least 8 observations");
    if (!(grid.lambda1_step > 0.0) || !(grid.lambda2_step > 0.0))
        throw std::invalid_argument("Box-Cox grid steps must be positive");

    std::vector<double> sorted(y);
    std::sort(sorted.begin(), sorted.end());
    if (!(sorted.back() > sorted.front()))
        throw std::domain_error("Box-Cox search undefined for a constant sample");

    // evenly indexed order statistics, capped for grid-search cost
    std::vector<double> probe;
    const std::size_t m = std::min(grid.max_points, sorted.size());
    probe.reserve(m);
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t idx = m == 1 ? 0 : (i * (sorted.size() - 1)) / (m - 1);
        probe.push_back(sorted[idx]);
    }

    std::vector<double> normal_q(m);
    for (std::size_t i = 0; i < m; ++i)
        normal_q[i] = normal_quantile((static_cast<double>(i) + 0.5) / static_cast<double>(m));

    const double y_min = probe.front();
    const long n1 =
        std::lround((grid.lambda1_hi - grid.lambda1_lo) / grid.lambda1_step);
    const long n2 =
        std::lround((grid.lambda2_hi - grid.lambda2_lo) / grid.lambda2_step);

    BoxCoxResult best;
    bool found = false;
    std::vector<double> transformed(m);
    for (long j = 0; j <= n2; ++j) {
        const double l2 = grid.lambda2_lo + grid.lambda2_step * static_cast<double>(j);
        const double base = y_min + l2;
        for (long i = 0; i <= n1; ++i) {
            const double l1 = grid.lambda1_lo + grid.lambda1_step * static_cast<double>(i);
            // log and negative powers blow up when the smallest shifted value
            // is not strictly positive
            if (!(base > 0.0) && l1 <= 0.0) continue;
            if (base < 0.0) continue;
            bool ok = true;
            for (std::size_t p = 0; p < m; ++p) {
                transformed[p] = box_cox(probe[p], l1, l2);
                if (!std::isfinite(transformed[p])) {
                    ok = false;
                    break;
                }
            }
            if (!ok || !(transformed.back() > transformed.front())) continue;
            const double corr = pearson_correlation(transformed, normal_q);
            if (!found || corr > best.correlation) {
                best = {l1, l2, corr};
                found = true;
            }
        }
    }
    if (!found) throw std::domain_error("no valid Box-Cox grid point for this data");
    return best;
}

struct ExpQqResult {
    std::vector<double> theoretical;  // exponential quantiles at (i - 0.5)/m
    std::vector<double> sorted_z;     // ascending scaled log-spacings
    double correlation = 0.0;
    std::size_t skipped = 0;  // spacings dropped for nonpositive order statistics
};

// Scaled log-spacings of the upper order statistics, Z(i) = i log(Y(i)/Y(i+1))
// for i up to floor(N/8). For a heavy-tailed sample these behave like i.i.d.
// exponentials, so a straight Q-Q line against Exp(1) quantiles flags heavy
// tails; the Pearson correlation summarizes straightness.
inline ExpQqResult exp_qq(const std::vector<double>& y) {
    if (y.size() < 16)
        throw std::invalid_argument("exponential Q-Q diagnostic needs at least 16 observations");
    std::vector<double> desc(y);
    std::sort(desc.begin(), desc.end(), std::greater<double>());

    const std::size_t top = y.size() / 8;
    ExpQqResult out;
    out.sorted_z.reserve(top);
    for (std::size_t i = 1; i <= top; ++i) {
        const double hi = desc[i - 1];
        const double lo = desc[i];
        if (!(lo > 0.0)) {
            ++out.skipped;
            continue;
        }
        out.sorted_z.push_back(static_cast<double>(i) * std::log(hi / lo));
    }
    if (out.sorted_z.size() < 2)
        throw std::domain_error("too few positive order statistics for the Q-Q diagnostic");
    std::sort(out.sorted_z.begin(), out.sorted_z.end());

    const std::size_t m = out.sorted_z.size();
    out.theoretical.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
        const double p = (static_cast<double>(i) + 0.5) / static_cast<double>(m);
        out.theoretical[i] = -std::log1p(-p);
    }
    out.correlation = pearson_correlation(out.theoretical, out.sorted_z);
    return out;
}

}  // namespace xtreat
