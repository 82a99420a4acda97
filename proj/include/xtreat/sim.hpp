#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "core.hpp"
#include "inference.hpp"
#include "parallel.hpp"
#include "survival.hpp"
#include "tail.hpp"
#include "tuning.hpp"
#include "weights.hpp"

namespace xtreat {

// tail index function of the simulation designs, in [0.2, 0.3]
inline double gamma_fn(double t) {
    if (!(t >= 0.0 && t <= 1.0)) throw std::domain_error("t must lie in [0,1]");
    return 0.25 + std::sin(2.0 * pi_const * t) / 20.0;
}

enum class DgpId { Dgp1, Dgp2, HallClass };

// Simulation design. The Hall-class fields describe the conditional survival
//   S_t(y) = y^(-1/gamma(t)) * {c0(t) + c1(t) y^(-beta(t))},
// the generic heavy-tailed family whose second-order term c1 y^(-beta)
// controls extrapolation bias.
struct DgpSpec {
    DgpId id = DgpId::Dgp1;
    std::function<double(double)> gamma;
    std::function<double(double)> c0, c1, beta;
};

inline DgpSpec make_dgp1() {
    DgpSpec s;
    s.id = DgpId::Dgp1;
    s.gamma = gamma_fn;
    return s;
}

inline DgpSpec make_dgp2() {
    DgpSpec s;
    s.id = DgpId::Dgp2;
    s.gamma = gamma_fn;
    return s;
}

namespace detail {

inline double hall_survival(const DgpSpec& spec, double t, double y) {
    const double g = spec.gamma(t);
    return std::pow(y, -1.0 / g) * (spec.c0(t) + spec.c1(t) * std::pow(y, -spec.beta(t)));
}

// Smallest grid point at which the survival has dropped to 1; beyond it the
// curve must decrease strictly to 0 for inversion to make sense.
inline double hall_validate_at(const DgpSpec& spec, double t) {
    if (!(spec.gamma(t) > 0.0)) throw std::invalid_argument("Hall class requires gamma(t) > 0");
    if (!(spec.c0(t) > 0.0)) throw std::invalid_argument("Hall class requires c0(t) > 0");
    if (!(spec.beta(t) > 0.0)) throw std::invalid_argument("Hall class requires beta(t) > 0");

    const double step = 1.05;
    double y = 1e-6;
    double prev = hall_survival(spec, t, y);
    double start = -1.0;
    while (y < 1e9) {
        const double next_y = y * step;
        const double cur = hall_survival(spec, t, next_y);
        if (start < 0.0 && prev >= 1.0 && cur <= 1.0) start = y;
        if (start > 0.0) {
            if (cur > prev * (1.0 + 1e-12) || !(cur > 0.0))
                throw std::invalid_argument("Hall-class survival not monotone");
        }
        prev = cur;
        y = next_y;
    }
    if (start < 0.0) throw std::invalid_argument("Hall-class survival never crosses 1");
    return start;
}

}  // namespace detail

inline DgpSpec make_hall_spec(std::function<double(double)> gamma,
                              std::function<double(double)> c0,
                              std::function<double(double)> c1,
                              std::function<double(double)> beta) {
    DgpSpec s;
    s.id = DgpId::HallClass;
    s.gamma = std::move(gamma);
    s.c0 = std::move(c0);
    s.c1 = std::move(c1);
    s.beta = std::move(beta);
    for (double t : linspace(0.0, 1.0, 21)) detail::hall_validate_at(s, t);
    return s;
}

// Solves S_t(y) = u on the validated monotone branch.
inline double hall_quantile_u(const DgpSpec& spec, double t, double u) {
    if (!(u > 0.0 && u < 1.0)) throw std::domain_error("u must lie in (0,1)");
    double lo = 1e-6;
    while (detail::hall_survival(spec, t, lo) < u && lo > 1e-300) lo /= 2.0;
    double hi = std::max(1.0, 2.0 * lo);
    while (detail::hall_survival(spec, t, hi) > u && hi < 1e300) hi *= 2.0;
    for (int it = 0; it < 200 && (hi - lo) > 1e-15 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (detail::hall_survival(spec, t, mid) > u)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

// One distribution draw per observation: X, eps ~ U(0,1) independent,
// T = 0.04 X + 0.96 eps, and Y by inverse transform of the conditional
// survival. The draw order (x, eps, u) is fixed: it is part of the
// reproducibility contract.
inline Dataset dgp_sample(const DgpSpec& spec, std::size_t n, SeededRng& rng) {
    if (n < 1) throw std::invalid_argument("n must be at least 1");
    Dataset ds;
    ds.r = 1;
    ds.obs.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = rng.uniform();
        const double eps = rng.uniform();
        const double t = 0.04 * x + 0.96 * eps;
        const double u = rng.uniform();
        double y;
        switch (spec.id) {
            case DgpId::Dgp1: y = std::pow((0.9 + 0.2 * x) / u, spec.gamma(t)); break;
            case DgpId::Dgp2: y = std::pow(1.0 / u - 1.0 + 0.2 * x, spec.gamma(t)); break;
            case DgpId::HallClass: y = hall_quantile_u(spec, t, u); break;
            default: throw std::invalid_argument("unknown DGP id");
        }
        ds.obs[i] = {t, {x}, y, std::nullopt};
    }
    return ds;
}

inline Dataset hall_class_sample(const DgpSpec& spec, std::size_t n, SeededRng& rng) {
    if (spec.id != DgpId::HallClass)
        throw std::invalid_argument("hall_class_sample requires a HallClass spec");
    return dgp_sample(spec, n, rng);
}

// Stabilized weight of the T = 0.04 X + 0.96 eps design: the conditional
// density is flat at 1/0.96, so pi0(t,x) = f_T(t)/f_{T|X}(t|x) reduces to the
// convolution ramp of the marginal.
inline double oracle_weights(double t, double x) {
    if (!(t >= 0.0 && t <= 1.0)) throw std::domain_error("t must lie in [0,1]");
    if (!(x >= 0.0 && x <= 1.0)) throw std::domain_error("x must lie in [0,1]");
    if (t < 0.04 * x || t > 0.04 * x + 0.96)
        throw std::domain_error("t outside the conditional support [0.04x, 0.04x + 0.96]");
    if (t < 0.04) return t / 0.04;
    if (t > 0.96) return (1.0 - t) / 0.04;
    return 1.0;
}

// Unconditional DGP2 survival, X integrated out. On w = y^(1/gamma) < 0.2
// part of the x-range still sits below its support threshold, giving the
// extra linear piece; both pieces meet continuously at w = 0.2.
inline double dgp2_unconditional_survival(double y, double gamma_t) {
    if (!(y > 0.0)) return 1.0;
    const double w = std::pow(y, 1.0 / gamma_t);
    if (w < 0.2) return 5.0 * std::log1p(w) + 1.0 - 5.0 * w;
    return 5.0 * std::log1p(0.2 / (0.8 + w));
}

inline double oracle_quantile(const DgpSpec& spec, double t, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::domain_error("alpha must lie in (0,1)");
    const double g = spec.gamma(t);
    switch (spec.id) {
        case DgpId::Dgp1:
            // E[0.9 + 0.2X] = 1, so the unconditional survival is exactly
            // y^(-1/gamma(t)) in the tail
            return std::pow(1.0 - alpha, -g);
        case DgpId::Dgp2: {
            const double target = 1.0 - alpha;
            // bisect on w = y^(1/gamma), where the survival has closed form
            auto surv_w = [](double w) {
                if (w <= 0.0) return 1.0;
                if (w < 0.2) return 5.0 * std::log1p(w) + 1.0 - 5.0 * w;
                return 5.0 * std::log1p(0.2 / (0.8 + w));
            };
            double lo = 0.0, hi = 1.0;
            while (surv_w(hi) > target && hi < 1e300) hi *= 2.0;
            for (int it = 0; it < 200 && (hi - lo) > 1e-15 * std::max(hi, 1.0); ++it) {
                const double mid = 0.5 * (lo + hi);
                if (surv_w(mid) > target)
                    lo = mid;
                else
                    hi = mid;
            }
            return std::pow(0.5 * (lo + hi), g);
        }
        case DgpId::HallClass: return hall_quantile_u(spec, t, 1.0 - alpha);
    }
    throw std::invalid_argument("unknown DGP id");
}

inline double oracle_tail_mean(const DgpSpec& spec, double t, double alpha) {
    const double g = spec.gamma(t);
    if (!(g < 1.0)) throw std::domain_error("tail mean undefined for gamma >= 1");
    if (spec.id == DgpId::Dgp1) return oracle_quantile(spec, t, alpha) / (1.0 - g);
    // TM = (1-alpha)^-1 int_alpha^1 q(u) du; substituting u = 1 - (1-alpha)s^4
    // removes the integrable singularity at u = 1 (integrand ~ s^(3-4g) -> 0)
    const auto integrand = [&](double s) {
        const double level = 1.0 - (1.0 - alpha) * s * s * s * s;
        // near s = 0 the level rounds up to 1; the integrand limit there is 0
        if (s <= 0.0 || !(level < 1.0)) return 0.0;
        return oracle_quantile(spec, t, level) * 4.0 * s * s * s;
    };
    const double scale = oracle_quantile(spec, t, alpha) / (1.0 - g);
    return adaptive_simpson(integrand, 0.0, 1.0, 1e-10 * scale);
}

// Analytic truth bundle for a design, used by the coverage experiments and
// the CLI's oracle overlays.
struct SimOracle {
    std::function<double(double)> gamma;
    std::function<double(double, double)> quantile;   // (t, alpha)
    std::function<double(double, double)> tail_mean;  // (t, alpha)
    std::function<double(double, double)> weight;     // (t, x)
};

inline SimOracle make_oracle(const DgpSpec& spec) {
    SimOracle o;
    o.gamma = spec.gamma;
    o.quantile = [spec](double t, double a) { return oracle_quantile(spec, t, a); };
    o.tail_mean = [spec](double t, double a) { return oracle_tail_mean(spec, t, a); };
    o.weight = [](double t, double x) { return oracle_weights(t, x); };
    return o;
}

// ---------------------------------------------------------------------------
// replication drivers
// ---------------------------------------------------------------------------

// Estimation settings applied inside each replication (and by the CLI's
// estimation paths on simulated data). Reflect is the default here because
// the coverage baseline sits at the support edge t = 0.
struct SimPolicy {
    KernelSpec kernel = make_kernel(KernelShape::Epanechnikov);
    GammaMethod method = GammaMethod::Hill;
    int J = 8;
    BoundaryPolicy boundary = BoundaryPolicy::Reflect;
    WeightSource weight_source = WeightSource::Oracle;
    std::optional<double> h_override;
    std::optional<int> k_override;
    double delta0 = 0.5;
    double baseline_t = 0.0;
    PickandsVariance flavor = PickandsVariance::Theorem;
    std::optional<double> sigma2_override;  // force the band variances (degenerate-band checks)
};

namespace detail {

inline std::vector<double> rep_weights(const Dataset& ds, const SimPolicy& policy) {
    switch (policy.weight_source) {
        case WeightSource::Oracle: {
            std::vector<double> w(ds.n());
            for (std::size_t i = 0; i < ds.n(); ++i)
                w[i] = oracle_weights(ds.obs[i].t, ds.obs[i].x[0]);
            return w;
        }
        case WeightSource::KernelRatio: {
            WeightModel m = default_weight_model(ds);
            return estimate_weights_kernel_ratio(ds, m, policy.kernel);
        }
        case WeightSource::UserSupplied: return load_weights(ds);
    }
    throw std::invalid_argument("unknown weight source");
}

inline double rep_bandwidth(const Dataset& ds, const SimPolicy& policy) {
    if (policy.h_override) return *policy.h_override;
    return bandwidth_candidates(ds).midpoint();
}

inline int rep_k(const Dataset& ds, const std::vector<double>& w, double h,
                 const SimPolicy& policy) {
    if (policy.k_override) return *policy.k_override;
    KSelectOptions opts;
    opts.boundary = policy.boundary;
    return select_k(ds, w, policy.kernel, h, default_t_grid(), policy.J, opts);
}

}  // namespace detail

struct SimEstimates {
    std::vector<double> t_grid;
    std::vector<double> alphas;
    // indexed [rep][t][alpha]; failed replications hold empty slots
    std::vector<std::vector<std::vector<double>>> q_extreme;
    std::vector<std::vector<std::vector<double>>> q_naive;
    std::vector<std::vector<std::vector<double>>> tail_mean;
    std::vector<std::vector<double>> gamma_hat;  // [rep][t]
    std::vector<double> h_used;                  // per rep
    std::vector<int> k_used;                     // per rep
    std::vector<std::size_t> failed_reps;
    std::size_t warning_count = 0;
};

inline SimEstimates simulate_reps(const DgpSpec& spec, std::size_t n,
                                  const std::vector<double>& alphas, std::size_t reps,
                                  const std::vector<double>& t_grid, std::uint64_t seed,
                                  const SimPolicy& policy = {}) {
    if (reps < 1) throw std::invalid_argument("reps must be at least 1");
    if (alphas.empty() || t_grid.empty())
        throw std::invalid_argument("alpha list and t grid must be nonempty");

    SimEstimates out;
    out.t_grid = t_grid;
    out.alphas = alphas;
    out.q_extreme.resize(reps);
    out.q_naive.resize(reps);
    out.tail_mean.resize(reps);
    out.gamma_hat.resize(reps);
    out.h_used.assign(reps, 0.0);
    out.k_used.assign(reps, 0);
    std::vector<char> failed(reps, 0);

    std::atomic<std::size_t> warnings{0};
    ScopedWarningHandler guard([&](const std::string&) { ++warnings; });

    parallel_for(reps, [&](std::size_t r) {
        try {
            SeededRng rng(seed, r);
            const Dataset ds = dgp_sample(spec, n, rng);
            const std::vector<double> w = detail::rep_weights(ds, policy);
            const double h = detail::rep_bandwidth(ds, policy);
            const int k_n = detail::rep_k(ds, w, h, policy);
            out.h_used[r] = h;
            out.k_used[r] = k_n;

            auto& qe = out.q_extreme[r];
            auto& qn = out.q_naive[r];
            auto& tm = out.tail_mean[r];
            auto& gh = out.gamma_hat[r];
            qe.resize(t_grid.size());
            qn.resize(t_grid.size());
            tm.resize(t_grid.size());
            gh.resize(t_grid.size());
            for (std::size_t ti = 0; ti < t_grid.size(); ++ti) {
                const LocalSurvival local(ds, w, policy.kernel, t_grid[ti], h, policy.boundary);
                const TailFit fit = fit_tail_local(local, k_n, policy.method, policy.J);
                gh[ti] = fit.gamma_hat;
                for (double a : alphas) {
                    qe[ti].push_back(extreme_quantile(fit, a));
                    qn[ti].push_back(local.quantile(a));
                    tm[ti].push_back(tail_mean(fit, a));
                }
            }
        } catch (const std::exception&) {
            failed[r] = 1;
        }
    });

    for (std::size_t r = 0; r < reps; ++r)
        if (failed[r]) out.failed_reps.push_back(r);
    out.warning_count = warnings.load();
    return out;
}

struct CoverageResult {
    std::vector<double> t_grid;
    std::vector<double> eqte_coverage, eqte_se;
    std::vector<double> eate_coverage, eate_se;
    std::vector<double> eate_unadjusted_coverage, eate_unadjusted_se;
    std::size_t reps_used = 0;
    std::size_t failures = 0;
    std::size_t warning_count = 0;
};

// Per replication: simulate, tune, fit the baseline and every grid level,
// form the bands at rho = alpha, and record whether the analytic truth lies
// inside. Failed replications are excluded and counted.
inline CoverageResult coverage_experiment(const DgpSpec& spec, std::size_t n, double alpha,
                                          std::size_t reps, double confidence,
                                          const std::vector<double>& t_grid, std::uint64_t seed,
                                          const SimPolicy& policy = {}) {
    if (reps < 1) throw std::invalid_argument("reps must be at least 1");
    if (t_grid.empty()) throw std::invalid_argument("t grid must be nonempty");

    const SimOracle oracle = make_oracle(spec);
    const std::vector<double> rho_grid = {alpha};
    const std::size_t nt = t_grid.size();

    // hit flags per rep and t: 1 covered, 0 missed, -1 rep failed
    std::vector<std::vector<signed char>> hit_q(reps), hit_m(reps), hit_u(reps);

    std::atomic<std::size_t> warnings{0};
    ScopedWarningHandler guard([&](const std::string&) { ++warnings; });

    parallel_for(reps, [&](std::size_t r) {
        hit_q[r].assign(nt, -1);
        hit_m[r].assign(nt, -1);
        hit_u[r].assign(nt, -1);
        try {
            SeededRng rng(seed, r);
            const Dataset ds = dgp_sample(spec, n, rng);
            const std::vector<double> w = detail::rep_weights(ds, policy);
            const double h = detail::rep_bandwidth(ds, policy);
            const int k_n = detail::rep_k(ds, w, h, policy);

            const LocalSurvival base_local(ds, w, policy.kernel, policy.baseline_t, h,
                                           policy.boundary);
            const TailFit base_fit = fit_tail_local(base_local, k_n, policy.method, policy.J);
            const double base_var =
                policy.sigma2_override
                    ? *policy.sigma2_override
                    : gamma_variance_local(base_local, policy.kernel, base_fit, policy.flavor);

            const double q_base = oracle.quantile(policy.baseline_t, alpha);
            const double tm_base = oracle.tail_mean(policy.baseline_t, alpha);

            for (std::size_t ti = 0; ti < nt; ++ti) {
                const LocalSurvival local(ds, w, policy.kernel, t_grid[ti], h, policy.boundary);
                const TailFit fit = fit_tail_local(local, k_n, policy.method, policy.J);
                const double var =
                    policy.sigma2_override
                        ? *policy.sigma2_override
                        : gamma_variance_local(local, policy.kernel, fit, policy.flavor);

                const double true_eqte = oracle.quantile(t_grid[ti], alpha) / q_base;
                const double true_eate = oracle.tail_mean(t_grid[ti], alpha) / tm_base;

                const EffectBand bq = effect_band(fit, var, base_fit, base_var, alpha,
                                                  policy.delta0, confidence, rho_grid,
                                                  BandKind::Eqte);
                const EffectBand bm = effect_band(fit, var, base_fit, base_var, alpha,
                                                  policy.delta0, confidence, rho_grid,
                                                  BandKind::Eate);
                const EffectBand bu = effect_band(fit, var, base_fit, base_var, alpha,
                                                  policy.delta0, confidence, rho_grid,
                                                  BandKind::EateUnadjusted);
                hit_q[r][ti] = bq.usable[0] && bq.lower[0] <= true_eqte &&
                                       true_eqte <= bq.upper[0]
                                   ? 1
                                   : 0;
                hit_m[r][ti] = bm.usable[0] && bm.lower[0] <= true_eate &&
                                       true_eate <= bm.upper[0]
                                   ? 1
                                   : 0;
                hit_u[r][ti] = bu.usable[0] && bu.lower[0] <= true_eate &&
                                       true_eate <= bu.upper[0]
                                   ? 1
                                   : 0;
            }
        } catch (const std::exception&) {
            hit_q[r].assign(nt, -1);
            hit_m[r].assign(nt, -1);
            hit_u[r].assign(nt, -1);
        }
    });

    CoverageResult out;
    out.t_grid = t_grid;
    out.warning_count = warnings.load();
    auto summarize = [&](const std::vector<std::vector<signed char>>& hits,
                         std::vector<double>& cov, std::vector<double>& se) {
        cov.resize(nt);
        se.resize(nt);
        for (std::size_t ti = 0; ti < nt; ++ti) {
            std::size_t used = 0, covered = 0;
            for (std::size_t r = 0; r < reps; ++r) {
                if (hits[r][ti] < 0) continue;
                ++used;
                covered += hits[r][ti];
            }
            const double p = used > 0 ? static_cast<double>(covered) / used : 0.0;
            cov[ti] = p;
            se[ti] = used > 0 ? std::sqrt(p * (1.0 - p) / static_cast<double>(used)) : 0.0;
        }
    };
    summarize(hit_q, out.eqte_coverage, out.eqte_se);
    summarize(hit_m, out.eate_coverage, out.eate_se);
    summarize(hit_u, out.eate_unadjusted_coverage, out.eate_unadjusted_se);

    std::size_t failed = 0;
    for (std::size_t r = 0; r < reps; ++r)
        if (hit_q[r].empty() || hit_q[r][0] < 0) ++failed;
    out.failures = failed;
    out.reps_used = reps - failed;
    return out;
}

}  // namespace xtreat
