#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iostream>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace xtreat {

inline constexpr double pi_const = 3.141592653589793238462643383279502884;

// ---------------------------------------------------------------------------
// warnings
//
// Estimators occasionally have to make a judgement call (flooring a negative
// variance plug-in, collapsing a degenerate bandwidth interval). These are
// reported through a replaceable handler so batch drivers can count them
// instead of spamming stderr.
// ---------------------------------------------------------------------------

using WarningHandler = std::function<void(const std::string&)>;

inline WarningHandler& warning_handler() {
    static WarningHandler handler = [](const std::string& msg) {
        std::cerr << "xtreat: warning: " << msg << "\n";
    };
    return handler;
}

inline void warn(const std::string& msg) {
    const auto& h = warning_handler();
    if (h) h(msg);
}

// Swaps the warning handler for the lifetime of a scope (e.g. to count
// warnings across Monte-Carlo replications instead of printing each one).
class ScopedWarningHandler {
  public:
    explicit ScopedWarningHandler(WarningHandler handler) : saved_(warning_handler()) {
        warning_handler() = std::move(handler);
    }
    ~ScopedWarningHandler() { warning_handler() = std::move(saved_); }
    ScopedWarningHandler(const ScopedWarningHandler&) = delete;
    ScopedWarningHandler& operator=(const ScopedWarningHandler&) = delete;

  private:
    WarningHandler saved_;
};

// ---------------------------------------------------------------------------
// data types
// ---------------------------------------------------------------------------

struct Observation {
    double t = 0.0;                  // treatment level, in [0,1] after rescaling
    std::vector<double> x;           // covariates, length r
    double y = 0.0;                  // outcome
    std::optional<double> weight;    // stabilized weight, if precomputed
};

struct Dataset {
    std::vector<Observation> obs;
    int r = 0;                       // covariate dimension

    std::size_t n() const { return obs.size(); }
    bool has_weights() const { return !obs.empty() && obs.front().weight.has_value(); }
    void validate() const;
};

inline void Dataset::validate() const {
    if (obs.empty())
        throw std::invalid_argument("dataset must contain at least one observation");
    const bool weighted = obs.front().weight.has_value();
    for (std::size_t i = 0; i < obs.size(); ++i) {
        const Observation& o = obs[i];
        const std::string at = "observation " + std::to_string(i);
        if (!std::isfinite(o.t)) throw std::invalid_argument(at + ": treatment is not finite");
        if (!std::isfinite(o.y)) throw std::invalid_argument(at + ": outcome is not finite");
        if (static_cast<int>(o.x.size()) != r)
            throw std::invalid_argument(at + ": covariate length " + std::to_string(o.x.size()) +
                                        " does not match dataset dimension " + std::to_string(r));
        for (double v : o.x)
            if (!std::isfinite(v)) throw std::invalid_argument(at + ": covariate is not finite");
        if (o.weight.has_value() != weighted)
            throw std::invalid_argument("either all or none of the observations may carry a weight (" +
                                        at + " disagrees)");
        if (o.weight && !(*o.weight > 0.0))
            throw std::invalid_argument(at + ": weight must be positive");
    }
}

inline Dataset make_dataset(const std::vector<double>& ts, const std::vector<double>& ys) {
    if (ts.size() != ys.size())
        throw std::invalid_argument("treatment and outcome vectors must have equal length");
    Dataset ds;
    ds.r = 0;
    ds.obs.reserve(ts.size());
    for (std::size_t i = 0; i < ts.size(); ++i) ds.obs.push_back({ts[i], {}, ys[i], std::nullopt});
    ds.validate();
    return ds;
}

// ---------------------------------------------------------------------------
// kernels
//
// Symmetric, nonnegative, supported in [-1,1], integrating to one. The moment
// constants are closed forms: kappa21 = int u^2 K(u) du, kappa02 = int K^2.
// ---------------------------------------------------------------------------

enum class KernelShape { Epanechnikov, Biweight, Triangular };

struct KernelSpec {
    KernelShape shape = KernelShape::Epanechnikov;
    double kappa21 = 0.2;
    double kappa02 = 0.6;
};

inline KernelSpec make_kernel(KernelShape shape) {
    switch (shape) {
        case KernelShape::Epanechnikov: return {shape, 0.2, 0.6};
        case KernelShape::Biweight:     return {shape, 1.0 / 7.0, 5.0 / 7.0};
        case KernelShape::Triangular:   return {shape, 1.0 / 6.0, 2.0 / 3.0};
    }
    throw std::invalid_argument("unknown kernel shape");
}

inline double kernel_eval(const KernelSpec& k, double u) {
    const double a = std::fabs(u);
    if (a >= 1.0) return 0.0;
    switch (k.shape) {
        case KernelShape::Epanechnikov: return 0.75 * (1.0 - u * u);
        case KernelShape::Biweight: {
            const double w = 1.0 - u * u;
            return 0.9375 * w * w;
        }
        case KernelShape::Triangular: return 1.0 - a;
    }
    return 0.0;
}

inline std::pair<double, double> kernel_moments(const KernelSpec& k) {
    return {k.kappa21, k.kappa02};
}

// How kernel mass falling outside the treatment support [0,1] is handled.
// Raw keeps the truncated kernel; Reflect folds the lost mass back in at the
// edges (used by the simulation paths, where the baseline level sits at 0).
enum class BoundaryPolicy { Raw, Reflect };

// Unnormalized kernel weight of observation T_i for a fit at t. Under
// Reflect, images of T_i mirrored at 0 and at 1 are added; away from the
// edges both extra terms vanish.
inline double boundary_kernel(const KernelSpec& k, double T_i, double t, double h,
                              BoundaryPolicy policy) {
    double w = kernel_eval(k, (T_i - t) / h);
    if (policy == BoundaryPolicy::Reflect) {
        w += kernel_eval(k, (T_i + t) / h);
        w += kernel_eval(k, (2.0 - T_i - t) / h);
    }
    return w;
}

// ---------------------------------------------------------------------------
// treatment rescaling
// ---------------------------------------------------------------------------

// Affine map taking the observed treatment range onto [0,1]; keep it around to
// report results on the original scale.
struct AffineMap {
    double lo = 0.0;
    double hi = 1.0;
    double forward(double t) const { return (t - lo) / (hi - lo); }
    double inverse(double s) const { return lo + s * (hi - lo); }
};

inline std::pair<Dataset, AffineMap> rescale_treatment(const Dataset& ds) {
    ds.validate();
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (const auto& o : ds.obs) {
        lo = std::min(lo, o.t);
        hi = std::max(hi, o.t);
    }
    if (!(hi > lo)) throw std::invalid_argument("treatment has no variation");
    const AffineMap map{lo, hi};
    if (lo == 0.0 && hi == 1.0) return {ds, map};
    Dataset out = ds;
    for (auto& o : out.obs) o.t = map.forward(o.t);
    return {out, map};
}

// ---------------------------------------------------------------------------
// deterministic RNG
//
// mt19937_64 seeded through a splitmix64 mix of (seed, stream). Uniform draws
// take the top 53 bits of the raw output directly: the standard distribution
// objects have unspecified algorithms and are not reproducible across
// standard libraries, and the Monte Carlo contract here is bitwise.
// ---------------------------------------------------------------------------

class SeededRng {
  public:
    explicit SeededRng(std::uint64_t seed, std::uint64_t stream = 0)
        : eng_(mix_seed(seed, stream)) {}

    // uniform on (0,1); never returns 0 so inverse transforms may divide by it
    double uniform() {
        const double u = static_cast<double>(eng_() >> 11) * 0x1.0p-53;
        return u == 0.0 ? 0x1.0p-53 : u;
    }

    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    // integer in [lo, hi]; modulo bias is irrelevant at the ranges used here
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<std::int64_t>(eng_() % span);
    }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * pi_const * u2;
        spare_ = radius * std::sin(angle);
        have_spare_ = true;
        return radius * std::cos(angle);
    }

    std::uint64_t raw() { return eng_(); }

  private:
    static std::uint64_t splitmix64(std::uint64_t& state) {
        state += 0x9E3779B97F4A7C15ull;
        std::uint64_t z = state;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    static std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
        std::uint64_t s = seed;
        std::uint64_t a = splitmix64(s);
        s ^= stream * 0xD1B54A32D192ED03ull + 0x8CB92BA72F3D8DD7ull;
        std::uint64_t b = splitmix64(s);
        return a ^ (b + 0x9E3779B97F4A7C15ull + (a << 6) + (a >> 2));
    }

    std::mt19937_64 eng_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

// ---------------------------------------------------------------------------
// numeric utilities
// ---------------------------------------------------------------------------

// Inverse standard normal CDF. Acklam's rational approximation polished with
// one Halley step against erfc; accurate to ~1e-15 relative over (0,1).
inline double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0))
        throw std::domain_error("normal quantile requires p in (0,1)");

    static constexpr double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                    -2.759285104469687e+02, 1.383577518672690e+02,
                                    -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                    -1.556989798598866e+02, 6.680131188771972e+01,
                                    -1.328068155288572e+01};
    static constexpr double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                    -2.400758277161838e+00, -2.549732539343734e+00,
                                    4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                                    2.445134137142996e+00, 3.754408661907416e+00};

    const double plow = 0.02425;
    double x;
    if (p < plow) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - plow) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }

    const double err = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
    const double u = err * std::sqrt(2.0 * pi_const) * std::exp(0.5 * x * x);
    return x - u / (1.0 + 0.5 * x * u);
}

inline std::vector<double> linspace(double a, double b, std::size_t n) {
    if (n == 0) return {};
    if (n == 1) return {a};
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i)
        out[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
    out.front() = a;
    out.back() = b;  // endpoints exact, not a + (b-a)
    return out;
}

inline double sample_mean(const std::vector<double>& xs) {
    if (xs.empty()) throw std::invalid_argument("mean of empty sample");
    double s = 0.0;
    for (double v : xs) s += v;
    return s / static_cast<double>(xs.size());
}

// two-pass sample variance with 1/(n-1) normalization
inline double sample_variance(const std::vector<double>& xs) {
    if (xs.size() < 2) throw std::invalid_argument("variance needs at least two points");
    const double m = sample_mean(xs);
    double s = 0.0;
    for (double v : xs) s += (v - m) * (v - m);
    return s / static_cast<double>(xs.size() - 1);
}

// order statistic interpolation at probability p (the common "type 7" rule)
inline double sample_quantile(std::vector<double> xs, double p) {
    if (xs.empty()) throw std::invalid_argument("quantile of empty sample");
    if (!(p >= 0.0 && p <= 1.0)) throw std::domain_error("quantile level must be in [0,1]");
    std::sort(xs.begin(), xs.end());
    const double pos = p * static_cast<double>(xs.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    if (lo + 1 >= xs.size()) return xs.back();
    const double frac = pos - static_cast<double>(lo);
    return xs[lo] + frac * (xs[lo + 1] - xs[lo]);
}

inline double pearson_correlation(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size() || xs.size() < 2)
        throw std::invalid_argument("correlation needs two equal-length samples of size >= 2");
    const double mx = sample_mean(xs);
    const double my = sample_mean(ys);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double dx = xs[i] - mx;
        const double dy = ys[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (!(sxx > 0.0) || !(syy > 0.0))
        throw std::domain_error("correlation undefined for a constant sample");
    return sxy / std::sqrt(sxx * syy);
}

namespace detail {

inline double simpson(double a, double b, double fa, double fm, double fb) {
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

inline double adaptive_simpson_rec(const std::function<double(double)>& f, double a, double b,
                                   double fa, double fm, double fb, double whole, double tol,
                                   int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = simpson(a, m, fa, flm, fm);
    const double right = simpson(m, b, fm, frm, fb);
    const double delta = left + right - whole;
    if (depth <= 0 || std::fabs(delta) <= 15.0 * tol)
        return left + right + delta / 15.0;
    return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           adaptive_simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                               double tol = 1e-10, int max_depth = 50) {
    const double fa = f(a);
    const double fb = f(b);
    const double fm = f(0.5 * (a + b));
    const double whole = detail::simpson(a, b, fa, fm, fb);
    return detail::adaptive_simpson_rec(f, a, b, fa, fm, fb, whole, tol, max_depth);
}

}  // namespace xtreat
