#pragma once

// Coefficient functions, time change and drift normalization.
//
// Coefficients come from a small closed-form taxonomy (constant,
// cosine-affine, piecewise-linear) plus an escape hatch for user callables.
// The closed forms carry exact integrals, squared integrals and window sups,
// which keeps the acceptance probabilities downstream free of quadrature
// error; callables fall back to adaptive quadrature and guarded grid sups.

#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "series.hpp"

namespace nsrbm {

struct Tolerances {
    double quadrature = 1e-12;
    double inversion = 1e-12;
    double envelope_margin = 1.01;  // inflation of d for numerically fitted envelopes
    int grid = 2048;                // validation / sup grid size per unit window
};

namespace fn {

struct Constant {
    double c;
};

// amp * cos(2 pi omega t + phase) + offset
struct CosineAffine {
    double amp, omega, phase, offset;
};

// Linear interpolation through (t_i, v_i); constant extension outside the
// breakpoints, or periodic repetition when period is set (breakpoints must
// then cover [0, period] with t.front() == 0, t.back() == period).
struct PiecewiseLinear {
    std::vector<double> t, v;
    std::optional<double> period;
};

struct Callable {
    std::function<double(double)> f;
    std::function<double(double)> fprime;
};

}  // namespace fn

namespace detail {

inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double fa, double fm,
                               double fb, double tol, int depth) {
    double m = 0.5 * (a + b);
    double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    double flm = f(lm), frm = f(rm);
    double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if (depth <= 0 || std::abs(left + right - whole) < 15.0 * tol)
        return left + right + (left + right - whole) / 15.0;
    return adaptive_simpson(f, a, m, fa, flm, fm, tol / 2.0, depth - 1) +
           adaptive_simpson(f, m, b, fm, frm, fb, tol / 2.0, depth - 1);
}

inline double integrate(const std::function<double(double)>& f, double a, double b, double tol) {
    if (a == b) return 0.0;
    double m = 0.5 * (a + b);
    return adaptive_simpson(f, a, b, f(a), f(m), f(b), tol, 40);
}

}  // namespace detail

// A scalar function of time with exact calculus where the form allows it.
class TimeFunction {
  public:
    TimeFunction() : rep_(fn::Constant{0.0}) {}

    static TimeFunction constant(double c) { return TimeFunction(fn::Constant{c}); }
    static TimeFunction cosine_affine(double amp, double omega, double phase, double offset) {
        if (!(omega > 0.0)) throw std::invalid_argument("cosine_affine: omega must be positive");
        return TimeFunction(fn::CosineAffine{amp, omega, phase, offset});
    }
    static TimeFunction piecewise_linear(std::vector<double> t, std::vector<double> v,
                                         std::optional<double> period = std::nullopt) {
        if (t.size() != v.size() || t.size() < 2) throw std::invalid_argument("piecewise_linear: need matching breakpoints");
        for (std::size_t i = 0; i + 1 < t.size(); ++i)
            if (!(t[i] < t[i + 1])) throw std::invalid_argument("piecewise_linear: breakpoints must ascend");
        if (period) {
            if (t.front() != 0.0 || std::abs(t.back() - *period) > 1e-12)
                throw std::invalid_argument("piecewise_linear: periodic breakpoints must span [0, period]");
        }
        return TimeFunction(fn::PiecewiseLinear{std::move(t), std::move(v), period});
    }
    static TimeFunction callable(std::function<double(double)> f, std::function<double(double)> fprime) {
        return TimeFunction(fn::Callable{std::move(f), std::move(fprime)});
    }

    bool is_closed_form() const { return !std::holds_alternative<fn::Callable>(rep_); }

    double operator()(double t) const {
        return std::visit(
            [&](const auto& r) -> double {
                using T = std::decay_t<decltype(r)>;
                if constexpr (std::is_same_v<T, fn::Constant>) return r.c;
                else if constexpr (std::is_same_v<T, fn::CosineAffine>)
                    return r.amp * std::cos(2.0 * series::kPi * r.omega * t + r.phase) + r.offset;
                else if constexpr (std::is_same_v<T, fn::PiecewiseLinear>) return pl_value(r, t);
                else return r.f(t);
            },
            rep_);
    }

    double derivative(double t) const {
        return std::visit(
            [&](const auto& r) -> double {
                using T = std::decay_t<decltype(r)>;
                if constexpr (std::is_same_v<T, fn::Constant>) return 0.0;
                else if constexpr (std::is_same_v<T, fn::CosineAffine>)
                    return -2.0 * series::kPi * r.omega * r.amp *
                           std::sin(2.0 * series::kPi * r.omega * t + r.phase);
                else if constexpr (std::is_same_v<T, fn::PiecewiseLinear>) return pl_slope(r, t);
                else return r.fprime(t);
            },
            rep_);
    }

    // exact integral for closed forms; adaptive quadrature otherwise
    double integral(double a, double b, const Tolerances& tol = {}) const {
        if (a == b) return 0.0;
        if (b < a) return -integral(b, a, tol);
        return std::visit(
            [&](const auto& r) -> double {
                using T = std::decay_t<decltype(r)>;
                if constexpr (std::is_same_v<T, fn::Constant>) return r.c * (b - a);
                else if constexpr (std::is_same_v<T, fn::CosineAffine>) {
                    double w = 2.0 * series::kPi * r.omega;
                    return r.amp / w * (std::sin(w * b + r.phase) - std::sin(w * a + r.phase)) +
                           r.offset * (b - a);
                } else if constexpr (std::is_same_v<T, fn::PiecewiseLinear>) return pl_integral(r, a, b);
                else return detail::integrate(r.f, a, b, tol.quadrature);
            },
            rep_);
    }

    double integral_square(double a, double b, const Tolerances& tol = {}) const {
        if (a == b) return 0.0;
        if (b < a) return -integral_square(b, a, tol);
        return std::visit(
            [&](const auto& r) -> double {
                using T = std::decay_t<decltype(r)>;
                if constexpr (std::is_same_v<T, fn::Constant>) return r.c * r.c * (b - a);
                else if constexpr (std::is_same_v<T, fn::CosineAffine>) {
                    // (A cos psi + c)^2 = A^2 cos^2 psi + 2 A c cos psi + c^2
                    double w = 2.0 * series::kPi * r.omega;
                    double cos_int = (std::sin(w * b + r.phase) - std::sin(w * a + r.phase)) / w;
                    double cos2_int = 0.5 * (b - a) + (std::sin(2.0 * (w * b + r.phase)) -
                                                       std::sin(2.0 * (w * a + r.phase))) / (4.0 * w);
                    return r.amp * r.amp * cos2_int + 2.0 * r.amp * r.offset * cos_int +
                           r.offset * r.offset * (b - a);
                } else if constexpr (std::is_same_v<T, fn::PiecewiseLinear>) return pl_integral_square(r, a, b);
                else {
                    auto f2 = [&](double t) { double y = r.f(t); return y * y; };
                    return detail::integrate(f2, a, b, tol.quadrature);
                }
            },
            rep_);
    }

    // sup |f| over [a, b]; exact for closed forms, grid + Lipschitz slack otherwise
    double sup_abs(double a, double b, const Tolerances& tol = {}) const {
        if (b < a) std::swap(a, b);
        return std::visit(
            [&](const auto& r) -> double {
                using T = std::decay_t<decltype(r)>;
                if constexpr (std::is_same_v<T, fn::Constant>) return std::abs(r.c);
                else if constexpr (std::is_same_v<T, fn::CosineAffine>) {
                    double w = 2.0 * series::kPi * r.omega;
                    double best = std::max(std::abs((*this)(a)), std::abs((*this)(b)));
                    // interior extrema where sin(psi) = 0
                    double pa = w * a + r.phase, pb = w * b + r.phase;
                    long k0 = static_cast<long>(std::ceil(pa / series::kPi));
                    for (long k = k0; k * series::kPi <= pb; ++k) {
                        double val = (k % 2 == 0) ? r.amp + r.offset : -r.amp + r.offset;
                        best = std::max(best, std::abs(val));
                        if (k - k0 > 3) break;  // one full period covers both extremes
                    }
                    return best;
                } else if constexpr (std::is_same_v<T, fn::PiecewiseLinear>) return pl_sup_abs(r, a, b);
                else return grid_sup(r, a, b, tol);
            },
            rep_);
    }

    double sup_abs_derivative(double a, double b, const Tolerances& tol = {}) const {
        if (b < a) std::swap(a, b);
        return std::visit(
            [&](const auto& r) -> double {
                using T = std::decay_t<decltype(r)>;
                if constexpr (std::is_same_v<T, fn::Constant>) return 0.0;
                else if constexpr (std::is_same_v<T, fn::CosineAffine>) {
                    double w = 2.0 * series::kPi * r.omega;
                    double pa = w * a + r.phase, pb = w * b + r.phase;
                    double best = std::max(std::abs(std::sin(pa)), std::abs(std::sin(pb)));
                    long k0 = static_cast<long>(std::ceil((pa - series::kPi / 2.0) / series::kPi));
                    if (k0 * series::kPi + series::kPi / 2.0 <= pb) best = 1.0;
                    return w * std::abs(r.amp) * best;
                } else if constexpr (std::is_same_v<T, fn::PiecewiseLinear>) return pl_sup_slope(r, a, b);
                else return grid_sup(fn::Callable{r.fprime, r.fprime}, a, b, tol);
            },
            rep_);
    }

    std::optional<double> period() const {
        if (auto* c = std::get_if<fn::CosineAffine>(&rep_)) return 1.0 / c->omega;
        if (auto* p = std::get_if<fn::PiecewiseLinear>(&rep_)) return p->period;
        if (std::holds_alternative<fn::Constant>(rep_)) return std::nullopt;  // any period
        return std::nullopt;
    }

    const auto& rep() const { return rep_; }

  private:
    template <class R>
    explicit TimeFunction(R r) : rep_(std::move(r)) {}

    static double pl_fold(const fn::PiecewiseLinear& r, double t) {
        if (!r.period) return t;
        double p = *r.period;
        double u = std::fmod(t, p);
        if (u < 0.0) u += p;
        return u;
    }

    static double pl_value(const fn::PiecewiseLinear& r, double t) {
        double u = pl_fold(r, t);
        if (u <= r.t.front()) return r.v.front();
        if (u >= r.t.back()) return r.v.back();
        auto it = std::upper_bound(r.t.begin(), r.t.end(), u);
        std::size_t i = static_cast<std::size_t>(it - r.t.begin()) - 1;
        double w = (u - r.t[i]) / (r.t[i + 1] - r.t[i]);
        return r.v[i] + w * (r.v[i + 1] - r.v[i]);
    }

    static double pl_slope(const fn::PiecewiseLinear& r, double t) {
        double u = pl_fold(r, t);
        if (!r.period && (u <= r.t.front() || u >= r.t.back())) return 0.0;
        auto it = std::upper_bound(r.t.begin(), r.t.end(), u);
        std::size_t i = it == r.t.begin() ? 0 : static_cast<std::size_t>(it - r.t.begin()) - 1;
        if (i + 1 >= r.t.size()) i = r.t.size() - 2;
        return (r.v[i + 1] - r.v[i]) / (r.t[i + 1] - r.t[i]);
    }

    // integral over one fundamental domain [x1, x2] subset of the breakpoint span
    static double pl_integral_base(const fn::PiecewiseLinear& r, double x1, double x2) {
        double total = 0.0;
        for (std::size_t i = 0; i + 1 < r.t.size(); ++i) {
            double a = std::max(x1, r.t[i]), b = std::min(x2, r.t[i + 1]);
            if (a >= b) continue;
            double va = pl_value_nofold(r, i, a), vb = pl_value_nofold(r, i, b);
            total += 0.5 * (va + vb) * (b - a);
        }
        // constant extensions
        if (x1 < r.t.front()) total += r.v.front() * (std::min(x2, r.t.front()) - x1);
        if (x2 > r.t.back()) total += r.v.back() * (x2 - std::max(x1, r.t.back()));
        return total;
    }

    static double pl_value_nofold(const fn::PiecewiseLinear& r, std::size_t i, double u) {
        double w = (u - r.t[i]) / (r.t[i + 1] - r.t[i]);
        return r.v[i] + w * (r.v[i + 1] - r.v[i]);
    }

    static double pl_integral(const fn::PiecewiseLinear& r, double a, double b) {
        if (!r.period) return pl_integral_base(r, a, b);
        double p = *r.period;
        double per = pl_integral_base(r, 0.0, p);
        double fa = std::floor(a / p), fb = std::floor(b / p);
        if (fa == fb) return pl_integral_base(r, a - fa * p, b - fa * p);
        double total = pl_integral_base(r, a - fa * p, p) + pl_integral_base(r, 0.0, b - fb * p);
        total += (fb - fa - 1.0) * per;
        return total;
    }

    static double pl_integral_square_base(const fn::PiecewiseLinear& r, double x1, double x2) {
        double total = 0.0;
        auto seg = [](double va, double vb, double len) {
            // exact integral of a linear ramp squared
            return len * (va * va + va * vb + vb * vb) / 3.0;
        };
        for (std::size_t i = 0; i + 1 < r.t.size(); ++i) {
            double a = std::max(x1, r.t[i]), b = std::min(x2, r.t[i + 1]);
            if (a >= b) continue;
            total += seg(pl_value_nofold(r, i, a), pl_value_nofold(r, i, b), b - a);
        }
        if (x1 < r.t.front()) total += r.v.front() * r.v.front() * (std::min(x2, r.t.front()) - x1);
        if (x2 > r.t.back()) total += r.v.back() * r.v.back() * (x2 - std::max(x1, r.t.back()));
        return total;
    }

    static double pl_integral_square(const fn::PiecewiseLinear& r, double a, double b) {
        if (!r.period) return pl_integral_square_base(r, a, b);
        double p = *r.period;
        double per = pl_integral_square_base(r, 0.0, p);
        double fa = std::floor(a / p), fb = std::floor(b / p);
        if (fa == fb) return pl_integral_square_base(r, a - fa * p, b - fa * p);
        double total = pl_integral_square_base(r, a - fa * p, p) + pl_integral_square_base(r, 0.0, b - fb * p);
        total += (fb - fa - 1.0) * per;
        return total;
    }

    static double pl_sup_abs(const fn::PiecewiseLinear& r, double a, double b) {
        if (r.period && b - a >= *r.period) {
            double best = 0.0;
            for (double v : r.v) best = std::max(best, std::abs(v));
            return best;
        }
        double best = std::max(std::abs(pl_value(r, a)), std::abs(pl_value(r, b)));
        double ua = pl_fold(r, a), ub = pl_fold(r, b);
        for (std::size_t i = 0; i < r.t.size(); ++i) {
            double knot = r.t[i];
            bool inside;
            if (!r.period) inside = knot > a && knot < b;
            else if (ua <= ub) inside = knot > ua && knot < ub;
            else inside = knot > ua || knot < ub;  // window wraps the period
            if (inside) best = std::max(best, std::abs(r.v[i]));
        }
        return best;
    }

    static double pl_sup_slope(const fn::PiecewiseLinear& r, double a, double b) {
        double best = 0.0;
        if (r.period && b - a >= *r.period) {
            for (std::size_t i = 0; i + 1 < r.t.size(); ++i)
                best = std::max(best, std::abs((r.v[i + 1] - r.v[i]) / (r.t[i + 1] - r.t[i])));
            return best;
        }
        double ua = pl_fold(r, a), ub = pl_fold(r, b);
        for (std::size_t i = 0; i + 1 < r.t.size(); ++i) {
            double s = std::abs((r.v[i + 1] - r.v[i]) / (r.t[i + 1] - r.t[i]));
            bool touches;
            if (!r.period) touches = r.t[i] < b && r.t[i + 1] > a;
            else if (ua <= ub) touches = r.t[i] < ub && r.t[i + 1] > ua;
            else touches = r.t[i] < ub || r.t[i + 1] > ua;  // window wraps
            if (touches) best = std::max(best, s);
        }
        return best;
    }

    static double grid_sup(const fn::Callable& r, double a, double b, const Tolerances& tol) {
        int n = std::max(64, static_cast<int>(tol.grid * std::min(8.0, std::max(1.0, b - a))));
        double best = 0.0, prev = std::abs(r.f(a));
        double lip = 0.0;
        double h = (b - a) / n;
        for (int i = 1; i <= n; ++i) {
            double cur = std::abs(r.f(a + i * h));
            best = std::max(best, std::max(cur, prev));
            lip = std::max(lip, std::abs(cur - prev) / h);
            prev = cur;
        }
        return best + 0.75 * lip * h;  // Lipschitz slack
    }

    std::variant<fn::Constant, fn::CosineAffine, fn::PiecewiseLinear, fn::Callable> rep_;
};

// --------------------------------------------------------------------------
// Coefficient pair (mu, sigma^2) and its time reversal.
// --------------------------------------------------------------------------
struct CoefficientSpec {
    TimeFunction mu;
    TimeFunction sigma2;
    std::optional<double> period;  // common period of both functions, if any

    void validate(const Tolerances& tol = {}) const {
        double w = period.value_or(8.0);
        int n = 257;
        for (int i = 0; i < n; ++i) {
            double t = w * i / (n - 1);
            if (!(sigma2(t) > 0.0)) throw std::invalid_argument("CoefficientSpec: sigma2 must be positive");
            if (period) {
                if (std::abs(mu(t + *period) - mu(t)) > 1e-9 * (1.0 + std::abs(mu(t))))
                    throw std::invalid_argument("CoefficientSpec: mu not periodic with the declared period");
                if (std::abs(sigma2(t + *period) - sigma2(t)) > 1e-9 * (1.0 + std::abs(sigma2(t))))
                    throw std::invalid_argument("CoefficientSpec: sigma2 not periodic with the declared period");
            }
        }
        (void)tol;
    }
};

namespace detail {

inline TimeFunction reverse_function(const TimeFunction& f, double t_horizon) {
    return std::visit(
        [&](const auto& r) -> TimeFunction {
            using T = std::decay_t<decltype(r)>;
            if constexpr (std::is_same_v<T, fn::Constant>) return TimeFunction::constant(r.c);
            else if constexpr (std::is_same_v<T, fn::CosineAffine>) {
                // amp cos(w(t-r)+phase) = amp cos(w r - (w t + phase))
                double w = 2.0 * series::kPi * r.omega;
                return TimeFunction::cosine_affine(r.amp, r.omega, -(w * t_horizon + r.phase), r.offset);
            } else if constexpr (std::is_same_v<T, fn::PiecewiseLinear>) {
                if (r.period) {
                    double p = *r.period;
                    double b = std::fmod(t_horizon, p);
                    if (b < 0.0) b += p;
                    // g(u) = f((b - u) mod p): reflect then roll so breakpoints span [0, p]
                    std::vector<double> ts, vs;
                    std::vector<double> knots;
                    for (double tk : r.t) {
                        double u = std::fmod(b - tk, p);
                        if (u < 0.0) u += p;
                        knots.push_back(u);
                    }
                    knots.push_back(0.0);
                    knots.push_back(p);
                    std::sort(knots.begin(), knots.end());
                    knots.erase(std::unique(knots.begin(), knots.end(),
                                            [](double x, double y) { return std::abs(x - y) < 1e-14; }),
                                knots.end());
                    for (double u : knots) {
                        ts.push_back(u);
                        double src = std::fmod(b - u, p);
                        if (src < 0.0) src += p;
                        vs.push_back(f(src));
                    }
                    return TimeFunction::piecewise_linear(ts, vs, p);
                }
                std::vector<double> ts, vs;
                for (auto it = r.t.rbegin(); it != r.t.rend(); ++it) {
                    ts.push_back(t_horizon - *it);
                    vs.push_back(f(*it));
                }
                // drop knots that land before time zero
                std::vector<double> ts2, vs2;
                for (std::size_t i = 0; i < ts.size(); ++i)
                    if (ts[i] >= 0.0) { ts2.push_back(ts[i]); vs2.push_back(vs[i]); }
                if (ts2.size() < 2) return TimeFunction::constant(f(t_horizon));
                return TimeFunction::piecewise_linear(ts2, vs2, std::nullopt);
            } else {
                auto g = r.f;
                auto gp = r.fprime;
                return TimeFunction::callable([g, t_horizon](double u) { return g(t_horizon - u); },
                                              [gp, t_horizon](double u) { return -gp(t_horizon - u); });
            }
        },
        f.rep());
}

}  // namespace detail

// Time-reversed coefficients mu'(r) = mu(t - r), sigma'(r) = sigma(t - r).
// For an infinite horizon the spec must be periodic; reversal then only
// depends on the phase, taken as 0 (integer horizon).
inline CoefficientSpec reverse_spec(const CoefficientSpec& spec, double t) {
    double horizon = t;
    if (std::isinf(t)) {
        if (!spec.period) throw std::invalid_argument("infinite-horizon reversal requires periodicity");
        horizon = 0.0;
    }
    CoefficientSpec out;
    out.mu = detail::reverse_function(spec.mu, horizon);
    out.sigma2 = detail::reverse_function(spec.sigma2, horizon);
    out.period = spec.period;
    return out;
}

// --------------------------------------------------------------------------
// Normalized model: time change Lambda, normalized drift gamma.
// --------------------------------------------------------------------------
struct EnvelopeParams {
    double d;
    double gamma_bar;
};

struct LocalBounds {
    double m;        // sup |gamma'|
    double m_tilde;  // sup |gamma|
};

class NormalizedModel {
  public:
    TimeFunction gamma;                     // drift of the time-changed process
    std::optional<double> gamma_period;     // period of gamma in Lambda-time
    std::optional<EnvelopeParams> envelope; // Assumption-2 parameters, when fitted
    Tolerances tol;

    // time change
    double lambda(double t) const {
        if (std::isinf(t)) return t;
        if (sigma2_const_ > 0.0) return sigma2_const_ * t;
        return sigma2_.integral(0.0, t, tol);
    }

    double lambda_inv(double u) const {
        if (std::isinf(u)) return u;
        if (sigma2_const_ > 0.0) return u / sigma2_const_;
        if (u == 0.0) return 0.0;
        // bracket by geometric growth, then bisection + secant polish
        double hi = 1.0;
        while (lambda(hi) < u) hi *= 2.0;
        double lo = 0.0;
        for (int i = 0; i < 200 && hi - lo > tol.inversion; ++i) {
            double mid = 0.5 * (lo + hi);
            (lambda(mid) < u ? lo : hi) = mid;
        }
        return 0.5 * (lo + hi);
    }

    double gamma_integral(double a, double b) const { return gamma.integral(a, b, tol); }
    double gamma_integral_square(double a, double b) const { return gamma.integral_square(a, b, tol); }

    // construction
    static NormalizedModel from_spec(const CoefficientSpec& spec, const Tolerances& tol = {});

    double sigma2_const() const { return sigma2_const_; }
    const TimeFunction& sigma2_fn() const { return sigma2_; }

  private:
    TimeFunction sigma2_;
    double sigma2_const_ = 0.0;  // > 0 when sigma2 is constant
    friend NormalizedModel normalize(const CoefficientSpec&, const Tolerances&);
};

inline LocalBounds local_bounds(const NormalizedModel& model, double s, double delta) {
    if (!(delta > 0.0)) throw std::invalid_argument("local_bounds: need delta > 0");
    return {model.gamma.sup_abs_derivative(s, s + delta, model.tol),
            model.gamma.sup_abs(s, s + delta, model.tol)};
}

// Fit Assumption-2 parameters: int_s^t gamma <= d - (t-s) gamma_bar.
// Exact for the closed-form kinds; numeric fit with a safety margin on d
// otherwise. The window argument is used for non-periodic numeric drifts.
inline EnvelopeParams fit_envelope(const NormalizedModel& model, std::optional<double> window = std::nullopt) {
    const TimeFunction& g = model.gamma;
    const auto& rep = g.rep();
    if (auto* c = std::get_if<fn::Constant>(&rep)) {
        if (!(c->c < 0.0)) throw std::invalid_argument("Assumption 2 unsatisfiable: nonnegative mean drift");
        return {0.0, -c->c};
    }
    if (auto* ca = std::get_if<fn::CosineAffine>(&rep)) {
        if (!(ca->offset < 0.0)) throw std::invalid_argument("Assumption 2 unsatisfiable: nonnegative mean drift");
        return {std::abs(ca->amp) / (series::kPi * ca->omega), -ca->offset};
    }
    if (auto* pl = std::get_if<fn::PiecewiseLinear>(&rep)) {
        if (pl->period) {
            double p = *pl->period;
            double mean = g.integral(0.0, p, model.tol) / p;
            if (!(mean < 0.0)) throw std::invalid_argument("Assumption 2 unsatisfiable: nonnegative mean drift");
            double gbar = -mean;
            // F(t) = int_0^t (gamma + gbar); d = max F - min F over one period,
            // extrema at knots and interior roots of gamma + gbar.
            double fmax = 0.0, fmin = 0.0, F = 0.0;
            std::vector<double> grid;
            for (double tk : pl->t) grid.push_back(tk);
            for (std::size_t i = 0; i + 1 < pl->t.size(); ++i) {
                double v0 = pl->v[i] + gbar, v1 = pl->v[i + 1] + gbar;
                if ((v0 < 0.0) != (v1 < 0.0)) {
                    double root = pl->t[i] + (0.0 - v0) / (v1 - v0) * (pl->t[i + 1] - pl->t[i]);
                    grid.push_back(root);
                }
            }
            std::sort(grid.begin(), grid.end());
            double prev = 0.0;
            for (double tg : grid) {
                F += g.integral(prev, tg, model.tol) + gbar * (tg - prev);
                fmax = std::max(fmax, F);
                fmin = std::min(fmin, F);
                prev = tg;
            }
            return {fmax - fmin, gbar};
        }
        double tail = pl->v.back();
        if (!(tail < 0.0)) throw std::invalid_argument("Assumption 2 unsatisfiable: nonnegative tail drift");
        double gbar = -tail;
        // max drawup of F over the compact part (F flat afterwards)
        double F = 0.0, minF = 0.0, d = 0.0, prev = 0.0;
        for (double tk : pl->t) {
            F += g.integral(prev, tk, model.tol) + gbar * (tk - prev);
            d = std::max(d, F - minF);
            minF = std::min(minF, F);
            prev = tk;
        }
        return {d, gbar};
    }
    // numeric drift: need a period or an explicit window
    double w;
    if (model.gamma_period) w = *model.gamma_period;
    else if (window) w = *window;
    else throw std::invalid_argument("fit_envelope: numeric drift requires a period or window");
    double mean = g.integral(0.0, w, model.tol) / w;
    if (!(mean < 0.0)) throw std::invalid_argument("Assumption 2 unsatisfiable: nonnegative mean drift");
    double gbar = -mean;
    int n = std::max(512, model.tol.grid);
    double F = 0.0, fmax = 0.0, fmin = 0.0, prev = 0.0;
    for (int i = 1; i <= n; ++i) {
        double t = w * i / n;
        F += g.integral(prev, t, model.tol) + gbar * (t - prev);
        fmax = std::max(fmax, F);
        fmin = std::min(fmin, F);
        prev = t;
    }
    return {(fmax - fmin) * model.tol.envelope_margin, gbar};
}

inline NormalizedModel normalize(const CoefficientSpec& spec, const Tolerances& tol = {}) {
    spec.validate(tol);
    NormalizedModel m;
    m.tol = tol;
    m.sigma2_ = spec.sigma2;
    if (auto* c = std::get_if<fn::Constant>(&spec.sigma2.rep())) {
        if (!(c->c > 0.0)) throw std::invalid_argument("normalize: sigma2 must be positive");
        m.sigma2_const_ = c->c;
        double s2 = c->c;
        // gamma(u) = mu(u / s2) / s2 stays in the closed-form family
        const auto& mu = spec.mu.rep();
        if (auto* mc = std::get_if<fn::Constant>(&mu)) m.gamma = TimeFunction::constant(mc->c / s2);
        else if (auto* ca = std::get_if<fn::CosineAffine>(&mu))
            m.gamma = TimeFunction::cosine_affine(ca->amp / s2, ca->omega / s2, ca->phase, ca->offset / s2);
        else if (auto* pl = std::get_if<fn::PiecewiseLinear>(&mu)) {
            std::vector<double> ts, vs;
            for (std::size_t i = 0; i < pl->t.size(); ++i) {
                ts.push_back(pl->t[i] * s2);
                vs.push_back(pl->v[i] / s2);
            }
            std::optional<double> p = pl->period ? std::optional<double>(*pl->period * s2) : std::nullopt;
            m.gamma = TimeFunction::piecewise_linear(ts, vs, p);
        } else {
            auto f = spec.mu;
            m.gamma = TimeFunction::callable([f, s2](double u) { return f(u / s2) / s2; },
                                             [f, s2](double u) { return f.derivative(u / s2) / (s2 * s2); });
        }
    } else {
        // general time change: gamma(u) = mu(s)/sigma2(s), s = lambda_inv(u)
        m.sigma2_const_ = 0.0;
        auto mu = spec.mu;
        auto s2f = spec.sigma2;
        auto tolc = tol;
        auto lam_inv = [s2f, tolc](double u) {
            if (u == 0.0) return 0.0;
            double hi = 1.0;
            while (s2f.integral(0.0, hi, tolc) < u) hi *= 2.0;
            double lo = 0.0;
            for (int i = 0; i < 200 && hi - lo > tolc.inversion; ++i) {
                double mid = 0.5 * (lo + hi);
                (s2f.integral(0.0, mid, tolc) < u ? lo : hi) = mid;
            }
            return 0.5 * (lo + hi);
        };
        m.gamma = TimeFunction::callable(
            [mu, s2f, lam_inv](double u) {
                double s = lam_inv(u);
                return mu(s) / s2f(s);
            },
            [mu, s2f, lam_inv](double u) {
                double s = lam_inv(u);
                double v = s2f(s);
                return (mu.derivative(s) * v - mu(s) * s2f.derivative(s)) / (v * v * v);
            });
    }
    if (spec.period) m.gamma_period = m.lambda(*spec.period);
    try {
        m.envelope = fit_envelope(m);
    } catch (const std::invalid_argument&) {
        m.envelope = std::nullopt;  // caller may fit with an explicit window or overrides
    }
    return m;
}

inline NormalizedModel NormalizedModel::from_spec(const CoefficientSpec& spec, const Tolerances& tol) {
    return normalize(spec, tol);
}

}  // namespace nsrbm
