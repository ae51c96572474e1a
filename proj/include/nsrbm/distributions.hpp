#pragma once

// Exact sampling primitives on top of the bracketed series:
//   - inverse Gaussian variates,
//   - first exit time of Brownian motion from a symmetric interval
//     (alternating-series density with retrospective acceptance),
//   - skeleton values conditioned on the exit data (time reversal to a
//     BES3 bridge plus corridor acceptance coins),
//   - joint (maximum, argmax) of corridor-conditioned bridge pieces,
//   - Brownian bridge points and the p-series Bernoulli of the corridor
//     acceptance ratio.
//
// All samplers draw from an explicitly passed RandomStream and keep no
// hidden state.

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "random.hpp"
#include "series.hpp"

namespace nsrbm {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / 1.4142135623730950488); }

// --------------------------------------------------------------------------
// Inverse Gaussian IG(mean, shape) by the transform-with-root-selection
// method (Michael, Schucany, Haas).
// --------------------------------------------------------------------------
inline double sample_inverse_gaussian(double mean, double shape, RandomStream& rng) {
    if (!(mean > 0.0) || !(shape > 0.0) || !std::isfinite(mean) || !std::isfinite(shape))
        throw std::invalid_argument("sample_inverse_gaussian: mean and shape must be finite and positive");
    double nu = rng.normal();
    double ysq = nu * nu;
    double x = mean + mean * mean * ysq / (2.0 * shape) -
               (mean / (2.0 * shape)) * std::sqrt(4.0 * mean * shape * ysq + mean * mean * ysq * ysq);
    if (x <= 0.0) x = std::numeric_limits<double>::min();  // cancellation at extreme ysq
    if (rng.uniform() <= mean / (mean + x)) return x;
    return mean * mean / x;
}

inline double inverse_gaussian_cdf(double x, double mean, double shape) {
    if (x <= 0.0) return 0.0;
    double r = std::sqrt(shape / x);
    return normal_cdf(r * (x / mean - 1.0)) +
           std::exp(2.0 * shape / mean) * normal_cdf(-r * (x / mean + 1.0));
}

// Standard normal conditioned on |N| >= s (returns the positive value).
inline double sample_normal_tail(double s, RandomStream& rng) {
    for (;;) {
        double x = std::sqrt(s * s - 2.0 * std::log(rng.uniform()));
        if (rng.uniform() * x <= s) return x;
    }
}

// --------------------------------------------------------------------------
// First exit time of standard BM from (-a, a), with the exit side.
//
// Unit-interval exit time tau_1 has the two alternating expansions in
// series::exit_density_bracket. The proposal is the exact first term of
// whichever expansion rules the regime: below the switch a 1/chi^2-shaped
// kernel (sampled via a truncated normal), above it a shifted exponential.
// Retrospective acceptance then compares against the bracketed density.
// Scaling: tau_a = a^2 tau_1, and the side is symmetric.
// --------------------------------------------------------------------------
struct ExitSample {
    double tau;
    int endpoint_sign;  // +1 or -1
};

inline ExitSample sample_exit_time(double a, RandomStream& rng) {
    if (!(a > 0.0) || !std::isfinite(a)) throw std::invalid_argument("sample_exit_time: radius must be positive");
    constexpr double t0 = series::kExitSeriesSwitch;
    const double c0 = 1.0 / std::sqrt(t0);
    const double pi = series::kPi;
    static const double w_small = 4.0 * (1.0 - normal_cdf(c0));
    static const double w_large = (4.0 / pi) * std::exp(-pi * pi * t0 / 8.0);
    double t = 0.0;
    for (;;) {
        double env;
        if (rng.uniform() * (w_small + w_large) < w_small) {
            double n = sample_normal_tail(c0, rng);
            t = 1.0 / (n * n);
            env = 2.0 / std::sqrt(2.0 * pi * t * t * t) * std::exp(-1.0 / (2.0 * t));
        } else {
            t = t0 + rng.exponential(pi * pi / 8.0);
            env = (pi / 2.0) * std::exp(-pi * pi * t / 8.0);
        }
        double target = rng.uniform() * env;
        bool accept = false, decided = false;
        for (int n = 2; n <= 64 && !decided; n += 2) {
            series::Bracket b = series::exit_density_bracket(t, n);
            if (target < b.lo) { accept = true; decided = true; }
            else if (target > b.hi) { decided = true; }
        }
        if (accept) break;
        // undecided after 64 terms can only mean target == f(t) to machine
        // precision; resample rather than bias the draw.
    }
    int sign = rng.uniform() < 0.5 ? 1 : -1;
    return {a * a * t, sign};
}

// --------------------------------------------------------------------------
// p-series of the corridor acceptance ratio (corridor (0,2)):
//   p(s,x;t,y) = P( BB stays in (0,2) | BB stays positive ),
// with the limiting ratio when an endpoint sits at 0.
// --------------------------------------------------------------------------
struct SeriesBounds {
    double lower;
    double upper;
    int terms_used;
};

inline SeriesBounds eval_p_series(double s, double x, double t, double y, int term_pairs = 0) {
    if (!(t > s)) throw std::invalid_argument("eval_p_series: need s < t");
    if (x < 0.0 || x > 2.0 || y < 0.0 || y > 2.0)
        throw std::invalid_argument("eval_p_series: endpoints must lie in [0,2]");
    double T = t - s;
    series::Bracket b{0.0, 1.0, 0};
    int limit = term_pairs > 0 ? term_pairs : 64;
    for (int n = 1; n <= limit; ++n) {
        b = series::intersect(b, series::corridor_given_positive_bracket(x, y, T, 2.0, n));
        if (term_pairs == 0 && b.hi - b.lo < 1e-14) break;
    }
    return {b.lo, b.hi, b.terms};
}

inline bool bernoulli_p_series(double s, double x, double t, double y, double u) {
    if (!(t > s)) throw std::invalid_argument("bernoulli_p_series: need s < t");
    if (x < 0.0 || x > 2.0 || y < 0.0 || y > 2.0)
        throw std::invalid_argument("bernoulli_p_series: endpoints must lie in [0,2]");
    double T = t - s;
    return series::decide_below(u, [&](int n) { return series::corridor_given_positive_bracket(x, y, T, 2.0, n); });
}

// Corridor coins for general widths, used by the piece-maximum samplers.
inline bool bernoulli_corridor_given_positive(double x, double y, double T, double c, RandomStream& rng) {
    if (x >= c || y >= c) return false;
    if (T <= 0.0) return true;
    double u = rng.uniform();
    return series::decide_below(u, [&](int n) { return series::corridor_given_positive_bracket(x, y, T, c, n); });
}

// P( BES3 bridge 0 -> y over T stays below c ) as a coin.
inline bool bernoulli_bes3_below(double y, double T, double c, RandomStream& rng) {
    if (y >= c) return false;
    if (T <= 0.0) return true;
    double u = rng.uniform();
    return series::decide_below(u, [&](int n) { return series::bes3_below_bracket(y, T, c, n); });
}

// --------------------------------------------------------------------------
// Brownian bridge machinery.
// --------------------------------------------------------------------------
inline double sample_bridge_point(double t_query, double t_left, double v_left, double t_right, double v_right,
                                  RandomStream& rng) {
    if (!(t_left < t_query && t_query < t_right))
        throw std::invalid_argument("sample_bridge_point: need t_left < t_query < t_right");
    double d1 = t_query - t_left, d2 = t_right - t_query, span = t_right - t_left;
    double mean = v_left + (v_right - v_left) * d1 / span;
    double var = d1 * d2 / span;
    return mean + std::sqrt(var) * rng.normal();
}

namespace detail {

// Standard Brownian bridge 0->0 on [0, t1] at ascending interior times.
inline std::vector<double> bridge00_points(const std::vector<double>& ts, double t1, RandomStream& rng) {
    std::vector<double> out;
    out.reserve(ts.size());
    double s = 0.0, v = 0.0;
    for (double t : ts) {
        double mean = v * (t1 - t) / (t1 - s);
        double var = (t - s) * (t1 - t) / (t1 - s);
        v = mean + std::sqrt(std::max(0.0, var)) * rng.normal();
        out.push_back(v);
        s = t;
    }
    return out;
}

}  // namespace detail

// BES3 bridge from (0,0) to (t1, y), sampled jointly at ascending interior
// times via three independent coordinate bridges (the endpoint rides in the
// first coordinate).
inline std::vector<double> sample_bes3_bridge_points(const std::vector<double>& times, double t1, double y,
                                                     RandomStream& rng) {
    std::vector<double> b1 = detail::bridge00_points(times, t1, rng);
    std::vector<double> b2 = detail::bridge00_points(times, t1, rng);
    std::vector<double> b3 = detail::bridge00_points(times, t1, rng);
    std::vector<double> out(times.size());
    for (std::size_t i = 0; i < times.size(); ++i) {
        double m = y * times[i] / t1;
        out[i] = std::sqrt((m + b1[i]) * (m + b1[i]) + b2[i] * b2[i] + b3[i] * b3[i]);
    }
    return out;
}

// One point of a BES3 bridge (0,0) -> (t1, y).
inline double sample_bes3_bridge_point(double t_query, double t1, double y, RandomStream& rng) {
    double mean = y * t_query / t1;
    double var = t_query * (t1 - t_query) / t1;
    double sd = std::sqrt(std::max(0.0, var));
    double a1 = mean + sd * rng.normal(), a2 = sd * rng.normal(), a3 = sd * rng.normal();
    return std::sqrt(a1 * a1 + a2 * a2 + a3 * a3);
}

namespace detail {

// One value of a Brownian bridge conditioned to stay positive between two
// strictly positive anchors: propose the plain bridge point, accept with the
// product of killed-transition factors.
inline double positive_bridge_point(double tL, double vL, double tR, double vR, double t, RandomStream& rng) {
    double d1 = t - tL, d2 = tR - t, span = tR - tL;
    double mean = vL + (vR - vL) * d1 / span;
    double sd = std::sqrt(d1 * d2 / span);
    for (;;) {
        double z = mean + sd * rng.normal();
        if (z <= 0.0) continue;
        double acc = -std::expm1(-2.0 * vL * z / d1);
        acc *= -std::expm1(-2.0 * z * vR / d2);
        if (rng.uniform() < acc) return z;
    }
}

inline void meander_bridge_fill(const std::vector<double>& times, std::vector<double>& vals, std::size_t lo,
                                std::size_t hi, double tL, double vL, double tR, double vR, RandomStream& rng) {
    if (lo >= hi) return;
    std::size_t mid = lo + (hi - lo) / 2;
    double z = positive_bridge_point(tL, vL, tR, vR, times[mid], rng);
    vals[mid] = z;
    meander_bridge_fill(times, vals, lo, mid, tL, vL, times[mid], z, rng);
    meander_bridge_fill(times, vals, mid + 1, hi, times[mid], z, tR, vR, rng);
}

}  // namespace detail

// Brownian bridge (t0,v0) -> (t1,v1), v0,v1 > 0, conditioned to stay
// positive, sampled at ascending interior times.
inline std::vector<double> sample_meander_bridge_points(const std::vector<double>& times, double t0, double v0,
                                                        double t1, double v1, RandomStream& rng) {
    if (!(v0 > 0.0) || !(v1 > 0.0))
        throw std::invalid_argument("sample_meander_bridge_points: anchors must be positive");
    std::vector<double> vals(times.size());
    detail::meander_bridge_fill(times, vals, 0, times.size(), t0, v0, t1, v1, rng);
    return vals;
}

// --------------------------------------------------------------------------
// Skeleton values of standard BM at times kappas, conditioned on the first
// exit of (-a, a) happening at tau on side exit_sign.
//
// Reverse time from the exit and scale by 1/a: the path becomes a BES3
// bridge from 0 to 1 on [0, tau/a^2] conditioned to stay below 2. Proposals
// come from the BES3 bridge; the below-2 constraint is imposed by a product
// of corridor coins over adjacent pairs.
// --------------------------------------------------------------------------
inline std::vector<double> sample_skeleton_given_exit(double tau, const std::vector<double>& kappas, double a,
                                                      int exit_sign, RandomStream& rng) {
    const std::size_t b = kappas.size();
    if (b == 0) return {};
    for (std::size_t i = 0; i + 1 < b; ++i)
        if (!(kappas[i] < kappas[i + 1]))
            throw std::invalid_argument("sample_skeleton_given_exit: kappas must be strictly ascending");
    if (!(kappas.front() > 0.0) || !(kappas.back() < tau))
        throw std::invalid_argument("sample_skeleton_given_exit: kappas must lie in (0, tau)");
    const double t_top = tau / (a * a);
    std::vector<double> rts(b);
    for (std::size_t i = 0; i < b; ++i) rts[i] = (tau - kappas[b - 1 - i]) / (a * a);
    for (;;) {
        std::vector<double> V = sample_bes3_bridge_points(rts, t_top, 1.0, rng);
        bool ok = true;
        for (double v : V)
            if (v >= 2.0) { ok = false; break; }
        if (ok) {
            double tp = 0.0, vp = 0.0;  // anchor at the exit
            for (std::size_t i = 0; i < b && ok; ++i) {
                ok = series::decide_below(rng.uniform(), [&](int n) {
                    return series::corridor_given_positive_bracket(vp, V[i], rts[i] - tp, 2.0, n);
                });
                tp = rts[i];
                vp = V[i];
            }
            if (ok)
                ok = series::decide_below(rng.uniform(), [&](int n) {
                    return series::corridor_given_positive_bracket(vp, 1.0, t_top - tp, 2.0, n);
                });
        }
        if (!ok) continue;
        std::vector<double> w(b);
        for (std::size_t i = 0; i < b; ++i) w[i] = exit_sign * a * (1.0 - V[b - 1 - i]);
        return w;
    }
}

// --------------------------------------------------------------------------
// Joint (maximum, argmax) of bridge pieces.
// --------------------------------------------------------------------------
struct MaxSample {
    double max;
    double argmax;
};

inline double first_passage_density(double t, double h) {
    if (!(t > 0.0)) return 0.0;
    return h / std::sqrt(2.0 * series::kPi * t * t * t) * std::exp(-h * h / (2.0 * t));
}

inline double first_passage_density_sup(double h) {
    return std::sqrt(27.0 / (2.0 * series::kPi)) * std::exp(-1.5) / (h * h);
}

// (max, argmax) of a Brownian bridge alpha -> beta over [0, T], conditioned
// to stay above floor_v and, when cap is finite, to have its maximum below
// cap. floor_v may be -inf (no floor), cap may be +inf.
//
// Proposal: exact unconstrained-bridge maximum via inverse CDF (truncated at
// cap) and the classical inverse-Gaussian mixture for the argmax given the
// maximum. The floor enters as two BES3-below coins, one per side of the
// argmax (the two sides are time-reversed first-passage paths).
inline MaxSample bridge_max_in_corridor(double T, double alpha, double beta, double floor_v, double cap,
                                        RandomStream& rng) {
    if (!(T > 0.0)) throw std::invalid_argument("bridge_max_in_corridor: need T > 0");
    double mx = std::max(alpha, beta);
    if (std::isfinite(floor_v) && !(std::min(alpha, beta) > floor_v))
        throw std::invalid_argument("bridge_max_in_corridor: endpoints must exceed the floor");
    if (std::isfinite(cap) && !(mx < cap))
        throw std::invalid_argument("bridge_max_in_corridor: endpoints must lie below the cap");
    double g_cap = std::isfinite(cap) ? std::exp(-2.0 * (cap - alpha) * (cap - beta) / T) : 0.0;
    for (;;) {
        double g_target = 1.0 - rng.uniform() * (1.0 - g_cap);
        double L = -std::log(g_target);
        double diff = alpha - beta;
        double m = 0.5 * ((alpha + beta) + std::sqrt(diff * diff + 2.0 * T * L));
        double h1 = m - alpha, h2 = m - beta;
        double rho;
        const double tiny = 1e-14 * (std::abs(m) + std::sqrt(T));
        if (h1 < tiny) rho = 0.0;
        else if (h2 < tiny) rho = T;
        else if (rng.uniform() < h1 / (h1 + h2)) {
            double x = sample_inverse_gaussian(h2 / h1, h2 * h2 / T, rng);
            rho = T / (1.0 + x);
        } else {
            double x = 1.0 / sample_inverse_gaussian(h1 / h2, h1 * h1 / T, rng);
            rho = T / (1.0 + x);
        }
        if (!std::isfinite(floor_v)) return {m, rho};
        double cw = m - floor_v;
        if (rho > 0.0 && !bernoulli_bes3_below(h1, rho, cw, rng)) continue;
        if (rho < T && !bernoulli_bes3_below(h2, T - rho, cw, rng)) continue;
        return {m, rho};
    }
}

// Spec-facing wrapper: (max, argmax) of the segment between two skeleton
// points conditioned to stay above a floor.
inline MaxSample sample_meander_max(double t_left, double v_left, double t_right, double v_right, double floor_v,
                                    RandomStream& rng) {
    if (std::isfinite(floor_v) && (!(v_left > floor_v) || !(v_right > floor_v)))
        throw std::invalid_argument("sample_meander_max: endpoint at or below the floor");
    if (t_right == t_left) return {v_left, t_left};
    if (t_right < t_left) throw std::invalid_argument("sample_meander_max: times out of order");
    MaxSample s = bridge_max_in_corridor(t_right - t_left, v_left, v_right, floor_v, kInf, rng);
    return {s.max, t_left + s.argmax};
}

namespace detail {

// Compare K(m) against target = U * K(cap) by refining both brackets.
// Returns +1 if K(m) > target, -1 otherwise (midpoint rule on stall).
inline int compare_bes3_cdf(double m, double y, double T, double cap, double U) {
    series::Bracket bm{0.0, 1.0, 0}, bc{0.0, 1.0, 0};
    bool has_cap = std::isfinite(cap);
    for (int n = 2; n <= 4096; n += (n < 16 ? 2 : n / 2)) {
        bm = series::intersect(bm, series::bes3_below_bracket(y, T, m, n));
        if (has_cap) bc = series::intersect(bc, series::bes3_below_bracket(y, T, cap, n));
        double tlo = U * bc.lo, thi = U * bc.hi;
        if (bm.lo > thi) return 1;
        if (bm.hi < tlo) return -1;
        if (bm.hi - bm.lo < 1e-15 && (!has_cap || bc.hi - bc.lo < 1e-15)) break;
    }
    series::stats().bernoulli_fallbacks.fetch_add(1, std::memory_order_relaxed);
    return 0.5 * (bm.lo + bm.hi) > U * 0.5 * (bc.lo + bc.hi) ? 1 : -1;
}

}  // namespace detail

// (max, argmax) of a BES3 bridge 0 -> y over [0, u], conditioned on the
// maximum staying below cap (cap may be +inf). This is the reversed view of
// the piece adjacent to a corridor exit.
//
// Maximum: bisection inversion of the bracketed CDF K(m) = P(max <= m).
// Argmax given the maximum: the two sides of the argmax are a BES3
// first-passage path to m (density bracketed) and a time-reversed
// first-passage path from y to m with a corridor correction; rejection from
// a uniform proposal under the product envelope.
inline MaxSample bes3_bridge_max_below(double u, double y, double cap, RandomStream& rng) {
    if (!(u > 0.0) || !(y > 0.0)) throw std::invalid_argument("bes3_bridge_max_below: need u > 0, y > 0");
    if (std::isfinite(cap) && !(y < cap)) throw std::invalid_argument("bes3_bridge_max_below: endpoint above cap");
    double U = rng.uniform();
    // grow an upper bracket when cap is infinite
    double hi = std::isfinite(cap) ? cap : y + 2.0 * std::sqrt(u);
    if (!std::isfinite(cap)) {
        while (detail::compare_bes3_cdf(hi, y, u, kInf, U) < 0) hi = y + 2.0 * (hi - y);
    }
    double lo = y;
    for (int it = 0; it < 200 && hi - lo > 1e-13 * (1.0 + hi); ++it) {
        double mid = 0.5 * (lo + hi);
        if (detail::compare_bes3_cdf(mid, y, u, cap, U) >= 0) hi = mid;
        else lo = mid;
    }
    double m = 0.5 * (lo + hi);
    double h2 = m - y;
    const double tiny = 1e-12 * (m + std::sqrt(u));
    if (h2 < tiny) return {m, u};
    // The reversed side of the argmax is a first-passage time to h2, exactly
    // samplable as h2^2/N^2; the forward side reweights by its bracketed
    // density against the global bound.
    double env = series::bes3_fp_density_sup(m);
    for (;;) {
        double sigma;
        do {
            double nn = rng.normal();
            sigma = h2 * h2 / (nn * nn);
        } while (!(sigma < u));
        double rho = u - sigma;
        double target = rng.uniform() * env;
        bool accept = false, decided = false;
        for (int n = 2; n <= 4096 && !decided; n += (n < 16 ? 2 : n / 2)) {
            series::Bracket g = series::bes3_fp_density_bracket(rho, m, n);
            if (target < g.lo) { accept = true; decided = true; }
            else if (target > g.hi) decided = true;
        }
        if (!accept) continue;
        // corridor correction on the reversed second side
        if (!bernoulli_bes3_below(h2, sigma, m, rng)) continue;
        return {m, rho};
    }
}

}  // namespace nsrbm
