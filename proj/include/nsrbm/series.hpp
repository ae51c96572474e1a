#pragma once

// Bracketed evaluation of the theta-type series behind the exact samplers.
//
// Every quantity here is a probability (or density) given by a series with
// two classical expansions: an image/reflection form that converges fast for
// short durations and an eigenfunction (sine) form that converges fast for
// long durations. Each evaluator returns a rigorous bracket [lo, hi]:
// a partial sum plus an explicit tail majorant. Brackets shrink as the term
// count grows, which is what retrospective Bernoulli sampling needs.
//
// Conventions: durations are in unit-volatility Brownian time. "Corridor"
// probabilities refer to a Brownian bridge staying inside (0, c).

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>

namespace nsrbm {

namespace series {

inline constexpr double kPi = 3.141592653589793238462643383279502884;

struct Bracket {
    double lo;
    double hi;
    int terms;
};

inline Bracket intersect(const Bracket& a, const Bracket& b) {
    return {std::max(a.lo, b.lo), std::min(a.hi, b.hi), std::max(a.terms, b.terms)};
}

// Diagnostics for the capped refinement fallback (see bernoulli samplers).
struct SeriesStats {
    std::atomic<std::uint64_t> bernoulli_fallbacks{0};
};

inline SeriesStats& stats() {
    static SeriesStats s;
    return s;
}

namespace detail {

// sum_{i>=0} rho^i, sum i rho^i, sum i^2 rho^i  (rho in [0,1))
inline double geom0(double rho) { return 1.0 / (1.0 - rho); }
inline double geom1(double rho) { return rho / ((1.0 - rho) * (1.0 - rho)); }
inline double geom2(double rho) { return rho * (1.0 + rho) / ((1.0 - rho) * (1.0 - rho) * (1.0 - rho)); }

// Threshold between image and sine expansions: balance leading exponents
// 2c^2/T (images) against pi^2 T/(2 c^2) (sine) => T* = 2 c^2 / pi.
inline bool use_images(double T, double c) { return T <= (2.0 / kPi) * c * c; }

}  // namespace detail

// ---------------------------------------------------------------------------
// P( Brownian bridge x -> y over duration T stays inside (0, c) ),
// x, y in [0, c]. Both endpoints strictly inside for this form.
// Images:  N = sum_{j in Z} [ e^{-2jc(jc+y-x)/T} - e^{-2(jc+x)(jc+y)/T} ]
// Sine:    N = sqrt(2 pi T) e^{(y-x)^2/(2T)} (2/c)
//              sum_{n>=1} sin(n pi x/c) sin(n pi y/c) e^{-n^2 pi^2 T/(2 c^2)}
// ---------------------------------------------------------------------------
inline Bracket corridor_interior_bracket(double x, double y, double T, double c, int nterms) {
    if (detail::use_images(T, c)) {
        int J = std::max(1, nterms);
        double s = 0.0;
        for (int j = -J; j <= J; ++j) {
            double a = std::exp(-2.0 * j * c * (j * c + y - x) / T);
            double b = std::exp(-2.0 * (j * c + x) * (j * c + y) / T);
            s += a - b;
        }
        // |term_j| <= exp(-2 c^2 (|j|-1)^2 / T) for |j| >= 1
        double q = 2.0 * c * c / T;
        double rho = std::exp(-q * (2.0 * J + 1.0));
        double tail = 4.0 * std::exp(-q * J * J) * detail::geom0(rho);
        return {std::max(0.0, s - tail), std::min(1.0, s + tail), J};
    }
    int N = std::max(1, nterms);
    double q = kPi * kPi * T / (2.0 * c * c);
    double pref = std::sqrt(2.0 * kPi * T) * std::exp((y - x) * (y - x) / (2.0 * T)) * (2.0 / c);
    double s = 0.0;
    for (int n = 1; n <= N; ++n)
        s += std::sin(n * kPi * x / c) * std::sin(n * kPi * y / c) * std::exp(-q * n * n);
    double rho = std::exp(-q * (2.0 * N + 3.0));
    double tail = std::exp(-q * (N + 1.0) * (N + 1.0)) * detail::geom0(rho);
    return {std::max(0.0, pref * (s - tail)), std::min(1.0, pref * (s + tail)), N};
}

// ---------------------------------------------------------------------------
// P( BES3 bridge 0 -> y over duration T stays below c ), y in (0, c].
// This is the x->0 limit of the corridor probability divided by the
// stay-positive probability.
// Images: K = sum_{j in Z} ((y + 2jc)/y) e^{-2jc(jc+y)/T}
// Sine:   K = (pi T sqrt(2 pi T) / (y c^2)) e^{y^2/(2T)}
//             sum_{n>=1} n sin(n pi y/c) e^{-n^2 pi^2 T/(2 c^2)}
// ---------------------------------------------------------------------------
inline Bracket bes3_below_bracket(double y, double T, double c, int nterms) {
    if (detail::use_images(T, c)) {
        int J = std::max(1, nterms);
        double s = 0.0;
        for (int j = -J; j <= J; ++j)
            s += ((y + 2.0 * j * c) / y) * std::exp(-2.0 * j * c * (j * c + y) / T);
        // |term_{+-j}| <= (1 + 2jc/y) exp(-2 c^2 j(j-1)/T) for j >= 1
        double base = std::exp(-2.0 * c * c * (J + 1.0) * J / T);
        double rho = std::exp(-4.0 * c * c * (J + 1.0) / T);
        double A = 1.0 + 2.0 * c * (J + 1.0) / y;
        double B = 2.0 * c / y;
        double tail = 2.0 * base * (A * detail::geom0(rho) + B * detail::geom1(rho));
        return {std::max(0.0, s - tail), std::min(1.0, s + tail), J};
    }
    int N = std::max(1, nterms);
    double q = kPi * kPi * T / (2.0 * c * c);
    double pref = kPi * T * std::sqrt(2.0 * kPi * T) / (y * c * c) * std::exp(y * y / (2.0 * T));
    double s = 0.0;
    for (int n = 1; n <= N; ++n)
        s += n * std::sin(n * kPi * y / c) * std::exp(-q * n * n);
    double base = std::exp(-q * (N + 1.0) * (N + 1.0));
    double rho = std::exp(-q * (2.0 * N + 3.0));
    double tail = base * ((N + 1.0) * detail::geom0(rho) + detail::geom1(rho));
    return {std::max(0.0, pref * (s - tail)), std::min(1.0, pref * (s + tail)), N};
}

// Both endpoints at 0: P( BES3 excursion-type bridge 0 -> 0 stays below c ).
// Images: 1 + 2 sum_{j>=1} (1 - 4 j^2 c^2/T) e^{-2 j^2 c^2 / T}
// Sine:   (pi^2 T sqrt(2 pi T)/c^3) sum_{n>=1} n^2 e^{-n^2 pi^2 T/(2c^2)}
inline Bracket corridor_zero_zero_bracket(double T, double c, int nterms) {
    if (detail::use_images(T, c)) {
        int J = std::max(1, nterms);
        double s = 1.0;
        for (int j = 1; j <= J; ++j) {
            double e = 2.0 * j * j * c * c / T;
            s += 2.0 * (1.0 - 2.0 * e) * std::exp(-e);
        }
        // |term_j| <= 3 e^{-j^2 c^2/T} using |1-2e| e^{-e} <= 1.5 e^{-e/2}
        double q = c * c / T;
        double rho = std::exp(-q * (2.0 * J + 1.0));
        double tail = 3.0 * std::exp(-q * (J + 1.0) * (J + 1.0)) * detail::geom0(rho);
        return {std::max(0.0, s - tail), std::min(1.0, s + tail), J};
    }
    int N = std::max(1, nterms);
    double q = kPi * kPi * T / (2.0 * c * c);
    double pref = kPi * kPi * T * std::sqrt(2.0 * kPi * T) / (c * c * c);
    double s = 0.0;
    for (int n = 1; n <= N; ++n) s += static_cast<double>(n) * n * std::exp(-q * n * n);
    double base = std::exp(-q * (N + 1.0) * (N + 1.0));
    double rho = std::exp(-q * (2.0 * N + 3.0));
    double m = N + 1.0;
    double tail = base * (m * m * detail::geom0(rho) + 2.0 * m * detail::geom1(rho) + detail::geom2(rho));
    return {std::max(0.0, pref * (s - tail)), std::min(1.0, pref * (s + tail)), N};
}

// ---------------------------------------------------------------------------
// p = P( bridge stays in (0,c) | bridge stays positive ), with the boundary
// limits when an endpoint sits at 0. This is the acceptance ratio used by
// the skeleton samplers; the paper's corridor has c = 2.
// ---------------------------------------------------------------------------
inline Bracket corridor_given_positive_bracket(double x, double y, double T, double c, int nterms) {
    if (!(T > 0.0) || !std::isfinite(T)) throw std::invalid_argument("corridor series: need 0 < T < inf");
    if (x < 0.0 || y < 0.0 || x > c || y > c) throw std::invalid_argument("corridor series: endpoints outside [0,c]");
    if (x == 0.0 && y == 0.0) return corridor_zero_zero_bracket(T, c, nterms);
    if (x == 0.0) return bes3_below_bracket(y, T, c, nterms);
    if (y == 0.0) return bes3_below_bracket(x, T, c, nterms);
    Bracket n = corridor_interior_bracket(x, y, T, c, nterms);
    double D = -std::expm1(-2.0 * x * y / T);
    return {std::max(0.0, n.lo / D), std::min(1.0, n.hi / D), n.terms};
}

// ---------------------------------------------------------------------------
// Density of the first exit time of standard BM from (-1, 1).
// Small-time: f(t) = (2/sqrt(2 pi t^3)) sum_{k>=0} (-1)^k (2k+1) e^{-(2k+1)^2/(2t)}
// Large-time: f(t) = (pi/2) sum_{k>=0} (-1)^k (2k+1) e^{-(2k+1)^2 pi^2 t / 8}
// Both series alternate with decreasing terms in their regime (switch 0.6).
// ---------------------------------------------------------------------------
inline constexpr double kExitSeriesSwitch = 0.6;

inline Bracket exit_density_bracket(double t, int nterms) {
    int K = std::max(2, nterms);
    double lo = 0.0, hi = std::numeric_limits<double>::infinity();
    double s = 0.0;
    if (t <= kExitSeriesSwitch) {
        double pref = 2.0 / std::sqrt(2.0 * kPi * t * t * t);
        for (int k = 0; k < K; ++k) {
            double n = 2.0 * k + 1.0;
            double term = pref * n * std::exp(-n * n / (2.0 * t));
            s += (k % 2 == 0) ? term : -term;
            if (k % 2 == 0) hi = std::min(hi, s);
            else lo = std::max(lo, s);
        }
    } else {
        double pref = kPi / 2.0;
        for (int k = 0; k < K; ++k) {
            double n = 2.0 * k + 1.0;
            double term = pref * n * std::exp(-n * n * kPi * kPi * t / 8.0);
            s += (k % 2 == 0) ? term : -term;
            if (k % 2 == 0) hi = std::min(hi, s);
            else lo = std::max(lo, s);
        }
    }
    return {std::max(0.0, lo), hi, K};
}

// ---------------------------------------------------------------------------
// Density of the first passage time of a BES3 process from 0 to level m.
// Sine form (t >= 0.15 m^2):
//   g(t) = (pi^2/m^2) sum_{n>=1} (-1)^{n+1} n^2 e^{-n^2 pi^2 t/(2 m^2)}
// Image form (t < 0.15 m^2), all terms positive:
//   g(t) = 2 m sqrt(2/pi) t^{-3/2} sum_{k>=0} e^{-c_k/t} (c_k/t - 1/2),
//   c_k = (2k+1)^2 m^2 / 2
// ---------------------------------------------------------------------------
inline Bracket bes3_fp_density_bracket(double t, double m, int nterms) {
    int K = std::max(2, nterms);
    if (t >= 0.15 * m * m) {
        double q = kPi * kPi * t / (2.0 * m * m);
        double pref = kPi * kPi / (m * m);
        double s = 0.0, lo = 0.0, hi = std::numeric_limits<double>::infinity();
        for (int n = 1; n <= K; ++n) {
            double term = pref * n * n * std::exp(-q * n * n);
            s += (n % 2 == 1) ? term : -term;
            if (n % 2 == 1) hi = std::min(hi, s);
            else lo = std::max(lo, s);
        }
        return {std::max(0.0, lo), hi, K};
    }
    double pref = 2.0 * m * std::sqrt(2.0 / kPi) / (t * std::sqrt(t));
    double s = 0.0;
    for (int k = 0; k < K; ++k) {
        double ck = (2.0 * k + 1.0) * (2.0 * k + 1.0) * m * m / 2.0;
        s += std::exp(-ck / t) * (ck / t - 0.5);
    }
    // term_k <= (c_k/t) e^{-c_k/t} <= e^{-c_k/(2t)}; increments of c_k/(2t)
    // are >= 2(K+1) m^2 / t between consecutive k.
    double cK1 = (2.0 * K + 1.0) * (2.0 * K + 1.0) * m * m / 2.0;
    double rho = std::exp(-2.0 * (K + 1.0) * m * m / t);
    double tail = std::exp(-cK1 / (2.0 * t)) * detail::geom0(rho);
    return {std::max(0.0, pref * s), pref * (s + tail), K};
}

// Global bound sup_t g(t; m) <= 3.7 / m^2 (max of the two regime bounds:
// first sine term at t = 0.2 m^2 gives 3.679/m^2, the image form peaks at
// 3.662/m^2 over its regime).
inline double bes3_fp_density_sup(double m) { return 3.7 / (m * m); }

// ---------------------------------------------------------------------------
// Kolmogorov limiting distribution survival function
//   Q(lambda) = 2 sum_{k>=1} (-1)^{k-1} e^{-2 k^2 lambda^2}
// with the Jacobi-dual form for small lambda.
// ---------------------------------------------------------------------------
inline double kolmogorov_sf(double lambda) {
    if (lambda <= 0.0) return 1.0;
    if (lambda < 0.4) {
        // 1 - sqrt(2 pi)/lambda * sum_{k>=1,odd-ish} e^{-(2k-1)^2 pi^2/(8 lambda^2)}
        double s = 0.0;
        for (int k = 1; k <= 12; ++k) {
            double n = 2.0 * k - 1.0;
            s += std::exp(-n * n * kPi * kPi / (8.0 * lambda * lambda));
        }
        double cdf = std::sqrt(2.0 * kPi) / lambda * s;
        return std::min(1.0, std::max(0.0, 1.0 - cdf));
    }
    double s = 0.0;
    for (int k = 1; k <= 64; ++k) {
        double term = 2.0 * std::exp(-2.0 * static_cast<double>(k) * k * lambda * lambda);
        s += (k % 2 == 1) ? term : -term;
        if (term < 1e-18) break;
    }
    return std::min(1.0, std::max(0.0, s));
}

// Generic retrospective comparison: refine a bracket family until the
// uniform draw u falls strictly outside, then return the comparison u < p.
// Eval must return a Bracket given a term count. The cap guards the
// measure-zero event u == p; on hitting it we fall back to the bracket
// midpoint and count the event.
template <class Eval>
inline bool decide_below(double u, Eval eval, int max_terms = 10000) {
    Bracket b{0.0, 1.0, 0};
    for (int n = 2; n <= max_terms; n = n + (n < 16 ? 2 : n / 2)) {
        b = intersect(b, eval(n));
        if (u < b.lo) return true;
        if (u > b.hi) return false;
        if (b.hi - b.lo < 1e-15 && b.hi - b.lo >= 0.0 && n > 16) break;
    }
    stats().bernoulli_fallbacks.fetch_add(1, std::memory_order_relaxed);
    return u < 0.5 * (b.lo + b.hi);
}

}  // namespace series

}  // namespace nsrbm
