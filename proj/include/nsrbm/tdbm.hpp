#pragma once

// Exact sampling of unit-volatility Brownian motion with time-dependent
// drift: the running maximum, its location and the endpoint over
// [0, horizon ∧ first exit of (lower, upper)].
//
// The path is built in localized segments of length tau_a ∧ Delta. Each
// segment is proposed under the driftless measure (exit time, Poisson
// thinning marks, skeleton values conditioned on the exit) and accepted
// with the three-part test that realizes the Girsanov likelihood ratio:
// thinning marks against the drift-slope intensity, one coin for the
// terminal drift term and one for the squared-drift integral. Segment
// maxima come from the corridor-conditioned piece samplers.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "distributions.hpp"
#include "model.hpp"
#include "random.hpp"

namespace nsrbm {

struct SegmentProposal {
    double tau;           // segment length: exit time ∧ window
    double delta_window;  // window length Delta for this segment
    double a;             // localization radius
    bool exited;          // corridor exit before the window end
    int exit_sign;        // ±1 when exited
    std::vector<double> kappas;    // thinning mark times in (0, tau)
    std::vector<double> w_values;  // proposal values at the marks
    double w_end;                  // proposal value at tau (±a on exit)
    LocalBounds bounds;            // valid on [s, s + delta_window]
};

// Largest segment window satisfying theta^2/Delta - theta(mt + Delta m/2)
// >= 2 log 2, capped at the runtime-optimal 1/(m theta).
inline double choose_delta(double theta, const LocalBounds& b) {
    if (!(theta > 0.0)) throw std::invalid_argument("choose_delta: theta must be positive");
    const double two_log2 = 2.0 * 0.6931471805599453;
    double dmax;
    if (b.m <= 0.0) {
        dmax = theta * theta / (two_log2 + theta * b.m_tilde);
    } else {
        // (theta m / 2) D^2 + (theta mt + 2 log 2) D - theta^2 <= 0
        double A = theta * b.m / 2.0, B = theta * b.m_tilde + two_log2, C = -theta * theta;
        dmax = (-B + std::sqrt(B * B - 4.0 * A * C)) / (2.0 * A);
        dmax = std::min(dmax, 1.0 / (b.m * theta));
    }
    if (!(dmax > 1e-12))
        throw std::invalid_argument("choose_delta: no feasible segment length; reduce theta");
    return dmax;
}

struct TdbmParams {
    double theta = 0.0;  // <= 0: pick by minimizing the runtime surrogate
    double delta = 0.0;  // <= 0: largest feasible for the chosen theta
};

struct ResolvedPolicy {
    double theta;
    double delta;
    LocalBounds global_bounds;
};

namespace detail {

inline double policy_cost(double theta, double delta, const LocalBounds& b) {
    return std::max(b.m * theta, 1.0) * std::exp(b.m * theta * delta + b.m_tilde * theta) *
           (1.0 + delta) / delta;
}

}  // namespace detail

// Resolve (theta, Delta) against bounds valid over the whole run: one period
// for periodic drifts, the run window otherwise.
inline ResolvedPolicy resolve_policy(const NormalizedModel& model, double s0, double horizon,
                                     const TdbmParams& params) {
    double wlen;
    if (model.gamma_period) {
        s0 = 0.0;
        wlen = *model.gamma_period;
    } else if (std::isfinite(horizon)) {
        wlen = std::max(horizon - s0, 1e-6);
    } else {
        wlen = 64.0;  // planning window for non-periodic drifts
    }
    LocalBounds gb = local_bounds(model, s0, wlen);
    double theta = params.theta;
    if (!(theta > 0.0)) {
        double best = kInf;
        for (int i = 0; i <= 60; ++i) {
            double th = 0.05 * std::pow(100.0, i / 60.0);  // 0.05 .. 5
            double dl;
            try {
                dl = choose_delta(th, gb);
            } catch (const std::invalid_argument&) {
                continue;
            }
            double c = detail::policy_cost(th, dl, gb);
            if (c < best) {
                best = c;
                theta = th;
            }
        }
        if (!(theta > 0.0)) throw std::runtime_error("resolve_policy: no feasible theta");
    }
    double dmax = choose_delta(theta, gb);
    double delta = params.delta > 0.0 ? std::min(params.delta, dmax) : dmax;
    return {theta, delta, gb};
}

// Draw one candidate segment under the driftless reference measure.
inline SegmentProposal propose_segment(double a, double delta_window, const LocalBounds& bounds,
                                       RandomStream& rng) {
    SegmentProposal p;
    p.a = a;
    p.delta_window = delta_window;
    p.bounds = bounds;
    ExitSample e = sample_exit_time(a, rng);
    p.exited = e.tau <= delta_window;
    p.exit_sign = e.endpoint_sign;
    p.tau = p.exited ? e.tau : delta_window;
    double rate = 2.0 * bounds.m * a;
    double t = 0.0;
    if (rate > 0.0) {
        for (;;) {
            t += rng.exponential(rate);
            if (t >= p.tau) break;
            p.kappas.push_back(t);
        }
    }
    if (p.exited) {
        p.w_values = sample_skeleton_given_exit(e.tau, p.kappas, a, e.endpoint_sign, rng);
        p.w_end = e.endpoint_sign * a;
    } else {
        std::vector<double> q = p.kappas;
        q.push_back(delta_window);
        std::vector<double> vals = sample_skeleton_given_exit(e.tau, q, a, e.endpoint_sign, rng);
        p.w_end = vals.back();
        vals.pop_back();
        p.w_values = std::move(vals);
    }
    return p;
}

// Radon-Nikodym exponent of the drifted law against the driftless proposal:
// gamma(s+tau) W_tau - 1/2 int gamma^2 - int gamma'(s+u) W_u du, with the
// path integral evaluated on the linear interpolation of the skeleton.
// Used for validation only; the sampler itself realizes the ratio by
// thinning and never computes this number.
inline double likelihood_exponent(const SegmentProposal& p, const NormalizedModel& model, double s) {
    double out = model.gamma(s + p.tau) * p.w_end;
    out -= 0.5 * model.gamma_integral_square(s, s + p.tau);
    double tp = 0.0, wp = 0.0;
    auto piece = [&](double t0, double w0, double t1, double w1) {
        if (t1 <= t0) return 0.0;
        auto f = [&](double u) {
            double w = w0 + (w1 - w0) * (u - t0) / (t1 - t0);
            return model.gamma.derivative(s + u) * w;
        };
        return detail::integrate(f, t0, t1, 1e-11);
    };
    double path_int = 0.0;
    for (std::size_t i = 0; i < p.kappas.size(); ++i) {
        path_int += piece(tp, wp, p.kappas[i], p.w_values[i]);
        tp = p.kappas[i];
        wp = p.w_values[i];
    }
    path_int += piece(tp, wp, p.tau, p.w_end);
    return out - path_int;
}

// Three-part acceptance test of the candidate segment.
inline bool accept_segment(const SegmentProposal& p, const NormalizedModel& model, double s,
                           RandomStream& rng) {
    const double m = p.bounds.m, mt = p.bounds.m_tilde, a = p.a;
    const double slack = 1e-9 * (1.0 + m * a);
    for (std::size_t i = 0; i < p.kappas.size(); ++i) {
        double phi = model.gamma.derivative(s + p.kappas[i]) * p.w_values[i] + m * a;
        if (phi < -slack || phi > 2.0 * m * a + slack)
            throw std::logic_error("accept_segment: local bounds violated by the intensity");
        if (!(2.0 * m * a * rng.uniform() > phi)) return false;
    }
    double e1 = model.gamma(s + p.tau) * p.w_end - mt * a;
    if (e1 > 1e-9 * (1.0 + mt * a))
        throw std::logic_error("accept_segment: local bounds violated by the terminal factor");
    if (!(rng.uniform() < std::exp(std::min(0.0, e1)))) return false;
    double e2 = -0.5 * model.gamma_integral_square(s, s + p.tau) + m * a * (p.tau - p.delta_window);
    if (!(rng.uniform() < std::exp(e2))) return false;
    return true;
}

// (max, argmax) of the accepted segment in segment-relative coordinates,
// assembled from the corridor-conditioned pieces between skeleton points.
inline MaxSample segment_running_max(const SegmentProposal& p, RandomStream& rng) {
    if (p.exited && p.exit_sign > 0) return {p.a, p.tau};
    double seg_max = -kInf, seg_argmax = 0.0;
    double tp = 0.0, wp = 0.0;
    std::size_t pieces = p.kappas.size() + 1;
    for (std::size_t i = 0; i < pieces; ++i) {
        bool last = (i + 1 == pieces);
        double t1 = last ? p.tau : p.kappas[i];
        double w1 = last ? p.w_end : p.w_values[i];
        double dt = t1 - tp;
        MaxSample ms;
        if (dt <= 1e-15) {
            ms = {std::max(wp, w1), tp};
        } else if (last && p.exited) {
            // piece ending at the lower corridor edge: reversed view is a
            // BES3 bridge 0 -> wp + a capped at 2a
            MaxSample q = bes3_bridge_max_below(dt, wp + p.a, 2.0 * p.a, rng);
            ms = {q.max - p.a, tp + (dt - q.argmax)};
        } else {
            MaxSample q = bridge_max_in_corridor(dt, wp, w1, -p.a, p.a, rng);
            ms = {q.max, tp + q.argmax};
        }
        if (ms.max > seg_max) {
            seg_max = ms.max;
            seg_argmax = ms.argmax;
        }
        tp = t1;
        wp = w1;
    }
    return {seg_max, seg_argmax};
}

enum class StopReason { horizon, hit_lower, hit_upper };

struct PathPoint {
    double t;
    double z;
};

struct TdbmDiag {
    std::uint64_t proposals = 0;
    std::uint64_t segments = 0;
    std::uint64_t skeleton_points = 0;
};

struct TdbmSample {
    double t_max;
    double max;
    double end_time;
    double end_value;
    StopReason stop_reason;
    std::vector<PathPoint> skeleton;
    TdbmDiag diag;
};

// Exact draw of (argmax, max, endpoint) of the drifted motion started at
// (s0, z0), run until the horizon or the first exit of (lower, upper).
// Either barrier may be infinite; an infinite horizon requires a finite
// lower barrier and a fitted envelope, otherwise the run may never stop.
inline TdbmSample sample_tdbm(const NormalizedModel& model, double s0, double z0, double horizon,
                              double lower, double upper, const TdbmParams& params, RandomStream& rng,
                              bool record_skeleton = true) {
    if (!(lower < z0 && z0 < upper)) throw std::invalid_argument("sample_tdbm: start must lie inside the barriers");
    if (std::isinf(horizon)) {
        if (!std::isfinite(lower)) throw std::invalid_argument("sample_tdbm: infinite horizon needs a lower barrier");
        if (!model.envelope) throw std::invalid_argument("sample_tdbm: infinite horizon needs a fitted envelope");
    }
    ResolvedPolicy pol = resolve_policy(model, s0, horizon, params);

    TdbmSample out;
    out.diag = {};
    double s = s0, z = z0;
    double zeta = z0, t_zeta = s0;
    if (record_skeleton) out.skeleton.push_back({s0, z0});

    for (;;) {
        double rem = horizon - s;  // inf when horizon is inf
        double a = pol.theta;
        if (std::isfinite(lower)) a = std::min(a, z - lower);
        if (std::isfinite(upper)) a = std::min(a, upper - z);
        bool lower_limits = std::isfinite(lower) && a == z - lower;
        bool upper_limits = std::isfinite(upper) && a == upper - z;
        double delta_eff = std::min(pol.delta, rem);
        LocalBounds wb = local_bounds(model, s, delta_eff);

        SegmentProposal p;
        for (;;) {
            ++out.diag.proposals;
            p = propose_segment(a, delta_eff, wb, rng);
            if (accept_segment(p, model, s, rng)) break;
        }
        ++out.diag.segments;
        out.diag.skeleton_points += p.kappas.size() + 1;

        // segment maximum and its location
        MaxSample seg = segment_running_max(p, rng);
        if (z + seg.max > zeta) {
            zeta = z + seg.max;
            t_zeta = s + seg.argmax;
        }

        if (record_skeleton) {
            for (std::size_t i = 0; i < p.kappas.size(); ++i)
                out.skeleton.push_back({s + p.kappas[i], z + p.w_values[i]});
        }

        double z_new = z + p.w_end;
        bool stop_lower = p.exited && p.exit_sign < 0 && lower_limits;
        bool stop_upper = p.exited && p.exit_sign > 0 && upper_limits;
        if (stop_lower) z_new = lower;
        if (stop_upper) z_new = upper;
        s += p.tau;
        z = z_new;
        if (record_skeleton) out.skeleton.push_back({s, z});

        if (stop_lower || stop_upper) {
            out.stop_reason = stop_lower ? StopReason::hit_lower : StopReason::hit_upper;
            break;
        }
        if (!p.exited && delta_eff == rem) {
            out.stop_reason = StopReason::horizon;
            break;
        }
    }
    out.t_max = t_zeta;
    out.max = zeta;
    out.end_time = s;
    out.end_value = z;
    return out;
}

}  // namespace nsrbm
