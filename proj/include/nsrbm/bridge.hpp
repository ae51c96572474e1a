#pragma once

// Exact sampling of the maximum and argmax of the drifted motion on [0, r]
// conditioned on its endpoint Z(r) = y.
//
// Same localization as the free sampler, with bridge proposals: each
// segment first draws its window endpoint from the (drift-adjusted)
// Gaussian bridge, decides the corridor no-exit event with the p-series
// coin, samples the exit data or the corridor-conditioned skeleton, and
// accepts with the thinning test times the extra exp(psi) coin from the
// bridge likelihood ratio. Segment maxima reuse the corridor piece
// samplers.

#include <cmath>
#include <utility>
#include <vector>

#include "tdbm.hpp"

namespace nsrbm {

// Q( tau_a >= delta | W_delta = x ) for standard BM and corridor (-a, a).
// Scaled form: duration delta/a^2, endpoint offset 1 - |x|/a.
inline series::Bracket bridge_no_exit_probability(double a, double x, double delta, int nterms = 64) {
    if (!(a > 0.0) || !(delta > 0.0)) throw std::invalid_argument("bridge_no_exit_probability: need a, delta > 0");
    double r = std::abs(x) / a;
    if (r >= 1.0) return {0.0, 0.0, 0};
    double Ts = delta / (a * a);
    double factor = -std::expm1(-2.0 * (1.0 - r) / Ts);
    series::Bracket p{0.0, 1.0, 0};
    for (int n = 1; n <= nterms; ++n) {
        p = series::intersect(p, series::corridor_given_positive_bracket(1.0, 1.0 - r, Ts, 2.0, n));
        if (p.hi - p.lo < 1e-14) break;
    }
    return {factor * p.lo, factor * p.hi, p.terms};
}

inline bool sample_bridge_no_exit(double a, double x, double delta, RandomStream& rng) {
    double r = std::abs(x) / a;
    if (r >= 1.0) return false;
    double Ts = delta / (a * a);
    double factor = -std::expm1(-2.0 * (1.0 - r) / Ts);
    if (!(rng.uniform() < factor)) return false;
    return bernoulli_p_series(0.0, 1.0, Ts, 1.0 - r, rng.uniform());
}

// (tau_a, exit side) conditioned on tau_a < delta and W_delta = x.
// Rejection from the unconditioned exit law restricted to (0, delta); the
// Gaussian transport kernel to the endpoint is bounded by its value at
// w = |x - a~|/sqrt(delta - t) = 1.
inline std::pair<double, int> sample_exit_given_endpoint(double a, double x, double delta, RandomStream& rng) {
    if (!(a > 0.0) || !(delta > 0.0)) throw std::invalid_argument("sample_exit_given_endpoint: need a, delta > 0");
    double near = std::abs(a - std::abs(x));
    if (!(near > 0.0)) throw std::invalid_argument("sample_exit_given_endpoint: endpoint on the corridor edge");
    for (std::uint64_t it = 0;; ++it) {
        if (it > 100000000ull) throw std::runtime_error("sample_exit_given_endpoint: acceptance stall");
        ExitSample e = sample_exit_time(a, rng);
        if (!(e.tau < delta)) continue;
        double atil = e.endpoint_sign * a;
        // transport kernel to the endpoint: (1/sqrt(delta-t)) exp(-(x-a~)^2/(2(delta-t))),
        // bounded by its value at w = 1 over the nearer edge
        double w = std::abs(x - atil) / std::sqrt(delta - e.tau);
        double acc = w * std::exp(0.5 * (1.0 - w * w)) * near / std::abs(x - atil);
        if (rng.uniform() < acc) return {e.tau, e.endpoint_sign};
    }
}

// Skeleton values at kappas conditioned on W_delta = x and no corridor exit
// before delta. Proposals are positive-conditioned bridge points in the
// (0,2)-scaled corridor, accepted by the pairwise corridor coins.
inline std::vector<double> sample_skeleton_given_endpoint_no_exit(const std::vector<double>& kappas, double a,
                                                                  double x, double delta, RandomStream& rng) {
    if (!(std::abs(x) < a)) throw std::invalid_argument("sample_skeleton_given_endpoint_no_exit: endpoint outside corridor");
    const std::size_t b = kappas.size();
    if (b == 0) return {};
    for (std::size_t i = 0; i + 1 < b; ++i)
        if (!(kappas[i] < kappas[i + 1]))
            throw std::invalid_argument("sample_skeleton_given_endpoint_no_exit: kappas must ascend");
    if (!(kappas.front() > 0.0) || !(kappas.back() < delta))
        throw std::invalid_argument("sample_skeleton_given_endpoint_no_exit: kappas must lie in (0, delta)");
    double Ts = delta / (a * a);
    double vx = 1.0 + x / a;
    std::vector<double> ts(b);
    for (std::size_t i = 0; i < b; ++i) ts[i] = kappas[i] / (a * a);
    for (;;) {
        std::vector<double> v = sample_meander_bridge_points(ts, 0.0, 1.0, Ts, vx, rng);
        bool ok = true;
        for (double z : v)
            if (z >= 2.0) { ok = false; break; }
        double tp = 0.0, vp = 1.0;
        for (std::size_t i = 0; i < b && ok; ++i) {
            ok = series::decide_below(rng.uniform(), [&](int n) {
                return series::corridor_given_positive_bracket(vp, v[i], ts[i] - tp, 2.0, n);
            });
            tp = ts[i];
            vp = v[i];
        }
        if (ok)
            ok = series::decide_below(rng.uniform(), [&](int n) {
                return series::corridor_given_positive_bracket(vp, vx, Ts - tp, 2.0, n);
            });
        if (!ok) continue;
        std::vector<double> w(b);
        for (std::size_t i = 0; i < b; ++i) w[i] = a * (v[i] - 1.0);
        return w;
    }
}

struct BridgeMaxSample {
    double eta;        // argmax time in [0, r]
    double max;        // maximum of the bridge
    double end_value;  // the prescribed endpoint y
    TdbmDiag diag;
};

// Exact (argmax, max) of the drifted motion on [0, r] given Z(0) = 0 and
// Z(r) = y.
inline BridgeMaxSample sample_bridge_max(const NormalizedModel& model, double r, double y,
                                         const TdbmParams& params, RandomStream& rng) {
    if (!(r > 0.0) || !std::isfinite(r)) throw std::invalid_argument("sample_bridge_max: need 0 < r < inf");
    ResolvedPolicy pol = resolve_policy(model, 0.0, r, params);
    BridgeMaxSample out;
    out.end_value = y;
    out.diag = {};
    double s = 0.0, z = 0.0;
    double zeta = std::max(0.0, y);
    double t_zeta = zeta == 0.0 ? 0.0 : r;
    const double drift_to_r = model.gamma_integral(0.0, r);
    for (;;) {
        double rem = r - s;
        double delta_eff = std::min(pol.delta, rem);
        bool final_seg = delta_eff == rem;
        double a = pol.theta;
        LocalBounds wb = local_bounds(model, s, delta_eff);

        double x_abs;
        if (final_seg) {
            x_abs = y;
        } else {
            // endpoint of this window from the drift-adjusted Gaussian bridge
            double Bs = z - model.gamma_integral(0.0, s);
            double Br = y - drift_to_r;
            double Bq = sample_bridge_point(s + delta_eff, s, Bs, r, Br, rng);
            x_abs = Bq + model.gamma_integral(0.0, s + delta_eff);
        }
        double x_rel = x_abs - z;
        double psi_bar = wb.m_tilde * (std::abs(x_rel) + a) + 0.5 * wb.m_tilde * wb.m_tilde * delta_eff;

        SegmentProposal p;
        for (;;) {
            ++out.diag.proposals;
            double psi = 0.0;
            if (sample_bridge_no_exit(a, x_rel, delta_eff, rng)) {
                p = SegmentProposal{};
                p.a = a;
                p.delta_window = delta_eff;
                p.bounds = wb;
                p.exited = false;
                p.exit_sign = 0;
                p.tau = delta_eff;
                double rate = 2.0 * wb.m * a;
                double t = 0.0;
                p.kappas.clear();
                if (rate > 0.0)
                    for (;;) {
                        t += rng.exponential(rate);
                        if (t >= delta_eff) break;
                        p.kappas.push_back(t);
                    }
                p.w_values = sample_skeleton_given_endpoint_no_exit(p.kappas, a, x_rel, delta_eff, rng);
                p.w_end = x_rel;
            } else {
                auto [tau_a, sign] = sample_exit_given_endpoint(a, x_rel, delta_eff, rng);
                p = SegmentProposal{};
                p.a = a;
                p.delta_window = delta_eff;
                p.bounds = wb;
                p.exited = true;
                p.exit_sign = sign;
                p.tau = tau_a;
                double rate = 2.0 * wb.m * a;
                double t = 0.0;
                if (rate > 0.0)
                    for (;;) {
                        t += rng.exponential(rate);
                        if (t >= tau_a) break;
                        p.kappas.push_back(t);
                    }
                p.w_values = sample_skeleton_given_exit(tau_a, p.kappas, a, sign, rng);
                p.w_end = sign * a;
                double gap = delta_eff - tau_a;
                if (gap > 1e-300) {
                    double A = x_rel - p.w_end;
                    double g = model.gamma_integral(s + tau_a, s + delta_eff);
                    psi = (A * A - (A - g) * (A - g)) / (2.0 * gap);
                }
            }
            if (!accept_segment(p, model, s, rng)) continue;
            if (!(rng.uniform() < std::exp(psi - psi_bar))) continue;
            break;
        }
        ++out.diag.segments;
        out.diag.skeleton_points += p.kappas.size() + 1;

        MaxSample seg = segment_running_max(p, rng);
        if (z + seg.max > zeta) {
            zeta = z + seg.max;
            t_zeta = s + seg.argmax;
        }
        s += p.tau;
        z += p.w_end;
        if (!p.exited && final_seg) break;
    }
    out.eta = t_zeta;
    out.max = zeta;
    return out;
}

}  // namespace nsrbm
