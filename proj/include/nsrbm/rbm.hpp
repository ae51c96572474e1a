#pragma once

// Top level: exact sampling of (argmax, maximum, endpoint) of the
// time-reversed net-input process, the mapping to the reflected state and
// its age since the last idle time, and warm-up planning.
//
// Algorithm "dominating process": run the free sampler until the path sits
// c*d below its running maximum, then test with one inverse-Gaussian draw
// whether the constant-drift dominating motion ever returns to that level.
// Algorithm "bridge": draw the localizing horizon L = 1/H first, then run
// the endpoint-conditioned bridge sampler over [0, L].

#include <cmath>
#include <optional>
#include <vector>

#include "bridge.hpp"
#include "tdbm.hpp"

namespace nsrbm {

struct TripletSample {
    double v;                      // argmax in the original clock
    double M;                      // running maximum
    std::optional<double> y_end;   // endpoint in original time (absent for t = inf)
    int iterations = 0;            // dominating-process rounds (K)
    std::uint64_t skeleton_points = 0;
    std::uint64_t segments = 0;
    std::uint64_t proposals = 0;
    bool synthetic_d = false;      // envelope intercept was degenerate and replaced
};

struct RbmState {
    double age;  // t - last idle time; +inf when the path never idled
    double x_t;  // reflected state at t
};

enum class BetaRule { standard, improved };

struct Alg2Config {
    double c = 2.0;
    double epsilon = 0.1;
    BetaRule beta_rule = BetaRule::standard;
    TdbmParams sampler;
    std::optional<double> d_override;
    std::optional<double> gamma_bar_override;
};

// One dominating-process test: with gap x to the record level, the
// constant-drift motion never returns with probability 1 - exp(-2 gbar x),
// else the return happens after an IG(x/gbar, x^2) wait.
inline double sample_alpha(double gap, double gamma_bar, RandomStream& rng) {
    if (!(gap > 0.0)) throw std::invalid_argument("sample_alpha: gap must be positive");
    if (!(gamma_bar > 0.0)) throw std::invalid_argument("sample_alpha: gamma_bar must be positive");
    if (rng.uniform() < -std::expm1(-2.0 * gamma_bar * gap)) return kInf;
    return sample_inverse_gaussian(gap / gamma_bar, gap * gap, rng);
}

namespace detail {

struct Envelope {
    double d;
    double gbar;
    bool synthetic;
};

inline Envelope resolve_envelope(const NormalizedModel& model, double c, const std::optional<double>& d_over,
                                 const std::optional<double>& g_over) {
    if (!model.envelope && !(d_over && g_over))
        throw std::invalid_argument("sampler requires a fitted envelope");
    double d = d_over ? *d_over : model.envelope->d;
    double gbar = g_over ? *g_over : model.envelope->gamma_bar;
    if (!(gbar > 0.0)) throw std::invalid_argument("envelope: gamma_bar must be positive");
    bool synthetic = false;
    if (!(d > 0.0)) {
        // Any positive intercept is valid once the true one is zero; pick the
        // scale that makes the per-round stopping probability 1 - e^{-1}.
        d = 1.0 / (2.0 * std::max(c - 1.0, 0.5) * gbar);
        synthetic = true;
    }
    return {d, gbar, synthetic};
}

// Marginal of B at sigma_star given that B stays below the line
// gbar*s + gap for all s >= 0 (the never-return branch). Acceptance from the
// unconditioned Gaussian with the two explicit barrier factors.
inline double below_line_marginal(double sigma_star, double gap, double gbar, RandomStream& rng) {
    if (sigma_star <= 0.0) return 0.0;
    double sd = std::sqrt(sigma_star);
    double lstar = gbar * sigma_star + gap;
    for (;;) {
        double w = sd * rng.normal();
        if (!(w < lstar)) continue;
        double acc = -std::expm1(-2.0 * gap * (lstar - w) / sigma_star);
        acc *= -std::expm1(-2.0 * gbar * (lstar - w));
        if (rng.uniform() < acc) return w;
    }
}

// Marginal of B at sigma_star given that the drift-adjusted motion first
// hits the level gap exactly at sigma_hit: the first-passage path is a
// time-reversed BES3 bridge, and drift drops out of the conditional law.
inline double fp_conditioned_marginal(double sigma_star, double sigma_hit, double gap, double gbar,
                                      RandomStream& rng) {
    if (sigma_star <= 0.0) return 0.0;
    double v = sample_bes3_bridge_point(sigma_hit - sigma_star, sigma_hit, gap, rng);
    return gbar * sigma_star + gap - v;
}

}  // namespace detail

// Dominating-process sampler of (v_t, M(t), Y(t)); t may be infinite.
inline TripletSample sample_triplet_alg2(const NormalizedModel& model, double t, const Alg2Config& cfg,
                                         RandomStream& rng) {
    if (!(t > 0.0)) throw std::invalid_argument("sample_triplet_alg2: need t > 0");
    if (!(cfg.c > 1.0) || !(cfg.epsilon > 0.0)) throw std::invalid_argument("sample_triplet_alg2: need c > 1, epsilon > 0");
    detail::Envelope env = detail::resolve_envelope(model, cfg.c, cfg.d_override, cfg.gamma_bar_override);
    const double t_lam = model.lambda(t);

    TripletSample out;
    out.synthetic_d = env.synthetic;
    double s = 0.0, z = 0.0;
    double mrun = 0.0, eta = 0.0;
    auto absorb = [&](const TdbmSample& run) {
        if (run.max > mrun) {
            mrun = run.max;
            eta = run.t_max;
        }
        out.skeleton_points += run.diag.skeleton_points;
        out.segments += run.diag.segments;
        out.proposals += run.diag.proposals;
        s = run.end_time;
        z = run.end_value;
    };

    for (;;) {
        ++out.iterations;
        double m_start = mrun;
        // minimum advance: no trigger level during the first epsilon
        if (s < t_lam) {
            double adv_end = std::min(s + cfg.epsilon, t_lam);
            TdbmSample run = sample_tdbm(model, s, z, adv_end, -kInf, kInf, cfg.sampler, rng, false);
            absorb(run);
            if (s >= t_lam) break;  // horizon reached inside the advance
        } else {
            break;
        }
        double trigger_base = cfg.beta_rule == BetaRule::improved ? mrun : m_start;
        double level = trigger_base - cfg.c * env.d;
        if (z > level) {
            TdbmSample run = sample_tdbm(model, s, z, t_lam, level, kInf, cfg.sampler, rng, false);
            absorb(run);
            if (run.stop_reason == StopReason::horizon) break;
        }
        // beta_k reached: z sits at (or below) the trigger level
        double gap = mrun - (z + env.d);
        if (!(gap > 0.0)) gap = std::numeric_limits<double>::min();
        double wait = sample_alpha(gap, env.gbar, rng);
        if (std::isinf(wait)) {
            if (std::isinf(t)) {
                out.v = model.lambda_inv(eta);
                out.M = mrun;
                return out;
            }
            double w = detail::below_line_marginal(t_lam - s, gap, env.gbar, rng);
            out.v = model.lambda_inv(eta);
            out.M = mrun;
            out.y_end = z + w + model.gamma_integral(s, t_lam);
            return out;
        }
        if (s + wait >= t_lam) {
            if (std::isinf(t)) continue;  // unreachable: t_lam finite here
            double w = detail::fp_conditioned_marginal(t_lam - s, wait, gap, env.gbar, rng);
            out.v = model.lambda_inv(eta);
            out.M = mrun;
            out.y_end = z + w + model.gamma_integral(s, t_lam);
            return out;
        }
        // the dominating motion returns to the record level before the
        // horizon: the path value there is pinned by the passage time
        double alpha = s + wait;
        z = mrun - env.d + env.gbar * wait + model.gamma_integral(s, alpha);
        s = alpha;
    }
    // horizon reached inside a run: endpoint available directly
    out.v = model.lambda_inv(eta);
    out.M = mrun;
    out.y_end = z;
    return out;
}

// Bridge-based sampler of the same triplet via the localizing horizon
// L = 1/H, H ~ IG(gbar/d, gbar^2).
inline TripletSample sample_triplet_alg1(const NormalizedModel& model, double t, const Alg2Config& cfg,
                                         RandomStream& rng) {
    if (!(t > 0.0)) throw std::invalid_argument("sample_triplet_alg1: need t > 0");
    detail::Envelope env = detail::resolve_envelope(model, cfg.c, cfg.d_override, cfg.gamma_bar_override);
    const double t_lam = model.lambda(t);

    TripletSample out;
    out.synthetic_d = env.synthetic;
    out.iterations = 1;
    double H = sample_inverse_gaussian(env.gbar / env.d, env.gbar * env.gbar, rng);
    double L = 1.0 / H;
    double yB = env.gbar * L - env.d;             // driving noise at L
    double zL = yB + model.gamma_integral(0.0, L);  // path value at L

    if (t_lam >= L) {
        BridgeMaxSample bm = sample_bridge_max(model, L, zL, cfg.sampler, rng);
        out.skeleton_points = bm.diag.skeleton_points;
        out.segments = bm.diag.segments;
        out.proposals = bm.diag.proposals;
        out.v = model.lambda_inv(bm.eta);
        out.M = bm.max;
        if (std::isinf(t)) return out;
        // endpoint beyond L: time inversion maps the post-L path to the
        // pre-passage path of the inverted motion, a BES3 bridge marginal
        double s_star = 1.0 / t_lam;  // < H
        double v = sample_bes3_bridge_point(H - s_star, H, env.gbar, rng);
        double w_hat = env.gbar - v;           // inverted motion at s_star
        double w = w_hat - env.d * s_star;     // undo the drift shift
        double B_t = t_lam * w;
        out.y_end = B_t + model.gamma_integral(0.0, t_lam);
        return out;
    }
    // horizon before L: endpoint first, then the bridge max over [0, t_lam]
    double B_t = sample_bridge_point(t_lam, 0.0, 0.0, L, yB, rng);
    double zT = B_t + model.gamma_integral(0.0, t_lam);
    BridgeMaxSample bm = sample_bridge_max(model, t_lam, zT, cfg.sampler, rng);
    out.skeleton_points = bm.diag.skeleton_points;
    out.segments = bm.diag.segments;
    out.proposals = bm.diag.proposals;
    out.v = model.lambda_inv(bm.eta);
    out.M = bm.max;
    out.y_end = zT;
    return out;
}

// Reflection mapping: X(t) = max(M, x0 + Y(t)); the age is the argmax when
// the running maximum dominates, +inf otherwise (no idle visit).
inline RbmState rbm_state_from_triplet(double x0, const TripletSample& trip, double t) {
    if (!(x0 >= 0.0)) throw std::invalid_argument("rbm_state_from_triplet: need x0 >= 0");
    if (std::isinf(t)) return {trip.v, trip.M};
    if (!trip.y_end) throw std::invalid_argument("rbm_state_from_triplet: finite horizon needs an endpoint");
    double shifted = x0 + *trip.y_end;
    if (trip.M >= shifted) return {trip.v, trip.M};
    return {kInf, shifted};
}

// Analytic tail bound P(age >= u) <= integral of the IG(gbar/d, gbar^2)
// density over (0, 1/u], evaluated by adaptive quadrature (u in the
// normalized clock).
inline double warmup_bound(double u, const EnvelopeParams& env) {
    if (!(u > 0.0)) return 1.0;
    if (std::isinf(u)) return 0.0;
    double gbar = env.gamma_bar, d = env.d;
    if (!(d > 0.0)) d = std::numeric_limits<double>::min();  // degenerate constant-drift case
    auto pdf = [gbar, d](double x) {
        if (x <= 0.0) return 0.0;
        return std::sqrt(gbar * gbar / (2.0 * series::kPi * x * x * x)) *
               std::exp(-(d * x - gbar) * (d * x - gbar) / (2.0 * x));
    };
    double mean = gbar / d, shape = gbar * gbar;
    double hi = std::min(1.0 / u, mean + 60.0 * std::sqrt(mean * mean * mean / shape) + 10.0 * mean);
    double v = detail::integrate(pdf, 0.0, hi, 1e-11);
    return std::min(1.0, std::max(0.0, v));
}

struct WarmupPlan {
    std::optional<double> recommended;  // empirical (1-eps) quantile of the age, upper-adjusted
    double analytic;                    // inversion of the warmup_bound tail
    std::size_t n_infinite;             // trials that never idled
    std::vector<double> ages;           // finite ages, sorted
};

// Monte Carlo warm-up recommendation: the (1 - eps_tv) quantile of the age
// with a binomial upper-confidence adjustment, next to the analytic bound.
// The model must already be the reversed, normalized one for horizon t.
inline WarmupPlan plan_warmup(const NormalizedModel& model, double eps_tv, double t, double x0,
                              std::size_t n_trials, const Alg2Config& cfg, RandomStream& rng) {
    if (!(eps_tv > 0.0 && eps_tv < 1.0)) throw std::invalid_argument("plan_warmup: eps_tv in (0,1)");
    WarmupPlan plan;
    plan.n_infinite = 0;
    std::vector<double> ages;
    ages.reserve(n_trials);
    for (std::size_t i = 0; i < n_trials; ++i) {
        RandomStream st = rng.substream(i);
        TripletSample trip = sample_triplet_alg2(model, t, cfg, st);
        RbmState state = rbm_state_from_triplet(x0, trip, t);
        if (std::isinf(state.age)) ++plan.n_infinite;
        else ages.push_back(state.age);
    }
    std::sort(ages.begin(), ages.end());
    double n = static_cast<double>(n_trials);
    double idx = std::ceil(n * (1.0 - eps_tv) + 2.0 * std::sqrt(n * eps_tv * (1.0 - eps_tv)));
    std::size_t k = static_cast<std::size_t>(std::max(0.0, idx)) ;
    if (k >= n_trials) k = n_trials - 1;
    if (k < ages.size()) plan.recommended = ages[k];
    // analytic inversion: smallest u with warmup_bound(u) <= eps, mapped back
    // through the time change
    detail::Envelope re = detail::resolve_envelope(model, cfg.c, cfg.d_override, cfg.gamma_bar_override);
    EnvelopeParams env{re.d, re.gbar};
    double lo = 1e-9, hi = 1.0;
    while (warmup_bound(hi, env) > eps_tv && hi < 1e12) hi *= 2.0;
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        (warmup_bound(mid, env) > eps_tv ? lo : hi) = mid;
    }
    plan.analytic = model.lambda_inv(hi);
    plan.ages = std::move(ages);
    return plan;
}

}  // namespace nsrbm
