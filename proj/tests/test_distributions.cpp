#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "nsrbm/distributions.hpp"
#include "support/oracles.hpp"

using namespace nsrbm;

TEST_CASE("inverse gaussian moments and concentration") {
    RandomStream rng(11);
    const int n = 200000;
    double s = 0, s2 = 0;
    for (int i = 0; i < n; ++i) {
        double x = sample_inverse_gaussian(2.0, 8.0, rng);
        s += x;
        s2 += x * x;
    }
    double mean = s / n;
    double var = s2 / n - mean * mean;
    // var = mean^3/shape = 1; 4 sigma MC bands
    CHECK(std::abs(mean - 2.0) < 4.0 * std::sqrt(1.0 / n) + 1e-3);
    CHECK(std::abs(var - 1.0) < 0.05);

    for (int i = 0; i < 100; ++i) CHECK(std::abs(sample_inverse_gaussian(1.0, 1e8, rng) - 1.0) < 0.01);

    CHECK_THROWS_AS(sample_inverse_gaussian(-1.0, 1.0, rng), std::invalid_argument);
    CHECK_THROWS_AS(sample_inverse_gaussian(1.0, kInf, rng), std::invalid_argument);
}

TEST_CASE("inverse gaussian chi-square goodness of fit") {
    RandomStream rng(12);
    const int n = 100000, bins = 20;
    double mean = 1.3, shape = 2.1;
    // bin edges at CDF quantiles via bisection on the closed-form CDF
    std::vector<double> edges(bins - 1);
    for (int b = 1; b < bins; ++b) {
        double target = static_cast<double>(b) / bins, lo = 1e-9, hi = 60.0;
        for (int it = 0; it < 200; ++it) {
            double mid = 0.5 * (lo + hi);
            (inverse_gaussian_cdf(mid, mean, shape) < target ? lo : hi) = mid;
        }
        edges[b - 1] = 0.5 * (lo + hi);
    }
    std::vector<int> counts(bins, 0);
    for (int i = 0; i < n; ++i) {
        double x = sample_inverse_gaussian(mean, shape, rng);
        int b = static_cast<int>(std::lower_bound(edges.begin(), edges.end(), x) - edges.begin());
        counts[b]++;
    }
    double chi2 = 0, expect = static_cast<double>(n) / bins;
    for (int b = 0; b < bins; ++b) chi2 += (counts[b] - expect) * (counts[b] - expect) / expect;
    CHECK(chi2 < 43.82);  // chi2_{19} at significance 0.001
}

TEST_CASE("exit time: mean, symmetry, scaling") {
    RandomStream rng(21);
    for (double a : {1.0, 0.5}) {
        const int n = 200000;
        double s = 0;
        int plus = 0;
        for (int i = 0; i < n; ++i) {
            ExitSample e = sample_exit_time(a, rng);
            s += e.tau;
            if (e.endpoint_sign > 0) ++plus;
        }
        // E[tau_a] = a^2; sd(tau_1) ~ 0.57
        double mean = s / n;
        CHECK(std::abs(mean - a * a) < 4.0 * 0.6 * a * a / std::sqrt(static_cast<double>(n)));
        double f = static_cast<double>(plus) / n;
        CHECK(std::abs(f - 0.5) < 4.0 * 0.5 / std::sqrt(static_cast<double>(n)));
    }
    // tau_{2a} ~ 4 tau_a
    const int m = 100000;
    std::vector<double> x4(m), y2(m);
    for (int i = 0; i < m; ++i) x4[i] = 4.0 * sample_exit_time(1.0, rng).tau;
    for (int i = 0; i < m; ++i) y2[i] = sample_exit_time(2.0, rng).tau;
    double d = oracles::ks_stat(x4, y2);
    double neff = m / 2.0;
    CHECK(series::kolmogorov_sf(std::sqrt(neff) * d) > 0.01);
}

TEST_CASE("p-series: structure and boundary limits") {
    // nested alternating bounds, symmetric case
    SeriesBounds prev = eval_p_series(0.0, 1.0, 1.0, 1.0, 1);
    for (int j = 2; j <= 10; ++j) {
        SeriesBounds b = eval_p_series(0.0, 1.0, 1.0, 1.0, j);
        CHECK(b.lower >= prev.lower - 1e-15);
        CHECK(b.upper <= prev.upper + 1e-15);
        CHECK(b.lower <= b.upper);
        prev = b;
    }
    SeriesBounds conv = eval_p_series(0.0, 1.0, 1.0, 1.0);
    CHECK(conv.lower > 0.0);
    CHECK(conv.upper < 1.0);

    // monotone decreasing in duration
    double prev_mid = 1.0;
    for (double dt : {0.25, 0.5, 1.0, 2.0, 4.0}) {
        SeriesBounds b = eval_p_series(0.0, 1.0, dt, 1.0);
        double mid = 0.5 * (b.lower + b.upper);
        CHECK(mid < prev_mid + 1e-12);
        prev_mid = mid;
    }

    // boundary cases are the limits of the interior ratio
    for (double y : {0.4, 1.2}) {
        SeriesBounds b0 = eval_p_series(0.0, 0.0, 1.0, y);
        SeriesBounds be = eval_p_series(0.0, 1e-7, 1.0, y);
        CHECK(std::abs(0.5 * (b0.lower + b0.upper) - 0.5 * (be.lower + be.upper)) < 1e-5);
        SeriesBounds bsym = eval_p_series(0.0, y, 1.0, 0.0);
        CHECK(std::abs(0.5 * (b0.lower + b0.upper) - 0.5 * (bsym.lower + bsym.upper)) < 1e-12);
    }

    CHECK_THROWS_AS(eval_p_series(0.0, -0.1, 1.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(eval_p_series(1.0, 1.0, 1.0, 1.0), std::invalid_argument);
}

TEST_CASE("p-series against a fine-grid bridge oracle") {
    std::mt19937_64 g(7);
    const int n = 200000;
    // estimate P(in (0,2)) and P(>0) on independent path sets; their ratio is p
    int pos = 0, in2 = 0;
    for (int i = 0; i < n; ++i)
        if (oracles::bridge_stays_inside(g, 1.0, 0.7, 1.0, 0.0, kInf, 256)) ++pos;
    for (int i = 0; i < n; ++i)
        if (oracles::bridge_stays_inside(g, 1.0, 0.7, 1.0, 0.0, 2.0, 256)) ++in2;
    double est = static_cast<double>(in2) / static_cast<double>(pos);
    SeriesBounds b = eval_p_series(0.0, 1.0, 1.0, 0.7);
    double p = 0.5 * (b.lower + b.upper);
    double se = std::sqrt(p * (1 - p) / pos) * 1.5;  // ratio estimate, inflate
    CHECK(std::abs(p - est) < 3.0 * se + 2e-3);

    // bernoulli variant decides consistently with the bracket value
    RandomStream rng(31);
    int acc = 0;
    const int m = 20000;
    for (int i = 0; i < m; ++i)
        if (bernoulli_p_series(0.0, 1.0, 1.0, 0.7, rng.uniform())) ++acc;
    double f = static_cast<double>(acc) / m;
    CHECK(std::abs(f - p) < 4.0 * std::sqrt(p * (1 - p) / m));
}

TEST_CASE("skeleton given exit: domain and conditional marginal vs rejection oracle") {
    RandomStream rng(41);
    CHECK(sample_skeleton_given_exit(1.0, {}, 1.0, 1, rng).empty());

    // all values strictly inside (-a, a)
    for (int rep = 0; rep < 200; ++rep) {
        ExitSample e = sample_exit_time(0.8, rng);
        std::vector<double> ks = {0.25 * e.tau, 0.5 * e.tau, 0.75 * e.tau};
        auto w = sample_skeleton_given_exit(e.tau, ks, 0.8, e.endpoint_sign, rng);
        for (double v : w) {
            CHECK(v > -0.8);
            CHECK(v < 0.8);
        }
    }
    CHECK_THROWS_AS(sample_skeleton_given_exit(1.0, std::vector<double>{0.5, 0.4}, 1.0, 1, rng),
                    std::invalid_argument);

    // one-point marginal at kappa = tau/2 for exits near tau ~ 0.6
    const double lo_t = 0.5, hi_t = 0.7, a = 1.0;
    std::vector<double> impl;
    while (impl.size() < 1500) {
        ExitSample e = sample_exit_time(a, rng);
        if (e.tau < lo_t || e.tau > hi_t) continue;
        auto w = sample_skeleton_given_exit(e.tau, {0.5 * e.tau}, a, e.endpoint_sign, rng);
        impl.push_back(w[0]);
    }
    std::mt19937_64 g(99);
    std::normal_distribution<double> N(0.0, 1.0);
    std::vector<double> orac;
    const double dt = 1e-4, sq = std::sqrt(dt);
    std::vector<double> path;
    path.reserve(8192);
    while (orac.size() < 1500) {
        path.clear();
        path.push_back(0.0);
        double w = 0.0, t = 0.0;
        bool exited = false;
        while (t < hi_t) {
            w += sq * N(g);
            t += dt;
            path.push_back(w);
            if (std::abs(w) >= a) { exited = true; break; }
        }
        if (!exited || t < lo_t) continue;
        orac.push_back(path[path.size() / 2]);
    }
    double d = oracles::ks_stat(impl, orac);
    double neff = 1500.0 / 2.0;
    CHECK(series::kolmogorov_sf(std::sqrt(neff) * d) > 0.01);
}

TEST_CASE("meander max reduces to the bridge-max law without a floor") {
    RandomStream rng(51);
    const int n = 20000;
    double xend = 0.3, T = 1.0;
    std::vector<double> draws(n);
    for (int i = 0; i < n; ++i) draws[i] = sample_meander_max(0.0, 0.0, T, xend, -kInf, rng).max;
    auto cdf = [&](double m) {
        if (m < std::max(0.0, xend)) return 0.0;
        return 1.0 - std::exp(-2.0 * m * (m - xend) / T);
    };
    double d = oracles::ks_stat_cdf(draws, cdf);
    CHECK(series::kolmogorov_sf(std::sqrt(static_cast<double>(n)) * d) > 0.01);

    // spec check at m = 1: Q(max > 1) = exp(-2*1*(1-0.3))
    int over = 0;
    for (double v : draws)
        if (v > 1.0) ++over;
    double q = std::exp(-2.0 * 1.0 * (1.0 - xend) / T);
    CHECK(std::abs(static_cast<double>(over) / n - q) < 4.0 * std::sqrt(q * (1 - q) / n));

    // symmetric endpoints: argmax symmetric around T/2
    double s = 0;
    for (int i = 0; i < n; ++i) s += sample_meander_max(0.0, 0.2, T, 0.2, -kInf, rng).argmax;
    CHECK(std::abs(s / n - 0.5) < 0.01);

    // degenerate segment
    MaxSample deg = sample_meander_max(2.0, 0.7, 2.0, 0.7, 0.0, rng);
    CHECK(deg.max == 0.7);
    CHECK(deg.argmax == 2.0);
    CHECK_THROWS_AS(sample_meander_max(0.0, -1.0, 1.0, 0.5, 0.0, rng), std::invalid_argument);
}

TEST_CASE("corridor piece maxima match corridor-probability oracles") {
    RandomStream rng(61);
    // floored bridge max: P(max <= m | min > floor) estimated with the
    // fine-grid corridor oracle at a few thresholds
    double T = 1.0, alpha = 0.4, beta = 0.1, fl = -0.5;
    const int n = 12000;
    std::vector<double> maxima(n);
    for (int i = 0; i < n; ++i) maxima[i] = bridge_max_in_corridor(T, alpha, beta, fl, kInf, rng).max;
    std::mt19937_64 g(5);
    for (double m : {0.6, 0.9, 1.3}) {
        const int np = 120000;
        int surv = 0, both = 0;
        for (int i = 0; i < np; ++i)
            if (oracles::bridge_stays_inside(g, alpha, beta, T, fl, kInf, 200)) ++surv;
        for (int i = 0; i < np; ++i)
            if (oracles::bridge_stays_inside(g, alpha, beta, T, fl, m, 200)) ++both;
        double target = static_cast<double>(both) / surv;
        int below = 0;
        for (double v : maxima)
            if (v <= m) ++below;
        double f = static_cast<double>(below) / n;
        CHECK(std::abs(f - target) < 4.0 * std::sqrt(target * (1 - target) / n) + 0.01);
    }

    // capped draws are the uncapped draws conditioned below the cap
    double cap = 1.0;
    std::vector<double> capped(n), filtered;
    for (int i = 0; i < n; ++i) capped[i] = bridge_max_in_corridor(T, alpha, beta, fl, cap, rng).max;
    for (double v : maxima)
        if (v < cap) filtered.push_back(v);
    double d = oracles::ks_stat(capped, filtered);
    double neff = static_cast<double>(capped.size()) * filtered.size() / (capped.size() + filtered.size());
    CHECK(series::kolmogorov_sf(std::sqrt(neff) * d) > 0.01);
}

TEST_CASE("bes3 bridge max below a cap: inversion against 3d-norm brute force") {
    RandomStream rng(71);
    double u = 1.0, y = 0.8, cap = 1.6;
    const int n = 6000;
    std::vector<double> impl(n);
    for (int i = 0; i < n; ++i) impl[i] = bes3_bridge_max_below(u, y, cap, rng).max;

    std::mt19937_64 g(6);
    std::normal_distribution<double> N(0.0, 1.0);
    const int steps = 4096;
    std::vector<double> orac;
    std::vector<double> b1(steps + 1), b2(steps + 1), b3(steps + 1);
    while (orac.size() < static_cast<std::size_t>(n)) {
        // three coordinate bridges 0 -> (y,0,0)
        double dt = u / steps, sq = std::sqrt(dt);
        b1[0] = b2[0] = b3[0] = 0.0;
        for (int i = 0; i < steps; ++i) {
            double rem = u - i * dt;
            b1[i + 1] = b1[i] + (y - b1[i]) * dt / rem + sq * N(g) * std::sqrt((rem - dt) / rem);
            b2[i + 1] = b2[i] + (0.0 - b2[i]) * dt / rem + sq * N(g) * std::sqrt((rem - dt) / rem);
            b3[i + 1] = b3[i] + (0.0 - b3[i]) * dt / rem + sq * N(g) * std::sqrt((rem - dt) / rem);
        }
        double mx = 0.0;
        for (int i = 0; i <= steps; ++i)
            mx = std::max(mx, std::sqrt(b1[i] * b1[i] + b2[i] * b2[i] + b3[i] * b3[i]));
        if (mx < cap) orac.push_back(mx);
    }
    double d = oracles::ks_stat(impl, orac);
    double neff = static_cast<double>(n) / 2.0;
    // grid maxima are biased low by O(sqrt(dt)); keep a loose gate
    CHECK(series::kolmogorov_sf(std::sqrt(neff) * d) > 0.001);

    // argmax lives in (0, u) and the maximum dominates the endpoint
    for (int i = 0; i < 200; ++i) {
        MaxSample s = bes3_bridge_max_below(u, y, cap, rng);
        CHECK(s.max >= y);
        CHECK(s.max <= cap);
        CHECK(s.argmax >= 0.0);
        CHECK(s.argmax <= u);
    }
}

TEST_CASE("bridge point sampler: variance and continuity") {
    RandomStream rng(81);
    const int n = 100000;
    double s = 0, s2 = 0;
    for (int i = 0; i < n; ++i) {
        double v = sample_bridge_point(0.5, 0.0, 0.0, 1.0, 0.0, rng);
        s += v;
        s2 += v * v;
    }
    CHECK(std::abs(s / n) < 0.01);
    CHECK(std::abs(s2 / n - 0.25) < 0.01);
    double near = sample_bridge_point(1e-12, 0.0, 3.0, 1.0, -1.0, rng);
    CHECK(std::abs(near - 3.0) < 1e-4);
    CHECK_THROWS_AS(sample_bridge_point(2.0, 0.0, 0.0, 1.0, 0.0, rng), std::invalid_argument);
}
