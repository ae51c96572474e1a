#pragma once

// Statistical harness: two-sample Kolmogorov-Smirnov, summary estimators
// and log-log slope fits for convergence studies.

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "series.hpp"

namespace nsrbm {

struct KsResult {
    double d;
    double p_value;
};

// D = sup |ECDF difference|; asymptotic p-value with effective size
// na nb / (na + nb).
inline KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("ks_two_sample: empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        double v = std::min(a[i], b[j]);
        while (i < a.size() && a[i] == v) ++i;
        while (j < b.size() && b[j] == v) ++j;
        double fa = static_cast<double>(i) / a.size();
        double fb = static_cast<double>(j) / b.size();
        d = std::max(d, std::abs(fa - fb));
    }
    double neff = static_cast<double>(a.size()) * b.size() / (a.size() + b.size());
    return {d, series::kolmogorov_sf(std::sqrt(neff) * d)};
}

struct SampleSummary {
    std::size_t n;
    double mean;
    double se;
    double ci90_lo;
    double ci90_hi;
    std::optional<double> bias;
    std::optional<double> rmse;
};

inline SampleSummary summarize(const std::vector<double>& sample, std::optional<double> reference = std::nullopt) {
    if (sample.size() < 2) throw std::invalid_argument("summarize: need n >= 2");
    double n = static_cast<double>(sample.size());
    double s = 0.0;
    for (double x : sample) s += x;
    double mean = s / n;
    double ss = 0.0;
    for (double x : sample) ss += (x - mean) * (x - mean);
    double sd = std::sqrt(ss / (n - 1.0));
    double se = sd / std::sqrt(n);
    const double z90 = 1.6448536269514722;
    SampleSummary out{sample.size(), mean, se, mean - z90 * se, mean + z90 * se, std::nullopt, std::nullopt};
    if (reference) {
        double bias = mean - *reference;
        out.bias = bias;
        out.rmse = std::sqrt(se * se + bias * bias);
    }
    return out;
}

struct SlopeFit {
    double slope;
    double stderr_;
    double intercept;
};

inline SlopeFit loglog_slope(const std::vector<std::pair<double, double>>& points) {
    if (points.size() < 3) throw std::invalid_argument("loglog_slope: need at least 3 points");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (auto [x, y] : points) {
        if (!(x > 0.0) || !(y > 0.0)) throw std::invalid_argument("loglog_slope: coordinates must be positive");
        double lx = std::log(x), ly = std::log(y);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    double n = static_cast<double>(points.size());
    double denom = n * sxx - sx * sx;
    double slope = (n * sxy - sx * sy) / denom;
    double intercept = (sy - slope * sx) / n;
    double rss = 0.0;
    for (auto [x, y] : points) {
        double r = std::log(y) - (intercept + slope * std::log(x));
        rss += r * r;
    }
    double se = points.size() > 2 ? std::sqrt(rss / (n - 2.0) * n / denom) : 0.0;
    return {slope, se, intercept};
}

}  // namespace nsrbm
