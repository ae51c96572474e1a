#pragma once

// Batch front-end: config parsing, experiment orchestration and CSV/JSON
// emission. Everything emitted is a pure function of (config, seed); worker
// count only affects wall time, never bytes (rows are keyed by trial id).
//
// Exit codes: 0 ok, 2 config error, 3 runtime/assumption failure.
// NSRBM_LOG=info|debug enables progress notes on stderr.

#include <charconv>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "nsrbm/nsrbm.hpp"

namespace nsrbm::cli {

using nlohmann::json;

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline int log_level() {
    const char* v = std::getenv("NSRBM_LOG");
    if (!v) return 0;
    std::string s(v);
    if (s == "debug") return 2;
    if (s == "info") return 1;
    return 0;
}

inline void log_info(const std::string& msg) {
    if (log_level() >= 1) std::cerr << "[nsrbm] " << msg << "\n";
}

// shortest round-trip float formatting
inline std::string fmt(double x) {
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    if (std::isnan(x)) return "nan";
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------------------
// flat key=value config
// ---------------------------------------------------------------------------
class Config {
  public:
    static Config from_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file: " + path);
        Config c;
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            auto hash = line.find('#');
            if (hash != std::string::npos) line = line.substr(0, hash);
            auto trim = [](std::string s) {
                auto b = s.find_first_not_of(" \t\r");
                auto e = s.find_last_not_of(" \t\r");
                return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
            };
            line = trim(line);
            if (line.empty()) continue;
            auto eq = line.find('=');
            if (eq == std::string::npos)
                throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
            std::string key = trim(line.substr(0, eq));
            std::string val = trim(line.substr(eq + 1));
            if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
            c.kv_[key] = val;
        }
        return c;
    }

    bool has(const std::string& key) const { return kv_.count(key) > 0; }

    std::string get_str(const std::string& key) const {
        auto it = kv_.find(key);
        if (it == kv_.end()) throw ConfigError("missing required config field: " + key);
        return it->second;
    }

    std::string get_str(const std::string& key, const std::string& dflt) const {
        auto it = kv_.find(key);
        return it == kv_.end() ? dflt : it->second;
    }

    double get_num(const std::string& key) const { return parse_num(key, get_str(key)); }

    double get_num(const std::string& key, double dflt) const {
        auto it = kv_.find(key);
        return it == kv_.end() ? dflt : parse_num(key, it->second);
    }

    std::uint64_t get_uint(const std::string& key, std::uint64_t dflt) const {
        double v = get_num(key, static_cast<double>(dflt));
        if (v < 0 || v != std::floor(v)) throw ConfigError("field " + key + " must be a nonnegative integer");
        return static_cast<std::uint64_t>(v);
    }

    std::vector<double> get_list(const std::string& key) const {
        std::string s = get_str(key);
        std::vector<double> out;
        std::stringstream ss(s);
        std::string item;
        while (std::getline(ss, item, ',')) out.push_back(parse_num(key, item));
        if (out.empty()) throw ConfigError("field " + key + " must be a comma-separated list");
        return out;
    }

    void set(const std::string& key, const std::string& val) { kv_[key] = val; }
    const std::map<std::string, std::string>& entries() const { return kv_; }

  private:
    static double parse_num(const std::string& key, const std::string& raw) {
        std::string s = raw;
        auto b = s.find_first_not_of(" \t");
        auto e = s.find_last_not_of(" \t");
        if (b == std::string::npos) throw ConfigError("field " + key + " is empty");
        s = s.substr(b, e - b + 1);
        if (s == "inf") return kInf;
        try {
            std::size_t pos = 0;
            double v = std::stod(s, &pos);
            if (pos != s.size()) throw std::invalid_argument("trailing");
            return v;
        } catch (...) {
            throw ConfigError("field " + key + ": cannot parse number from '" + s + "'");
        }
    }

    std::map<std::string, std::string> kv_;
};

// ---------------------------------------------------------------------------
// model construction
// ---------------------------------------------------------------------------
inline TimeFunction build_function(const Config& cfg, const std::string& prefix) {
    std::string kind = cfg.get_str(prefix + ".kind");
    if (kind == "constant") {
        return TimeFunction::constant(cfg.get_num(prefix + ".value"));
    }
    if (kind == "cosine") {
        return TimeFunction::cosine_affine(cfg.get_num(prefix + ".amp", 1.0), cfg.get_num(prefix + ".omega", 1.0),
                                           cfg.get_num(prefix + ".phase", 0.0), cfg.get_num(prefix + ".offset"));
    }
    if (kind == "piecewise") {
        std::string pts = cfg.get_str(prefix + ".points");
        std::vector<double> ts, vs;
        std::stringstream ss(pts);
        std::string item;
        while (std::getline(ss, item, ',')) {
            auto colon = item.find(':');
            if (colon == std::string::npos)
                throw ConfigError("field " + prefix + ".points: expected t:v pairs");
            ts.push_back(std::stod(item.substr(0, colon)));
            vs.push_back(std::stod(item.substr(colon + 1)));
        }
        std::optional<double> period;
        if (cfg.has(prefix + ".period")) period = cfg.get_num(prefix + ".period");
        try {
            return TimeFunction::piecewise_linear(ts, vs, period);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("field ") + prefix + ".points: " + e.what());
        }
    }
    throw ConfigError("field " + prefix + ".kind: unsupported kind '" + kind +
                      "' (constant | cosine | piecewise; callables require the library API)");
}

inline CoefficientSpec build_spec(const Config& cfg) {
    CoefficientSpec spec;
    spec.mu = build_function(cfg, "model");
    if (cfg.has("sigma2.kind")) spec.sigma2 = build_function(cfg, "sigma2");
    else if (cfg.has("sigma2.value")) spec.sigma2 = TimeFunction::constant(cfg.get_num("sigma2.value"));
    else throw ConfigError("missing required config field: sigma2.value (or sigma2.kind)");
    if (cfg.has("period")) spec.period = cfg.get_num("period");
    try {
        spec.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("model validation: ") + e.what());
    }
    return spec;
}

struct Experiment {
    CoefficientSpec spec;
    NormalizedModel model;          // reversed at the horizon and normalized
    double horizon = kInf;          // original-clock horizon t
    double x0 = 0.0;
    std::string algorithm = "alg2";
    std::uint64_t trials = 1000;
    std::uint64_t seed = 1;
    unsigned workers = 1;
    Alg2Config alg;
    double baseline_T = 35.0;
    double baseline_delta = 1.0 / 1024.0;
};

inline Experiment build_experiment(const Config& cfg) {
    Experiment ex;
    ex.spec = build_spec(cfg);
    ex.horizon = cfg.get_num("horizon", kInf);
    if (!(ex.horizon > 0.0)) throw ConfigError("field horizon: must be positive or inf");
    ex.x0 = cfg.get_num("x0", 0.0);
    if (ex.x0 < 0.0) throw ConfigError("field x0: must be nonnegative");
    ex.algorithm = cfg.get_str("algorithm", "alg2");
    if (ex.algorithm != "alg2" && ex.algorithm != "alg1" && ex.algorithm != "baseline" &&
        ex.algorithm != "naive-euler")
        throw ConfigError("field algorithm: expected alg1 | alg2 | baseline | naive-euler");
    ex.trials = cfg.get_uint("trials", 1000);
    if (ex.trials == 0) throw ConfigError("field trials: must be positive");
    ex.seed = cfg.get_uint("seed", 1);
    ex.workers = static_cast<unsigned>(cfg.get_uint("workers", 1));
    ex.alg.c = cfg.get_num("alg2.c", 2.0);
    ex.alg.epsilon = cfg.get_num("alg2.epsilon", 0.1);
    std::string rule = cfg.get_str("alg2.beta_rule", "standard");
    if (rule == "standard") ex.alg.beta_rule = BetaRule::standard;
    else if (rule == "improved") ex.alg.beta_rule = BetaRule::improved;
    else throw ConfigError("field alg2.beta_rule: expected standard | improved");
    if (!(ex.alg.c > 1.0)) throw ConfigError("field alg2.c: must exceed 1");
    if (!(ex.alg.epsilon > 0.0)) throw ConfigError("field alg2.epsilon: must be positive");
    ex.alg.sampler.theta = cfg.get_num("sampler.theta", 0.0);
    ex.alg.sampler.delta = cfg.get_num("sampler.delta", 0.0);
    if (cfg.has("envelope.d")) ex.alg.d_override = cfg.get_num("envelope.d");
    if (cfg.has("envelope.gamma_bar")) ex.alg.gamma_bar_override = cfg.get_num("envelope.gamma_bar");
    ex.baseline_T = cfg.get_num("baseline.T", 35.0);
    ex.baseline_delta = cfg.get_num("baseline.delta", 1.0 / 1024.0);

    try {
        CoefficientSpec rev = reverse_spec(ex.spec, ex.horizon);
        ex.model = normalize(rev);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("model setup: ") + e.what());
    }
    if (!ex.model.envelope && !(ex.alg.d_override && ex.alg.gamma_bar_override) &&
        ex.algorithm != "baseline" && ex.algorithm != "naive-euler" && std::isinf(ex.horizon))
        throw ConfigError("drift envelope could not be fitted; set envelope.d and envelope.gamma_bar");
    return ex;
}

inline json config_echo(const Config& cfg, const Experiment& ex) {
    json j;
    for (const auto& [k, v] : cfg.entries()) j["config"][k] = v;
    j["resolved"]["algorithm"] = ex.algorithm;
    j["resolved"]["trials"] = ex.trials;
    j["resolved"]["seed"] = ex.seed;
    j["resolved"]["workers"] = ex.workers;
    j["resolved"]["horizon"] = fmt(ex.horizon);
    j["resolved"]["x0"] = ex.x0;
    j["resolved"]["alg2.c"] = ex.alg.c;
    j["resolved"]["alg2.epsilon"] = ex.alg.epsilon;
    j["resolved"]["alg2.beta_rule"] = ex.alg.beta_rule == BetaRule::standard ? "standard" : "improved";
    if (ex.model.envelope) {
        j["resolved"]["envelope.d"] = ex.alg.d_override.value_or(ex.model.envelope->d);
        j["resolved"]["envelope.gamma_bar"] = ex.alg.gamma_bar_override.value_or(ex.model.envelope->gamma_bar);
    }
    return j;
}

// ---------------------------------------------------------------------------
// sample
// ---------------------------------------------------------------------------
struct TrialRow {
    double M = 0.0, v = kInf, y_end = kInf, x_t = kInf, age = kInf;
    int iterations = 0;
    std::uint64_t skeleton = 0, proposals = 0;
    bool has_v = false, has_y = false, has_state = false;
};

inline std::vector<TrialRow> run_trials(const Experiment& ex) {
    std::vector<TrialRow> rows(ex.trials);
    const bool finite = std::isfinite(ex.horizon);
    run_batch(ex.trials, ex.workers, ex.seed, [&](std::size_t i, RandomStream& st) {
        TrialRow r;
        if (ex.algorithm == "alg1" || ex.algorithm == "alg2") {
            TripletSample trip = ex.algorithm == "alg2" ? sample_triplet_alg2(ex.model, ex.horizon, ex.alg, st)
                                                        : sample_triplet_alg1(ex.model, ex.horizon, ex.alg, st);
            RbmState state = rbm_state_from_triplet(ex.x0, trip, ex.horizon);
            r.M = trip.M;
            r.v = trip.v;
            r.has_v = true;
            if (trip.y_end) {
                r.y_end = *trip.y_end;
                r.has_y = true;
            }
            r.x_t = state.x_t;
            r.age = state.age;
            r.has_state = true;
            r.iterations = trip.iterations;
            r.skeleton = trip.skeleton_points;
            r.proposals = trip.proposals - trip.segments;  // rejected candidates
        } else {
            double T = finite ? ex.model.lambda(ex.horizon) : ex.baseline_T;
            auto [mx, end] = discretize_max(ex.model, T, ex.baseline_delta, st, ex.algorithm == "naive-euler");
            r.M = mx;
            if (finite) {
                r.y_end = end;
                r.has_y = true;
                r.x_t = std::max(mx, ex.x0 + end);
                r.has_state = true;  // age needs the argmax, which the grid scheme does not track
            }
        }
        rows[i] = r;
    });
    return rows;
}

inline void write_sample_csv(std::ostream& os, const std::vector<TrialRow>& rows) {
    os << "trial,M,v,y_end,x_t,age,iterations,skeleton_points,rejected_proposals\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const TrialRow& r = rows[i];
        os << i << ',' << fmt(r.M) << ',';
        os << (r.has_v ? fmt(r.v) : "") << ',';
        os << (r.has_y ? fmt(r.y_end) : "") << ',';
        os << (r.has_state ? fmt(r.x_t) : "") << ',';
        os << (r.has_state && r.has_v ? fmt(r.age) : "") << ',';
        os << r.iterations << ',' << r.skeleton << ',' << r.proposals << '\n';
    }
}

inline int run_sample(const Config& cfg, const std::string& out_dir) {
    Experiment ex = build_experiment(cfg);
    auto t0 = std::chrono::steady_clock::now();
    std::vector<TrialRow> rows = run_trials(ex);
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    log_info("sample: " + std::to_string(ex.trials) + " trials in " + fmt(secs) + " s");

    std::ofstream csv(out_dir + "/draws.csv");
    if (!csv) throw std::runtime_error("cannot write " + out_dir + "/draws.csv");
    write_sample_csv(csv, rows);

    std::vector<double> ms(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) ms[i] = rows[i].M;
    SampleSummary sm = summarize(ms);
    json j = config_echo(cfg, ex);
    j["summary"]["n"] = sm.n;
    j["summary"]["mean_M"] = sm.mean;
    j["summary"]["se"] = sm.se;
    j["summary"]["ci90"] = {sm.ci90_lo, sm.ci90_hi};
    j["timing"]["total_seconds"] = secs;
    j["timing"]["per_trial_seconds"] = secs / static_cast<double>(ex.trials);
    j["diagnostics"]["series_fallbacks"] = series::stats().bernoulli_fallbacks.load();
    std::ofstream js(out_dir + "/summary.json");
    js << j.dump(2) << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// compare (exact vs discretization across step sizes)
// ---------------------------------------------------------------------------
inline std::vector<double> exact_m_samples(const Experiment& ex, std::uint64_t seed, std::uint64_t n) {
    std::vector<double> out(n);
    Experiment e2 = ex;
    run_batch(n, ex.workers, seed, [&](std::size_t i, RandomStream& st) {
        out[i] = (e2.algorithm == "alg1" ? sample_triplet_alg1(e2.model, e2.horizon, e2.alg, st)
                                         : sample_triplet_alg2(e2.model, e2.horizon, e2.alg, st))
                     .M;
    });
    return out;
}

inline std::vector<double> baseline_m_samples(const Experiment& ex, std::uint64_t seed, std::uint64_t n,
                                              double delta, bool naive) {
    std::vector<double> out(n);
    double T = std::isfinite(ex.horizon) ? ex.model.lambda(ex.horizon) : ex.baseline_T;
    run_batch(n, ex.workers, seed, [&](std::size_t i, RandomStream& st) {
        out[i] = discretize_max(ex.model, T, delta, st, naive).first;
    });
    return out;
}

inline std::uint64_t derived_seed(std::uint64_t seed, std::uint64_t tag) {
    return detail::splitmix64(seed + 0x9E3779B97F4A7C15ULL * (tag + 1));
}

inline int run_compare(const Config& cfg, const std::string& out_dir) {
    Experiment ex = build_experiment(cfg);
    std::vector<double> deltas = cfg.has("compare.deltas")
                                     ? cfg.get_list("compare.deltas")
                                     : std::vector<double>{0.5, 0.0625, 1.0 / 1024.0};
    bool naive = cfg.get_str("compare.scheme", "cell-max") == "naive-euler";
    bool self = cfg.get_str("compare.self", "no") == "yes";

    auto t0 = std::chrono::steady_clock::now();
    std::vector<double> exact = exact_m_samples(ex, ex.seed, ex.trials);
    double t_exact = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    std::ofstream csv(out_dir + "/compare.csv");
    if (!csv) throw std::runtime_error("cannot write " + out_dir + "/compare.csv");
    csv << "delta,ks_d,p_value,seconds\n";
    json j = config_echo(cfg, ex);
    j["exact"]["seconds"] = t_exact;
    j["exact"]["trials"] = ex.trials;
    if (self) {
        std::vector<double> again = exact_m_samples(ex, derived_seed(ex.seed, 77), ex.trials);
        KsResult kr = ks_two_sample(exact, again);
        csv << "self," << fmt(kr.d) << ',' << fmt(kr.p_value) << ',' << fmt(t_exact) << '\n';
        j["self"]["p_value"] = kr.p_value;
    }
    int idx = 0;
    for (double d : deltas) {
        auto tb = std::chrono::steady_clock::now();
        std::vector<double> approx = baseline_m_samples(ex, derived_seed(ex.seed, idx), ex.trials, d, naive);
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - tb).count();
        KsResult kr = ks_two_sample(exact, approx);
        csv << fmt(d) << ',' << fmt(kr.d) << ',' << fmt(kr.p_value) << ',' << fmt(secs) << '\n';
        j["rows"].push_back({{"delta", d}, {"ks_d", kr.d}, {"p_value", kr.p_value}, {"seconds", secs}});
        log_info("compare delta=" + fmt(d) + " p=" + fmt(kr.p_value));
        ++idx;
    }
    std::ofstream js(out_dir + "/compare.json");
    js << j.dump(2) << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// plan-warmup
// ---------------------------------------------------------------------------
inline int run_plan_warmup(const Config& cfg, const std::string& out_dir) {
    Experiment ex = build_experiment(cfg);
    double eps = cfg.get_num("warmup.eps", 0.1);
    RandomStream rng(ex.seed);
    WarmupPlan plan = plan_warmup(ex.model, eps, ex.horizon, ex.x0, ex.trials, ex.alg, rng);

    json j = config_echo(cfg, ex);
    j["warmup"]["eps"] = eps;
    j["warmup"]["analytic_u"] = plan.analytic;
    j["warmup"]["n_infinite_age"] = plan.n_infinite;
    if (plan.recommended) j["warmup"]["recommended_u"] = *plan.recommended;
    else j["warmup"]["recommended_u"] = "no finite recommendation at this horizon";
    j["warmup"]["note"] =
        "recommendation applies to the reflected diffusion itself; when planning a finer-grained "
        "system simulation, doubling u is a prudent allowance for model error";
    // empirical tail and the analytic curve on a grid
    detail::Envelope env = detail::resolve_envelope(ex.model, ex.alg.c, ex.alg.d_override, ex.alg.gamma_bar_override);
    std::ofstream csv(out_dir + "/warmup.csv");
    csv << "u,p_age_ge_u,analytic_bound\n";
    if (!plan.ages.empty()) {
        double umax = plan.ages.back() * 1.2 + 1e-9;
        for (int k = 0; k <= 40; ++k) {
            double u = umax * k / 40.0;
            std::size_t above = plan.ages.end() - std::lower_bound(plan.ages.begin(), plan.ages.end(), u);
            double pemp = static_cast<double>(above + plan.n_infinite) / static_cast<double>(ex.trials);
            double bound = u > 0 ? warmup_bound(ex.model.lambda(u), {env.d, env.gbar}) : 1.0;
            csv << fmt(u) << ',' << fmt(pemp) << ',' << fmt(bound) << '\n';
        }
    }
    std::ofstream js(out_dir + "/warmup.json");
    js << j.dump(2) << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// convergence (budget sweep)
// ---------------------------------------------------------------------------
inline double reference_mean(const Experiment& ex, const Config& cfg, const std::string& out_dir) {
    std::uint64_t ref_trials = cfg.get_uint("reference.trials", 500000);
    // cache keyed by a hash of the model entries and the reference size
    std::uint64_t h = 0xcbf29ce484222325ull;
    auto mix = [&h](const std::string& s) {
        for (char c : s) {
            h ^= static_cast<unsigned char>(c);
            h *= 0x100000001b3ull;
        }
    };
    for (const auto& [k, v] : cfg.entries())
        if (k.rfind("model.", 0) == 0 || k.rfind("sigma2.", 0) == 0 || k == "period" || k == "horizon") {
            mix(k);
            mix(v);
        }
    mix(std::to_string(ref_trials));
    std::string cache = out_dir + "/reference_" + std::to_string(h) + ".json";
    {
        std::ifstream in(cache);
        if (in) {
            json j;
            in >> j;
            log_info("convergence: using cached reference " + cache);
            return j.at("mean").get<double>();
        }
    }
    log_info("convergence: computing reference mean with " + std::to_string(ref_trials) + " exact trials");
    std::vector<double> ms = exact_m_samples(ex, derived_seed(ex.seed, 9001), ref_trials);
    SampleSummary sm = summarize(ms);
    json j;
    j["mean"] = sm.mean;
    j["se"] = sm.se;
    j["trials"] = ref_trials;
    std::ofstream out(cache);
    out << j.dump(2) << "\n";
    return sm.mean;
}

inline int run_convergence(const Config& cfg, const std::string& out_dir) {
    Experiment ex = build_experiment(cfg);
    std::vector<double> budgets = cfg.has("convergence.budgets")
                                      ? cfg.get_list("convergence.budgets")
                                      : std::vector<double>{2e5, 6e5, 2e6, 6e6, 2e7};
    if (budgets.size() < 5) throw ConfigError("field convergence.budgets: need at least 5 budget levels");
    double kappa_draw = cfg.get_num("convergence.kappa_draw", 40.0);
    BudgetOptions bo;
    bo.T = ex.baseline_T;
    double ref = reference_mean(ex, cfg, out_dir);

    std::ofstream csv(out_dir + "/convergence.csv");
    csv << "arm,budget,trials,delta,mean,se,bias,rmse\n";
    std::vector<std::pair<double, double>> base_pts, exact_pts;
    int idx = 0;
    for (double budget : budgets) {
        DiscretizationPlan plan = allocate_budget(budget, bo);
        std::vector<double> ms = baseline_m_samples(ex, derived_seed(ex.seed, 100 + idx),
                                                    plan.trials, plan.delta, false);
        SampleSummary sm = summarize(ms, ref);
        base_pts.push_back({budget, *sm.rmse});
        csv << "baseline," << fmt(budget) << ',' << plan.trials << ',' << fmt(plan.delta) << ',' << fmt(sm.mean)
            << ',' << fmt(sm.se) << ',' << fmt(*sm.bias) << ',' << fmt(*sm.rmse) << '\n';

        std::uint64_t n_exact = std::max<std::uint64_t>(2, static_cast<std::uint64_t>(budget / kappa_draw));
        std::vector<double> es = exact_m_samples(ex, derived_seed(ex.seed, 200 + idx), n_exact);
        SampleSummary se = summarize(es);
        exact_pts.push_back({budget, se.se});  // exact rmse = se (zero bias)
        csv << "exact," << fmt(budget) << ',' << n_exact << ",," << fmt(se.mean) << ',' << fmt(se.se) << ",0,"
            << fmt(se.se) << '\n';
        log_info("convergence budget=" + fmt(budget) + " baseline rmse=" + fmt(*sm.rmse) +
                 " exact rmse=" + fmt(se.se));
        ++idx;
    }
    SlopeFit fb = loglog_slope(base_pts);
    SlopeFit fe = loglog_slope(exact_pts);
    json j = config_echo(cfg, ex);
    j["reference_mean"] = ref;
    j["slopes"]["baseline"] = {{"slope", fb.slope}, {"stderr", fb.stderr_}};
    j["slopes"]["exact"] = {{"slope", fe.slope}, {"stderr", fe.stderr_}};
    std::ofstream js(out_dir + "/convergence.json");
    js << j.dump(2) << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// entry point
// ---------------------------------------------------------------------------
inline int nsrbm_main(std::vector<std::string> args) {
    CLI::App app{"exact sampling of reflected Brownian motion with time-varying coefficients"};
    app.require_subcommand(1);
    std::string config_path, out_dir = ".";
    std::int64_t seed_flag = -1, workers_flag = -1;
    std::string algo_flag;
    app.add_option("--config", config_path, "path to the key=value config file")->required();
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--seed", seed_flag, "override config seed");
    app.add_option("--workers", workers_flag, "override config worker count");
    app.add_option("--algorithm", algo_flag, "override config algorithm (alg1|alg2|baseline|naive-euler)");
    CLI::App* c_sample = app.add_subcommand("sample", "draw replications and summarize");
    CLI::App* c_compare = app.add_subcommand("compare", "KS comparison of exact vs discretized draws");
    CLI::App* c_warmup = app.add_subcommand("plan-warmup", "recommend the warm-up window");
    CLI::App* c_conv = app.add_subcommand("convergence", "budget sweep of RMSE for both methods");
    for (CLI::App* sub : {c_sample, c_compare, c_warmup, c_conv}) sub->fallthrough();

    std::vector<const char*> argv;
    std::string prog = "nsrbm";
    argv.push_back(prog.c_str());
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        Config cfg = Config::from_file(config_path);
        if (seed_flag >= 0) cfg.set("seed", std::to_string(seed_flag));
        if (workers_flag >= 0) cfg.set("workers", std::to_string(workers_flag));
        if (!algo_flag.empty()) cfg.set("algorithm", algo_flag);
        if (c_sample->parsed()) return run_sample(cfg, out_dir);
        if (c_compare->parsed()) return run_compare(cfg, out_dir);
        if (c_warmup->parsed()) return run_plan_warmup(cfg, out_dir);
        if (c_conv->parsed()) return run_convergence(cfg, out_dir);
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return 3;
    }
}

}  // namespace nsrbm::cli
