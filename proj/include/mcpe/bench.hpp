#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <unordered_set>
#include <variant>
#include <vector>

#include "mcpe/error.hpp"
#include "mcpe/features.hpp"
#include "mcpe/io.hpp"
#include "mcpe/ls_mcmi.hpp"
#include "mcpe/lstd.hpp"
#include "mcpe/max_likelihood.hpp"
#include "mcpe/mcmi.hpp"
#include "mcpe/mrp.hpp"
#include "mcpe/procedural.hpp"
#include "mcpe/sampling.hpp"
#include "mcpe/td_lambda.hpp"

// Experiment harness: builds an MRP, runs one estimator for a sample budget,
// measures relative error against the direct-solve oracle and wall time.
//
// Randomness for repetition r derives from the root stream
// {seed = base_seed + r, stream = 0}: the MRP is generated from one substream
// and sampling uses another, so every estimator run with the same config and
// repetition sees the same MRP and the same sampling randomness.

namespace mcpe::bench {

enum class Estimator { td, ml, mcmi, lstd, lsmcmi };

inline const char* to_string(Estimator e) {
    switch (e) {
    case Estimator::td: return "td";
    case Estimator::ml: return "ml";
    case Estimator::mcmi: return "mcmi";
    case Estimator::lstd: return "lstd";
    case Estimator::lsmcmi: return "lsmcmi";
    }
    return "?";
}

inline Estimator parse_estimator(const std::string& s) {
    if (s == "td") return Estimator::td;
    if (s == "ml") return Estimator::ml;
    if (s == "mcmi") return Estimator::mcmi;
    if (s == "lstd") return Estimator::lstd;
    if (s == "lsmcmi") return Estimator::lsmcmi;
    throw ValidationError("unknown estimator '" + s + "' (expected td|ml|mcmi|lstd|lsmcmi)");
}

inline bool is_least_squares(Estimator e) { return e == Estimator::lstd || e == Estimator::lsmcmi; }

struct MrpSource {
    enum class Kind { file, random, procedural };
    Kind kind = Kind::random;
    std::string path;           // file
    std::uint64_t n = 300;      // random: states; procedural: nominal states
    std::uint64_t out_degree = 0; // 0 means dense (= n for random, = m for procedural)
    std::uint64_t m = 100;      // procedural reachable-subset size
    double reward_stddev = 0.0; // random only
};

struct Sweep {
    std::string param;
    std::vector<double> values;
};

struct ExperimentConfig {
    Estimator estimator = Estimator::mcmi;
    MrpSource mrp;
    std::optional<double> gamma;  // default 0.8 (file: the file's gamma)
    std::optional<double> lambda; // default 0.9 for td, 0 for lstd
    double alpha = 0.5;
    AlphaSchedule::Kind alpha_schedule = AlphaSchedule::Kind::fixed;
    std::uint64_t t_steps = 20000;
    std::string features = "identity"; // identity | constant | gaussian:K | <path>
    std::uint64_t repetitions = 20;
    std::uint64_t base_seed = 1;
    std::optional<Sweep> sweep;
    double start_floor = 0.0; // lsmcmi fit weighting, 0 = off
    unsigned threads = 1;
};

struct ResultRecord {
    std::string estimator;
    std::uint64_t n = 0;
    std::uint64_t t_steps = 0;
    double gamma = 0.0;
    std::optional<double> lambda;
    std::optional<double> alpha;
    std::optional<std::uint64_t> k;
    std::optional<std::uint64_t> m;
    std::uint64_t seed = 0;
    std::optional<double> rel_error;
    double wall_ms = 0.0;
    std::optional<std::uint64_t> walks_completed;
    std::optional<double> mean_walk_length;
};

inline constexpr const char* kCsvHeader =
    "estimator,n,t_steps,gamma,lambda,alpha,k,m,seed,rel_error,wall_ms,walks_completed,mean_walk_length";

inline constexpr std::uint64_t kGenerateTag = 1;
inline constexpr std::uint64_t kSampleTag = 2;
inline constexpr std::uint64_t kFeatureTag = 3;

inline RngStream repetition_stream(std::uint64_t base_seed, std::uint64_t repetition) {
    return RngStream{base_seed + repetition, 0};
}

inline double effective_gamma(const ExperimentConfig& c) { return c.gamma.value_or(0.8); }

inline double effective_lambda(const ExperimentConfig& c) {
    return c.lambda.value_or(c.estimator == Estimator::lstd ? 0.0 : 0.9);
}

/// Throws ValidationError when a parameter is out of range or the estimator
/// cannot run on the configured source.
inline void validate(const ExperimentConfig& c) {
    if (c.repetitions == 0) throw ValidationError("repetitions must be at least 1");
    if (c.t_steps == 0) throw ValidationError("steps must be positive");
    if (c.gamma && !(*c.gamma > 0.0 && *c.gamma < 1.0)) throw ValidationError("gamma must lie in (0, 1)");
    if (c.lambda) {
        if (c.estimator != Estimator::td && c.estimator != Estimator::lstd)
            throw ValidationError(std::string("lambda does not apply to estimator ") + to_string(c.estimator));
        if (!(*c.lambda >= 0.0 && *c.lambda <= 1.0)) throw ValidationError("lambda must lie in [0, 1]");
    }
    if (c.estimator == Estimator::td && !(c.alpha > 0.0 && c.alpha <= 1.0))
        throw ValidationError("alpha must lie in (0, 1]");
    if (c.mrp.kind == MrpSource::Kind::procedural && !is_least_squares(c.estimator))
        throw ValidationError(std::string("estimator ") + to_string(c.estimator) +
                              " needs an explicit MRP; procedural sources support lstd and lsmcmi");
    if (c.mrp.kind == MrpSource::Kind::file && c.mrp.path.empty()) throw ValidationError("MRP file path is empty");
}

/// A built MRP for one repetition.
using BuiltMrp = std::variant<Mrp, ProceduralMrp>;

inline BuiltMrp build_mrp(const ExperimentConfig& c, RngStream root) {
    const double gamma = effective_gamma(c);
    switch (c.mrp.kind) {
    case MrpSource::Kind::file: {
        Mrp loaded = io::read_mrp(c.mrp.path);
        if (!c.gamma) return loaded;
        return Mrp(loaded.transitions(), loaded.rewards(), gamma);
    }
    case MrpSource::Kind::random: {
        const std::uint64_t deg = c.mrp.out_degree == 0 ? c.mrp.n : c.mrp.out_degree;
        return random_mrp(c.mrp.n, deg, {0.0, 1.0}, root.substream(kGenerateTag), gamma, c.mrp.reward_stddev);
    }
    case MrpSource::Kind::procedural: {
        const std::uint64_t deg = c.mrp.out_degree == 0 ? c.mrp.m : c.mrp.out_degree;
        return ProceduralMrp(c.mrp.n, c.mrp.m, deg, root.substream(kGenerateTag), gamma);
    }
    }
    throw ValidationError("unknown MRP source");
}

inline FeatureMatrix build_features(const std::string& spec, std::uint64_t n, RngStream root) {
    if (spec == "identity") {
        if (n > kOracleMaxStates)
            throw ValidationError("identity features need n <= " + std::to_string(kOracleMaxStates));
        return FeatureMatrix::identity(n);
    }
    if (spec == "constant") return FeatureMatrix::constant();
    if (spec.rfind("gaussian:", 0) == 0) {
        std::uint64_t k = 0;
        try {
            std::size_t used = 0;
            k = std::stoull(spec.substr(9), &used);
            if (used != spec.size() - 9) throw std::invalid_argument(spec);
        } catch (const std::exception&) {
            throw ValidationError("bad feature spec '" + spec + "' (expected gaussian:K)");
        }
        if (k == 0) throw ValidationError("gaussian features need K >= 1");
        return FeatureMatrix::gaussian(k, root.substream(kFeatureTag));
    }
    return io::read_features(spec);
}

namespace detail {

template <class F>
double time_ms(F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    const auto t1 = std::chrono::steady_clock::now();
    const double ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    return ms > 0.0 ? ms : 1e-6;
}

inline std::uint64_t distinct_states(const std::vector<StepRecord>& stream) {
    std::unordered_set<StateIndex> seen;
    for (const auto& s : stream) {
        seen.insert(s.state);
        seen.insert(s.next_state);
    }
    return seen.size();
}

template <class M>
ResultRecord run_on(const ExperimentConfig& c, const M& mrp, RngStream root, const ValueVector* oracle) {
    ResultRecord rec;
    rec.estimator = to_string(c.estimator);
    rec.n = mrp.state_count();
    rec.t_steps = c.t_steps;
    rec.gamma = effective_gamma(c);
    rec.seed = root.seed;
    const double gamma = rec.gamma;
    const std::size_t n = mrp.state_count();
    Rng rng(root.substream(kSampleTag));
    std::optional<ValueVector> estimate;

    switch (c.estimator) {
    case Estimator::td: {
        rec.lambda = effective_lambda(c);
        rec.alpha = c.alpha;
        const AlphaSchedule sched{c.alpha_schedule, c.alpha};
        rec.wall_ms = time_ms([&] {
            const auto stream = sample_stream(mrp, default_strategy(mrp), c.t_steps, rng);
            estimate = td_lambda(stream, n, gamma, *rec.lambda, sched);
        });
        break;
    }
    case Estimator::ml: {
        rec.wall_ms = time_ms([&] {
            const auto stream = sample_stream(mrp, default_strategy(mrp), c.t_steps, rng);
            estimate = ml_value(ml_fit(stream, n), gamma);
        });
        break;
    }
    case Estimator::mcmi: {
        WalkStats stats;
        rec.wall_ms = time_ms([&] {
            auto r = mcmi_evaluate(mrp, gamma, c.t_steps, rng);
            stats = r.stats;
            estimate = std::move(r.values);
        });
        rec.walks_completed = stats.walks;
        rec.mean_walk_length = stats.mean_walk_length();
        break;
    }
    case Estimator::lstd: {
        rec.lambda = effective_lambda(c);
        const FeatureMatrix phi = build_features(c.features, n, root);
        rec.k = phi.k();
        std::optional<LstdEstimate> fit;
        std::vector<StepRecord> stream;
        rec.wall_ms = time_ms([&] {
            stream = sample_stream(mrp, default_strategy(mrp), c.t_steps, rng);
            fit.emplace(lstd_evaluate(stream, phi, gamma, *rec.lambda));
        });
        rec.m = distinct_states(stream);
        if (oracle) {
            ValueVector v(n);
            for (StateIndex s = 0; s < n; ++s) {
                v.values[s] = fit->value(phi, s);
                v.visited[s] = true;
            }
            estimate = std::move(v);
        }
        break;
    }
    case Estimator::lsmcmi: {
        const FeatureMatrix phi = build_features(c.features, n, root);
        rec.k = phi.k();
        std::optional<LsMcmiEstimate> fit;
        rec.wall_ms = time_ms([&] {
            fit.emplace(ls_mcmi_evaluate(mrp, phi, gamma, c.t_steps, rng, LsMcmiOptions{c.start_floor}));
        });
        rec.m = fit->visited.size();
        rec.walks_completed = fit->stats.walks;
        rec.mean_walk_length = fit->stats.mean_walk_length();
        if (oracle) {
            ValueVector v(n);
            for (StateIndex s = 0; s < n; ++s) {
                v.values[s] = fit->value(phi, s);
                v.visited[s] = true;
            }
            estimate = std::move(v);
        }
        break;
    }
    }
    if (oracle && estimate) rec.rel_error = rel_residual_error(*estimate, *oracle);
    return rec;
}

} // namespace detail

/// One repetition. Generation and the oracle solve are excluded from wall_ms;
/// trajectory sampling is included for every estimator.
inline ResultRecord run_single(const ExperimentConfig& config, std::uint64_t repetition_index) {
    validate(config);
    const RngStream root = repetition_stream(config.base_seed, repetition_index);
    try {
        BuiltMrp built = build_mrp(config, root);
        if (auto* mrp = std::get_if<Mrp>(&built)) {
            std::optional<ValueVector> oracle;
            if (mrp->size() <= kOracleMaxStates) oracle = exact_value(*mrp);
            return detail::run_on(config, *mrp, root, oracle ? &*oracle : nullptr);
        }
        return detail::run_on(config, std::get<ProceduralMrp>(built), root, nullptr);
    } catch (const IoError&) {
        throw;
    } catch (const ValidationError& e) {
        std::ostringstream msg;
        msg << to_string(config.estimator) << " repetition " << repetition_index << ": " << e.what();
        throw ValidationError(msg.str());
    } catch (const Error& e) {
        std::ostringstream msg;
        msg << to_string(config.estimator) << " repetition " << repetition_index << ": " << e.what();
        throw Error(msg.str());
    }
}

namespace detail {

inline std::uint64_t as_count(double v, const std::string& param) {
    if (!(v >= 0.0) || std::floor(v) != v) throw ValidationError("sweep value for '" + param + "' must be a nonnegative integer");
    return static_cast<std::uint64_t>(v);
}

} // namespace detail

/// Returns `base` with sweep parameter `param` set to `value`.
inline ExperimentConfig apply_sweep_value(ExperimentConfig base, const std::string& param, double value) {
    const auto e = base.estimator;
    const bool procedural = base.mrp.kind == MrpSource::Kind::procedural;
    if (param == "t_steps" || param == "steps") {
        base.t_steps = detail::as_count(value, param);
    } else if (param == "gamma") {
        base.gamma = value;
    } else if (param == "lambda") {
        if (e != Estimator::td && e != Estimator::lstd)
            throw ValidationError(std::string("cannot sweep lambda for estimator ") + to_string(e));
        base.lambda = value;
    } else if (param == "alpha") {
        if (e != Estimator::td) throw ValidationError(std::string("cannot sweep alpha for estimator ") + to_string(e));
        base.alpha = value;
    } else if (param == "n") {
        if (base.mrp.kind == MrpSource::Kind::file) throw ValidationError("cannot sweep n for a file MRP");
        base.mrp.n = detail::as_count(value, param);
    } else if (param == "out_degree") {
        if (base.mrp.kind == MrpSource::Kind::file) throw ValidationError("cannot sweep out_degree for a file MRP");
        base.mrp.out_degree = detail::as_count(value, param);
    } else if (param == "m") {
        if (!procedural) throw ValidationError("m applies only to procedural MRPs");
        base.mrp.m = detail::as_count(value, param);
    } else if (param == "k") {
        if (!is_least_squares(e)) throw ValidationError(std::string("cannot sweep k for estimator ") + to_string(e));
        base.features = "gaussian:" + std::to_string(detail::as_count(value, param));
    } else if (param == "reward_stddev") {
        base.mrp.reward_stddev = value;
    } else {
        throw ValidationError("unknown sweep parameter '" + param + "'");
    }
    return base;
}

/// All (sweep value, repetition) runs in that order. Repetitions may run on
/// several threads; each owns its stream, so results do not depend on
/// scheduling (wall_ms aside).
inline std::vector<ResultRecord> run_sweep(const ExperimentConfig& config) {
    std::vector<ExperimentConfig> points;
    if (config.sweep) {
        if (config.sweep->values.empty()) throw ValidationError("sweep has no values");
        for (double v : config.sweep->values) points.push_back(apply_sweep_value(config, config.sweep->param, v));
    } else {
        points.push_back(config);
    }
    for (const auto& p : points) validate(p);

    const std::size_t reps = config.repetitions;
    std::vector<std::optional<ResultRecord>> slots(points.size() * reps);
    auto job = [&](std::size_t idx) { slots[idx] = run_single(points[idx / reps], idx % reps); };

    const unsigned threads = std::max(1u, config.threads);
    if (threads == 1 || slots.size() == 1) {
        for (std::size_t i = 0; i < slots.size(); ++i) job(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::exception_ptr> errors(threads);
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t)
            pool.emplace_back([&, t] {
                try {
                    for (std::size_t i = next++; i < slots.size(); i = next++) job(i);
                } catch (...) {
                    errors[t] = std::current_exception();
                    next = slots.size();
                }
            });
        for (auto& th : pool) th.join();
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
    }
    std::vector<ResultRecord> out;
    out.reserve(slots.size());
    for (auto& s : slots) out.push_back(std::move(*s));
    return out;
}

namespace detail {

inline std::string cell(const std::optional<double>& v) { return v ? io::format_double(*v) : std::string(); }
inline std::string cell(const std::optional<std::uint64_t>& v) { return v ? std::to_string(*v) : std::string(); }

} // namespace detail

inline std::string csv_row(const ResultRecord& r) {
    std::ostringstream os;
    os << r.estimator << ',' << r.n << ',' << r.t_steps << ',' << io::format_double(r.gamma) << ','
       << detail::cell(r.lambda) << ',' << detail::cell(r.alpha) << ',' << detail::cell(r.k) << ','
       << detail::cell(r.m) << ',' << r.seed << ',' << detail::cell(r.rel_error) << ',' << io::format_double(r.wall_ms)
       << ',' << detail::cell(r.walks_completed) << ',' << detail::cell(r.mean_walk_length);
    return os.str();
}

inline std::string to_csv(const std::vector<ResultRecord>& records) {
    std::string out = kCsvHeader;
    out += '\n';
    for (const auto& r : records) {
        out += csv_row(r);
        out += '\n';
    }
    return out;
}

/// Header plus one LF-terminated row per record.
inline void emit_csv(const std::vector<ResultRecord>& records, const std::string& path) {
    if (records.empty()) throw ValidationError("emit_csv: no records");
    io::write_file(path, to_csv(records));
}

/// Mean measurements of the records that share every configuration field.
struct Summary {
    std::string estimator;
    std::uint64_t n = 0;
    std::uint64_t t_steps = 0;
    double gamma = 0.0;
    std::uint64_t count = 0;
    std::optional<double> mean_rel_error;
    double mean_wall_ms = 0.0;
};

inline std::vector<Summary> summarize(const std::vector<ResultRecord>& records) {
    using Key = std::tuple<std::string, std::uint64_t, std::uint64_t, double, std::string>;
    std::map<Key, std::size_t> index;
    std::vector<Summary> out;
    std::vector<std::uint64_t> err_count;
    std::vector<double> err_sum, wall_sum;
    for (const auto& r : records) {
        const Key key{r.estimator, r.n, r.t_steps, r.gamma,
                      detail::cell(r.lambda) + "|" + detail::cell(r.alpha) + "|" + detail::cell(r.k)};
        auto [it, fresh] = index.try_emplace(key, out.size());
        if (fresh) {
            out.push_back({r.estimator, r.n, r.t_steps, r.gamma, 0, std::nullopt, 0.0});
            err_count.push_back(0);
            err_sum.push_back(0.0);
            wall_sum.push_back(0.0);
        }
        const std::size_t i = it->second;
        ++out[i].count;
        wall_sum[i] += r.wall_ms;
        if (r.rel_error) {
            ++err_count[i];
            err_sum[i] += *r.rel_error;
        }
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i].mean_wall_ms = wall_sum[i] / static_cast<double>(out[i].count);
        if (err_count[i] > 0) out[i].mean_rel_error = err_sum[i] / static_cast<double>(err_count[i]);
    }
    return out;
}

/// Experiment configs from a bench JSON file. Field names mirror
/// ExperimentConfig; "estimators": [...] expands to one config per estimator.
///
///   {"estimator": "mcmi", "mrp": {"kind": "random", "n": 300, "out_degree": 0},
///    "gamma": 0.8, "lambda": 0.9, "alpha": 0.5, "alpha_schedule": "fixed",
///    "t_steps": 20000, "features": "gaussian:100", "repetitions": 20,
///    "base_seed": 1, "sweep": {"param": "t_steps", "values": [2000, 20000]}}
///
/// "mrp" may also be a string path to an MRP JSON file. Unknown fields are
/// rejected.
inline std::vector<ExperimentConfig> configs_from_json(const io::json& j) {
    const std::string what = "bench config";
    if (!j.is_object()) throw ValidationError(what + ": expected an object");
    static const std::unordered_set<std::string> known{
        "estimator", "estimators", "mrp", "gamma", "lambda", "alpha", "alpha_schedule", "t_steps", "features",
        "repetitions", "base_seed", "sweep", "start_floor", "threads"};
    for (const auto& [key, _] : j.items())
        if (!known.contains(key)) throw ValidationError(what + ": unknown field '" + key + "'");

    ExperimentConfig base;
    try {
        if (j.contains("mrp")) {
            const auto& m = j.at("mrp");
            if (m.is_string()) {
                base.mrp.kind = MrpSource::Kind::file;
                base.mrp.path = m.get<std::string>();
            } else {
                const std::string kind = m.value("kind", std::string("random"));
                if (kind == "file") base.mrp.kind = MrpSource::Kind::file;
                else if (kind == "random") base.mrp.kind = MrpSource::Kind::random;
                else if (kind == "procedural") base.mrp.kind = MrpSource::Kind::procedural;
                else throw ValidationError(what + ": unknown mrp kind '" + kind + "'");
                base.mrp.path = m.value("path", std::string());
                base.mrp.n = m.value("n", base.mrp.n);
                base.mrp.out_degree = m.value("out_degree", base.mrp.out_degree);
                base.mrp.m = m.value("m", base.mrp.m);
                base.mrp.reward_stddev = m.value("reward_stddev", base.mrp.reward_stddev);
            }
        }
        if (j.contains("gamma")) base.gamma = j.at("gamma").get<double>();
        if (j.contains("lambda")) base.lambda = j.at("lambda").get<double>();
        base.alpha = j.value("alpha", base.alpha);
        if (j.contains("alpha_schedule")) {
            const auto s = j.at("alpha_schedule").get<std::string>();
            if (s == "fixed") base.alpha_schedule = AlphaSchedule::Kind::fixed;
            else if (s == "harmonic") base.alpha_schedule = AlphaSchedule::Kind::harmonic;
            else throw ValidationError(what + ": alpha_schedule must be fixed or harmonic");
        }
        base.t_steps = j.value("t_steps", base.t_steps);
        base.features = j.value("features", base.features);
        base.repetitions = j.value("repetitions", base.repetitions);
        base.base_seed = j.value("base_seed", base.base_seed);
        base.start_floor = j.value("start_floor", base.start_floor);
        base.threads = j.value("threads", base.threads);
        if (j.contains("sweep")) {
            const auto& sw = j.at("sweep");
            base.sweep = Sweep{sw.at("param").get<std::string>(), sw.at("values").get<std::vector<double>>()};
        }
        std::vector<std::string> names;
        if (j.contains("estimators")) names = j.at("estimators").get<std::vector<std::string>>();
        if (j.contains("estimator")) names.push_back(j.at("estimator").get<std::string>());
        if (names.empty()) throw ValidationError(what + ": no estimator given");
        std::vector<ExperimentConfig> out;
        // A shared lambda in a multi-estimator file applies to the estimators that use it.
        for (const auto& name : names) {
            ExperimentConfig c = base;
            c.estimator = parse_estimator(name);
            if (names.size() > 1 && c.estimator != Estimator::td && c.estimator != Estimator::lstd) c.lambda.reset();
            out.push_back(std::move(c));
        }
        return out;
    } catch (const io::json::exception& e) {
        throw ValidationError(what + ": " + e.what());
    }
}

} // namespace mcpe::bench
