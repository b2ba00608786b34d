// Command-line front end for the policy-evaluation toolkit.
//
// Exit codes: 0 success, 1 validation error, 2 I/O error.

#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "mcpe/mcpe.hpp"

namespace {

using namespace mcpe;

constexpr int kExitValidation = 1;
constexpr int kExitIo = 2;

// Splits "a,b,c" into unsigned integers.
std::vector<std::uint64_t> parse_list(const std::string& s, std::size_t expected, const char* flag) {
    std::vector<std::uint64_t> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stoull(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ValidationError(std::string(flag) + ": '" + s + "' is not a comma-separated integer list");
        }
    }
    if (out.size() != expected)
        throw ValidationError(std::string(flag) + ": expected " + std::to_string(expected) + " integers");
    return out;
}

void print_summary(const std::vector<bench::ResultRecord>& records) {
    for (const auto& s : bench::summarize(records)) {
        std::printf("%-7s n=%llu T=%llu gamma=%s reps=%llu mean_rel_error=%s mean_wall_ms=%.3f\n",
                    s.estimator.c_str(), static_cast<unsigned long long>(s.n),
                    static_cast<unsigned long long>(s.t_steps), io::format_double(s.gamma).c_str(),
                    static_cast<unsigned long long>(s.count),
                    s.mean_rel_error ? io::format_double(*s.mean_rel_error).c_str() : "-", s.mean_wall_ms);
    }
}

struct Overrides {
    std::optional<double> gamma, lambda, alpha;
    std::optional<std::string> alpha_schedule;
    std::optional<std::uint64_t> steps, seed, reps;
    std::optional<std::string> features;
    std::optional<unsigned> threads;

    void add_to(CLI::App* app) {
        app->add_option("--gamma", gamma, "discount factor in (0, 1)");
        app->add_option("--lambda", lambda, "trace decay for td / lstd");
        app->add_option("--alpha", alpha, "TD step size");
        app->add_option("--alpha-schedule", alpha_schedule, "fixed or harmonic")->check(CLI::IsMember({"fixed", "harmonic"}));
        app->add_option("--steps", steps, "sampling steps T");
        app->add_option("--features", features, "identity | constant | gaussian:K | FILE");
        app->add_option("--seed", seed, "base seed");
        app->add_option("--reps", reps, "repetitions");
        app->add_option("--threads", threads, "worker threads for repetitions");
    }

    // With skip_inapplicable, --lambda leaves estimators without a trace parameter alone.
    void apply(bench::ExperimentConfig& c, bool skip_inapplicable = false) const {
        if (gamma) c.gamma = gamma;
        if (lambda && (!skip_inapplicable || c.estimator == bench::Estimator::td || c.estimator == bench::Estimator::lstd))
            c.lambda = lambda;
        if (alpha) c.alpha = *alpha;
        if (alpha_schedule)
            c.alpha_schedule = *alpha_schedule == "harmonic" ? AlphaSchedule::Kind::harmonic : AlphaSchedule::Kind::fixed;
        if (steps) c.t_steps = *steps;
        if (seed) c.base_seed = *seed;
        if (reps) c.repetitions = *reps;
        if (features) c.features = *features;
        if (threads) c.threads = *threads;
    }
};

int run(int argc, char** argv) {
    CLI::App app{"Policy evaluation for discounted Markov reward processes"};
    app.require_subcommand(1);

    // gen
    auto* gen = app.add_subcommand("gen", "write a random MRP as JSON");
    std::uint64_t gen_n = 0, gen_deg = 0, gen_seed = 0;
    double gen_gamma = 0.8, gen_stddev = 0.0;
    std::string gen_out;
    gen->add_option("--n", gen_n, "state count")->required();
    gen->add_option("--out-degree", gen_deg, "successors per state")->required();
    gen->add_option("--seed", gen_seed, "seed")->required();
    gen->add_option("--out", gen_out, "output file")->required();
    gen->add_option("--gamma", gen_gamma, "discount factor stored in the file");
    gen->add_option("--reward-stddev", gen_stddev, "Gaussian reward noise");

    // exact
    auto* exact = app.add_subcommand("exact", "write the direct-solve value vector as JSON");
    std::string exact_mrp, exact_out;
    exact->add_option("--mrp", exact_mrp, "MRP JSON file")->required();
    exact->add_option("--out", exact_out, "output file")->required();

    // eval
    auto* eval = app.add_subcommand("eval", "run one estimator and write per-repetition CSV");
    std::string eval_estimator, eval_mrp, eval_procedural, eval_random, eval_out;
    Overrides eval_over;
    eval->add_option("--estimator", eval_estimator, "td|ml|mcmi|lstd|lsmcmi")->required();
    auto* mrp_opt = eval->add_option("--mrp", eval_mrp, "MRP JSON file");
    auto* proc_opt = eval->add_option("--procedural", eval_procedural, "procedural MRP n,m,deg");
    auto* rand_opt = eval->add_option("--random", eval_random, "random MRP n,deg (deg 0 = dense)");
    mrp_opt->excludes(proc_opt)->excludes(rand_opt);
    proc_opt->excludes(rand_opt);
    eval->add_option("--out", eval_out, "CSV output file")->required();
    eval_over.add_to(eval);

    // bench
    auto* benchc = app.add_subcommand("bench", "run a sweep from a JSON config");
    std::string bench_config, bench_out;
    Overrides bench_over;
    benchc->add_option("--config", bench_config, "config JSON file")->required();
    benchc->add_option("--out", bench_out, "CSV output file")->required();
    bench_over.add_to(benchc);

    // inverse
    auto* inv = app.add_subcommand("inverse", "estimate one entry of (I - M)^-1 by random walks");
    std::string inv_matrix, inv_entry;
    std::uint64_t inv_walks = 100000, inv_seed = 0;
    inv->add_option("--matrix", inv_matrix, "matrix JSON {\"matrix\": [[...]]} or MRP JSON (M = gamma P)")->required();
    inv->add_option("--entry", inv_entry, "I,J")->required();
    inv->add_option("--walks", inv_walks, "number of walks");
    inv->add_option("--seed", inv_seed, "seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitValidation;
    }

    if (gen->parsed()) {
        const Mrp mrp = random_mrp(gen_n, gen_deg, {0.0, 1.0},
                                   bench::repetition_stream(gen_seed, 0).substream(bench::kGenerateTag), gen_gamma,
                                   gen_stddev);
        io::write_mrp(mrp, gen_out);
        return 0;
    }
    if (exact->parsed()) {
        const Mrp mrp = io::read_mrp(exact_mrp);
        io::write_file(exact_out, io::values_to_json(exact_value(mrp)));
        return 0;
    }
    if (eval->parsed()) {
        bench::ExperimentConfig c;
        c.estimator = bench::parse_estimator(eval_estimator);
        if (!eval_mrp.empty()) {
            c.mrp.kind = bench::MrpSource::Kind::file;
            c.mrp.path = eval_mrp;
        } else if (!eval_procedural.empty()) {
            const auto v = parse_list(eval_procedural, 3, "--procedural");
            c.mrp.kind = bench::MrpSource::Kind::procedural;
            c.mrp.n = v[0];
            c.mrp.m = v[1];
            c.mrp.out_degree = v[2];
        } else if (!eval_random.empty()) {
            const auto v = parse_list(eval_random, 2, "--random");
            c.mrp.kind = bench::MrpSource::Kind::random;
            c.mrp.n = v[0];
            c.mrp.out_degree = v[1];
        } else {
            throw ValidationError("eval needs one of --mrp, --procedural, --random");
        }
        eval_over.apply(c);
        const auto records = bench::run_sweep(c);
        bench::emit_csv(records, eval_out);
        print_summary(records);
        return 0;
    }
    if (benchc->parsed()) {
        auto configs = bench::configs_from_json(io::parse(io::read_file(bench_config), bench_config));
        std::vector<bench::ResultRecord> all;
        for (auto& c : configs) {
            bench_over.apply(c, true);
            auto records = bench::run_sweep(c);
            all.insert(all.end(), records.begin(), records.end());
        }
        bench::emit_csv(all, bench_out);
        print_summary(all);
        return 0;
    }
    if (inv->parsed()) {
        const auto j = io::parse(io::read_file(inv_matrix), inv_matrix);
        Eigen::MatrixXd m;
        SplitMatrix split;
        if (j.contains("matrix")) {
            m = io::matrix_from_json(j);
            split = default_split(m);
        } else {
            const Mrp mrp = io::mrp_from_json(j);
            m = mrp.gamma() * mrp.transitions().to_dense();
            split = discounted_split(mrp);
        }
        const auto ij = parse_list(inv_entry, 2, "--entry");
        if (ij[0] >= split.size() || ij[1] >= split.size()) throw ValidationError("--entry: index out of range");
        if (inv_walks == 0) throw ValidationError("--walks must be positive");
        Rng rng(RngStream{inv_seed, 0});
        const auto est = estimate_entry_stats(split, ij[0], ij[1], inv_walks, rng);
        std::printf("estimate %s\nstd_error %s\n", io::format_double(est.mean).c_str(),
                    io::format_double(est.std_error).c_str());
        if (split.size() <= 1000) {
            const auto ref = neumann_reference(m, 1e-12);
            std::printf("neumann %s\n", io::format_double(ref.inverse(static_cast<Eigen::Index>(ij[0]),
                                                                      static_cast<Eigen::Index>(ij[1])))
                                            .c_str());
        }
        return 0;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const mcpe::IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitIo;
    } catch (const mcpe::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    }
}
