// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>
#include <vector>

#include "mcpe/mcpe.hpp"
#include "oracles.hpp"

using namespace mcpe;

namespace {

int failures = 0;

void report(int id, bool pass, const std::string& detail) {
    std::cout << "criterion " << id << ": " << (pass ? "PASS" : "FAIL") << "  " << detail << std::endl;
    if (!pass) ++failures;
}

std::string fmt(double x) {
    std::ostringstream s;
    s.precision(4);
    s << x;
    return s.str();
}

double median(std::vector<double> xs) {
    std::sort(xs.begin(), xs.end());
    const std::size_t h = xs.size() / 2;
    return xs.size() % 2 ? xs[h] : 0.5 * (xs[h - 1] + xs[h]);
}

bench::ExperimentConfig random_config(bench::Estimator e, std::uint64_t n, std::uint64_t t, double gamma) {
    bench::ExperimentConfig c;
    c.estimator = e;
    c.mrp.kind = bench::MrpSource::Kind::random;
    c.mrp.n = n;
    c.t_steps = t;
    c.gamma = gamma;
    c.repetitions = 20;
    return c;
}

double mean_error(const bench::ExperimentConfig& c) {
    double sum = 0.0;
    const auto records = bench::run_sweep(c);
    for (const auto& r : records) sum += *r.rel_error;
    return sum / static_cast<double>(records.size());
}

double median_wall(const bench::ExperimentConfig& c, std::uint64_t reps) {
    std::vector<double> ms;
    for (std::uint64_t r = 0; r < reps; ++r) ms.push_back(bench::run_single(c, r).wall_ms);
    return median(ms);
}

// 1. Exact solve residual and agreement with a truncated series.
void oracle_correctness() {
    const std::array<std::size_t, 3> sizes{5, 50, 300};
    const std::array<double, 3> gammas{0.5, 0.8, 0.9};
    double worst_residual = 0.0, worst_margin = -1.0;
    bool ok = true;
    for (std::uint64_t k = 0; k < 50; ++k) {
        const std::size_t n = sizes[k % 3];
        const double g = gammas[(k / 3) % 3];
        const std::size_t deg = k % 2 ? n : std::max<std::size_t>(1, n / 5);
        const Mrp m = random_mrp(n, deg, {}, RngStream{1000 + k, 0}, g);
        const auto v = exact_value(m);
        const double res = bellman_residual(m, v.values);
        worst_residual = std::max(worst_residual, res);
        ok = ok && res <= 1e-9;
        // Truncate where the tail bound gamma^(K+1) rmax / (1 - gamma) falls near 1e-6.
        const int terms = static_cast<int>(std::ceil(std::log(1e-6 * (1.0 - g)) / std::log(g)));
        const auto series = oracle::truncated_value(m, terms);
        double rmax = 0.0;
        for (double r : m.rewards().mean()) rmax = std::max(rmax, std::abs(r));
        const double bound = std::pow(g, terms + 1) * rmax / (1.0 - g);
        for (std::size_t i = 0; i < n; ++i) {
            const double gap = std::abs(v[i] - series[i]);
            worst_margin = std::max(worst_margin, gap / bound);
            // The bound is attained by chains that end in the top-reward absorbing
            // state, so allow rounding of a few ulps of the value itself.
            const double slack = 16.0 * std::numeric_limits<double>::epsilon() * std::abs(v[i]);
            ok = ok && gap <= bound + slack;
        }
    }
    report(1, ok, "50 MRPs, worst residual " + fmt(worst_residual) + ", worst gap/tail bound " + fmt(worst_margin));
}

// 2. Length of geometric walks at gamma 0.8.
void walk_length_law() {
    const Mrp m = random_mrp(20, 20, {}, RngStream{2000, 0}, 0.8);
    const auto split = discounted_split(m);
    Rng rng(RngStream{2000, 1});
    const int walks = 1000000;
    double sum = 0.0, sumsq = 0.0;
    for (int w = 0; w < walks; ++w) {
        const double len = static_cast<double>(run_walk(split, static_cast<StateIndex>(w % 20), rng).length);
        sum += len;
        sumsq += len * len;
    }
    const double mean = sum / walks;
    const double var = (sumsq - walks * mean * mean) / (walks - 1);
    const bool ok = std::abs(mean - 4.0) <= 0.02 * 4.0 && std::abs(var - 20.0) <= 0.05 * 20.0;
    report(2, ok, "mean " + fmt(mean) + " (4.0 +-2%), variance " + fmt(var) + " (20.0 +-5%)");
}

// 3 and 4. Row estimates of (I - gamma P)^-1 on a fixed 5-state MRP.
void inverse_entries() {
    const double g = 0.8;
    const Mrp m = random_mrp(5, 5, {}, RngStream{3000, 0}, g);
    const auto split = discounted_split(m);
    const auto ref = neumann_reference(g * m.transitions().to_dense(), 1e-13);
    const std::uint64_t walks = 1000000;
    bool unbiased = true, variance_ok = true;
    double worst_z = 0.0, worst_rel = 0.0, max_var = 0.0;
    for (StateIndex i = 0; i < 5; ++i) {
        Rng rng(RngStream{3000, 1 + i});
        const auto row = estimate_row_stats(split, i, walks, rng);
        for (std::size_t j = 0; j < 5; ++j) {
            const double x = ref.inverse(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            const double pred = mcmi_variance_pred(x, g);
            const double se = std::sqrt(pred / static_cast<double>(walks));
            const double dev = std::abs(row.mean[j] - x);
            worst_z = std::max(worst_z, se > 0.0 ? dev / se : (dev > 0.0 ? INFINITY : 0.0));
            unbiased = unbiased && dev <= 4.0 * se;
            const double rel = pred > 0.0 ? std::abs(row.variance[j] - pred) / pred : (row.variance[j] > 0.0 ? INFINITY : 0.0);
            worst_rel = std::max(worst_rel, rel);
            max_var = std::max(max_var, row.variance[j]);
            variance_ok = variance_ok && rel <= 0.05 && row.variance[j] <= 1.0 / (4.0 * (1.0 - g) * (1.0 - g));
        }
    }
    report(3, unbiased, "25 entries, worst |error| / predicted SE " + fmt(worst_z) + " (limit 4)");
    report(4, variance_ok,
           "worst relative variance gap " + fmt(worst_rel) + " (limit 0.05), max variance " + fmt(max_var) +
               " (limit 6.25)");
}

// 5. Estimated rows sum to 1 / (1 - gamma).
void row_sum_identity() {
    bool ok = true;
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const double g = seed % 3 == 0 ? 0.5 : seed % 3 == 1 ? 0.8 : 0.9;
        const std::size_t n = 2 + seed % 30;
        const Mrp m = random_mrp(n, 1 + seed % n, {}, RngStream{5000 + seed, 0}, g);
        Rng rng(RngStream{5000 + seed, 1});
        const auto row = estimate_row(discounted_split(m), seed % n, 1 + (seed * 97) % 5000, rng);
        double sum = 0.0;
        for (double x : row) sum += x;
        const double gap = std::abs(sum - 1.0 / (1.0 - g));
        worst = std::max(worst, gap);
        ok = ok && gap <= 1e-12;
    }
    report(5, ok, "200 seeds, worst |row sum - 1/(1-gamma)| " + fmt(worst));
}

// 6 and 7. Error orderings at N = 300.
void error_orderings() {
    using bench::Estimator;
    const double small_t = mean_error(random_config(Estimator::mcmi, 300, 2000, 0.8));
    const double g5 = mean_error(random_config(Estimator::mcmi, 300, 20000, 0.5));
    const double g8 = mean_error(random_config(Estimator::mcmi, 300, 20000, 0.8));
    const double g9 = mean_error(random_config(Estimator::mcmi, 300, 20000, 0.9));
    report(6, g8 < small_t && g5 < g8 && g8 < g9,
           "T=2000: " + fmt(small_t) + ", T=20000: " + fmt(g8) + "; gamma 0.5/0.8/0.9: " + fmt(g5) + " / " + fmt(g8) +
               " / " + fmt(g9));

    auto td_c = random_config(Estimator::td, 300, 20000, 0.8);
    td_c.lambda = 0.9;
    td_c.alpha = 0.5;
    const double td = mean_error(td_c);
    const double ml = mean_error(random_config(Estimator::ml, 300, 20000, 0.8));
    const double mc = g8;
    report(7, mc < td && ml < td && mc <= 2.0 * ml,
           "mcmi " + fmt(mc) + ", td " + fmt(td) + ", ml " + fmt(ml) + "; mcmi/ml " + fmt(mc / ml) + " (limit 2)");
}

// 8. Wall time growth from N = 100 to N = 800 at T = 20000.
void time_scaling() {
    using bench::Estimator;
    double ratio[3] = {0.0, 0.0, 0.0};
    const Estimator ests[3] = {Estimator::td, Estimator::mcmi, Estimator::ml};
    std::string detail;
    for (int e = 0; e < 3; ++e) {
        std::vector<double> t;
        for (std::uint64_t n : {100u, 200u, 400u, 800u}) t.push_back(median_wall(random_config(ests[e], n, 20000, 0.8), 9));
        ratio[e] = t[3] / t[0];
        detail += std::string(e ? ", " : "") + bench::to_string(ests[e]) + " " + fmt(ratio[e]);
    }
    report(8, ratio[0] <= 12.0 && ratio[1] <= 12.0 && ratio[2] > ratio[0] && ratio[2] > ratio[1],
           "time(800)/time(100): " + detail + " (td, mcmi <= 12; ml above both)");
}

// 9. Least-squares methods on procedural MRPs do not slow down with N.
void procedural_timing() {
    using bench::Estimator;
    bool ok = true;
    std::string detail;
    for (Estimator e : {Estimator::lstd, Estimator::lsmcmi}) {
        std::vector<double> t;
        for (std::uint64_t n : {1000u, 10000u, 100000u}) {
            bench::ExperimentConfig c;
            c.estimator = e;
            c.mrp.kind = bench::MrpSource::Kind::procedural;
            c.mrp.n = n;
            c.mrp.m = 100;
            c.features = "gaussian:100";
            c.t_steps = 20000;
            t.push_back(median_wall(c, 9));
        }
        const auto [lo, hi] = std::minmax_element(t.begin(), t.end());
        const double spread = (*hi - *lo) / *lo;
        ok = ok && spread < 0.25;
        detail += std::string(detail.empty() ? "" : ", ") + bench::to_string(e) + " " + fmt(t[0]) + "/" + fmt(t[1]) +
                  "/" + fmt(t[2]) + " ms (spread " + fmt(spread) + ")";
    }
    report(9, ok, detail + "; limit 0.25");
}

// 10. Identity-feature equivalences.
void identity_features() {
    bool bitwise = true;
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Mrp m = random_mrp(30, 6, {}, RngStream{10000 + seed, 0});
        Rng a(RngStream{10000 + seed, 1}), b(RngStream{10000 + seed, 1});
        const auto plain = mcmi_evaluate(m, m.gamma(), 20000, a);
        const auto phi = FeatureMatrix::identity(30);
        const auto ls = ls_mcmi_evaluate(m, phi, m.gamma(), 20000, b);
        for (StateIndex s : ls.visited.states()) bitwise = bitwise && ls.value(phi, s) == plain.values.values[s];
        bitwise = bitwise && ls.visited.size() == plain.values.visited_count();

        const Mrp d = random_mrp(6, 6, {}, RngStream{10100 + seed, 0});
        Rng c(RngStream{10100 + seed, 1});
        const auto stream = sample_stream(d, {SamplingMode::single_random_walk}, 5000, c);
        const auto ml = ml_value(ml_fit(stream, 6), d.gamma());
        const auto phi6 = FeatureMatrix::identity(6);
        const auto l = lstd_evaluate(stream, phi6, d.gamma(), 0.0);
        for (StateIndex s = 0; s < 6; ++s) worst = std::max(worst, std::abs(l.value(phi6, s) - ml.values[s]));
    }
    report(10, bitwise && worst <= 1e-8,
           std::string("ls-mcmi vs mcmi ") + (bitwise ? "bit-identical" : "differ") + ", |lstd - ml| max " + fmt(worst) +
               " (limit 1e-8)");
}

// 11. ML error falls with T; harmonic TD reaches the single-state value.
void consistency() {
    const Mrp mrp = random_mrp(10, 10, {}, RngStream{11000, 0});
    const auto truth = exact_value(mrp);
    std::vector<double> err;
    for (std::size_t t : {1000u, 10000u, 100000u}) {
        double sum = 0.0;
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            Rng rng(RngStream{11000 + seed, 1});
            const auto s = sample_stream(mrp, {SamplingMode::single_random_walk}, t, rng);
            sum += rel_residual_error(ml_value(ml_fit(s, 10), mrp.gamma()), truth);
        }
        err.push_back(sum / 20.0);
    }
    const Mrp one = make_mrp({{1.0}}, {1.0}, 0.8);
    Rng rng(RngStream{11100, 0});
    const auto s = sample_stream(one, {SamplingMode::single_random_walk}, 100000, rng);
    const double v = td_lambda(s, 1, 0.8, 0.9, AlphaSchedule::harmonic(1.0)).values[0];
    report(11, err[0] > err[1] && err[1] > err[2] && std::abs(v - 5.0) < 0.05,
           "ml error " + fmt(err[0]) + " > " + fmt(err[1]) + " > " + fmt(err[2]) + ", td |v - 5| " +
               fmt(std::abs(v - 5.0)) + " (limit 0.05)");
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(MCPE_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// CSV text with the wall_ms column blanked.
std::string without_wall(const std::string& csv) {
    std::istringstream in(csv);
    std::string line, out;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ls(line);
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (!line.empty() && line.back() == ',') cells.emplace_back();
        if (cells.size() > 10) cells[10].clear();
        for (std::size_t i = 0; i < cells.size(); ++i) out += (i ? "," : "") + cells[i];
        out += '\n';
    }
    return out;
}

// 12. Repeated CLI runs give identical CSV apart from wall_ms.
void cli_determinism() {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / ("mcpe_accept_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    const auto p = [&](const std::string& f) { return (dir / f).string(); };
    std::ofstream(p("cfg.json")) << R"({"estimators": ["td", "ml", "mcmi"], "mrp": {"kind": "random", "n": 40},
        "t_steps": 3000, "repetitions": 3, "sweep": {"param": "gamma", "values": [0.5, 0.9]}})";
    const std::vector<std::string> runs = {
        "eval --estimator td --random 50,0 --steps 5000 --reps 3 --seed 7",
        "eval --estimator ml --random 50,0 --gamma 0.9 --steps 5000 --reps 3 --seed 7",
        "eval --estimator mcmi --random 50,0 --steps 5000 --reps 3 --seed 7",
        "eval --estimator lstd --procedural 10000,60,0 --features gaussian:20 --steps 5000 --reps 2",
        "eval --estimator lsmcmi --procedural 10000,60,0 --features gaussian:20 --steps 5000 --reps 2",
        "bench --config " + p("cfg.json"),
    };
    bool ok = true;
    std::string failed;
    for (std::size_t k = 0; k < runs.size(); ++k) {
        const int a = run_cli(runs[k] + " --out " + p("a.csv"));
        const int b = run_cli(runs[k] + " --out " + p("b.csv"));
        const bool same = a == 0 && b == 0 && without_wall(io::read_file(p("a.csv"))) == without_wall(io::read_file(p("b.csv")));
        if (!same) failed += " [" + runs[k] + "]";
        ok = ok && same;
    }
    fs::remove_all(dir);
    report(12, ok, std::to_string(runs.size()) + " invocations repeated" + (ok ? ", identical" : ", differing:" + failed));
}

} // namespace

int main() {
    const std::vector<void (*)()> checks = {oracle_correctness, walk_length_law,   inverse_entries,
                                            row_sum_identity,   error_orderings,   time_scaling,
                                            procedural_timing,  identity_features, consistency,
                                            cli_determinism};
    for (auto check : checks) {
        try {
            check();
        } catch (const std::exception& e) {
            std::cout << "error: " << e.what() << std::endl;
            ++failures;
        }
    }
    std::cout << (failures ? "acceptance: FAILED (" + std::to_string(failures) + ")" : std::string("acceptance: all passed"))
              << std::endl;
    return failures ? 1 : 0;
}
