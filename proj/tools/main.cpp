#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "dagsim/cli.hpp"
#include "dagsim/csv.hpp"
#include "dagsim/error.hpp"

using namespace dagsim;

namespace {

struct Flags {
    std::string spec;
    std::optional<std::size_t> n;
    std::optional<std::uint64_t> seed;
    int max_t = 0;
    std::string save_states = "last";
    std::string format = "final";
    std::string target_event;
    bool overlap = false;
    bool keep_only_first = false;
    std::string out;
    std::size_t replicates = 1;
    std::size_t workers = 1;
    std::string pattern = "rep_{i}.csv";
    std::vector<std::size_t> bench_n{1000};
    std::vector<int> bench_t{10, 100, 730};
    int reps = 5;
};

void write_text(const std::string& text, const std::string& out) {
    if (out.empty() || out == "-") {
        std::cout << text;
        return;
    }
    std::ofstream f(out, std::ios::binary);
    if (!f) fail(ErrorCode::IOError, "cannot open '" + out + "' for writing");
    f << text;
    if (!f) fail(ErrorCode::IOError, "failed writing '" + out + "'");
}

std::uint64_t resolve_seed(const Flags& f, const SpecFile& spec) {
    if (f.seed) return *f.seed;
    if (spec.seed) return *spec.seed;
    if (const char* env = std::getenv("DAGSIM_SEED")) {
        try {
            std::size_t used = 0;
            const auto v = std::stoull(env, &used);
            if (used == std::string(env).size()) return v;
        } catch (const std::exception&) {
        }
        fail(ErrorCode::ParseError, "DAGSIM_SEED must be an unsigned integer");
    }
    return 1;
}

RunOptions run_options(const Flags& f, const SpecFile& spec, bool need_n) {
    RunOptions o;
    if (f.n) o.n = *f.n;
    else if (spec.n) o.n = *spec.n;
    else if (need_n) fail(ErrorCode::ValidationError, "--n is required (or set defaults.n in the spec)");
    o.seed = resolve_seed(f, spec);
    o.max_t = f.max_t;
    o.save_states = SavePolicy::parse(f.save_states);
    o.format = parse_format(f.format);
    if (!f.target_event.empty()) o.start_stop.target_event = f.target_event;
    o.start_stop.overlap = f.overlap;
    o.start_stop.keep_only_first = f.keep_only_first;
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Simulate data from DAG-based structural equation models"};
    app.set_version_flag("--version", kToolVersion);
    app.require_subcommand(1);
    Flags f;

    auto add_spec = [&](CLI::App* c) { c->add_option("--spec", f.spec, "spec file (JSON)")->required(); };
    auto add_out = [&](CLI::App* c) { c->add_option("--out", f.out, "output file (default stdout)"); };
    auto add_run = [&](CLI::App* c) {
        c->add_option("--n", f.n, "number of individuals");
        c->add_option("--seed", f.seed, "root seed (env DAGSIM_SEED otherwise)");
    };
    auto add_dt = [&](CLI::App* c) {
        c->add_option("--max-t", f.max_t, "number of time steps");
        c->add_option("--save-states", f.save_states, "last, all or at:<t1,t2,...>");
        c->add_option("--format", f.format, "final, long, wide or start-stop");
        c->add_option("--target-event", f.target_event, "time_to_event node used as start-stop outcome");
        c->add_flag("--overlap", f.overlap, "start of each interval equals the previous stop");
        c->add_flag("--keep-only-first", f.keep_only_first, "drop rows after the first target event");
    };

    auto* summary = app.add_subcommand("summary", "print the structural equations");
    auto* graph = app.add_subcommand("graph", "print the DAG in DOT format");
    auto* matrix = app.add_subcommand("matrix", "print the adjacency matrix as CSV");
    for (auto* c : {summary, graph, matrix}) {
        add_spec(c);
        add_out(c);
    }
    auto* simulate = app.add_subcommand("simulate", "cross-sectional dataset");
    add_spec(simulate);
    add_run(simulate);
    add_out(simulate);
    auto* simulate_dt = app.add_subcommand("simulate-dt", "discrete-time simulation");
    add_spec(simulate_dt);
    add_run(simulate_dt);
    add_dt(simulate_dt);
    add_out(simulate_dt);
    simulate_dt->get_option("--max-t")->required();
    auto* replicate = app.add_subcommand("replicate", "many datasets plus manifest.json");
    add_spec(replicate);
    add_run(replicate);
    add_dt(replicate);
    replicate->add_option("--out", f.out, "output directory")->required();
    replicate->add_option("--replicates", f.replicates, "number of datasets")->required();
    replicate->add_option("--workers", f.workers, "worker threads");
    replicate->add_option("--pattern", f.pattern, "file name pattern containing {i}");
    auto* bench = app.add_subcommand("bench", "runtime grid for the discrete-time simulation");
    add_spec(bench);
    add_out(bench);
    bench->add_option("--seed", f.seed, "root seed");
    bench->add_option("--n", f.bench_n, "values of n")->expected(1, -1);
    bench->add_option("--max-t", f.bench_t, "values of max_t")->expected(1, -1);
    bench->add_option("--reps", f.reps, "repetitions per cell");
    bench->add_option("--target-event", f.target_event, "start-stop outcome");
    bench->add_flag("--overlap", f.overlap, "overlapping intervals");

    CLI11_PARSE(app, argc, argv);

    try {
        const SpecFile spec = load_spec(f.spec);
        if (summary->parsed()) write_text(cmd_summary(spec), f.out);
        else if (graph->parsed()) write_text(cmd_graph(spec), f.out);
        else if (matrix->parsed()) write_text(cmd_matrix(spec), f.out);
        else if (simulate->parsed()) write_text(to_csv(cmd_simulate(spec, run_options(f, spec, true))), f.out);
        else if (simulate_dt->parsed()) write_text(to_csv(cmd_simulate_dt(spec, run_options(f, spec, true))), f.out);
        else if (replicate->parsed()) {
            const auto res = cmd_replicate(spec, run_options(f, spec, true), f.replicates, f.workers, f.out, f.pattern);
            std::cerr << "wrote " << res.files.size() << " datasets and " << res.manifest_path << "\n";
        } else if (bench->parsed()) {
            const auto opt = run_options(f, spec, false);
            write_text(to_csv(bench_table(cmd_bench(spec, f.bench_n, f.bench_t, f.reps, opt))), f.out);
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code(e.code());
    }
    return 0;
}
