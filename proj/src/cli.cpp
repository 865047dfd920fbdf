#include "dagsim/cli.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <thread>

#include "dagsim/csv.hpp"
#include "dagsim/error.hpp"
#include "dagsim/simulate.hpp"

namespace dagsim {

OutputFormat parse_format(const std::string& text) {
    if (text == "final") return OutputFormat::Final;
    if (text == "long") return OutputFormat::Long;
    if (text == "wide") return OutputFormat::Wide;
    if (text == "start-stop" || text == "start_stop") return OutputFormat::StartStop;
    fail(ErrorCode::ParseError, "format must be final, long, wide or start-stop");
}

std::string to_string(OutputFormat format) {
    switch (format) {
        case OutputFormat::Final: return "final";
        case OutputFormat::Long: return "long";
        case OutputFormat::Wide: return "wide";
        case OutputFormat::StartStop: return "start-stop";
    }
    return "final";
}

std::string cmd_summary(const SpecFile& spec) {
    std::string out;
    for (const auto& line : render_summary(spec.dag)) out += line + "\n";
    return out;
}

std::string cmd_graph(const SpecFile& spec) { return to_dot(spec.dag); }

std::string cmd_matrix(const SpecFile& spec) { return to_csv(adjacency_matrix(spec.dag)); }

namespace {

DataTable run_dt(const SpecFile& spec, const RunOptions& opt, const RngStream& rng) {
    if (opt.max_t < 1) fail(ErrorCode::ValidationError, "--max-t must be at least 1");
    const auto result = sim_discrete_time(spec.dag, opt.n, opt.max_t, opt.save_states, rng);
    try {
        switch (opt.format) {
            case OutputFormat::Final: return result.final_table;
            case OutputFormat::Long: return to_long(result);
            case OutputFormat::Wide: return to_wide(result);
            case OutputFormat::StartStop: return to_start_stop(result, opt.start_stop);
        }
    } catch (const Error& e) {
        if (e.code() == ErrorCode::InsufficientSavedStates)
            throw Error(e.code(), e.message() + " (use --save-states all)");
        throw;
    }
    return result.final_table;
}

}  // namespace

DataTable cmd_simulate(const SpecFile& spec, const RunOptions& opt) {
    return sim_from_dag(spec.dag, opt.n, RngStream(opt.seed));
}

DataTable cmd_simulate_dt(const SpecFile& spec, const RunOptions& opt) {
    if (!spec.dag.has_time_dependent())
        fail(ErrorCode::NoTimeDependentNode, "the spec has no time-dependent node; use simulate");
    return run_dt(spec, opt, RngStream(opt.seed));
}

DataTable simulate_dataset(const SpecFile& spec, const RunOptions& opt, const RngStream& rng) {
    if (spec.dag.has_time_dependent()) return run_dt(spec, opt, rng);
    return sim_from_dag(spec.dag, opt.n, rng);
}

std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        fail(ErrorCode::IOError, "SHA-256 computation failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 15];
    }
    return out;
}

ReplicateResult cmd_replicate(const SpecFile& spec, const RunOptions& opt, std::size_t replicates,
                              std::size_t workers, const std::string& out_dir, const std::string& pattern) {
    if (workers < 1) fail(ErrorCode::ValidationError, "--workers must be at least 1");
    if (pattern.find("{i}") == std::string::npos) fail(ErrorCode::ValidationError, "--pattern must contain {i}");
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) fail(ErrorCode::IOError, "cannot create '" + out_dir + "': " + ec.message());

    ReplicateResult res;
    res.files.resize(replicates);
    res.hashes.resize(replicates);
    for (std::size_t i = 0; i < replicates; ++i) {
        std::string file = pattern;
        for (auto pos = file.find("{i}"); pos != std::string::npos; pos = file.find("{i}"))
            file.replace(pos, 3, std::to_string(i + 1));
        res.files[i] = file;
    }

    const RngStream root(opt.seed);
    std::atomic<std::size_t> next{0};
    std::atomic<bool> stop{false};
    std::mutex error_mutex;
    std::optional<std::pair<std::size_t, Error>> first_error;

    auto work = [&] {
        while (!stop) {
            const std::size_t i = next++;
            if (i >= replicates) return;
            try {
                const auto table = simulate_dataset(spec, opt, root.split(i + 1));
                const std::string bytes = to_csv(table);
                const auto path = (fs::path(out_dir) / res.files[i]).string();
                std::ofstream out(path, std::ios::binary);
                if (!out) fail(ErrorCode::IOError, "cannot open '" + path + "' for writing");
                out << bytes;
                out.flush();
                if (!out) fail(ErrorCode::IOError, "failed writing '" + path + "'");
                res.hashes[i] = sha256_hex(bytes);
            } catch (const Error& e) {
                std::lock_guard lock(error_mutex);
                if (!first_error || i < first_error->first)
                    first_error.emplace(i, e.with_context("dataset " + std::to_string(i + 1)));
                stop = true;
            }
        }
    };
    std::vector<std::thread> pool;
    const std::size_t threads = std::min(workers, std::max<std::size_t>(replicates, 1));
    for (std::size_t w = 0; w < threads; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
    if (first_error) throw first_error->second;

    Json manifest = Json::object();
    manifest["tool"] = "dagsim";
    manifest["version"] = kToolVersion;
    manifest["seed"] = opt.seed;
    manifest["n"] = opt.n;
    if (spec.dag.has_time_dependent()) {
        manifest["max_t"] = opt.max_t;
        manifest["save_states"] = opt.save_states.to_string();
        manifest["format"] = to_string(opt.format);
        if (opt.format == OutputFormat::StartStop) {
            manifest["target_event"] = opt.start_stop.target_event ? Json(*opt.start_stop.target_event) : Json();
            manifest["overlap"] = opt.start_stop.overlap;
            manifest["keep_only_first"] = opt.start_stop.keep_only_first;
        }
    }
    manifest["replicates"] = replicates;
    manifest["workers"] = workers;
    manifest["spec_sha256"] = sha256_hex(spec.text);
    manifest["files"] = Json::array();
    for (std::size_t i = 0; i < replicates; ++i)
        manifest["files"].push_back({{"file", res.files[i]}, {"sha256", res.hashes[i]}});
    res.manifest_path = (fs::path(out_dir) / "manifest.json").string();
    std::ofstream out(res.manifest_path, std::ios::binary);
    if (!out) fail(ErrorCode::IOError, "cannot write '" + res.manifest_path + "'");
    out << manifest.dump(2) << "\n";
    if (!out) fail(ErrorCode::IOError, "failed writing '" + res.manifest_path + "'");
    return res;
}

std::vector<BenchCell> cmd_bench(const SpecFile& spec, const std::vector<std::size_t>& ns,
                                 const std::vector<int>& max_ts, int repetitions, const RunOptions& opt) {
    if (repetitions < 1) fail(ErrorCode::ValidationError, "repetitions must be at least 1");
    std::vector<BenchCell> cells;
    for (auto n : ns)
        for (int max_t : max_ts) {
            std::vector<double> secs;
            for (int r = 0; r < repetitions; ++r) {
                const auto t0 = std::chrono::steady_clock::now();
                const auto result =
                    sim_discrete_time(spec.dag, n, max_t, SavePolicy{}, RngStream(opt.seed).split(static_cast<std::uint64_t>(r)));
                const auto ss = to_start_stop(result, opt.start_stop);
                const auto t1 = std::chrono::steady_clock::now();
                if (ss.n_rows() == static_cast<std::size_t>(-1)) return {};  // keeps the transform observable
                secs.push_back(std::chrono::duration<double>(t1 - t0).count());
            }
            std::sort(secs.begin(), secs.end());
            const std::size_t m = secs.size();
            const double median = m % 2 ? secs[m / 2] : 0.5 * (secs[m / 2 - 1] + secs[m / 2]);
            cells.push_back({n, max_t, median, secs.front()});
        }
    return cells;
}

DataTable bench_table(const std::vector<BenchCell>& cells) {
    std::vector<double> n, t, med, mn;
    for (const auto& c : cells) {
        n.push_back(static_cast<double>(c.n));
        t.push_back(c.max_t);
        med.push_back(c.median_seconds);
        mn.push_back(c.min_seconds);
    }
    DataTable out(cells.size());
    out.set("n", Column(ColumnType::Integer, std::move(n)));
    out.set("max_t", Column(ColumnType::Integer, std::move(t)));
    out.set("median_seconds", Column(ColumnType::Real, std::move(med)));
    out.set("min_seconds", Column(ColumnType::Real, std::move(mn)));
    return out;
}

int exit_code(ErrorCode code) {
    switch (code) {
        case ErrorCode::IOError:
            return 4;
        case ErrorCode::DomainError:
        case ErrorCode::ProbabilityOutOfRange:
        case ErrorCode::RowNotNormalized:
        case ErrorCode::UnmappedCombination:
        case ErrorCode::NoMatchingComponent:
        case ErrorCode::UnknownColumn:
        case ErrorCode::UnknownLevel:
        case ErrorCode::TimeOutsideSimulation:
        case ErrorCode::InsufficientSavedStates:
            return 3;
        default:
            return 2;
    }
}

}  // namespace dagsim
