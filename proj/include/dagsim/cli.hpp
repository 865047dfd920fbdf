#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dagsim/dt_engine.hpp"
#include "dagsim/error.hpp"
#include "dagsim/spec_file.hpp"
#include "dagsim/transform.hpp"

namespace dagsim {

inline constexpr const char* kToolVersion = "1.0.0";

enum class OutputFormat { Final, Long, Wide, StartStop };

/// "final", "long", "wide", "start-stop". Throws ParseError.
OutputFormat parse_format(const std::string& text);
std::string to_string(OutputFormat format);

struct RunOptions {
    std::size_t n = 0;
    std::uint64_t seed = 0;
    int max_t = 0;
    SavePolicy save_states;
    OutputFormat format = OutputFormat::Final;
    StartStopOptions start_stop;
};

std::string cmd_summary(const SpecFile& spec);
std::string cmd_graph(const SpecFile& spec);
std::string cmd_matrix(const SpecFile& spec);

/// Cross-sectional data. Throws TdNodePresent for DAGs with time-dependent nodes.
DataTable cmd_simulate(const SpecFile& spec, const RunOptions& opt);

/// Discrete-time run followed by the requested transform.
DataTable cmd_simulate_dt(const SpecFile& spec, const RunOptions& opt);

/// One dataset from `rng`: cross-sectional or discrete-time depending on the DAG.
DataTable simulate_dataset(const SpecFile& spec, const RunOptions& opt, const RngStream& rng);

/// Lowercase hex SHA-256.
std::string sha256_hex(const std::string& bytes);

struct ReplicateResult {
    std::vector<std::string> files;
    std::vector<std::string> hashes;
    std::string manifest_path;
};

/// Writes `replicates` datasets into `out_dir` (dataset i from split(root, i),
/// i = 1..replicates) using `workers` threads, plus manifest.json. `pattern`
/// must contain "{i}". Output bytes do not depend on the worker count.
/// Stops at the first failure; throws IOError / generation errors.
ReplicateResult cmd_replicate(const SpecFile& spec, const RunOptions& opt, std::size_t replicates,
                              std::size_t workers, const std::string& out_dir, const std::string& pattern);

struct BenchCell {
    std::size_t n;
    int max_t;
    double median_seconds;
    double min_seconds;
};

/// Times sim_discrete_time plus the start-stop transform for each (n, max_t)
/// cell; median over `repetitions`.
std::vector<BenchCell> cmd_bench(const SpecFile& spec, const std::vector<std::size_t>& ns,
                                 const std::vector<int>& max_ts, int repetitions, const RunOptions& opt);
DataTable bench_table(const std::vector<BenchCell>& cells);

/// Exit status for an error: 2 for spec/validation problems, 3 for generation
/// failures, 4 for I/O.
int exit_code(ErrorCode code);

}  // namespace dagsim
