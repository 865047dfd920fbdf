#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "dagsim/dag.hpp"
#include "dagsim/random.hpp"
#include "dagsim/table.hpp"

namespace dagsim {

/// Cross-sectional generation: every node in topological order, node i drawing
/// from rng.split(i) where i is its insertion position. Columns appear in
/// generation order, multi-column nodes expanded in place.
/// Throws TdNodePresent when the DAG has time-dependent nodes.
DataTable sim_from_dag(const DagSpec& dag, std::size_t n, const RngStream& rng);

/// Generates the time-fixed nodes into `table` (shared with the discrete-time engine).
/// Returns the names of the columns written.
std::vector<std::string> generate_time_fixed(const DagSpec& dag, DataTable& table, const RngStream& rng);

}  // namespace dagsim
