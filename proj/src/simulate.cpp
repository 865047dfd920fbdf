#include "dagsim/simulate.hpp"

#include "dagsim/error.hpp"

namespace dagsim {

std::vector<std::string> generate_time_fixed(const DagSpec& dag, DataTable& table, const RngStream& rng) {
    validate(dag);
    std::vector<std::string> written;
    for (const auto& name : topological_sort(dag)) {
        const DagNode& node = dag.at(name);
        if (node.time_dependent()) continue;
        RngStream stream = rng.split(dag.position(node));
        GenContext ctx{table, table.n_rows(), stream, std::nullopt};
        GeneratedColumns cols;
        try {
            cols = node.generator->generate(name, ctx);
        } catch (const Error& e) {
            throw e.with_context("node '" + name + "'");
        }
        for (auto& c : cols) {
            written.push_back(c.name);
            table.set(c.name, std::move(c.column));
        }
    }
    return written;
}

DataTable sim_from_dag(const DagSpec& dag, std::size_t n, const RngStream& rng) {
    for (const auto& node : dag.nodes())
        if (node.time_dependent())
            fail(ErrorCode::TdNodePresent, "node '" + node.spec.name +
                                               "' is time-dependent; use the discrete-time simulation");
    DataTable table(n);
    generate_time_fixed(dag, table, rng);
    return table;
}

}  // namespace dagsim
