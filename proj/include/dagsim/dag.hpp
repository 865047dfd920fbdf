#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dagsim/events.hpp"
#include "dagsim/node_spec.hpp"
#include "dagsim/nodes.hpp"

namespace dagsim {

/// A node as stored in a DAG: the user's spec plus its compiled model.
/// Exactly one of `generator` / `process` is set.
struct DagNode {
    NodeSpec spec;
    std::shared_ptr<const Generator> generator;
    std::shared_ptr<const EventProcess> process;

    const NodeModel& model() const;
    bool time_dependent() const { return spec.kind == NodeKind::TimeDependent; }
    bool is_event() const { return process != nullptr; }
    /// Columns written by this node (cox: name_time, name_status; events: derived columns).
    std::vector<std::string> outputs() const;
};

/// Ordered node collection. Copies are cheap (compiled models are shared and immutable).
class DagSpec {
public:
    const std::vector<DagNode>& nodes() const { return nodes_; }
    std::size_t size() const { return nodes_.size(); }
    bool empty() const { return nodes_.empty(); }

    /// First node with this name, or nullptr.
    const DagNode* find(const std::string& name) const;
    /// Throws UnknownNode.
    const DagNode& at(const std::string& name) const;
    std::size_t position(const DagNode& node) const { return static_cast<std::size_t>(&node - nodes_.data()); }

    bool has_time_dependent() const;

private:
    friend DagSpec add_node(DagSpec dag, const NodeSpec& spec);
    std::vector<DagNode> nodes_;
    std::map<std::string, std::size_t> index_;
};

DagSpec empty_dag();

/// Appends one node. Checks the name (identifier, reserved suffix, duplicate)
/// and compiles the definition. A time-dependent non-event node may reuse the
/// name of an earlier time-fixed node, which then acts as its t = 0 value.
/// Throws DuplicateName, ReservedSuffix, UnknownType, ValidationError and
/// parameter / formula errors.
DagSpec add_node(DagSpec dag, const NodeSpec& spec);
/// One node per spec, in order (the multi-name form).
DagSpec add_node(DagSpec dag, const std::vector<NodeSpec>& specs);

DagSpec operator+(DagSpec dag, const NodeSpec& spec);
DagSpec operator+(DagSpec dag, const std::vector<NodeSpec>& specs);

/// Same definition under several names.
std::vector<NodeSpec> nodes(const std::vector<std::string>& names, const std::string& type,
                            Json params = Json::object(), std::optional<std::string> formula = std::nullopt);

/// Resolves a referenced column to the node that writes it: the node itself,
/// a cox output (T_time -> T), or an event node's derived column (A_event -> A).
std::optional<std::string> resolve_reference(const DagSpec& dag, const std::string& column);

/// Explicit parents if given, otherwise the columns the node reads, mapped to
/// node names, in DAG order, without duplicates. Throws UnknownNode.
std::vector<std::string> parents_of(const DagSpec& dag, const std::string& name);

/// Graph-level checks: every reference resolves, no time-fixed node depends on
/// a time-dependent one, and the time-fixed part is acyclic. Throws
/// ValidationError / UnknownNode / CyclicGraph.
void validate(const DagSpec& dag);

/// Stable Kahn order of the time-fixed nodes followed by the time-dependent
/// nodes in insertion order. Throws CyclicGraph naming one cycle.
std::vector<std::string> topological_sort(const DagSpec& dag);

struct AdjacencyMatrix {
    std::vector<std::string> names;
    /// entry[u][v] = 1 iff u is a parent of v
    std::vector<std::vector<int>> entry;
};

AdjacencyMatrix adjacency_matrix(const DagSpec& dag);
std::string to_csv(const AdjacencyMatrix& m);

/// One "label ~ rhs" line per equation, labels right-aligned.
std::vector<std::string> render_summary(const DagSpec& dag);
std::string to_dot(const DagSpec& dag);

}  // namespace dagsim
