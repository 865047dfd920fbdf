#include "dagsim/dag.hpp"

#include <algorithm>
#include <set>

#include "dagsim/error.hpp"

namespace dagsim {

const NodeModel& DagNode::model() const {
    if (process) return *process;
    return *generator;
}

std::vector<std::string> DagNode::outputs() const { return model().output_names(spec.name); }

const DagNode* DagSpec::find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : &nodes_[it->second];
}

const DagNode& DagSpec::at(const std::string& name) const {
    const auto* n = find(name);
    if (!n) fail(ErrorCode::UnknownNode, "no node named '" + name + "'");
    return *n;
}

bool DagSpec::has_time_dependent() const {
    return std::any_of(nodes_.begin(), nodes_.end(), [](const DagNode& n) { return n.time_dependent(); });
}

DagSpec empty_dag() { return {}; }

DagSpec add_node(DagSpec dag, const NodeSpec& spec) {
    const std::string& name = spec.name;
    if (!is_valid_identifier(name))
        fail(ErrorCode::ValidationError, "'" + name + "' is not a valid node name");
    if (is_reserved_name(name))
        fail(ErrorCode::ReservedSuffix, "node name '" + name + "' ends in a reserved suffix");

    const bool td = spec.kind == NodeKind::TimeDependent;
    const bool event = is_event_type(spec.type);
    if (!is_root_type(spec.type) && !is_child_type(spec.type) && !event)
        fail(ErrorCode::UnknownType, "node '" + name + "': unknown type '" + spec.type + "'");
    if (event && !td)
        fail(ErrorCode::ValidationError, "node '" + name + "': '" + spec.type + "' needs a time-dependent node");
    if (spec.kind == NodeKind::Root && !is_root_type(spec.type))
        fail(ErrorCode::ValidationError, "node '" + name + "': '" + spec.type + "' is not a root type");
    if (spec.kind == NodeKind::Child && !is_child_type(spec.type))
        fail(ErrorCode::ValidationError, "node '" + name + "': '" + spec.type + "' is not a child type");

    if (const auto* prev = dag.find(name)) {
        // a generic time-dependent node may continue a time-fixed node of the same name
        const bool continues = td && !event && !prev->time_dependent() &&
                               std::count_if(dag.nodes_.begin(), dag.nodes_.end(),
                                             [&](const DagNode& n) { return n.spec.name == name; }) == 1;
        if (!continues) fail(ErrorCode::DuplicateName, "node '" + name + "' is already defined");
    }

    DagNode n;
    n.spec = spec;
    try {
        if (event) n.process = std::make_shared<EventProcess>(spec);
        else n.generator = make_generator(spec);
    } catch (const Error& e) {
        throw e.with_context("node '" + name + "'");
    }
    if (!dag.index_.count(name)) dag.index_[name] = dag.nodes_.size();
    dag.nodes_.push_back(std::move(n));
    return dag;
}

DagSpec add_node(DagSpec dag, const std::vector<NodeSpec>& specs) {
    for (const auto& s : specs) dag = add_node(std::move(dag), s);
    return dag;
}

DagSpec operator+(DagSpec dag, const NodeSpec& spec) { return add_node(std::move(dag), spec); }
DagSpec operator+(DagSpec dag, const std::vector<NodeSpec>& specs) { return add_node(std::move(dag), specs); }

std::vector<NodeSpec> nodes(const std::vector<std::string>& names, const std::string& type, Json params,
                            std::optional<std::string> formula) {
    std::vector<NodeSpec> out;
    for (const auto& n : names) out.push_back(node(n, type, params, formula));
    return out;
}

// ---------------------------------------------------------------------------

std::optional<std::string> resolve_reference(const DagSpec& dag, const std::string& column) {
    if (const auto* n = dag.find(column)) {
        if (n->is_event()) return std::nullopt;  // event nodes only expose derived columns
        if (n->outputs() == std::vector<std::string>{column}) return column;
    }
    for (const auto& n : dag.nodes())
        if (!n.is_event()) {
            const auto outs = n.outputs();
            if (std::find(outs.begin(), outs.end(), column) != outs.end()) return n.spec.name;
        }
    for (const auto& suffix : derived_suffixes()) {
        if (column.size() <= suffix.size() || column.compare(column.size() - suffix.size(), suffix.size(), suffix))
            continue;
        const auto base = column.substr(0, column.size() - suffix.size());
        if (const auto* n = dag.find(base); n && n->is_event()) return base;
    }
    return std::nullopt;
}

namespace {

/// Node names `name` depends on. `explicit_only` gives the user-facing parent
/// list; otherwise explicit parents and every read column are combined.
// `only` restricts the lookup to one version of a name (a time-fixed node and
// its time-dependent continuation share it).
std::vector<std::string> dependencies(const DagSpec& dag, const std::string& name, bool explicit_only,
                                      const DagNode* only = nullptr) {
    std::set<std::string> found;
    std::vector<std::string> ordered_explicit;
    bool any_explicit = false;
    auto add = [&](const std::string& ref, bool is_parent_entry) {
        std::optional<std::string> base;
        if (is_parent_entry && dag.find(ref)) base = ref;
        else base = resolve_reference(dag, ref);
        if (!base)
            fail(ErrorCode::UnknownNode, "node '" + name + "' references unknown column '" + ref + "'");
        if (*base == name) return;
        if (found.insert(*base).second && is_parent_entry) ordered_explicit.push_back(*base);
    };
    for (const auto& n : dag.nodes()) {
        if (n.spec.name != name || (only && &n != only)) continue;
        if (n.spec.parents) {
            any_explicit = true;
            for (const auto& p : *n.spec.parents) add(p, true);
        }
    }
    if (explicit_only && any_explicit) return ordered_explicit;
    for (const auto& n : dag.nodes()) {
        if (n.spec.name != name || (only && &n != only)) continue;
        if (!explicit_only || !n.spec.parents)
            for (const auto& r : n.model().references()) add(r, false);
    }
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (const auto& n : dag.nodes())
        if (found.count(n.spec.name) && seen.insert(n.spec.name).second) out.push_back(n.spec.name);
    return out;
}

std::vector<std::string> unique_names(const DagSpec& dag) {
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (const auto& n : dag.nodes())
        if (seen.insert(n.spec.name).second) out.push_back(n.spec.name);
    return out;
}

bool self_referencing(const DagNode& n, const DagSpec& dag) {
    for (const auto& r : n.model().references())
        if (resolve_reference(dag, r) == n.spec.name) return true;
    return false;
}

}  // namespace

std::vector<std::string> parents_of(const DagSpec& dag, const std::string& name) {
    dag.at(name);
    return dependencies(dag, name, true);
}

std::vector<std::string> topological_sort(const DagSpec& dag) {
    // time-fixed part only; time-dependent nodes run afterwards in insertion order
    std::vector<std::size_t> fixed;
    for (std::size_t i = 0; i < dag.size(); ++i)
        if (!dag.nodes()[i].time_dependent()) fixed.push_back(i);

    std::map<std::string, std::size_t> slot;
    for (std::size_t k = 0; k < fixed.size(); ++k) slot[dag.nodes()[fixed[k]].spec.name] = k;

    std::vector<std::vector<std::size_t>> deps(fixed.size());
    for (std::size_t k = 0; k < fixed.size(); ++k) {
        const auto& n = dag.nodes()[fixed[k]];
        if (self_referencing(n, dag))
            fail(ErrorCode::CyclicGraph, "cycle: " + n.spec.name + " -> " + n.spec.name);
        for (const auto& p : dependencies(dag, n.spec.name, false, &n))
            if (auto it = slot.find(p); it != slot.end()) deps[k].push_back(it->second);
    }

    std::vector<int> indegree(fixed.size(), 0);
    std::vector<std::vector<std::size_t>> children(fixed.size());
    for (std::size_t k = 0; k < fixed.size(); ++k)
        for (auto p : deps[k]) {
            ++indegree[k];
            children[p].push_back(k);
        }

    std::vector<std::string> order;
    std::vector<bool> done(fixed.size(), false);
    std::set<std::size_t> ready;
    for (std::size_t k = 0; k < fixed.size(); ++k)
        if (indegree[k] == 0) ready.insert(k);
    while (!ready.empty()) {
        const auto k = *ready.begin();
        ready.erase(ready.begin());
        done[k] = true;
        order.push_back(dag.nodes()[fixed[k]].spec.name);
        for (auto c : children[k])
            if (--indegree[c] == 0) ready.insert(c);
    }

    if (order.size() < fixed.size()) {
        // every remaining node has a remaining dependency: walk until a node repeats
        std::size_t k = 0;
        while (done[k]) ++k;
        std::vector<std::size_t> path;
        std::vector<int> at(fixed.size(), -1);
        while (at[k] < 0) {
            at[k] = static_cast<int>(path.size());
            path.push_back(k);
            for (auto p : deps[k])
                if (!done[p]) {
                    k = p;
                    break;
                }
        }
        std::vector<std::size_t> cycle(path.begin() + at[k], path.end());
        std::reverse(cycle.begin(), cycle.end());
        std::string text;
        for (auto c : cycle) text += dag.nodes()[fixed[c]].spec.name + " -> ";
        text += dag.nodes()[fixed[cycle.front()]].spec.name;
        fail(ErrorCode::CyclicGraph, "cycle: " + text);
    }

    std::set<std::string> seen(order.begin(), order.end());
    for (const auto& n : dag.nodes())
        if (n.time_dependent() && seen.insert(n.spec.name).second) order.push_back(n.spec.name);
    return order;
}

void validate(const DagSpec& dag) {
    for (const auto& n : dag.nodes()) {
        for (const auto& r : n.model().references())
            if (const auto* target = dag.find(r); target && target->is_event())
                fail(ErrorCode::ValidationError, "node '" + n.spec.name + "' reads '" + r +
                                                     "', which is an event node; use " + r + "_event");
        const auto deps = dependencies(dag, n.spec.name, false, &n);
        if (n.time_dependent()) continue;
        for (const auto& p : deps) {
            const bool has_fixed = std::any_of(dag.nodes().begin(), dag.nodes().end(), [&](const DagNode& m) {
                return m.spec.name == p && !m.time_dependent();
            });
            if (!has_fixed)
                fail(ErrorCode::ValidationError, "time-fixed node '" + n.spec.name +
                                                     "' depends on time-dependent node '" + p + "'");
        }
    }
    topological_sort(dag);
}

AdjacencyMatrix adjacency_matrix(const DagSpec& dag) {
    AdjacencyMatrix m;
    m.names = unique_names(dag);
    m.entry.assign(m.names.size(), std::vector<int>(m.names.size(), 0));
    std::map<std::string, std::size_t> pos;
    for (std::size_t i = 0; i < m.names.size(); ++i) pos[m.names[i]] = i;
    for (std::size_t v = 0; v < m.names.size(); ++v)
        for (const auto& p : parents_of(dag, m.names[v])) m.entry[pos.at(p)][v] = 1;
    return m;
}

std::string to_csv(const AdjacencyMatrix& m) {
    std::string out;
    for (const auto& n : m.names) out += "," + n;
    out += "\n";
    for (std::size_t u = 0; u < m.names.size(); ++u) {
        out += m.names[u];
        for (int x : m.entry[u]) out += x ? ",1" : ",0";
        out += "\n";
    }
    return out;
}

std::vector<std::string> render_summary(const DagSpec& dag) {
    std::vector<EquationLine> lines;
    for (const auto& n : dag.nodes())
        for (auto& l : n.model().describe(n.spec.name)) lines.push_back(std::move(l));
    std::size_t width = 0;
    for (const auto& l : lines) width = std::max(width, l.label.size());
    std::vector<std::string> out;
    for (const auto& l : lines) out.push_back(std::string(width - l.label.size(), ' ') + l.label + " ~ " + l.rhs);
    return out;
}

std::string to_dot(const DagSpec& dag) {
    const auto m = adjacency_matrix(dag);
    std::string out = "digraph dag {\n";
    for (const auto& name : m.names) {
        const bool td = std::any_of(dag.nodes().begin(), dag.nodes().end(), [&](const DagNode& n) {
            return n.spec.name == name && n.time_dependent();
        });
        out += "  " + name + (td ? " [shape=box, style=dashed];\n" : ";\n");
    }
    for (std::size_t v = 0; v < m.names.size(); ++v)
        for (std::size_t u = 0; u < m.names.size(); ++u)
            if (m.entry[u][v]) out += "  " + m.names[u] + " -> " + m.names[v] + ";\n";
    out += "}\n";
    return out;
}

}  // namespace dagsim
