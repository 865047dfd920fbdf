#pragma once

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "dagsim/formula.hpp"

namespace dagsim {

/// Insertion-ordered JSON, so parameters print in the order they were written.
using Json = nlohmann::ordered_json;

enum class NodeKind { Root, Child, TimeDependent };
enum class OutputCoercion { Native, Numeric, CategoricalLabels };

std::string_view to_string(NodeKind kind);

/// Declarative description of one node, as the user wrote it. Compiled into
/// a NodeModel when added to a DAG.
struct NodeSpec {
    std::string name;
    NodeKind kind = NodeKind::Child;
    std::string type;
    /// Distribution / engine parameters; keys depend on `type`.
    Json params = Json::object();
    std::optional<std::string> formula;
    std::optional<std::vector<std::string>> parents;
    OutputCoercion output = OutputCoercion::Native;
};

/// "native" (alias "logical"), "numeric", "categorical-labels". Throws InvalidParameter.
OutputCoercion parse_output_coercion(std::string_view text);

/// Root samplers: rnorm runif rgamma rbeta rbernoulli rcategorical rconstant
/// rweibull rexp rpois.
bool is_root_type(std::string_view type);
/// Child generators: gaussian binomial poisson negative_binomial zeroinfl
/// multinomial conditional_prob conditional_distr identity mixture cox.
bool is_child_type(std::string_view type);
/// Discrete-time processes: time_to_event competing_events.
bool is_event_type(std::string_view type);

/// A node at one point in time. `kind` is inferred from the type tag.
NodeSpec node(std::string name, std::string type, Json params = Json::object(),
              std::optional<std::string> formula = std::nullopt);

/// A time-dependent node.
NodeSpec node_td(std::string name, std::string type, Json params = Json::object(),
                 std::optional<std::string> formula = std::nullopt);

bool is_reserved_name(std::string_view name);
bool is_valid_identifier(std::string_view name);

/// Strict typed access to a params object: every key must be consumed,
/// otherwise finish() reports the unknown ones. Errors are InvalidParameter.
class ParamReader {
public:
    ParamReader(const Json& params, std::string owner);

    bool has(const std::string& key) const;
    double number(const std::string& key);
    double number(const std::string& key, double fallback);
    bool boolean(const std::string& key, bool fallback);
    std::string string(const std::string& key);
    std::string string(const std::string& key, const std::string& fallback);
    std::vector<double> numbers(const std::string& key);
    std::vector<std::string> strings(const std::string& key);
    std::optional<std::vector<std::string>> optional_strings(const std::string& key);
    const Json& raw(const std::string& key);
    /// Number or the strings "Inf"/"inf"; infinity is returned as +inf.
    double duration(const std::string& key, double fallback);
    ConstantMap constants();

    void finish() const;

    [[noreturn]] void error(const std::string& key, const std::string& what) const;

private:
    const Json& params_;
    std::string owner_;
    std::set<std::string> used_;
};

}  // namespace dagsim
