#pragma once

#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "dagsim/formula.hpp"
#include "dagsim/node_spec.hpp"
#include "dagsim/random.hpp"
#include "dagsim/table.hpp"

namespace dagsim {

struct NamedColumn {
    std::string name;
    Column column;

    bool operator==(const NamedColumn&) const = default;
};

/// Column(s) produced by one node, in output order (cox yields name_time, name_status).
using GeneratedColumns = std::vector<NamedColumn>;

/// One printed structural equation: "label ~ rhs".
struct EquationLine {
    std::string label;
    std::string rhs;
};

/// A compiled, immutable node definition. Shared read-only across threads.
class NodeModel {
public:
    virtual ~NodeModel() = default;

    /// Column names this node reads (formula variables, expression variables,
    /// explicit lookup parents).
    virtual std::set<std::string> references() const = 0;

    /// Names of the columns this node writes.
    virtual std::vector<std::string> output_names(const std::string& name) const { return {name}; }

    virtual std::vector<EquationLine> describe(const std::string& name) const = 0;
};

struct GenContext {
    const DataTable& table;
    /// Row count; equals table.n_rows() except for roots generated into an empty table.
    std::size_t n;
    RngStream& rng;
    /// Present inside a discrete-time simulation.
    std::optional<int> time;
};

class Generator : public NodeModel {
public:
    virtual GeneratedColumns generate(const std::string& name, const GenContext& ctx) const = 0;
};

/// Compiles a root or child spec. Throws UnknownType, InvalidParameter and
/// formula parse errors.
std::shared_ptr<const Generator> make_generator(const NodeSpec& spec);

/// Compiles and runs `spec` against `table` (n = table rows, or `n` for roots
/// when given).
GeneratedColumns generate(const NodeSpec& spec, const DataTable& table, RngStream& rng,
                          std::optional<int> time = std::nullopt, std::optional<std::size_t> n = std::nullopt);

GeneratedColumns gen_root(const NodeSpec& spec, std::size_t n, RngStream& rng);
Column gen_gaussian(const NodeSpec& spec, const DataTable& table, RngStream& rng);
Column gen_binomial(const NodeSpec& spec, const DataTable& table, RngStream& rng);
Column gen_poisson(const NodeSpec& spec, const DataTable& table, RngStream& rng);
Column gen_negbinom(const NodeSpec& spec, const DataTable& table, RngStream& rng);
Column gen_zeroinfl(const NodeSpec& spec, const DataTable& table, RngStream& rng);
Column gen_multinomial(const NodeSpec& spec, const DataTable& table, RngStream& rng);
Column gen_conditional_prob(const NodeSpec& spec, const DataTable& table, RngStream& rng);
Column gen_conditional_distr(const NodeSpec& spec, const DataTable& table, RngStream& rng);
Column gen_identity(const NodeSpec& spec, const DataTable& table, std::optional<int> time = std::nullopt);
Column gen_mixture(const NodeSpec& spec, const DataTable& table, RngStream& rng);
GeneratedColumns gen_cox(const NodeSpec& spec, const DataTable& table, RngStream& rng);

/// Logistic function 1 / (1 + exp(-x)).
double logistic(double x);

/// Fails with DomainError when |lp| > 700 (exp would overflow).
void check_exp_range(std::span<const double> lp);

/// Latent event time from one uniform: (-ln U / (lambda * exp(lp)))^(1/gamma).
/// gamma = 1 gives the exponential case.
double cox_event_time(double u, double lp, double lambda, double gamma);

}  // namespace dagsim
