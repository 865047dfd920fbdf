#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "dagsim/table.hpp"

namespace dagsim {

// ---------------------------------------------------------------------------
// Expression language
//
// Grammar, loosest to tightest binding:
//   or  <  and  <  comparisons (< <= > >= == !=)  <  + -  <  * /  <  ^  <  unary -
// Primaries: numbers, column names, `sim_time`, `true`/`false`, parenthesised
// expressions, builtin calls (log exp sqrt abs min max) and
// `ifelse(cond, then, else[, na=default])`.
// ---------------------------------------------------------------------------

enum class BinaryOp { Add, Sub, Mul, Div, Pow, Lt, Le, Gt, Ge, Eq, Ne, And, Or };
enum class Builtin { Log, Exp, Sqrt, Abs, Min, Max };

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
    struct Number {
        double value;
    };
    struct ColumnRef {
        std::string name;
    };
    /// The simulation clock; only defined inside a discrete-time run.
    struct TimeRef {};
    struct Neg {
        ExprPtr operand;
    };
    struct Binary {
        BinaryOp op;
        ExprPtr lhs;
        ExprPtr rhs;
    };
    struct Call {
        Builtin fn;
        std::vector<ExprPtr> args;
    };
    /// A missing condition selects `na_default` when present, else yields missing.
    struct IfElse {
        ExprPtr cond;
        ExprPtr then_branch;
        ExprPtr else_branch;
        ExprPtr na_default;
    };

    std::variant<Number, ColumnRef, TimeRef, Neg, Binary, Call, IfElse> node;
};

bool operator==(const Expr& a, const Expr& b);

/// Named numeric constants substituted for identifiers while parsing
/// (e.g. P_0 = 0.005, RR_A = 3.24).
using ConstantMap = std::map<std::string, double, std::less<>>;

/// Parses and constant-folds an expression. Throws SyntaxError / UnknownFunction.
ExprPtr parse_expr(std::string_view text, const ConstantMap& constants = {});

/// Canonical text of an expression; reparses to an equal tree.
std::string render(const Expr& expr);

std::set<std::string> free_variables(const Expr& expr);
bool uses_time(const Expr& expr);

/// If the expression folded to a literal, its value.
std::optional<double> constant_value(const Expr& expr);

/// Vectorised evaluator. Keeps its scratch buffers between calls, so one
/// instance per thread can evaluate many expressions without reallocating.
class ExprEvaluator {
public:
    /// Writes one value per table row into `out` (size must equal n_rows).
    /// `time` supplies `sim_time`; without it a TimeRef throws TimeOutsideSimulation.
    void evaluate(const Expr& expr, const DataTable& table, std::optional<int> time,
                  std::span<double> out);

private:
    void eval(const Expr& expr, std::size_t depth, std::span<double> out);
    std::span<double> scratch(std::size_t depth, std::size_t slot);

    static constexpr std::size_t kSlots = 3;

    const DataTable* table_ = nullptr;
    std::optional<int> time_;
    std::vector<std::vector<double>> pool_;
};

std::vector<double> eval_expr(const Expr& expr, const DataTable& table,
                              std::optional<int> time = std::nullopt);

// ---------------------------------------------------------------------------
// Formula language (structural-equation right-hand sides)
//
//   ~ component (+ component)*
//
// A component is a `*`-product of primaries. Constant primaries (literals,
// constant calls such as log(3), parenthesised constants) multiply into the
// coefficient; at most one primary may reference data: a column, `name^k`,
// `name[level]`, `I(expr)`, or a `:` interaction chain of those.
// Components without data contribute to the intercept.
// ---------------------------------------------------------------------------

struct Factor {
    enum class Kind { Column, Power, Wrapped, Dummy };

    Kind kind = Kind::Column;
    std::string column;  // Column, Power, Dummy
    int exponent = 1;    // Power
    ExprPtr expr;        // Wrapped
    std::string level;   // Dummy

    /// Stable identity used for duplicate detection ("A", "A^2", "I(A^2)", "A[x]").
    std::string signature() const;
};

bool operator==(const Factor& a, const Factor& b);

struct Term {
    double coefficient = 1.0;
    std::vector<Factor> factors;
};

bool operator==(const Term& a, const Term& b);

struct Formula {
    double intercept = 0.0;
    std::vector<Term> terms;

    /// Source components as written (whitespace-normalised) with the sign that
    /// joined them; used to print equations exactly as the user wrote them.
    struct Component {
        char separator = '+';
        std::string text;
    };
    std::vector<Component> components;
};

/// Structural equality: intercept and terms (rendering text is not compared).
bool operator==(const Formula& a, const Formula& b);

/// Throws SyntaxError, NonConstantCoefficient, DuplicateTerm.
Formula parse_formula(std::string_view text, const ConstantMap& constants = {});

/// "~ -2 + A*0.3 + B*-2"
std::string render(const Formula& formula);

/// Right-hand side without the tilde: "-2 + A*0.3 + B*-2" ("0" when empty).
std::string render_rhs(const Formula& formula);

std::set<std::string> free_variables(const Formula& formula);

/// lp_i = intercept + sum_j coef_j * prod_k factor_jk(row i).
/// Throws UnknownColumn / UnknownLevel. Missing inputs yield missing output.
std::vector<double> linear_predictor(const Formula& formula, const DataTable& table);

}  // namespace dagsim
