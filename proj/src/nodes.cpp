#include "dagsim/nodes.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "dagsim/error.hpp"

namespace dagsim {

double logistic(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

void check_exp_range(std::span<const double> lp) {
    for (std::size_t i = 0; i < lp.size(); ++i)
        if (std::abs(lp[i]) > 700.0)
            fail(ErrorCode::DomainError, "linear predictor " + format_number(lp[i]) + " at row " +
                                             std::to_string(i + 1) + " overflows exp()");
}

double cox_event_time(double u, double lp, double lambda, double gamma) {
    const double base = -std::log(u) / (lambda * std::exp(lp));
    return gamma == 1.0 ? base : std::pow(base, 1.0 / gamma);
}

namespace {

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? sep : "") + parts[i];
    return out;
}

std::string json_text(const Json& v) {
    if (v.is_number()) return format_number(v.get<double>());
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "TRUE" : "FALSE";
    if (v.is_array()) {
        std::vector<std::string> parts;
        for (const auto& x : v) parts.push_back(json_text(x));
        return "c(" + join(parts, ", ") + ")";
    }
    return v.dump();
}

Column binary_column(std::vector<double> v, OutputCoercion output) {
    return Column(output == OutputCoercion::Numeric ? ColumnType::Integer : ColumnType::Boolean, std::move(v));
}

Column code_column(const std::vector<int>& codes, const std::vector<std::string>& labels,
                   OutputCoercion output) {
    std::vector<double> v(codes.begin(), codes.end());
    if (labels.empty() || output == OutputCoercion::Numeric) return Column(ColumnType::Integer, std::move(v));
    return Column(ColumnType::Categorical, std::move(v), labels);
}

void check_probabilities(const std::vector<double>& probs, const std::string& owner, const std::string& key) {
    double sum = 0.0;
    for (double p : probs) {
        if (!(p >= 0.0 && p <= 1.0))
            fail(ErrorCode::InvalidParameter, owner + ": parameter '" + key + "' has entry outside [0, 1]");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-8)
        fail(ErrorCode::RowNotNormalized, owner + ": parameter '" + key + "' sums to " + format_number(sum));
}

Formula require_formula(const NodeSpec& spec, const ConstantMap& constants) {
    if (!spec.formula) fail(ErrorCode::InvalidParameter, "node '" + spec.name + "': a formula is required");
    return parse_formula(*spec.formula, constants);
}

/// Parses {"type": ..., "formula": ..., "output": ..., "parents": [...], ...params}
/// into a nested node definition (mixture components, conditional strata).
NodeSpec sub_node(const Json& j, const std::string& owner) {
    if (!j.is_object() || !j.contains("type") || !j["type"].is_string())
        fail(ErrorCode::InvalidParameter, owner + ": nested node needs a string 'type'");
    NodeSpec s = node(owner, j["type"].get<std::string>());
    for (const auto& [k, v] : j.items()) {
        if (k == "type") continue;
        if (k == "formula") {
            if (!v.is_string()) fail(ErrorCode::InvalidParameter, owner + ": nested 'formula' must be a string");
            s.formula = v.get<std::string>();
        } else if (k == "output") {
            s.output = parse_output_coercion(v.get<std::string>());
        } else if (k == "parents") {
            s.parents = v.get<std::vector<std::string>>();
        } else {
            s.params[k] = v;
        }
    }
    return s;
}

// ---------------------------------------------------------------------------

class RootGenerator final : public Generator {
public:
    explicit RootGenerator(const NodeSpec& spec) : type_(spec.type), output_(spec.output) {
        ParamReader p(spec.params, "node '" + spec.name + "'");
        auto arg = [&](const std::string& key, std::optional<double> fallback) {
            const double v = fallback ? p.number(key, *fallback) : p.number(key);
            args_.push_back(v);
            return v;
        };
        if (type_ == "rnorm") {
            arg("mean", 0.0);
            arg("sd", 1.0);
        } else if (type_ == "runif") {
            arg("min", 0.0);
            arg("max", 1.0);
        } else if (type_ == "rgamma") {
            arg("shape", std::nullopt);
            arg("rate", 1.0);
        } else if (type_ == "rbeta") {
            arg("shape1", std::nullopt);
            arg("shape2", std::nullopt);
        } else if (type_ == "rbernoulli") {
            const double pr = arg("p", 0.5);
            if (!(pr >= 0.0 && pr <= 1.0)) p.error("p", "must lie in [0, 1]");
        } else if (type_ == "rcategorical") {
            args_ = p.numbers("probs");
            check_probabilities(args_, "node '" + spec.name + "'", "probs");
            if (auto l = p.optional_strings("labels")) {
                labels_ = *l;
                if (labels_.size() != args_.size()) p.error("labels", "must have one entry per probability");
            }
        } else if (type_ == "rconstant") {
            arg("value", std::nullopt);
        } else if (type_ == "rweibull") {
            arg("shape", std::nullopt);
            arg("scale", 1.0);
        } else if (type_ == "rexp") {
            arg("rate", 1.0);
        } else if (type_ == "rpois") {
            arg("lambda", std::nullopt);
        } else {
            fail(ErrorCode::UnknownType, "unknown root type '" + type_ + "'");
        }
        p.finish();
        // validates the parameters without consuming anything
        RngStream probe;
        draw(probe, 0);
    }

    std::set<std::string> references() const override { return {}; }

    std::vector<EquationLine> describe(const std::string& name) const override {
        std::vector<std::string> a;
        for (double v : args_) a.push_back(format_number(v));
        std::string rhs;
        if (type_ == "rnorm") rhs = "N(" + join(a, ", ") + ")";
        else if (type_ == "runif") rhs = "U(" + join(a, ", ") + ")";
        else if (type_ == "rgamma") rhs = "Gamma(" + join(a, ", ") + ")";
        else if (type_ == "rbeta") rhs = "Beta(" + join(a, ", ") + ")";
        else if (type_ == "rbernoulli") rhs = "Bernoulli(" + a[0] + ")";
        else if (type_ == "rcategorical") rhs = "Categorical(" + join(a, ", ") + ")";
        else if (type_ == "rconstant") rhs = a[0];
        else if (type_ == "rweibull") rhs = "Weibull(" + join(a, ", ") + ")";
        else if (type_ == "rexp") rhs = "Exp(" + a[0] + ")";
        else rhs = "Poisson(" + a[0] + ")";
        return {{name, rhs}};
    }

    GeneratedColumns generate(const std::string& name, const GenContext& ctx) const override {
        return {{name, draw(ctx.rng, ctx.n)}};
    }

    Column draw(RngStream& rng, std::size_t n) const {
        if (type_ == "rnorm") return Column(ColumnType::Real, draw_normal(rng, n, args_[0], args_[1]));
        if (type_ == "runif") return Column(ColumnType::Real, draw_uniform(rng, n, args_[0], args_[1]));
        if (type_ == "rgamma") return Column(ColumnType::Real, draw_gamma(rng, n, args_[0], args_[1]));
        if (type_ == "rbeta") return Column(ColumnType::Real, draw_beta(rng, n, args_[0], args_[1]));
        if (type_ == "rweibull") return Column(ColumnType::Real, draw_weibull(rng, n, args_[0], args_[1]));
        if (type_ == "rexp") return Column(ColumnType::Real, draw_exponential(rng, n, args_[0]));
        if (type_ == "rpois") return Column(ColumnType::Integer, draw_poisson(rng, n, args_[0]));
        if (type_ == "rconstant") return Column(ColumnType::Real, std::vector<double>(n, args_[0]));
        if (type_ == "rbernoulli") {
            const std::vector<double> p(n, args_[0]);
            return binary_column(draw_bernoulli(rng, p), output_);
        }
        std::vector<double> probs;
        probs.reserve(n * args_.size());
        for (std::size_t i = 0; i < n; ++i) probs.insert(probs.end(), args_.begin(), args_.end());
        return code_column(draw_categorical(rng, probs, args_.size()), labels_, output_);
    }

private:
    std::string type_;
    OutputCoercion output_;
    std::vector<double> args_;
    std::vector<std::string> labels_;
};

// ---------------------------------------------------------------------------
// Regression-type children: gaussian binomial poisson negative_binomial zeroinfl

class RegressionGenerator final : public Generator {
public:
    explicit RegressionGenerator(const NodeSpec& spec) : type_(spec.type), output_(spec.output) {
        ParamReader p(spec.params, "node '" + spec.name + "'");
        const auto constants = p.constants();
        formula_ = require_formula(spec, constants);
        if (type_ == "gaussian") {
            error_ = p.number("error");
            if (!(error_ >= 0.0) || !std::isfinite(error_)) p.error("error", "must be >= 0");
        } else if (type_ == "negative_binomial") {
            theta_ = p.number("theta");
            if (!(theta_ > 0.0)) p.error("theta", "must be > 0");
        } else if (type_ == "zeroinfl") {
            zero_ = parse_formula(p.string("formula_zero"), constants);
            family_ = p.string("family", "poisson");
            if (family_ == "negative_binomial") {
                theta_ = p.number("theta");
                if (!(theta_ > 0.0)) p.error("theta", "must be > 0");
            } else if (family_ != "poisson") {
                p.error("family", "must be \"poisson\" or \"negative_binomial\"");
            }
        }
        p.finish();
    }

    std::set<std::string> references() const override {
        auto refs = free_variables(formula_);
        if (zero_) refs.merge(free_variables(*zero_));
        return refs;
    }

    std::vector<EquationLine> describe(const std::string& name) const override {
        const std::string rhs = render_rhs(formula_);
        if (type_ == "gaussian") return {{name, "N(" + rhs + ", " + format_number(error_) + ")"}};
        if (type_ == "binomial") return {{name, "Bernoulli(logit(" + rhs + "))"}};
        if (type_ == "poisson") return {{name, "Poisson(exp(" + rhs + "))"}};
        if (type_ == "negative_binomial")
            return {{name, "NegBinomial(exp(" + rhs + "), " + format_number(theta_) + ")"}};
        const std::string count = family_ == "poisson"
                                      ? "Poisson(exp(" + rhs + "))"
                                      : "NegBinomial(exp(" + rhs + "), " + format_number(theta_) + ")";
        return {{name, "ZeroInflated(logit(" + render_rhs(*zero_) + "), " + count + ")"}};
    }

    GeneratedColumns generate(const std::string& name, const GenContext& ctx) const override {
        auto lp = linear_predictor(formula_, ctx.table);
        const std::size_t n = lp.size();
        RngStream& rng = ctx.rng;
        if (type_ == "gaussian") {
            if (error_ > 0.0)
                for (auto& v : lp) v += error_ * rng.next_normal();
            return {{name, Column(ColumnType::Real, std::move(lp))}};
        }
        if (type_ == "binomial") {
            for (auto& v : lp) {
                const double u = rng.next_uniform();
                v = is_missing(v) ? kMissing : (u < logistic(v) ? 1.0 : 0.0);
            }
            return {{name, binary_column(std::move(lp), output_)}};
        }
        check_exp_range(lp);
        std::vector<double> gate;
        if (zero_) {
            gate = linear_predictor(*zero_, ctx.table);
            for (auto& g : gate) g = is_missing(g) ? kMissing : logistic(g);
        }
        const bool negbin = type_ == "negative_binomial" || family_ == "negative_binomial";
        for (std::size_t i = 0; i < n; ++i) {
            if (zero_) {
                const double u = rng.next_uniform();
                if (is_missing(gate[i])) {
                    lp[i] = kMissing;
                    continue;
                }
                if (u < gate[i]) {
                    lp[i] = 0.0;
                    continue;
                }
            }
            if (is_missing(lp[i])) continue;
            const double mean = std::exp(lp[i]);
            lp[i] = negbin ? sample_negbinom(rng, mean, theta_) : sample_poisson(rng, mean);
        }
        return {{name, Column(ColumnType::Integer, std::move(lp))}};
    }

private:
    std::string type_;
    OutputCoercion output_;
    Formula formula_;
    std::optional<Formula> zero_;
    std::string family_ = "poisson";
    double error_ = 0.0;
    double theta_ = 1.0;
};

// ---------------------------------------------------------------------------

class MultinomialGenerator final : public Generator {
public:
    explicit MultinomialGenerator(const NodeSpec& spec) : output_(spec.output) {
        ParamReader p(spec.params, "node '" + spec.name + "'");
        const auto constants = p.constants();
        for (const auto& text : p.strings("formulas")) formulas_.push_back(parse_formula(text, constants));
        if (formulas_.empty()) p.error("formulas", "needs at least one non-reference class");
        if (auto l = p.optional_strings("labels")) {
            labels_ = *l;
            if (labels_.size() != formulas_.size() + 1) p.error("labels", "must name every class");
        }
        if (spec.formula) fail(ErrorCode::InvalidParameter, "node '" + spec.name + "': use 'formulas' for multinomial");
        p.finish();
    }

    std::set<std::string> references() const override {
        std::set<std::string> refs;
        for (const auto& f : formulas_) refs.merge(free_variables(f));
        return refs;
    }

    std::vector<EquationLine> describe(const std::string& name) const override {
        std::vector<std::string> parts{"0"};
        for (const auto& f : formulas_) parts.push_back(render_rhs(f));
        return {{name, "Multinomial(softmax(" + join(parts, ", ") + "))"}};
    }

    GeneratedColumns generate(const std::string& name, const GenContext& ctx) const override {
        const std::size_t n = ctx.table.n_rows();
        const std::size_t k = formulas_.size() + 1;
        std::vector<double> probs(n * k, 0.0);
        for (std::size_t c = 1; c < k; ++c) {
            const auto lp = linear_predictor(formulas_[c - 1], ctx.table);
            for (std::size_t i = 0; i < n; ++i) probs[i * k + c] = lp[i];
        }
        std::vector<bool> missing(n, false);
        for (std::size_t i = 0; i < n; ++i) {
            double* row = probs.data() + i * k;
            double mx = 0.0;
            for (std::size_t c = 0; c < k; ++c) {
                if (is_missing(row[c])) missing[i] = true;
                else mx = std::max(mx, row[c]);
            }
            if (missing[i]) {
                std::fill(row, row + k, 0.0);
                row[0] = 1.0;
                continue;
            }
            double sum = 0.0;
            for (std::size_t c = 0; c < k; ++c) sum += row[c] = std::exp(row[c] - mx);
            for (std::size_t c = 0; c < k; ++c) row[c] /= sum;
        }
        auto col = code_column(draw_categorical(ctx.rng, probs, k, 1e-6), labels_, output_);
        for (std::size_t i = 0; i < n; ++i)
            if (missing[i]) col[i] = kMissing;
        return {{name, std::move(col)}};
    }

private:
    OutputCoercion output_;
    std::vector<Formula> formulas_;
    std::vector<std::string> labels_;
};

// ---------------------------------------------------------------------------
// Lookup on parent values. Keys join the parents' text forms with ".", so a
// boolean parent contributes "true"/"false" and an integer parent "0", "1", ...

std::vector<std::string> require_parents(const NodeSpec& spec) {
    if (!spec.parents || spec.parents->empty())
        fail(ErrorCode::InvalidParameter, "node '" + spec.name + "': '" + spec.type + "' requires parents");
    return *spec.parents;
}

std::vector<std::string> row_keys(const std::vector<std::string>& parents, const DataTable& table) {
    std::vector<const Column*> cols;
    for (const auto& p : parents) cols.push_back(&table.column(p));
    std::vector<std::string> keys(table.n_rows());
    for (std::size_t i = 0; i < keys.size(); ++i) {
        std::string key;
        for (std::size_t j = 0; j < cols.size(); ++j) {
            if (j) key += '.';
            key += is_missing((*cols[j])[i]) ? std::string("NA") : cols[j]->format(i);
        }
        keys[i] = std::move(key);
    }
    return keys;
}

[[noreturn]] void unmapped(const std::string& key, std::size_t row, const std::vector<std::string>& parents) {
    fail(ErrorCode::UnmappedCombination,
         "no entry for (" + join(parents, ", ") + ") = \"" + key + "\" at row " + std::to_string(row + 1));
}

class ConditionalProbGenerator final : public Generator {
public:
    explicit ConditionalProbGenerator(const NodeSpec& spec) : parents_(require_parents(spec)), output_(spec.output) {
        ParamReader p(spec.params, "node '" + spec.name + "'");
        const auto& probs = p.raw("probs");
        if (!probs.is_object() || probs.empty()) p.error("probs", "must map parent values to probability vectors");
        for (const auto& [key, v] : probs.items()) {
            std::vector<double> row;
            if (v.is_number()) {
                // shorthand for a binary node: P(true)
                row = {1.0 - v.get<double>(), v.get<double>()};
            } else {
                for (const auto& x : v) {
                    if (!x.is_number()) p.error("probs", "entry '" + key + "' must be numeric");
                    row.push_back(x.get<double>());
                }
            }
            if (k_ == 0) k_ = row.size();
            if (row.size() != k_ || k_ < 2) p.error("probs", "entries must all have the same length >= 2");
            check_probabilities(row, "node '" + spec.name + "'", "probs." + key);
            table_.emplace(key, std::move(row));
            order_.push_back(key);
        }
        if (auto l = p.optional_strings("labels")) {
            labels_ = *l;
            if (labels_.size() != k_) p.error("labels", "must have one entry per category");
        }
        p.finish();
    }

    std::set<std::string> references() const override { return {parents_.begin(), parents_.end()}; }

    std::vector<EquationLine> describe(const std::string& name) const override {
        std::vector<std::string> parts;
        for (const auto& key : order_) {
            std::vector<std::string> ps;
            for (double v : table_.at(key)) ps.push_back(format_number(v));
            parts.push_back(key + ": (" + join(ps, ", ") + ")");
        }
        const std::string dist = (k_ == 2 && labels_.empty()) ? "Bernoulli" : "Categorical";
        return {{name, dist + "(p | " + join(parents_, ", ") + "; " + join(parts, "; ") + ")"}};
    }

    GeneratedColumns generate(const std::string& name, const GenContext& ctx) const override {
        const auto keys = row_keys(parents_, ctx.table);
        std::vector<double> probs;
        probs.reserve(keys.size() * k_);
        for (std::size_t i = 0; i < keys.size(); ++i) {
            auto it = table_.find(keys[i]);
            if (it == table_.end()) unmapped(keys[i], i, parents_);
            probs.insert(probs.end(), it->second.begin(), it->second.end());
        }
        const auto codes = draw_categorical(ctx.rng, probs, k_);
        if (k_ == 2 && labels_.empty()) return {{name, binary_column({codes.begin(), codes.end()}, output_)}};
        return {{name, code_column(codes, labels_, output_)}};
    }

private:
    std::vector<std::string> parents_;
    OutputCoercion output_;
    std::map<std::string, std::vector<double>> table_;
    std::vector<std::string> order_;
    std::vector<std::string> labels_;
    std::size_t k_ = 0;
};

/// Output type shared by every alternative, or Real when they disagree.
Column merge_type(std::vector<double> values, const std::vector<const Column*>& sources) {
    if (sources.empty()) return Column(ColumnType::Real, std::move(values));
    const ColumnType t = sources.front()->type();
    const auto& levels = sources.front()->levels();
    for (const auto* c : sources)
        if (c->type() != t || c->levels() != levels) return Column(ColumnType::Real, std::move(values));
    return Column(t, std::move(values), levels);
}

class ConditionalDistrGenerator final : public Generator {
public:
    explicit ConditionalDistrGenerator(const NodeSpec& spec) : parents_(require_parents(spec)) {
        ParamReader p(spec.params, "node '" + spec.name + "'");
        const auto& distr = p.raw("distr");
        if (!distr.is_object() || distr.empty()) p.error("distr", "must map parent values to root distributions");
        for (const auto& [key, v] : distr.items()) {
            NodeSpec sub = sub_node(v, spec.name);
            if (!is_root_type(sub.type))
                fail(ErrorCode::InvalidParameter, "node '" + spec.name + "': stratum '" + key + "' must use a root type");
            strata_.push_back({key, std::make_shared<RootGenerator>(sub)});
        }
        p.finish();
    }

    std::set<std::string> references() const override { return {parents_.begin(), parents_.end()}; }

    std::vector<EquationLine> describe(const std::string& name) const override {
        std::vector<std::string> parts;
        for (const auto& [key, gen] : strata_) parts.push_back(key + ": " + gen->describe(name).front().rhs);
        return {{name, "(" + join(parents_, ", ") + ") -> {" + join(parts, "; ") + "}"}};
    }

    GeneratedColumns generate(const std::string& name, const GenContext& ctx) const override {
        const auto keys = row_keys(parents_, ctx.table);
        std::vector<int> stratum(keys.size(), -1);
        std::vector<std::size_t> counts(strata_.size(), 0);
        for (std::size_t i = 0; i < keys.size(); ++i) {
            for (std::size_t s = 0; s < strata_.size(); ++s)
                if (strata_[s].first == keys[i]) {
                    stratum[i] = static_cast<int>(s);
                    ++counts[s];
                    break;
                }
            if (stratum[i] < 0) unmapped(keys[i], i, parents_);
        }
        std::vector<double> out(keys.size(), kMissing);
        std::vector<Column> drawn;
        std::vector<const Column*> sources;
        drawn.reserve(strata_.size());
        for (std::size_t s = 0; s < strata_.size(); ++s) {
            RngStream sub = ctx.rng.split(s);
            drawn.push_back(strata_[s].second->draw(sub, counts[s]));
            if (counts[s] > 0) sources.push_back(&drawn.back());
        }
        std::vector<std::size_t> next(strata_.size(), 0);
        for (std::size_t i = 0; i < keys.size(); ++i) {
            const auto s = static_cast<std::size_t>(stratum[i]);
            out[i] = drawn[s][next[s]++];
        }
        return {{name, merge_type(std::move(out), sources)}};
    }

private:
    std::vector<std::string> parents_;
    std::vector<std::pair<std::string, std::shared_ptr<const RootGenerator>>> strata_;
};

// ---------------------------------------------------------------------------

bool is_logical(const Expr& e) {
    const auto* b = std::get_if<Expr::Binary>(&e.node);
    if (!b) return false;
    switch (b->op) {
        case BinaryOp::Lt: case BinaryOp::Le: case BinaryOp::Gt: case BinaryOp::Ge:
        case BinaryOp::Eq: case BinaryOp::Ne: case BinaryOp::And: case BinaryOp::Or:
            return true;
        default:
            return false;
    }
}

class IdentityGenerator final : public Generator {
public:
    explicit IdentityGenerator(const NodeSpec& spec) : output_(spec.output) {
        ParamReader p(spec.params, "node '" + spec.name + "'");
        const auto constants = p.constants();
        if (p.has("expr")) text_ = p.string("expr");
        else if (spec.formula) text_ = *spec.formula;
        else p.error("expr", "is required");
        expr_ = parse_expr(text_, constants);
        p.finish();
    }

    std::set<std::string> references() const override { return free_variables(*expr_); }

    std::vector<EquationLine> describe(const std::string& name) const override { return {{name, render(*expr_)}}; }

    GeneratedColumns generate(const std::string& name, const GenContext& ctx) const override {
        auto v = eval_expr(*expr_, ctx.table, ctx.time);
        if (is_logical(*expr_)) return {{name, binary_column(std::move(v), output_)}};
        return {{name, Column(ColumnType::Real, std::move(v))}};
    }

private:
    OutputCoercion output_;
    std::string text_;
    ExprPtr expr_;
};

class MixtureGenerator final : public Generator {
public:
    explicit MixtureGenerator(const NodeSpec& spec) {
        ParamReader p(spec.params, "node '" + spec.name + "'");
        const auto constants = p.constants();
        const auto& comps = p.raw("components");
        if (!comps.is_array() || comps.empty()) p.error("components", "must be a non-empty array");
        for (const auto& c : comps) {
            if (!c.is_object() || !c.contains("when") || !c.contains("node") || c.size() != 2)
                p.error("components", "entries must be {\"when\": expr, \"node\": {...}}");
            components_.push_back({parse_expr(c["when"].get<std::string>(), constants),
                                   checked(make_generator(sub_node(c["node"], spec.name)), spec.name)});
        }
        if (p.has("default")) default_ = checked(make_generator(sub_node(p.raw("default"), spec.name)), spec.name);
        p.finish();
    }

    std::set<std::string> references() const override {
        std::set<std::string> refs;
        for (const auto& [when, gen] : components_) {
            refs.merge(free_variables(*when));
            refs.merge(gen->references());
        }
        if (default_) refs.merge(default_->references());
        return refs;
    }

    std::vector<EquationLine> describe(const std::string& name) const override {
        std::vector<std::string> parts;
        for (const auto& [when, gen] : components_)
            parts.push_back("if " + render(*when) + ": " + gen->describe(name).front().rhs);
        if (default_) parts.push_back("else: " + default_->describe(name).front().rhs);
        return {{name, "Mixture(" + join(parts, "; ") + ")"}};
    }

    GeneratedColumns generate(const std::string& name, const GenContext& ctx) const override {
        const std::size_t n = ctx.table.n_rows();
        std::vector<int> pick(n, -1);
        for (std::size_t c = 0; c < components_.size(); ++c) {
            const auto cond = eval_expr(*components_[c].first, ctx.table, ctx.time);
            for (std::size_t i = 0; i < n; ++i)
                if (pick[i] < 0 && !is_missing(cond[i]) && cond[i] != 0.0) pick[i] = static_cast<int>(c);
        }
        const int fallback = static_cast<int>(components_.size());
        for (std::size_t i = 0; i < n; ++i) {
            if (pick[i] >= 0) continue;
            if (!default_)
                fail(ErrorCode::NoMatchingComponent, "row " + std::to_string(i + 1) + " matches no component");
            pick[i] = fallback;
        }
        std::vector<Column> drawn(components_.size() + 1);
        std::vector<const Column*> sources;
        std::vector<double> out(n, kMissing);
        for (std::size_t c = 0; c <= components_.size(); ++c) {
            const bool used = std::find(pick.begin(), pick.end(), static_cast<int>(c)) != pick.end();
            if (!used) continue;
            const auto& gen = c < components_.size() ? components_[c].second : default_;
            RngStream sub = ctx.rng.split(c);
            GenContext sub_ctx{ctx.table, ctx.n, sub, ctx.time};
            drawn[c] = std::move(gen->generate(name, sub_ctx).front().column);
            sources.push_back(&drawn[c]);
        }
        for (std::size_t i = 0; i < n; ++i) out[i] = drawn[static_cast<std::size_t>(pick[i])][i];
        return {{name, merge_type(std::move(out), sources)}};
    }

private:
    static std::shared_ptr<const Generator> checked(std::shared_ptr<const Generator> g, const std::string& owner) {
        if (g->output_names(owner).size() != 1)
            fail(ErrorCode::InvalidParameter, "node '" + owner + "': mixture components must produce one column");
        return g;
    }

    std::vector<std::pair<ExprPtr, std::shared_ptr<const Generator>>> components_;
    std::shared_ptr<const Generator> default_;
};

// ---------------------------------------------------------------------------

class CoxGenerator final : public Generator {
public:
    explicit CoxGenerator(const NodeSpec& spec) {
        ParamReader p(spec.params, "node '" + spec.name + "'");
        formula_ = require_formula(spec, p.constants());
        surv_ = p.string("surv_dist", "weibull");
        lambda_ = p.number("lambda");
        if (!(lambda_ > 0.0) || !std::isfinite(lambda_)) p.error("lambda", "must be > 0");
        if (surv_ == "weibull") {
            gamma_ = p.number("gamma");
            if (!(gamma_ > 0.0) || !std::isfinite(gamma_)) p.error("gamma", "must be > 0");
        } else if (surv_ != "exponential") {
            p.error("surv_dist", "must be \"weibull\" or \"exponential\"");
        }
        if (p.has("cens_dist")) {
            NodeSpec cens = node(spec.name, p.string("cens_dist"));
            if (!is_root_type(cens.type)) p.error("cens_dist", "must name a root sampler");
            if (p.has("cens_args")) cens.params = p.raw("cens_args");
            cens_args_ = cens.params;
            censor_ = std::make_shared<RootGenerator>(cens);
            cens_type_ = cens.type;
        } else if (p.has("cens_args")) {
            p.error("cens_args", "given without cens_dist");
        }
        two_cols_ = p.boolean("as_two_cols", true);
        if (!two_cols_ && censor_) p.error("as_two_cols", "must be true when censoring is configured");
        p.finish();
    }

    std::set<std::string> references() const override { return free_variables(formula_); }

    std::vector<std::string> output_names(const std::string& name) const override {
        if (!two_cols_) return {name};
        return {name + "_time", name + "_status"};
    }

    std::vector<EquationLine> describe(const std::string& name) const override {
        const std::string inner =
            "-(log(Unif(0, 1))/(" + format_number(lambda_) + "*exp(" + render_rhs(formula_) + ")))";
        std::vector<EquationLine> lines;
        lines.push_back({name + "[T]", surv_ == "weibull" ? "(" + inner + ")^(1/" + format_number(gamma_) + ")" : inner});
        if (censor_) {
            std::vector<std::string> args;
            for (const auto& [k, v] : cens_args_.items()) args.push_back(k + "=" + json_text(v));
            lines.push_back({name + "[C]", cens_type_ + "(" + join(args, ", ") + ")"});
        }
        return lines;
    }

    GeneratedColumns generate(const std::string& name, const GenContext& ctx) const override {
        const auto lp = linear_predictor(formula_, ctx.table);
        check_exp_range(lp);
        const std::size_t n = lp.size();
        RngStream events = ctx.rng.split(0);
        std::vector<double> time(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double u = events.next_uniform();
            time[i] = is_missing(lp[i]) ? kMissing : cox_event_time(u, lp[i], lambda_, gamma_);
        }
        if (!two_cols_) return {{name, Column(ColumnType::Real, std::move(time))}};
        std::vector<double> status(n, 1.0);
        if (censor_) {
            RngStream cs = ctx.rng.split(1);
            const Column c = censor_->draw(cs, n);
            for (std::size_t i = 0; i < n; ++i) {
                if (is_missing(time[i])) {
                    status[i] = kMissing;
                } else if (c[i] < time[i]) {
                    time[i] = c[i];
                    status[i] = 0.0;
                }
            }
        } else {
            for (std::size_t i = 0; i < n; ++i)
                if (is_missing(time[i])) status[i] = kMissing;
        }
        return {{name + "_time", Column(ColumnType::Real, std::move(time))},
                {name + "_status", Column(ColumnType::Integer, std::move(status))}};
    }

private:
    Formula formula_;
    std::string surv_;
    double lambda_ = 1.0;
    double gamma_ = 1.0;
    std::shared_ptr<const RootGenerator> censor_;
    std::string cens_type_;
    Json cens_args_ = Json::object();
    bool two_cols_ = true;
};

Column single(const NodeSpec& spec, const DataTable& table, RngStream& rng, std::optional<int> time = std::nullopt) {
    return std::move(generate(spec, table, rng, time).front().column);
}

}  // namespace

std::shared_ptr<const Generator> make_generator(const NodeSpec& spec) {
    const auto& t = spec.type;
    if (is_root_type(t)) return std::make_shared<RootGenerator>(spec);
    if (t == "gaussian" || t == "binomial" || t == "poisson" || t == "negative_binomial" || t == "zeroinfl")
        return std::make_shared<RegressionGenerator>(spec);
    if (t == "multinomial") return std::make_shared<MultinomialGenerator>(spec);
    if (t == "conditional_prob") return std::make_shared<ConditionalProbGenerator>(spec);
    if (t == "conditional_distr") return std::make_shared<ConditionalDistrGenerator>(spec);
    if (t == "identity") return std::make_shared<IdentityGenerator>(spec);
    if (t == "mixture") return std::make_shared<MixtureGenerator>(spec);
    if (t == "cox") return std::make_shared<CoxGenerator>(spec);
    if (is_event_type(t))
        fail(ErrorCode::UnknownType, "'" + t + "' is a discrete-time process and needs node_td");
    fail(ErrorCode::UnknownType, "unknown node type '" + t + "'");
}

GeneratedColumns generate(const NodeSpec& spec, const DataTable& table, RngStream& rng, std::optional<int> time,
                          std::optional<std::size_t> n) {
    const auto gen = make_generator(spec);
    GenContext ctx{table, n.value_or(table.n_rows()), rng, time};
    return gen->generate(spec.name, ctx);
}

GeneratedColumns gen_root(const NodeSpec& spec, std::size_t n, RngStream& rng) {
    if (!is_root_type(spec.type)) fail(ErrorCode::UnknownType, "'" + spec.type + "' is not a root type");
    const DataTable empty(n);
    return generate(spec, empty, rng, std::nullopt, n);
}

Column gen_gaussian(const NodeSpec& spec, const DataTable& table, RngStream& rng) { return single(spec, table, rng); }
Column gen_binomial(const NodeSpec& spec, const DataTable& table, RngStream& rng) { return single(spec, table, rng); }
Column gen_poisson(const NodeSpec& spec, const DataTable& table, RngStream& rng) { return single(spec, table, rng); }
Column gen_negbinom(const NodeSpec& spec, const DataTable& table, RngStream& rng) { return single(spec, table, rng); }
Column gen_zeroinfl(const NodeSpec& spec, const DataTable& table, RngStream& rng) { return single(spec, table, rng); }
Column gen_multinomial(const NodeSpec& spec, const DataTable& table, RngStream& rng) {
    return single(spec, table, rng);
}
Column gen_conditional_prob(const NodeSpec& spec, const DataTable& table, RngStream& rng) {
    return single(spec, table, rng);
}
Column gen_conditional_distr(const NodeSpec& spec, const DataTable& table, RngStream& rng) {
    return single(spec, table, rng);
}
Column gen_identity(const NodeSpec& spec, const DataTable& table, std::optional<int> time) {
    RngStream unused;
    return single(spec, table, unused, time);
}
Column gen_mixture(const NodeSpec& spec, const DataTable& table, RngStream& rng) { return single(spec, table, rng); }
GeneratedColumns gen_cox(const NodeSpec& spec, const DataTable& table, RngStream& rng) {
    return generate(spec, table, rng);
}

}  // namespace dagsim
