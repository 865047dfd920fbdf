#include "dagsim/formula.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <tuple>

#include "dagsim/error.hpp"

namespace dagsim {

namespace {

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

enum class Tok {
    End,
    Number,
    Ident,
    String,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    Lt,
    Le,
    Gt,
    Ge,
    EqEq,
    Ne,
    And,
    Or,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Colon,
    Tilde,
    Assign,
};

struct Token {
    Tok type = Tok::End;
    std::string text;
    double number = 0.0;
    std::size_t pos = 0;
};

const char* describe(Tok t) {
    switch (t) {
        case Tok::End: return "end of input";
        case Tok::Number: return "number";
        case Tok::Ident: return "identifier";
        case Tok::String: return "string";
        case Tok::Plus: return "'+'";
        case Tok::Minus: return "'-'";
        case Tok::Star: return "'*'";
        case Tok::Slash: return "'/'";
        case Tok::Caret: return "'^'";
        case Tok::Lt: return "'<'";
        case Tok::Le: return "'<='";
        case Tok::Gt: return "'>'";
        case Tok::Ge: return "'>='";
        case Tok::EqEq: return "'=='";
        case Tok::Ne: return "'!='";
        case Tok::And: return "'and'";
        case Tok::Or: return "'or'";
        case Tok::LParen: return "'('";
        case Tok::RParen: return "')'";
        case Tok::LBracket: return "'['";
        case Tok::RBracket: return "']'";
        case Tok::Comma: return "','";
        case Tok::Colon: return "':'";
        case Tok::Tilde: return "'~'";
        case Tok::Assign: return "'='";
    }
    return "token";
}

[[noreturn]] void syntax_error(std::size_t pos, const std::string& msg) {
    fail(ErrorCode::SyntaxError, "at position " + std::to_string(pos) + ": " + msg);
}

std::vector<Token> tokenize(std::string_view src) {
    std::vector<Token> out;
    std::size_t i = 0;
    auto is_ident_start = [](char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; };
    auto is_ident_char = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; };

    while (i < src.size()) {
        const char c = src[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
            continue;
        }
        Token tok;
        tok.pos = i;
        if (std::isdigit(static_cast<unsigned char>(c)) ||
            (c == '.' && i + 1 < src.size() && std::isdigit(static_cast<unsigned char>(src[i + 1])))) {
            std::size_t j = i;
            while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
            if (j < src.size() && src[j] == '.') {
                ++j;
                while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
            }
            if (j < src.size() && (src[j] == 'e' || src[j] == 'E')) {
                std::size_t k = j + 1;
                if (k < src.size() && (src[k] == '+' || src[k] == '-')) ++k;
                if (k < src.size() && std::isdigit(static_cast<unsigned char>(src[k]))) {
                    while (k < src.size() && std::isdigit(static_cast<unsigned char>(src[k]))) ++k;
                    j = k;
                }
            }
            tok.type = Tok::Number;
            tok.text = std::string(src.substr(i, j - i));
            auto res = std::from_chars(tok.text.data(), tok.text.data() + tok.text.size(), tok.number);
            if (res.ec != std::errc())
                syntax_error(i, "malformed number '" + tok.text + "'");
            i = j;
        } else if (is_ident_start(c)) {
            std::size_t j = i;
            while (j < src.size() && is_ident_char(src[j])) ++j;
            tok.text = std::string(src.substr(i, j - i));
            if (tok.text == "and")
                tok.type = Tok::And;
            else if (tok.text == "or")
                tok.type = Tok::Or;
            else
                tok.type = Tok::Ident;
            i = j;
        } else if (c == '"' || c == '\'') {
            std::size_t j = i + 1;
            while (j < src.size() && src[j] != c) ++j;
            if (j >= src.size()) syntax_error(i, "unterminated string");
            tok.type = Tok::String;
            tok.text = std::string(src.substr(i + 1, j - i - 1));
            i = j + 1;
        } else {
            auto two = src.substr(i, 2);
            auto single = [&](Tok t) {
                tok.type = t;
                tok.text = std::string(1, c);
                ++i;
            };
            auto dbl = [&](Tok t) {
                tok.type = t;
                tok.text = std::string(two);
                i += 2;
            };
            if (two == "<=") dbl(Tok::Le);
            else if (two == ">=") dbl(Tok::Ge);
            else if (two == "==") dbl(Tok::EqEq);
            else if (two == "!=") dbl(Tok::Ne);
            else if (two == "&&") dbl(Tok::And);
            else if (two == "||") dbl(Tok::Or);
            else {
                switch (c) {
                    case '+': single(Tok::Plus); break;
                    case '-': single(Tok::Minus); break;
                    case '*': single(Tok::Star); break;
                    case '/': single(Tok::Slash); break;
                    case '^': single(Tok::Caret); break;
                    case '<': single(Tok::Lt); break;
                    case '>': single(Tok::Gt); break;
                    case '&': single(Tok::And); break;
                    case '|': single(Tok::Or); break;
                    case '(': single(Tok::LParen); break;
                    case ')': single(Tok::RParen); break;
                    case '[': single(Tok::LBracket); break;
                    case ']': single(Tok::RBracket); break;
                    case ',': single(Tok::Comma); break;
                    case ':': single(Tok::Colon); break;
                    case '~': single(Tok::Tilde); break;
                    case '=': single(Tok::Assign); break;
                    default: syntax_error(i, std::string("unexpected character '") + c + "'");
                }
            }
        }
        out.push_back(std::move(tok));
    }
    Token end;
    end.type = Tok::End;
    end.pos = src.size();
    out.push_back(end);
    return out;
}

// Joins source tokens back into normalised text: no spaces except after
// commas and around word operators.
std::string join_tokens(const std::vector<Token>& toks, std::size_t begin, std::size_t end) {
    std::string s;
    for (std::size_t i = begin; i < end; ++i) {
        const auto& t = toks[i];
        switch (t.type) {
            case Tok::Comma: s += ", "; break;
            case Tok::And: s += " and "; break;
            case Tok::Or: s += " or "; break;
            case Tok::String: s += '"' + t.text + '"'; break;
            default: s += t.text; break;
        }
    }
    return s;
}

// ---------------------------------------------------------------------------
// Tree helpers
// ---------------------------------------------------------------------------

ExprPtr make(Expr::Number n) { return std::make_shared<const Expr>(Expr{n}); }
ExprPtr make_number(double v) { return make(Expr::Number{v}); }

template <class Node>
ExprPtr make_node(Node n) {
    return std::make_shared<const Expr>(Expr{std::move(n)});
}

std::optional<Builtin> builtin_from_name(std::string_view name) {
    if (name == "log") return Builtin::Log;
    if (name == "exp") return Builtin::Exp;
    if (name == "sqrt") return Builtin::Sqrt;
    if (name == "abs") return Builtin::Abs;
    if (name == "min") return Builtin::Min;
    if (name == "max") return Builtin::Max;
    return std::nullopt;
}

const char* builtin_name(Builtin fn) {
    switch (fn) {
        case Builtin::Log: return "log";
        case Builtin::Exp: return "exp";
        case Builtin::Sqrt: return "sqrt";
        case Builtin::Abs: return "abs";
        case Builtin::Min: return "min";
        case Builtin::Max: return "max";
    }
    return "?";
}

double apply_binary(BinaryOp op, double a, double b) {
    switch (op) {
        case BinaryOp::Add: return a + b;
        case BinaryOp::Sub: return a - b;
        case BinaryOp::Mul: return a * b;
        case BinaryOp::Div: return a / b;
        case BinaryOp::Pow: return (a == 0.0 && b == 0.0) ? 1.0 : std::pow(a, b);
        case BinaryOp::Lt: return a < b ? 1.0 : 0.0;
        case BinaryOp::Le: return a <= b ? 1.0 : 0.0;
        case BinaryOp::Gt: return a > b ? 1.0 : 0.0;
        case BinaryOp::Ge: return a >= b ? 1.0 : 0.0;
        case BinaryOp::Eq: return a == b ? 1.0 : 0.0;
        case BinaryOp::Ne: return a != b ? 1.0 : 0.0;
        case BinaryOp::And: return (a != 0.0 && b != 0.0) ? 1.0 : 0.0;
        case BinaryOp::Or: return (a != 0.0 || b != 0.0) ? 1.0 : 0.0;
    }
    return kMissing;
}

[[noreturn]] void domain_error(const char* what, double x, std::size_t row) {
    fail(ErrorCode::DomainError,
         std::string(what) + " of " + format_number(x) + " at row " + std::to_string(row + 1));
}

double apply_unary_builtin(Builtin fn, double x, std::size_t row) {
    if (is_missing(x)) return kMissing;
    switch (fn) {
        case Builtin::Log:
            if (x <= 0.0) domain_error("log", x, row);
            return std::log(x);
        case Builtin::Exp: return std::exp(x);
        case Builtin::Sqrt:
            if (x < 0.0) domain_error("sqrt", x, row);
            return std::sqrt(x);
        case Builtin::Abs: return std::abs(x);
        default: break;
    }
    return kMissing;
}

double checked_binary(BinaryOp op, double a, double b, std::size_t row) {
    if (is_missing(a) || is_missing(b)) return kMissing;
    const double r = apply_binary(op, a, b);
    if (is_missing(r)) {
        const char* name = op == BinaryOp::Div ? "division" : op == BinaryOp::Pow ? "power" : "arithmetic";
        fail(ErrorCode::DomainError, std::string(name) + " of " + format_number(a) + " and " +
                                         format_number(b) + " is undefined at row " +
                                         std::to_string(row + 1));
    }
    return r;
}

int precedence(BinaryOp op) {
    switch (op) {
        case BinaryOp::Or: return 1;
        case BinaryOp::And: return 2;
        case BinaryOp::Lt:
        case BinaryOp::Le:
        case BinaryOp::Gt:
        case BinaryOp::Ge:
        case BinaryOp::Eq:
        case BinaryOp::Ne: return 3;
        case BinaryOp::Add:
        case BinaryOp::Sub: return 4;
        case BinaryOp::Mul:
        case BinaryOp::Div: return 5;
        case BinaryOp::Pow: return 6;
    }
    return 0;
}

const char* op_text(BinaryOp op) {
    switch (op) {
        case BinaryOp::Add: return " + ";
        case BinaryOp::Sub: return " - ";
        case BinaryOp::Mul: return "*";
        case BinaryOp::Div: return "/";
        case BinaryOp::Pow: return "^";
        case BinaryOp::Lt: return " < ";
        case BinaryOp::Le: return " <= ";
        case BinaryOp::Gt: return " > ";
        case BinaryOp::Ge: return " >= ";
        case BinaryOp::Eq: return " == ";
        case BinaryOp::Ne: return " != ";
        case BinaryOp::And: return " and ";
        case BinaryOp::Or: return " or ";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

class Parser {
public:
    Parser(std::string_view src, const ConstantMap& constants)
        : toks_(tokenize(src)), constants_(constants) {}

    ExprPtr parse_whole_expr() {
        auto e = parse_or();
        expect_end();
        return e;
    }

    Formula parse_whole_formula() {
        Formula f;
        expect(Tok::Tilde);
        char sep = '+';
        std::set<std::string> seen;
        while (true) {
            const std::size_t begin = i_;
            parse_component(f, sep == '-', seen);
            f.components.push_back({sep, join_tokens(toks_, begin, i_)});
            if (peek().type == Tok::Plus) {
                sep = '+';
                ++i_;
            } else if (peek().type == Tok::Minus) {
                sep = '-';
                ++i_;
            } else {
                break;
            }
        }
        expect_end();
        return f;
    }

private:
    std::vector<Token> toks_;
    const ConstantMap& constants_;
    std::size_t i_ = 0;

    const Token& peek(std::size_t ahead = 0) const {
        return toks_[std::min(i_ + ahead, toks_.size() - 1)];
    }
    const Token& next() { return toks_[i_ < toks_.size() - 1 ? i_++ : i_]; }

    bool accept(Tok t) {
        if (peek().type == t) {
            ++i_;
            return true;
        }
        return false;
    }

    const Token& expect(Tok t) {
        if (peek().type != t)
            syntax_error(peek().pos, std::string("expected ") + describe(t) + ", found " + found());
        return next();
    }

    void expect_end() {
        if (peek().type != Tok::End)
            syntax_error(peek().pos, std::string("expected end of input, found ") + found());
    }

    std::string found() const {
        const auto& t = peek();
        if (t.type == Tok::End) return "end of input";
        return "'" + t.text + "'";
    }

    // --- expressions ------------------------------------------------------

    static ExprPtr fold_binary(BinaryOp op, ExprPtr lhs, ExprPtr rhs) {
        auto a = constant_value(*lhs);
        auto b = constant_value(*rhs);
        if (a && b) return make_number(checked_binary(op, *a, *b, 0));
        return make_node(Expr::Binary{op, std::move(lhs), std::move(rhs)});
    }

    ExprPtr parse_or() {
        auto lhs = parse_and();
        while (accept(Tok::Or)) lhs = fold_binary(BinaryOp::Or, lhs, parse_and());
        return lhs;
    }

    ExprPtr parse_and() {
        auto lhs = parse_cmp();
        while (accept(Tok::And)) lhs = fold_binary(BinaryOp::And, lhs, parse_cmp());
        return lhs;
    }

    ExprPtr parse_cmp() {
        auto lhs = parse_add();
        while (true) {
            BinaryOp op;
            switch (peek().type) {
                case Tok::Lt: op = BinaryOp::Lt; break;
                case Tok::Le: op = BinaryOp::Le; break;
                case Tok::Gt: op = BinaryOp::Gt; break;
                case Tok::Ge: op = BinaryOp::Ge; break;
                case Tok::EqEq: op = BinaryOp::Eq; break;
                case Tok::Ne: op = BinaryOp::Ne; break;
                default: return lhs;
            }
            ++i_;
            lhs = fold_binary(op, lhs, parse_add());
        }
    }

    ExprPtr parse_add() {
        auto lhs = parse_mul();
        while (true) {
            if (accept(Tok::Plus))
                lhs = fold_binary(BinaryOp::Add, lhs, parse_mul());
            else if (accept(Tok::Minus))
                lhs = fold_binary(BinaryOp::Sub, lhs, parse_mul());
            else
                return lhs;
        }
    }

    ExprPtr parse_mul() {
        auto lhs = parse_pow();
        while (true) {
            if (accept(Tok::Star))
                lhs = fold_binary(BinaryOp::Mul, lhs, parse_pow());
            else if (accept(Tok::Slash))
                lhs = fold_binary(BinaryOp::Div, lhs, parse_pow());
            else
                return lhs;
        }
    }

    // right associative: 2^3^2 == 2^9
    ExprPtr parse_pow() {
        auto base = parse_unary();
        if (accept(Tok::Caret)) return fold_binary(BinaryOp::Pow, base, parse_pow());
        return base;
    }

    ExprPtr parse_unary() {
        if (accept(Tok::Minus)) {
            auto operand = parse_unary();
            if (auto v = constant_value(*operand)) return make_number(-*v);
            return make_node(Expr::Neg{std::move(operand)});
        }
        if (accept(Tok::Plus)) return parse_unary();
        return parse_primary();
    }

    ExprPtr parse_primary() {
        const Token& t = peek();
        switch (t.type) {
            case Tok::Number:
                ++i_;
                return make_number(t.number);
            case Tok::LParen: {
                ++i_;
                auto e = parse_or();
                expect(Tok::RParen);
                return e;
            }
            case Tok::Ident: {
                const std::string name = t.text;
                const std::size_t pos = t.pos;
                ++i_;
                if (peek().type == Tok::LParen) return parse_call(name, pos);
                if (name == "sim_time") return make_node(Expr::TimeRef{});
                if (name == "true" || name == "TRUE") return make_number(1.0);
                if (name == "false" || name == "FALSE") return make_number(0.0);
                if (auto it = constants_.find(name); it != constants_.end())
                    return make_number(it->second);
                return make_node(Expr::ColumnRef{name});
            }
            default:
                syntax_error(t.pos, std::string("expected an expression, found ") + found());
        }
    }

    ExprPtr parse_call(const std::string& name, std::size_t pos) {
        expect(Tok::LParen);
        if (name == "ifelse" || name == "fifelse") return parse_ifelse(pos);
        auto fn = builtin_from_name(name);
        if (!fn) fail(ErrorCode::UnknownFunction, "unknown function '" + name + "' at position " + std::to_string(pos));
        std::vector<ExprPtr> args;
        if (peek().type != Tok::RParen) {
            do {
                args.push_back(parse_or());
            } while (accept(Tok::Comma));
        }
        expect(Tok::RParen);
        const bool variadic = *fn == Builtin::Min || *fn == Builtin::Max;
        if ((variadic && args.empty()) || (!variadic && args.size() != 1))
            syntax_error(pos, "wrong number of arguments to '" + name + "'");

        if (std::all_of(args.begin(), args.end(), [](const ExprPtr& a) { return constant_value(*a).has_value(); })) {
            if (variadic) {
                double acc = *constant_value(*args[0]);
                for (std::size_t k = 1; k < args.size(); ++k) {
                    const double v = *constant_value(*args[k]);
                    acc = *fn == Builtin::Min ? std::min(acc, v) : std::max(acc, v);
                }
                return make_number(acc);
            }
            return make_number(apply_unary_builtin(*fn, *constant_value(*args[0]), 0));
        }
        return make_node(Expr::Call{*fn, std::move(args)});
    }

    ExprPtr parse_ifelse(std::size_t pos) {
        Expr::IfElse node;
        node.cond = parse_or();
        expect(Tok::Comma);
        node.then_branch = parse_or();
        expect(Tok::Comma);
        node.else_branch = parse_or();
        if (accept(Tok::Comma)) {
            if (peek().type == Tok::Ident && peek().text == "na" && peek(1).type == Tok::Assign) i_ += 2;
            node.na_default = parse_or();
        }
        if (peek().type != Tok::RParen) syntax_error(pos, "ifelse takes at most four arguments");
        expect(Tok::RParen);
        if (auto c = constant_value(*node.cond)) {
            if (is_missing(*c)) return node.na_default ? node.na_default : make_number(kMissing);
            return *c != 0.0 ? node.then_branch : node.else_branch;
        }
        return make_node(std::move(node));
    }

    // --- formulas ---------------------------------------------------------

    struct DataPart {
        std::vector<Factor> factors;
    };

    void parse_component(Formula& f, bool negate, std::set<std::string>& seen) {
        double coef = negate ? -1.0 : 1.0;
        std::optional<DataPart> data;
        do {
            const std::size_t pos = peek().pos;
            double sign = 1.0;
            while (accept(Tok::Minus)) sign = -sign;
            coef *= sign;
            if (auto part = try_parse_data()) {
                if (data)
                    fail(ErrorCode::NonConstantCoefficient,
                         "at position " + std::to_string(pos) +
                             ": a coefficient factor references a column; use ':' for interactions or I(...)");
                data = std::move(part);
            } else {
                auto e = parse_pow();
                auto v = constant_value(*e);
                if (!v)
                    fail(ErrorCode::NonConstantCoefficient,
                         "at position " + std::to_string(pos) + ": coefficient '" + render(*e) +
                             "' references a column outside I(...)");
                coef *= *v;
            }
        } while (accept(Tok::Star));

        if (!data) {
            f.intercept += coef;
            return;
        }
        std::vector<std::string> sig;
        for (const auto& fac : data->factors) sig.push_back(fac.signature());
        std::sort(sig.begin(), sig.end());
        std::string key;
        for (const auto& s : sig) key += s + ":";
        if (!seen.insert(key).second)
            fail(ErrorCode::DuplicateTerm, "term '" + key.substr(0, key.size() - 1) + "' appears more than once");
        f.terms.push_back(Term{coef, std::move(data->factors)});
    }

    // A data primary, or a ':' chain of them. Returns nullopt (consuming
    // nothing) when the next primary is a constant.
    std::optional<DataPart> try_parse_data() {
        auto first = try_parse_data_factor();
        if (!first) return std::nullopt;
        DataPart part;
        part.factors.push_back(std::move(*first));
        while (accept(Tok::Colon)) {
            const std::size_t pos = peek().pos;
            auto fac = try_parse_data_factor();
            if (!fac) syntax_error(pos, "expected a variable after ':'");
            part.factors.push_back(std::move(*fac));
        }
        return part;
    }

    std::optional<Factor> try_parse_data_factor() {
        const Token& t = peek();
        if (t.type != Tok::Ident) return std::nullopt;
        const std::string name = t.text;
        const Token& after = peek(1);
        if (name == "I" && after.type == Tok::LParen) {
            i_ += 2;
            Factor fac;
            fac.kind = Factor::Kind::Wrapped;
            fac.expr = parse_or();
            expect(Tok::RParen);
            if (constant_value(*fac.expr)) syntax_error(t.pos, "I(...) must reference at least one column");
            return fac;
        }
        if (after.type == Tok::LParen) return std::nullopt;  // constant call such as log(3)
        if (constants_.count(name) || name == "true" || name == "false" || name == "TRUE" || name == "FALSE")
            return std::nullopt;
        if (name == "sim_time") syntax_error(t.pos, "sim_time is only allowed inside I(...)");
        ++i_;
        Factor fac;
        fac.column = name;
        if (accept(Tok::LBracket)) {
            const Token& lvl = next();
            if (lvl.type != Tok::Ident && lvl.type != Tok::Number && lvl.type != Tok::String)
                syntax_error(lvl.pos, "expected a level label inside []");
            fac.kind = Factor::Kind::Dummy;
            fac.level = lvl.text;
            expect(Tok::RBracket);
        } else if (peek().type == Tok::Caret && peek(1).type == Tok::Number) {
            const Token& k = peek(1);
            if (k.number < 1 || std::floor(k.number) != k.number)
                syntax_error(k.pos, "power exponent must be a positive integer");
            i_ += 2;
            fac.kind = Factor::Kind::Power;
            fac.exponent = static_cast<int>(k.number);
        }
        return fac;
    }
};

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

void render_into(const Expr& e, std::string& out, int parent_prec, bool right_side);

void render_into(const Expr& e, std::string& out, int parent_prec, bool right_side) {
    std::visit(
        [&](const auto& n) {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, Expr::Number>) {
                out += format_number(n.value);
            } else if constexpr (std::is_same_v<T, Expr::ColumnRef>) {
                out += n.name;
            } else if constexpr (std::is_same_v<T, Expr::TimeRef>) {
                out += "sim_time";
            } else if constexpr (std::is_same_v<T, Expr::Neg>) {
                out += "-";
                render_into(*n.operand, out, 7, false);
            } else if constexpr (std::is_same_v<T, Expr::Binary>) {
                const int prec = precedence(n.op);
                const bool right_assoc = n.op == BinaryOp::Pow;
                bool paren = prec < parent_prec || (prec == parent_prec && (right_side != right_assoc));
                if (paren) out += "(";
                render_into(*n.lhs, out, prec, false);
                out += op_text(n.op);
                render_into(*n.rhs, out, prec, true);
                if (paren) out += ")";
            } else if constexpr (std::is_same_v<T, Expr::Call>) {
                out += builtin_name(n.fn);
                out += "(";
                for (std::size_t k = 0; k < n.args.size(); ++k) {
                    if (k) out += ", ";
                    render_into(*n.args[k], out, 0, false);
                }
                out += ")";
            } else if constexpr (std::is_same_v<T, Expr::IfElse>) {
                out += "ifelse(";
                render_into(*n.cond, out, 0, false);
                out += ", ";
                render_into(*n.then_branch, out, 0, false);
                out += ", ";
                render_into(*n.else_branch, out, 0, false);
                if (n.na_default) {
                    out += ", na=";
                    render_into(*n.na_default, out, 0, false);
                }
                out += ")";
            }
        },
        e.node);
}

void collect_vars(const Expr& e, std::set<std::string>& out) {
    std::visit(
        [&](const auto& n) {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, Expr::ColumnRef>) {
                out.insert(n.name);
            } else if constexpr (std::is_same_v<T, Expr::Neg>) {
                collect_vars(*n.operand, out);
            } else if constexpr (std::is_same_v<T, Expr::Binary>) {
                collect_vars(*n.lhs, out);
                collect_vars(*n.rhs, out);
            } else if constexpr (std::is_same_v<T, Expr::Call>) {
                for (const auto& a : n.args) collect_vars(*a, out);
            } else if constexpr (std::is_same_v<T, Expr::IfElse>) {
                collect_vars(*n.cond, out);
                collect_vars(*n.then_branch, out);
                collect_vars(*n.else_branch, out);
                if (n.na_default) collect_vars(*n.na_default, out);
            }
        },
        e.node);
}

bool ptr_equal(const ExprPtr& a, const ExprPtr& b) {
    if (!a || !b) return !a && !b;
    return *a == *b;
}

}  // namespace

// ---------------------------------------------------------------------------
// Public expression API
// ---------------------------------------------------------------------------

bool operator==(const Expr& a, const Expr& b) {
    if (a.node.index() != b.node.index()) return false;
    return std::visit(
        [&](const auto& x) -> bool {
            using T = std::decay_t<decltype(x)>;
            const auto& y = std::get<T>(b.node);
            if constexpr (std::is_same_v<T, Expr::Number>) {
                return x.value == y.value || (is_missing(x.value) && is_missing(y.value));
            } else if constexpr (std::is_same_v<T, Expr::ColumnRef>) {
                return x.name == y.name;
            } else if constexpr (std::is_same_v<T, Expr::TimeRef>) {
                return true;
            } else if constexpr (std::is_same_v<T, Expr::Neg>) {
                return ptr_equal(x.operand, y.operand);
            } else if constexpr (std::is_same_v<T, Expr::Binary>) {
                return x.op == y.op && ptr_equal(x.lhs, y.lhs) && ptr_equal(x.rhs, y.rhs);
            } else if constexpr (std::is_same_v<T, Expr::Call>) {
                if (x.fn != y.fn || x.args.size() != y.args.size()) return false;
                for (std::size_t k = 0; k < x.args.size(); ++k)
                    if (!ptr_equal(x.args[k], y.args[k])) return false;
                return true;
            } else {
                return ptr_equal(x.cond, y.cond) && ptr_equal(x.then_branch, y.then_branch) &&
                       ptr_equal(x.else_branch, y.else_branch) && ptr_equal(x.na_default, y.na_default);
            }
        },
        a.node);
}

ExprPtr parse_expr(std::string_view text, const ConstantMap& constants) {
    return Parser(text, constants).parse_whole_expr();
}

std::string render(const Expr& expr) {
    std::string out;
    render_into(expr, out, 0, false);
    return out;
}

std::set<std::string> free_variables(const Expr& expr) {
    std::set<std::string> out;
    collect_vars(expr, out);
    return out;
}

bool uses_time(const Expr& expr) {
    return std::visit(
        [&](const auto& n) -> bool {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, Expr::TimeRef>) {
                return true;
            } else if constexpr (std::is_same_v<T, Expr::Neg>) {
                return uses_time(*n.operand);
            } else if constexpr (std::is_same_v<T, Expr::Binary>) {
                return uses_time(*n.lhs) || uses_time(*n.rhs);
            } else if constexpr (std::is_same_v<T, Expr::Call>) {
                return std::any_of(n.args.begin(), n.args.end(), [](const ExprPtr& a) { return uses_time(*a); });
            } else if constexpr (std::is_same_v<T, Expr::IfElse>) {
                return uses_time(*n.cond) || uses_time(*n.then_branch) || uses_time(*n.else_branch) ||
                       (n.na_default && uses_time(*n.na_default));
            } else {
                return false;
            }
        },
        expr.node);
}

std::optional<double> constant_value(const Expr& expr) {
    if (const auto* n = std::get_if<Expr::Number>(&expr.node)) return n->value;
    return std::nullopt;
}

std::span<double> ExprEvaluator::scratch(std::size_t depth, std::size_t slot) {
    const std::size_t k = depth * kSlots + slot;
    if (pool_.size() <= k) pool_.resize(k + 1);
    auto& buf = pool_[k];
    buf.resize(table_->n_rows());
    return buf;
}

void ExprEvaluator::evaluate(const Expr& expr, const DataTable& table, std::optional<int> time,
                             std::span<double> out) {
    table_ = &table;
    time_ = time;
    eval(expr, 0, out);
    table_ = nullptr;
}

// Children of a node at `depth` evaluate at depth + 1, so the node's own
// scratch slots stay untouched while they run.
void ExprEvaluator::eval(const Expr& expr, std::size_t depth, std::span<double> out) {
    const std::size_t n = out.size();
    auto eval_or_constant = [&](const ExprPtr& e, std::size_t slot) -> std::pair<std::optional<double>, std::span<double>> {
        if (auto c = constant_value(*e)) return {c, {}};
        auto buf = scratch(depth, slot);
        eval(*e, depth + 1, buf);
        return {std::nullopt, buf};
    };
    std::visit(
        [&](const auto& node) {
            using T = std::decay_t<decltype(node)>;
            if constexpr (std::is_same_v<T, Expr::Number>) {
                std::fill(out.begin(), out.end(), node.value);
            } else if constexpr (std::is_same_v<T, Expr::ColumnRef>) {
                const auto src = table_->column(node.name).values();
                std::copy(src.begin(), src.end(), out.begin());
            } else if constexpr (std::is_same_v<T, Expr::TimeRef>) {
                if (!time_)
                    fail(ErrorCode::TimeOutsideSimulation, "sim_time used outside a discrete-time simulation");
                std::fill(out.begin(), out.end(), static_cast<double>(*time_));
            } else if constexpr (std::is_same_v<T, Expr::Neg>) {
                eval(*node.operand, depth + 1, out);
                for (auto& v : out) v = -v;
            } else if constexpr (std::is_same_v<T, Expr::Binary>) {
                eval(*node.lhs, depth + 1, out);
                auto [rc, rhs] = eval_or_constant(node.rhs, 0);
                const BinaryOp op = node.op;
                if (rc) {
                    const double r = *rc;
                    for (std::size_t i = 0; i < n; ++i) out[i] = checked_binary(op, out[i], r, i);
                } else {
                    for (std::size_t i = 0; i < n; ++i) out[i] = checked_binary(op, out[i], rhs[i], i);
                }
            } else if constexpr (std::is_same_v<T, Expr::Call>) {
                eval(*node.args[0], depth + 1, out);
                if (node.fn == Builtin::Min || node.fn == Builtin::Max) {
                    const bool is_min = node.fn == Builtin::Min;
                    for (std::size_t k = 1; k < node.args.size(); ++k) {
                        auto [c, tmp] = eval_or_constant(node.args[k], 0);
                        for (std::size_t i = 0; i < n; ++i) {
                            const double b = c ? *c : tmp[i];
                            if (is_missing(out[i]) || is_missing(b)) out[i] = kMissing;
                            else out[i] = is_min ? std::min(out[i], b) : std::max(out[i], b);
                        }
                    }
                } else {
                    for (std::size_t i = 0; i < n; ++i) out[i] = apply_unary_builtin(node.fn, out[i], i);
                }
            } else if constexpr (std::is_same_v<T, Expr::IfElse>) {
                eval(*node.cond, depth + 1, out);
                auto [then_c, then_buf] = eval_or_constant(node.then_branch, 0);
                auto [else_c, else_buf] = eval_or_constant(node.else_branch, 1);
                std::optional<double> na_c;
                std::span<double> na_buf;
                if (node.na_default) std::tie(na_c, na_buf) = eval_or_constant(node.na_default, 2);
                for (std::size_t i = 0; i < n; ++i) {
                    const double c = out[i];
                    if (is_missing(c)) {
                        if (!node.na_default) out[i] = kMissing;
                        else out[i] = na_c ? *na_c : na_buf[i];
                    } else if (c != 0.0) {
                        out[i] = then_c ? *then_c : then_buf[i];
                    } else {
                        out[i] = else_c ? *else_c : else_buf[i];
                    }
                }
            }
        },
        expr.node);
}

std::vector<double> eval_expr(const Expr& expr, const DataTable& table, std::optional<int> time) {
    std::vector<double> out(table.n_rows());
    ExprEvaluator ev;
    ev.evaluate(expr, table, time, out);
    return out;
}

// ---------------------------------------------------------------------------
// Formulas
// ---------------------------------------------------------------------------

std::string Factor::signature() const {
    switch (kind) {
        case Kind::Column: return column;
        case Kind::Power: return column + "^" + std::to_string(exponent);
        case Kind::Wrapped: return "I(" + render(*expr) + ")";
        case Kind::Dummy: return column + "[" + level + "]";
    }
    return column;
}

bool operator==(const Factor& a, const Factor& b) {
    if (a.kind != b.kind) return false;
    switch (a.kind) {
        case Factor::Kind::Column: return a.column == b.column;
        case Factor::Kind::Power: return a.column == b.column && a.exponent == b.exponent;
        case Factor::Kind::Wrapped: return ptr_equal(a.expr, b.expr);
        case Factor::Kind::Dummy: return a.column == b.column && a.level == b.level;
    }
    return false;
}

bool operator==(const Term& a, const Term& b) {
    return a.coefficient == b.coefficient && a.factors == b.factors;
}

bool operator==(const Formula& a, const Formula& b) {
    return a.intercept == b.intercept && a.terms == b.terms;
}

Formula parse_formula(std::string_view text, const ConstantMap& constants) {
    return Parser(text, constants).parse_whole_formula();
}

std::string render_rhs(const Formula& formula) {
    if (formula.components.empty()) {
        // built programmatically: fall back to a canonical rendering
        std::string s = format_number(formula.intercept);
        for (const auto& t : formula.terms) {
            s += " + ";
            for (std::size_t k = 0; k < t.factors.size(); ++k) {
                if (k) s += ":";
                s += t.factors[k].signature();
            }
            s += "*" + format_number(t.coefficient);
        }
        return s;
    }
    std::string s;
    for (std::size_t k = 0; k < formula.components.size(); ++k) {
        const auto& c = formula.components[k];
        if (k) s += c.separator == '-' ? " - " : " + ";
        else if (c.separator == '-') s += "-";
        s += c.text;
    }
    return s;
}

std::string render(const Formula& formula) { return "~ " + render_rhs(formula); }

std::set<std::string> free_variables(const Formula& formula) {
    std::set<std::string> out;
    for (const auto& t : formula.terms)
        for (const auto& f : t.factors) {
            if (f.kind == Factor::Kind::Wrapped) collect_vars(*f.expr, out);
            else out.insert(f.column);
        }
    return out;
}

namespace {

void multiply_factor(const Factor& f, const DataTable& table, std::span<double> acc, ExprEvaluator& ev,
                     std::vector<double>& tmp) {
    const std::size_t n = acc.size();
    switch (f.kind) {
        case Factor::Kind::Column: {
            const auto v = table.column(f.column).values();
            for (std::size_t i = 0; i < n; ++i) acc[i] *= v[i];
            break;
        }
        case Factor::Kind::Power: {
            const auto v = table.column(f.column).values();
            for (std::size_t i = 0; i < n; ++i) acc[i] *= std::pow(v[i], f.exponent);
            break;
        }
        case Factor::Kind::Wrapped: {
            tmp.resize(n);
            ev.evaluate(*f.expr, table, std::nullopt, tmp);
            for (std::size_t i = 0; i < n; ++i) acc[i] *= tmp[i];
            break;
        }
        case Factor::Kind::Dummy: {
            const Column& col = table.column(f.column);
            double target = kMissing;
            if (!col.levels().empty()) {
                const auto& lv = col.levels();
                auto it = std::find(lv.begin(), lv.end(), f.level);
                if (it == lv.end())
                    fail(ErrorCode::UnknownLevel,
                         "column '" + f.column + "' has no level '" + f.level + "'");
                target = static_cast<double>(it - lv.begin());
            } else if (col.type() == ColumnType::Boolean && (f.level == "true" || f.level == "TRUE")) {
                target = 1.0;
            } else if (col.type() == ColumnType::Boolean && (f.level == "false" || f.level == "FALSE")) {
                target = 0.0;
            } else {
                double parsed = 0.0;
                auto res = std::from_chars(f.level.data(), f.level.data() + f.level.size(), parsed);
                if (res.ec != std::errc() || res.ptr != f.level.data() + f.level.size())
                    fail(ErrorCode::UnknownLevel,
                         "column '" + f.column + "' has no level '" + f.level + "'");
                target = parsed;
            }
            const auto v = col.values();
            for (std::size_t i = 0; i < n; ++i)
                acc[i] *= is_missing(v[i]) ? kMissing : (v[i] == target ? 1.0 : 0.0);
            break;
        }
    }
}

}  // namespace

std::vector<double> linear_predictor(const Formula& formula, const DataTable& table) {
    const std::size_t n = table.n_rows();
    std::vector<double> lp(n, formula.intercept);
    std::vector<double> term(n);
    std::vector<double> tmp;
    ExprEvaluator ev;
    for (const auto& t : formula.terms) {
        std::fill(term.begin(), term.end(), t.coefficient);
        for (const auto& f : t.factors) multiply_factor(f, table, term, ev, tmp);
        for (std::size_t i = 0; i < n; ++i) lp[i] += term[i];
    }
    return lp;
}

}  // namespace dagsim
