#include <doctest.h>

#include <random>

#include "dagsim/dag.hpp"
#include "helpers.hpp"
#include "random_dag.hpp"

using namespace dagsim;

namespace {

DagSpec three_node() {
    return empty_dag() + nodes({"A", "B"}, "rnorm", {{"mean", 0}, {"sd", 1}}) +
           node("C", "gaussian", {{"error", 1}}, "~ -2 + A*0.3 + B*-2");
}

DagSpec covid() {
    auto a = node_td("A", "time_to_event", {{"prob", 0.01}, {"event_duration", 20}, {"immunity_duration", 150}});
    auto y = node_td("Y", "time_to_event",
                     {{"prob", "ifelse(A_event, P_0*RR_A, P_0)"}, {"constants", {{"P_0", 0.005}, {"RR_A", 3.24}}}});
    y.parents = std::vector<std::string>{"A_event"};
    return empty_dag() + a + y;
}

}  // namespace

TEST_CASE("empty_dag") {
    const auto dag = empty_dag();
    CHECK(dag.size() == 0);
    CHECK(render_summary(dag).empty());
    CHECK(adjacency_matrix(dag).names.empty());
    CHECK(to_dot(dag) == "digraph dag {\n}\n");
    const auto one = dag + node("A", "rnorm");
    CHECK(one.size() == 1);
    CHECK(dag.size() == 0);
}

TEST_CASE("add_node: multi-name definitions") {
    const auto dag = empty_dag() + nodes({"A", "B"}, "rnorm", {{"mean", 0}, {"sd", 1}});
    REQUIRE(dag.size() == 2);
    CHECK(dag.nodes()[0].spec.name == "A");
    CHECK(dag.nodes()[1].spec.name == "B");
    CHECK(dag.nodes()[0].spec.kind == NodeKind::Root);
    CHECK(dag.nodes()[1].spec.params == dag.nodes()[0].spec.params);
    CHECK(add_node(empty_dag(), nodes({"X", "Y", "Z"}, "runif")).size() == 3);
}

TEST_CASE("add_node: errors") {
    const auto dag = empty_dag() + node("A", "rnorm");
    CHECK_THROWS_CODE(dag + node("A", "rnorm"), ErrorCode::DuplicateName);
    CHECK_THROWS_CODE(dag + node("X_event", "rnorm"), ErrorCode::ReservedSuffix);
    CHECK_THROWS_CODE(dag + node("X_time", "rnorm"), ErrorCode::ReservedSuffix);
    CHECK_THROWS_CODE(dag + node("X_time_since_last", "rnorm"), ErrorCode::ReservedSuffix);
    CHECK_THROWS_CODE(dag + node("X_event_count", "rnorm"), ErrorCode::ReservedSuffix);
    CHECK_THROWS_CODE(dag + node("B", "rnope"), ErrorCode::UnknownType);
    CHECK_THROWS_CODE(dag + node("1B", "rnorm"), ErrorCode::ValidationError);
    CHECK_THROWS_CODE(dag + node("B", "rnorm", {{"sd", -1}}), ErrorCode::InvalidParameter);
    CHECK_THROWS_CODE(dag + node("B", "rnorm", {{"sdd", 1}}), ErrorCode::InvalidParameter);
    CHECK_THROWS_CODE(dag + node("B", "gaussian", {{"error", 1}}, "~ A*"), ErrorCode::SyntaxError);
    CHECK_THROWS_CODE(dag + node("T", "time_to_event", {{"prob", 0.1}}), ErrorCode::ValidationError);
}

TEST_CASE("add_node: a generic time-dependent node may continue a time-fixed one") {
    const auto dag = empty_dag() + node("calories", "rnorm", {{"mean", 2500}, {"sd", 150}}) +
                     node_td("calories", "gaussian", {{"error", 1}}, "~ 1 + calories*1.1");
    CHECK(dag.size() == 2);
    CHECK_THROWS_CODE(dag + node_td("calories", "gaussian", {{"error", 1}}, "~ calories"), ErrorCode::DuplicateName);
    CHECK_THROWS_CODE(empty_dag() + node("Y", "rnorm") + node_td("Y", "time_to_event", {{"prob", 0.1}}),
                      ErrorCode::DuplicateName);
    CHECK_NOTHROW(validate(dag));
}

TEST_CASE("parents_of") {
    const auto dag = three_node();
    CHECK(parents_of(dag, "C") == std::vector<std::string>{"A", "B"});
    CHECK(parents_of(dag, "A").empty());
    CHECK(parents_of(covid(), "Y") == std::vector<std::string>{"A"});
    CHECK_THROWS_CODE(parents_of(dag, "Q"), ErrorCode::UnknownNode);
}

TEST_CASE("parents_of: inferred from expressions and cox outputs") {
    auto y = node_td("Y", "time_to_event", {{"prob", "ifelse(A_event, 0.02, 0.01)"}});
    const auto dag = empty_dag() + node_td("A", "time_to_event", {{"prob", 0.01}}) + y;
    CHECK(parents_of(dag, "Y") == std::vector<std::string>{"A"});

    const auto cox = empty_dag() + node("X", "rnorm") +
                     node("T", "cox", {{"lambda", 2}, {"gamma", 2.4}}, "~ X*0.5") +
                     node("W", "identity", {{"expr", "T_time * 2"}});
    CHECK(parents_of(cox, "W") == std::vector<std::string>{"T"});
    CHECK(topological_sort(cox) == std::vector<std::string>{"X", "T", "W"});
}

TEST_CASE("topological_sort") {
    CHECK(topological_sort(three_node()) == std::vector<std::string>{"A", "B", "C"});
    CHECK(topological_sort(empty_dag() + node("A", "rnorm")) == std::vector<std::string>{"A"});

    // defined in reverse: the child comes first in the spec
    const auto reversed = empty_dag() + node("C", "gaussian", {{"error", 1}}, "~ A + B") + node("B", "rnorm") +
                          node("A", "rnorm");
    CHECK(topological_sort(reversed) == std::vector<std::string>{"B", "A", "C"});

    const auto cyclic = empty_dag() + node("A", "gaussian", {{"error", 1}}, "~ B") +
                        node("B", "gaussian", {{"error", 1}}, "~ A");
    try {
        topological_sort(cyclic);
        FAIL("expected CyclicGraph");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::CyclicGraph);
        const std::string msg = e.what();
        CHECK((msg.find("A -> B -> A") != std::string::npos || msg.find("B -> A -> B") != std::string::npos));
    }
    CHECK_THROWS_CODE(topological_sort(empty_dag() + node("A", "gaussian", {{"error", 1}}, "~ A")),
                      ErrorCode::CyclicGraph);
}

TEST_CASE("topological_sort: time-dependent nodes follow in insertion order and may self-reference") {
    auto y = node_td("Y", "time_to_event", {{"prob", "ifelse(Y_event, 0, 0.01)"}});
    const auto dag = empty_dag() + node_td("A", "time_to_event", {{"prob", "ifelse(Y_event, 0, 0.01)"}}) + y +
                     node("S", "rbernoulli");
    CHECK(topological_sort(dag) == std::vector<std::string>{"S", "A", "Y"});
    CHECK_NOTHROW(validate(dag));
}

TEST_CASE("validate: graph-level rules") {
    const auto bad_ref = empty_dag() + node("C", "gaussian", {{"error", 1}}, "~ Q*2");
    CHECK_THROWS_CODE(validate(bad_ref), ErrorCode::UnknownNode);

    const auto fixed_on_td = empty_dag() + node_td("A", "time_to_event", {{"prob", 0.1}}) +
                             node("B", "identity", {{"expr", "A_event"}});
    CHECK_THROWS_CODE(validate(fixed_on_td), ErrorCode::ValidationError);

    const auto bare_event = empty_dag() + node_td("A", "time_to_event", {{"prob", 0.1}}) +
                            node_td("B", "time_to_event", {{"prob", "ifelse(A, 0.2, 0.1)"}});
    CHECK_THROWS_CODE(validate(bare_event), ErrorCode::ValidationError);
    CHECK_NOTHROW(validate(covid()));
}

TEST_CASE("adjacency_matrix") {
    const auto m = adjacency_matrix(three_node());
    CHECK(m.names == std::vector<std::string>{"A", "B", "C"});
    CHECK(m.entry == std::vector<std::vector<int>>{{0, 0, 1}, {0, 0, 1}, {0, 0, 0}});
    CHECK(to_csv(m) == ",A,B,C\nA,0,0,1\nB,0,0,1\nC,0,0,0\n");
}

TEST_CASE("render_summary: three-node example") {
    CHECK(render_summary(three_node()) ==
          std::vector<std::string>{"A ~ N(0, 1)", "B ~ N(0, 1)", "C ~ N(-2 + A*0.3 + B*-2, 1)"});
}

TEST_CASE("render_summary: logistic and cox lines") {
    auto u = node("U", "rbernoulli", {{"p", 0.5}});
    u.output = OutputCoercion::Numeric;
    const auto dag = empty_dag() + u + node("L0", "gaussian", {{"error", 1}}, "~ 0.1 + 0.6*U") +
                     node("A0", "binomial", {}, "~ -0.4 + 0.6*L0");
    const auto lines = render_summary(dag);
    CHECK(lines.at(0) == " U ~ Bernoulli(0.5)");
    CHECK(lines.at(2) == "A0 ~ Bernoulli(logit(-0.4 + 0.6*L0))");

    const auto cox = empty_dag() + node("X1", "rnorm") +
                     node("T", "cox",
                          {{"surv_dist", "weibull"}, {"lambda", 2}, {"gamma", 2.4}, {"cens_dist", "rweibull"},
                           {"cens_args", {{"shape", 1}, {"scale", 2}}}},
                          "~ X1*log(1.8)");
    const auto cl = render_summary(cox);
    REQUIRE(cl.size() == 3);
    CHECK(cl[1].rfind("T[T] ~ (-(log(Unif(0, 1))/(2*exp(", 0) == 0);
    CHECK(cl[1] == "T[T] ~ (-(log(Unif(0, 1))/(2*exp(X1*log(1.8)))))^(1/2.4)");
    CHECK(cl[2] == "T[C] ~ rweibull(shape=1, scale=2)");
    CHECK(cl[0] == "  X1 ~ N(0, 1)");
}

TEST_CASE("render_summary: time-dependent nodes") {
    const auto lines = render_summary(covid());
    CHECK(lines.at(0) == "A(t) ~ Bernoulli(0.01), event_duration=20, immunity_duration=150");
    CHECK(lines.at(1).rfind("Y(t) ~ Bernoulli(ifelse(A_event, 0.0162", 0) == 0);
}

TEST_CASE("to_dot") {
    const auto dot = to_dot(three_node());
    CHECK(dot == "digraph dag {\n  A;\n  B;\n  C;\n  A -> C;\n  B -> C;\n}\n");
    const auto td = to_dot(covid());
    CHECK(td.find("  Y [shape=box, style=dashed];") != std::string::npos);
    CHECK(td.find("  A -> Y;") != std::string::npos);
}

TEST_CASE("topological_sort on random DAGs") {
    std::mt19937_64 gen(11);
    int cyclic = 0, acyclic = 0;
    for (int iter = 0; iter < 1000; ++iter) {
        const auto r = testing::random_dag(gen, iter % 2 == 1);
        const bool cycle = testing::has_cycle(r.parents);
        std::vector<std::string> order;
        bool threw = false;
        try {
            order = topological_sort(r.dag);
        } catch (const Error& e) {
            REQUIRE(e.code() == ErrorCode::CyclicGraph);
            threw = true;
        }
        REQUIRE(threw == cycle);
        if (cycle) {
            ++cyclic;
            continue;
        }
        ++acyclic;
        REQUIRE(order.size() == r.dag.size());
        std::map<std::string, std::size_t> pos;
        for (std::size_t i = 0; i < order.size(); ++i) pos[order[i]] = i;
        REQUIRE(pos.size() == order.size());
        const auto m = adjacency_matrix(r.dag);
        for (std::size_t u = 0; u < m.names.size(); ++u)
            for (std::size_t v = 0; v < m.names.size(); ++v)
                if (m.entry[u][v]) REQUIRE(pos[m.names[u]] < pos[m.names[v]]);
    }
    CHECK(cyclic > 50);
    CHECK(acyclic > 500);
}

TEST_CASE("adjacency matrix is strictly upper triangular in sorted order") {
    std::mt19937_64 gen(12);
    for (int iter = 0; iter < 200; ++iter) {
        const auto r = testing::random_dag(gen, false);
        const auto order = topological_sort(r.dag);
        const auto m = adjacency_matrix(r.dag);
        std::map<std::string, std::size_t> idx;
        for (std::size_t i = 0; i < m.names.size(); ++i) idx[m.names[i]] = i;
        for (std::size_t a = 0; a < order.size(); ++a)
            for (std::size_t b = 0; b <= a; ++b) REQUIRE(m.entry[idx[order[a]]][idx[order[b]]] == 0);
        // out-degrees are row sums and match the children found through parents_of
        for (std::size_t u = 0; u < m.names.size(); ++u) {
            int row = 0, children = 0;
            for (int x : m.entry[u]) row += x;
            for (const auto& v : m.names) {
                const auto ps = parents_of(r.dag, v);
                children += std::count(ps.begin(), ps.end(), m.names[u]) > 0;
            }
            REQUIRE(row == children);
        }
    }
}

TEST_CASE("validate: a continued node is checked per version") {
    // the time-dependent G reads an event column; its time-fixed start value does not
    const auto dag = empty_dag() + node_td("E", "time_to_event", {{"prob", 0.1}}) + node("G", "rconstant", {{"value", 0}}) +
                     node_td("G", "identity", {{"expr", "ifelse(E_event, G + 1, G)"}});
    CHECK_NOTHROW(validate(dag));
    CHECK(parents_of(dag, "G") == std::vector<std::string>{"E"});
    const auto bad = empty_dag() + node_td("E", "time_to_event", {{"prob", 0.1}}) +
                     node("G", "identity", {{"expr", "E_event"}});
    CHECK_THROWS_CODE(validate(bad), ErrorCode::ValidationError);
}
