#include <doctest.h>

#include <map>
#include <tuple>

#include "dagsim/transform.hpp"
#include "helpers.hpp"
#include "random_dag.hpp"

using namespace dagsim;

namespace {

SavePolicy all_states() { return SavePolicy::parse("all"); }

// onset at exactly t0, never otherwise
NodeSpec pulse(const std::string& name, int t0, Json duration) {
    return node_td(name, "time_to_event",
                   {{"prob", "ifelse(sim_time == " + std::to_string(t0) + ", 1, 0)"}, {"event_duration", duration}});
}

using Row = std::tuple<double, double, double, double>;

std::vector<Row> rows_of(const DataTable& ss, const std::string& a, const std::string& b) {
    std::vector<Row> out;
    for (std::size_t i = 0; i < ss.n_rows(); ++i)
        out.emplace_back(ss.column("start")[i], ss.column("stop")[i], ss.column(a)[i], ss.column(b)[i]);
    return out;
}

}  // namespace

TEST_CASE("to_long: generic node needs every state") {
    const auto dag = empty_dag() + node("calories", "rconstant", {{"value", 100}}) +
                     node_td("calories", "gaussian", {{"error", 0}}, "~ 1 + calories*1.1");
    const auto r = sim_discrete_time(dag, 2, 3, all_states(), RngStream(1));
    const auto lng = to_long(r);
    CHECK(lng.names() == std::vector<std::string>{".id", ".time", "calories"});
    REQUIRE(lng.n_rows() == 6);
    CHECK(testing::values(lng.column(".id")) == std::vector<double>{1, 1, 1, 2, 2, 2});
    CHECK(testing::values(lng.column(".time")) == std::vector<double>{1, 2, 3, 1, 2, 3});
    CHECK(lng.column("calories")[1] == doctest::Approx(123.1));
    CHECK(lng.column("calories")[5] == doctest::Approx(136.41));

    const auto last_only = sim_discrete_time(dag, 2, 3, {}, RngStream(1));
    try {
        to_long(last_only);
        FAIL("expected InsufficientSavedStates");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::InsufficientSavedStates);
        CHECK(std::string(e.what()).find("calories") != std::string::npos);
    }
    CHECK_THROWS_CODE(to_wide(last_only), ErrorCode::InsufficientSavedStates);
    CHECK_THROWS_CODE(to_start_stop(last_only), ErrorCode::InsufficientSavedStates);
}

TEST_CASE("to_long: event flags replayed from onsets") {
    const auto r = sim_discrete_time(empty_dag() + pulse("A", 5, 2), 1, 6, {}, RngStream(1));
    const auto lng = to_long(r);
    CHECK(testing::values(lng.column("A")) == std::vector<double>{0, 0, 0, 0, 1, 1});
    CHECK(lng.column("A").type() == ColumnType::Boolean);

    const auto empty = sim_discrete_time(empty_dag() + pulse("A", 5, 2), 0, 6, {}, RngStream(1));
    CHECK(to_long(empty).n_rows() == 0);
    CHECK(to_wide(empty).n_rows() == 0);
    CHECK(to_start_stop(empty).n_rows() == 0);
}

TEST_CASE("to_wide") {
    const auto dag = empty_dag() + node("age", "rnorm", {{"mean", 50}, {"sd", 5}}) + pulse("A", 2, 1);
    const auto r = sim_discrete_time(dag, 3, 2, {}, RngStream(1));
    const auto wide = to_wide(r);
    CHECK(wide.names() == std::vector<std::string>{".id", "age", "A_1", "A_2"});
    CHECK(wide.n_rows() == 3);
    CHECK(wide.column("A_2")[0] == 1.0);
    CHECK(wide.column("age") == r.final_table.column("age"));
}

TEST_CASE("to_wide equals a pivot of to_long") {
    RngStream gen(77);
    for (int run = 0; run < 20; ++run) {
        const auto dag = testing::random_dt_dag(gen, false);
        const auto r = sim_discrete_time(dag, 30, 25, all_states(), gen.split(static_cast<std::uint64_t>(run)));
        const auto lng = to_long(r), wide = to_wide(r);
        REQUIRE(wide.n_rows() == 30);
        for (std::size_t row = 0; row < lng.n_rows(); ++row) {
            const auto id = static_cast<std::size_t>(lng.column(".id")[row]) - 1;
            const auto t = static_cast<int>(lng.column(".time")[row]);
            for (const auto& v : r.td_nodes) {
                const double a = lng.column(v)[row], b = wide.column(v + "_" + std::to_string(t))[id];
                REQUIRE((a == b || (is_missing(a) && is_missing(b))));
            }
            REQUIRE(lng.column("sex")[row] == wide.column("sex")[id]);
        }
        CHECK(std::count(wide.names().begin(), wide.names().end(), "sex") == 1);
    }
}

TEST_CASE("to_start_stop: outcome with overlapping intervals, first event only") {
    const auto dag = empty_dag() + pulse("A", 21, 17) + pulse("Y", 38, 1);
    const auto r = sim_discrete_time(dag, 2, 100, {}, RngStream(1));
    const auto ss = to_start_stop(r, {"Y", true, true});
    CHECK(ss.names() == std::vector<std::string>{".id", "start", "stop", "A", "Y"});
    CHECK(rows_of(ss, "A", "Y") == std::vector<Row>{{1, 21, 0, 0}, {21, 38, 1, 1}, {1, 21, 0, 0}, {21, 38, 1, 1}});
    CHECK(testing::values(ss.column(".id")) == std::vector<double>{1, 1, 2, 2});

    const auto plain = to_start_stop(r, {"Y", false, false});
    CHECK(rows_of(plain, "A", "Y") ==
          std::vector<Row>{{1, 20, 0, 0}, {21, 37, 1, 0}, {38, 38, 0, 1}, {39, 100, 0, 0},
                           {1, 20, 0, 0}, {21, 37, 1, 0}, {38, 38, 0, 1}, {39, 100, 0, 0}});
}

TEST_CASE("to_start_stop: isolated target onset") {
    const auto dag = empty_dag() + node_td("A", "time_to_event", {{"prob", 0}}) + pulse("Y", 8, 1);
    const auto r = sim_discrete_time(dag, 1, 31, {}, RngStream(1));
    CHECK(rows_of(to_start_stop(r, {"Y", false, false}), "A", "Y") ==
          std::vector<Row>{{1, 7, 0, 0}, {8, 8, 0, 1}, {9, 31, 0, 0}});
    CHECK(rows_of(to_start_stop(r, {"Y", false, true}), "A", "Y") == std::vector<Row>{{1, 7, 0, 0}, {8, 8, 0, 1}});
    CHECK(rows_of(to_start_stop(r, {"Y", true, false}), "A", "Y") == std::vector<Row>{{1, 8, 0, 1}, {8, 31, 0, 0}});
}

TEST_CASE("to_start_stop: nothing happens") {
    const auto dag = empty_dag() + node_td("A", "time_to_event", {{"prob", 0}}) +
                     node_td("Y", "time_to_event", {{"prob", 0}});
    const auto r = sim_discrete_time(dag, 1, 200, {}, RngStream(1));
    CHECK(rows_of(to_start_stop(r, {"Y", false, false}), "A", "Y") == std::vector<Row>{{1, 200, 0, 0}});
    CHECK(rows_of(to_start_stop(r, {"Y", true, true}), "A", "Y") == std::vector<Row>{{1, 200, 0, 0}});
    CHECK(rows_of(to_start_stop(r), "A", "Y") == std::vector<Row>{{1, 200, 0, 0}});
}

TEST_CASE("to_start_stop: recurrent target without truncation") {
    const auto dag = empty_dag() +
                     node_td("Y", "time_to_event", {{"prob", "ifelse(sim_time == 4 | sim_time == 9, 1, 0)"}}) +
                     node_td("A", "time_to_event", {{"prob", 0}});
    const auto r = sim_discrete_time(dag, 1, 12, {}, RngStream(1));
    CHECK(rows_of(to_start_stop(r, {"Y", false, false}), "A", "Y") ==
          std::vector<Row>{{1, 3, 0, 0}, {4, 4, 0, 1}, {5, 8, 0, 0}, {9, 9, 0, 1}, {10, 12, 0, 0}});
    CHECK(rows_of(to_start_stop(r, {"Y", true, false}), "A", "Y") ==
          std::vector<Row>{{1, 4, 0, 1}, {4, 9, 0, 1}, {9, 12, 0, 0}});
}

TEST_CASE("to_start_stop: target validation") {
    const auto dag = empty_dag() + node_td("A", "time_to_event", {{"prob", 0.1}}) +
                     node_td("K", "competing_events", {{"probs", {0.9, 0.1}}}) +
                     node("G", "rconstant", {{"value", 1}}) + node_td("G", "identity", {{"expr", "G"}});
    const auto r = sim_discrete_time(dag, 5, 5, all_states(), RngStream(1));
    CHECK_THROWS_CODE(to_start_stop(r, {"Nope", false, false}), ErrorCode::UnknownNode);
    CHECK_THROWS_CODE(to_start_stop(r, {"K", false, false}), ErrorCode::ValidationError);
    CHECK_THROWS_CODE(to_start_stop(r, {"G", false, false}), ErrorCode::ValidationError);
    CHECK_NOTHROW(to_start_stop(r, {"A", false, false}));
}

TEST_CASE("start-stop round trip and interval laws over random runs") {
    RngStream gen(2024);
    std::size_t intervals = 0;
    for (int run = 0; run < 100; ++run) {
        const auto dag = testing::random_dt_dag(gen, run % 2 == 1);
        const int max_t = 10 + static_cast<int>(gen.next_uniform() * 60);
        const auto r = sim_discrete_time(dag, 25, max_t, all_states(), gen.split(static_cast<std::uint64_t>(run)));
        const auto lng = to_long(r);
        const auto ss = to_start_stop(r);
        intervals += ss.n_rows();
        REQUIRE(expand_start_stop(ss) == lng);

        // adjacent intervals differ in at least one tracked variable and cover [1, max_t]
        for (std::size_t i = 0; i < ss.n_rows(); ++i) {
            REQUIRE(ss.column("start")[i] <= ss.column("stop")[i]);
            const bool first = i == 0 || ss.column(".id")[i] != ss.column(".id")[i - 1];
            if (first) {
                REQUIRE(ss.column("start")[i] == 1);
            } else {
                REQUIRE(ss.column("start")[i] == ss.column("stop")[i - 1] + 1);
                bool differs = false;
                for (const auto& v : r.td_nodes) differs |= ss.column(v)[i] != ss.column(v)[i - 1];
                REQUIRE(differs);
            }
            const bool last = i + 1 == ss.n_rows() || ss.column(".id")[i] != ss.column(".id")[i + 1];
            if (last) REQUIRE(ss.column("stop")[i] == max_t);
        }

        if (run % 2 == 1) {
            const auto first_only = to_start_stop(r, {"Y", run % 4 == 1, true});
            std::map<double, int> hits;
            for (std::size_t i = 0; i < first_only.n_rows(); ++i) {
                if (first_only.column("Y")[i] != 1.0) continue;
                ++hits[first_only.column(".id")[i]];
                const bool last = i + 1 == first_only.n_rows() || first_only.column(".id")[i + 1] != first_only.column(".id")[i];
                REQUIRE(last);
            }
            for (const auto& [id, k] : hits) REQUIRE(k == 1);
        }
    }
    CHECK(intervals > 2500);
}

TEST_CASE("start-stop output is compact on the vaccine example") {
    const auto dag = empty_dag() +
                     node_td("A", "time_to_event", {{"prob", 0.01}, {"event_duration", 20}, {"immunity_duration", 150}}) +
                     node_td("Y", "time_to_event",
                             {{"prob", "ifelse(A_event, P_0*RR_A, P_0)"}, {"constants", {{"P_0", 0.005}, {"RR_A", 3.24}}}});
    const auto r = sim_discrete_time(dag, 1000, 730, {}, RngStream(3));
    const auto ss = to_start_stop(r, {"Y", true, true});
    CHECK(ss.n_rows() < 1000u * 20);
    CHECK(ss.n_rows() >= 1000u);
}
