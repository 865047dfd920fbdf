#include <doctest.h>

#include <cmath>
#include <map>

#include "dagsim/dt_engine.hpp"
#include "dagsim/spec_file.hpp"
#include "helpers.hpp"

using namespace dagsim;
using testing::values;

namespace {

const DataTable& snapshot(const SimResult& r, int t) {
    for (const auto& [time, table] : r.snapshots)
        if (time == t) return table;
    FAIL("no snapshot at t=" << t);
    throw 0;
}

std::map<std::uint32_t, std::vector<int>> onsets_by_row(const SimResult& r, const std::string& node) {
    std::map<std::uint32_t, std::vector<int>> out;
    for (const auto& o : r.histories.at(node)) out[o.row].push_back(o.time);
    return out;
}

SavePolicy all_states() { return SavePolicy::parse("all"); }

}  // namespace

TEST_CASE("SavePolicy") {
    CHECK(SavePolicy::parse("last").kind == SavePolicy::Kind::Last);
    const auto at = SavePolicy::parse("at:5,2,5");
    CHECK(at.times == std::vector<int>{2, 5});
    CHECK(at.saves(2, 10));
    CHECK_FALSE(at.saves(3, 10));
    CHECK(at.to_string() == "at:2,5");
    CHECK(SavePolicy::parse("last").saves(10, 10));
    CHECK_THROWS_CODE(SavePolicy::parse("some"), ErrorCode::ParseError);
    CHECK_THROWS_CODE(SavePolicy::parse("at:0"), ErrorCode::ParseError);
    CHECK_THROWS_CODE(SavePolicy::parse("at:"), ErrorCode::ParseError);
}

TEST_CASE("sim_discrete_time: single event node share") {
    const auto dag = empty_dag() + node_td("Y", "time_to_event", {{"prob", 0.01}, {"event_duration", "Inf"}});
    const auto r = sim_discrete_time(dag, 10000, 80, {}, RngStream(42));
    CHECK(r.final_table.names() == std::vector<std::string>{".id", "Y_event", "Y_time"});
    const double share = testing::mean(values(r.final_table.column("Y_event")));
    CHECK(std::abs(share - (1 - std::pow(0.99, 80))) < 0.02);
    CHECK(r.snapshots.size() == 1);
}

TEST_CASE("sim_discrete_time: first onsets follow a truncated geometric law") {
    const double p = 0.01;
    const int max_t = 80;
    const std::size_t n = 100000;
    const auto dag = empty_dag() + node_td("Y", "time_to_event", {{"prob", p}, {"event_duration", "Inf"}});
    const auto r = sim_discrete_time(dag, n, max_t, {}, RngStream(7));
    std::vector<double> observed(max_t + 1, 0);
    for (const auto& o : r.histories.at("Y")) observed[static_cast<std::size_t>(o.time - 1)] += 1;
    observed[max_t] = static_cast<double>(n - r.histories.at("Y").size());
    double x2 = 0;
    for (int t = 0; t <= max_t; ++t) {
        const double expected = n * (t < max_t ? std::pow(1 - p, t) * p : std::pow(1 - p, max_t));
        x2 += (observed[t] - expected) * (observed[t] - expected) / expected;
    }
    CHECK(testing::chi_square_p(x2, max_t) > 0.001);
}

TEST_CASE("sim_discrete_time: degenerate probabilities") {
    const auto never = sim_discrete_time(empty_dag() + node_td("Y", "time_to_event", {{"prob", 0}}), 100, 30, {}, RngStream(1));
    for (std::size_t i = 0; i < 100; ++i) {
        CHECK(never.final_table.column("Y_event")[i] == 0.0);
        CHECK(is_missing(never.final_table.column("Y_time")[i]));
    }
    CHECK(never.histories.at("Y").empty());

    const auto always = sim_discrete_time(empty_dag() + node_td("Y", "time_to_event", {{"prob", 1}, {"event_duration", "Inf"}}),
                                          100, 30, {}, RngStream(1));
    CHECK(always.histories.at("Y").size() == 100);
    for (const auto& o : always.histories.at("Y")) CHECK(o.time == 1);
}

TEST_CASE("sim_discrete_time: save policies") {
    const auto dag = empty_dag() + node_td("Y", "time_to_event", {{"prob", 0.01}});
    const auto all = sim_discrete_time(dag, 10, 200, all_states(), RngStream(1));
    REQUIRE(all.snapshots.size() == 200);
    for (int t = 1; t <= 200; ++t) CHECK(all.snapshots[static_cast<std::size_t>(t - 1)].first == t);
    const auto at = sim_discrete_time(dag, 10, 200, SavePolicy::parse("at:3,50"), RngStream(1));
    REQUIRE(at.snapshots.size() == 2);
    CHECK(at.snapshots[1].first == 50);
}

TEST_CASE("sim_discrete_time: errors") {
    CHECK_THROWS_CODE(sim_discrete_time(empty_dag() + node("A", "rnorm"), 10, 5, {}, RngStream(1)),
                      ErrorCode::NoTimeDependentNode);
    const auto dag = empty_dag() + node_td("Y", "time_to_event", {{"prob", 0.1}});
    CHECK_THROWS_CODE(sim_discrete_time(dag, 10, 0, {}, RngStream(1)), ErrorCode::ValidationError);

    const auto bad = empty_dag() + node("A", "rnorm") + node_td("Y", "time_to_event", {{"prob", "A*5"}});
    try {
        sim_discrete_time(bad, 100, 5, {}, RngStream(1));
        FAIL("expected ProbabilityOutOfRange");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ProbabilityOutOfRange);
        const std::string what = e.what();
        CHECK(what.find("node 'Y'") != std::string::npos);
        CHECK(what.find("t=1") != std::string::npos);
        CHECK(what.find("row ") != std::string::npos);
    }
}

TEST_CASE("step_time_to_event: event and immunity windows") {
    // onset at t=5, then certain onset whenever eligible
    const auto dag = empty_dag() + node_td("A", "time_to_event",
                                           {{"prob", "ifelse(sim_time >= 5, 1, 0)"},
                                            {"event_duration", 20},
                                            {"immunity_duration", 150}});
    const auto r = sim_discrete_time(dag, 3, 320, all_states(), RngStream(1));
    const auto onsets = onsets_by_row(r, "A");
    for (std::uint32_t i = 0; i < 3; ++i) CHECK(onsets.at(i) == std::vector<int>{5, 155, 305});
    for (int t = 1; t <= 320; ++t) {
        const bool in_window = (t >= 5 && t <= 24) || (t >= 155 && t <= 174) || (t >= 305 && t <= 320);
        CHECK(snapshot(r, t).column("A_event")[0] == (in_window ? 1.0 : 0.0));
    }
    CHECK(snapshot(r, 100).column("A_time")[0] == 5.0);
    CHECK(snapshot(r, 170).column("A_time")[0] == 155.0);
}

TEST_CASE("step_time_to_event: probability expression") {
    const auto y = node_td("Y", "time_to_event",
                           {{"prob", "ifelse(A_event, P_0*RR_A, P_0)"}, {"constants", {{"P_0", 0.005}, {"RR_A", 3.24}}}});
    const EventProcess process(y);
    auto t = testing::table_of({{"A_event", {1, 0, 1}}}, ColumnType::Boolean);
    std::vector<double> p(3);
    ExprEvaluator eval;
    eval.evaluate(*process.probs()[0], t, 1, p);
    CHECK(p[0] == 0.005 * 3.24);
    CHECK(p[0] == doctest::Approx(0.0162));
    CHECK(p[1] == 0.005);
    CHECK(p[2] == p[0]);

    // the Bernoulli rate in each group
    const std::size_t n = 1000000;
    DataTable big(n);
    std::vector<double> a(n);
    for (std::size_t i = 0; i < n; ++i) a[i] = i % 2;
    big.set("A_event", Column(ColumnType::Boolean, a));
    TteState state("Y", std::make_shared<EventProcess>(y), n);
    RngStream rng(3);
    state.step(big, 1, rng, eval);
    double on = 0, off = 0;
    for (std::size_t i = 0; i < n; ++i) (i % 2 ? on : off) += state.event()[i];
    CHECK(std::abs(on / (n / 2) - 0.0162) < 0.001);
    CHECK(std::abs(off / (n / 2) - 0.005) < 0.0006);
}

TEST_CASE("step_competing_events") {
    const std::size_t n = 1000000;
    DataTable table(n);
    ExprEvaluator eval;

    TteState none("V", std::make_shared<EventProcess>(node_td("V", "competing_events", {{"probs", {1, 0, 0}}})), 1000);
    RngStream r0(1);
    for (int t = 1; t <= 20; ++t) none.step(DataTable(1000), t, r0, eval);
    CHECK(none.history().empty());

    TteState v("V",
               std::make_shared<EventProcess>(node_td("V", "competing_events", {{"probs", {0.99, 0.005, 0.005}}})), n);
    RngStream r1(2);
    v.step(table, 1, r1, eval);
    std::vector<double> count(3, 0);
    for (double c : v.event()) count[static_cast<std::size_t>(c)] += 1;
    CHECK(std::abs(count[0] / n - 0.99) < 0.0004);
    CHECK(std::abs(count[1] / n - 0.005) < 0.0004);
    CHECK(std::abs(count[2] / n - 0.005) < 0.0004);

    TteState published(
        "V", std::make_shared<EventProcess>(node_td("V", "competing_events", {{"probs", {0.99, 0.0005, 0.0005}}})), 4);
    RngStream r2(3);
    try {
        published.step(DataTable(4), 7, r2, eval);
        FAIL("expected RowNotNormalized");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::RowNotNormalized);
        const std::string what = e.what();
        CHECK(what.find("t=7") != std::string::npos);
        CHECK(what.find("row 1") != std::string::npos);
        CHECK(what.find("0.991") != std::string::npos);
    }
}

TEST_CASE("step_competing_events: one category reduces to time_to_event") {
    const std::size_t n = 5000;
    ExprEvaluator eval;
    TteState tte("Y", std::make_shared<EventProcess>(node_td("Y", "time_to_event", {{"prob", 0.3}, {"event_duration", 2}})), n);
    TteState comp("Y",
                  std::make_shared<EventProcess>(node_td("Y", "competing_events", {{"probs", {0.7, 0.3}}, {"event_duration", 2}})),
                  n);
    const DataTable table(n);
    std::vector<std::vector<double>> expected(n);
    for (int t = 1; t <= 10; ++t) {
        RngStream a = RngStream(9).split(static_cast<std::uint64_t>(t)), b = a, probe = a;
        tte.step(table, t, a, eval);
        comp.step(table, t, b, eval);
        CHECK(tte.event() == comp.event());
        // the same uniforms decide both
        for (std::size_t i = 0; i < n; ++i) {
            const double u = probe.next_uniform();
            if (tte.last_onset()[i] == t) REQUIRE(u < 0.3);
        }
    }
    REQUIRE(tte.history().size() == comp.history().size());
    for (std::size_t k = 0; k < tte.history().size(); ++k) {
        CHECK(tte.history()[k].row == comp.history()[k].row);
        CHECK(tte.history()[k].time == comp.history()[k].time);
    }
    CHECK(tte.last_onset().size() == n);
}

TEST_CASE("step_generic_td: recurrence on its own previous value") {
    const auto dag = empty_dag() + node("calories", "rconstant", {{"value", 100}}) +
                     node_td("calories", "gaussian", {{"error", 0}}, "~ 1 + calories*1.1");
    const auto r = sim_discrete_time(dag, 4, 3, all_states(), RngStream(1));
    CHECK(snapshot(r, 1).column("calories")[0] == doctest::Approx(111));
    CHECK(snapshot(r, 2).column("calories")[3] == doctest::Approx(123.1));
    CHECK(snapshot(r, 3).column("calories")[2] == doctest::Approx(136.41));
    CHECK(r.final_table.names() == std::vector<std::string>{".id", "calories"});
}

TEST_CASE("step_generic_td: sim_time and missing initial values") {
    const auto r = sim_discrete_time(empty_dag() + node_td("S", "identity", {{"expr", "sim_time"}}), 3, 6, all_states(),
                                     RngStream(1));
    for (int t = 1; t <= 6; ++t) CHECK(snapshot(r, t).column("S")[1] == t);

    const auto dag = empty_dag() + node_td("calories", "gaussian", {{"error", 1}}, "~ 1 + calories*1.1");
    try {
        sim_discrete_time(dag, 3, 5, {}, RngStream(1));
        FAIL("expected UnknownColumn");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::UnknownColumn);
        CHECK(std::string(e.what()).find("t=1") != std::string::npos);
    }
}

TEST_CASE("derived_columns") {
    const auto dag =
        empty_dag() +
        node_td("A", "time_to_event", {{"prob", "ifelse(sim_time == 10, 1, 0)"}, {"time_since_last", true}}) +
        node_td("B", "time_to_event",
                {{"prob", "ifelse(A_time_since_last < 20, 0.5, 0.1, na=0)"}, {"event_duration", "Inf"}});
    const auto before = sim_discrete_time(dag, 1000, 9, all_states(), RngStream(1));
    CHECK(is_missing(before.final_table.column("A_time_since_last")[0]));
    // never vaccinated: the missing elapsed time falls back to the na branch
    CHECK(before.histories.at("B").empty());
    const auto after = sim_discrete_time(dag, 1000, 13, all_states(), RngStream(1));
    CHECK(after.final_table.column("A_time_since_last")[0] == 3);
    CHECK(snapshot(after, 10).column("A_time_since_last")[0] == 0);
    CHECK_FALSE(after.histories.at("B").empty());

    const auto counted =
        empty_dag() + node_td("A", "time_to_event", {{"prob", "ifelse(sim_time == 3 | sim_time == 7, 1, 0)"}}) +
        node_td("C", "identity", {{"expr", "A_event_count"}});
    const auto c = sim_discrete_time(counted, 5, 10, {}, RngStream(1));
    CHECK(c.final_table.column("C")[4] == 2);
    CHECK(c.final_table.column("A_time")[4] == 7);
    CHECK_FALSE(c.final_table.contains("A_event_count"));
}

TEST_CASE("window invariants replayed from the onset history") {
    const int d = 3, m = 7, max_t = 200;
    const auto dag =
        empty_dag() + node_td("A", "time_to_event", {{"prob", 0.2}, {"event_duration", d}, {"immunity_duration", m}});
    const auto r = sim_discrete_time(dag, 500, max_t, all_states(), RngStream(5));
    const auto onsets = onsets_by_row(r, "A");
    std::size_t checked = 0;
    for (std::uint32_t i = 0; i < 500; ++i) {
        const auto it = onsets.find(i);
        const std::vector<int> mine = it == onsets.end() ? std::vector<int>{} : it->second;
        for (std::size_t k = 1; k < mine.size(); ++k) REQUIRE(mine[k] - mine[k - 1] >= m);
        std::size_t next = 0;
        int last = 0;
        for (int t = 1; t <= max_t; ++t) {
            if (next < mine.size() && mine[next] == t) last = mine[next++];
            const bool in_event = last > 0 && t <= last + d - 1;
            REQUIRE(snapshot(r, t).column("A_event")[i] == (in_event ? 1.0 : 0.0));
            ++checked;
        }
    }
    CHECK(checked == 500u * max_t);
    // with p = 0.2 some rows are eligible immediately at lastOnset + m
    bool tight = false;
    for (const auto& [row, mine] : onsets)
        for (std::size_t k = 1; k < mine.size(); ++k) tight |= mine[k] - mine[k - 1] == m;
    CHECK(tight);
}

TEST_CASE("evaluation order: earlier nodes at t, later nodes at t - 1") {
    const auto dag = empty_dag() + node("D", "rconstant", {{"value", 0}}) +
                     node_td("A", "identity", {{"expr", "sim_time"}}) + node_td("B", "identity", {{"expr", "A"}}) +
                     node_td("C", "identity", {{"expr", "D"}}) + node_td("D", "identity", {{"expr", "sim_time"}});
    const auto r = sim_discrete_time(dag, 2, 5, all_states(), RngStream(1));
    for (int t = 1; t <= 5; ++t) {
        CHECK(snapshot(r, t).column("B")[0] == t);
        CHECK(snapshot(r, t).column("C")[0] == t - 1);
    }
}

TEST_CASE("ordered events never go backwards") {
    const auto spec = load_spec(DAGSIM_SPEC_DIR "/education.json");
    const auto r = sim_discrete_time(spec.dag, 10000, 300, {}, RngStream(11));
    const auto hs = onsets_by_row(r, "highschool"), ba = onsets_by_row(r, "bachelors"), ma = onsets_by_row(r, "masters");
    CHECK_FALSE(ma.empty());
    for (const auto& [row, t] : ba) {
        REQUIRE(hs.count(row));
        REQUIRE(t.front() >= hs.at(row).front());
    }
    for (const auto& [row, t] : ma) {
        REQUIRE(ba.count(row));
        REQUIRE(t.front() >= ba.at(row).front());
    }
}

TEST_CASE("sim_discrete_time is reproducible") {
    const auto spec = load_spec(DAGSIM_SPEC_DIR "/covid.json");
    const auto a = sim_discrete_time(spec.dag, 200, 100, {}, RngStream(4));
    const auto b = sim_discrete_time(spec.dag, 200, 100, {}, RngStream(4));
    CHECK(a.final_table == b.final_table);
    const auto c = sim_discrete_time(spec.dag, 200, 100, {}, RngStream(5));
    CHECK_FALSE(a.final_table == c.final_table);
}
