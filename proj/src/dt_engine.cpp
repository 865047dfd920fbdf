#include "dagsim/dt_engine.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <set>

#include "dagsim/error.hpp"
#include "dagsim/simulate.hpp"

namespace dagsim {

SavePolicy SavePolicy::parse(std::string_view text) {
    SavePolicy p;
    if (text == "last") return p;
    if (text == "all") {
        p.kind = Kind::All;
        return p;
    }
    if (text.substr(0, 3) != "at:")
        fail(ErrorCode::ParseError, "save policy must be last, all or at:<t1,t2,...>");
    p.kind = Kind::At;
    text.remove_prefix(3);
    while (!text.empty()) {
        const auto comma = text.find(',');
        const auto item = text.substr(0, comma);
        int t = 0;
        const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), t);
        if (ec != std::errc() || ptr != item.data() + item.size() || t < 1)
            fail(ErrorCode::ParseError, "bad time '" + std::string(item) + "' in save policy");
        p.times.push_back(t);
        if (comma == std::string_view::npos) break;
        text.remove_prefix(comma + 1);
    }
    if (p.times.empty()) fail(ErrorCode::ParseError, "save policy at: needs at least one time");
    std::sort(p.times.begin(), p.times.end());
    p.times.erase(std::unique(p.times.begin(), p.times.end()), p.times.end());
    return p;
}

bool SavePolicy::saves(int t, int max_t) const {
    switch (kind) {
        case Kind::Last: return t == max_t;
        case Kind::All: return true;
        case Kind::At: return std::binary_search(times.begin(), times.end(), t);
    }
    return false;
}

std::string SavePolicy::to_string() const {
    if (kind == Kind::Last) return "last";
    if (kind == Kind::All) return "all";
    std::string out = "at:";
    for (std::size_t i = 0; i < times.size(); ++i) out += (i ? "," : "") + std::to_string(times[i]);
    return out;
}

// ---------------------------------------------------------------------------

TteState::TteState(std::string name, std::shared_ptr<const EventProcess> process, std::size_t n)
    : name_(std::move(name)),
      process_(std::move(process)),
      code_(n, 0.0),
      last_(n, kMissing),
      window_end_(n, 0.0),
      eligible_from_(n, 0.0),
      count_(n, 0.0),
      prob_(process_->probs().size()) {}

void TteState::step(const DataTable& table, int t, RngStream& rng, ExprEvaluator& eval) {
    const std::size_t n = code_.size();
    const auto& exprs = process_->probs();
    const bool competing = process_->competing();
    for (std::size_t j = 0; j < exprs.size(); ++j) {
        auto& buf = prob_[j];
        buf.resize(n);
        if (auto c = constant_value(*exprs[j])) std::fill(buf.begin(), buf.end(), *c);
        else eval.evaluate(*exprs[j], table, t, buf);
    }
    const double time = t;
    const double immunity = process_->immunity_duration();
    const std::size_t k = process_->categories();
    const auto fail_at = [&](ErrorCode code, std::size_t i, const std::string& what) {
        fail(code, "t=" + std::to_string(t) + ", row " + std::to_string(i + 1) + ": " + what);
    };

    for (std::size_t i = 0; i < n; ++i) {
        const double u = rng.next_uniform();
        if (time >= window_end_[i]) code_[i] = 0.0;
        if (time < eligible_from_[i]) continue;

        int category = 0;
        if (!competing) {
            const double p = prob_[0][i];
            if (!(p >= 0.0 && p <= 1.0)) fail_at(ErrorCode::ProbabilityOutOfRange, i, "probability " + format_number(p));
            if (u < p) category = 1;
        } else {
            double sum = prob_[0][i];
            bool bad = !(sum >= 0.0);
            for (std::size_t c = 1; c <= k; ++c) {
                bad |= !(prob_[c][i] >= 0.0);
                sum += prob_[c][i];
            }
            if (bad || !(std::abs(sum - 1.0) <= 1e-6))
                {
                char buf[32];
                std::snprintf(buf, sizeof buf, "%.10g", sum);
                fail_at(ErrorCode::RowNotNormalized, i, std::string("probabilities sum to ") + buf);
            }
            double cum = 0.0;
            for (std::size_t c = 1; c <= k; ++c) {
                cum += prob_[c][i];
                if (u < cum) {
                    category = static_cast<int>(c);
                    break;
                }
            }
        }
        if (category == 0) continue;
        code_[i] = category;
        last_[i] = time;
        window_end_[i] = time + process_->event_duration(category);
        eligible_from_[i] = time + immunity;
        count_[i] += 1.0;
        history_.push_back({static_cast<std::uint32_t>(i), t, category});
    }
}

void step_generic_td(const DagNode& node, DataTable& table, int t, RngStream& rng) {
    GenContext ctx{table, table.n_rows(), rng, t};
    auto cols = node.generator->generate(node.spec.name, ctx);
    for (auto& c : cols) table.set(c.name, std::move(c.column));
}

void derived_columns(const TteState& state, int t, const DerivedColumns& which, DataTable& table) {
    const auto& name = state.name();
    const ColumnType event_type = state.process().competing() ? ColumnType::Integer : ColumnType::Boolean;
    table.set(name + "_event", Column(event_type, state.event()));
    table.set(name + "_time", Column(ColumnType::Integer, state.last_onset()));
    if (which.time_since_last) {
        std::vector<double> since(state.size());
        const auto& last = state.last_onset();
        for (std::size_t i = 0; i < since.size(); ++i) since[i] = is_missing(last[i]) ? kMissing : t - last[i];
        table.set(name + "_time_since_last", Column(ColumnType::Integer, std::move(since)));
    }
    if (which.event_count) table.set(name + "_event_count", Column(ColumnType::Integer, state.event_count()));
}

// ---------------------------------------------------------------------------

SimResult sim_discrete_time(const DagSpec& dag, std::size_t n_sim, int max_t, const SavePolicy& policy,
                            const RngStream& rng) {
    if (!dag.has_time_dependent())
        fail(ErrorCode::NoTimeDependentNode, "the DAG has no time-dependent node");
    if (max_t < 1) fail(ErrorCode::ValidationError, "max_t must be at least 1");

    SimResult result;
    result.dag = dag;
    result.max_t = max_t;
    result.n_sim = n_sim;
    result.policy = policy;

    DataTable table(n_sim);
    result.baseline = generate_time_fixed(dag, table, rng);

    // columns read anywhere decide which optional derived columns are maintained
    std::set<std::string> read;
    for (const auto& n : dag.nodes()) read.merge(n.model().references());

    struct TdSlot {
        const DagNode* node;
        std::size_t position;
        std::unique_ptr<TteState> state;
        DerivedColumns derived;
    };
    std::vector<TdSlot> slots;
    for (const auto& n : dag.nodes()) {
        if (!n.time_dependent()) continue;
        TdSlot s{&n, dag.position(n), nullptr, {}};
        result.td_nodes.push_back(n.spec.name);
        if (n.is_event()) {
            s.state = std::make_unique<TteState>(n.spec.name, n.process, n_sim);
            s.derived.time_since_last =
                n.process->track_time_since_last() || read.count(n.spec.name + "_time_since_last");
            s.derived.event_count = read.count(n.spec.name + "_event_count") > 0;
            derived_columns(*s.state, 0, s.derived, table);
        }
        slots.push_back(std::move(s));
    }

    std::vector<std::string> td_columns;
    for (const auto& s : slots)
        for (const auto& c : s.node->outputs()) td_columns.push_back(c);
    // a generic node continuing a time-fixed one is reported with the time-dependent columns
    std::erase_if(result.baseline, [&](const std::string& c) {
        return std::find(td_columns.begin(), td_columns.end(), c) != td_columns.end();
    });

    ExprEvaluator eval;
    for (int t = 1; t <= max_t; ++t) {
        // elapsed time is measured at the current step for every node
        for (auto& s : slots)
            if (s.state && s.derived.time_since_last) {
                auto& col = table.column(s.node->spec.name + "_time_since_last");
                const auto& last = s.state->last_onset();
                for (std::size_t i = 0; i < n_sim; ++i) col[i] = is_missing(last[i]) ? kMissing : t - last[i];
            }
        for (auto& s : slots) {
            RngStream stream = rng.split(s.position).split(static_cast<std::uint64_t>(t));
            try {
                if (s.state) {
                    s.state->step(table, t, stream, eval);
                    derived_columns(*s.state, t, s.derived, table);
                } else {
                    step_generic_td(*s.node, table, t, stream);
                }
            } catch (const Error& e) {
                throw e.with_context("node '" + s.node->spec.name + "', t=" + std::to_string(t));
            }
        }
        if (policy.saves(t, max_t)) {
            DataTable snap(n_sim);
            for (const auto& c : td_columns) snap.set(c, table.column(c));
            result.snapshots.emplace_back(t, std::move(snap));
        }
    }

    // final table: .id, baseline columns, then time-dependent outputs
    DataTable final_table(n_sim);
    std::vector<double> ids(n_sim);
    for (std::size_t i = 0; i < n_sim; ++i) ids[i] = static_cast<double>(i + 1);
    final_table.set(".id", Column(ColumnType::Integer, std::move(ids)));
    for (const auto& c : result.baseline) final_table.set(c, table.column(c));
    for (const auto& c : td_columns) final_table.set(c, table.column(c));
    result.final_table = std::move(final_table);

    for (auto& s : slots)
        if (s.state) result.histories[s.node->spec.name] = s.state->history();
    return result;
}

}  // namespace dagsim
