#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dagsim/dag.hpp"
#include "dagsim/events.hpp"
#include "dagsim/random.hpp"
#include "dagsim/table.hpp"

namespace dagsim {

struct SavePolicy {
    enum class Kind { Last, All, At };
    Kind kind = Kind::Last;
    std::vector<int> times;

    /// "last", "all" or "at:t1,t2,...". Throws ParseError.
    static SavePolicy parse(std::string_view text);
    bool saves(int t, int max_t) const;
    std::string to_string() const;
};

/// One event onset: individual (0-based row), time step and category (1 for time_to_event).
struct Onset {
    std::uint32_t row;
    std::int32_t time;
    std::int32_t category;
};

/// Event bookkeeping for one time_to_event / competing_events node.
class TteState {
public:
    TteState(std::string name, std::shared_ptr<const EventProcess> process, std::size_t n);

    const std::string& name() const { return name_; }
    const EventProcess& process() const { return *process_; }
    std::size_t size() const { return code_.size(); }

    /// Current category per row (0 = no event in progress).
    const std::vector<double>& event() const { return code_; }
    const std::vector<double>& last_onset() const { return last_; }
    const std::vector<double>& event_count() const { return count_; }
    const std::vector<Onset>& history() const { return history_; }

    /// Advances to time t: closes expired windows, evaluates the onset
    /// probabilities on `table` for all rows, and draws one uniform per row;
    /// only rows outside their immunity window can start an event.
    /// Throws ProbabilityOutOfRange / RowNotNormalized naming t and the row.
    void step(const DataTable& table, int t, RngStream& rng, ExprEvaluator& eval);

private:
    std::string name_;
    std::shared_ptr<const EventProcess> process_;
    std::vector<double> code_;
    std::vector<double> last_;
    std::vector<double> window_end_;      // first step after the event window
    std::vector<double> eligible_from_;   // first step a new onset may happen
    std::vector<double> count_;
    std::vector<Onset> history_;
    std::vector<std::vector<double>> prob_;
};

/// step_time_to_event / step_competing_events share one implementation.
inline void step_time_to_event(TteState& state, const DataTable& table, int t, RngStream& rng,
                               ExprEvaluator& eval) {
    state.step(table, t, rng, eval);
}
inline void step_competing_events(TteState& state, const DataTable& table, int t, RngStream& rng,
                                  ExprEvaluator& eval) {
    state.step(table, t, rng, eval);
}

/// Recomputes a generic time-dependent node from the current table and
/// replaces its column(s). Errors such as a missing t = 0 value surface as UnknownColumn.
void step_generic_td(const DagNode& node, DataTable& table, int t, RngStream& rng);

/// Which derived columns an event node keeps in the table.
struct DerivedColumns {
    bool time_since_last = false;
    bool event_count = false;
};

/// Writes <name>_event, <name>_time and the requested optional columns for time t.
void derived_columns(const TteState& state, int t, const DerivedColumns& which, DataTable& table);

struct SimResult {
    /// .id, baseline columns, then the time-dependent columns at t = max_t.
    DataTable final_table;
    /// Onsets per event node in time order.
    std::map<std::string, std::vector<Onset>> histories;
    /// Time-dependent columns after the listed steps.
    std::vector<std::pair<int, DataTable>> snapshots;
    int max_t = 0;
    std::size_t n_sim = 0;
    SavePolicy policy;
    DagSpec dag;
    /// Time-fixed columns, in final_table order.
    std::vector<std::string> baseline;
    /// Time-dependent node names in insertion order.
    std::vector<std::string> td_nodes;
};

/// Generates the time-fixed nodes (t = 0), then for t = 1..max_t updates every
/// time-dependent node in insertion order: earlier nodes are seen at t, later
/// ones at t - 1. Node i's stream at step t is rng.split(i).split(t).
/// Throws NoTimeDependentNode, ValidationError and generator errors with (node, t) context.
SimResult sim_discrete_time(const DagSpec& dag, std::size_t n_sim, int max_t, const SavePolicy& policy,
                            const RngStream& rng);

}  // namespace dagsim
