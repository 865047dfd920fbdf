#include "dagsim/transform.hpp"

#include <algorithm>
#include <cmath>

#include "dagsim/error.hpp"

namespace dagsim {

namespace {

/// A time-dependent variable that can be replayed per individual.
struct Var {
    std::string name;
    ColumnType type = ColumnType::Boolean;
    std::vector<std::string> levels;
    // event nodes: onsets grouped by row
    const EventProcess* process = nullptr;
    std::vector<std::size_t> offsets;
    std::vector<Onset> onsets;
    // generic nodes: the column at each step
    std::vector<const Column*> by_time;
};

class Timeline {
public:
    explicit Timeline(const SimResult& r) : max_t_(r.max_t) {
        std::vector<const DataTable*> snap(static_cast<std::size_t>(r.max_t), nullptr);
        for (const auto& [t, table] : r.snapshots)
            if (t >= 1 && t <= r.max_t) snap[static_cast<std::size_t>(t - 1)] = &table;

        for (const auto& name : r.td_nodes) {
            const DagNode& node = *std::find_if(r.dag.nodes().begin(), r.dag.nodes().end(), [&](const DagNode& n) {
                return n.spec.name == name && n.time_dependent();
            });
            if (node.is_event()) {
                Var v;
                v.name = name;
                v.process = node.process.get();
                v.type = node.process->competing() ? ColumnType::Integer : ColumnType::Boolean;
                const auto& hist = r.histories.at(name);
                v.offsets.assign(r.n_sim + 1, 0);
                for (const auto& o : hist) ++v.offsets[o.row + 1];
                for (std::size_t i = 0; i < r.n_sim; ++i) v.offsets[i + 1] += v.offsets[i];
                v.onsets.resize(hist.size());
                auto next = v.offsets;
                for (const auto& o : hist) v.onsets[next[o.row]++] = o;
                vars_.push_back(std::move(v));
                continue;
            }
            for (const auto& col : node.outputs()) {
                Var v;
                v.name = col;
                for (std::size_t t = 0; t < snap.size(); ++t) {
                    if (!snap[t])
                        fail(ErrorCode::InsufficientSavedStates,
                             "node '" + name + "' is not an event node and step " + std::to_string(t + 1) +
                                 " was not saved; save all states to reconstruct it");
                    v.by_time.push_back(&snap[t]->column(col));
                }
                if (!v.by_time.empty()) {
                    v.type = v.by_time.front()->type();
                    v.levels = v.by_time.front()->levels();
                }
                vars_.push_back(std::move(v));
            }
        }
    }

    const std::vector<Var>& vars() const { return vars_; }
    int max_t() const { return max_t_; }

    /// Values of `v` for individual `id` at t = 1..max_t into out[0..max_t).
    void fill(const Var& v, std::size_t id, double* out) const {
        if (!v.process) {
            for (int t = 0; t < max_t_; ++t) out[t] = (*v.by_time[static_cast<std::size_t>(t)])[id];
            return;
        }
        std::fill(out, out + max_t_, 0.0);
        for (std::size_t k = v.offsets[id]; k < v.offsets[id + 1]; ++k) {
            const auto& o = v.onsets[k];
            const double d = v.process->event_duration(o.category);
            const int end = std::isinf(d) ? max_t_ : static_cast<int>(std::min<double>(max_t_, o.time + d - 1));
            for (int t = o.time; t <= end; ++t) out[t - 1] = o.category;
        }
    }

    /// Onset times of an event node for one individual.
    std::vector<int> onsets(const Var& v, std::size_t id) const {
        std::vector<int> out;
        for (std::size_t k = v.offsets[id]; k < v.offsets[id + 1]; ++k) out.push_back(v.onsets[k].time);
        return out;
    }

private:
    int max_t_;
    std::vector<Var> vars_;
};

bool same(double a, double b) { return a == b || (is_missing(a) && is_missing(b)); }

Column like(const Var& v, std::vector<double> values) { return Column(v.type, std::move(values), v.levels); }

/// Column whose row k is c[rows[k]].
Column pick_rows(const Column& c, const std::vector<std::size_t>& rows) {
    std::vector<double> out;
    out.reserve(rows.size());
    for (auto r : rows) out.push_back(c[r]);
    return Column(c.type(), std::move(out), c.levels());
}

Column ints(std::vector<double> v) { return Column(ColumnType::Integer, std::move(v)); }

}  // namespace

DataTable to_long(const SimResult& r) {
    const Timeline tl(r);
    const auto T = static_cast<std::size_t>(r.max_t);
    const std::size_t rows = r.n_sim * T;
    DataTable out(rows);
    std::vector<double> id(rows), time(rows);
    std::vector<std::size_t> source(rows);
    for (std::size_t i = 0; i < r.n_sim; ++i)
        for (std::size_t t = 0; t < T; ++t) {
            id[i * T + t] = static_cast<double>(i + 1);
            time[i * T + t] = static_cast<double>(t + 1);
            source[i * T + t] = i;
        }
    out.set(".id", ints(std::move(id)));
    out.set(".time", ints(std::move(time)));
    for (const auto& v : tl.vars()) {
        std::vector<double> values(rows);
        for (std::size_t i = 0; i < r.n_sim; ++i) tl.fill(v, i, values.data() + i * T);
        out.set(v.name, like(v, std::move(values)));
    }
    for (const auto& b : r.baseline) out.set(b, pick_rows(r.final_table.column(b), source));
    return out;
}

DataTable to_wide(const SimResult& r) {
    const Timeline tl(r);
    const auto T = static_cast<std::size_t>(r.max_t);
    DataTable out(r.n_sim);
    out.set(".id", r.final_table.column(".id"));
    for (const auto& b : r.baseline) out.set(b, r.final_table.column(b));
    std::vector<double> buf(T);
    for (const auto& v : tl.vars()) {
        std::vector<std::vector<double>> cols(T, std::vector<double>(r.n_sim));
        for (std::size_t i = 0; i < r.n_sim; ++i) {
            tl.fill(v, i, buf.data());
            for (std::size_t t = 0; t < T; ++t) cols[t][i] = buf[t];
        }
        for (std::size_t t = 0; t < T; ++t) out.set(v.name + "_" + std::to_string(t + 1), like(v, std::move(cols[t])));
    }
    return out;
}

DataTable to_start_stop(const SimResult& r, const StartStopOptions& opt) {
    const Timeline tl(r);
    const int T = r.max_t;

    std::size_t target = static_cast<std::size_t>(-1);
    if (opt.target_event) {
        const auto* node = r.dag.find(*opt.target_event);
        if (!node) fail(ErrorCode::UnknownNode, "target event '" + *opt.target_event + "' is not a node");
        if (!node->is_event() || node->process->competing())
            fail(ErrorCode::ValidationError, "target event '" + *opt.target_event + "' must be a time_to_event node");
        for (std::size_t k = 0; k < tl.vars().size(); ++k)
            if (tl.vars()[k].name == *opt.target_event) target = k;
    }
    const auto& vars = tl.vars();
    const std::size_t nv = vars.size();

    std::vector<double> ids, starts, stops;
    std::vector<std::vector<double>> values(nv);
    std::vector<std::size_t> source;

    std::vector<std::vector<double>> line(nv, std::vector<double>(static_cast<std::size_t>(T)));
    std::vector<char> onset(static_cast<std::size_t>(T) + 2, 0);

    struct Interval {
        int start, stop;
        bool target;
    };
    std::vector<Interval> intervals;

    for (std::size_t id = 0; id < r.n_sim; ++id) {
        for (std::size_t k = 0; k < nv; ++k)
            if (k != target) tl.fill(vars[k], id, line[k].data());
        std::fill(onset.begin(), onset.end(), 0);
        if (target != static_cast<std::size_t>(-1))
            for (int o : tl.onsets(vars[target], id)) onset[static_cast<std::size_t>(o)] = 1;

        // non-overlapping maximal intervals; a target onset o is isolated as [o, o]
        intervals.clear();
        int s = 1;
        for (int t = 2; t <= T + 1; ++t) {
            bool cut = t == T + 1 || onset[static_cast<std::size_t>(t)] || onset[static_cast<std::size_t>(t - 1)];
            for (std::size_t k = 0; k < nv && !cut; ++k)
                if (k != target) cut = !same(line[k][static_cast<std::size_t>(t - 1)], line[k][static_cast<std::size_t>(t - 2)]);
            if (!cut) continue;
            intervals.push_back({s, t - 1, onset[static_cast<std::size_t>(t - 1)] != 0});
            s = t;
        }

        // values are read at an interval's first step; emitted rows keep their source interval
        struct Row {
            int start, stop;
            bool target;
            int from;
        };
        std::vector<Row> rows;
        if (!opt.overlap) {
            for (const auto& iv : intervals) rows.push_back({iv.start, iv.stop, iv.target, iv.start});
        } else {
            for (std::size_t j = 0; j < intervals.size(); ++j) {
                const auto& iv = intervals[j];
                if (iv.target && !rows.empty() && !rows.back().target && rows.back().stop == iv.start) {
                    rows.back().target = true;
                    continue;
                }
                const int start = rows.empty() ? iv.start : rows.back().stop;
                const bool last = j + 1 == intervals.size();
                const int stop = (iv.target || last) ? iv.stop : iv.stop + 1;
                rows.push_back({start, stop, iv.target, iv.start});
            }
        }
        if (opt.keep_only_first) {
            auto first = std::find_if(rows.begin(), rows.end(), [](const Row& x) { return x.target; });
            if (first != rows.end()) rows.erase(first + 1, rows.end());
        }

        for (const auto& row : rows) {
            ids.push_back(static_cast<double>(id + 1));
            starts.push_back(row.start);
            stops.push_back(row.stop);
            source.push_back(id);
            for (std::size_t k = 0; k < nv; ++k)
                values[k].push_back(k == target ? (row.target ? 1.0 : 0.0)
                                                : line[k][static_cast<std::size_t>(row.from - 1)]);
        }
    }

    DataTable out(ids.size());
    out.set(".id", ints(std::move(ids)));
    out.set("start", ints(std::move(starts)));
    out.set("stop", ints(std::move(stops)));
    for (std::size_t k = 0; k < nv; ++k)
        out.set(vars[k].name, k == target ? Column(ColumnType::Boolean, std::move(values[k]))
                                          : like(vars[k], std::move(values[k])));
    for (const auto& b : r.baseline) out.set(b, pick_rows(r.final_table.column(b), source));
    return out;
}

DataTable expand_start_stop(const DataTable& ss) {
    const auto& start = ss.column("start");
    const auto& stop = ss.column("stop");
    std::vector<std::size_t> source;
    std::vector<double> ids, times;
    for (std::size_t i = 0; i < ss.n_rows(); ++i)
        for (auto t = static_cast<long>(start[i]); t <= static_cast<long>(stop[i]); ++t) {
            source.push_back(i);
            ids.push_back(ss.column(".id")[i]);
            times.push_back(static_cast<double>(t));
        }
    DataTable out(source.size());
    out.set(".id", ints(std::move(ids)));
    out.set(".time", ints(std::move(times)));
    for (std::size_t c = 0; c < ss.n_cols(); ++c) {
        const auto& name = ss.name(c);
        if (name == ".id" || name == "start" || name == "stop") continue;
        out.set(name, pick_rows(ss.column(c), source));
    }
    return out;
}

}  // namespace dagsim
