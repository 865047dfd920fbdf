#pragma once

#include <optional>
#include <string>

#include "dagsim/dt_engine.hpp"
#include "dagsim/table.hpp"

namespace dagsim {

/// n_sim x max_t rows keyed (.id, .time): the time-dependent variables
/// (event nodes as their current category, generic nodes from snapshots),
/// followed by the baseline columns. Throws InsufficientSavedStates when a
/// generic time-dependent node was not saved at every step.
DataTable to_long(const SimResult& result);

/// One row per .id: baseline columns, then <var>_1 .. <var>_<max_t> per variable.
DataTable to_wide(const SimResult& result);

struct StartStopOptions {
    /// time_to_event node treated as the outcome instead of a covariate.
    std::optional<std::string> target_event;
    /// Consecutive intervals share their boundary (counting-process style).
    bool overlap = false;
    /// Drop every row of an individual after its first target event.
    bool keep_only_first = false;
};

/// Maximal intervals over which all time-dependent covariates stay constant:
/// .id, start, stop, the variables, then baseline columns. A target onset at
/// time o gets its own interval [o, o] marked true; in overlap mode that mark
/// moves to the interval ending at o and each start equals the previous stop.
/// Throws InsufficientSavedStates, UnknownNode, ValidationError.
DataTable to_start_stop(const SimResult& result, const StartStopOptions& options = {});

/// Inverse of the non-overlap start-stop form: one row per (.id, time) with the
/// interval's values. Reproduces to_long when no target was used.
DataTable expand_start_stop(const DataTable& start_stop);

}  // namespace dagsim
