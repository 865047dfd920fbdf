#pragma once

#include <limits>
#include <string>
#include <vector>

#include "dagsim/nodes.hpp"

namespace dagsim {

inline constexpr double kInfiniteDuration = std::numeric_limits<double>::infinity();

/// Compiled time_to_event / competing_events node. A time_to_event node is
/// treated as the one-category case of competing events: probs() holds a
/// single onset probability, event_durations() a single entry.
class EventProcess final : public NodeModel {
public:
    explicit EventProcess(const NodeSpec& spec);

    bool competing() const { return competing_; }
    /// Number of event categories k (1 for time_to_event).
    std::size_t categories() const { return durations_.size(); }

    /// time_to_event: {P(onset)}. competing_events: {P(none), P(1), ..., P(k)}.
    const std::vector<ExprPtr>& probs() const { return probs_; }
    /// Event window length per category 1..k (index 0 is category 1).
    const std::vector<double>& event_durations() const { return durations_; }
    double event_duration(int category) const { return durations_[static_cast<std::size_t>(category - 1)]; }
    double immunity_duration() const { return immunity_; }
    bool track_time_since_last() const { return track_since_; }

    std::set<std::string> references() const override;
    std::vector<std::string> output_names(const std::string& name) const override;
    std::vector<EquationLine> describe(const std::string& name) const override;

private:
    bool competing_ = false;
    std::vector<ExprPtr> probs_;
    std::vector<double> durations_;
    double immunity_ = 1.0;
    bool track_since_ = false;
};

/// Suffixes of the columns an event node maintains, longest first so that
/// "_event_count" is recognised before "_event".
inline const std::vector<std::string>& derived_suffixes() {
    static const std::vector<std::string> s{"_time_since_last", "_event_count", "_event", "_time"};
    return s;
}

}  // namespace dagsim
