#include "dagsim/events.hpp"

#include <algorithm>
#include <cmath>

#include "dagsim/error.hpp"

namespace dagsim {

namespace {

ExprPtr prob_expr(const Json& v, const ConstantMap& constants, ParamReader& p, const std::string& key) {
    if (v.is_number()) {
        const double x = v.get<double>();
        if (!(x >= 0.0 && x <= 1.0)) p.error(key, "must lie in [0, 1]");
        return parse_expr(format_number(x));
    }
    if (v.is_string()) return parse_expr(v.get<std::string>(), constants);
    p.error(key, "must be a number or an expression string");
}

std::string duration_text(double d) { return std::isinf(d) ? "Inf" : format_number(d); }

}  // namespace

EventProcess::EventProcess(const NodeSpec& spec) {
    if (spec.type != "time_to_event" && spec.type != "competing_events")
        fail(ErrorCode::UnknownType, "unknown event type '" + spec.type + "'");
    if (spec.formula)
        fail(ErrorCode::InvalidParameter, "node '" + spec.name + "': event nodes take 'prob', not a formula");
    competing_ = spec.type == "competing_events";
    ParamReader p(spec.params, "node '" + spec.name + "'");
    const auto constants = p.constants();

    if (!competing_) {
        probs_.push_back(prob_expr(p.raw("prob"), constants, p, "prob"));
        durations_.push_back(p.duration("event_duration", 1.0));
    } else {
        const auto& probs = p.raw("probs");
        if (!probs.is_array() || probs.size() < 2)
            p.error("probs", "must list P(no event) followed by one probability per category");
        for (const auto& v : probs) probs_.push_back(prob_expr(v, constants, p, "probs"));
        const std::size_t k = probs_.size() - 1;
        if (p.has("event_duration") && p.raw("event_duration").is_array()) {
            for (const auto& v : p.raw("event_duration")) {
                double d = 0.0;
                if (v.is_string() && (v.get<std::string>() == "Inf" || v.get<std::string>() == "inf"))
                    d = kInfiniteDuration;
                else if (v.is_number())
                    d = v.get<double>();
                if (!(d >= 1.0) || (std::isfinite(d) && std::floor(d) != d))
                    p.error("event_duration", "entries must be positive integers or \"Inf\"");
                durations_.push_back(d);
            }
            if (durations_.size() != k) p.error("event_duration", "needs one entry per event category");
        } else {
            durations_.assign(k, p.duration("event_duration", 1.0));
        }
    }

    const double longest = *std::max_element(durations_.begin(), durations_.end());
    immunity_ = p.duration("immunity_duration", longest);
    if (immunity_ < longest) p.error("immunity_duration", "must be at least the event duration");
    track_since_ = p.boolean("time_since_last", false);
    p.finish();
}

std::set<std::string> EventProcess::references() const {
    std::set<std::string> refs;
    for (const auto& e : probs_) refs.merge(free_variables(*e));
    return refs;
}

std::vector<std::string> EventProcess::output_names(const std::string& name) const {
    std::vector<std::string> out{name + "_event", name + "_time"};
    if (track_since_) out.push_back(name + "_time_since_last");
    return out;
}

std::vector<EquationLine> EventProcess::describe(const std::string& name) const {
    std::string rhs;
    if (!competing_) {
        rhs = "Bernoulli(" + render(*probs_[0]) + "), event_duration=" + duration_text(durations_[0]);
    } else {
        std::string ps;
        for (std::size_t i = 0; i < probs_.size(); ++i) ps += (i ? ", " : "") + render(*probs_[i]);
        std::string ds;
        for (std::size_t i = 0; i < durations_.size(); ++i) ds += (i ? ", " : "") + duration_text(durations_[i]);
        rhs = "Multinomial(" + ps + "), event_duration=(" + ds + ")";
    }
    rhs += ", immunity_duration=" + duration_text(immunity_);
    return {{name + "(t)", rhs}};
}

}  // namespace dagsim
