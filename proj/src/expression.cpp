#include "tourdesk/expression.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <fstream>
#include <limits>
#include <json.hpp>
#include <sstream>

#include "tourdesk/error.hpp"

namespace tourdesk {

using nlohmann::json;

bool ExpressionParams::in_range() const {
    for (double x : {valence, arousal, dominance, real_intention}) {
        if (!(x >= -1.0 && x <= 1.0)) return false;
    }
    return true;
}

ExpressionTable ExpressionTable::defaults() {
    ExpressionTable t;
    t.entries_.emplace(events::kNeutral, ExpressionParams{0.0, 0.0, 0.0, 0.0});
    t.entries_.emplace(events::kSmile, ExpressionParams{0.3, 0.2, 0.1, 0.0});
    // Same tuple as smile; override through the config file if needed.
    t.entries_.emplace(events::kFaintSmile, ExpressionParams{0.3, 0.2, 0.1, 0.0});
    t.entries_.emplace(events::kSurprise, ExpressionParams{0.1, 0.2, -0.8, 0.0});
    return t;
}

ExpressionTable ExpressionTable::parse(std::string_view json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw LoadError(std::string("expression file is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw LoadError("expression file must be a JSON object of event -> 4 numbers");
    ExpressionTable t = defaults();
    for (const auto& [event, values] : doc.items()) {
        if (!values.is_array() || values.size() != 4) {
            throw LoadError("expression " + event + ": expected [valence, arousal, dominance, realIntention]");
        }
        for (const auto& v : values) {
            if (!v.is_number()) throw LoadError("expression " + event + ": components must be numbers");
        }
        ExpressionParams p{values[0].get<double>(), values[1].get<double>(), values[2].get<double>(),
                           values[3].get<double>()};
        if (!p.in_range()) throw LoadError("expression " + event + ": components must lie in [-1, 1]");
        t.entries_[event] = p;
    }
    return t;
}

ExpressionTable ExpressionTable::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open expression file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

ExpressionTable::Lookup ExpressionTable::lookup(std::string_view event) const {
    if (auto it = entries_.find(event); it != entries_.end()) return {it->second, false};
    return {entries_.at(std::string(events::kNeutral)), true};
}

ExpressionParams ExpressionTable::params_for(std::string_view event) const {
    Lookup r = lookup(event);
    if (r.fallback) spdlog::warn("unknown expression event '{}', using neutral", event);
    return r.params;
}

ExpressionFrame make_frame(const ExpressionTable& table, const ExpressionEvent& event) {
    return {event.t, event.event, table.params_for(event.event)};
}

std::vector<ExpressionFrame> frame_stream(const ExpressionTable& table, const std::vector<ExpressionEvent>& events,
                                          double close_t) {
    std::vector<ExpressionFrame> frames;
    frames.reserve(events.size() + 1);
    double last = -std::numeric_limits<double>::infinity();
    for (const auto& e : events) {
        ExpressionFrame f = make_frame(table, e);
        f.t = std::max(f.t, last);
        last = f.t;
        frames.push_back(std::move(f));
    }
    frames.push_back({std::max(close_t, last), std::string(events::kNeutral), table.params_for(events::kNeutral)});
    return frames;
}

std::string frame_to_json(const ExpressionFrame& frame) {
    json j = {
        {"t", frame.t},
        {"event", frame.event},
        {"valence", frame.params.valence},
        {"arousal", frame.params.arousal},
        {"dominance", frame.params.dominance},
        {"realIntention", frame.params.real_intention},
    };
    return j.dump();
}

}  // namespace tourdesk
