#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace tourdesk {

struct ExpressionParams {
    double valence = 0.0;
    double arousal = 0.0;
    double dominance = 0.0;
    double real_intention = 0.0;

    bool in_range() const;
    friend bool operator==(const ExpressionParams&, const ExpressionParams&) = default;
};

namespace events {
inline constexpr std::string_view kNeutral = "neutral";
inline constexpr std::string_view kSmile = "smile";
inline constexpr std::string_view kFaintSmile = "faint_smile";
inline constexpr std::string_view kSurprise = "surprise";
}  // namespace events

class ExpressionTable {
public:
    // Built-in face table: the measured smile/faint smile/surprise rows
    // plus a zero neutral.
    static ExpressionTable defaults();

    // JSON object: event -> [valence, arousal, dominance, realIntention].
    // Entries override the built-in rows; the four required events must be
    // present afterwards and every value must lie in [-1, 1].
    static ExpressionTable load(const std::filesystem::path& path);
    static ExpressionTable parse(std::string_view json_text);

    struct Lookup {
        ExpressionParams params;
        bool fallback = false;  // event unknown, neutral returned
    };
    Lookup lookup(std::string_view event) const;

    // Unknown events fall back to neutral and log a warning.
    ExpressionParams params_for(std::string_view event) const;

    bool contains(std::string_view event) const { return entries_.find(event) != entries_.end(); }
    const std::map<std::string, ExpressionParams, std::less<>>& entries() const noexcept { return entries_; }

private:
    std::map<std::string, ExpressionParams, std::less<>> entries_;
};

struct ExpressionEvent {
    double t = 0.0;  // seconds since the Unix epoch
    std::string event;
};

struct ExpressionFrame {
    double t = 0.0;
    std::string event;
    ExpressionParams params;
};

// One frame per event in order, then a closing neutral frame. Timestamps
// are made monotone: a frame never precedes the one before it.
std::vector<ExpressionFrame> frame_stream(const ExpressionTable& table, const std::vector<ExpressionEvent>& events,
                                          double close_t);

ExpressionFrame make_frame(const ExpressionTable& table, const ExpressionEvent& event);

// {t, event, valence, arousal, dominance, realIntention}
std::string frame_to_json(const ExpressionFrame& frame);

}  // namespace tourdesk
