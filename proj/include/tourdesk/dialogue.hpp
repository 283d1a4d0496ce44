#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tourdesk/attractions.hpp"
#include "tourdesk/embeddings.hpp"
#include "tourdesk/intent.hpp"
#include "tourdesk/places.hpp"

namespace tourdesk {

using Clock = std::chrono::system_clock;
using TimePoint = Clock::time_point;

// Ordered: a session only moves forward through these, except that the
// deadline may jump straight to Closing.
enum class DialogueState { Greeting, AskName, Overview, AskTransport, Recommend, QA, Closing, Closed };

std::string_view to_string(DialogueState state);
std::optional<DialogueState> parse_state(std::string_view name);

// True if `to` may follow `from` in a session (same state, the next one in
// the flow, or Closing/Closed once the deadline fires).
bool is_allowed_transition(DialogueState from, DialogueState to);

enum class Transport { Unknown, Car, Train };
std::string_view to_string(Transport transport);
std::optional<Transport> parse_transport_name(std::string_view name);

enum class Speaker { Visitor, Robot };
std::string_view to_string(Speaker speaker);

struct Turn {
    Speaker speaker = Speaker::Visitor;
    std::string text;
    DialogueState state_at_emit = DialogueState::Greeting;
    std::string expression_event;  // robot turns only
    std::optional<Classification> classified;
    std::string offer;             // category the robot offered, if the turn ends with a yes/no offer
    TimePoint at;
};

struct ReplyDebug {
    std::string category;
    double score = 0.0;
    SimilarityMethod method = SimilarityMethod::Wrd;
    std::string resolved_by;  // "classifier" or "affirmation"
};

struct Reply {
    std::string text;
    std::string expression_event;
    DialogueState new_state = DialogueState::Greeting;
    std::optional<ReplyDebug> debug;
};

struct Session {
    std::string id;
    Attraction spot_a;
    Attraction spot_b;
    std::string recommended;
    std::optional<std::string> visitor_name;
    Transport transport = Transport::Unknown;
    DialogueState state = DialogueState::Greeting;
    std::vector<Turn> transcript;
    TimePoint deadline;
    int qa_turn_count = 0;

    // Conversation bookkeeping.
    int name_reprompts = 0;
    int transport_reprompts = 0;
    std::string pending_offer;       // category of the last yes/no offer
    std::string pending_offer_spot;  // attraction id the offer refers to
    std::vector<std::string> told;   // "spot_id/category" pairs already answered

    const Attraction& recommended_spot() const { return recommended == spot_a.id ? spot_a : spot_b; }
    const Attraction& other_spot() const { return recommended == spot_a.id ? spot_b : spot_a; }
    const Attraction* spot(std::string_view id) const;
};

// Which of the two spots to steer toward. Without an override the spot with
// more populated data slots wins; ties go to spot_b.
struct RecommendationPolicy {
    std::optional<std::string> prefer;

    std::string choose(const Attraction& a, const Attraction& b) const;
};

// Expression event emitted for each kind of robot turn.
struct ExpressionMapping {
    std::string greeting = "smile";
    std::string recommend = "smile";
    std::string answer = "faint_smile";
    std::string clarify = "surprise";
    std::string fallback = "neutral";
};

struct DialogueConfig {
    ClassifierConfig classifier;
    int name_period = 3;  // every Nth QA reply opens with the visitor's name
    std::chrono::seconds session_length{300};
    double restaurant_radius_m = 800.0;
    std::size_t restaurant_cap = 2;
    ExpressionMapping expressions;
};

// Stateless driver for the session flow. All state lives in Session, so a
// single engine serves any number of sessions; callers serialize calls per
// session.
class DialogueEngine {
public:
    using ClockFn = std::function<TimePoint()>;

    DialogueEngine(const EmbeddingStore& store, const CategoryRegistry& registry, const PlacesProvider* places,
                   DialogueConfig cfg, const Segmenter& segmenter = default_segmenter(),
                   ClockFn clock = [] { return Clock::now(); });

    // Greets the visitor and asks for their name. Throws ValidationError when
    // both spots are the same or the policy names neither spot.
    std::pair<Session, Reply> new_session(std::string id, Attraction spot_a, Attraction spot_b,
                                          const RecommendationPolicy& policy,
                                          std::optional<TimePoint> deadline = std::nullopt) const;

    // Appends the visitor turn and the robot reply. Throws SessionClosed on a
    // Closed session.
    Reply advance(Session& session, std::string_view visitor_text) const;

    // Emits the wrap-up when the deadline has passed without any visitor
    // input. Returns nothing if the deadline is still ahead or the session is
    // already closing.
    std::optional<Reply> tick(Session& session) const;

    // Says goodbye and closes the session. Throws SessionClosed if already closed.
    Reply close(Session& session) const;

    const DialogueConfig& config() const noexcept { return cfg_; }
    TimePoint now() const { return clock_(); }

private:
    Reply on_name(Session& s, std::string_view text) const;
    Reply on_overview(Session& s) const;
    Reply on_transport(Session& s, const TokenizedUtterance& tokens) const;
    Reply on_question(Session& s, const TokenizedUtterance& tokens) const;
    Reply on_final_choice(Session& s, const TokenizedUtterance& tokens) const;
    Reply wrap_up(Session& s) const;

    Reply recommendation(Session& s) const;
    std::string answer(const Attraction& spot, const std::string& category) const;
    std::vector<const Attraction*> named_spots(const Session& s, const TokenizedUtterance& tokens) const;
    void offer_next(Session& s, const Attraction& spot, std::string& text) const;
    bool slot_available(const Attraction& spot, std::string_view category) const;

    void push_robot(Session& s, const Reply& reply, DialogueState state_at_emit, std::optional<Classification> cls,
                    std::string offer) const;

    const EmbeddingStore& store_;
    const CategoryRegistry& registry_;
    const PlacesProvider* places_;
    DialogueConfig cfg_;
    const Segmenter& segmenter_;
    ClockFn clock_;
};

// Visitor name from an introduction: the longest run of words left after
// removing politeness and filler words. Empty when nothing is left.
std::string capture_name(std::string_view text);

// Car / train keyword detection; Unknown when neither or both are present.
Transport parse_transport(const TokenizedUtterance& tokens);

// Closed vocabulary of bare affirmations ("ok", "it's okay", "fine", "sure", ...).
bool is_bare_affirmation(const TokenizedUtterance& tokens);
bool is_bare_negation(const TokenizedUtterance& tokens);

// --- questionnaire ----------------------------------------------------------

struct QuestionnaireItem {
    std::string_view id;
    std::string_view label;
};

// The nine 1-5 rating items asked after the dialogue.
std::span<const QuestionnaireItem> questionnaire_items();

struct QuestionnaireAnswers {
    std::map<std::string, int> ratings;  // item id -> 1..5
    std::string chosen_spot;
};

struct QuestionnaireRecord {
    std::string session_id;
    std::map<std::string, int> ratings;
    std::string chosen_spot;
    std::string recommended;
    bool chose_recommended = false;
    int impression_total = 0;  // sum of the nine ratings
    TimePoint at;
};

class SessionLog;

// Validates the answers against a Closing/Closed session and appends the
// record to the session log. Throws ValidationError.
QuestionnaireRecord record_questionnaire(const Session& session, const QuestionnaireAnswers& answers,
                                         SessionLog& log, TimePoint now = Clock::now());

}  // namespace tourdesk
