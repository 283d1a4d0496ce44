#include "tourdesk/dialogue.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <set>
#include <unordered_set>

#include "tourdesk/error.hpp"
#include "tourdesk/session_log.hpp"

namespace tourdesk {

namespace {

constexpr std::array<std::string_view, 8> kStateNames = {
    "Greeting", "AskName", "Overview", "AskTransport", "Recommend", "QA", "Closing", "Closed",
};

// Categories the robot proposes on its own, in this order.
constexpr std::array<std::string_view, 5> kOfferOrder = {
    "PriceRemark", "TimeRemark", "Restaurants", "Access", "Parking",
};

const std::unordered_set<std::string_view>& name_stopwords() {
    static const std::unordered_set<std::string_view> words = {
        "my", "name", "names", "name's", "is", "i", "im", "i'm", "am", "call", "called", "me", "you", "can",
        "it", "its", "it's", "this", "that", "the", "hello", "hi", "hey", "please", "nice", "to", "meet",
        "thanks", "thank", "and", "a", "san", "sama", "kun", "chan", "sir", "mr", "mrs", "ms", "miss", "dr",
        "good", "morning", "afternoon", "evening", "yes", "ok", "okay", "sure", "well", "um", "uh", "so",
        "just", "of", "course", "here", "there", "speaking", "desu", "watashi", "wa", "boku", "to", "moushimasu",
        "by", "way", "everyone", "friends", "oh",
    };
    return words;
}

const std::set<std::string>& car_words() {
    static const std::set<std::string> words = {"car", "cars", "drive", "driving", "drove", "rental",
                                                "vehicle", "automobile", "auto", "車", "くるま", "自動車"};
    return words;
}

const std::set<std::string>& train_words() {
    static const std::set<std::string> words = {"train", "trains", "rail", "railway", "station", "subway",
                                                "metro", "jr", "shinkansen", "電車", "でんしゃ", "鉄道"};
    return words;
}

// Generic words that do not identify one spot over another.
const std::set<std::string>& generic_name_words() {
    static const std::set<std::string> words = {
        "the", "of", "and", "park", "museum", "temple", "shrine", "castle", "tower", "garden", "gardens",
        "zoo", "aquarium", "hall", "center", "centre", "lake", "mountain", "mt", "river", "bridge", "station",
        "city", "art", "national", "island", "beach", "street", "market", "world", "land", "house",
    };
    return words;
}

std::string joined(const TokenizedUtterance& t) {
    std::string out;
    for (const auto& tok : t.tokens) {
        if (!out.empty()) out.push_back(' ');
        out += tok;
    }
    return out;
}

std::string told_key(const Attraction& spot, std::string_view category) {
    return spot.id + "/" + std::string(category);
}

bool contains_sequence(const std::vector<std::string>& hay, const std::vector<std::string>& needle) {
    if (needle.empty() || needle.size() > hay.size()) return false;
    return std::search(hay.begin(), hay.end(), needle.begin(), needle.end()) != hay.end();
}

std::string trim_word(std::string_view w) {
    auto is_edge = [](unsigned char c) { return std::ispunct(c) && c != '\''; };
    while (!w.empty() && is_edge(static_cast<unsigned char>(w.front()))) w.remove_prefix(1);
    while (!w.empty() && (is_edge(static_cast<unsigned char>(w.back())) || w.back() == '\'')) w.remove_suffix(1);
    return std::string(w);
}

}  // namespace

std::string_view to_string(DialogueState state) { return kStateNames[static_cast<std::size_t>(state)]; }

std::optional<DialogueState> parse_state(std::string_view name) {
    for (std::size_t k = 0; k < kStateNames.size(); ++k) {
        if (kStateNames[k] == name) return static_cast<DialogueState>(k);
    }
    return std::nullopt;
}

bool is_allowed_transition(DialogueState from, DialogueState to) {
    const int f = static_cast<int>(from);
    const int t = static_cast<int>(to);
    if (t == f || t == f + 1) return true;
    if (from == DialogueState::Closing || from == DialogueState::Closed) return false;
    // Deadline wrap-up, or operator close.
    return to == DialogueState::Closing || to == DialogueState::Closed;
}

std::string_view to_string(Transport transport) {
    switch (transport) {
        case Transport::Car: return "car";
        case Transport::Train: return "train";
        default: return "unknown";
    }
}

std::optional<Transport> parse_transport_name(std::string_view name) {
    if (name == "car") return Transport::Car;
    if (name == "train") return Transport::Train;
    if (name == "unknown") return Transport::Unknown;
    return std::nullopt;
}

std::string_view to_string(Speaker speaker) { return speaker == Speaker::Robot ? "robot" : "visitor"; }

const Attraction* Session::spot(std::string_view id) const {
    if (id == spot_a.id) return &spot_a;
    if (id == spot_b.id) return &spot_b;
    return nullptr;
}

std::string RecommendationPolicy::choose(const Attraction& a, const Attraction& b) const {
    if (prefer) {
        if (*prefer != a.id && *prefer != b.id) {
            throw ValidationError("recommended spot " + *prefer + " is not one of the two chosen spots");
        }
        return *prefer;
    }
    return a.populated_slots() > b.populated_slots() ? a.id : b.id;
}

// --- free helpers -----------------------------------------------------------

std::string capture_name(std::string_view text) {
    std::vector<std::string> words;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        std::size_t start = i;
        while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        if (i > start) words.push_back(trim_word(text.substr(start, i - start)));
    }
    // Split on sentence punctuation inside words ("Sato.Nice") is not handled;
    // commas and periods at word edges are.
    std::vector<std::string> best, run;
    auto close_run = [&] {
        if (run.size() > best.size()) best = run;
        run.clear();
    };
    for (const auto& w : words) {
        std::string lower = w;
        for (char& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        if (w.empty() || name_stopwords().contains(lower)) {
            close_run();
        } else {
            run.push_back(w);
        }
    }
    close_run();
    std::string name;
    for (auto w : best) {
        if (std::islower(static_cast<unsigned char>(w[0]))) w[0] = static_cast<char>(std::toupper(w[0]));
        if (!name.empty()) name.push_back(' ');
        name += w;
    }
    return name;
}

Transport parse_transport(const TokenizedUtterance& tokens) {
    bool car = false;
    bool train = false;
    for (const auto& t : tokens.tokens) {
        car = car || car_words().contains(t);
        train = train || train_words().contains(t);
    }
    if (car == train) return Transport::Unknown;
    return car ? Transport::Car : Transport::Train;
}

bool is_bare_affirmation(const TokenizedUtterance& tokens) {
    static const std::set<std::string> phrases = {
        "ok", "okay", "its ok", "its okay", "it is ok", "it is okay", "thats ok", "thats okay", "fine",
        "its fine", "thats fine", "sure", "yes", "yeah", "yep", "yes please", "sure please", "ok please",
        "okay please", "all right", "alright", "please", "大丈夫", "大丈夫です", "いいです", "はい",
    };
    return phrases.contains(joined(tokens));
}

bool is_bare_negation(const TokenizedUtterance& tokens) {
    static const std::set<std::string> phrases = {
        "no", "nope", "no thanks", "no thank you", "not now", "not really", "いいえ",
    };
    return phrases.contains(joined(tokens));
}

// --- engine -----------------------------------------------------------------

DialogueEngine::DialogueEngine(const EmbeddingStore& store, const CategoryRegistry& registry,
                               const PlacesProvider* places, DialogueConfig cfg, const Segmenter& segmenter,
                               ClockFn clock)
    : store_(store),
      registry_(registry),
      places_(places),
      cfg_(std::move(cfg)),
      segmenter_(segmenter),
      clock_(std::move(clock)) {
    if (cfg_.name_period <= 0) throw ConfigError("name interjection period must be positive");
}

void DialogueEngine::push_robot(Session& s, const Reply& reply, DialogueState state_at_emit,
                                std::optional<Classification> cls, std::string offer) const {
    Turn t;
    t.speaker = Speaker::Robot;
    t.text = reply.text;
    t.state_at_emit = state_at_emit;
    t.expression_event = reply.expression_event;
    t.classified = std::move(cls);
    t.offer = std::move(offer);
    t.at = clock_();
    if (!s.transcript.empty()) t.at = std::max(t.at, s.transcript.back().at);
    s.transcript.push_back(std::move(t));
}

std::pair<Session, Reply> DialogueEngine::new_session(std::string id, Attraction spot_a, Attraction spot_b,
                                                      const RecommendationPolicy& policy,
                                                      std::optional<TimePoint> deadline) const {
    if (spot_a.id == spot_b.id) throw ValidationError("the two spots must differ, both are " + spot_a.id);
    Session s;
    s.id = std::move(id);
    s.recommended = policy.choose(spot_a, spot_b);
    s.spot_a = std::move(spot_a);
    s.spot_b = std::move(spot_b);
    s.deadline = deadline.value_or(clock_() + cfg_.session_length);
    s.state = DialogueState::Greeting;

    Reply r;
    r.text = "Hello, and welcome! I'm your travel guide today, and I'd love to help you choose where to go. "
             "May I have your name?";
    r.expression_event = cfg_.expressions.greeting;
    r.new_state = DialogueState::AskName;
    push_robot(s, r, DialogueState::Greeting, std::nullopt, {});
    s.state = DialogueState::AskName;
    return {std::move(s), std::move(r)};
}

Reply DialogueEngine::advance(Session& s, std::string_view visitor_text) const {
    if (s.state == DialogueState::Closed) throw SessionClosed("session " + s.id + " is closed");
    TokenizedUtterance tokens = tokenize(visitor_text, segmenter_);

    Turn visitor;
    visitor.speaker = Speaker::Visitor;
    visitor.text = std::string(visitor_text);
    visitor.state_at_emit = s.state;
    visitor.at = clock_();
    if (!s.transcript.empty()) visitor.at = std::max(visitor.at, s.transcript.back().at);
    s.transcript.push_back(std::move(visitor));

    if (s.state != DialogueState::Closing && clock_() >= s.deadline) return wrap_up(s);

    switch (s.state) {
        case DialogueState::Greeting:
        case DialogueState::AskName: return on_name(s, visitor_text);
        case DialogueState::Overview: return on_overview(s);
        case DialogueState::AskTransport: return on_transport(s, tokens);
        case DialogueState::Recommend:
        case DialogueState::QA: return on_question(s, tokens);
        case DialogueState::Closing: return on_final_choice(s, tokens);
        case DialogueState::Closed: break;
    }
    throw SessionClosed("session " + s.id + " is closed");
}

std::optional<Reply> DialogueEngine::tick(Session& s) const {
    if (s.state == DialogueState::Closing || s.state == DialogueState::Closed) return std::nullopt;
    if (clock_() < s.deadline) return std::nullopt;
    return wrap_up(s);
}

Reply DialogueEngine::close(Session& s) const {
    if (s.state == DialogueState::Closed) throw SessionClosed("session " + s.id + " is closed");
    Reply r;
    r.text = "Thank you for talking with me";
    if (s.visitor_name) r.text += ", " + *s.visitor_name;
    r.text += ". Have a wonderful trip. Goodbye!";
    r.expression_event = cfg_.expressions.fallback;
    r.new_state = DialogueState::Closed;
    s.pending_offer.clear();
    push_robot(s, r, DialogueState::Closed, std::nullopt, {});
    s.state = DialogueState::Closed;
    return r;
}

Reply DialogueEngine::on_name(Session& s, std::string_view text) const {
    std::string name = capture_name(text);
    if (name.empty() && s.name_reprompts == 0) {
        ++s.name_reprompts;
        Reply r{"Sorry, I didn't catch that. Could you tell me your name?", cfg_.expressions.fallback,
                DialogueState::AskName, std::nullopt};
        push_robot(s, r, DialogueState::AskName, std::nullopt, {});
        return r;
    }
    if (!name.empty()) s.visitor_name = name;

    const Attraction& first = s.other_spot();
    const Attraction& second = s.recommended_spot();
    Reply r;
    r.text = s.visitor_name ? "Nice to meet you, " + *s.visitor_name + "! " : "Nice to meet you! ";
    r.text += "Let me introduce the two spots you chose. First, " + first.name + ".";
    if (!first.description.empty()) r.text += " " + first.description;
    r.text += " Next, " + second.name + ".";
    if (!second.description.empty()) r.text += " " + second.description;
    r.expression_event = cfg_.expressions.fallback;
    r.new_state = DialogueState::Overview;
    s.told.push_back(told_key(first, "Overview"));
    s.told.push_back(told_key(second, "Overview"));
    push_robot(s, r, DialogueState::Overview, std::nullopt, {});
    s.state = DialogueState::Overview;
    return r;
}

Reply DialogueEngine::on_overview(Session& s) const {
    Reply r{"By the way, how are you planning to get there, by car or by train?", cfg_.expressions.fallback,
            DialogueState::AskTransport, std::nullopt};
    push_robot(s, r, DialogueState::AskTransport, std::nullopt, {});
    s.state = DialogueState::AskTransport;
    return r;
}

Reply DialogueEngine::on_transport(Session& s, const TokenizedUtterance& tokens) const {
    const Transport t = parse_transport(tokens);
    if (t == Transport::Unknown && s.transport_reprompts == 0) {
        ++s.transport_reprompts;
        Reply r{"Sorry, I didn't quite catch that. Will you be traveling by car or by train?",
                cfg_.expressions.fallback, DialogueState::AskTransport, std::nullopt};
        push_robot(s, r, DialogueState::AskTransport, std::nullopt, {});
        return r;
    }
    s.transport = t;
    return recommendation(s);
}

Reply DialogueEngine::recommendation(Session& s) const {
    const Attraction& rec = s.recommended_spot();
    Reply r;
    switch (s.transport) {
        case Transport::Car:
            r.text = "If you are coming by car, I recommend " + rec.name + ".";
            if (rec.parking) {
                r.text += " There is a parking lot, so you can park your car easily.";
                s.told.push_back(told_key(rec, "Parking"));
            } else {
                r.text += " It is easy to get to by car.";
            }
            break;
        case Transport::Train:
            r.text = "If you are coming by train, I recommend " + rec.name + ".";
            if (rec.access.train) {
                r.text += " It can be reached by train";
                r.text += rec.access.nearest_station ? ", and the nearest station is " + *rec.access.nearest_station + "."
                                                     : ".";
                s.told.push_back(told_key(rec, "Access"));
            } else {
                r.text += " It is easy to get to from the city.";
            }
            break;
        case Transport::Unknown:
            r.text = "Then I recommend " + rec.name + ". Of the two, it is the one I can tell you the most about.";
            break;
    }
    r.text += " Feel free to ask me anything about either spot.";
    s.state = DialogueState::Recommend;
    offer_next(s, rec, r.text);
    r.expression_event = cfg_.expressions.recommend;
    r.new_state = DialogueState::QA;
    push_robot(s, r, DialogueState::Recommend, std::nullopt, s.pending_offer);
    s.state = DialogueState::QA;
    return r;
}

bool DialogueEngine::slot_available(const Attraction& spot, std::string_view category) const {
    if (category == "PriceRemark") return spot.price_yen.has_value();
    if (category == "TimeRemark") return !spot.open_hours.empty();
    if (category == "Restaurants") return places_ != nullptr;
    if (category == "Access") return spot.access.train || spot.access.car;
    if (category == "Parking") return spot.parking;
    if (category == "Overview") return !spot.description.empty();
    return false;
}

void DialogueEngine::offer_next(Session& s, const Attraction& spot, std::string& text) const {
    for (std::string_view cat : kOfferOrder) {
        if (!slot_available(spot, cat)) continue;
        const std::string key = told_key(spot, cat);
        if (std::find(s.told.begin(), s.told.end(), key) != s.told.end()) continue;
        text += " " + offer_for(cat);
        s.pending_offer = std::string(cat);
        s.pending_offer_spot = spot.id;
        return;
    }
    s.pending_offer.clear();
    s.pending_offer_spot.clear();
    text += " What else would you like to know?";
}

std::string DialogueEngine::answer(const Attraction& spot, const std::string& category) const {
    std::vector<Restaurant> restaurants;
    if (category == "Restaurants" && places_ != nullptr) {
        try {
            restaurants = nearby_restaurants(*places_, spot, cfg_.restaurant_radius_m);
        } catch (const Error& e) {
            spdlog::warn("restaurant lookup for {} failed: {}", spot.id, e.what());
        }
        if (restaurants.size() > cfg_.restaurant_cap) restaurants.resize(cfg_.restaurant_cap);
    }
    return answer_for(spot, category, restaurants);
}

std::vector<const Attraction*> DialogueEngine::named_spots(const Session& s, const TokenizedUtterance& tokens) const {
    const auto a_name = tokenize(s.spot_a.name, segmenter_).tokens;
    const auto b_name = tokenize(s.spot_b.name, segmenter_).tokens;
    const std::set<std::string> utter(tokens.tokens.begin(), tokens.tokens.end());

    auto mentions = [&](const std::vector<std::string>& own, const std::vector<std::string>& other) {
        if (contains_sequence(tokens.tokens, own)) return true;
        for (const auto& t : own) {
            if (t.size() < 3 || generic_name_words().contains(t)) continue;
            if (std::find(other.begin(), other.end(), t) != other.end()) continue;
            if (utter.contains(t)) return true;
        }
        return false;
    };
    std::vector<const Attraction*> out;
    if (mentions(a_name, b_name)) out.push_back(&s.spot_a);
    if (mentions(b_name, a_name)) out.push_back(&s.spot_b);
    return out;
}

Reply DialogueEngine::on_question(Session& s, const TokenizedUtterance& tokens) const {
    s.state = DialogueState::QA;
    const Classification cls = classify(embed(store_, tokens), registry_, cfg_.classifier);

    Reply r;
    r.new_state = DialogueState::QA;
    const bool affirmation = is_bare_affirmation(tokens);
    if (affirmation && !s.pending_offer.empty()) {
        const std::string category = s.pending_offer;
        const Attraction* spot = s.spot(s.pending_offer_spot);
        if (spot == nullptr) spot = &s.recommended_spot();
        r.text = answer(*spot, category);
        s.told.push_back(told_key(*spot, category));
        r.expression_event = cfg_.expressions.answer;
        r.debug = ReplyDebug{category, cls.score, cls.method, "affirmation"};
        offer_next(s, *spot, r.text);
    } else if (affirmation) {
        r.text = "I'm sorry, I'm not sure what you'd like me to go ahead with. "
                 "Would you like to hear about the entrance fee, the opening hours, or how to get there?";
        r.expression_event = cfg_.expressions.clarify;
        s.pending_offer.clear();
        s.pending_offer_spot.clear();
    } else if (is_bare_negation(tokens) && !s.pending_offer.empty()) {
        r.text = "All right. What else would you like to know?";
        r.expression_event = cfg_.expressions.fallback;
        s.pending_offer.clear();
        s.pending_offer_spot.clear();
    } else if (cls.matched) {
        auto spots = named_spots(s, tokens);
        if (spots.empty()) spots.push_back(&s.recommended_spot());
        try {
            for (const Attraction* spot : spots) {
                if (!r.text.empty()) r.text += " ";
                r.text += answer(*spot, cls.category);
                s.told.push_back(told_key(*spot, cls.category));
            }
            r.expression_event = cfg_.expressions.answer;
            offer_next(s, *spots.back(), r.text);
        } catch (const TemplateError&) {
            r.text = "I'm sorry, I don't have that kind of information.";
            r.expression_event = cfg_.expressions.clarify;
            s.pending_offer.clear();
            s.pending_offer_spot.clear();
        }
        r.debug = ReplyDebug{cls.category, cls.score, cls.method, "classifier"};
    } else {
        r.text = "I'm sorry, I didn't quite understand. You can ask me about the entrance fee, the opening hours, "
                 "parking, access, or restaurants nearby.";
        r.expression_event = cfg_.expressions.clarify;
        s.pending_offer.clear();
        s.pending_offer_spot.clear();
    }

    ++s.qa_turn_count;
    if (s.visitor_name && s.qa_turn_count % cfg_.name_period == 0) r.text = *s.visitor_name + ", " + r.text;
    push_robot(s, r, DialogueState::QA, cls, s.pending_offer);
    return r;
}

Reply DialogueEngine::wrap_up(Session& s) const {
    const Attraction& first = s.other_spot();
    const Attraction& rec = s.recommended_spot();
    Reply r;
    r.text = "We are almost out of time";
    if (s.visitor_name) r.text += ", " + *s.visitor_name;
    r.text += ". Which would you like to visit, " + first.name + " or " + rec.name + "? I think " + rec.name +
              " would be a wonderful choice.";
    r.expression_event = cfg_.expressions.fallback;
    r.new_state = DialogueState::Closing;
    s.pending_offer.clear();
    s.pending_offer_spot.clear();
    push_robot(s, r, DialogueState::Closing, std::nullopt, {});
    s.state = DialogueState::Closing;
    return r;
}

Reply DialogueEngine::on_final_choice(Session& s, const TokenizedUtterance& tokens) const {
    const auto spots = named_spots(s, tokens);
    Reply r;
    if (spots.size() == 1) {
        r.text = "Wonderful, I hope you enjoy " + spots.front()->name + "! ";
    }
    r.text += "Thank you for talking with me";
    if (s.visitor_name) r.text += ", " + *s.visitor_name;
    r.text += ". Goodbye!";
    r.expression_event = cfg_.expressions.fallback;
    r.new_state = DialogueState::Closed;
    push_robot(s, r, DialogueState::Closed, std::nullopt, {});
    s.state = DialogueState::Closed;
    return r;
}

// --- questionnaire ----------------------------------------------------------

namespace {

constexpr std::array<QuestionnaireItem, 9> kQuestionnaireItems = {{
    {"choice_satisfaction", "Choice satisfaction"},
    {"information_sufficiency", "Sufficiency of information"},
    {"dialogue_naturalness", "Naturalness of dialogue"},
    {"response_adequacy", "Adequacy of response"},
    {"response_likability", "Likability of response"},
    {"dialogue_satisfaction", "Dialogue satisfaction"},
    {"robot_reliability", "Robot reliability"},
    {"referentiality", "Referentiality"},
    {"return_desire", "Degree of desire to return"},
}};

}  // namespace

std::span<const QuestionnaireItem> questionnaire_items() { return kQuestionnaireItems; }

QuestionnaireRecord record_questionnaire(const Session& session, const QuestionnaireAnswers& answers,
                                         SessionLog& log, TimePoint now) {
    if (session.state != DialogueState::Closing && session.state != DialogueState::Closed) {
        throw ValidationError("questionnaire is only accepted once the dialogue is closing");
    }
    if (session.spot(answers.chosen_spot) == nullptr) {
        throw ValidationError("chosen spot '" + answers.chosen_spot + "' is not one of " + session.spot_a.id + ", " +
                              session.spot_b.id);
    }
    QuestionnaireRecord rec;
    for (const auto& item : kQuestionnaireItems) {
        auto it = answers.ratings.find(std::string(item.id));
        if (it == answers.ratings.end()) throw ValidationError("missing rating for " + std::string(item.id));
        if (it->second < 1 || it->second > 5) {
            throw ValidationError("rating for " + std::string(item.id) + " must be 1-5, got " +
                                  std::to_string(it->second));
        }
        rec.ratings.emplace(it->first, it->second);
        rec.impression_total += it->second;
    }
    for (const auto& [id, value] : answers.ratings) {
        if (!rec.ratings.contains(id)) throw ValidationError("unknown questionnaire item " + id);
    }
    rec.session_id = session.id;
    rec.chosen_spot = answers.chosen_spot;
    rec.recommended = session.recommended;
    rec.chose_recommended = answers.chosen_spot == session.recommended;
    rec.at = now;
    log.append_questionnaire(rec);
    return rec;
}

}  // namespace tourdesk
