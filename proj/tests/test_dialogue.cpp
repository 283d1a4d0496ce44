#include <doctest.h>

#include <random>

#include "support.hpp"
#include "tourdesk/dialogue.hpp"
#include "tourdesk/error.hpp"
#include "tourdesk/places.hpp"
#include "tourdesk/session_log.hpp"

using namespace tourdesk;

namespace {

struct World {
    EmbeddingStore store = EmbeddingStore::load(tdtest::data_dir() / "demo_vectors.txt");
    CategoryRegistry registry = CategoryRegistry::load(tdtest::data_dir() / "categories.json", store);
    AttractionDataset attractions = AttractionDataset::load(tdtest::data_dir() / "attractions.json");
    FixturePlacesProvider places{tdtest::data_dir() / "restaurants.json"};
    TimePoint now = TimePoint(std::chrono::seconds(1'700'000'000));
    DialogueEngine engine{store, registry, &places, DialogueConfig{}, default_segmenter(), [this] { return now; }};

    std::pair<Session, Reply> start(const std::string& a, const std::string& b,
                                    std::optional<std::string> prefer = std::nullopt) {
        return engine.new_session("s1", attractions.at(a), attractions.at(b), RecommendationPolicy{prefer});
    }

    // Greeting, name, overview, transport; leaves the session in QA.
    Session to_qa(const std::string& a, const std::string& b, const std::string& transport = "by car",
                  std::optional<std::string> prefer = std::nullopt) {
        auto [s, r] = start(a, b, prefer);
        engine.advance(s, "My name is Sato");
        engine.advance(s, "That sounds lovely");
        engine.advance(s, transport);
        REQUIRE(s.state == DialogueState::QA);
        return s;
    }
};

bool starts_with(const std::string& s, std::string_view p) { return s.rfind(p, 0) == 0; }

}  // namespace

TEST_CASE("greeting") {
    World w;
    auto [s, r] = w.start("hilltop_castle", "bayside_aquarium", "bayside_aquarium");
    CHECK(s.recommended == "bayside_aquarium");
    CHECK(r.text.find("name") != std::string::npos);
    CHECK(r.expression_event == "smile");
    CHECK(r.new_state == DialogueState::AskName);
    CHECK(s.state == DialogueState::AskName);
    CHECK(s.deadline == w.now + std::chrono::seconds(300));
    CHECK_THROWS_AS(w.start("hilltop_castle", "hilltop_castle"), ValidationError);
    CHECK_THROWS_AS(w.start("hilltop_castle", "bayside_aquarium", "plum_garden"), ValidationError);
}

TEST_CASE("default policy prefers the spot with more data, ties to the second") {
    World w;
    CHECK(w.start("hilltop_castle", "bayside_aquarium").first.recommended == "bayside_aquarium");
    CHECK(w.start("bayside_aquarium", "hilltop_castle").first.recommended == "bayside_aquarium");
    Attraction a = w.attractions.at("hilltop_castle"), b = a;
    b.id = "copy";
    CHECK(RecommendationPolicy{}.choose(a, b) == "copy");
}

TEST_CASE("name capture") {
    CHECK(capture_name("My name is Sato") == "Sato");
    CHECK(capture_name("I'm Taro Yamada, nice to meet you.") == "Taro Yamada");
    CHECK(capture_name("sato") == "Sato");
    CHECK(capture_name("Call me Yuki please!") == "Yuki");
    CHECK(capture_name("hello").empty());
    CHECK(capture_name("").empty());
}

TEST_CASE("empty name gets one reprompt") {
    World w;
    auto [s, r] = w.start("hilltop_castle", "bayside_aquarium");
    auto again = w.engine.advance(s, "hello");
    CHECK(again.new_state == DialogueState::AskName);
    auto next = w.engine.advance(s, "um");
    CHECK(next.new_state == DialogueState::Overview);
    CHECK_FALSE(s.visitor_name.has_value());
}

TEST_CASE("overview puts the recommended spot second") {
    World w;
    for (const auto& [a, b] : {std::pair{"hilltop_castle", "bayside_aquarium"}, std::pair{"bayside_aquarium", "hilltop_castle"}}) {
        for (const std::string prefer : {a, b}) {
            auto [s, r] = w.start(a, b, prefer);
            auto ov = w.engine.advance(s, "I am Sato");
            CHECK(ov.new_state == DialogueState::Overview);
            const auto rec = ov.text.find(s.recommended_spot().name);
            const auto other = ov.text.find(s.other_spot().name);
            REQUIRE(rec != std::string::npos);
            REQUIRE(other != std::string::npos);
            CHECK(other < rec);
        }
    }
}

TEST_CASE("overview ordering holds for every pair and policy") {
    World w;
    const auto& recs = w.attractions.records();
    for (const auto& a : recs)
        for (const auto& b : recs) {
            if (a.id == b.id) continue;
            for (const auto& prefer : {std::optional<std::string>{}, std::optional<std::string>{a.id}}) {
                auto [s, r] = w.engine.new_session("p", a, b, RecommendationPolicy{prefer});
                auto ov = w.engine.advance(s, "Kenji");
                CHECK(ov.text.find(s.other_spot().name) < ov.text.find(s.recommended_spot().name));
            }
        }
}

TEST_CASE("transport justifications") {
    World w;
    {
        auto [s, r] = w.start("hilltop_castle", "bayside_aquarium");
        w.engine.advance(s, "Sato");
        auto ask = w.engine.advance(s, "ok");
        CHECK(ask.new_state == DialogueState::AskTransport);
        CHECK(ask.text.find("car") != std::string::npos);
        CHECK(ask.text.find("train") != std::string::npos);
        auto rec = w.engine.advance(s, "by car");
        CHECK(s.transport == Transport::Car);
        CHECK(rec.text.find("Bayside Aquarium") != std::string::npos);
        CHECK(rec.text.find("park") != std::string::npos);
        CHECK(rec.expression_event == "smile");
        CHECK(rec.new_state == DialogueState::QA);
    }
    {
        auto [s, r] = w.start("hilltop_castle", "bayside_aquarium");
        w.engine.advance(s, "Sato");
        w.engine.advance(s, "ok");
        auto rec = w.engine.advance(s, "We will take the train");
        CHECK(s.transport == Transport::Train);
        CHECK(rec.text.find("train") != std::string::npos);
        CHECK(rec.text.find("Osakako Station") != std::string::npos);
    }
    {
        auto [s, r] = w.start("hilltop_castle", "bayside_aquarium");
        w.engine.advance(s, "Sato");
        w.engine.advance(s, "ok");
        auto again = w.engine.advance(s, "walking I think");
        CHECK(again.new_state == DialogueState::AskTransport);
        auto rec = w.engine.advance(s, "not sure");
        CHECK(s.transport == Transport::Unknown);
        CHECK(rec.new_state == DialogueState::QA);
        CHECK(rec.text.find("Bayside Aquarium") != std::string::npos);
    }
}

TEST_CASE("transport keywords") {
    CHECK(parse_transport(tokenize("By car")) == Transport::Car);
    CHECK(parse_transport(tokenize("I'll drive")) == Transport::Car);
    CHECK(parse_transport(tokenize("JR line")) == Transport::Train);
    CHECK(parse_transport(tokenize("car or train, not sure")) == Transport::Unknown);
    CHECK(parse_transport(tokenize("bicycle")) == Transport::Unknown);
}

TEST_CASE("qa answers the classified category about the recommended spot") {
    World w;
    Session s = w.to_qa("hilltop_castle", "bayside_aquarium");
    auto r = w.engine.advance(s, "How much is the entrance fee?");
    REQUIRE(r.debug.has_value());
    CHECK(r.debug->category == "PriceRemark");
    CHECK(r.debug->method == SimilarityMethod::Wrd);
    CHECK(r.debug->score == doctest::Approx(1.0));
    CHECK(r.text.find("2400") != std::string::npos);
    CHECK(r.expression_event == "faint_smile");
}

TEST_CASE("qa answers about a named spot") {
    World w;
    Session s = w.to_qa("hilltop_castle", "bayside_aquarium");
    auto r = w.engine.advance(s, "How much is the entrance fee for Hilltop Castle?");
    CHECK(r.debug->category == "PriceRemark");
    CHECK(r.text.find("600") != std::string::npos);
    CHECK(r.text.find("2400") == std::string::npos);
}

TEST_CASE("restaurant answers list at most two") {
    World w;
    Session s = w.to_qa("hilltop_castle", "bayside_aquarium");
    auto r = w.engine.advance(s, "Are there any restaurants nearby?");
    CHECK(r.text.find("Kaiyu Sushi") != std::string::npos);
    CHECK(r.text.find("Harbor Ramen") != std::string::npos);
    CHECK(r.text.find("Tempozan Curry") == std::string::npos);
    CHECK(r.text.find("Kaiyu Sushi") < r.text.find("Harbor Ramen"));
}

TEST_CASE("no match asks for clarification") {
    World w;
    Session s = w.to_qa("hilltop_castle", "bayside_aquarium");
    auto r = w.engine.advance(s, "qqq zzz");
    CHECK(r.expression_event == "surprise");
    CHECK_FALSE(r.debug.has_value());
    CHECK(s.transcript.back().classified.has_value());
}

TEST_CASE("affirmation after an offer answers the offered category") {
    World w;
    Session s = w.to_qa("hilltop_castle", "bayside_aquarium");
    CHECK(s.transcript.back().text.find("Shall I tell you the entrance fee?") != std::string::npos);
    auto r = w.engine.advance(s, "it's okay");
    REQUIRE(r.debug.has_value());
    CHECK(r.debug->category == "PriceRemark");
    CHECK(r.debug->resolved_by == "affirmation");
    CHECK(r.text.find("2400") != std::string::npos);
}

TEST_CASE("affirmation without an offer asks what was meant") {
    World w;
    Session s = w.to_qa("hilltop_castle", "bayside_aquarium");
    w.engine.advance(s, "qqq zzz");  // clarification, no offer pending
    auto r = w.engine.advance(s, "it's okay");
    CHECK_FALSE(r.debug.has_value());
    CHECK(r.text.find('?') != std::string::npos);
    CHECK(r.expression_event == "surprise");
}

TEST_CASE("bare negation declines the offer") {
    World w;
    Session s = w.to_qa("hilltop_castle", "bayside_aquarium");
    auto r = w.engine.advance(s, "no thanks");
    CHECK(s.pending_offer.empty());
    CHECK(r.text.find("else") != std::string::npos);
}

TEST_CASE("the visitor's name prefixes every third qa reply") {
    World w;
    Session s = w.to_qa("hilltop_castle", "bayside_aquarium");
    const char* questions[] = {"How much is the entrance fee?", "What are the hours of operation?",
                               "Can I park my car there?",      "Are there any restaurants nearby?",
                               "qqq zzz",                       "How do I get there?",
                               "Tell me more about this place.", "What is it like?", "it's okay"};
    int k = 0;
    for (const char* q : questions) {
        ++k;
        auto r = w.engine.advance(s, q);
        CHECK_MESSAGE(starts_with(r.text, "Sato, ") == (k % 3 == 0), k, ": ", r.text);
    }
}

TEST_CASE("no name, no prefix") {
    World w;
    auto [s, r] = w.start("hilltop_castle", "bayside_aquarium");
    w.engine.advance(s, "hello");
    w.engine.advance(s, "hi");
    w.engine.advance(s, "ok");
    w.engine.advance(s, "by train");
    for (int k = 0; k < 6; ++k) CHECK(w.engine.advance(s, "What are the hours of operation?").text.find(", ") != 0);
}

TEST_CASE("transcript grows by two per advance") {
    World w;
    auto [s, r] = w.start("hilltop_castle", "bayside_aquarium");
    CHECK(s.transcript.size() == 1);  // greeting
    for (const char* u : {"Sato", "ok", "by car", "How much is the entrance fee?", "qqq"}) {
        const auto before = s.transcript.size();
        w.engine.advance(s, u);
        CHECK(s.transcript.size() == before + 2);
        CHECK(s.transcript[before].speaker == Speaker::Visitor);
        CHECK(s.transcript[before + 1].speaker == Speaker::Robot);
    }
}

TEST_CASE("deadline wraps up, then closes") {
    World w;
    Session s = w.to_qa("hilltop_castle", "bayside_aquarium");
    w.now += std::chrono::seconds(301);
    auto wrap = w.engine.advance(s, "What are the hours of operation?");
    CHECK(wrap.new_state == DialogueState::Closing);
    CHECK(s.state == DialogueState::Closing);
    CHECK(wrap.text.find("Bayside Aquarium") != std::string::npos);
    auto bye = w.engine.advance(s, "Bayside Aquarium");
    CHECK(bye.new_state == DialogueState::Closed);
    CHECK(bye.text.find("enjoy Bayside Aquarium") != std::string::npos);
    CHECK_THROWS_AS(w.engine.advance(s, "hello?"), SessionClosed);
    CHECK_THROWS_AS(w.engine.close(s), SessionClosed);
}

TEST_CASE("tick fires the wrap-up without input") {
    World w;
    auto [s, r] = w.start("hilltop_castle", "bayside_aquarium");
    CHECK_FALSE(w.engine.tick(s).has_value());
    w.now += std::chrono::seconds(300);
    auto wrap = w.engine.tick(s);
    REQUIRE(wrap.has_value());
    CHECK(s.state == DialogueState::Closing);
    CHECK_FALSE(w.engine.tick(s).has_value());
}

TEST_CASE("operator close") {
    World w;
    auto [s, r] = w.start("hilltop_castle", "bayside_aquarium");
    auto bye = w.engine.close(s);
    CHECK(bye.new_state == DialogueState::Closed);
    CHECK(s.state == DialogueState::Closed);
}

TEST_CASE("state machine never leaves the flow order") {
    World w;
    const std::vector<std::string> pool = {
        "Sato", "hello", "", "ok", "it's okay", "by car", "by train", "walking", "no", "qqq",
        "How much is the entrance fee?", "What are the hours of operation?", "Can I park my car there?",
        "Are there any restaurants nearby?", "Hilltop Castle", "Bayside Aquarium", "yes please", "\xE5\xA4\xA7\xE4\xB8\x88\xE5\xA4\xAB",
    };
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    std::uniform_int_distribution<int> jump(0, 9), op(0, 40);
    for (int trial = 0; trial < 300; ++trial) {
        w.now = TimePoint(std::chrono::seconds(1'700'000'000));
        auto [s, r] = w.engine.new_session("p" + std::to_string(trial), w.attractions.at("hilltop_castle"),
                                           w.attractions.at("bayside_aquarium"), RecommendationPolicy{});
        bool closing_seen = false;
        for (int step = 0; step < 40 && s.state != DialogueState::Closed; ++step) {
            const DialogueState before = s.state;
            const auto size_before = s.transcript.size();
            if (jump(rng) == 0) w.now += std::chrono::seconds(45);
            const int o = op(rng);
            if (o == 0) {
                w.engine.close(s);
            } else if (o == 1) {
                w.engine.tick(s);
            } else {
                w.engine.advance(s, pool[pick(rng)]);
                CHECK(s.transcript.size() == size_before + 2);
            }
            // Walk every state a robot turn was emitted in, so the pass
            // through Recommend inside one advance is checked too.
            DialogueState prev = before;
            for (std::size_t k = size_before; k < s.transcript.size(); ++k) {
                if (s.transcript[k].speaker != Speaker::Robot) continue;
                CHECK_MESSAGE(is_allowed_transition(prev, s.transcript[k].state_at_emit), to_string(prev), " -> ",
                              to_string(s.transcript[k].state_at_emit));
                prev = s.transcript[k].state_at_emit;
            }
            CHECK_MESSAGE(is_allowed_transition(prev, s.state), to_string(prev), " -> ", to_string(s.state));
            if (closing_seen) CHECK((s.state == DialogueState::Closing || s.state == DialogueState::Closed));
            closing_seen = closing_seen || s.state == DialogueState::Closing;
        }
        for (std::size_t k = 1; k < s.transcript.size(); ++k) CHECK(s.transcript[k].at >= s.transcript[k - 1].at);
        for (const auto& t : s.transcript) {
            if (t.speaker == Speaker::Robot && t.state_at_emit == DialogueState::QA) CHECK(t.classified.has_value());
            CHECK((t.speaker == Speaker::Visitor || !t.text.empty()));
        }
    }
}

TEST_CASE("transition table") {
    CHECK(is_allowed_transition(DialogueState::Greeting, DialogueState::AskName));
    CHECK(is_allowed_transition(DialogueState::QA, DialogueState::QA));
    CHECK(is_allowed_transition(DialogueState::AskName, DialogueState::Closing));
    CHECK_FALSE(is_allowed_transition(DialogueState::AskName, DialogueState::QA));
    CHECK_FALSE(is_allowed_transition(DialogueState::QA, DialogueState::AskName));
    CHECK_FALSE(is_allowed_transition(DialogueState::Closing, DialogueState::QA));
    CHECK_FALSE(is_allowed_transition(DialogueState::Closed, DialogueState::Closing));
    for (auto name : {"Greeting", "AskName", "Overview", "AskTransport", "Recommend", "QA", "Closing", "Closed"}) {
        CHECK(to_string(*parse_state(name)) == name);
    }
}

TEST_CASE("questionnaire") {
    World w;
    tdtest::TempDir dir;
    SessionLog log(dir.path(), false);
    Session s = w.to_qa("hilltop_castle", "bayside_aquarium");
    log.append_session(s);

    QuestionnaireAnswers all5;
    for (const auto& item : questionnaire_items()) all5.ratings[std::string(item.id)] = 5;
    all5.chosen_spot = "bayside_aquarium";
    CHECK_THROWS_AS(record_questionnaire(s, all5, log, w.now), ValidationError);  // still in QA

    w.engine.close(s);
    CHECK(questionnaire_items().size() == 9);
    auto rec = record_questionnaire(s, all5, log, w.now);
    CHECK(rec.chose_recommended);
    CHECK(rec.impression_total == 45);

    QuestionnaireAnswers other = all5;
    other.chosen_spot = "hilltop_castle";
    CHECK_FALSE(record_questionnaire(s, other, log, w.now).chose_recommended);

    QuestionnaireAnswers six = all5;
    six.ratings["robot_reliability"] = 6;
    CHECK_THROWS_AS(record_questionnaire(s, six, log, w.now), ValidationError);
    QuestionnaireAnswers missing = all5;
    missing.ratings.erase("referentiality");
    CHECK_THROWS_AS(record_questionnaire(s, missing, log, w.now), ValidationError);
    QuestionnaireAnswers stranger = all5;
    stranger.chosen_spot = "plum_garden";
    CHECK_THROWS_AS(record_questionnaire(s, stranger, log, w.now), ValidationError);

    int stored = 0;
    for (const auto& j : SessionLog::read_records(log.path_for(s.id))) stored += j["type"] == "questionnaire";
    CHECK(stored == 2);
}
