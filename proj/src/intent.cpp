#include "tourdesk/intent.hpp"

#include <fstream>
#include <json.hpp>
#include <sstream>
#include <unordered_set>

#include "tourdesk/error.hpp"

namespace tourdesk {

using nlohmann::json;

Classification Classification::no_match(std::optional<SimilarityResult> best) {
    Classification c;
    if (best) {
        c.score = best->score;
        c.method = best->method;
        c.has_score = true;
    }
    return c;
}

CategoryRegistry CategoryRegistry::parse(std::string_view json_text, const EmbeddingStore& store,
                                         const Segmenter& segmenter) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw LoadError(std::string("category file is not valid JSON: ") + e.what());
    }
    if (!doc.is_array()) throw LoadError("category file must be a JSON list");

    CategoryRegistry registry;
    std::unordered_set<std::string> ids;
    for (std::size_t k = 0; k < doc.size(); ++k) {
        const json& entry = doc[k];
        if (!entry.is_object() || !entry.contains("id") || !entry["id"].is_string()) {
            throw LoadError("category #" + std::to_string(k) + ": missing string field 'id'");
        }
        IntentCategory cat;
        cat.id = entry["id"].get<std::string>();
        const std::string where = "category " + cat.id + ": ";
        if (!ids.insert(cat.id).second) throw LoadError(where + "duplicate id");
        cat.answer_slot = entry.value("answer_slot", std::string{});
        cat.source = entry.value("source", std::string{"invented"});
        if (cat.source != "paper" && cat.source != "invented") {
            throw LoadError(where + "source must be 'paper' or 'invented'");
        }
        if (!entry.contains("exemplars") || !entry["exemplars"].is_array() || entry["exemplars"].empty()) {
            throw LoadError(where + "exemplar list is empty");
        }
        for (const auto& ex : entry["exemplars"]) {
            if (!ex.is_string()) throw LoadError(where + "exemplars must be strings");
            TokenizedUtterance tokens = tokenize(ex.get<std::string>(), segmenter);
            EmbeddedUtterance embedded = embed(store, tokens);
            if (embedded.empty()) {
                throw LoadError(where + "exemplar unusable, no in-vocabulary tokens: \"" + tokens.raw + "\"");
            }
            cat.exemplars.push_back(std::move(tokens));
            cat.embedded.push_back(std::move(embedded));
        }
        registry.categories_.push_back(std::move(cat));
    }
    return registry;
}

CategoryRegistry CategoryRegistry::load(const std::filesystem::path& path, const EmbeddingStore& store,
                                        const Segmenter& segmenter) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open category file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse(buf.str(), store, segmenter);
}

const IntentCategory* CategoryRegistry::find(std::string_view id) const {
    for (const auto& c : categories_) {
        if (c.id == id) return &c;
    }
    return nullptr;
}

Classification classify(const EmbeddedUtterance& utterance, const CategoryRegistry& registry,
                        const ClassifierConfig& cfg) {
    if (utterance.empty()) return Classification::no_match();

    const SimilarityConfig sim_cfg{cfg.wrd_fallback_threshold};
    std::optional<SimilarityResult> best;
    const IntentCategory* winner = nullptr;
    for (const auto& cat : registry.categories()) {
        std::optional<SimilarityResult> cat_best;
        for (const auto& exemplar : cat.embedded) {
            SimilarityResult r;
            try {
                r = two_stage_similarity(utterance, exemplar, sim_cfg);
            } catch (const DegenerateMean&) {
                continue;
            }
            if (!cat_best || r.score > cat_best->score) cat_best = r;
        }
        if (cat_best && (!best || cat_best->score > best->score)) {
            best = cat_best;
            winner = &cat;
        }
    }
    if (!best || best->score < cfg.accept_threshold(best->method)) return Classification::no_match(best);

    Classification c;
    c.matched = true;
    c.category = winner->id;
    c.score = best->score;
    c.method = best->method;
    c.has_score = true;
    return c;
}

Classification classify(std::string_view utterance, const CategoryRegistry& registry, const EmbeddingStore& store,
                        const ClassifierConfig& cfg, const Segmenter& segmenter) {
    return classify(embed(store, tokenize(utterance, segmenter)), registry, cfg);
}

}  // namespace tourdesk
