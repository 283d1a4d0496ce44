#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tourdesk/embeddings.hpp"
#include "tourdesk/similarity.hpp"

namespace tourdesk {

struct IntentCategory {
    std::string id;
    std::string answer_slot;  // Attraction field the answer template reads
    std::string source;       // "paper" or "invented"
    std::vector<TokenizedUtterance> exemplars;
    std::vector<EmbeddedUtterance> embedded;  // parallel to exemplars
};

class CategoryRegistry {
public:
    // JSON list of {id, answer_slot, exemplars: [..], source}. Every exemplar
    // must keep at least one in-vocabulary token.
    static CategoryRegistry load(const std::filesystem::path& path, const EmbeddingStore& store,
                                 const Segmenter& segmenter = default_segmenter());
    static CategoryRegistry parse(std::string_view json_text, const EmbeddingStore& store,
                                  const Segmenter& segmenter = default_segmenter());

    const std::vector<IntentCategory>& categories() const noexcept { return categories_; }
    const IntentCategory* find(std::string_view id) const;
    std::size_t size() const noexcept { return categories_.size(); }

private:
    std::vector<IntentCategory> categories_;
};

struct ClassifierConfig {
    double wrd_fallback_threshold = 0.55;
    double wrd_accept_threshold = 0.55;
    double cosine_accept_threshold = 0.80;

    double accept_threshold(SimilarityMethod method) const {
        return method == SimilarityMethod::Wrd ? wrd_accept_threshold : cosine_accept_threshold;
    }
};

struct Classification {
    bool matched = false;
    std::string category;  // empty on NoMatch
    double score = 0.0;    // on NoMatch: best score seen, if any
    SimilarityMethod method = SimilarityMethod::Wrd;
    bool has_score = false;

    static Classification no_match(std::optional<SimilarityResult> best = std::nullopt);
};

// Per-category score is the max two-stage similarity over its exemplars;
// the first category with the highest score wins and is accepted when the
// score clears the acceptance threshold of the method that produced it.
Classification classify(std::string_view utterance, const CategoryRegistry& registry, const EmbeddingStore& store,
                        const ClassifierConfig& cfg, const Segmenter& segmenter = default_segmenter());

Classification classify(const EmbeddedUtterance& utterance, const CategoryRegistry& registry,
                        const ClassifierConfig& cfg);

}  // namespace tourdesk
