#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "tourdesk/embeddings.hpp"
#include "tourdesk/transport.hpp"

namespace tourdesk {

enum class SimilarityMethod { Wrd, CosineMean };

std::string_view to_string(SimilarityMethod method);

struct SimilarityResult {
    double score = 0.0;               // in [-1, 1]
    SimilarityMethod method = SimilarityMethod::Wrd;
    double distance = 0.0;            // WRD distance in [0, 2]; 0 for COSINE_MEAN
};

struct SimilarityConfig {
    double wrd_fallback_threshold = 0.55;
};

// Cosine of two nonzero vectors of equal length, clamped to [-1, 1].
double cosine(std::span<const double> x, std::span<const double> y);

// Word mass proportional to vector norm. Duplicate words keep separate atoms.
MassDistribution norm_masses(const std::vector<Vector>& vectors);

// c_ij = 1 - cos(x_i, y_j), in [0, 2].
Matrix cost_matrix(const std::vector<Vector>& xs, const std::vector<Vector>& ys);

// Word Rotator's Distance as an exact transport problem; score = 1 - distance.
// Throws EmptyUtterance when either side has no in-vocabulary token.
SimilarityResult wrd_similarity(const EmbeddedUtterance& a, const EmbeddedUtterance& b);

// Cosine of the unweighted mean word vectors. Throws DegenerateMean when a
// mean vector is zero.
SimilarityResult cosine_mean_similarity(const EmbeddedUtterance& a, const EmbeddedUtterance& b);

// WRD first; if its score does not exceed the fallback threshold, the
// mean-vector cosine is returned instead.
SimilarityResult two_stage_similarity(const EmbeddedUtterance& a, const EmbeddedUtterance& b,
                                      const SimilarityConfig& cfg);

}  // namespace tourdesk
