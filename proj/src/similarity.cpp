#include "tourdesk/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tourdesk/error.hpp"

namespace tourdesk {

std::string_view to_string(SimilarityMethod method) {
    return method == SimilarityMethod::Wrd ? "WRD" : "COSINE_MEAN";
}

double cosine(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) {
        throw InvalidInput("dimension mismatch: " + std::to_string(x.size()) + " vs " + std::to_string(y.size()));
    }
    double dot = 0.0;
    double xx = 0.0;
    double yy = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        dot += x[k] * y[k];
        xx += x[k] * x[k];
        yy += y[k] * y[k];
    }
    if (xx == 0.0 || yy == 0.0) throw InvalidInput("cosine of a zero vector");
    // sqrt(xx * yy) rather than sqrt(xx) * sqrt(yy): identical vectors then
    // give exactly 1.
    return std::clamp(dot / std::sqrt(xx * yy), -1.0, 1.0);
}

MassDistribution norm_masses(const std::vector<Vector>& vectors) {
    if (vectors.empty()) throw InvalidInput("cannot build masses for an empty sentence");
    std::vector<double> masses;
    masses.reserve(vectors.size());
    double total = 0.0;
    for (const auto& v : vectors) {
        const double n = norm(v);
        if (n == 0.0) throw InvalidInput("zero-norm word vector has no mass");
        masses.push_back(n);
        total += n;
    }
    for (double& m : masses) m /= total;
    return MassDistribution(std::move(masses));
}

Matrix cost_matrix(const std::vector<Vector>& xs, const std::vector<Vector>& ys) {
    Matrix cost(xs.size(), ys.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        for (std::size_t j = 0; j < ys.size(); ++j) cost(i, j) = 1.0 - cosine(xs[i], ys[j]);
    }
    return cost;
}

SimilarityResult wrd_similarity(const EmbeddedUtterance& a, const EmbeddedUtterance& b) {
    if (a.empty() || b.empty()) throw EmptyUtterance("utterance has no in-vocabulary tokens");
    const TransportPlan plan = solve_ot(norm_masses(a.vectors), norm_masses(b.vectors), cost_matrix(a.vectors, b.vectors));
    const double distance = std::clamp(plan.value, 0.0, 2.0);
    return {1.0 - distance, SimilarityMethod::Wrd, distance};
}

namespace {

Vector mean_vector(const EmbeddedUtterance& u) {
    Vector mean(u.vectors.front().size(), 0.0);
    for (const auto& v : u.vectors) {
        if (v.size() != mean.size()) throw InvalidInput("dimension mismatch inside utterance");
        for (std::size_t k = 0; k < v.size(); ++k) mean[k] += v[k];
    }
    for (double& x : mean) x /= static_cast<double>(u.vectors.size());
    return mean;
}

}  // namespace

SimilarityResult cosine_mean_similarity(const EmbeddedUtterance& a, const EmbeddedUtterance& b) {
    if (a.empty() || b.empty()) throw EmptyUtterance("utterance has no in-vocabulary tokens");
    const Vector ma = mean_vector(a);
    const Vector mb = mean_vector(b);
    if (norm(ma) == 0.0 || norm(mb) == 0.0) throw DegenerateMean("mean word vector is zero");
    return {cosine(ma, mb), SimilarityMethod::CosineMean, 0.0};
}

SimilarityResult two_stage_similarity(const EmbeddedUtterance& a, const EmbeddedUtterance& b,
                                      const SimilarityConfig& cfg) {
    SimilarityResult wrd = wrd_similarity(a, b);
    if (wrd.score > cfg.wrd_fallback_threshold) return wrd;
    return cosine_mean_similarity(a, b);
}

}  // namespace tourdesk
