#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace tourdesk {

using Vector = std::vector<double>;

// Immutable token -> dense vector map. Vectors live in one contiguous
// buffer; lookups hand out views into it.
class EmbeddingStore {
public:
    // Parses the text vector format: a `<count> <dim>` header line followed
    // by `count` rows of `<token> <v1> ... <v_dim>`. Any whitespace is
    // accepted between fields. Throws LoadError naming the offending line.
    static EmbeddingStore load(const std::filesystem::path& path);
    static EmbeddingStore parse(std::string_view text);

    static EmbeddingStore from_entries(std::size_t dim,
                                       std::vector<std::pair<std::string, Vector>> entries);

    // Writes the same format with single-space separators and round-trip
    // precision for every component.
    void save(const std::filesystem::path& path) const;

    std::size_t dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return tokens_.size(); }
    bool contains(std::string_view token) const;

    // Empty span when the token is absent.
    std::span<const double> find(std::string_view token) const;
    std::span<const double> at(std::string_view token) const;

    // Tokens in file order.
    const std::vector<std::string>& tokens() const noexcept { return tokens_; }

private:
    EmbeddingStore() = default;
    void insert(std::string token, std::span<const double> values, std::size_t line);

    struct Hash {
        using is_transparent = void;
        std::size_t operator()(std::string_view s) const noexcept {
            return std::hash<std::string_view>{}(s);
        }
    };

    std::size_t dim_ = 0;
    std::vector<std::string> tokens_;
    std::vector<double> data_;
    std::unordered_map<std::string, std::size_t, Hash, std::equal_to<>> index_;
};

// Splits raw text into word tokens. Implementations must be reentrant.
class Segmenter {
public:
    virtual ~Segmenter() = default;
    virtual std::vector<std::string> segment(std::string_view text) const = 0;
};

// NFKC normalization, lowercasing, punctuation stripping and whitespace
// splitting. Apostrophes are dropped ("it's" -> "its"); every other
// punctuation or symbol character acts as a separator.
class DefaultSegmenter final : public Segmenter {
public:
    std::vector<std::string> segment(std::string_view text) const override;
};

// Runs an external word segmenter (a morphological analyzer in wakati
// mode, for example). The raw text is written to the child's stdin; the
// child prints whitespace-separated tokens on stdout. A nonzero exit
// status raises TokenizeError carrying the child's stderr.
class CommandSegmenter final : public Segmenter {
public:
    explicit CommandSegmenter(std::vector<std::string> argv);
    std::vector<std::string> segment(std::string_view text) const override;

private:
    std::vector<std::string> argv_;
};

// In-process adapter around any callable.
class FunctionSegmenter final : public Segmenter {
public:
    using Fn = std::function<std::vector<std::string>(std::string_view)>;
    explicit FunctionSegmenter(Fn fn) : fn_(std::move(fn)) {}
    std::vector<std::string> segment(std::string_view text) const override;

private:
    Fn fn_;
};

const Segmenter& default_segmenter();

// NFKC + lowercase of a single token. Throws TokenizeError on invalid UTF-8.
std::string normalize_text(std::string_view text);

struct TokenizedUtterance {
    std::string raw;
    std::vector<std::string> tokens;
};

// Tokens produced by any segmenter are normalized again and re-split on
// whitespace, so the result never holds empty or whitespace-bearing tokens.
TokenizedUtterance tokenize(std::string_view text, const Segmenter& segmenter = default_segmenter());

struct EmbeddedUtterance {
    std::vector<std::string> tokens;
    std::vector<Vector> vectors;  // parallel to tokens
    std::vector<std::string> oov;

    bool empty() const noexcept { return tokens.empty(); }
};

// Keeps in-vocabulary tokens with nonzero vectors in order; everything
// else goes to `oov`.
EmbeddedUtterance embed(const EmbeddingStore& store, const TokenizedUtterance& utterance);

double norm(std::span<const double> v);

}  // namespace tourdesk
