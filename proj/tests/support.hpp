#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "tourdesk/embeddings.hpp"

namespace tdtest {

inline std::filesystem::path data_dir() { return TOURDESK_DATA_DIR; }
inline std::filesystem::path test_data_dir() { return TOURDESK_TEST_DATA_DIR; }

class TempDir {
public:
    TempDir() {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("tourdesk-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++) + "-" +
                 std::to_string(std::chrono::steady_clock::now().time_since_epoch().count()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// A synthetic vocabulary w0..w{n-1} with Gaussian components. Norms vary
// widely so norm-proportional masses are exercised.
inline tourdesk::EmbeddingStore synthetic_store(std::size_t words, std::size_t dim, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> scale(0.2, 3.0);
    std::vector<std::pair<std::string, tourdesk::Vector>> entries;
    for (std::size_t k = 0; k < words; ++k) {
        tourdesk::Vector v(dim);
        const double s = scale(rng);
        for (double& x : v) x = s * gauss(rng);
        entries.emplace_back("w" + std::to_string(k), std::move(v));
    }
    return tourdesk::EmbeddingStore::from_entries(dim, std::move(entries));
}

inline tourdesk::TokenizedUtterance random_utterance(std::mt19937_64& rng, std::size_t vocab, std::size_t min_len,
                                                     std::size_t max_len) {
    std::uniform_int_distribution<std::size_t> len(min_len, max_len);
    std::uniform_int_distribution<std::size_t> word(0, vocab - 1);
    tourdesk::TokenizedUtterance u;
    const std::size_t n = len(rng);
    for (std::size_t k = 0; k < n; ++k) u.tokens.push_back("w" + std::to_string(word(rng)));
    for (const auto& t : u.tokens) u.raw += (u.raw.empty() ? "" : " ") + t;
    return u;
}

}  // namespace tdtest
