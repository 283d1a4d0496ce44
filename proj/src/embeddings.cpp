#include "tourdesk/embeddings.hpp"

#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/ustring.h>

#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cmath>
#include <csignal>
#include <cstring>
#include <fstream>
#include <mutex>
#include <sstream>

#include "tourdesk/error.hpp"

namespace tourdesk {

namespace {

bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && is_space(line[i])) ++i;
        std::size_t start = i;
        while (i < line.size() && !is_space(line[i])) ++i;
        if (i > start) out.push_back(line.substr(start, i - start));
    }
    return out;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size();
}

std::string row_prefix(std::size_t line) { return "row " + std::to_string(line) + ": "; }

icu::UnicodeString from_utf8(std::string_view text) {
    // u_strFromUTF8 rejects ill-formed input, unlike UnicodeString::fromUTF8
    // which silently substitutes U+FFFD.
    UErrorCode status = U_ZERO_ERROR;
    int32_t needed = 0;
    u_strFromUTF8(nullptr, 0, &needed, text.data(), static_cast<int32_t>(text.size()), &status);
    if (status != U_BUFFER_OVERFLOW_ERROR && U_FAILURE(status)) {
        throw TokenizeError("input is not valid UTF-8");
    }
    icu::UnicodeString out;
    status = U_ZERO_ERROR;
    UChar* buf = out.getBuffer(needed + 1);
    u_strFromUTF8(buf, needed + 1, nullptr, text.data(), static_cast<int32_t>(text.size()), &status);
    out.releaseBuffer(U_SUCCESS(status) ? needed : 0);
    if (U_FAILURE(status)) throw TokenizeError("input is not valid UTF-8");
    return out;
}

icu::UnicodeString nfkc_lower(std::string_view text) {
    UErrorCode status = U_ZERO_ERROR;
    const icu::Normalizer2* nfkc = icu::Normalizer2::getNFKCInstance(status);
    if (U_FAILURE(status)) throw TokenizeError(std::string("ICU NFKC unavailable: ") + u_errorName(status));
    icu::UnicodeString normalized = nfkc->normalize(from_utf8(text), status);
    if (U_FAILURE(status)) throw TokenizeError(std::string("NFKC normalization failed: ") + u_errorName(status));
    normalized.toLower(icu::Locale::getRoot());
    return normalized;
}

bool is_apostrophe(UChar32 c) { return c == 0x0027 || c == 0x2019 || c == 0x02BC || c == 0xFF07; }

bool is_separator(UChar32 c) {
    if (u_isUWhiteSpace(c) || u_iscntrl(c)) return true;
    const auto mask = U_GET_GC_MASK(c);
    return (mask & (U_GC_P_MASK | U_GC_S_MASK | U_GC_Z_MASK)) != 0;
}

// Splits already-normalized text on separators, dropping apostrophes.
std::vector<std::string> split_normalized(const icu::UnicodeString& text, bool strip_punct) {
    std::vector<std::string> out;
    icu::UnicodeString current;
    auto flush = [&] {
        if (!current.isEmpty()) {
            std::string s;
            current.toUTF8String(s);
            out.push_back(std::move(s));
            current.remove();
        }
    };
    for (int32_t i = 0; i < text.length();) {
        UChar32 c = text.char32At(i);
        i = text.moveIndex32(i, 1);
        if (strip_punct && is_apostrophe(c)) continue;
        if (u_isUWhiteSpace(c) || u_iscntrl(c) || (strip_punct && is_separator(c))) {
            flush();
        } else {
            current.append(c);
        }
    }
    flush();
    return out;
}

}  // namespace

double norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

// --- EmbeddingStore ---------------------------------------------------------

void EmbeddingStore::insert(std::string token, std::span<const double> values, std::size_t line) {
    if (index_.contains(token)) {
        throw LoadError(row_prefix(line) + "duplicate token " + token);
    }
    index_.emplace(token, tokens_.size());
    tokens_.push_back(std::move(token));
    data_.insert(data_.end(), values.begin(), values.end());
}

EmbeddingStore EmbeddingStore::parse(std::string_view text) {
    EmbeddingStore store;
    std::size_t line_no = 0;
    std::size_t expected = 0;
    bool have_header = false;
    std::vector<double> row;

    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;

        auto fields = split_ws(line);
        if (fields.empty()) {
            if (!have_header) throw LoadError("row 1: missing header `<count> <dim>`");
            continue;
        }
        if (!have_header) {
            long long count = 0;
            long long dim = 0;
            if (fields.size() != 2 || !parse_number(fields[0], count) || !parse_number(fields[1], dim) ||
                count < 0 || dim <= 0) {
                throw LoadError("row 1: malformed header, expected `<count> <dim>`");
            }
            expected = static_cast<std::size_t>(count);
            store.dim_ = static_cast<std::size_t>(dim);
            store.tokens_.reserve(expected);
            store.data_.reserve(expected * store.dim_);
            have_header = true;
            continue;
        }
        if (store.tokens_.size() == expected) {
            throw LoadError(row_prefix(line_no) + "more rows than the header count " + std::to_string(expected));
        }
        if (fields.size() - 1 != store.dim_) {
            throw LoadError(row_prefix(line_no) + "expected " + std::to_string(store.dim_) + " components, got " +
                            std::to_string(fields.size() - 1));
        }
        row.assign(store.dim_, 0.0);
        for (std::size_t k = 0; k < store.dim_; ++k) {
            if (!parse_number(fields[k + 1], row[k]) || !std::isfinite(row[k])) {
                throw LoadError(row_prefix(line_no) + "non-numeric component '" + std::string(fields[k + 1]) + "'");
            }
        }
        store.insert(std::string(fields[0]), row, line_no);
        if (end == text.size()) break;
    }
    if (!have_header) throw LoadError("row 1: missing header `<count> <dim>`");
    if (store.tokens_.size() != expected) {
        throw LoadError("row " + std::to_string(store.tokens_.size() + 2) + ": expected " + std::to_string(expected) +
                        " rows, file ends after " + std::to_string(store.tokens_.size()));
    }
    return store;
}

EmbeddingStore EmbeddingStore::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError("cannot open vector file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
        return parse(buf.str());
    } catch (const LoadError& e) {
        throw LoadError(path.string() + ": " + e.what());
    }
}

EmbeddingStore EmbeddingStore::from_entries(std::size_t dim, std::vector<std::pair<std::string, Vector>> entries) {
    if (dim == 0) throw LoadError("dimension must be positive");
    EmbeddingStore store;
    store.dim_ = dim;
    std::size_t row = 2;
    for (auto& [token, values] : entries) {
        if (values.size() != dim) {
            throw LoadError(row_prefix(row) + "expected " + std::to_string(dim) + " components, got " +
                            std::to_string(values.size()));
        }
        store.insert(std::move(token), values, row);
        ++row;
    }
    return store;
}

void EmbeddingStore::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw LoadError("cannot write vector file " + path.string());
    out << tokens_.size() << ' ' << dim_ << '\n';
    char buf[64];
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
        out << tokens_[i];
        for (std::size_t k = 0; k < dim_; ++k) {
            auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, data_[i * dim_ + k]);
            out << ' ' << std::string_view(buf, static_cast<std::size_t>(ptr - buf));
        }
        out << '\n';
    }
    if (!out) throw LoadError("write failed for " + path.string());
}

bool EmbeddingStore::contains(std::string_view token) const { return index_.find(token) != index_.end(); }

std::span<const double> EmbeddingStore::find(std::string_view token) const {
    auto it = index_.find(token);
    if (it == index_.end()) return {};
    return {data_.data() + it->second * dim_, dim_};
}

std::span<const double> EmbeddingStore::at(std::string_view token) const {
    auto v = find(token);
    if (v.empty()) throw InvalidInput("token not in vocabulary: " + std::string(token));
    return v;
}

// --- tokenization -----------------------------------------------------------

std::string normalize_text(std::string_view text) {
    std::string out;
    nfkc_lower(text).toUTF8String(out);
    return out;
}

std::vector<std::string> DefaultSegmenter::segment(std::string_view text) const {
    return split_normalized(nfkc_lower(text), /*strip_punct=*/true);
}

std::vector<std::string> FunctionSegmenter::segment(std::string_view text) const {
    try {
        return fn_(text);
    } catch (const TokenizeError&) {
        throw;
    } catch (const std::exception& e) {
        throw TokenizeError(std::string("segmenter failed: ") + e.what());
    }
}

CommandSegmenter::CommandSegmenter(std::vector<std::string> argv) : argv_(std::move(argv)) {
    if (argv_.empty()) throw ConfigError("segmenter command is empty");
}

std::vector<std::string> CommandSegmenter::segment(std::string_view text) const {
    int in_pipe[2], out_pipe[2], err_pipe[2];
    if (pipe(in_pipe) != 0 || pipe(out_pipe) != 0 || pipe(err_pipe) != 0) {
        throw TokenizeError(std::string("segmenter pipe: ") + std::strerror(errno));
    }
    pid_t pid = fork();
    if (pid < 0) throw TokenizeError(std::string("segmenter fork: ") + std::strerror(errno));
    if (pid == 0) {
        dup2(in_pipe[0], STDIN_FILENO);
        dup2(out_pipe[1], STDOUT_FILENO);
        dup2(err_pipe[1], STDERR_FILENO);
        for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1], err_pipe[0], err_pipe[1]}) close(fd);
        std::vector<char*> args;
        for (const auto& a : argv_) args.push_back(const_cast<char*>(a.c_str()));
        args.push_back(nullptr);
        execvp(args[0], args.data());
        std::fprintf(stderr, "exec %s: %s\n", args[0], std::strerror(errno));
        _exit(127);
    }
    close(in_pipe[0]);
    close(out_pipe[1]);
    close(err_pipe[1]);

    std::string payload(text);
    payload.push_back('\n');
    std::size_t written = 0;
    std::string out, err;
    pollfd fds[3] = {{in_pipe[1], POLLOUT, 0}, {out_pipe[0], POLLIN, 0}, {err_pipe[0], POLLIN, 0}};
    int open_reads = 2;
    // Writing stdin while draining stdout/stderr avoids a pipe-buffer deadlock.
    // A segmenter that exits early must not kill us with SIGPIPE; toggling the
    // disposition per call would race between sessions, so it is set once.
    static std::once_flag ignore_sigpipe;
    std::call_once(ignore_sigpipe, [] { std::signal(SIGPIPE, SIG_IGN); });
    while (open_reads > 0) {
        if (poll(fds, 3, -1) < 0) {
            if (errno == EINTR) continue;
            break;
        }
        if (fds[0].fd >= 0 && (fds[0].revents & (POLLOUT | POLLERR | POLLHUP))) {
            ssize_t n = write(fds[0].fd, payload.data() + written, payload.size() - written);
            if (n > 0) written += static_cast<std::size_t>(n);
            if (n < 0 || written == payload.size()) {
                close(fds[0].fd);
                fds[0].fd = -1;
            }
        }
        for (int k = 1; k < 3; ++k) {
            if (fds[k].fd >= 0 && (fds[k].revents & (POLLIN | POLLHUP | POLLERR))) {
                char buf[4096];
                ssize_t n = read(fds[k].fd, buf, sizeof buf);
                if (n > 0) {
                    (k == 1 ? out : err).append(buf, static_cast<std::size_t>(n));
                } else if (n == 0 || errno != EINTR) {
                    close(fds[k].fd);
                    fds[k].fd = -1;
                    --open_reads;
                }
            }
        }
    }
    if (fds[0].fd >= 0) close(fds[0].fd);

    int status = 0;
    while (waitpid(pid, &status, 0) < 0 && errno == EINTR) {
    }
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
        std::string msg = "segmenter '" + argv_.front() + "' failed";
        if (WIFEXITED(status)) msg += " with exit status " + std::to_string(WEXITSTATUS(status));
        if (!err.empty()) msg += ": " + err;
        while (!msg.empty() && (msg.back() == '\n' || msg.back() == '\r')) msg.pop_back();
        throw TokenizeError(msg);
    }
    std::vector<std::string> tokens;
    for (auto t : split_ws(out)) tokens.emplace_back(t);
    return tokens;
}

const Segmenter& default_segmenter() {
    static const DefaultSegmenter instance;
    return instance;
}

TokenizedUtterance tokenize(std::string_view text, const Segmenter& segmenter) {
    TokenizedUtterance result{std::string(text), {}};
    from_utf8(text);  // reject ill-formed input before any adapter sees it
    for (const auto& piece : segmenter.segment(text)) {
        for (auto& t : split_normalized(nfkc_lower(piece), /*strip_punct=*/false)) {
            result.tokens.push_back(std::move(t));
        }
    }
    return result;
}

EmbeddedUtterance embed(const EmbeddingStore& store, const TokenizedUtterance& utterance) {
    EmbeddedUtterance out;
    for (const auto& token : utterance.tokens) {
        auto v = store.find(token);
        if (v.empty() || norm(v) == 0.0) {
            out.oov.push_back(token);
        } else {
            out.tokens.push_back(token);
            out.vectors.emplace_back(v.begin(), v.end());
        }
    }
    return out;
}

}  // namespace tourdesk
