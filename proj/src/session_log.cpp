#include "tourdesk/session_log.hpp"

#include <fcntl.h>
#include <spdlog/spdlog.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "tourdesk/error.hpp"

namespace tourdesk {

using nlohmann::json;

double to_epoch_seconds(TimePoint t) {
    return std::chrono::duration<double>(t.time_since_epoch()).count();
}

TimePoint from_epoch_seconds(double seconds) {
    return TimePoint(std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(seconds)));
}

json to_json(const Classification& c) {
    json j = {{"matched", c.matched}};
    if (c.matched) j["category"] = c.category;
    if (c.has_score) {
        j["score"] = c.score;
        j["method"] = std::string(to_string(c.method));
    } else {
        j["score"] = nullptr;
    }
    return j;
}

namespace {

Classification classification_from_json(const json& j) {
    Classification c;
    c.matched = j.at("matched").get<bool>();
    c.category = j.value("category", std::string{});
    if (j.contains("score") && !j["score"].is_null()) {
        c.has_score = true;
        c.score = j["score"].get<double>();
        c.method = j.value("method", std::string{"WRD"}) == "WRD" ? SimilarityMethod::Wrd : SimilarityMethod::CosineMean;
    }
    return c;
}

json snapshot(const Session& s) {
    json j = {
        {"state", std::string(to_string(s.state))},
        {"visitor_name", s.visitor_name ? json(*s.visitor_name) : json(nullptr)},
        {"transport", std::string(to_string(s.transport))},
        {"qa_turn_count", s.qa_turn_count},
        {"name_reprompts", s.name_reprompts},
        {"transport_reprompts", s.transport_reprompts},
        {"pending_offer", s.pending_offer},
        {"pending_offer_spot", s.pending_offer_spot},
        {"told", s.told},
        {"deadline", to_epoch_seconds(s.deadline)},
    };
    return j;
}

void restore_snapshot(Session& s, const json& j) {
    s.state = parse_state(j.at("state").get<std::string>()).value();
    if (j.contains("visitor_name") && !j["visitor_name"].is_null()) s.visitor_name = j["visitor_name"].get<std::string>();
    s.transport = parse_transport_name(j.at("transport").get<std::string>()).value_or(Transport::Unknown);
    s.qa_turn_count = j.at("qa_turn_count").get<int>();
    s.name_reprompts = j.value("name_reprompts", 0);
    s.transport_reprompts = j.value("transport_reprompts", 0);
    s.pending_offer = j.value("pending_offer", std::string{});
    s.pending_offer_spot = j.value("pending_offer_spot", std::string{});
    s.told = j.value("told", std::vector<std::string>{});
    s.deadline = from_epoch_seconds(j.at("deadline").get<double>());
}

Turn turn_from_json(const json& j) {
    Turn t;
    t.speaker = j.at("speaker").get<std::string>() == "robot" ? Speaker::Robot : Speaker::Visitor;
    t.text = j.at("text").get<std::string>();
    t.state_at_emit = parse_state(j.at("state").get<std::string>()).value();
    t.expression_event = j.value("expression_event", std::string{});
    t.offer = j.value("offer", std::string{});
    t.at = from_epoch_seconds(j.at("t").get<double>());
    if (j.contains("classified") && !j["classified"].is_null()) t.classified = classification_from_json(j["classified"]);
    return t;
}

bool valid_session_id(std::string_view id) {
    if (id.empty() || id.size() > 128) return false;
    for (char c : id) {
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_')) return false;
    }
    return true;
}

}  // namespace

json to_json(const Turn& t) {
    json j = {
        {"speaker", std::string(to_string(t.speaker))},
        {"text", t.text},
        {"state", std::string(to_string(t.state_at_emit))},
        {"t", to_epoch_seconds(t.at)},
    };
    if (!t.expression_event.empty()) j["expression_event"] = t.expression_event;
    if (!t.offer.empty()) j["offer"] = t.offer;
    j["classified"] = t.classified ? to_json(*t.classified) : json(nullptr);
    return j;
}

json to_json(const QuestionnaireRecord& r) {
    return {
        {"session", r.session_id},
        {"ratings", r.ratings},
        {"chosen_spot", r.chosen_spot},
        {"recommended", r.recommended},
        {"chose_recommended", r.chose_recommended},
        {"impression_total", r.impression_total},
        {"t", to_epoch_seconds(r.at)},
    };
}

SessionLog::SessionLog(std::filesystem::path dir, bool sync) : dir_(std::move(dir)), sync_(sync) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw ConfigError("cannot create log directory " + dir_.string() + ": " + ec.message());
}

std::filesystem::path SessionLog::path_for(std::string_view session_id) const {
    if (!valid_session_id(session_id)) throw InvalidInput("invalid session id");
    return dir_ / (std::string(session_id) + ".jsonl");
}

void SessionLog::append_lines(std::string_view session_id, const std::string& lines) {
    const auto path = path_for(session_id);
    const int fd = ::open(path.c_str(), O_RDWR | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd < 0) throw Error("log_error", "cannot open " + path.string() + ": " + std::strerror(errno));
    // A crash mid-write can leave a fragment without its newline. Terminate it
    // so the new records start on a line of their own.
    std::string payload;
    if (const off_t size = ::lseek(fd, 0, SEEK_END); size > 0) {
        char last = '\n';
        if (::pread(fd, &last, 1, size - 1) == 1 && last != '\n') payload.push_back('\n');
    }
    payload += lines;
    std::size_t done = 0;
    while (done < payload.size()) {
        const ssize_t n = ::write(fd, payload.data() + done, payload.size() - done);
        if (n < 0) {
            if (errno == EINTR) continue;
            const int err = errno;
            ::close(fd);
            throw Error("log_error", "write to " + path.string() + " failed: " + std::strerror(err));
        }
        done += static_cast<std::size_t>(n);
    }
    if (sync_ && ::fdatasync(fd) != 0) {
        const int err = errno;
        ::close(fd);
        throw Error("log_error", "fdatasync " + path.string() + " failed: " + std::strerror(err));
    }
    ::close(fd);
}

void SessionLog::append_session(const Session& s) {
    json j = {
        {"type", "session"},
        {"session", s.id},
        {"spot_a", s.spot_a.id},
        {"spot_b", s.spot_b.id},
        {"recommended", s.recommended},
        {"deadline", to_epoch_seconds(s.deadline)},
    };
    append_lines(s.id, j.dump() + "\n");
}

void SessionLog::append_turns(const Session& s, std::span<const Turn> turns) {
    std::string lines;
    for (const Turn& t : turns) {
        json j = to_json(t);
        j["type"] = "turn";
        j["session"] = s.id;
        j["snapshot"] = snapshot(s);
        lines += j.dump() + "\n";
    }
    append_lines(s.id, lines);
}

void SessionLog::append_questionnaire(const QuestionnaireRecord& record) {
    json j = to_json(record);
    j["type"] = "questionnaire";
    append_lines(record.session_id, j.dump() + "\n");
}

std::vector<json> SessionLog::read_records(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw LoadError("cannot open log " + file.string());
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();

    std::vector<json> out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const std::size_t end = text.find('\n', pos);
        if (end == std::string::npos) break;  // partial trailing line
        try {
            out.push_back(json::parse(text.substr(pos, end - pos)));
        } catch (const json::parse_error&) {
            // A fragment left by an interrupted write, terminated on restart.
            spdlog::warn("{}: skipping unreadable record at byte {}", file.string(), pos);
        }
        pos = end + 1;
    }
    return out;
}

std::vector<Session> SessionLog::recover(const AttractionDataset& attractions) const {
    std::vector<Session> sessions;
    if (!std::filesystem::exists(dir_)) return sessions;
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
        if (entry.is_regular_file() && entry.path().extension() == ".jsonl") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
        try {
            const auto records = read_records(file);
            if (records.empty() || records.front().value("type", "") != "session") continue;
            const json& head = records.front();
            const Attraction* a = attractions.find(head.at("spot_a").get<std::string>());
            const Attraction* b = attractions.find(head.at("spot_b").get<std::string>());
            if (a == nullptr || b == nullptr) {
                spdlog::warn("{}: spots no longer in the dataset, skipping", file.string());
                continue;
            }
            Session s;
            s.id = head.at("session").get<std::string>();
            s.spot_a = *a;
            s.spot_b = *b;
            s.recommended = head.at("recommended").get<std::string>();
            s.deadline = from_epoch_seconds(head.at("deadline").get<double>());
            for (const auto& r : records) {
                if (r.value("type", "") != "turn") continue;
                s.transcript.push_back(turn_from_json(r));
                restore_snapshot(s, r.at("snapshot"));
            }
            sessions.push_back(std::move(s));
        } catch (const std::exception& e) {
            spdlog::warn("{}: cannot recover session: {}", file.string(), e.what());
        }
    }
    return sessions;
}

}  // namespace tourdesk
