#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>
#include <vector>

#include "tourdesk/attractions.hpp"
#include "tourdesk/config.hpp"
#include "tourdesk/dialogue.hpp"
#include "tourdesk/embeddings.hpp"
#include "tourdesk/expression.hpp"
#include "tourdesk/intent.hpp"
#include "tourdesk/places.hpp"
#include "tourdesk/session_log.hpp"

namespace httplib {
class Server;
}

namespace tourdesk {

// Everything loaded from a ServiceConfig. Read-only after construction and
// shared by all sessions.
class Runtime {
public:
    // Validates the config and loads every referenced file. Throws
    // ConfigError or LoadError naming the offending path.
    static std::unique_ptr<Runtime> load(ServiceConfig cfg, DialogueEngine::ClockFn clock = [] { return Clock::now(); });

    const ServiceConfig& config() const noexcept { return cfg_; }
    const EmbeddingStore& store() const noexcept { return store_; }
    const CategoryRegistry& categories() const noexcept { return registry_; }
    const AttractionDataset& attractions() const noexcept { return attractions_; }
    const ExpressionTable& expressions() const noexcept { return expressions_; }
    const DialogueEngine& engine() const noexcept { return engine_; }

private:
    Runtime(ServiceConfig cfg, DialogueEngine::ClockFn clock);

    ServiceConfig cfg_;
    std::unique_ptr<Segmenter> segmenter_;
    EmbeddingStore store_;
    CategoryRegistry registry_;
    AttractionDataset attractions_;
    ExpressionTable expressions_;
    std::unique_ptr<PlacesProvider> places_;
    DialogueEngine engine_;
};

// Ordered message log for one session's streaming channel. Any number of
// subscribers read from their own cursor; `finish` wakes them for the end.
class StreamChannel {
public:
    struct Message {
        std::string event;  // "frame" or "reply"
        std::string data;   // JSON
    };

    void publish(std::string event, std::string data);
    void finish();

    // Blocks until messages past `cursor` exist, the channel finishes, or the
    // timeout passes. Returns the new messages; `done` reports a finished
    // channel with nothing left to read.
    std::vector<Message> wait_from(std::size_t cursor, std::chrono::milliseconds timeout, bool& done);

    std::vector<Message> snapshot() const;

private:
    mutable std::mutex mutex_;
    std::condition_variable cv_;
    std::vector<Message> messages_;
    bool finished_ = false;
};

struct CreatedSession {
    std::string session_id;
    Reply greeting;
    std::string recommended;
};

// In-memory sessions backed by append-only logs. Calls on one session are
// queued behind a per-session mutex; distinct sessions proceed in parallel.
class SessionManager {
public:
    explicit SessionManager(const Runtime& runtime);
    ~SessionManager();

    SessionManager(const SessionManager&) = delete;
    SessionManager& operator=(const SessionManager&) = delete;

    // Reloads sessions found in the log directory. Returns how many.
    std::size_t recover();

    // Throws NotFound for unknown spot ids and ValidationError for equal ids.
    CreatedSession create(const std::string& spot_a, const std::string& spot_b,
                          const std::optional<std::string>& recommended = std::nullopt);

    // Throws NotFound, SessionClosed.
    Reply utterance(const std::string& session_id, const std::string& text);
    Reply close(const std::string& session_id);
    QuestionnaireRecord questionnaire(const std::string& session_id, const QuestionnaireAnswers& answers);

    // Moves the session deadline to now and emits the wrap-up right away.
    std::optional<Reply> expire(const std::string& session_id);

    std::vector<Turn> transcript(const std::string& session_id) const;
    Session snapshot(const std::string& session_id) const;
    std::shared_ptr<StreamChannel> channel(const std::string& session_id) const;
    std::vector<std::string> session_ids() const;

    // Emits wrap-ups for sessions whose deadline passed without input.
    void sweep_deadlines();
    // Runs sweep_deadlines on a background thread until destruction.
    void start_deadline_sweeper(std::chrono::milliseconds period = std::chrono::seconds(1));

    const Runtime& runtime() const noexcept { return runtime_; }

private:
    struct Entry {
        mutable std::mutex mutex;
        Session session;
        std::shared_ptr<StreamChannel> channel = std::make_shared<StreamChannel>();
    };

    std::shared_ptr<Entry> find(const std::string& session_id) const;
    // Persists the turns appended since `before`, then publishes them.
    void commit(Entry& entry, Session&& updated, std::size_t before);
    std::string new_id();

    const Runtime& runtime_;
    SessionLog log_;
    mutable std::shared_mutex sessions_mutex_;
    std::map<std::string, std::shared_ptr<Entry>> sessions_;

    std::mutex sweeper_mutex_;
    std::condition_variable sweeper_cv_;
    bool stopping_ = false;
    std::thread sweeper_;
};

// HTTP JSON API plus a server-sent-events stream per session.
//
//   GET  /attractions
//   POST /sessions                         {spot_a_id, spot_b_id, recommended_id?}
//   POST /sessions/{id}/utterance          {text}
//   POST /sessions/{id}/close
//   POST /sessions/{id}/questionnaire      {ratings: {item: 1-5}, chosen_spot_id}
//   GET  /sessions/{id}/transcript
//   GET  /sessions/{id}/stream             text/event-stream of frame/reply events
//
// Errors are {"error": {"code", "message"}} with 400/404/409/422/500 status.
class HttpService {
public:
    explicit HttpService(SessionManager& sessions);
    ~HttpService();

    // Binds and serves on the calling thread until stop(). Port 0 picks a
    // free port; see port().
    bool listen(const std::string& host, int port);
    // Binds without serving; call serve() afterwards.
    int bind(const std::string& host, int port);
    bool serve();
    void stop();
    int port() const noexcept { return port_; }

private:
    void install_routes();

    SessionManager& sessions_;
    std::unique_ptr<httplib::Server> server_;
    std::atomic<int> port_{0};
};

}  // namespace tourdesk
