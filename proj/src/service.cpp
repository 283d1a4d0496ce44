#include "tourdesk/service.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <random>

#include "tourdesk/error.hpp"

namespace tourdesk {

using nlohmann::json;

// --- Runtime ----------------------------------------------------------------

namespace {

std::unique_ptr<PlacesProvider> places_for(const ServiceConfig& cfg) { return make_places_provider(cfg.places); }

}  // namespace

Runtime::Runtime(ServiceConfig cfg, DialogueEngine::ClockFn clock)
    : cfg_(std::move(cfg)),
      segmenter_(cfg_.segmenter_command.empty()
                     ? nullptr
                     : std::make_unique<CommandSegmenter>(cfg_.segmenter_command)),
      store_(EmbeddingStore::load(cfg_.embeddings)),
      registry_(CategoryRegistry::load(cfg_.categories, store_,
                                       segmenter_ ? *segmenter_ : default_segmenter())),
      attractions_(AttractionDataset::load(cfg_.attractions)),
      expressions_(cfg_.expressions.empty() ? ExpressionTable::defaults() : ExpressionTable::load(cfg_.expressions)),
      places_(places_for(cfg_)),
      engine_(store_, registry_, places_.get(), cfg_.dialogue(), segmenter_ ? *segmenter_ : default_segmenter(),
              std::move(clock)) {
    const auto& m = cfg_.expression_events;
    for (const auto* event : {&m.greeting, &m.recommend, &m.answer, &m.clarify, &m.fallback}) {
        if (!expressions_.contains(*event)) spdlog::warn("expression event '{}' is not in the expression table", *event);
    }
}

std::unique_ptr<Runtime> Runtime::load(ServiceConfig cfg, DialogueEngine::ClockFn clock) {
    cfg.validate();
    return std::unique_ptr<Runtime>(new Runtime(std::move(cfg), std::move(clock)));
}

// --- StreamChannel ----------------------------------------------------------

void StreamChannel::publish(std::string event, std::string data) {
    {
        std::lock_guard lock(mutex_);
        if (finished_) return;
        messages_.push_back({std::move(event), std::move(data)});
    }
    cv_.notify_all();
}

void StreamChannel::finish() {
    {
        std::lock_guard lock(mutex_);
        finished_ = true;
    }
    cv_.notify_all();
}

std::vector<StreamChannel::Message> StreamChannel::wait_from(std::size_t cursor, std::chrono::milliseconds timeout,
                                                             bool& done) {
    std::unique_lock lock(mutex_);
    cv_.wait_for(lock, timeout, [&] { return messages_.size() > cursor || finished_; });
    std::vector<Message> out;
    if (cursor < messages_.size()) out.assign(messages_.begin() + static_cast<std::ptrdiff_t>(cursor), messages_.end());
    done = finished_ && out.empty();
    return out;
}

std::vector<StreamChannel::Message> StreamChannel::snapshot() const {
    std::lock_guard lock(mutex_);
    return messages_;
}

// --- SessionManager ---------------------------------------------------------

namespace {

json reply_json(const Reply& r) {
    json j = {
        {"reply", r.text},
        {"state", std::string(to_string(r.new_state))},
        {"expression_event", r.expression_event},
    };
    if (r.debug) {
        j["debug"] = {
            {"category", r.debug->category},
            {"score", r.debug->score},
            {"method", std::string(to_string(r.debug->method))},
            {"resolved_by", r.debug->resolved_by},
        };
    } else {
        j["debug"] = nullptr;
    }
    return j;
}

void publish_turns(StreamChannel& channel, const ExpressionTable& table, const Session& s, std::size_t from) {
    for (std::size_t k = from; k < s.transcript.size(); ++k) {
        const Turn& t = s.transcript[k];
        if (t.speaker != Speaker::Robot) continue;
        const double ts = to_epoch_seconds(t.at);
        channel.publish("frame", frame_to_json(make_frame(table, {ts, t.expression_event})));
        channel.publish("reply", json({{"text", t.text},
                                       {"state", std::string(to_string(t.state_at_emit))},
                                       {"expression_event", t.expression_event}})
                                     .dump());
    }
    if (s.state == DialogueState::Closed) {
        const double ts = s.transcript.empty() ? 0.0 : to_epoch_seconds(s.transcript.back().at);
        channel.publish("frame", frame_to_json({ts, std::string(events::kNeutral), table.params_for(events::kNeutral)}));
        channel.finish();
    }
}

}  // namespace

SessionManager::SessionManager(const Runtime& runtime)
    : runtime_(runtime), log_(runtime.config().log_dir, runtime.config().log_sync) {}

SessionManager::~SessionManager() {
    {
        std::lock_guard lock(sweeper_mutex_);
        stopping_ = true;
    }
    sweeper_cv_.notify_all();
    if (sweeper_.joinable()) sweeper_.join();
}

std::string SessionManager::new_id() {
    static thread_local std::mt19937_64 rng{std::random_device{}()};
    static constexpr char kHex[] = "0123456789abcdef";
    std::string id(16, '0');
    for (char& c : id) c = kHex[rng() & 0xF];
    return id;
}

std::size_t SessionManager::recover() {
    std::size_t n = 0;
    for (auto& s : log_.recover(runtime_.attractions())) {
        auto entry = std::make_shared<Entry>();
        publish_turns(*entry->channel, runtime_.expressions(), s, 0);
        const std::string id = s.id;
        entry->session = std::move(s);
        std::unique_lock lock(sessions_mutex_);
        if (sessions_.emplace(id, std::move(entry)).second) ++n;
    }
    return n;
}

std::shared_ptr<SessionManager::Entry> SessionManager::find(const std::string& session_id) const {
    std::shared_lock lock(sessions_mutex_);
    auto it = sessions_.find(session_id);
    if (it == sessions_.end()) throw NotFound("unknown session " + session_id);
    return it->second;
}

CreatedSession SessionManager::create(const std::string& spot_a, const std::string& spot_b,
                                      const std::optional<std::string>& recommended) {
    if (spot_a == spot_b) throw ValidationError("spot_a_id and spot_b_id must differ, both are " + spot_a);
    const Attraction& a = runtime_.attractions().at(spot_a);
    const Attraction& b = runtime_.attractions().at(spot_b);
    auto [session, greeting] = runtime_.engine().new_session(new_id(), a, b, RecommendationPolicy{recommended});

    log_.append_session(session);
    log_.append_turns(session, session.transcript);

    auto entry = std::make_shared<Entry>();
    publish_turns(*entry->channel, runtime_.expressions(), session, 0);
    CreatedSession out{session.id, greeting, session.recommended};
    entry->session = std::move(session);
    std::unique_lock lock(sessions_mutex_);
    sessions_.emplace(out.session_id, std::move(entry));
    return out;
}

void SessionManager::commit(Entry& entry, Session&& updated, std::size_t before) {
    const std::span<const Turn> added(updated.transcript.data() + before, updated.transcript.size() - before);
    log_.append_turns(updated, added);
    entry.session = std::move(updated);
    publish_turns(*entry.channel, runtime_.expressions(), entry.session, before);
}

Reply SessionManager::utterance(const std::string& session_id, const std::string& text) {
    auto entry = find(session_id);
    std::lock_guard lock(entry->mutex);
    if (entry->session.state == DialogueState::Closed) throw SessionClosed("session " + session_id + " is closed");
    // Work on a copy so a failed log write leaves the session untouched.
    Session working = entry->session;
    const std::size_t before = working.transcript.size();
    Reply reply = runtime_.engine().advance(working, text);
    commit(*entry, std::move(working), before);
    return reply;
}

Reply SessionManager::close(const std::string& session_id) {
    auto entry = find(session_id);
    std::lock_guard lock(entry->mutex);
    Session working = entry->session;
    const std::size_t before = working.transcript.size();
    Reply reply = runtime_.engine().close(working);
    commit(*entry, std::move(working), before);
    return reply;
}

std::optional<Reply> SessionManager::expire(const std::string& session_id) {
    auto entry = find(session_id);
    std::lock_guard lock(entry->mutex);
    Session working = entry->session;
    working.deadline = std::min(working.deadline, runtime_.engine().now());
    const std::size_t before = working.transcript.size();
    auto reply = runtime_.engine().tick(working);
    if (reply) commit(*entry, std::move(working), before);
    return reply;
}

QuestionnaireRecord SessionManager::questionnaire(const std::string& session_id, const QuestionnaireAnswers& answers) {
    auto entry = find(session_id);
    std::lock_guard lock(entry->mutex);
    return record_questionnaire(entry->session, answers, log_, runtime_.engine().now());
}

std::vector<Turn> SessionManager::transcript(const std::string& session_id) const {
    auto entry = find(session_id);
    std::lock_guard lock(entry->mutex);
    return entry->session.transcript;
}

Session SessionManager::snapshot(const std::string& session_id) const {
    auto entry = find(session_id);
    std::lock_guard lock(entry->mutex);
    return entry->session;
}

std::shared_ptr<StreamChannel> SessionManager::channel(const std::string& session_id) const {
    return find(session_id)->channel;
}

std::vector<std::string> SessionManager::session_ids() const {
    std::shared_lock lock(sessions_mutex_);
    std::vector<std::string> ids;
    for (const auto& [id, entry] : sessions_) ids.push_back(id);
    return ids;
}

void SessionManager::sweep_deadlines() {
    std::vector<std::shared_ptr<Entry>> entries;
    {
        std::shared_lock lock(sessions_mutex_);
        for (const auto& [id, entry] : sessions_) entries.push_back(entry);
    }
    for (auto& entry : entries) {
        std::lock_guard lock(entry->mutex);
        Session working = entry->session;
        const std::size_t before = working.transcript.size();
        try {
            if (auto reply = runtime_.engine().tick(working)) commit(*entry, std::move(working), before);
        } catch (const std::exception& e) {
            spdlog::error("deadline sweep for {} failed: {}", working.id, e.what());
        }
    }
}

void SessionManager::start_deadline_sweeper(std::chrono::milliseconds period) {
    if (sweeper_.joinable()) return;
    sweeper_ = std::thread([this, period] {
        std::unique_lock lock(sweeper_mutex_);
        while (!stopping_) {
            sweeper_cv_.wait_for(lock, period, [this] { return stopping_; });
            if (stopping_) break;
            lock.unlock();
            sweep_deadlines();
            lock.lock();
        }
    });
}

// --- HttpService ------------------------------------------------------------

namespace {

int status_for(const Error& e) {
    if (dynamic_cast<const NotFound*>(&e)) return 404;
    if (dynamic_cast<const SessionClosed*>(&e)) return 409;
    if (dynamic_cast<const ValidationError*>(&e) || dynamic_cast<const InvalidInput*>(&e) ||
        dynamic_cast<const TokenizeError*>(&e)) {
        return 422;
    }
    return 500;
}

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(-1, ' ', false, json::error_handler_t::replace), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message) {
    send_json(res, status, {{"error", {{"code", code}, {"message", message}}}});
}

json parse_body(const httplib::Request& req) {
    json body = json::parse(req.body.empty() ? std::string("{}") : req.body);
    if (!body.is_object()) throw json::type_error::create(302, "request body must be a JSON object", nullptr);
    return body;
}

json attraction_json(const Attraction& a) {
    json j = {
        {"id", a.id},
        {"name", a.name},
        {"description", a.description},
        {"open_hours", a.open_hours},
        {"price_yen", a.price_yen ? json(*a.price_yen) : json(nullptr)},
        {"parking", a.parking},
        {"access",
         {{"car", a.access.car},
          {"train", a.access.train},
          {"nearest_station", a.access.nearest_station ? json(*a.access.nearest_station) : json(nullptr)}}},
        {"location", {{"lat", a.location.lat}, {"lng", a.location.lng}}},
        {"photo_url", a.photo_url ? json(*a.photo_url) : json(nullptr)},
    };
    return j;
}

// Wraps a handler with the JSON error contract.
template <typename Fn>
httplib::Server::Handler guarded(Fn fn) {
    return [fn = std::move(fn)](const httplib::Request& req, httplib::Response& res) {
        try {
            fn(req, res);
        } catch (const Error& e) {
            send_error(res, status_for(e), e.code(), e.what());
        } catch (const json::exception& e) {
            send_error(res, 400, "bad_request", e.what());
        } catch (const std::exception& e) {
            spdlog::error("{} {}: {}", req.method, req.path, e.what());
            send_error(res, 500, "internal_error", e.what());
        }
    };
}

}  // namespace

HttpService::HttpService(SessionManager& sessions)
    : sessions_(sessions), server_(std::make_unique<httplib::Server>()) {
    install_routes();
}

HttpService::~HttpService() { stop(); }

void HttpService::install_routes() {
    auto& svr = *server_;
    // Every open stream holds a worker, so leave room for ordinary requests.
    svr.new_task_queue = [] { return new httplib::ThreadPool(64); };
    svr.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
    svr.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) {
        res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
        res.set_header("Access-Control-Allow-Headers", "Content-Type");
        res.status = 204;
    });
    svr.set_logger([](const httplib::Request& req, const httplib::Response& res) {
        spdlog::debug("{} {} -> {}", req.method, req.path, res.status);
    });

    svr.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
        send_json(res, 200, {{"status", "ok"}});
    });

    svr.Get("/attractions", guarded([this](const httplib::Request&, httplib::Response& res) {
        json list = json::array();
        for (const auto& a : sessions_.runtime().attractions().records()) list.push_back(attraction_json(a));
        send_json(res, 200, list);
    }));

    svr.Post("/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
        const json body = parse_body(req);
        if (!body.contains("spot_a_id") || !body.contains("spot_b_id")) {
            throw ValidationError("spot_a_id and spot_b_id are required");
        }
        std::optional<std::string> recommended;
        if (body.contains("recommended_id") && !body["recommended_id"].is_null()) {
            recommended = body["recommended_id"].get<std::string>();
        }
        const auto created = sessions_.create(body["spot_a_id"].get<std::string>(),
                                              body["spot_b_id"].get<std::string>(), recommended);
        send_json(res, 201,
                  {{"session_id", created.session_id},
                   {"greeting", created.greeting.text},
                   {"state", std::string(to_string(created.greeting.new_state))},
                   {"expression_event", created.greeting.expression_event},
                   {"recommended_id", created.recommended}});
    }));

    svr.Post(R"(/sessions/([^/]+)/utterance)", guarded([this](const httplib::Request& req, httplib::Response& res) {
        const json body = parse_body(req);
        if (!body.contains("text") || !body["text"].is_string()) throw ValidationError("text is required");
        const Reply reply = sessions_.utterance(req.matches[1], body["text"].get<std::string>());
        send_json(res, 200, reply_json(reply));
    }));

    svr.Post(R"(/sessions/([^/]+)/close)", guarded([this](const httplib::Request& req, httplib::Response& res) {
        send_json(res, 200, reply_json(sessions_.close(req.matches[1])));
    }));

    svr.Post(R"(/sessions/([^/]+)/questionnaire)",
             guarded([this](const httplib::Request& req, httplib::Response& res) {
                 const json body = parse_body(req);
                 QuestionnaireAnswers answers;
                 answers.chosen_spot = body.value("chosen_spot_id", std::string{});
                 if (body.contains("ratings")) answers.ratings = body["ratings"].get<std::map<std::string, int>>();
                 const auto record = sessions_.questionnaire(req.matches[1], answers);
                 send_json(res, 201, to_json(record));
             }));

    svr.Get(R"(/sessions/([^/]+)/transcript)", guarded([this](const httplib::Request& req, httplib::Response& res) {
        const Session s = sessions_.snapshot(req.matches[1]);
        json turns = json::array();
        for (const auto& t : s.transcript) turns.push_back(to_json(t));
        send_json(res, 200,
                  {{"session_id", s.id}, {"state", std::string(to_string(s.state))}, {"turns", std::move(turns)}});
    }));

    svr.Get(R"(/sessions/([^/]+)/stream)", guarded([this](const httplib::Request& req, httplib::Response& res) {
        auto channel = sessions_.channel(req.matches[1]);
        res.set_header("Cache-Control", "no-cache");
        auto cursor = std::make_shared<std::size_t>(0);
        res.set_chunked_content_provider("text/event-stream", [channel, cursor](std::size_t, httplib::DataSink& sink) {
            bool done = false;
            const auto messages = channel->wait_from(*cursor, std::chrono::milliseconds(500), done);
            for (const auto& m : messages) {
                const std::string chunk = "event: " + m.event + "\ndata: " + m.data + "\n\n";
                if (!sink.write(chunk.data(), chunk.size())) return false;
            }
            *cursor += messages.size();
            if (done) {
                sink.done();
                return true;
            }
            if (messages.empty()) {
                static constexpr std::string_view kKeepAlive = ": keep-alive\n\n";
                if (!sink.write(kKeepAlive.data(), kKeepAlive.size())) return false;
            }
            return true;
        });
    }));
}

int HttpService::bind(const std::string& host, int port) {
    if (port == 0) {
        port_ = server_->bind_to_any_port(host);
    } else {
        port_ = server_->bind_to_port(host, port) ? port : -1;
    }
    return port_;
}

bool HttpService::serve() { return server_->listen_after_bind(); }

bool HttpService::listen(const std::string& host, int port) {
    if (bind(host, port) < 0) return false;
    return serve();
}

void HttpService::stop() {
    if (server_) server_->stop();
}

}  // namespace tourdesk
