#include "tourdesk/config.hpp"

#include <fstream>
#include <json.hpp>
#include <sstream>

#include "tourdesk/error.hpp"

namespace tourdesk {

using nlohmann::json;

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    if (p.empty()) return {};
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
}

void check_threshold(const char* name, double v) {
    if (!(v >= -1.0 && v <= 1.0)) {
        throw ConfigError(std::string("threshold ") + name + " must lie in [-1, 1], got " + std::to_string(v));
    }
}

void require_file(const char* what, const std::filesystem::path& p) {
    if (p.empty()) throw ConfigError(std::string(what) + " path is not configured");
    if (!std::filesystem::is_regular_file(p)) throw ConfigError(std::string(what) + " file not found: " + p.string());
}

}  // namespace

ServiceConfig ServiceConfig::parse(std::string_view json_text, const std::filesystem::path& base_dir) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config must be a JSON object");

    ServiceConfig c;
    try {
        c.embeddings = resolve(base_dir, j.value("embeddings", std::string{}));
        c.categories = resolve(base_dir, j.value("categories", std::string{}));
        c.attractions = resolve(base_dir, j.value("attractions", std::string{}));
        c.expressions = resolve(base_dir, j.value("expressions", std::string{}));
        if (j.contains("thresholds")) {
            const json& t = j["thresholds"];
            c.thresholds.wrd_fallback_threshold = t.value("wrd_fallback", c.thresholds.wrd_fallback_threshold);
            c.thresholds.wrd_accept_threshold = t.value("wrd_accept", c.thresholds.wrd_accept_threshold);
            c.thresholds.cosine_accept_threshold = t.value("cosine_accept", c.thresholds.cosine_accept_threshold);
        }
        c.session_deadline_seconds = j.value("session_deadline_seconds", c.session_deadline_seconds);
        c.name_interjection_period = j.value("name_interjection_period", c.name_interjection_period);
        c.restaurant_cap = j.value("restaurant_cap", c.restaurant_cap);
        if (j.contains("expression_events")) {
            const json& e = j["expression_events"];
            auto& m = c.expression_events;
            m.greeting = e.value("greeting", m.greeting);
            m.recommend = e.value("recommend", m.recommend);
            m.answer = e.value("answer", m.answer);
            m.clarify = e.value("clarify", m.clarify);
            m.fallback = e.value("default", m.fallback);
        }
        if (j.contains("places")) {
            const json& p = j["places"];
            const std::string mode = p.value("mode", std::string{"fixture"});
            if (mode == "fixture") {
                c.places.mode = PlacesConfig::Mode::Fixture;
            } else if (mode == "live") {
                c.places.mode = PlacesConfig::Mode::Live;
            } else {
                throw ConfigError("places.mode must be 'fixture' or 'live', got '" + mode + "'");
            }
            c.places.fixture_path = resolve(base_dir, p.value("fixture", std::string{}));
            c.places.base_url = p.value("base_url", std::string{});
            c.places.api_key = p.value("api_key", std::string{});
            c.places.timeout = std::chrono::milliseconds(p.value("timeout_ms", 3000));
            c.restaurant_radius_m = p.value("radius_m", c.restaurant_radius_m);
        }
        c.log_dir = resolve(base_dir, j.value("log_dir", std::string{"logs"}));
        c.log_sync = j.value("log_sync", c.log_sync);
        if (j.contains("listen")) {
            const std::string listen = j["listen"].get<std::string>();
            const auto colon = listen.rfind(':');
            if (colon == std::string::npos) throw ConfigError("listen must be host:port, got '" + listen + "'");
            c.listen_host = listen.substr(0, colon);
            c.listen_port = std::stoi(listen.substr(colon + 1));
        }
        if (j.contains("segmenter")) c.segmenter_command = j["segmenter"].at("command").get<std::vector<std::string>>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    } catch (const std::invalid_argument&) {
        throw ConfigError("config: listen port is not a number");
    }
    c.places.apply_environment();
    return c;
}

ServiceConfig ServiceConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse(buf.str(), std::filesystem::absolute(path).parent_path());
}

void ServiceConfig::validate() const {
    require_file("embeddings", embeddings);
    require_file("categories", categories);
    require_file("attractions", attractions);
    if (!expressions.empty()) require_file("expressions", expressions);
    if (places.mode == PlacesConfig::Mode::Fixture) require_file("places fixture", places.fixture_path);
    check_threshold("wrd_fallback", thresholds.wrd_fallback_threshold);
    check_threshold("wrd_accept", thresholds.wrd_accept_threshold);
    check_threshold("cosine_accept", thresholds.cosine_accept_threshold);
    if (session_deadline_seconds <= 0) throw ConfigError("session_deadline_seconds must be positive");
    if (name_interjection_period <= 0) throw ConfigError("name_interjection_period must be positive");
    if (!(restaurant_radius_m > 0.0)) throw ConfigError("places.radius_m must be positive");
    if (listen_port < 0 || listen_port > 65535) throw ConfigError("listen port out of range");
}

DialogueConfig ServiceConfig::dialogue() const {
    DialogueConfig d;
    d.classifier = thresholds;
    d.name_period = name_interjection_period;
    d.session_length = std::chrono::seconds(session_deadline_seconds);
    d.restaurant_radius_m = restaurant_radius_m;
    d.restaurant_cap = restaurant_cap;
    d.expressions = expression_events;
    return d;
}

}  // namespace tourdesk
