#include "tourdesk/places.hpp"

#include <httplib.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "tourdesk/error.hpp"

namespace tourdesk {

using nlohmann::json;

std::vector<PlaceRecord> parse_places_json(std::string_view json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw LoadError(std::string("places payload is not valid JSON: ") + e.what());
    }
    if (!doc.is_array()) throw LoadError("places payload must be a JSON list");
    std::vector<PlaceRecord> out;
    out.reserve(doc.size());
    for (std::size_t k = 0; k < doc.size(); ++k) {
        const json& p = doc[k];
        try {
            PlaceRecord r;
            r.name = p.at("name").get<std::string>();
            r.location = {p.at("lat").get<double>(), p.at("lng").get<double>()};
            if (p.contains("rating") && !p["rating"].is_null()) {
                r.rating = p["rating"].get<double>();
                if (*r.rating < 0.0 || *r.rating > 5.0) {
                    throw LoadError("place #" + std::to_string(k) + ": rating outside [0, 5]");
                }
            }
            if (std::abs(r.location.lat) > 90.0 || std::abs(r.location.lng) > 180.0) {
                throw LoadError("place #" + std::to_string(k) + ": coordinates out of range");
            }
            out.push_back(std::move(r));
        } catch (const json::exception& e) {
            throw LoadError("place #" + std::to_string(k) + ": " + e.what());
        }
    }
    return out;
}

FixturePlacesProvider::FixturePlacesProvider(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open places fixture " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        places_ = parse_places_json(buf.str());
    } catch (const LoadError& e) {
        throw LoadError(path.string() + ": " + e.what());
    }
}

std::vector<PlaceRecord> FixturePlacesProvider::search(GeoPoint, double) const { return places_; }

HttpPlacesProvider::HttpPlacesProvider(std::string base_url, std::string api_key, std::chrono::milliseconds timeout)
    : api_key_(std::move(api_key)), timeout_(timeout) {
    if (api_key_.empty()) throw ConfigError("live places provider requires PLACES_API_KEY");
    const auto scheme_end = base_url.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("places base URL needs a scheme: " + base_url);
    const auto path_start = base_url.find('/', scheme_end + 3);
    origin_ = base_url.substr(0, path_start);
    path_ = path_start == std::string::npos ? "/" : base_url.substr(path_start);
}

std::vector<PlaceRecord> HttpPlacesProvider::search(GeoPoint center, double radius_m) const {
    httplib::Client client(origin_);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout_);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout_ - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());

    const httplib::Params params = {
        {"lat", std::to_string(center.lat)},
        {"lng", std::to_string(center.lng)},
        {"radius", std::to_string(radius_m)},
        {"key", api_key_},
    };
    auto res = client.Get(path_, params, httplib::Headers{});
    if (!res) throw ProviderError(0, "places request failed: " + httplib::to_string(res.error()));
    if (res->status != 200) {
        throw ProviderError(res->status, "places provider returned HTTP " + std::to_string(res->status));
    }
    try {
        return parse_places_json(res->body);
    } catch (const LoadError& e) {
        throw ProviderError(res->status, std::string("malformed places response: ") + e.what());
    }
}

void PlacesConfig::apply_environment() {
    if (const char* url = std::getenv("PLACES_BASE_URL"); url && *url) base_url = url;
    if (const char* key = std::getenv("PLACES_API_KEY"); key && *key) api_key = key;
}

std::unique_ptr<PlacesProvider> make_places_provider(const PlacesConfig& cfg) {
    if (cfg.mode == PlacesConfig::Mode::Fixture) return std::make_unique<FixturePlacesProvider>(cfg.fixture_path);
    if (cfg.api_key.empty()) throw ConfigError("live places provider requires PLACES_API_KEY");
    if (cfg.base_url.empty()) throw ConfigError("live places provider requires PLACES_BASE_URL");
    return std::make_unique<HttpPlacesProvider>(cfg.base_url, cfg.api_key, cfg.timeout);
}

std::vector<Restaurant> nearby_restaurants(const PlacesProvider& provider, const Attraction& attraction,
                                           double radius_m) {
    if (!(radius_m > 0.0)) throw InvalidInput("search radius must be positive");
    std::vector<Restaurant> out;
    for (auto& place : provider.search(attraction.location, radius_m)) {
        const double d = haversine_m(attraction.location, place.location);
        if (d <= radius_m) out.push_back({std::move(place.name), d, place.rating, place.location});
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const Restaurant& a, const Restaurant& b) { return a.distance_m < b.distance_m; });
    return out;
}

}  // namespace tourdesk
