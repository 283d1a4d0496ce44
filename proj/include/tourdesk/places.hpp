#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tourdesk/attractions.hpp"

namespace tourdesk {

// One result of a nearby search, before distance filtering.
struct PlaceRecord {
    std::string name;
    GeoPoint location;
    std::optional<double> rating;
};

class PlacesProvider {
public:
    virtual ~PlacesProvider() = default;
    // Raw places around `center`. Providers may over-return; callers filter.
    virtual std::vector<PlaceRecord> search(GeoPoint center, double radius_m) const = 0;
};

// Reads a local JSON list of {name, lat, lng, rating?}. Throws LoadError on
// a malformed file.
class FixturePlacesProvider final : public PlacesProvider {
public:
    explicit FixturePlacesProvider(const std::filesystem::path& path);
    explicit FixturePlacesProvider(std::vector<PlaceRecord> places) : places_(std::move(places)) {}
    std::vector<PlaceRecord> search(GeoPoint center, double radius_m) const override;

private:
    std::vector<PlaceRecord> places_;
};

// GET <base_url>?lat=..&lng=..&radius=..&key=.. returning a JSON list of
// {name, lat, lng, rating}. Each call opens its own connection, so one
// instance can serve concurrent callers.
class HttpPlacesProvider final : public PlacesProvider {
public:
    HttpPlacesProvider(std::string base_url, std::string api_key,
                       std::chrono::milliseconds timeout = std::chrono::seconds(3));
    std::vector<PlaceRecord> search(GeoPoint center, double radius_m) const override;

private:
    std::string origin_;  // scheme://host[:port]
    std::string path_;
    std::string api_key_;
    std::chrono::milliseconds timeout_;
};

struct PlacesConfig {
    enum class Mode { Fixture, Live };
    Mode mode = Mode::Fixture;
    std::filesystem::path fixture_path;
    std::string base_url;
    std::string api_key;
    std::chrono::milliseconds timeout = std::chrono::seconds(3);

    // PLACES_BASE_URL and PLACES_API_KEY override the configured values.
    void apply_environment();
};

// Throws ConfigError when live mode lacks a key or base URL.
std::unique_ptr<PlacesProvider> make_places_provider(const PlacesConfig& cfg);

std::vector<PlaceRecord> parse_places_json(std::string_view json_text);

// Places within `radius_m` of the attraction, ascending by great-circle
// distance, ties keeping provider order. Throws InvalidInput for radius <= 0.
std::vector<Restaurant> nearby_restaurants(const PlacesProvider& provider, const Attraction& attraction,
                                           double radius_m);

}  // namespace tourdesk
