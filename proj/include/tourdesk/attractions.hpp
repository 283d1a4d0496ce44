#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tourdesk {

struct GeoPoint {
    double lat = 0.0;
    double lng = 0.0;
};

// Great-circle distance in meters (haversine, mean Earth radius).
double haversine_m(GeoPoint a, GeoPoint b);

struct Access {
    bool car = false;
    bool train = false;
    std::optional<std::string> nearest_station;
};

struct Attraction {
    std::string id;
    std::string name;
    std::string description;
    std::string open_hours;  // empty when unknown
    std::optional<long long> price_yen;
    bool parking = false;
    Access access;
    GeoPoint location;
    std::optional<std::string> photo_url;

    // Number of populated informational slots; drives the default
    // recommendation policy.
    int populated_slots() const;
};

struct Restaurant {
    std::string name;
    double distance_m = 0.0;
    std::optional<double> rating;
    GeoPoint location;
};

class AttractionDataset {
public:
    // JSON list of attraction records. Throws LoadError on duplicate ids,
    // out-of-range coordinates or missing required fields.
    static AttractionDataset load(const std::filesystem::path& path);
    static AttractionDataset parse(std::string_view json_text);

    const Attraction* find(std::string_view id) const;
    const Attraction& at(std::string_view id) const;  // throws NotFound
    std::size_t size() const noexcept { return records_.size(); }
    const std::vector<Attraction>& records() const noexcept { return records_; }

private:
    std::vector<Attraction> records_;
    std::map<std::string, std::size_t, std::less<>> index_;
};

// Category ids that have an answer template.
std::span<const std::string_view> answer_categories();

// Fills the category's answer template from the record. Missing slots are
// answered with an explicit "information unavailable" sentence; no value is
// ever invented. Restaurants are spoken in the given order.
// Throws TemplateError for a category without a template.
std::string answer_for(const Attraction& attraction, std::string_view category,
                       std::span<const Restaurant> restaurants = {});

// Offer phrasing used when the robot proposes a category ("Shall I tell you
// the entrance fee?"). Throws TemplateError for unknown categories.
std::string offer_for(std::string_view category);

}  // namespace tourdesk
