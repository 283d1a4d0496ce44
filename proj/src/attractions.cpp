#include "tourdesk/attractions.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <numbers>
#include <sstream>

#include "tourdesk/error.hpp"

namespace tourdesk {

using nlohmann::json;

double haversine_m(GeoPoint a, GeoPoint b) {
    constexpr double kEarthRadiusM = 6371008.8;
    constexpr double kDeg = std::numbers::pi / 180.0;
    const double dlat = (b.lat - a.lat) * kDeg;
    const double dlng = (b.lng - a.lng) * kDeg;
    const double h = std::sin(dlat / 2) * std::sin(dlat / 2) +
                     std::cos(a.lat * kDeg) * std::cos(b.lat * kDeg) * std::sin(dlng / 2) * std::sin(dlng / 2);
    return 2.0 * kEarthRadiusM * std::asin(std::min(1.0, std::sqrt(h)));
}

int Attraction::populated_slots() const {
    int n = 0;
    n += !description.empty();
    n += !open_hours.empty();
    n += price_yen.has_value();
    n += parking;
    n += access.car;
    n += access.train;
    n += access.nearest_station.has_value();
    n += photo_url.has_value();
    return n;
}

namespace {

std::optional<std::string> optional_string(const json& j, const char* key) {
    if (!j.contains(key) || j[key].is_null()) return std::nullopt;
    return j[key].get<std::string>();
}

Attraction parse_record(const json& j, std::size_t index) {
    const std::string where = "attraction #" + std::to_string(index);
    if (!j.is_object()) throw LoadError(where + ": not an object");
    try {
        Attraction a;
        a.id = j.at("id").get<std::string>();
        a.name = j.at("name").get<std::string>();
        if (a.id.empty() || a.name.empty()) throw LoadError(where + ": id and name must be nonempty");
        a.description = j.value("description", std::string{});
        a.open_hours = j.value("open_hours", std::string{});
        if (j.contains("price_yen") && !j["price_yen"].is_null()) {
            if (!j["price_yen"].is_number_integer() || j["price_yen"].get<long long>() < 0) {
                throw LoadError(where + " (" + a.id + "): price_yen must be a nonnegative integer");
            }
            a.price_yen = j["price_yen"].get<long long>();
        }
        a.parking = j.value("parking", false);
        if (j.contains("access")) {
            const json& acc = j["access"];
            a.access.car = acc.value("car", false);
            a.access.train = acc.value("train", false);
            a.access.nearest_station = optional_string(acc, "nearest_station");
        }
        const json& loc = j.at("location");
        a.location = {loc.at("lat").get<double>(), loc.at("lng").get<double>()};
        if (!(a.location.lat >= -90.0 && a.location.lat <= 90.0)) {
            throw LoadError(where + " (" + a.id + "): lat " + std::to_string(a.location.lat) + " out of range");
        }
        if (!(a.location.lng >= -180.0 && a.location.lng <= 180.0)) {
            throw LoadError(where + " (" + a.id + "): lng " + std::to_string(a.location.lng) + " out of range");
        }
        a.photo_url = optional_string(j, "photo_url");
        return a;
    } catch (const json::exception& e) {
        throw LoadError(where + ": " + e.what());
    }
}

std::string format_meters(double m) { return std::to_string(static_cast<long long>(std::llround(m))); }

}  // namespace

AttractionDataset AttractionDataset::parse(std::string_view json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw LoadError(std::string("attraction file is not valid JSON: ") + e.what());
    }
    if (!doc.is_array()) throw LoadError("attraction file must be a JSON list");
    AttractionDataset ds;
    for (std::size_t k = 0; k < doc.size(); ++k) {
        Attraction a = parse_record(doc[k], k);
        if (ds.index_.contains(a.id)) throw LoadError("duplicate attraction id " + a.id);
        ds.index_.emplace(a.id, ds.records_.size());
        ds.records_.push_back(std::move(a));
    }
    return ds;
}

AttractionDataset AttractionDataset::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open attraction file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

const Attraction* AttractionDataset::find(std::string_view id) const {
    auto it = index_.find(id);
    return it == index_.end() ? nullptr : &records_[it->second];
}

const Attraction& AttractionDataset::at(std::string_view id) const {
    const Attraction* a = find(id);
    if (!a) throw NotFound("unknown attraction id " + std::string(id));
    return *a;
}

namespace {

constexpr std::array<std::string_view, 6> kAnswerCategories = {
    "PriceRemark", "TimeRemark", "Parking", "Access", "Restaurants", "Overview",
};

std::string unavailable(const Attraction& a, std::string_view what) {
    return "I'm sorry, information about " + std::string(what) + " at " + a.name + " is unavailable.";
}

}  // namespace

std::span<const std::string_view> answer_categories() { return kAnswerCategories; }

std::string answer_for(const Attraction& a, std::string_view category, std::span<const Restaurant> restaurants) {
    if (category == "PriceRemark") {
        if (!a.price_yen) return unavailable(a, "the entrance fee");
        if (*a.price_yen == 0) return "Admission to " + a.name + " is free of charge.";
        return "The entrance fee for " + a.name + " is " + std::to_string(*a.price_yen) + " yen.";
    }
    if (category == "TimeRemark") {
        if (a.open_hours.empty()) return unavailable(a, "the opening hours");
        return a.name + " is open " + a.open_hours + ".";
    }
    if (category == "Parking") {
        if (a.parking) return "Yes, " + a.name + " has a parking lot, so you can come by car.";
        return a.name + " does not have its own parking lot.";
    }
    if (category == "Access") {
        std::string out;
        if (a.access.train) {
            out = a.name + " can be reached by train";
            out += a.access.nearest_station ? ", and the nearest station is " + *a.access.nearest_station + "." : ".";
        }
        if (a.access.car) {
            if (!out.empty()) out += " ";
            out += a.parking ? "You can also drive there and use the parking lot." : "You can also get there by car.";
        }
        return out.empty() ? unavailable(a, "access") : out;
    }
    if (category == "Restaurants") {
        if (restaurants.empty()) return unavailable(a, "nearby restaurants");
        std::string out = "Near " + a.name + ", there is " + restaurants[0].name + " about " +
                          format_meters(restaurants[0].distance_m) + " meters away";
        for (std::size_t k = 1; k < restaurants.size(); ++k) {
            out += (k + 1 == restaurants.size() ? " and " : ", ") + restaurants[k].name + " about " +
                   format_meters(restaurants[k].distance_m) + " meters away";
        }
        return out + ".";
    }
    if (category == "Overview") {
        if (a.description.empty()) return unavailable(a, "the highlights");
        return a.name + ": " + a.description;
    }
    throw TemplateError("no answer template for category " + std::string(category));
}

std::string offer_for(std::string_view category) {
    if (category == "PriceRemark") return "Shall I tell you the entrance fee?";
    if (category == "TimeRemark") return "Shall I tell you the opening hours?";
    if (category == "Parking") return "Shall I tell you about parking?";
    if (category == "Access") return "Shall I tell you how to get there?";
    if (category == "Restaurants") return "Shall I tell you about restaurants nearby?";
    if (category == "Overview") return "Shall I tell you more about it?";
    throw TemplateError("no offer template for category " + std::string(category));
}

}  // namespace tourdesk
