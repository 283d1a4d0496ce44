#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "tourdesk/dialogue.hpp"
#include "tourdesk/places.hpp"

namespace tourdesk {

// Service configuration file (JSON). Relative paths resolve against the
// directory holding the config file.
struct ServiceConfig {
    std::filesystem::path embeddings;
    std::filesystem::path categories;
    std::filesystem::path attractions;
    std::filesystem::path expressions;  // optional; built-in table when empty

    ClassifierConfig thresholds;
    int session_deadline_seconds = 300;
    int name_interjection_period = 3;
    std::size_t restaurant_cap = 2;
    double restaurant_radius_m = 800.0;
    ExpressionMapping expression_events;

    PlacesConfig places;
    std::filesystem::path log_dir = "logs";
    bool log_sync = true;
    std::string listen_host = "127.0.0.1";
    int listen_port = 8080;

    // External word segmenter (argv); default segmenter when empty.
    std::vector<std::string> segmenter_command;

    static ServiceConfig load(const std::filesystem::path& path);
    static ServiceConfig parse(std::string_view json_text, const std::filesystem::path& base_dir);

    // Throws ConfigError naming the first missing file or out-of-range value.
    void validate() const;

    DialogueConfig dialogue() const;
};

}  // namespace tourdesk
