#pragma once

#include <filesystem>
#include <json.hpp>
#include <span>
#include <string>
#include <vector>

#include "tourdesk/attractions.hpp"
#include "tourdesk/dialogue.hpp"

namespace tourdesk {

nlohmann::json to_json(const Turn& turn);
nlohmann::json to_json(const Classification& c);
nlohmann::json to_json(const QuestionnaireRecord& record);
double to_epoch_seconds(TimePoint t);
TimePoint from_epoch_seconds(double seconds);

// Append-only session logs, one JSON object per line in <dir>/<session>.jsonl.
// The first line describes the session; each turn line carries a snapshot of
// the session bookkeeping so a session can be rebuilt from its last line.
// Every append is a single write(2) of whole lines, so a killed process
// leaves at most one partial trailing line, which readers ignore.
class SessionLog {
public:
    explicit SessionLog(std::filesystem::path dir, bool sync = true);

    void append_session(const Session& session);
    // Turns are written together: a visitor turn and its reply land or fail as one.
    void append_turns(const Session& session, std::span<const Turn> turns);
    void append_questionnaire(const QuestionnaireRecord& record);

    std::filesystem::path path_for(std::string_view session_id) const;
    const std::filesystem::path& dir() const noexcept { return dir_; }

    // Complete, parseable records of one log file in order.
    static std::vector<nlohmann::json> read_records(const std::filesystem::path& file);

    // Rebuilds every logged session. Sessions whose spots are missing from the
    // dataset are skipped with a warning.
    std::vector<Session> recover(const AttractionDataset& attractions) const;

private:
    void append_lines(std::string_view session_id, const std::string& lines);

    std::filesystem::path dir_;
    bool sync_;
};

}  // namespace tourdesk
