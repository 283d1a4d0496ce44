// tourdesk: terminal REPL and HTTP server for the tourist-recommendation dialogue.
#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <csignal>
#include <cstdio>
#include <iostream>
#include <string>
#include <thread>
#include <unistd.h>

#include "tourdesk/config.hpp"
#include "tourdesk/error.hpp"
#include "tourdesk/service.hpp"

namespace {

using namespace tourdesk;

void print_reply(const Reply& r) {
    std::cout << "robot> " << r.text << "\n";
    std::cout << "[state: " << to_string(r.new_state) << "]\n";
    std::cout << "[expression: " << r.expression_event << "]\n";
    if (r.debug) {
        std::cout << "[category: " << r.debug->category << " score: " << r.debug->score
                  << " method: " << to_string(r.debug->method) << " via: " << r.debug->resolved_by << "]\n";
    }
    std::cout.flush();
}

bool read_line(std::string& line, bool interactive, const char* prompt) {
    if (interactive) {
        std::cout << prompt << std::flush;
    }
    return static_cast<bool>(std::getline(std::cin, line));
}

std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

// Asks for every item and the chosen spot. EOF or a blank answer skips the
// questionnaire without recording anything.
void run_questionnaire(SessionManager& sessions, const std::string& id) {
    const Session s = sessions.snapshot(id);
    std::cout << "Questionnaire: rate each item from 1 (low) to 5 (high). Press Enter on a blank line to skip.\n";
    QuestionnaireAnswers answers;
    std::string line;
    for (const auto& item : questionnaire_items()) {
        for (;;) {
            std::cout << "  " << item.label << " [1-5]: " << std::flush;
            if (!read_line(line, false, "") || trim(line).empty()) {
                std::cout << "\nQuestionnaire skipped.\n";
                return;
            }
            try {
                const int v = std::stoi(trim(line));
                if (v >= 1 && v <= 5) {
                    answers.ratings[std::string(item.id)] = v;
                    break;
                }
            } catch (const std::exception&) {
            }
            std::cout << "  please enter a number from 1 to 5\n";
        }
    }
    std::cout << "  Which spot did you choose? (" << s.spot_a.id << " or " << s.spot_b.id << "): " << std::flush;
    if (!read_line(line, false, "") || trim(line).empty()) {
        std::cout << "\nQuestionnaire skipped.\n";
        return;
    }
    answers.chosen_spot = trim(line);
    try {
        const QuestionnaireRecord rec = sessions.questionnaire(id, answers);
        std::cout << "Recorded. Impression total " << rec.impression_total << ". "
                  << (rec.chose_recommended ? "You chose the recommended spot." : "You chose the other spot.")
                  << "\n";
    } catch (const Error& e) {
        std::cout << "Questionnaire not recorded: " << e.what() << "\n";
    }
}

int run_repl(const std::string& config_path, const std::string& spots, const std::string& recommend,
             const std::string& log_dir) {
    ServiceConfig cfg = ServiceConfig::load(config_path);
    if (!log_dir.empty()) cfg.log_dir = log_dir;
    const auto comma = spots.find(',');
    if (comma == std::string::npos) throw ValidationError("--spots expects two ids separated by a comma");
    const std::string a = trim(spots.substr(0, comma));
    const std::string b = trim(spots.substr(comma + 1));

    auto runtime = Runtime::load(std::move(cfg));
    SessionManager sessions(*runtime);
    const CreatedSession created =
        sessions.create(a, b, recommend.empty() ? std::nullopt : std::optional<std::string>(recommend));
    std::cout << "[session: " << created.session_id << "]\n";
    print_reply(created.greeting);

    const bool interactive = ::isatty(STDIN_FILENO) != 0;
    std::string line;
    while (read_line(line, interactive, "you> ")) {
        line = trim(line);
        if (line.empty()) continue;
        if (line == ":help") {
            std::cout << "commands: :quit  :wrapup  :transcript  :help\n";
            continue;
        }
        if (line == ":transcript") {
            for (const Turn& t : sessions.transcript(created.session_id)) {
                std::cout << "  " << to_string(t.speaker) << ": " << t.text << "\n";
            }
            continue;
        }
        if (line == ":wrapup") {
            if (auto r = sessions.expire(created.session_id)) {
                print_reply(*r);
            } else {
                std::cout << "[already wrapping up]\n";
            }
            continue;
        }
        if (line == ":quit") break;
        const Reply r = sessions.utterance(created.session_id, line);
        print_reply(r);
        if (r.new_state == DialogueState::Closed) {
            run_questionnaire(sessions, created.session_id);
            return 0;
        }
    }
    if (sessions.snapshot(created.session_id).state != DialogueState::Closed) {
        print_reply(sessions.close(created.session_id));
    }
    run_questionnaire(sessions, created.session_id);
    return 0;
}

int run_serve(const std::string& config_path, const std::string& listen, const std::string& log_dir) {
    ServiceConfig cfg = ServiceConfig::load(config_path);
    if (!log_dir.empty()) cfg.log_dir = log_dir;
    if (!listen.empty()) {
        const auto colon = listen.rfind(':');
        if (colon == std::string::npos) throw ConfigError("--listen expects host:port, got " + listen);
        cfg.listen_host = listen.substr(0, colon);
        cfg.listen_port = std::stoi(listen.substr(colon + 1));
    }

    // Signals are taken by a dedicated thread so the server can stop cleanly.
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    auto runtime = Runtime::load(cfg);
    SessionManager sessions(*runtime);
    const std::size_t recovered = sessions.recover();
    sessions.start_deadline_sweeper();

    HttpService http(sessions);
    const int port = http.bind(cfg.listen_host, cfg.listen_port);
    if (port <= 0) throw ConfigError("cannot bind " + cfg.listen_host + ":" + std::to_string(cfg.listen_port));
    std::cout << "listening on " << cfg.listen_host << ":" << port << " (" << recovered << " sessions recovered)"
              << std::endl;

    std::thread waiter([&] {
        int sig = 0;
        sigwait(&signals, &sig);
        spdlog::info("signal {}, shutting down", sig);
        http.stop();
    });
    waiter.detach();
    http.serve();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    spdlog::set_default_logger(spdlog::stderr_color_mt("tourdesk"));

    CLI::App app{"Tourist recommendation dialogue desk"};
    app.require_subcommand(1);

    std::string config_path;
    std::string spots;
    std::string recommend;
    std::string listen;
    std::string log_dir;

    auto* repl = app.add_subcommand("repl", "Talk to the robot in the terminal");
    repl->add_option("--config", config_path, "Service config file")->required();
    repl->add_option("--spots", spots, "Two attraction ids, comma separated")->required();
    repl->add_option("--recommend", recommend, "Attraction id to recommend");
    repl->add_option("--log-dir", log_dir, "Override the session log directory");

    auto* serve = app.add_subcommand("serve", "Run the HTTP API");
    serve->add_option("--config", config_path, "Service config file")->required();
    serve->add_option("--listen", listen, "host:port, overrides the config");
    serve->add_option("--log-dir", log_dir, "Override the session log directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (repl->parsed()) return run_repl(config_path, spots, recommend, log_dir);
        return run_serve(config_path, listen, log_dir);
    } catch (const tourdesk::Error& e) {
        std::cerr << "tourdesk: " << e.what() << std::endl;
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "tourdesk: " << e.what() << std::endl;
        return 1;
    }
}
