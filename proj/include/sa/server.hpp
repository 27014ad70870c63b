// HTTP + WebSocket front end for live sessions.
//
//   GET /              UI assets from ui_dir, or a placeholder page
//   GET /api/scene     scene document, hash and goal names
//   GET /api/heatmap   ?goal=<name|belief>&rows=&cols=&z=&session=
//   WS  /ws            one session per connection; ?session=<id> resumes

#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "sa/engine.hpp"
#include "sa/service.hpp"

namespace sa {

struct ServerOptions {
    std::string address = "127.0.0.1";
    unsigned short port = 8080; // 0 picks a free port
    std::optional<std::filesystem::path> ui_dir;
    /// Wall-clock period between ticks; defaults to the scene's dt.
    std::optional<std::chrono::milliseconds> tick_interval;
    unsigned threads = 1;
};

class Server {
public:
    /// Binds immediately; throws std::runtime_error when the address is unusable.
    Server(std::shared_ptr<const Engine> engine, ServerOptions opts);
    ~Server();
    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    [[nodiscard]] unsigned short port() const;
    [[nodiscard]] SessionManager& sessions();

    /// Serves until stop() is called.
    void run();
    /// Serves on background threads.
    void start();
    void stop();

    struct Impl;

private:
    std::unique_ptr<Impl> impl_;
};

} // namespace sa
