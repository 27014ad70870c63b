// Live sessions: a fixed-tick control loop over an Engine, fed by client
// input messages, plus the JSON wire codecs.

#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "sa/engine.hpp"
#include "sa/sim.hpp"

namespace sa {

enum class SessionStatus { running, captured, idle };

std::string to_string(SessionStatus s);
std::optional<SessionStatus> parse_status(std::string_view name);

/// Malformed or unknown wire message.
class ProtocolError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NotFound : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ServerFrame {
    std::uint64_t tick = 0;
    Vec x;
    Vec u;
    Vec a;
    std::vector<std::pair<std::string, double>> belief; // goal order
    double confidence = 0.0;
    SessionStatus status = SessionStatus::idle;
    std::vector<std::pair<std::string, double>> values; // V_g(x) per goal

    bool operator==(const ServerFrame&) const = default;
};

/// Wire encoding; object keys keep goal order.
nlohmann::ordered_json to_json(const ServerFrame& f);
ServerFrame parse_server_frame(const std::string& text);

/// Row-major 2-D slice: values[r * cols + c] at the center of cell (r, c),
/// rows along the second axis and columns along the first.
struct Heatmap {
    std::string goal; // goal name, or "belief" for the belief-weighted map
    double x_lo = 0.0, x_hi = 0.0, y_lo = 0.0, y_hi = 0.0;
    std::optional<double> z; // slice height for 3-D scenes
    int rows = 0;
    int cols = 0;
    std::vector<double> values;

    [[nodiscard]] Vec cell_center(int row, int col) const;
    bool operator==(const Heatmap&) const = default;
};

inline constexpr const char* belief_weighted = "belief";

nlohmann::ordered_json to_json(const Heatmap& h);
Heatmap parse_heatmap(const std::string& text);

/// Hard goal values (min over targets) sampled on a rows x cols slice, or
/// Σ_g b(g) V_g when goal == "belief". Throws NotFound for an unknown goal.
Heatmap compute_heatmap(const Engine& engine, const Belief& b, const std::string& goal, int rows, int cols,
                        std::optional<double> z = std::nullopt);

struct InputMessage {
    Vec vec;
    bool capture = false;
};
struct SetMethodMessage {
    Method method = Method::policy;
};
struct ResetMessage {};
struct HeatmapRequest {
    std::string goal;
    int rows = 48;
    int cols = 48;
    std::optional<double> z;
};

using ClientMessage = std::variant<InputMessage, SetMethodMessage, ResetMessage, HeatmapRequest>;

/// Throws ProtocolError naming the offending field.
ClientMessage parse_client_message(const std::string& text);
nlohmann::ordered_json to_json(const ClientMessage& m);

struct SessionState {
    std::string id;
    Method method = Method::policy;
    Belief belief;
    RobotState x;
    std::uint64_t tick = 0;
    UserInput latest;
    SessionStatus status = SessionStatus::idle;
};

/// One robot, one user. Each call is serialized by an internal lock; the
/// model advances exactly one dt per tick() regardless of wall-clock timing.
class Session {
public:
    Session(std::string id, std::shared_ptr<const Engine> engine, Method method);

    /// Latest input is held for the following ticks and dropped after
    /// hold_ticks() ticks without a new message.
    void on_input(const Vec& raw, bool capture);
    ServerFrame tick();
    void set_method(Method m);
    void reset();

    [[nodiscard]] Heatmap heatmap(const std::string& goal, int rows, int cols, std::optional<double> z) const;
    [[nodiscard]] SessionState state() const;
    [[nodiscard]] TrialLog log() const;
    [[nodiscard]] const Engine& engine() const { return *engine_; }
    [[nodiscard]] const std::string& id() const { return id_; }
    [[nodiscard]] int hold_ticks() const { return hold_ticks_; }

private:
    ServerFrame frame(const UserInput& u, const Action& a) const;
    void start_log();

    mutable std::mutex mu_;
    std::string id_;
    std::shared_ptr<const Engine> engine_;
    int hold_ticks_;
    SessionState s_;
    int silent_ticks_ = 0;
    bool capture_pending_ = false;
    bool method_changed_ = false;
    TrialLog log_;
};

/// Owns sessions; engines are shared between sessions of the same scene.
class SessionManager {
public:
    /// Throws ValidationError for an invalid config.
    std::string create_session(const SceneConfig& cfg, std::optional<Method> method = std::nullopt);
    std::string create_session(std::shared_ptr<const Engine> engine, std::optional<Method> method = std::nullopt);
    [[nodiscard]] std::shared_ptr<Session> find(const std::string& id) const;
    bool close(const std::string& id);
    [[nodiscard]] std::size_t size() const;
    std::shared_ptr<const Engine> engine_for(const SceneConfig& cfg);

private:
    mutable std::mutex mu_;
    std::uint64_t next_id_ = 1;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    std::map<std::string, std::shared_ptr<const Engine>> engines_; // by scene hash
};

} // namespace sa
