#include "sa/service.hpp"

#include <algorithm>
#include <cmath>

namespace sa {

using ojson = nlohmann::ordered_json;

std::string to_string(SessionStatus s) {
    switch (s) {
    case SessionStatus::running: return "running";
    case SessionStatus::captured: return "captured";
    case SessionStatus::idle: return "idle";
    }
    return "unknown";
}

std::optional<SessionStatus> parse_status(std::string_view name) {
    if (name == "running") return SessionStatus::running;
    if (name == "captured") return SessionStatus::captured;
    if (name == "idle") return SessionStatus::idle;
    return std::nullopt;
}

namespace {

ojson vec_json(const Vec& v) {
    ojson a = ojson::array();
    for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

ojson parse_text(const std::string& text) {
    try {
        return ojson::parse(text);
    } catch (const ojson::parse_error& e) {
        throw ProtocolError(std::string("not valid JSON: ") + e.what());
    }
}

const ojson& member(const ojson& j, const char* key) {
    if (!j.is_object() || !j.contains(key)) throw ProtocolError(std::string("missing field '") + key + "'");
    return j.at(key);
}

double number(const ojson& j, const char* key) {
    const ojson& v = member(j, key);
    if (!v.is_number()) throw ProtocolError(std::string("field '") + key + "' must be a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ProtocolError(std::string("field '") + key + "' must be finite");
    return d;
}

Vec vec_field(const ojson& j, const char* key, int min_dims = 1, int max_dims = 3) {
    const ojson& v = member(j, key);
    if (!v.is_array() || static_cast<int>(v.size()) < min_dims || static_cast<int>(v.size()) > max_dims) {
        throw ProtocolError(std::string("field '") + key + "' must be an array of " + std::to_string(min_dims) + " to " +
                            std::to_string(max_dims) + " numbers");
    }
    Vec out(static_cast<int>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_number()) throw ProtocolError(std::string("field '") + key + "' must contain numbers");
        out[static_cast<int>(i)] = v[i].get<double>();
    }
    return out;
}

std::vector<std::pair<std::string, double>> named_values(const ojson& j, const char* key) {
    const ojson& v = member(j, key);
    if (!v.is_object()) throw ProtocolError(std::string("field '") + key + "' must be an object");
    std::vector<std::pair<std::string, double>> out;
    for (auto it = v.begin(); it != v.end(); ++it) {
        if (!it.value().is_number()) throw ProtocolError(std::string("field '") + key + "' must map names to numbers");
        out.emplace_back(it.key(), it.value().get<double>());
    }
    return out;
}

void expect_type(const ojson& j, const char* type) {
    const ojson& t = member(j, "type");
    if (!t.is_string() || t.get<std::string>() != type) {
        throw ProtocolError(std::string("expected a message of type '") + type + "'");
    }
}

} // namespace

ojson to_json(const ServerFrame& f) {
    ojson belief = ojson::object();
    for (const auto& [name, p] : f.belief) belief[name] = p;
    ojson values = ojson::object();
    for (const auto& [name, v] : f.values) values[name] = v;
    return ojson{{"type", "frame"},       {"tick", f.tick},     {"x", vec_json(f.x)},
                 {"u", vec_json(f.u)},    {"a", vec_json(f.a)}, {"belief", belief},
                 {"confidence", f.confidence}, {"status", to_string(f.status)}, {"values", values}};
}

ServerFrame parse_server_frame(const std::string& text) {
    const ojson j = parse_text(text);
    expect_type(j, "frame");
    ServerFrame f;
    const ojson& tick = member(j, "tick");
    if (!tick.is_number_unsigned()) throw ProtocolError("field 'tick' must be a non-negative integer");
    f.tick = tick.get<std::uint64_t>();
    f.x = vec_field(j, "x");
    f.u = vec_field(j, "u");
    f.a = vec_field(j, "a");
    f.belief = named_values(j, "belief");
    f.confidence = number(j, "confidence");
    const ojson& st = member(j, "status");
    const auto status = st.is_string() ? parse_status(st.get<std::string>()) : std::nullopt;
    if (!status) throw ProtocolError("field 'status' must be running, captured or idle");
    f.status = *status;
    f.values = named_values(j, "values");
    return f;
}

Vec Heatmap::cell_center(int row, int col) const {
    Vec p(z ? 3 : 2);
    p[0] = x_lo + (col + 0.5) * (x_hi - x_lo) / cols;
    p[1] = y_lo + (row + 0.5) * (y_hi - y_lo) / rows;
    if (z) p[2] = *z;
    return p;
}

ojson to_json(const Heatmap& h) {
    ojson j{{"type", "heatmap"},
            {"goal", h.goal},
            {"bounds", ojson::array({ojson::array({h.x_lo, h.x_hi}), ojson::array({h.y_lo, h.y_hi})})},
            {"rows", h.rows},
            {"cols", h.cols},
            {"values", h.values}};
    if (h.z) j["z"] = *h.z;
    return j;
}

Heatmap parse_heatmap(const std::string& text) {
    const ojson j = parse_text(text);
    expect_type(j, "heatmap");
    Heatmap h;
    const ojson& goal = member(j, "goal");
    if (!goal.is_string()) throw ProtocolError("field 'goal' must be a string");
    h.goal = goal.get<std::string>();
    const ojson& b = member(j, "bounds");
    if (!b.is_array() || b.size() != 2 || !b[0].is_array() || b[0].size() != 2 || !b[1].is_array() ||
        b[1].size() != 2) {
        throw ProtocolError("field 'bounds' must be [[x_lo, x_hi], [y_lo, y_hi]]");
    }
    h.x_lo = b[0][0].get<double>();
    h.x_hi = b[0][1].get<double>();
    h.y_lo = b[1][0].get<double>();
    h.y_hi = b[1][1].get<double>();
    h.rows = static_cast<int>(number(j, "rows"));
    h.cols = static_cast<int>(number(j, "cols"));
    if (j.contains("z")) h.z = number(j, "z");
    const ojson& v = member(j, "values");
    if (!v.is_array() || v.size() != static_cast<std::size_t>(h.rows) * static_cast<std::size_t>(h.cols)) {
        throw ProtocolError("field 'values' must hold rows * cols numbers");
    }
    h.values = v.get<std::vector<double>>();
    return h;
}

Heatmap compute_heatmap(const Engine& engine, const Belief& b, const std::string& goal, int rows, int cols,
                        std::optional<double> z) {
    const Scene& scene = engine.scene();
    const Workspace& w = scene.workspace;
    std::optional<std::size_t> index;
    if (goal != belief_weighted) {
        const int g = scene.find_goal(goal);
        if (g < 0) throw NotFound("unknown goal '" + goal + "'");
        index = static_cast<std::size_t>(g);
    }
    if (rows < 1 || cols < 1 || rows > 1024 || cols > 1024) {
        throw std::invalid_argument("heatmap rows and cols must lie in [1, 1024]");
    }

    Heatmap h;
    h.goal = goal;
    h.x_lo = w.lower[0];
    h.x_hi = w.upper[0];
    h.y_lo = w.lower[1];
    h.y_hi = w.upper[1];
    if (w.dims == 3) h.z = std::clamp(z.value_or(0.5 * (w.lower[2] + w.upper[2])), w.lower[2], w.upper[2]);
    h.rows = rows;
    h.cols = cols;
    h.values.resize(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols));
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            const RobotState x{h.cell_center(r, c)};
            double v = 0.0;
            if (index) {
                v = engine.assistant().goal_value(x, *index);
            } else {
                for (std::size_t g = 0; g < scene.goals.size(); ++g) {
                    if (b[g] != 0.0) v += b[g] * engine.assistant().goal_value(x, g);
                }
            }
            h.values[static_cast<std::size_t>(r) * static_cast<std::size_t>(cols) + static_cast<std::size_t>(c)] = v;
        }
    }
    return h;
}

ClientMessage parse_client_message(const std::string& text) {
    const ojson j = parse_text(text);
    if (!j.is_object()) throw ProtocolError("expected a JSON object");
    const ojson& t = member(j, "type");
    if (!t.is_string()) throw ProtocolError("field 'type' must be a string");
    const std::string type = t.get<std::string>();
    if (type == "input") {
        InputMessage m;
        m.vec = vec_field(j, "vec");
        if (j.contains("capture")) {
            if (!j.at("capture").is_boolean()) throw ProtocolError("field 'capture' must be a boolean");
            m.capture = j.at("capture").get<bool>();
        }
        return m;
    }
    if (type == "set_method") {
        const ojson& name = member(j, "method");
        const auto m = name.is_string() ? parse_method(name.get<std::string>()) : std::nullopt;
        if (!m) throw ProtocolError("field 'method' must be policy, blend or direct");
        return SetMethodMessage{*m};
    }
    if (type == "reset") return ResetMessage{};
    if (type == "heatmap") {
        HeatmapRequest r;
        const ojson& goal = member(j, "goal");
        if (!goal.is_string()) throw ProtocolError("field 'goal' must be a string");
        r.goal = goal.get<std::string>();
        if (j.contains("rows")) r.rows = static_cast<int>(number(j, "rows"));
        if (j.contains("cols")) r.cols = static_cast<int>(number(j, "cols"));
        if (j.contains("z")) r.z = number(j, "z");
        return r;
    }
    throw ProtocolError("unknown message type '" + type + "'");
}

ojson to_json(const ClientMessage& m) {
    return std::visit(
        [](const auto& msg) -> ojson {
            using T = std::decay_t<decltype(msg)>;
            if constexpr (std::is_same_v<T, InputMessage>) {
                return {{"type", "input"}, {"vec", vec_json(msg.vec)}, {"capture", msg.capture}};
            } else if constexpr (std::is_same_v<T, SetMethodMessage>) {
                return {{"type", "set_method"}, {"method", to_string(msg.method)}};
            } else if constexpr (std::is_same_v<T, ResetMessage>) {
                return {{"type", "reset"}};
            } else {
                ojson j{{"type", "heatmap"}, {"goal", msg.goal}, {"rows", msg.rows}, {"cols", msg.cols}};
                if (msg.z) j["z"] = *msg.z;
                return j;
            }
        },
        m);
}

Session::Session(std::string id, std::shared_ptr<const Engine> engine, Method method)
    : id_(std::move(id)), engine_(std::move(engine)) {
    const double dt = engine_->workspace().dt;
    hold_ticks_ = std::max(1, static_cast<int>(std::lround(0.5 / dt)));
    s_.id = id_;
    s_.method = method;
    reset();
}

void Session::start_log() {
    log_ = TrialLog{};
    log_.scene_hash = engine_->scene_hash();
    for (const auto& g : engine_->scene().goals) log_.goals.push_back(g.name);
    log_.method = s_.method;
    log_.user = "wire";
    log_.dt = engine_->workspace().dt;
    log_.v_max = engine_->workspace().v_max;
    log_.dims = engine_->workspace().dims;
}

void Session::reset() {
    std::lock_guard lock(mu_);
    s_.belief = engine_->predictor().prior();
    s_.x = engine_->scene().start;
    s_.tick = 0;
    s_.latest = UserInput::zero(engine_->workspace().dims);
    s_.status = SessionStatus::idle;
    silent_ticks_ = hold_ticks_;
    capture_pending_ = false;
    method_changed_ = false;
    start_log();
}

void Session::on_input(const Vec& raw, bool capture) {
    std::lock_guard lock(mu_);
    s_.latest = sanitize_input(raw, engine_->workspace().dims);
    silent_ticks_ = 0;
    if (capture) capture_pending_ = true;
}

void Session::set_method(Method m) {
    std::lock_guard lock(mu_);
    if (m == s_.method) return;
    s_.method = m;
    method_changed_ = true;
}

ServerFrame Session::frame(const UserInput& u, const Action& a) const {
    const Engine& e = *engine_;
    ServerFrame f;
    f.tick = s_.tick;
    f.x = s_.x.pos;
    f.u = u.vec;
    f.a = a.vel;
    for (std::size_t g = 0; g < e.scene().goals.size(); ++g) {
        f.belief.emplace_back(e.scene().goals[g].name, s_.belief[g]);
        f.values.emplace_back(e.scene().goals[g].name, e.assistant().goal_value(s_.x, g));
    }
    f.confidence = e.assistant().blend_confidence(s_.belief, s_.x);
    f.status = s_.status;
    return f;
}

ServerFrame Session::tick() {
    std::lock_guard lock(mu_);
    const int dims = engine_->workspace().dims;
    if (s_.status == SessionStatus::captured) return frame(UserInput::zero(dims), Action::zero(dims));

    if (capture_pending_) {
        capture_pending_ = false;
        if (const auto hit = engine_->captured(s_.x)) {
            s_.status = SessionStatus::captured;
            const Goal& g = engine_->scene().goals[hit->first];
            log_.outcome = {true, g.name, g.targets[hit->second].id};
            return frame(UserInput::zero(dims), Action::zero(dims));
        }
    }

    const bool held = silent_ticks_ < hold_ticks_;
    const UserInput u = held ? s_.latest : UserInput::zero(dims);
    if (silent_ticks_ < hold_ticks_) ++silent_ticks_;

    const StepResult r = control_step(*engine_, s_.method, s_.belief, s_.x, u);
    Frame lf{static_cast<int>(log_.frames.size()), static_cast<double>(log_.frames.size()) * log_.dt, s_.x.pos,
             u.vec, r.action.vel, r.belief.probs, std::nullopt};
    if (method_changed_) {
        lf.method = s_.method;
        method_changed_ = false;
    }
    log_.frames.push_back(std::move(lf));

    s_.belief = r.belief;
    s_.x = r.next;
    ++s_.tick;
    s_.status = held ? SessionStatus::running : SessionStatus::idle;
    return frame(u, r.action);
}

Heatmap Session::heatmap(const std::string& goal, int rows, int cols, std::optional<double> z) const {
    Belief b;
    {
        std::lock_guard lock(mu_);
        b = s_.belief;
    }
    return compute_heatmap(*engine_, b, goal, rows, cols, z);
}

SessionState Session::state() const {
    std::lock_guard lock(mu_);
    return s_;
}

TrialLog Session::log() const {
    std::lock_guard lock(mu_);
    TrialLog out = log_;
    out.max_steps = static_cast<int>(out.frames.size());
    out.metrics = compute_metrics(out.frames, out.dt, out.v_max);
    return out;
}

std::shared_ptr<const Engine> SessionManager::engine_for(const SceneConfig& cfg) {
    const std::string hash = scene_hash(cfg);
    {
        std::lock_guard lock(mu_);
        if (auto it = engines_.find(hash); it != engines_.end()) return it->second;
    }
    std::shared_ptr<const Engine> engine;
    try {
        engine = Engine::build(cfg);
    } catch (const std::invalid_argument& e) {
        throw ValidationError(std::vector<FieldError>{{"scene", e.what()}});
    }
    std::lock_guard lock(mu_);
    return engines_.emplace(hash, std::move(engine)).first->second;
}

std::string SessionManager::create_session(const SceneConfig& cfg, std::optional<Method> method) {
    return create_session(engine_for(cfg), method);
}

std::string SessionManager::create_session(std::shared_ptr<const Engine> engine, std::optional<Method> method) {
    const Method m = method.value_or(engine->config().assist.method);
    std::lock_guard lock(mu_);
    engines_.emplace(engine->scene_hash(), engine);
    std::string id = "s" + std::to_string(next_id_++);
    sessions_.emplace(id, std::make_shared<Session>(id, std::move(engine), m));
    return id;
}

std::shared_ptr<Session> SessionManager::find(const std::string& id) const {
    std::lock_guard lock(mu_);
    auto it = sessions_.find(id);
    return it == sessions_.end() ? nullptr : it->second;
}

bool SessionManager::close(const std::string& id) {
    std::lock_guard lock(mu_);
    return sessions_.erase(id) > 0;
}

std::size_t SessionManager::size() const {
    std::lock_guard lock(mu_);
    return sessions_.size();
}

} // namespace sa
