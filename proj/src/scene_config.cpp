#include "sa/scene_config.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace sa {

namespace {

std::string join_errors(const std::vector<FieldError>& errors) {
    std::ostringstream os;
    os << "invalid scene config:";
    for (const auto& e : errors) os << "\n  " << e.field << ": " << e.message;
    return os.str();
}

using json = nlohmann::json;

// Accumulates field errors while walking the document.
class Checker {
public:
    void fail(std::string field, std::string message) { errors_.push_back({std::move(field), std::move(message)}); }
    [[nodiscard]] bool ok() const { return errors_.empty(); }
    [[nodiscard]] const std::vector<FieldError>& errors() const { return errors_; }

    void reject_unknown(const json& obj, const std::string& path, std::initializer_list<const char*> known) {
        std::set<std::string> allowed(known.begin(), known.end());
        for (auto it = obj.begin(); it != obj.end(); ++it) {
            if (!allowed.contains(it.key())) fail(path.empty() ? it.key() : path + "." + it.key(), "unknown key");
        }
    }

    bool object(const json& j, const std::string& path) {
        if (!j.is_object()) {
            fail(path, "expected an object");
            return false;
        }
        return true;
    }

    template <class T>
    void number(const json& obj, const char* key, const std::string& path, T& out, bool required = false) {
        const std::string field = path.empty() ? key : path + "." + key;
        if (!obj.contains(key)) {
            if (required) fail(field, "missing");
            return;
        }
        const json& v = obj.at(key);
        if (!v.is_number()) {
            fail(field, "expected a number");
            return;
        }
        if constexpr (std::is_integral_v<T>) {
            if (!v.is_number_integer()) {
                fail(field, "expected an integer");
                return;
            }
        }
        const T value = v.get<T>();
        if constexpr (std::is_floating_point_v<T>) {
            if (!std::isfinite(value)) {
                fail(field, "must be finite");
                return;
            }
        }
        out = value;
    }

    bool vec(const json& v, const std::string& field, int dims, Vec& out) {
        if (!v.is_array()) {
            fail(field, "expected an array of coordinates");
            return false;
        }
        if (dims > 0 && static_cast<int>(v.size()) != dims) {
            fail(field, "expected " + std::to_string(dims) + " coordinates");
            return false;
        }
        if (v.size() < 2 || v.size() > 3) {
            fail(field, "expected 2 or 3 coordinates");
            return false;
        }
        Vec p(static_cast<int>(v.size()));
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_number() || !std::isfinite(v[i].get<double>())) {
                fail(field, "coordinates must be finite numbers");
                return false;
            }
            p[static_cast<int>(i)] = v[i].get<double>();
        }
        out = p;
        return true;
    }

private:
    std::vector<FieldError> errors_;
};

void parse_workspace(const json& doc, Checker& c, Workspace& w) {
    if (!doc.contains("workspace")) {
        c.fail("workspace", "missing");
        return;
    }
    const json& j = doc.at("workspace");
    if (!c.object(j, "workspace")) return;
    c.reject_unknown(j, "workspace", {"dims", "bounds", "dt", "v_max", "epsilon"});
    c.number(j, "dims", "workspace", w.dims, true);
    if (w.dims != 2 && w.dims != 3) {
        c.fail("workspace.dims", "must be 2 or 3");
        return;
    }
    w.lower = Vec::Zero(w.dims);
    w.upper = Vec::Ones(w.dims);
    if (j.contains("bounds")) {
        const json& b = j.at("bounds");
        if (!b.is_array() || static_cast<int>(b.size()) != w.dims) {
            c.fail("workspace.bounds", "expected one [lower, upper] pair per axis");
        } else {
            for (int i = 0; i < w.dims; ++i) {
                const json& pair = b[static_cast<std::size_t>(i)];
                const std::string field = "workspace.bounds[" + std::to_string(i) + "]";
                if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number() || !pair[1].is_number()) {
                    c.fail(field, "expected [lower, upper]");
                    continue;
                }
                w.lower[i] = pair[0].get<double>();
                w.upper[i] = pair[1].get<double>();
                if (!(w.lower[i] < w.upper[i])) c.fail(field, "lower must be < upper");
            }
        }
    }
    c.number(j, "dt", "workspace", w.dt);
    c.number(j, "v_max", "workspace", w.v_max);
    c.number(j, "epsilon", "workspace", w.capture_radius);
    if (!(w.dt > 0.0)) c.fail("workspace.dt", "must be > 0");
    if (!(w.v_max > 0.0)) c.fail("workspace.v_max", "must be > 0");
    if (!(w.capture_radius > 0.0)) c.fail("workspace.epsilon", "must be > 0");
}

void parse_goals(const json& doc, Checker& c, const Workspace& w, bool workspace_ok, std::vector<Goal>& goals) {
    if (!doc.contains("goals")) {
        c.fail("goals", "missing");
        return;
    }
    const json& j = doc.at("goals");
    if (!j.is_array()) {
        c.fail("goals", "expected an array");
        return;
    }
    if (j.empty()) c.fail("goals", "at least one goal is required");
    std::set<std::string> names;
    for (std::size_t gi = 0; gi < j.size(); ++gi) {
        const std::string path = "goals[" + std::to_string(gi) + "]";
        const json& gj = j[gi];
        if (!c.object(gj, path)) continue;
        c.reject_unknown(gj, path, {"name", "targets"});
        Goal g;
        g.id = static_cast<int>(gi);
        if (!gj.contains("name") || !gj.at("name").is_string() || gj.at("name").get<std::string>().empty()) {
            c.fail(path + ".name", "missing or not a non-empty string");
        } else {
            g.name = gj.at("name").get<std::string>();
            if (!names.insert(g.name).second) c.fail(path + ".name", "duplicate goal name '" + g.name + "'");
        }
        if (!gj.contains("targets")) {
            c.fail(path + ".targets", "missing");
        } else if (!gj.at("targets").is_array() || gj.at("targets").empty()) {
            c.fail(path + ".targets", "expected a non-empty array of coordinates");
        } else {
            const json& tj = gj.at("targets");
            for (std::size_t ti = 0; ti < tj.size(); ++ti) {
                const std::string tpath = path + ".targets[" + std::to_string(ti) + "]";
                Target t;
                t.id = static_cast<int>(ti);
                if (!c.vec(tj[ti], tpath, workspace_ok ? w.dims : 0, t.pos)) continue;
                if (workspace_ok && !w.contains(t.pos)) c.fail(tpath, "outside workspace bounds");
                g.targets.push_back(t);
            }
        }
        goals.push_back(std::move(g));
    }
}

const char* mode_name(PredictorMode m) { return m == PredictorMode::exact_soft ? "exact_soft" : "approx_hard"; }

} // namespace

ValidationError::ValidationError(std::vector<FieldError> errors)
    : std::runtime_error(join_errors(errors)), errors_(std::move(errors)) {}

SceneConfig parse_scene_config(const json& doc) {
    Checker c;
    SceneConfig cfg;
    if (!doc.is_object()) {
        c.fail("(root)", "expected an object");
        throw ValidationError(c.errors());
    }
    c.reject_unknown(doc, "", {"workspace", "cost", "goals", "start", "predictor", "assist", "grid", "inputs"});

    Workspace& w = cfg.scene.workspace;
    parse_workspace(doc, c, w);
    const bool workspace_ok = c.ok();

    parse_goals(doc, c, w, workspace_ok, cfg.scene.goals);

    if (!doc.contains("start")) {
        c.fail("start", "missing");
    } else if (c.vec(doc.at("start"), "start", workspace_ok ? w.dims : 0, cfg.scene.start.pos)) {
        if (workspace_ok && !w.contains(cfg.scene.start.pos)) c.fail("start", "outside workspace bounds");
    }

    if (doc.contains("cost") && c.object(doc.at("cost"), "cost")) {
        const json& j = doc.at("cost");
        c.reject_unknown(j, "cost", {"alpha", "delta", "deviation_weight"});
        c.number(j, "alpha", "cost", cfg.cost.alpha);
        c.number(j, "delta", "cost", cfg.cost.delta);
        c.number(j, "deviation_weight", "cost", cfg.cost.deviation_weight);
        if (!(cfg.cost.alpha > 0.0)) c.fail("cost.alpha", "must be > 0");
        if (!(cfg.cost.delta > 0.0)) c.fail("cost.delta", "must be > 0");
        if (!(cfg.cost.deviation_weight >= 0.0)) c.fail("cost.deviation_weight", "must be >= 0");
    }

    if (doc.contains("predictor") && c.object(doc.at("predictor"), "predictor")) {
        const json& j = doc.at("predictor");
        c.reject_unknown(j, "predictor", {"mode", "floor", "dead_zone"});
        if (j.contains("mode")) {
            const json& m = j.at("mode");
            if (m == "exact_soft") cfg.predictor.mode = PredictorMode::exact_soft;
            else if (m == "approx_hard") cfg.predictor.mode = PredictorMode::approx_hard;
            else c.fail("predictor.mode", "expected \"exact_soft\" or \"approx_hard\"");
        }
        c.number(j, "floor", "predictor", cfg.predictor.likelihood_floor);
        c.number(j, "dead_zone", "predictor", cfg.predictor.dead_zone);
        if (!(cfg.predictor.likelihood_floor >= 0.0 && cfg.predictor.likelihood_floor <= 0.1)) {
            c.fail("predictor.floor", "must lie in [0, 0.1]");
        }
        if (!(cfg.predictor.dead_zone >= 0.0 && cfg.predictor.dead_zone < 1.0)) {
            c.fail("predictor.dead_zone", "must lie in [0, 1)");
        }
    }

    if (doc.contains("assist") && c.object(doc.at("assist"), "assist")) {
        const json& j = doc.at("assist");
        c.reject_unknown(j, "assist", {"method", "D", "cap", "gradient_step", "candidates"});
        if (j.contains("method")) {
            const auto m = j.at("method").is_string() ? parse_method(j.at("method").get<std::string>()) : std::nullopt;
            if (m) cfg.assist.method = *m;
            else c.fail("assist.method", "expected \"policy\", \"blend\" or \"direct\"");
        }
        c.number(j, "D", "assist", cfg.assist.blend_distance);
        c.number(j, "cap", "assist", cfg.assist.blend_cap);
        c.number(j, "gradient_step", "assist", cfg.assist.gradient_step);
        c.number(j, "candidates", "assist", cfg.assist.candidate_set_size);
        if (!(cfg.assist.blend_distance > 0.0)) c.fail("assist.D", "must be > 0");
        if (!(cfg.assist.blend_cap >= 0.0 && cfg.assist.blend_cap <= 1.0)) c.fail("assist.cap", "must lie in [0, 1]");
        if (!(cfg.assist.gradient_step > 0.0)) c.fail("assist.gradient_step", "must be > 0");
        if (cfg.assist.candidate_set_size < 1) c.fail("assist.candidates", "must be >= 1");
    }

    cfg.grid = GridSpec::defaults(workspace_ok ? w.dims : 2);
    if (doc.contains("grid") && c.object(doc.at("grid"), "grid")) {
        const json& j = doc.at("grid");
        c.reject_unknown(j, "grid", {"resolution"});
        int res = cfg.grid.cells[0];
        c.number(j, "resolution", "grid", res);
        if (res < 2 || res > 512) c.fail("grid.resolution", "must lie in [2, 512]");
        else if (workspace_ok) cfg.grid = GridSpec::uniform(w.dims, res);
    }

    if (doc.contains("inputs") && c.object(doc.at("inputs"), "inputs")) {
        const json& j = doc.at("inputs");
        c.reject_unknown(j, "inputs", {"diagonals"});
        if (j.contains("diagonals")) {
            if (j.at("diagonals").is_boolean()) cfg.diagonals = j.at("diagonals").get<bool>();
            else c.fail("inputs.diagonals", "expected a boolean");
        }
    }

    if (!c.ok()) throw ValidationError(c.errors());
    return cfg;
}

SceneConfig load_scene_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError({{path.string(), "cannot open file"}});
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError({{path.string(), std::string("not valid JSON: ") + e.what()}});
    }
    return parse_scene_config(doc);
}

json to_json(const SceneConfig& cfg) {
    const Workspace& w = cfg.scene.workspace;
    auto coords = [](const Vec& v) {
        json a = json::array();
        for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
        return a;
    };
    json bounds = json::array();
    for (int i = 0; i < w.dims; ++i) bounds.push_back({w.lower[i], w.upper[i]});
    json goals = json::array();
    for (const auto& g : cfg.scene.goals) {
        json targets = json::array();
        for (const auto& t : g.targets) targets.push_back(coords(t.pos));
        goals.push_back({{"name", g.name}, {"targets", targets}});
    }
    return {
        {"workspace", {{"dims", w.dims}, {"bounds", bounds}, {"dt", w.dt}, {"v_max", w.v_max}, {"epsilon", w.capture_radius}}},
        {"cost", {{"alpha", cfg.cost.alpha}, {"delta", cfg.cost.delta}, {"deviation_weight", cfg.cost.deviation_weight}}},
        {"goals", goals},
        {"start", coords(cfg.scene.start.pos)},
        {"predictor", {{"mode", mode_name(cfg.predictor.mode)}, {"floor", cfg.predictor.likelihood_floor}, {"dead_zone", cfg.predictor.dead_zone}}},
        {"assist", {{"method", to_string(cfg.assist.method)}, {"D", cfg.assist.blend_distance}, {"cap", cfg.assist.blend_cap},
                    {"gradient_step", cfg.assist.gradient_step}, {"candidates", cfg.assist.candidate_set_size}}},
        {"grid", {{"resolution", cfg.grid.cells[0]}}},
        {"inputs", {{"diagonals", cfg.diagonals}}},
    };
}

std::string scene_hash(const SceneConfig& cfg) {
    const std::string text = to_json(cfg).dump();
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace sa
