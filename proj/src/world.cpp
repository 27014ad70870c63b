#include "sa/world.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace sa {

Workspace Workspace::unit(int dims) {
    Workspace w;
    w.dims = dims;
    w.lower = Vec::Zero(dims);
    w.upper = Vec::Ones(dims);
    return w;
}

void Workspace::validate() const {
    if (dims != 2 && dims != 3) {
        throw std::invalid_argument("workspace.dims must be 2 or 3");
    }
    if (lower.size() != dims || upper.size() != dims) {
        throw std::invalid_argument("workspace.bounds must have one [lo, hi] pair per axis");
    }
    for (int i = 0; i < dims; ++i) {
        if (!std::isfinite(lower[i]) || !std::isfinite(upper[i]) || !(lower[i] < upper[i])) {
            throw std::invalid_argument("workspace.bounds: lower must be < upper on every axis");
        }
    }
    if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("workspace.dt must be > 0");
    if (!(v_max > 0.0) || !std::isfinite(v_max)) throw std::invalid_argument("workspace.v_max must be > 0");
    if (!(capture_radius > 0.0) || !std::isfinite(capture_radius)) {
        throw std::invalid_argument("workspace.epsilon must be > 0");
    }
}

Vec Workspace::clamp(const Vec& p) const {
    Vec out(dims);
    for (int i = 0; i < dims; ++i) out[i] = std::clamp(p[i], lower[i], upper[i]);
    return out;
}

bool Workspace::contains(const Vec& p) const {
    if (p.size() != dims) return false;
    for (int i = 0; i < dims; ++i) {
        if (!(p[i] >= lower[i] && p[i] <= upper[i])) return false;
    }
    return true;
}

void Scene::validate() const {
    workspace.validate();
    if (goals.empty()) throw std::invalid_argument("goals: at least one goal is required");
    std::set<int> goal_ids;
    std::set<std::string> names;
    for (const auto& g : goals) {
        if (!goal_ids.insert(g.id).second) throw std::invalid_argument("goals: duplicate goal id");
        if (!names.insert(g.name).second) throw std::invalid_argument("goals: duplicate goal name '" + g.name + "'");
        if (g.targets.empty()) throw std::invalid_argument("goal '" + g.name + "' has no targets");
        std::set<int> target_ids;
        for (const auto& t : g.targets) {
            if (!target_ids.insert(t.id).second) {
                throw std::invalid_argument("goal '" + g.name + "': duplicate target id");
            }
            if (!workspace.contains(t.pos)) {
                throw std::invalid_argument("goal '" + g.name + "': target outside workspace bounds");
            }
        }
    }
    if (!workspace.contains(start.pos)) throw std::invalid_argument("start: outside workspace bounds");
}

int Scene::find_goal(const std::string& name) const {
    for (std::size_t i = 0; i < goals.size(); ++i) {
        if (goals[i].name == name) return static_cast<int>(i);
    }
    return -1;
}

Vec clamp_norm(const Vec& v, double max_norm) {
    const double n = v.norm();
    if (n > max_norm && n > 0.0) return v * (max_norm / n);
    return v;
}

RobotState transition(const RobotState& x, const Action& a, const Workspace& w) {
    return {w.clamp(x.pos + a.vel * w.dt)};
}

Action direct_teleop(const UserInput& u, const Workspace& w) {
    return {clamp_norm(u.vec * w.v_max, w.v_max)};
}

double distance_to_target(const RobotState& x, const Target& target) {
    return (x.pos - target.pos).norm();
}

std::vector<UserInput> discretize_inputs(int dims, bool diagonals) {
    std::vector<UserInput> out;
    out.push_back(UserInput::zero(dims));
    for (int i = 0; i < dims; ++i) {
        for (double s : {1.0, -1.0}) {
            Vec v = Vec::Zero(dims);
            v[i] = s;
            out.push_back({v});
        }
    }
    if (!diagonals) return out;

    // Every sign pattern in {-1,0,1}^n with at least two nonzero entries.
    int total = 1;
    for (int i = 0; i < dims; ++i) total *= 3;
    for (int code = 0; code < total; ++code) {
        Vec v(dims);
        int c = code;
        int nonzero = 0;
        for (int i = 0; i < dims; ++i) {
            v[i] = static_cast<double>(c % 3) - 1.0;
            c /= 3;
            if (v[i] != 0.0) ++nonzero;
        }
        if (nonzero >= 2) out.push_back({v / v.norm()});
    }
    return out;
}

} // namespace sa
