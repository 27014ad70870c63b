#include "sa/assist.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace sa {

std::string to_string(Method m) {
    switch (m) {
    case Method::policy: return "policy";
    case Method::blend: return "blend";
    case Method::direct: return "direct";
    }
    return "unknown";
}

std::optional<Method> parse_method(std::string_view name) {
    if (name == "policy") return Method::policy;
    if (name == "blend") return Method::blend;
    if (name == "direct") return Method::direct;
    return std::nullopt;
}

void AssistConfig::validate() const {
    if (!(blend_distance > 0.0) || !std::isfinite(blend_distance)) throw std::invalid_argument("assist.D must be > 0");
    if (!(blend_cap >= 0.0 && blend_cap <= 1.0)) throw std::invalid_argument("assist.cap must lie in [0, 1]");
    if (!(gradient_step > 0.0) || !std::isfinite(gradient_step)) {
        throw std::invalid_argument("assist.gradient_step must be > 0");
    }
    if (candidate_set_size < 1) throw std::invalid_argument("assist.candidates must be >= 1");
}

Assistant::Assistant(Scene scene, CostParams p, AssistConfig cfg)
    : scene_(std::move(scene)), p_(p), cfg_(cfg), values_(scene_.workspace, p_) {
    cfg_.validate();
}

double Assistant::qmdp_value(const Belief& b, const RobotState& x, const Action& a, const UserInput& u) const {
    const auto fn = values_.fn();
    double q = 0.0;
    for (std::size_t g = 0; g < scene_.goals.size(); ++g) {
        if (b[g] == 0.0) continue;
        q += b[g] * goal_qvalue(x, a, u, scene_.goals[g], fn, p_, scene_.workspace);
    }
    return q;
}

Action Assistant::greedy_action(const RobotState& x, const Target& target) const {
    const Workspace& w = scene_.workspace;
    return {clamp_norm((target.pos - x.pos) / w.dt, w.v_max)};
}

Action Assistant::policy_action(const Belief& b, const RobotState& x, const UserInput& u) const {
    const Workspace& w = scene_.workspace;
    const auto fn = values_.fn();
    const Action teleop = direct_teleop(u, w);

    std::vector<Action> candidates{teleop};
    Vec grad = Vec::Zero(w.dims);
    for (std::size_t g = 0; g < scene_.goals.size(); ++g) {
        if (b[g] == 0.0) continue;
        const Goal& goal = scene_.goals[g];
        const Target& best = goal.targets[argmin_target(x, goal, fn).index];
        candidates.push_back(greedy_action(x, best));
        grad += b[g] * values_.gradient(x, best);
    }

    // Stationary point of w·‖a − D(u)‖² + Σ_g b(g)·V_g(x + a·dt), V linearized at x.
    Vec stationary;
    if (p_.deviation_weight > 0.0) {
        stationary = teleop.vel - cfg_.gradient_step * w.dt / (2.0 * p_.deviation_weight) * grad;
    } else {
        stationary = grad.norm() > 0.0 ? Vec(-grad / grad.norm() * w.v_max) : teleop.vel;
    }
    stationary = clamp_norm(stationary, w.v_max);
    const int n = cfg_.candidate_set_size;
    for (int k = 1; k <= n; ++k) {
        const double t = static_cast<double>(k) / n;
        candidates.push_back({clamp_norm(teleop.vel + t * (stationary - teleop.vel), w.v_max)});
    }

    Action best = candidates.front();
    double best_q = qmdp_value(b, x, best, u);
    for (std::size_t i = 1; i < candidates.size(); ++i) {
        const double q = qmdp_value(b, x, candidates[i], u);
        if (q < best_q) {
            best_q = q;
            best = candidates[i];
        }
    }
    return best;
}

double Assistant::blend_confidence(const Belief& b, const RobotState& x) const {
    const Goal& g = scene_.goals[map_goal(b)];
    double d = std::numeric_limits<double>::infinity();
    for (const auto& t : g.targets) d = std::min(d, distance_to_target(x, t));
    return std::max(0.0, 1.0 - d / cfg_.blend_distance);
}

Action Assistant::blend_action(const Belief& b, const RobotState& x, const UserInput& u) const {
    const Workspace& w = scene_.workspace;
    const Goal& g = scene_.goals[map_goal(b)];
    std::size_t nearest = 0;
    for (std::size_t i = 1; i < g.targets.size(); ++i) {
        if (distance_to_target(x, g.targets[i]) < distance_to_target(x, g.targets[nearest])) nearest = i;
    }
    const Action autonomous = greedy_action(x, g.targets[nearest]);
    const double gamma = cfg_.blend_cap * blend_confidence(b, x);
    const Action teleop = direct_teleop(u, w);
    return {clamp_norm((1.0 - gamma) * teleop.vel + gamma * autonomous.vel, w.v_max)};
}

Action Assistant::direct_action(const UserInput& u) const { return direct_teleop(u, scene_.workspace); }

Action Assistant::act(Method m, const Belief& b, const RobotState& x, const UserInput& u) const {
    switch (m) {
    case Method::policy: return policy_action(b, x, u);
    case Method::blend: return blend_action(b, x, u);
    case Method::direct: return direct_action(u);
    }
    throw std::invalid_argument("unknown assistance method");
}

double Assistant::goal_value(const RobotState& x, std::size_t goal) const {
    return sa::goal_value(x, scene_.goals[goal], values_.fn());
}

} // namespace sa
