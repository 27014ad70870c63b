#include "sa/engine.hpp"

#include <algorithm>
#include <cmath>

namespace sa {

std::shared_ptr<const Engine> Engine::build(SceneConfig cfg) {
    cfg.scene.validate();
    cfg.cost.validate();
    cfg.predictor.validate();
    cfg.assist.validate();
    auto soft = std::make_shared<const SoftValueSet>(cfg.scene, cfg.cost, discretize_inputs(cfg.scene.dims(), cfg.diagonals),
                                                     cfg.grid);
    return std::make_shared<const Engine>(std::move(cfg), std::move(soft));
}

Engine::Engine(SceneConfig cfg, std::shared_ptr<const SoftValueSet> soft)
    : cfg_(std::move(cfg)),
      predictor_(cfg_.scene, cfg_.cost, std::move(soft), cfg_.predictor),
      assistant_(cfg_.scene, cfg_.cost, cfg_.assist),
      hash_(sa::scene_hash(cfg_)) {}

std::optional<std::pair<std::size_t, std::size_t>> Engine::captured(const RobotState& x,
                                                                    std::optional<std::size_t> goal) const {
    const auto& goals = cfg_.scene.goals;
    for (std::size_t g = 0; g < goals.size(); ++g) {
        if (goal && *goal != g) continue;
        for (std::size_t t = 0; t < goals[g].targets.size(); ++t) {
            if (distance_to_target(x, goals[g].targets[t]) <= workspace().capture_radius) return std::pair{g, t};
        }
    }
    return std::nullopt;
}

StepResult control_step(const Engine& engine, Method method, const Belief& b, const RobotState& x,
                        const UserInput& u, const InputModel& model) {
    StepResult r;
    r.snapped = engine.predictor().snap(u);
    auto update = belief_update(b, r.snapped, x, model, engine.config().predictor.likelihood_floor);
    r.belief = std::move(update.belief);
    r.diagnostic = std::move(update.diagnostic);
    // The executed action uses the continuous input, not the snapped one.
    r.action = engine.assistant().act(method, r.belief, x, u);
    r.next = transition(x, r.action, engine.workspace());
    return r;
}

StepResult control_step(const Engine& engine, Method method, const Belief& b, const RobotState& x,
                        const UserInput& u) {
    return control_step(engine, method, b, x, u, engine.predictor());
}

UserInput sanitize_input(const Vec& raw, int dims) {
    Vec v = Vec::Zero(dims);
    for (int i = 0; i < std::min<int>(dims, static_cast<int>(raw.size())); ++i) {
        v[i] = std::isfinite(raw[i]) ? std::clamp(raw[i], -1.0, 1.0) : 0.0;
    }
    return {v};
}

} // namespace sa
