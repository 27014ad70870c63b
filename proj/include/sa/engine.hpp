// A loaded scene with its precomputed soft grids, predictor and assistant.
// Immutable after construction and shared read-only between trials and
// sessions.

#pragma once

#include <memory>
#include <optional>
#include <string>

#include "sa/assist.hpp"
#include "sa/prediction.hpp"
#include "sa/scene_config.hpp"
#include "sa/values.hpp"

namespace sa {

class Engine {
public:
    /// Validates the scene and builds every per-target soft grid.
    static std::shared_ptr<const Engine> build(SceneConfig cfg);

    [[nodiscard]] const SceneConfig& config() const { return cfg_; }
    [[nodiscard]] const Scene& scene() const { return cfg_.scene; }
    [[nodiscard]] const Workspace& workspace() const { return cfg_.scene.workspace; }
    [[nodiscard]] const Predictor& predictor() const { return predictor_; }
    [[nodiscard]] const Assistant& assistant() const { return assistant_; }
    [[nodiscard]] const std::vector<UserInput>& inputs() const { return predictor_.inputs(); }
    [[nodiscard]] const std::string& scene_hash() const { return hash_; }

    /// Goal and target index of the first target within the capture radius
    /// (goal order, then target order); restricted to one goal when given.
    [[nodiscard]] std::optional<std::pair<std::size_t, std::size_t>>
    captured(const RobotState& x, std::optional<std::size_t> goal = std::nullopt) const;

    Engine(SceneConfig cfg, std::shared_ptr<const SoftValueSet> soft);

private:
    SceneConfig cfg_;
    Predictor predictor_;
    Assistant assistant_;
    std::string hash_;
};

struct StepResult {
    UserInput snapped;
    Belief belief; // after observing u at x
    Action action;
    RobotState next;
    std::optional<std::string> diagnostic;
};

/// One control epoch: observe u at x, update the belief, choose an action
/// with `method`, integrate. Shared by the simulator and live sessions.
StepResult control_step(const Engine& engine, Method method, const Belief& b, const RobotState& x,
                        const UserInput& u, const InputModel& model);
StepResult control_step(const Engine& engine, Method method, const Belief& b, const RobotState& x,
                        const UserInput& u);

/// Clamps each component of a raw joystick vector to [-1, 1]; non-finite
/// components become 0.
UserInput sanitize_input(const Vec& raw, int dims);

} // namespace sa
