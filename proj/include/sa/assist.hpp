// Assistance policies: hindsight-optimization (QMDP) policy, the
// predict-then-blend baseline, and plain direct teleoperation.

#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "sa/costs.hpp"
#include "sa/prediction.hpp"
#include "sa/values.hpp"
#include "sa/world.hpp"

namespace sa {

enum class Method { policy, blend, direct };

std::string to_string(Method m);
std::optional<Method> parse_method(std::string_view name);

struct AssistConfig {
    Method method = Method::policy;
    double blend_distance = 0.3; // D: confidence reaches zero at this distance (m)
    double blend_cap = 0.6;      // upper bound on the arbitration weight
    double gradient_step = 1.0;  // scale on the stationary-point step
    int candidate_set_size = 8;  // points on the segment from D(u) to the stationary point

    void validate() const;
};

class Assistant {
public:
    Assistant(Scene scene, CostParams p, AssistConfig cfg);

    /// Σ_g b(g) · Q_g(x, a, u): the user's cost-to-go is estimated as if the
    /// robot takes over after this step and the goal were known.
    [[nodiscard]] double qmdp_value(const Belief& b, const RobotState& x, const Action& a, const UserInput& u) const;

    /// Minimizer of qmdp_value over a small candidate set: D(u), a greedy
    /// step toward each goal's best target, and points along the segment to
    /// the stationary point of the quadratic-plus-linearized objective. Never
    /// worse than D(u) under the model.
    [[nodiscard]] Action policy_action(const Belief& b, const RobotState& x, const UserInput& u) const;

    /// max(0, 1 - d/D) with d the distance to the MAP goal's nearest target.
    [[nodiscard]] double blend_confidence(const Belief& b, const RobotState& x) const;
    [[nodiscard]] Action blend_action(const Belief& b, const RobotState& x, const UserInput& u) const;
    [[nodiscard]] Action direct_action(const UserInput& u) const;

    [[nodiscard]] Action act(Method m, const Belief& b, const RobotState& x, const UserInput& u) const;

    /// Hard goal value V_g(x) = min over the goal's targets.
    [[nodiscard]] double goal_value(const RobotState& x, std::size_t goal) const;
    /// Full-speed step toward `target` that stops on it rather than overshooting.
    [[nodiscard]] Action greedy_action(const RobotState& x, const Target& target) const;

    [[nodiscard]] const AssistConfig& config() const { return cfg_; }
    [[nodiscard]] const AnalyticValues& values() const { return values_; }

private:
    Scene scene_;
    CostParams p_;
    AssistConfig cfg_;
    AnalyticValues values_;
};

} // namespace sa
