#include "sa/costs.hpp"

#include <cmath>
#include <stdexcept>

namespace sa {

void CostParams::validate() const {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw std::invalid_argument("cost.alpha must be > 0");
    if (!(delta > 0.0) || !std::isfinite(delta)) throw std::invalid_argument("cost.delta must be > 0");
    if (!(deviation_weight >= 0.0) || !std::isfinite(deviation_weight)) {
        throw std::invalid_argument("cost.deviation_weight must be >= 0");
    }
}

double user_cost_at_distance(double d, const CostParams& p) {
    if (d > p.delta) return p.alpha;
    return p.alpha / p.delta * d;
}

double user_cost(const RobotState& x, const UserInput& /*u*/, const Target& target, const CostParams& p) {
    return user_cost_at_distance(distance_to_target(x, target), p);
}

double robot_cost(const RobotState& x, const Action& a, const UserInput& u, const Target& target,
                  const CostParams& p, const Workspace& w) {
    const Vec deviation = a.vel - direct_teleop(u, w).vel;
    return user_cost(x, u, target, p) + p.deviation_weight * deviation.squaredNorm();
}

double takeover_cost(const RobotState& x, const Action& a, const Target& target, const CostParams& p,
                     const Workspace& w) {
    return robot_cost(x, a, UserInput::zero(w.dims), target, p, w);
}

} // namespace sa
