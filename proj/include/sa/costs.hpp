// Per-target user and robot costs.
//
// The user pays a constant alpha per step far from the target and a linear
// ramp (alpha/delta)*d inside radius delta. The robot additionally pays for
// deviating from the direct-teleoperation command.

#pragma once

#include "sa/world.hpp"

namespace sa {

struct CostParams {
    double alpha = 1.0;
    double delta = 0.1;            // meters
    double deviation_weight = 1.0;

    void validate() const;
};

/// Piecewise per-step cost as a function of distance to the target.
double user_cost_at_distance(double d, const CostParams& p);

/// Depends on the state only; u is accepted to keep the (x, u) signature.
double user_cost(const RobotState& x, const UserInput& u, const Target& target, const CostParams& p);

double robot_cost(const RobotState& x, const Action& a, const UserInput& u, const Target& target,
                  const CostParams& p, const Workspace& w);

/// Robot cost when the user stops supplying input (u = 0).
double takeover_cost(const RobotState& x, const Action& a, const Target& target, const CostParams& p,
                     const Workspace& w);

} // namespace sa
