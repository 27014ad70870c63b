// Kinematic workspace for the point robot: states, inputs, actions and goals.

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace sa {

/// Small fixed-capacity vector for 2-D and 3-D workspaces; never heap-allocates.
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, 3, 1>;

/// Axis-aligned box the effector moves in, plus the time step and speed limit.
struct Workspace {
    int dims = 2;
    Vec lower;
    Vec upper;
    double dt = 0.05;             // seconds per decision epoch
    double v_max = 0.5;           // m/s
    double capture_radius = 0.02; // meters

    /// [0,1]^n with the default timing and capture radius.
    static Workspace unit(int dims = 2);

    /// Throws std::invalid_argument naming the first violated invariant.
    void validate() const;

    /// Distance covered by one full-speed step.
    [[nodiscard]] double step_length() const { return v_max * dt; }
    [[nodiscard]] Vec clamp(const Vec& p) const;
    [[nodiscard]] bool contains(const Vec& p) const;
};

struct RobotState {
    Vec pos;
};

/// Joystick deflection; each component lies in [-1, 1].
struct UserInput {
    Vec vec;

    [[nodiscard]] static UserInput zero(int dims) { return {Vec::Zero(dims)}; }
    [[nodiscard]] bool is_zero() const { return vec.isZero(0.0); }
};

/// Velocity command in m/s.
struct Action {
    Vec vel;

    [[nodiscard]] static Action zero(int dims) { return {Vec::Zero(dims)}; }
};

struct Target {
    int id = 0;
    Vec pos;
};

struct Goal {
    int id = 0;
    std::string name;
    std::vector<Target> targets;
};

struct Scene {
    Workspace workspace;
    std::vector<Goal> goals;
    RobotState start;

    /// Checks every invariant of the aggregate; throws std::invalid_argument.
    void validate() const;
    [[nodiscard]] int dims() const { return workspace.dims; }
    /// Index of the goal with the given name, or -1.
    [[nodiscard]] int find_goal(const std::string& name) const;
};

/// Explicit Euler step, clamped componentwise to the workspace box.
RobotState transition(const RobotState& x, const Action& a, const Workspace& w);

/// Scales the deflection by v_max and limits the resulting speed to v_max.
Action direct_teleop(const UserInput& u, const Workspace& w);

double distance_to_target(const RobotState& x, const Target& target);

/// Zero, then +e_i, -e_i for each axis i, then (optionally) the unit-norm
/// diagonals in lexicographic sign order.
std::vector<UserInput> discretize_inputs(int dims, bool diagonals);

/// Limits ‖v‖ to max_norm, preserving direction.
Vec clamp_norm(const Vec& v, double max_norm);

} // namespace sa
