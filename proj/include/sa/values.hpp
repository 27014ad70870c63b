// Per-target hard and soft value functions and their composition into goal
// value functions.
//
// Hard values compose by min over a goal's targets (with the step cost taken
// from the target that is cheapest after the step); soft values compose by
// softmin. Grids hold an infinite-horizon fixed point with absorbing target
// cells, or a finite-horizon backup when a horizon is requested.

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "sa/costs.hpp"
#include "sa/grid.hpp"
#include "sa/world.hpp"

namespace sa {

/// −log Σ exp(−v_i), shifted by the minimum. Throws std::invalid_argument on
/// an empty list.
double softmin(std::span<const double> vals);

class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, double residual, int sweeps)
        : std::runtime_error(what), residual_(residual), sweeps_(sweeps) {}
    [[nodiscard]] double residual() const { return residual_; }
    [[nodiscard]] int sweeps() const { return sweeps_; }

private:
    double residual_;
    int sweeps_;
};

/// How the finite input set weighs the soft-min sum.
///  counting: −log Σ_u exp(−Q) (every input counts once).
///  uniform:  −log (1/|U|) Σ_u exp(−Q), i.e. ln|U| added to every step cost.
///            Keeps the infinite-horizon partition function finite.
enum class InputMeasure { counting, uniform };

struct IterationOptions {
    double tolerance = 1e-9;
    int max_sweeps = 10000;
    /// When set, run exactly this many backups from a zero terminal value.
    std::optional<int> horizon;
    /// Constant added to every non-absorbed step cost.
    double step_offset = 0.0;
};

struct SoftOptions {
    IterationOptions iteration;
    InputMeasure measure = InputMeasure::uniform;
};

/// Cost added to each soft step by the measure choice.
double measure_offset(InputMeasure m, std::size_t input_count);

/// Unit directions used for the robot's hard value grids: 32 headings in
/// 2-D, the 26 lattice directions in 3-D, plus zero.
std::vector<UserInput> robot_directions(int dims);

/// Cells whose center lies within the capture radius, plus the cell
/// containing the target.
std::vector<std::uint8_t> absorbing_mask(const ValueGrid& grid, const Target& target);

ValueGrid hard_value_iteration(const Target& target, const CostParams& p, const Workspace& w,
                               const GridSpec& spec, std::span<const UserInput> inputs,
                               const IterationOptions& opts = {});
/// Uses robot_directions(w.dims).
ValueGrid hard_value_iteration(const Target& target, const CostParams& p, const Workspace& w,
                               const GridSpec& spec);

ValueGrid soft_value_iteration(const Target& target, const CostParams& p, const Workspace& w,
                               const GridSpec& spec, std::span<const UserInput> inputs,
                               const SoftOptions& opts = {});
/// Uses discretize_inputs(w.dims, false).
ValueGrid soft_value_iteration(const Target& target, const CostParams& p, const Workspace& w,
                               const GridSpec& spec);

/// Cost-to-go of driving straight at the target at full speed. Whole steps
/// are summed exactly; the final partial step is charged pro rata, so the
/// result is continuous in the distance.
double analytic_target_value(const RobotState& x, const Target& target, const CostParams& p,
                             const Workspace& w);
/// Gradient of analytic_target_value with respect to the position.
Vec analytic_target_gradient(const RobotState& x, const Target& target, const CostParams& p,
                             const Workspace& w);

/// Per-target value lookup used by the goal compositions.
using TargetValueFn = std::function<double(const RobotState&, const Target&)>;

struct TargetChoice {
    std::size_t index = 0;
    double value = 0.0;
};

/// argmin over the goal's targets; ties go to the lowest target id.
TargetChoice argmin_target(const RobotState& x, const Goal& g, const TargetValueFn& values);

/// min over targets.
double goal_value(const RobotState& x, const Goal& g, const TargetValueFn& values);

/// C^r of the target that is cheapest after the step, plus its value there.
double goal_qvalue(const RobotState& x, const Action& a, const UserInput& u, const Goal& g,
                   const TargetValueFn& values, const CostParams& p, const Workspace& w);

/// softmin over targets of the per-target soft values.
double goal_soft_value(const RobotState& x, const Goal& g, const TargetValueFn& soft_values);

/// softmin over targets of per-target soft action values.
using TargetSoftQFn = std::function<double(const RobotState&, const UserInput&, const Target&)>;
double goal_soft_qvalue(const RobotState& x, const UserInput& u, const Goal& g, const TargetSoftQFn& soft_q);

/// Closed-form hard values, used by the live loop.
class AnalyticValues {
public:
    AnalyticValues(Workspace w, CostParams p) : w_(std::move(w)), p_(p) {}

    [[nodiscard]] double value(const RobotState& x, const Target& t) const {
        return analytic_target_value(x, t, p_, w_);
    }
    [[nodiscard]] Vec gradient(const RobotState& x, const Target& t) const {
        return analytic_target_gradient(x, t, p_, w_);
    }
    [[nodiscard]] TargetValueFn fn() const;
    [[nodiscard]] const Workspace& workspace() const { return w_; }
    [[nodiscard]] const CostParams& params() const { return p_; }

private:
    Workspace w_;
    CostParams p_;
};

/// Precomputed soft grids for every target of every goal in a scene.
///
/// Soft action values are one-step backups through the grid:
///   Q~(x,u) = C(x) + offset + V~(T(x, D(u))),
/// except inside a target's capture radius, where holding still (u = 0) is
/// free and absorbs. State values used for likelihoods are backed up the
/// same way, V~(x) = softmin_u Q~(x,u), so input probabilities normalize
/// exactly at every state.
class SoftValueSet {
public:
    SoftValueSet(const Scene& scene, const CostParams& p, std::vector<UserInput> inputs,
                 const GridSpec& spec, const SoftOptions& opts = {});

    [[nodiscard]] const std::vector<UserInput>& inputs() const { return inputs_; }
    [[nodiscard]] const ValueGrid& grid(std::size_t goal, std::size_t target) const {
        return grids_[goal][target];
    }
    [[nodiscard]] double offset() const { return offset_; }

    [[nodiscard]] double target_qvalue(const RobotState& x, const UserInput& u, std::size_t goal,
                                       std::size_t target) const;
    /// softmin over targets of the interpolated grid values.
    [[nodiscard]] double goal_soft_value(const RobotState& x, std::size_t goal) const;
    [[nodiscard]] double goal_soft_qvalue(const RobotState& x, const UserInput& u, std::size_t goal) const;
    /// softmin over inputs of goal_soft_qvalue.
    [[nodiscard]] double goal_backed_up_value(const RobotState& x, std::size_t goal) const;

private:
    Scene scene_;
    CostParams p_;
    std::vector<UserInput> inputs_;
    double offset_ = 0.0;
    std::vector<std::vector<ValueGrid>> grids_;
};

} // namespace sa
