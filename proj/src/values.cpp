#include "sa/values.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <numbers>
#include <string>

namespace sa {

double softmin(std::span<const double> vals) {
    if (vals.empty()) throw std::invalid_argument("softmin of an empty list");
    const double lo = *std::min_element(vals.begin(), vals.end());
    if (std::isinf(lo)) return lo;
    double tail = 0.0; // Σ exp(-(v - lo)) over all but one minimal element
    bool skipped = false;
    for (double v : vals) {
        if (!skipped && v == lo) {
            skipped = true;
            continue;
        }
        tail += std::exp(-(v - lo));
    }
    return lo - std::log1p(tail);
}

double measure_offset(InputMeasure m, std::size_t input_count) {
    return m == InputMeasure::uniform ? std::log(static_cast<double>(input_count)) : 0.0;
}

std::vector<UserInput> robot_directions(int dims) {
    std::vector<UserInput> out;
    out.push_back(UserInput::zero(dims));
    if (dims == 2) {
        constexpr int kHeadings = 32;
        for (int k = 0; k < kHeadings; ++k) {
            const double th = 2.0 * std::numbers::pi * k / kHeadings;
            Vec v(2);
            v << std::cos(th), std::sin(th);
            // Exact axes so grid-aligned moves stay on the lattice.
            for (int i = 0; i < 2; ++i) {
                if (std::abs(v[i]) < 1e-12) v[i] = 0.0;
                if (std::abs(std::abs(v[i]) - 1.0) < 1e-12) v[i] = std::copysign(1.0, v[i]);
            }
            out.push_back({v});
        }
        return out;
    }
    // 3-D: the 26 lattice directions.
    const auto lattice = discretize_inputs(3, true);
    out.insert(out.end(), lattice.begin() + 1, lattice.end());
    return out;
}

std::vector<std::uint8_t> absorbing_mask(const ValueGrid& grid, const Target& target) {
    std::vector<std::uint8_t> mask(grid.size(), 0);
    const double eps = grid.workspace().capture_radius;
    for (std::size_t c = 0; c < grid.size(); ++c) {
        if ((grid.center(c) - target.pos).norm() <= eps) mask[c] = 1;
    }
    mask[grid.cell_containing(target.pos)] = 1;
    return mask;
}

namespace {

// Interpolation stencils of T(center, D(u)) for every (cell, input), padded to
// 2^dims corners.
struct TransitionTable {
    int corners = 0;
    std::size_t inputs = 0;
    std::vector<std::uint32_t> index;
    std::vector<double> weight;
    std::vector<double> cost; // per cell
};

TransitionTable build_table(const ValueGrid& grid, const Target& target, const CostParams& p,
                            const Workspace& w, std::span<const UserInput> inputs) {
    TransitionTable t;
    t.corners = 1 << w.dims;
    t.inputs = inputs.size();
    const std::size_t n = grid.size();
    t.index.assign(n * t.inputs * static_cast<std::size_t>(t.corners), 0);
    t.weight.assign(t.index.size(), 0.0);
    t.cost.resize(n);

    std::vector<Action> actions;
    actions.reserve(inputs.size());
    for (const auto& u : inputs) actions.push_back(direct_teleop(u, w));

    for (std::size_t c = 0; c < n; ++c) {
        const RobotState x{grid.center(c)};
        t.cost[c] = user_cost_at_distance((x.pos - target.pos).norm(), p);
        for (std::size_t k = 0; k < t.inputs; ++k) {
            const Stencil st = grid.stencil(transition(x, actions[k], w).pos);
            const std::size_t base = (c * t.inputs + k) * static_cast<std::size_t>(t.corners);
            for (int j = 0; j < st.count; ++j) {
                t.index[base + static_cast<std::size_t>(j)] = static_cast<std::uint32_t>(st.index[static_cast<std::size_t>(j)]);
                t.weight[base + static_cast<std::size_t>(j)] = st.weight[static_cast<std::size_t>(j)];
            }
        }
    }
    return t;
}

template <class Combine>
void iterate(ValueGrid& grid, const TransitionTable& table, const IterationOptions& opts, double offset,
             Combine combine, const char* what) {
    const std::size_t n = grid.size();
    const auto& absorbing = grid.absorbing();
    std::vector<double> cur(n, 0.0);
    std::vector<double> next(n, 0.0);
    std::vector<double> q(table.inputs);

    const int sweeps = opts.horizon ? *opts.horizon : opts.max_sweeps;
    double residual = std::numeric_limits<double>::infinity();
    for (int s = 1; s <= sweeps; ++s) {
        residual = 0.0;
        for (std::size_t c = 0; c < n; ++c) {
            if (absorbing[c]) {
                next[c] = 0.0;
                continue;
            }
            for (std::size_t k = 0; k < table.inputs; ++k) {
                const std::size_t base = (c * table.inputs + k) * static_cast<std::size_t>(table.corners);
                double v = 0.0;
                for (int j = 0; j < table.corners; ++j) {
                    const double wgt = table.weight[base + static_cast<std::size_t>(j)];
                    if (wgt != 0.0) v += wgt * cur[table.index[base + static_cast<std::size_t>(j)]];
                }
                q[k] = v;
            }
            next[c] = table.cost[c] + offset + combine(std::span<const double>(q));
            residual = std::max(residual, std::abs(next[c] - cur[c]));
        }
        cur.swap(next);
        if (!std::isfinite(residual)) {
            throw ConvergenceError(std::string(what) + ": values diverged", residual, s);
        }
        if (!opts.horizon && residual < opts.tolerance) {
            std::copy(cur.begin(), cur.end(), grid.values().begin());
            return;
        }
    }
    if (opts.horizon) {
        std::copy(cur.begin(), cur.end(), grid.values().begin());
        return;
    }
    throw ConvergenceError(std::string(what) + ": no convergence after " + std::to_string(sweeps) +
                               " sweeps (residual " + std::to_string(residual) + ")",
                           residual, sweeps);
}

ValueGrid prepare(const Target& target, const Workspace& w, const GridSpec& spec, ValueKind kind,
                  std::span<const UserInput> inputs) {
    if (inputs.empty()) throw std::invalid_argument("value iteration needs at least one input");
    ValueGrid grid(w, spec, kind, target.id);
    grid.set_absorbing(absorbing_mask(grid, target));
    return grid;
}

} // namespace

ValueGrid hard_value_iteration(const Target& target, const CostParams& p, const Workspace& w,
                               const GridSpec& spec, std::span<const UserInput> inputs,
                               const IterationOptions& opts) {
    ValueGrid grid = prepare(target, w, spec, ValueKind::hard, inputs);
    const TransitionTable table = build_table(grid, target, p, w, inputs);
    iterate(grid, table, opts, opts.step_offset,
            [](std::span<const double> q) { return *std::min_element(q.begin(), q.end()); },
            "hard value iteration");
    return grid;
}

ValueGrid hard_value_iteration(const Target& target, const CostParams& p, const Workspace& w,
                               const GridSpec& spec) {
    const auto dirs = robot_directions(w.dims);
    return hard_value_iteration(target, p, w, spec, dirs);
}

ValueGrid soft_value_iteration(const Target& target, const CostParams& p, const Workspace& w,
                               const GridSpec& spec, std::span<const UserInput> inputs,
                               const SoftOptions& opts) {
    ValueGrid grid = prepare(target, w, spec, ValueKind::soft, inputs);
    const TransitionTable table = build_table(grid, target, p, w, inputs);
    const double offset = opts.iteration.step_offset + measure_offset(opts.measure, inputs.size());
    iterate(grid, table, opts.iteration, offset, [](std::span<const double> q) { return softmin(q); },
            "soft value iteration");
    return grid;
}

ValueGrid soft_value_iteration(const Target& target, const CostParams& p, const Workspace& w,
                               const GridSpec& spec) {
    const auto inputs = discretize_inputs(w.dims, false);
    return soft_value_iteration(target, p, w, spec, inputs);
}

namespace {

struct StepSplit {
    double whole = 0.0; // number of complete full-speed steps
    double frac = 0.0;  // fraction of the final partial step
    double far = 0.0;   // complete steps taken outside the ramp radius
};

StepSplit split_steps(double d, const CostParams& p, const Workspace& w) {
    const double ell = w.step_length();
    const double s = (d - w.capture_radius) / ell;
    StepSplit out;
    out.whole = std::floor(s);
    out.frac = s - out.whole;
    // Step k (0-based) starts at distance d - k*ell; it is far-field while that exceeds delta.
    out.far = d > p.delta ? std::clamp(std::ceil((d - p.delta) / ell), 0.0, out.whole) : 0.0;
    return out;
}

} // namespace

double analytic_target_value(const RobotState& x, const Target& target, const CostParams& p,
                             const Workspace& w) {
    const double d = distance_to_target(x, target);
    if (d <= w.capture_radius) return 0.0;
    const double ell = w.step_length();
    const StepSplit s = split_steps(d, p, w);
    const double ramp_steps = s.whole - s.far;
    // Σ_{k=far}^{whole-1} (alpha/delta)(d - k*ell)
    const double ramp_sum = p.alpha / p.delta * (ramp_steps * d - ell * ramp_steps * (s.far + s.whole - 1.0) / 2.0);
    const double last = user_cost_at_distance(d - s.whole * ell, p);
    return p.alpha * s.far + ramp_sum + s.frac * last;
}

Vec analytic_target_gradient(const RobotState& x, const Target& target, const CostParams& p,
                             const Workspace& w) {
    const Vec diff = x.pos - target.pos;
    const double d = diff.norm();
    if (d <= w.capture_radius || d == 0.0) return Vec::Zero(x.pos.size());
    const double ell = w.step_length();
    const StepSplit s = split_steps(d, p, w);
    const double last_d = d - s.whole * ell;
    const double last_slope = last_d <= p.delta ? p.alpha / p.delta : 0.0;
    const double dvdd = p.alpha / p.delta * (s.whole - s.far) + user_cost_at_distance(last_d, p) / ell +
                        s.frac * last_slope;
    return diff * (dvdd / d);
}

TargetValueFn AnalyticValues::fn() const {
    return [w = w_, p = p_](const RobotState& x, const Target& t) { return analytic_target_value(x, t, p, w); };
}

TargetChoice argmin_target(const RobotState& x, const Goal& g, const TargetValueFn& values) {
    if (g.targets.empty()) throw std::invalid_argument("goal has no targets");
    TargetChoice best{0, values(x, g.targets[0])};
    for (std::size_t i = 1; i < g.targets.size(); ++i) {
        const double v = values(x, g.targets[i]);
        if (v < best.value || (v == best.value && g.targets[i].id < g.targets[best.index].id)) {
            best = {i, v};
        }
    }
    return best;
}

double goal_value(const RobotState& x, const Goal& g, const TargetValueFn& values) {
    return argmin_target(x, g, values).value;
}

double goal_qvalue(const RobotState& x, const Action& a, const UserInput& u, const Goal& g,
                   const TargetValueFn& values, const CostParams& p, const Workspace& w) {
    const RobotState next = transition(x, a, w);
    const TargetChoice best = argmin_target(next, g, values);
    return robot_cost(x, a, u, g.targets[best.index], p, w) + best.value;
}

double goal_soft_value(const RobotState& x, const Goal& g, const TargetValueFn& soft_values) {
    std::vector<double> v;
    v.reserve(g.targets.size());
    for (const auto& t : g.targets) v.push_back(soft_values(x, t));
    return softmin(v);
}

double goal_soft_qvalue(const RobotState& x, const UserInput& u, const Goal& g, const TargetSoftQFn& soft_q) {
    std::vector<double> v;
    v.reserve(g.targets.size());
    for (const auto& t : g.targets) v.push_back(soft_q(x, u, t));
    return softmin(v);
}

SoftValueSet::SoftValueSet(const Scene& scene, const CostParams& p, std::vector<UserInput> inputs,
                           const GridSpec& spec, const SoftOptions& opts)
    : scene_(scene), p_(p), inputs_(std::move(inputs)) {
    offset_ = opts.iteration.step_offset + measure_offset(opts.measure, inputs_.size());

    // Targets are independent; build their grids concurrently.
    std::vector<std::vector<std::future<ValueGrid>>> pending(scene_.goals.size());
    for (std::size_t g = 0; g < scene_.goals.size(); ++g) {
        for (const auto& t : scene_.goals[g].targets) {
            pending[g].push_back(std::async(std::launch::async, [this, &t, &spec, &opts] {
                return soft_value_iteration(t, p_, scene_.workspace, spec, inputs_, opts);
            }));
        }
    }
    grids_.resize(pending.size());
    for (std::size_t g = 0; g < pending.size(); ++g) {
        for (auto& f : pending[g]) grids_[g].push_back(f.get());
    }
}

double SoftValueSet::target_qvalue(const RobotState& x, const UserInput& u, std::size_t goal,
                                   std::size_t target) const {
    const Workspace& w = scene_.workspace;
    const Target& t = scene_.goals[goal].targets[target];
    const double d = distance_to_target(x, t);
    if (d <= w.capture_radius && u.is_zero()) return 0.0;
    const RobotState next = transition(x, direct_teleop(u, w), w);
    return user_cost_at_distance(d, p_) + offset_ + grids_[goal][target].interpolate(next.pos);
}

double SoftValueSet::goal_soft_value(const RobotState& x, std::size_t goal) const {
    const auto& grids = grids_[goal];
    std::vector<double> v;
    v.reserve(grids.size());
    for (const auto& grid : grids) v.push_back(grid.interpolate(x.pos));
    return softmin(v);
}

double SoftValueSet::goal_soft_qvalue(const RobotState& x, const UserInput& u, std::size_t goal) const {
    const std::size_t n = grids_[goal].size();
    std::vector<double> v(n);
    for (std::size_t k = 0; k < n; ++k) v[k] = target_qvalue(x, u, goal, k);
    return softmin(v);
}

double SoftValueSet::goal_backed_up_value(const RobotState& x, std::size_t goal) const {
    std::vector<double> q;
    q.reserve(inputs_.size());
    for (const auto& u : inputs_) q.push_back(goal_soft_qvalue(x, u, goal));
    return softmin(q);
}

} // namespace sa
