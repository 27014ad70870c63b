// Headless trials with simulated users, trial logs, and paired experiments.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sa/engine.hpp"

namespace sa {

using Rng = std::mt19937_64;

/// Uniform double in [0, 1) from exactly one engine draw.
double uniform01(Rng& rng);

/// Samples the MaxEnt input policy of `goal` at x. probabilities are raised
/// to `temperature` (beta) and renormalized; an infinite beta returns the
/// most likely input. Always consumes exactly one draw.
UserInput simulated_user_step(const Predictor& predictor, const RobotState& x, std::size_t goal, Rng& rng,
                              double temperature = 1.0);

/// Source of user inputs for a trial.
class UserModel {
public:
    virtual ~UserModel() = default;
    virtual UserInput next(const RobotState& x, int step, Rng& rng) = 0;
    [[nodiscard]] virtual std::string describe() const = 0;
};

/// Samples from the MaxEnt policy of the true goal, blind to assistance.
class MaxEntUser final : public UserModel {
public:
    MaxEntUser(const Predictor& predictor, std::size_t goal, double temperature)
        : predictor_(predictor), goal_(goal), temperature_(temperature) {}
    UserInput next(const RobotState& x, int step, Rng& rng) override;
    [[nodiscard]] std::string describe() const override;

private:
    const Predictor& predictor_;
    std::size_t goal_;
    double temperature_;
};

/// Replays a fixed input sequence, then sends zero.
class ScriptedUser final : public UserModel {
public:
    ScriptedUser(std::vector<UserInput> inputs, int dims) : inputs_(std::move(inputs)), dims_(dims) {}
    UserInput next(const RobotState& x, int step, Rng& rng) override;
    [[nodiscard]] std::string describe() const override { return "scripted"; }

private:
    std::vector<UserInput> inputs_;
    int dims_;
};

class ZeroUser final : public UserModel {
public:
    explicit ZeroUser(int dims) : dims_(dims) {}
    UserInput next(const RobotState&, int, Rng&) override { return UserInput::zero(dims_); }
    [[nodiscard]] std::string describe() const override { return "zero"; }

private:
    int dims_;
};

struct Frame {
    int step = 0;
    double t = 0.0;
    Vec x; // state at which u was given
    Vec u; // raw user input
    Vec a; // executed action
    std::vector<double> belief; // after observing u
    std::optional<Method> method; // set only when the method changed at this frame
};

struct TrialMetrics {
    int steps = 0;
    double time = 0.0;
    double total_input = 0.0;
    double total_assist_deviation = 0.0;

    bool operator==(const TrialMetrics&) const = default;
};

struct Outcome {
    bool captured = false;
    std::string goal;   // captured goal name
    int target = -1;    // captured target id
};

struct TrialLog {
    std::string scene_hash;
    std::vector<std::string> goals;
    Method method = Method::policy;
    std::string true_goal;
    std::uint64_t seed = 0;
    std::string user;
    double dt = 0.0;
    double v_max = 0.0;
    int dims = 2;
    int max_steps = 0;
    std::vector<Frame> frames;
    Outcome outcome;
    TrialMetrics metrics;
};

/// Metrics derived from frames: steps, steps*dt, Σ‖u‖dt, Σ‖a − D(u)‖dt.
TrialMetrics compute_metrics(const std::vector<Frame>& frames, double dt, double v_max);

struct TrialSpec {
    Method method = Method::policy;
    std::size_t goal = 0;
    std::uint64_t seed = 0;
    int max_steps = 2000;
};

/// Runs until a target of the true goal is within the capture radius or
/// max_steps epochs elapse. A pure function of (engine, spec, user model).
TrialLog run_trial(const Engine& engine, const TrialSpec& spec, UserModel& user);
/// As above with the belief driven by `model` instead of the engine's predictor.
TrialLog run_trial(const Engine& engine, const TrialSpec& spec, UserModel& user, const InputModel& model);
/// MaxEnt user at the given temperature.
TrialLog run_trial(const Engine& engine, const TrialSpec& spec, double temperature = 1.0);

/// JSON lines: a header, one line per frame, an outcome line.
void write_trial_log(std::ostream& out, const TrialLog& log);
std::string trial_log_to_string(const TrialLog& log);

class LogParseError : public std::runtime_error {
public:
    LogParseError(int line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
    [[nodiscard]] int line() const { return line_; }

private:
    int line_;
};

TrialLog read_trial_log(std::istream& in);

/// Re-emits the logged frames in order.
std::vector<Frame> replay(const TrialLog& log);
/// Belief sequence obtained by re-running the predictor over the logged (x, u).
std::vector<Belief> recompute_beliefs(const TrialLog& log, const Engine& engine);

struct MethodStats {
    Method method = Method::policy;
    int trials = 0;
    int captured = 0;
    double mean_steps = 0.0;
    double se_steps = 0.0;
    double mean_input = 0.0;
    double se_input = 0.0;
};

struct PairComparison {
    Method first = Method::policy;
    Method second = Method::blend;
    int first_fewer_steps = 0;
    int second_fewer_steps = 0;
    int ties = 0;
    double mean_step_difference = 0.0;  // second − first
    double mean_input_difference = 0.0; // second − first
};

struct TrialRecord {
    int trial = 0;
    std::string goal;
    std::uint64_t seed = 0;
    std::vector<TrialMetrics> metrics; // one per method, in summary order
    std::vector<bool> captured;
};

struct ExperimentSummary {
    std::string scene_hash;
    std::uint64_t base_seed = 0;
    int trials_per_cell = 0;
    std::vector<Method> methods;
    std::vector<MethodStats> stats;
    std::vector<PairComparison> pairs;
    std::vector<TrialRecord> trials;
};

struct ExperimentResult {
    ExperimentSummary summary;
    std::vector<TrialLog> logs; // trial-major, method-minor
};

struct ExperimentOptions {
    std::vector<Method> methods;
    int trials_per_cell = 0; // per goal
    std::uint64_t base_seed = 0;
    int max_steps = 2000;
    double temperature = 1.0;
    unsigned threads = 0; // 0: hardware concurrency
};

/// Paired design: every method sees the same (goal, seed) pairs, and the
/// user's random stream does not depend on the method.
ExperimentResult run_experiment(const Engine& engine, const ExperimentOptions& opts);

/// Mean/SE and pair comparisons recomputed from per-trial records.
ExperimentSummary summarize(const std::string& scene_hash, std::uint64_t base_seed, int trials_per_cell,
                            const std::vector<Method>& methods, std::vector<TrialRecord> trials);

nlohmann::json to_json(const ExperimentSummary& s);
/// One row per (trial, method).
std::string summary_csv(const ExperimentSummary& s);

/// Seed of trial `index` derived from the base seed (SplitMix64).
std::uint64_t trial_seed(std::uint64_t base_seed, std::uint64_t index);

} // namespace sa
