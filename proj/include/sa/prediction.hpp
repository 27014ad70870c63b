// Goal inference from user inputs.
//
// Each goal induces a MaxEnt input policy pi(u | x, g) = exp(V~_g(x) - Q~_g(x, u)).
// The belief over goals is a running Bayes product of these likelihoods,
// evaluated only on user inputs at the states where they were given. The
// robot's own actions never enter a likelihood: InputModel has no action
// parameter.

#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sa/costs.hpp"
#include "sa/values.hpp"
#include "sa/world.hpp"

namespace sa {

struct Belief {
    std::vector<double> probs;

    static Belief uniform(std::size_t goals);
    static Belief point_mass(std::size_t goals, std::size_t goal);
    /// Throws std::invalid_argument unless probs lie in the simplex (±1e-9).
    void validate() const;
    [[nodiscard]] std::size_t size() const { return probs.size(); }
    [[nodiscard]] double operator[](std::size_t g) const { return probs[g]; }
};

enum class PredictorMode { exact_soft, approx_hard };

struct PredictorConfig {
    PredictorMode mode = PredictorMode::exact_soft;
    double likelihood_floor = 1e-6;
    double dead_zone = 0.1;
    std::optional<Belief> prior; // uniform when unset

    void validate() const;
};

/// Observation model over goals. Deliberately takes no robot action.
class InputModel {
public:
    virtual ~InputModel() = default;
    [[nodiscard]] virtual std::size_t goal_count() const = 0;
    [[nodiscard]] virtual double likelihood(const UserInput& u, const RobotState& x, std::size_t goal) const = 0;
};

/// Nearest member of `inputs` by cosine, then by magnitude; anything shorter
/// than dead_zone snaps to the zero input.
UserInput snap_input(const UserInput& u, std::span<const UserInput> inputs, double dead_zone = 0.1);

class Predictor final : public InputModel {
public:
    Predictor(Scene scene, CostParams p, std::shared_ptr<const SoftValueSet> soft, PredictorConfig cfg);

    [[nodiscard]] std::size_t goal_count() const override { return scene_.goals.size(); }
    /// u is snapped to the discrete input set before evaluation.
    [[nodiscard]] double likelihood(const UserInput& u, const RobotState& x, std::size_t goal) const override;

    /// Likelihood of every discrete input, in inputs() order.
    [[nodiscard]] std::vector<double> likelihoods(const RobotState& x, std::size_t goal) const;
    [[nodiscard]] std::vector<double> likelihoods(const RobotState& x, std::size_t goal, PredictorMode mode) const;

    [[nodiscard]] UserInput snap(const UserInput& u) const;
    [[nodiscard]] std::size_t input_index(const UserInput& snapped) const;
    [[nodiscard]] const std::vector<UserInput>& inputs() const { return soft_->inputs(); }
    [[nodiscard]] const PredictorConfig& config() const { return cfg_; }
    [[nodiscard]] Belief prior() const;
    [[nodiscard]] const SoftValueSet& soft_values() const { return *soft_; }

private:
    Scene scene_;
    CostParams p_;
    std::shared_ptr<const SoftValueSet> soft_;
    PredictorConfig cfg_;
    AnalyticValues hard_;
};

double input_likelihood(const UserInput& u, const RobotState& x, std::size_t goal, const Predictor& predictor);

struct BeliefUpdate {
    Belief belief;
    /// Set when every posterior weight vanished; belief is then the prior b.
    std::optional<std::string> diagnostic;
};

/// b'(g) ∝ b(g) · max(likelihood(u, x, g), floor).
BeliefUpdate belief_update(const Belief& b, const UserInput& u, const RobotState& x, const InputModel& model,
                           double likelihood_floor);

/// Shannon entropy in nats.
double belief_entropy(const Belief& b);

/// Most probable goal index; ties go to the lowest index.
std::size_t map_goal(const Belief& b);

} // namespace sa
