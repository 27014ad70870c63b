#include "sa/prediction.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace sa {

Belief Belief::uniform(std::size_t goals) {
    return {std::vector<double>(goals, 1.0 / static_cast<double>(goals))};
}

Belief Belief::point_mass(std::size_t goals, std::size_t goal) {
    Belief b{std::vector<double>(goals, 0.0)};
    b.probs.at(goal) = 1.0;
    return b;
}

void Belief::validate() const {
    if (probs.empty()) throw std::invalid_argument("belief: empty");
    double sum = 0.0;
    for (double p : probs) {
        if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("belief: probability outside [0, 1]");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("belief: probabilities do not sum to 1");
}

void PredictorConfig::validate() const {
    if (!(likelihood_floor >= 0.0 && likelihood_floor <= 0.1)) {
        throw std::invalid_argument("predictor.floor must lie in [0, 0.1]");
    }
    if (!(dead_zone >= 0.0 && dead_zone < 1.0)) throw std::invalid_argument("predictor.dead_zone must lie in [0, 1)");
    if (prior) prior->validate();
}

UserInput snap_input(const UserInput& u, std::span<const UserInput> inputs, double dead_zone) {
    const int dims = static_cast<int>(u.vec.size());
    const double norm = u.vec.norm();
    if (norm < dead_zone || norm == 0.0) return UserInput::zero(dims);

    const UserInput* best = nullptr;
    double best_cos = -2.0;
    double best_mag = 0.0;
    for (const auto& cand : inputs) {
        const double cn = cand.vec.norm();
        if (cn == 0.0) continue;
        const double cosine = u.vec.dot(cand.vec) / (norm * cn);
        const double mag = std::abs(cn - norm);
        if (cosine > best_cos + 1e-12 || (std::abs(cosine - best_cos) <= 1e-12 && mag < best_mag)) {
            best = &cand;
            best_cos = cosine;
            best_mag = mag;
        }
    }
    return best ? *best : UserInput::zero(dims);
}

Predictor::Predictor(Scene scene, CostParams p, std::shared_ptr<const SoftValueSet> soft, PredictorConfig cfg)
    : scene_(std::move(scene)), p_(p), soft_(std::move(soft)), cfg_(std::move(cfg)), hard_(scene_.workspace, p_) {
    cfg_.validate();
    if (cfg_.prior && cfg_.prior->size() != scene_.goals.size()) {
        throw std::invalid_argument("predictor.prior must have one entry per goal");
    }
}

Belief Predictor::prior() const { return cfg_.prior ? *cfg_.prior : Belief::uniform(scene_.goals.size()); }

UserInput Predictor::snap(const UserInput& u) const { return snap_input(u, inputs(), cfg_.dead_zone); }

std::size_t Predictor::input_index(const UserInput& snapped) const {
    const auto& in = inputs();
    for (std::size_t k = 0; k < in.size(); ++k) {
        if (in[k].vec == snapped.vec) return k;
    }
    throw std::invalid_argument("input is not a member of the discrete input set");
}

std::vector<double> Predictor::likelihoods(const RobotState& x, std::size_t goal) const {
    return likelihoods(x, goal, cfg_.mode);
}

std::vector<double> Predictor::likelihoods(const RobotState& raw_x, std::size_t goal, PredictorMode mode) const {
    const Workspace& w = scene_.workspace;
    const RobotState x{w.clamp(raw_x.pos)};
    const auto& in = inputs();
    std::vector<double> q(in.size());

    if (mode == PredictorMode::exact_soft) {
        for (std::size_t k = 0; k < in.size(); ++k) q[k] = soft_->goal_soft_qvalue(x, in[k], goal);
    } else {
        // Hard substitution: Q_g(x,u) = C_k*(x) + V_k*(x'), k* cheapest after the step.
        const Goal& g = scene_.goals[goal];
        const auto values = hard_.fn();
        bool captured = false;
        for (const auto& t : g.targets) captured = captured || distance_to_target(x, t) <= w.capture_radius;
        for (std::size_t k = 0; k < in.size(); ++k) {
            if (captured && in[k].is_zero()) {
                q[k] = 0.0;
                continue;
            }
            q[k] = goal_qvalue(x, direct_teleop(in[k], w), in[k], g, values, p_, w);
        }
    }
    // exp(V - Q) with V = softmin_u Q; exact normalizer in both modes.
    const double v = softmin(q);
    std::vector<double> out(in.size());
    for (std::size_t k = 0; k < in.size(); ++k) out[k] = std::exp(v - q[k]);
    return out;
}

double Predictor::likelihood(const UserInput& u, const RobotState& x, std::size_t goal) const {
    const std::size_t k = input_index(snap(u));
    return likelihoods(x, goal)[k];
}

double input_likelihood(const UserInput& u, const RobotState& x, std::size_t goal, const Predictor& predictor) {
    return predictor.likelihood(u, x, goal);
}

BeliefUpdate belief_update(const Belief& b, const UserInput& u, const RobotState& x, const InputModel& model,
                           double likelihood_floor) {
    if (b.size() != model.goal_count()) throw std::invalid_argument("belief size does not match goal count");
    Belief next{std::vector<double>(b.size())};
    double total = 0.0;
    for (std::size_t g = 0; g < b.size(); ++g) {
        if (b[g] == 0.0) {
            next.probs[g] = 0.0;
            continue;
        }
        next.probs[g] = b[g] * std::max(model.likelihood(u, x, g), likelihood_floor);
        total += next.probs[g];
    }
    if (!(total > 0.0) || !std::isfinite(total)) {
        return {b, "belief update: posterior vanished for every goal; belief left unchanged"};
    }
    for (double& p : next.probs) p /= total;
    return {std::move(next), std::nullopt};
}

double belief_entropy(const Belief& b) {
    double h = 0.0;
    for (double p : b.probs) {
        if (p > 0.0) h -= p * std::log(p);
    }
    return h;
}

std::size_t map_goal(const Belief& b) {
    if (b.probs.empty()) throw std::invalid_argument("map_goal of an empty belief");
    return static_cast<std::size_t>(std::max_element(b.probs.begin(), b.probs.end()) - b.probs.begin());
}

} // namespace sa
