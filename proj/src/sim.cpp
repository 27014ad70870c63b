#include "sa/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <thread>

namespace sa {

using json = nlohmann::json;

double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

UserInput simulated_user_step(const Predictor& predictor, const RobotState& x, std::size_t goal, Rng& rng,
                              double temperature) {
    const double draw = uniform01(rng);
    const auto& inputs = predictor.inputs();
    std::vector<double> p = predictor.likelihoods(x, goal, PredictorMode::exact_soft);

    if (std::isinf(temperature)) {
        return inputs[static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin())];
    }
    if (temperature != 1.0) {
        // p^beta, shifted in log space by the largest entry.
        const double top = *std::max_element(p.begin(), p.end());
        for (double& v : p) v = v > 0.0 ? std::exp(temperature * (std::log(v) - std::log(top))) : 0.0;
    }
    double total = 0.0;
    for (double v : p) total += v;
    double acc = 0.0;
    const double target = draw * total;
    for (std::size_t k = 0; k < p.size(); ++k) {
        acc += p[k];
        if (target < acc) return inputs[k];
    }
    // Round-off at the top of the CDF: last input with nonzero mass.
    for (std::size_t k = p.size(); k-- > 0;) {
        if (p[k] > 0.0) return inputs[k];
    }
    return inputs.front();
}

UserInput MaxEntUser::next(const RobotState& x, int, Rng& rng) {
    return simulated_user_step(predictor_, x, goal_, rng, temperature_);
}

std::string MaxEntUser::describe() const {
    std::ostringstream os;
    os << "maxent(beta=" << temperature_ << ")";
    return os.str();
}

UserInput ScriptedUser::next(const RobotState&, int step, Rng&) {
    if (step >= 0 && static_cast<std::size_t>(step) < inputs_.size()) return inputs_[static_cast<std::size_t>(step)];
    return UserInput::zero(dims_);
}

TrialMetrics compute_metrics(const std::vector<Frame>& frames, double dt, double v_max) {
    TrialMetrics m;
    m.steps = static_cast<int>(frames.size());
    m.time = m.steps * dt;
    for (const auto& f : frames) {
        m.total_input += f.u.norm() * dt;
        const Vec teleop = clamp_norm(f.u * v_max, v_max);
        m.total_assist_deviation += (f.a - teleop).norm() * dt;
    }
    return m;
}

namespace {

Frame make_frame(int step, double dt, const RobotState& x, const UserInput& u, const StepResult& r) {
    return {step, step * dt, x.pos, u.vec, r.action.vel, r.belief.probs, std::nullopt};
}

} // namespace

TrialLog run_trial(const Engine& engine, const TrialSpec& spec, UserModel& user, const InputModel& model) {
    const Scene& scene = engine.scene();
    if (spec.goal >= scene.goals.size()) throw std::invalid_argument("run_trial: goal index out of range");
    const Workspace& w = engine.workspace();

    TrialLog log;
    log.scene_hash = engine.scene_hash();
    for (const auto& g : scene.goals) log.goals.push_back(g.name);
    log.method = spec.method;
    log.true_goal = scene.goals[spec.goal].name;
    log.seed = spec.seed;
    log.user = user.describe();
    log.dt = w.dt;
    log.v_max = w.v_max;
    log.dims = w.dims;
    log.max_steps = spec.max_steps;

    Rng rng(spec.seed);
    RobotState x = scene.start;
    Belief b = engine.predictor().prior();
    for (int step = 0; step < spec.max_steps; ++step) {
        if (engine.captured(x, spec.goal)) break;
        const UserInput u = user.next(x, step, rng);
        const StepResult r = control_step(engine, spec.method, b, x, u, model);
        log.frames.push_back(make_frame(step, w.dt, x, u, r));
        b = r.belief;
        x = r.next;
    }
    if (const auto hit = engine.captured(x, spec.goal)) {
        log.outcome.captured = true;
        log.outcome.goal = scene.goals[hit->first].name;
        log.outcome.target = scene.goals[hit->first].targets[hit->second].id;
    }
    log.metrics = compute_metrics(log.frames, w.dt, w.v_max);
    return log;
}

TrialLog run_trial(const Engine& engine, const TrialSpec& spec, UserModel& user) {
    return run_trial(engine, spec, user, engine.predictor());
}

TrialLog run_trial(const Engine& engine, const TrialSpec& spec, double temperature) {
    MaxEntUser user(engine.predictor(), spec.goal, temperature);
    return run_trial(engine, spec, user);
}

namespace {

json vec_json(const Vec& v) {
    json a = json::array();
    for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

Vec json_vec(const json& j, int dims, int line, const char* field) {
    if (!j.is_array() || static_cast<int>(j.size()) != dims) {
        throw LogParseError(line, std::string("field '") + field + "' must be an array of " + std::to_string(dims) + " numbers");
    }
    Vec v(dims);
    for (int i = 0; i < dims; ++i) {
        if (!j[static_cast<std::size_t>(i)].is_number()) throw LogParseError(line, std::string("field '") + field + "' must be numeric");
        v[i] = j[static_cast<std::size_t>(i)].get<double>();
    }
    return v;
}

template <class T>
T field(const json& j, const char* key, int line) {
    if (!j.contains(key)) throw LogParseError(line, std::string("missing field '") + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw LogParseError(line, std::string("field '") + key + "' has the wrong type");
    }
}

} // namespace

void write_trial_log(std::ostream& out, const TrialLog& log) {
    json header = {{"type", "header"},     {"format", 1},          {"scene_hash", log.scene_hash},
                   {"goals", log.goals},   {"method", to_string(log.method)}, {"goal", log.true_goal},
                   {"seed", log.seed},     {"user", log.user},     {"dt", log.dt},
                   {"v_max", log.v_max},   {"dims", log.dims},     {"max_steps", log.max_steps}};
    out << header.dump() << '\n';
    for (const auto& f : log.frames) {
        json j = {{"type", "frame"}, {"step", f.step}, {"t", f.t},          {"x", vec_json(f.x)},
                  {"u", vec_json(f.u)}, {"a", vec_json(f.a)}, {"belief", f.belief}};
        if (f.method) j["method"] = to_string(*f.method);
        out << j.dump() << '\n';
    }
    json outcome = {{"type", "outcome"},
                    {"captured", log.outcome.captured},
                    {"goal", log.outcome.goal},
                    {"target", log.outcome.target},
                    {"steps", log.metrics.steps},
                    {"time", log.metrics.time},
                    {"total_input", log.metrics.total_input},
                    {"total_assist_deviation", log.metrics.total_assist_deviation}};
    out << outcome.dump() << '\n';
}

std::string trial_log_to_string(const TrialLog& log) {
    std::ostringstream os;
    write_trial_log(os, log);
    return os.str();
}

TrialLog read_trial_log(std::istream& in) {
    TrialLog log;
    std::string text;
    int line = 0;
    bool have_header = false;
    bool have_outcome = false;
    while (std::getline(in, text)) {
        ++line;
        if (text.empty()) continue;
        if (have_outcome) throw LogParseError(line, "content after the outcome line");
        json j;
        try {
            j = json::parse(text);
        } catch (const json::parse_error& e) {
            throw LogParseError(line, std::string("not valid JSON: ") + e.what());
        }
        if (!j.is_object()) throw LogParseError(line, "expected a JSON object");
        const auto type = field<std::string>(j, "type", line);
        if (!have_header) {
            if (type != "header") throw LogParseError(line, "first line must be the header");
            log.scene_hash = field<std::string>(j, "scene_hash", line);
            log.goals = field<std::vector<std::string>>(j, "goals", line);
            const auto m = parse_method(field<std::string>(j, "method", line));
            if (!m) throw LogParseError(line, "unknown method");
            log.method = *m;
            log.true_goal = field<std::string>(j, "goal", line);
            log.seed = field<std::uint64_t>(j, "seed", line);
            log.user = field<std::string>(j, "user", line);
            log.dt = field<double>(j, "dt", line);
            log.v_max = field<double>(j, "v_max", line);
            log.dims = field<int>(j, "dims", line);
            log.max_steps = field<int>(j, "max_steps", line);
            if (log.dims != 2 && log.dims != 3) throw LogParseError(line, "dims must be 2 or 3");
            have_header = true;
        } else if (type == "frame") {
            Frame f;
            f.step = field<int>(j, "step", line);
            if (f.step != static_cast<int>(log.frames.size())) throw LogParseError(line, "frames out of order");
            f.t = field<double>(j, "t", line);
            f.x = json_vec(j.contains("x") ? j.at("x") : json(), log.dims, line, "x");
            f.u = json_vec(j.contains("u") ? j.at("u") : json(), log.dims, line, "u");
            f.a = json_vec(j.contains("a") ? j.at("a") : json(), log.dims, line, "a");
            f.belief = field<std::vector<double>>(j, "belief", line);
            if (f.belief.size() != log.goals.size()) throw LogParseError(line, "belief size does not match goal list");
            if (j.contains("method")) {
                const auto m = parse_method(field<std::string>(j, "method", line));
                if (!m) throw LogParseError(line, "unknown method");
                f.method = m;
            }
            log.frames.push_back(std::move(f));
        } else if (type == "outcome") {
            log.outcome.captured = field<bool>(j, "captured", line);
            log.outcome.goal = field<std::string>(j, "goal", line);
            log.outcome.target = field<int>(j, "target", line);
            log.metrics.steps = field<int>(j, "steps", line);
            log.metrics.time = field<double>(j, "time", line);
            log.metrics.total_input = field<double>(j, "total_input", line);
            log.metrics.total_assist_deviation = field<double>(j, "total_assist_deviation", line);
            have_outcome = true;
        } else {
            throw LogParseError(line, "unknown line type '" + type + "'");
        }
    }
    if (!have_header) throw LogParseError(line, "missing header line");
    if (!have_outcome) throw LogParseError(line, "missing outcome line (truncated log?)");
    return log;
}

std::vector<Frame> replay(const TrialLog& log) { return log.frames; }

std::vector<Belief> recompute_beliefs(const TrialLog& log, const Engine& engine) {
    std::vector<Belief> out;
    out.reserve(log.frames.size());
    Belief b = engine.predictor().prior();
    const double floor = engine.config().predictor.likelihood_floor;
    for (const auto& f : log.frames) {
        const UserInput snapped = engine.predictor().snap({f.u});
        b = belief_update(b, snapped, {f.x}, engine.predictor(), floor).belief;
        out.push_back(b);
    }
    return out;
}

std::uint64_t trial_seed(std::uint64_t base_seed, std::uint64_t index) {
    std::uint64_t z = base_seed + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

namespace {

std::pair<double, double> mean_se(const std::vector<double>& xs) {
    if (xs.empty()) return {0.0, 0.0};
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    if (xs.size() < 2) return {mean, 0.0};
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    const double sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
    return {mean, sd / std::sqrt(static_cast<double>(xs.size()))};
}

} // namespace

ExperimentSummary summarize(const std::string& scene_hash, std::uint64_t base_seed, int trials_per_cell,
                            const std::vector<Method>& methods, std::vector<TrialRecord> trials) {
    ExperimentSummary s;
    s.scene_hash = scene_hash;
    s.base_seed = base_seed;
    s.trials_per_cell = trials_per_cell;
    s.methods = methods;
    s.trials = std::move(trials);

    for (std::size_t m = 0; m < methods.size(); ++m) {
        std::vector<double> steps;
        std::vector<double> input;
        MethodStats st;
        st.method = methods[m];
        for (const auto& t : s.trials) {
            steps.push_back(t.metrics[m].steps);
            input.push_back(t.metrics[m].total_input);
            if (t.captured[m]) ++st.captured;
        }
        st.trials = static_cast<int>(steps.size());
        std::tie(st.mean_steps, st.se_steps) = mean_se(steps);
        std::tie(st.mean_input, st.se_input) = mean_se(input);
        s.stats.push_back(st);
    }
    for (std::size_t i = 0; i < methods.size(); ++i) {
        for (std::size_t j = i + 1; j < methods.size(); ++j) {
            PairComparison pc;
            pc.first = methods[i];
            pc.second = methods[j];
            std::vector<double> ds;
            std::vector<double> di;
            for (const auto& t : s.trials) {
                const int a = t.metrics[i].steps;
                const int b = t.metrics[j].steps;
                if (a < b) ++pc.first_fewer_steps;
                else if (b < a) ++pc.second_fewer_steps;
                else ++pc.ties;
                ds.push_back(b - a);
                di.push_back(t.metrics[j].total_input - t.metrics[i].total_input);
            }
            pc.mean_step_difference = mean_se(ds).first;
            pc.mean_input_difference = mean_se(di).first;
            s.pairs.push_back(pc);
        }
    }
    return s;
}

ExperimentResult run_experiment(const Engine& engine, const ExperimentOptions& opts) {
    const std::size_t goals = engine.scene().goals.size();
    const std::size_t total = static_cast<std::size_t>(std::max(0, opts.trials_per_cell)) * goals;
    const std::size_t nm = opts.methods.size();

    std::vector<TrialLog> logs(total * nm);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < total; i = next++) {
            const std::size_t goal = i % goals;
            const std::uint64_t seed = trial_seed(opts.base_seed, i);
            for (std::size_t m = 0; m < nm; ++m) {
                TrialSpec spec{opts.methods[m], goal, seed, opts.max_steps};
                logs[i * nm + m] = run_trial(engine, spec, opts.temperature);
            }
        }
    };
    unsigned threads = opts.threads ? opts.threads : std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(total, 1)));
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();

    std::vector<TrialRecord> records;
    records.reserve(total);
    for (std::size_t i = 0; i < total; ++i) {
        TrialRecord r;
        r.trial = static_cast<int>(i);
        r.goal = engine.scene().goals[i % goals].name;
        r.seed = trial_seed(opts.base_seed, i);
        for (std::size_t m = 0; m < nm; ++m) {
            r.metrics.push_back(logs[i * nm + m].metrics);
            r.captured.push_back(logs[i * nm + m].outcome.captured);
        }
        records.push_back(std::move(r));
    }
    ExperimentResult result;
    result.summary = summarize(engine.scene_hash(), opts.base_seed, opts.trials_per_cell, opts.methods, std::move(records));
    result.logs = std::move(logs);
    return result;
}

json to_json(const ExperimentSummary& s) {
    json methods = json::array();
    for (const auto& st : s.stats) {
        methods.push_back({{"method", to_string(st.method)},
                           {"trials", st.trials},
                           {"captured", st.captured},
                           {"mean_steps", st.mean_steps},
                           {"se_steps", st.se_steps},
                           {"mean_total_input", st.mean_input},
                           {"se_total_input", st.se_input}});
    }
    json pairs = json::array();
    for (const auto& p : s.pairs) {
        pairs.push_back({{"first", to_string(p.first)},
                         {"second", to_string(p.second)},
                         {"first_fewer_steps", p.first_fewer_steps},
                         {"second_fewer_steps", p.second_fewer_steps},
                         {"ties", p.ties},
                         {"mean_step_difference", p.mean_step_difference},
                         {"mean_input_difference", p.mean_input_difference}});
    }
    json trials = json::array();
    for (const auto& t : s.trials) {
        json per = json::object();
        for (std::size_t m = 0; m < s.methods.size(); ++m) {
            per[to_string(s.methods[m])] = {{"steps", t.metrics[m].steps},
                                            {"time", t.metrics[m].time},
                                            {"total_input", t.metrics[m].total_input},
                                            {"total_assist_deviation", t.metrics[m].total_assist_deviation},
                                            {"captured", static_cast<bool>(t.captured[m])}};
        }
        trials.push_back({{"trial", t.trial}, {"goal", t.goal}, {"seed", t.seed}, {"methods", per}});
    }
    return {{"scene_hash", s.scene_hash}, {"base_seed", s.base_seed}, {"trials_per_cell", s.trials_per_cell},
            {"methods", methods},         {"pairs", pairs},           {"trials", trials}};
}

std::string summary_csv(const ExperimentSummary& s) {
    std::ostringstream os;
    os.precision(17);
    os << "trial,goal,seed,method,steps,time,total_input,total_assist_deviation,captured\n";
    for (const auto& t : s.trials) {
        for (std::size_t m = 0; m < s.methods.size(); ++m) {
            const auto& mt = t.metrics[m];
            os << t.trial << ',' << t.goal << ',' << t.seed << ',' << to_string(s.methods[m]) << ',' << mt.steps << ','
               << mt.time << ',' << mt.total_input << ',' << mt.total_assist_deviation << ','
               << (t.captured[m] ? 1 : 0) << '\n';
        }
    }
    return os.str();
}

} // namespace sa
