#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "sa/sim.hpp"
#include "support.hpp"

using namespace sa;
using test::v2;

TEST_CASE("uniform01 uses one draw and stays in [0, 1)") {
    Rng a(7);
    Rng b(7);
    for (int i = 0; i < 1000; ++i) {
        const double u = uniform01(a);
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        b.discard(1);
        CHECK(a == b);
    }
}

TEST_CASE("simulated user consumes exactly one draw per step") {
    const auto e = test::engine("default.json");
    for (double beta : {1.0, 2.0, 0.5, std::numeric_limits<double>::infinity()}) {
        Rng a(11);
        Rng b(11);
        for (int i = 0; i < 20; ++i) {
            (void)simulated_user_step(e->predictor(), {v2(0.1 + 0.04 * i, 0.3)}, 1, a, beta);
            b.discard(1);
            CHECK(a == b);
        }
    }
}

TEST_CASE("simulated user frequencies match the MaxEnt policy") {
    const auto e = test::engine("separated.json");
    const RobotState x{v2(0.42, 0.37)};
    const std::size_t goal = 2;
    const auto p = e->predictor().likelihoods(x, goal, PredictorMode::exact_soft);
    const auto& inputs = e->inputs();
    std::vector<int> counts(inputs.size(), 0);
    Rng rng(12345);
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        const UserInput u = simulated_user_step(e->predictor(), x, goal, rng);
        for (std::size_t k = 0; k < inputs.size(); ++k) {
            if (inputs[k].vec == u.vec) ++counts[k];
        }
    }
    double chi2 = 0.0;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        const double expected = n * p[k];
        REQUIRE(expected > 5.0);
        chi2 += (counts[k] - expected) * (counts[k] - expected) / expected;
    }
    // 0.999 quantile of chi-square with 4 degrees of freedom.
    CHECK(chi2 < 18.467);
}

TEST_CASE("infinite temperature returns the most likely input") {
    const auto e = test::engine("separated.json");
    Rng rng(3);
    const RobotState x{v2(0.5, 0.5)};
    const auto p = e->predictor().likelihoods(x, 0, PredictorMode::exact_soft);
    const auto best = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
    for (int i = 0; i < 20; ++i) {
        CHECK(simulated_user_step(e->predictor(), x, 0, rng, std::numeric_limits<double>::infinity()).vec ==
              e->inputs()[best].vec);
    }
}

TEST_CASE("a simulated user at the target mostly sends zero") {
    const auto e = test::engine("single_goal.json");
    const RobotState at{e->scene().goals[0].targets[0].pos};
    Rng rng(9);
    int zeros = 0;
    const int n = 2000;
    for (int i = 0; i < n; ++i) zeros += simulated_user_step(e->predictor(), at, 0, rng).is_zero() ? 1 : 0;
    const auto p = e->predictor().likelihoods(at, 0, PredictorMode::exact_soft);
    CHECK(zeros > n / 2);
    CHECK(p[0] == *std::max_element(p.begin(), p.end()));
}

TEST_CASE("direct teleoperation with an argmax user takes the straight-line step count") {
    const auto e = test::engine("single_goal.json");
    const Workspace& w = e->workspace();
    const double d = (e->scene().goals[0].targets[0].pos - e->scene().start.pos).norm();
    const double expected = std::ceil((d - w.capture_radius) / (w.v_max * w.dt));
    const TrialLog log = run_trial(*e, {Method::direct, 0, 1, 2000}, std::numeric_limits<double>::infinity());
    CHECK(log.outcome.captured);
    CHECK(std::abs(log.metrics.steps - expected) <= 1.0);
}

TEST_CASE("the policy completes the task with no user input") {
    const auto e = test::engine("single_goal.json");
    ZeroUser none(2);
    const TrialLog policy = run_trial(*e, {Method::policy, 0, 1, 2000}, none);
    CHECK(policy.outcome.captured);
    CHECK(policy.outcome.goal == "cup");

    const TrialLog direct = run_trial(*e, {Method::direct, 0, 1, 200}, none);
    CHECK_FALSE(direct.outcome.captured);
    for (const auto& f : direct.frames) CHECK(f.x == e->scene().start.pos);
}

TEST_CASE("trials are deterministic") {
    const auto e = test::engine("default.json");
    for (Method m : {Method::policy, Method::blend, Method::direct}) {
        const TrialSpec spec{m, 2, 42, 400};
        CHECK(trial_log_to_string(run_trial(*e, spec)) == trial_log_to_string(run_trial(*e, spec)));
    }
}

TEST_CASE("the policy is never slower than direct teleoperation with an argmax user") {
    const double beta = std::numeric_limits<double>::infinity();
    for (const char* name : {"single_goal.json", "default.json"}) {
        const auto e = test::engine(name);
        for (std::size_t g = 0; g < e->scene().goals.size(); ++g) {
            for (std::uint64_t seed : {0ULL, 5ULL, 17ULL}) {
                const TrialLog policy = run_trial(*e, {Method::policy, g, seed, 2000}, beta);
                const TrialLog direct = run_trial(*e, {Method::direct, g, seed, 2000}, beta);
                CHECK(policy.outcome.captured);
                CHECK(direct.outcome.captured);
                CHECK(policy.metrics.steps <= direct.metrics.steps);
            }
        }
    }
}

TEST_CASE("trial frames record the state at which each input was given") {
    const auto e = test::engine("default.json");
    const TrialLog log = run_trial(*e, {Method::blend, 0, 3, 300});
    REQUIRE(log.frames.size() >= 2);
    CHECK(log.frames[0].x == e->scene().start.pos);
    for (std::size_t i = 0; i + 1 < log.frames.size(); ++i) {
        const RobotState next = transition({log.frames[i].x}, {log.frames[i].a}, e->workspace());
        CHECK(log.frames[i + 1].x == next.pos);
        CHECK(log.frames[i].step == static_cast<int>(i));
    }
}

TEST_CASE("trial log round trip") {
    const auto e = test::engine("default.json");
    const TrialLog log = run_trial(*e, {Method::policy, 1, 77, 500});
    const std::string text = trial_log_to_string(log);
    std::istringstream in(text);
    const TrialLog back = read_trial_log(in);
    CHECK(trial_log_to_string(back) == text);
    CHECK(back.metrics == log.metrics);
    CHECK(compute_metrics(back.frames, back.dt, back.v_max) == log.metrics);
    REQUIRE(replay(back).size() == log.frames.size());
    for (std::size_t i = 0; i < log.frames.size(); ++i) CHECK(replay(back)[i].a == log.frames[i].a);
}

TEST_CASE("recomputed beliefs match the logged ones") {
    const auto e = test::engine("default.json");
    const TrialLog log = run_trial(*e, {Method::blend, 2, 19, 500});
    const auto beliefs = recompute_beliefs(log, *e);
    REQUIRE(beliefs.size() == log.frames.size());
    for (std::size_t i = 0; i < beliefs.size(); ++i) {
        for (std::size_t g = 0; g < 3; ++g) CHECK(std::abs(beliefs[i][g] - log.frames[i].belief[g]) <= 1e-9);
    }
}

TEST_CASE("a log without frames replays to nothing") {
    TrialLog log;
    log.goals = {"a", "b"};
    log.dt = 0.05;
    log.v_max = 0.5;
    CHECK(replay(log).empty());
    CHECK(compute_metrics(log.frames, log.dt, log.v_max) == TrialMetrics{});
    std::istringstream in(trial_log_to_string(log));
    CHECK(read_trial_log(in).frames.empty());
}

TEST_CASE("corrupt logs report the offending line") {
    const auto e = test::engine("default.json");
    const std::string text = trial_log_to_string(run_trial(*e, {Method::direct, 0, 1, 5}));
    std::vector<std::string> lines;
    std::istringstream split(text);
    for (std::string l; std::getline(split, l);) lines.push_back(l);
    REQUIRE(lines.size() == 7);

    auto parse_line = [](const std::string& s) {
        std::istringstream in(s);
        try {
            (void)read_trial_log(in);
        } catch (const LogParseError& err) {
            return err.line();
        }
        return 0;
    };
    auto join = [](const std::vector<std::string>& ls) {
        std::string s;
        for (const auto& l : ls) s += l + "\n";
        return s;
    };

    auto truncated = lines;
    truncated.pop_back();
    CHECK(parse_line(join(truncated)) == 6);

    auto garbled = lines;
    garbled[3] = garbled[3].substr(0, garbled[3].size() / 2);
    CHECK(parse_line(join(garbled)) == 4);

    auto swapped = lines;
    std::swap(swapped[2], swapped[3]);
    CHECK(parse_line(join(swapped)) == 3);

    auto headless = lines;
    headless.erase(headless.begin());
    CHECK(parse_line(join(headless)) == 1);

    auto trailing = lines;
    trailing.push_back(lines[1]);
    CHECK(parse_line(join(trailing)) == 8);

    auto bad_belief = lines;
    bad_belief[2] = R"({"type":"frame","step":1,"t":0.05,"x":[0.5,0.1],"u":[0,0],"a":[0,0],"belief":[1.0]})";
    CHECK(parse_line(join(bad_belief)) == 3);
}

TEST_CASE("an empty log is missing its header") {
    std::istringstream in("");
    CHECK_THROWS_AS(read_trial_log(in), LogParseError);
}

TEST_CASE("trial seeds are distinct and stable") {
    CHECK(trial_seed(0, 0) == trial_seed(0, 0));
    std::set<std::uint64_t> seen;
    for (std::uint64_t i = 0; i < 1000; ++i) seen.insert(trial_seed(99, i));
    CHECK(seen.size() == 1000);
    CHECK(trial_seed(1, 0) != trial_seed(2, 0));
}

TEST_CASE("paired experiment design") {
    const auto e = test::engine("default.json");
    ExperimentOptions opts;
    opts.methods = {Method::policy, Method::blend, Method::direct};
    opts.trials_per_cell = 2;
    opts.base_seed = 5;
    opts.max_steps = 400;
    opts.threads = 3;
    const ExperimentResult r = run_experiment(*e, opts);
    REQUIRE(r.summary.trials.size() == 6);
    REQUIRE(r.logs.size() == 18);
    for (std::size_t i = 0; i < 6; ++i) {
        for (std::size_t m = 0; m < 3; ++m) {
            const TrialLog& log = r.logs[i * 3 + m];
            CHECK(log.method == opts.methods[m]);
            CHECK(log.seed == trial_seed(5, i));
            CHECK(log.true_goal == e->scene().goals[i % 3].name);
            const TrialLog again = run_trial(*e, {opts.methods[m], i % 3, log.seed, 400});
            CHECK(trial_log_to_string(again) == trial_log_to_string(log));
        }
    }

    opts.threads = 1;
    const ExperimentResult serial = run_experiment(*e, opts);
    CHECK(to_json(serial.summary) == to_json(r.summary));
    CHECK(summary_csv(serial.summary) == summary_csv(r.summary));
}

TEST_CASE("summary statistics") {
    std::vector<TrialRecord> records;
    const std::vector<int> a{10, 12, 9, 20};
    const std::vector<int> b{11, 12, 15, 18};
    for (std::size_t i = 0; i < a.size(); ++i) {
        TrialRecord r;
        r.trial = static_cast<int>(i);
        r.goal = "g";
        r.metrics = {TrialMetrics{a[i], a[i] * 0.05, 1.0, 0.0}, TrialMetrics{b[i], b[i] * 0.05, 2.0, 0.0}};
        r.captured = {true, i != 3};
        records.push_back(r);
    }
    const auto s = summarize("h", 0, 4, {Method::policy, Method::blend}, records);
    REQUIRE(s.stats.size() == 2);
    CHECK(s.stats[0].mean_steps == doctest::Approx(12.75));
    CHECK(s.stats[0].se_steps == doctest::Approx(std::sqrt((7.5625 + 0.5625 + 14.0625 + 52.5625) / 3.0) / 2.0));
    CHECK(s.stats[1].captured == 3);
    CHECK(s.stats[1].mean_input == doctest::Approx(2.0));
    CHECK(s.stats[1].se_input == 0.0);
    REQUIRE(s.pairs.size() == 1);
    CHECK(s.pairs[0].first_fewer_steps == 2);
    CHECK(s.pairs[0].second_fewer_steps == 1);
    CHECK(s.pairs[0].ties == 1);
    CHECK(s.pairs[0].mean_step_difference == doctest::Approx(1.25));
    CHECK(s.pairs[0].mean_input_difference == doctest::Approx(1.0));

    const std::string csv = summary_csv(s);
    CHECK(csv.rfind("trial,goal,seed,method,steps,time,total_input,total_assist_deviation,captured\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 9);
}

TEST_CASE("zero trials give an empty summary") {
    const auto e = test::engine("default.json");
    ExperimentOptions opts;
    opts.methods = {Method::policy, Method::direct};
    opts.trials_per_cell = 0;
    const ExperimentResult r = run_experiment(*e, opts);
    CHECK(r.logs.empty());
    CHECK(r.summary.trials.empty());
    REQUIRE(r.summary.stats.size() == 2);
    CHECK(r.summary.stats[0].trials == 0);
    CHECK(r.summary.stats[0].mean_steps == 0.0);
    CHECK(summary_csv(r.summary) == "trial,goal,seed,method,steps,time,total_input,total_assist_deviation,captured\n");
}

TEST_CASE("metrics") {
    std::vector<Frame> frames(2);
    frames[0].u = v2(1, 0);
    frames[0].a = v2(0.5, 0);
    frames[1].u = v2(0, 0);
    frames[1].a = v2(0.3, 0.4);
    const TrialMetrics m = compute_metrics(frames, 0.1, 0.5);
    CHECK(m.steps == 2);
    CHECK(m.time == doctest::Approx(0.2));
    CHECK(m.total_input == doctest::Approx(0.1));
    CHECK(m.total_assist_deviation == doctest::Approx(0.05));
}
