#include <doctest.h>

#include <random>

#include "sa/world.hpp"
#include "support.hpp"

using namespace sa;
using test::v2;
using test::v3;

TEST_CASE("transition integrates velocity over dt") {
    Workspace w = Workspace::unit(2);
    w.dt = 0.1;
    w.v_max = 2.0;
    const RobotState next = transition({v2(0, 0)}, {v2(1, 0)}, w);
    CHECK(next.pos[0] == doctest::Approx(0.1));
    CHECK(next.pos[1] == 0.0);
}

TEST_CASE("zero action is a fixed point") {
    const Workspace w = Workspace::unit(2);
    const RobotState x{v2(0.37, 0.81)};
    CHECK(transition(x, Action::zero(2), w).pos == x.pos);
}

TEST_CASE("transition clamps at the boundary") {
    const Workspace w = Workspace::unit(2);
    const RobotState next = transition({v2(1.0, 0.5)}, {v2(0.5, 0.0)}, w);
    CHECK(next.pos[0] == 1.0);
    CHECK(next.pos[1] == 0.5);
    const RobotState slide = transition({v2(1.0, 0.5)}, {v2(0.3, 0.4)}, w);
    CHECK(slide.pos[0] == 1.0);
    CHECK(slide.pos[1] == doctest::Approx(0.5 + 0.4 * w.dt));
}

TEST_CASE("transition is deterministic and bounded by one step") {
    const Workspace w = Workspace::unit(3);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> pos(0.0, 1.0);
    std::uniform_real_distribution<double> vel(-1.0, 1.0);
    for (int i = 0; i < 500; ++i) {
        const RobotState x{v3(pos(rng), pos(rng), pos(rng))};
        const Action a{clamp_norm(v3(vel(rng), vel(rng), vel(rng)), w.v_max)};
        const RobotState a1 = transition(x, a, w);
        const RobotState a2 = transition(x, a, w);
        CHECK(a1.pos == a2.pos);
        CHECK((a1.pos - x.pos).norm() <= w.v_max * w.dt + 1e-15);
        CHECK(w.contains(a1.pos));
    }
}

TEST_CASE("direct teleoperation") {
    Workspace w = Workspace::unit(2);
    CHECK(direct_teleop({v2(0, 0)}, w).vel == v2(0, 0));
    w.v_max = 0.5;
    CHECK(direct_teleop({v2(1, 0)}, w).vel == v2(0.5, 0));
    w.v_max = 1.0;
    const Action diag = direct_teleop({v2(1, 1)}, w);
    CHECK(diag.vel[0] == doctest::Approx(0.70710678118654757));
    CHECK(diag.vel[1] == doctest::Approx(0.70710678118654757));
    CHECK(diag.vel.norm() <= 1.0 + 1e-15);
}

TEST_CASE("distance to target") {
    CHECK(distance_to_target({v2(0, 0)}, {0, v2(3, 4)}) == 5.0);
    CHECK(distance_to_target({v2(0.2, 0.3)}, {0, v2(0.2, 0.3)}) == 0.0);
    CHECK(distance_to_target({v3(1, 1, 1)}, {0, v3(1, 1, 1)}) == 0.0);
}

TEST_CASE("distance satisfies the triangle inequality") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> c(-2.0, 2.0);
    for (int i = 0; i < 1000; ++i) {
        const Vec a = v3(c(rng), c(rng), c(rng));
        const Vec b = v3(c(rng), c(rng), c(rng));
        const Vec k = v3(c(rng), c(rng), c(rng));
        const double ab = distance_to_target({a}, {0, b});
        const double bk = distance_to_target({b}, {0, k});
        const double ak = distance_to_target({a}, {0, k});
        CHECK(ak <= ab + bk + 1e-12);
    }
}

TEST_CASE("discrete input sets") {
    const auto two = discretize_inputs(2, false);
    REQUIRE(two.size() == 5);
    CHECK(two[0].vec == v2(0, 0));
    CHECK(two[1].vec == v2(1, 0));
    CHECK(two[2].vec == v2(-1, 0));
    CHECK(two[3].vec == v2(0, 1));
    CHECK(two[4].vec == v2(0, -1));
    CHECK(discretize_inputs(3, false).size() == 7);

    const auto diag = discretize_inputs(2, true);
    REQUIRE(diag.size() == 9);
    for (std::size_t i = 5; i < diag.size(); ++i) {
        CHECK(diag[i].vec.norm() == doctest::Approx(1.0));
        CHECK(std::abs(diag[i].vec[0]) == doctest::Approx(std::abs(diag[i].vec[1])));
    }
    CHECK(discretize_inputs(3, true).size() == 27);
}

TEST_CASE("discrete input sets contain zero and are closed under negation") {
    for (int dims : {2, 3}) {
        for (bool diag : {false, true}) {
            const auto inputs = discretize_inputs(dims, diag);
            CHECK(inputs.front().is_zero());
            for (const auto& u : inputs) {
                bool found = false;
                for (const auto& v : inputs) found = found || (v.vec + u.vec).isZero(1e-15);
                CHECK(found);
            }
        }
    }
}

TEST_CASE("workspace validation") {
    Workspace w = Workspace::unit(2);
    CHECK_NOTHROW(w.validate());
    w.dt = 0.0;
    CHECK_THROWS_AS(w.validate(), std::invalid_argument);
    w = Workspace::unit(2);
    w.upper[1] = w.lower[1];
    CHECK_THROWS_AS(w.validate(), std::invalid_argument);
    w = Workspace::unit(2);
    w.capture_radius = -1.0;
    CHECK_THROWS_AS(w.validate(), std::invalid_argument);
    w = Workspace::unit(2);
    w.dims = 4;
    CHECK_THROWS_AS(w.validate(), std::invalid_argument);
}

TEST_CASE("scene validation") {
    Scene s;
    s.workspace = Workspace::unit(2);
    s.start = {v2(0.5, 0.5)};
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    s.goals.push_back({0, "a", {{0, v2(0.1, 0.1)}}});
    CHECK_NOTHROW(s.validate());
    s.goals.push_back({1, "b", {{0, v2(1.5, 0.1)}}});
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    s.goals[1].targets[0].pos = v2(0.9, 0.9);
    s.goals[1].targets.push_back({0, v2(0.8, 0.9)});
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    s.goals[1].targets[1].id = 1;
    CHECK_NOTHROW(s.validate());
    CHECK(s.find_goal("b") == 1);
    CHECK(s.find_goal("c") == -1);
}
