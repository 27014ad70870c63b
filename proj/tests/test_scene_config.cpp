#include <doctest.h>

#include <algorithm>
#include <fstream>

#include "sa/engine.hpp"
#include "sa/scene_config.hpp"
#include "support.hpp"

using namespace sa;
using nlohmann::json;

namespace {

json minimal() {
    return json::parse(R"({
        "workspace": {"dims": 2, "bounds": [[0, 1], [0, 1]], "dt": 0.05, "v_max": 0.5, "epsilon": 0.02},
        "goals": [{"name": "a", "targets": [[0.2, 0.8]]}, {"name": "b", "targets": [[0.8, 0.8]]}],
        "start": [0.5, 0.1]
    })");
}

std::vector<FieldError> errors_of(const json& doc) {
    try {
        (void)parse_scene_config(doc);
    } catch (const ValidationError& e) {
        return e.errors();
    }
    return {};
}

bool has_field(const std::vector<FieldError>& errs, const std::string& field) {
    return std::any_of(errs.begin(), errs.end(), [&](const FieldError& e) { return e.field == field; });
}

} // namespace

TEST_CASE("bundled scenes load and build") {
    for (const char* name : {"default.json", "two_goal.json", "single_goal.json", "separated.json", "shelf3d.json"}) {
        CAPTURE(name);
        const SceneConfig cfg = test::load(name);
        CHECK_FALSE(cfg.scene.goals.empty());
        CHECK(cfg.scene.workspace.contains(cfg.scene.start.pos));
        CHECK(test::engine(name)->scene_hash() == scene_hash(cfg));
    }
    CHECK(test::load("default.json").scene.goals.size() == 3);
    CHECK(test::load("default.json").scene.goals[0].targets.size() == 4);
    CHECK(test::load("shelf3d.json").scene.workspace.dims == 3);
}

TEST_CASE("a minimal scene gets defaults") {
    const SceneConfig cfg = parse_scene_config(minimal());
    CHECK(cfg.cost.alpha == 1.0);
    CHECK(cfg.assist.method == Method::policy);
    CHECK(cfg.predictor.mode == PredictorMode::exact_soft);
    CHECK(cfg.scene.goals[1].name == "b");
    CHECK(cfg.scene.goals[1].id == 1);
}

TEST_CASE("missing targets are reported with their path") {
    json doc = minimal();
    doc["goals"][1].erase("targets");
    CHECK(has_field(errors_of(doc), "goals[1].targets"));
    doc["goals"][1]["targets"] = json::array();
    CHECK(has_field(errors_of(doc), "goals[1].targets"));
}

TEST_CASE("targets outside the workspace are rejected") {
    json doc = minimal();
    doc["goals"][0]["targets"].push_back({1.2, 0.5});
    const auto errs = errors_of(doc);
    REQUIRE(errs.size() == 1);
    CHECK(errs[0].field == "goals[0].targets[1]");
}

TEST_CASE("unknown keys are rejected") {
    json doc = minimal();
    doc["workspace"]["gravity"] = 9.8;
    doc["colour"] = "red";
    const auto errs = errors_of(doc);
    CHECK(has_field(errs, "workspace.gravity"));
    CHECK(has_field(errs, "colour"));
}

TEST_CASE("every error is reported, not just the first") {
    json doc = minimal();
    doc["workspace"]["dt"] = -1;
    doc["goals"][0]["name"] = "b";
    doc["goals"][1]["targets"][0] = {0.5};
    doc["cost"] = {{"alpha", -2}};
    const auto errs = errors_of(doc);
    CHECK(errs.size() >= 4);
    CHECK(has_field(errs, "workspace.dt"));
    CHECK(has_field(errs, "goals[1].name"));
    CHECK(has_field(errs, "goals[1].targets[0]"));
}

TEST_CASE("zero goals are rejected") {
    json doc = minimal();
    doc["goals"] = json::array();
    CHECK(has_field(errors_of(doc), "goals"));
}

TEST_CASE("wrong dimensionality and bad bounds") {
    json doc = minimal();
    doc["workspace"]["dims"] = 4;
    CHECK(has_field(errors_of(doc), "workspace.dims"));
    doc = minimal();
    doc["workspace"]["bounds"][1] = {1, 0};
    CHECK(has_field(errors_of(doc), "workspace.bounds[1]"));
}

TEST_CASE("unreadable files are validation errors") {
    CHECK_THROWS_AS(load_scene_config("/nonexistent/scene.json"), ValidationError);
    const auto path = std::filesystem::temp_directory_path() / "sa_bad_scene.json";
    std::ofstream(path) << "{ not json";
    CHECK_THROWS_AS(load_scene_config(path), ValidationError);
    std::filesystem::remove(path);
}

TEST_CASE("canonical documents round trip") {
    for (const char* name : {"default.json", "shelf3d.json", "two_goal.json"}) {
        const SceneConfig cfg = test::load(name);
        const json doc = to_json(cfg);
        const SceneConfig back = parse_scene_config(doc);
        CHECK(to_json(back) == doc);
        CHECK(scene_hash(back) == scene_hash(cfg));
    }
}

TEST_CASE("the scene hash changes with the content") {
    const SceneConfig a = parse_scene_config(minimal());
    json doc = minimal();
    doc["goals"][0]["targets"][0][0] = 0.25;
    const SceneConfig b = parse_scene_config(doc);
    CHECK(scene_hash(a) != scene_hash(b));
    CHECK(scene_hash(a).size() == 16);
    CHECK(scene_hash(a) == scene_hash(parse_scene_config(minimal())));
}
