// Scene configuration files (JSON) and their validation.

#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sa/assist.hpp"
#include "sa/costs.hpp"
#include "sa/grid.hpp"
#include "sa/prediction.hpp"
#include "sa/world.hpp"

namespace sa {

struct SceneConfig {
    Scene scene;
    CostParams cost;
    PredictorConfig predictor;
    AssistConfig assist;
    GridSpec grid;
    bool diagonals = false;
};

struct FieldError {
    std::string field; // e.g. "goals[1].targets[0]"
    std::string message;
};

/// Every offending field found while loading, not just the first.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(std::vector<FieldError> errors);
    [[nodiscard]] const std::vector<FieldError>& errors() const { return errors_; }

private:
    std::vector<FieldError> errors_;
};

SceneConfig parse_scene_config(const nlohmann::json& doc);
SceneConfig load_scene_config(const std::filesystem::path& path);

/// Canonical document for a config; parse_scene_config(to_json(c)) == c.
nlohmann::json to_json(const SceneConfig& cfg);

/// FNV-1a over the canonical document, as 16 hex digits.
std::string scene_hash(const SceneConfig& cfg);

} // namespace sa
