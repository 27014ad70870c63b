// Shared fixtures for the unit tests.

#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <string>

#include "sa/engine.hpp"
#include "sa/scene_config.hpp"

namespace test {

inline std::string scene_path(const std::string& name) { return std::string(SA_SCENE_DIR) + "/" + name; }

inline sa::SceneConfig load(const std::string& name) { return sa::load_scene_config(scene_path(name)); }

/// Engines are expensive to build; share one per bundled scene.
inline std::shared_ptr<const sa::Engine> engine(const std::string& name) {
    static std::mutex mu;
    static std::map<std::string, std::shared_ptr<const sa::Engine>> cache;
    std::lock_guard lock(mu);
    auto& e = cache[name];
    if (!e) e = sa::Engine::build(load(name));
    return e;
}

inline sa::Vec v2(double x, double y) {
    sa::Vec v(2);
    v << x, y;
    return v;
}

inline sa::Vec v3(double x, double y, double z) {
    sa::Vec v(3);
    v << x, y, z;
    return v;
}

inline sa::Workspace unit2() { return sa::Workspace::unit(2); }

} // namespace test
