#pragma once

#include "nsm/raster.hpp"
#include "nsm/scene.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace nsm {

/// Contents of a scene file. Lengths in meters, angles in radians.
///
///   {
///     "primitives": [
///       {"name": "ground", "type": "plane", "center": [0,0,0], "normal": [0,1,0],
///        "tangent": [1,0,0], "half_u": 3, "half_v": 3},
///       {"name": "ball", "type": "sphere", "center": [0,1,0], "radius": 0.5},
///       {"name": "crate", "type": "box", "lo": [0,0,0], "hi": [1,1,1]},
///       {"name": "wedge", "type": "mesh", "vertices": [[...], ...], "faces": [[0,1,2], ...]}
///     ],
///     "emitter": {"center": [0,4,0], "size_index": 2},
///     "camera": {"position": [...], "forward": [...], "up": [0,1,0], "fov_y": 0.9,
///                "height": 128, "width": 256},
///     "perturbation": {"count": 3, "camera_scale": 0.01, "emitter_scale": 0.1, "seed": 0},
///     "shadow_map": {"height": 512, "width": 512, "fov": 0},
///     "size_indices": [0, 1, 2, 3]
///   }
///
/// Everything but "primitives", "emitter" and "camera" is optional.
struct SceneConfig {
    std::vector<Primitive> objects;
    Emitter emitter;
    CameraPose camera;
    PerturbationSpec perturbation;
    ShadowMapSettings shadow_map;
    std::vector<double> size_indices{0.0, 1.0, 2.0, 3.0};

    Scene scene() const { return Scene(objects, emitter); }
};

SceneConfig scene_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SceneConfig& c);
SceneConfig load_scene_config(const std::string& path);

/// Trajectory file:
///
///   {
///     "camera": [{"time": 0, "position": [...], "forward": [...], "up": [...], "fov_y": 0.9}, ...],
///     "emitter": [{"time": 0, "center": [...]}, ...],
///     "objects": [{"object": 1, "keys": [{"time": 0, "offset": [0,0,0]}, ...]}]
///   }
///
/// Camera keys inherit resolution (and any omitted field) from the scene camera.
/// A missing "camera" list keeps the scene camera fixed.
Trajectory trajectory_from_json(const nlohmann::json& j, const SceneConfig& scene);
nlohmann::json to_json(const Trajectory& t);
Trajectory load_trajectory(const std::string& path, const SceneConfig& scene);

/// One camera key at t = 0 and nothing else.
Trajectory static_trajectory(const CameraPose& camera);

nlohmann::json to_json(const Vec3& v);
Vec3 vec3_from_json(const nlohmann::json& j);

} // namespace nsm
