#include "nsm/config.hpp"

#include "nsm/io.hpp"

#include <stdexcept>

namespace nsm {

using nlohmann::json;

json to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 vec3_from_json(const json& j)
{
    if (!j.is_array() || j.size() != 3) throw std::invalid_argument("expected a 3-vector, got " + j.dump());
    return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

namespace {

Primitive primitive_from_json(const json& j)
{
    Primitive p;
    p.name = j.value("name", std::string());
    const std::string type = j.at("type").get<std::string>();
    if (type == "plane") {
        Plane s;
        s.center = vec3_from_json(j.at("center"));
        s.normal = vec3_from_json(j.at("normal")).normalized();
        s.tangent = vec3_from_json(j.at("tangent")).normalized();
        s.half_u = j.at("half_u").get<double>();
        s.half_v = j.at("half_v").get<double>();
        p.shape = s;
    } else if (type == "sphere") {
        p.shape = Sphere{vec3_from_json(j.at("center")), j.at("radius").get<double>()};
    } else if (type == "box") {
        p.shape = Box{vec3_from_json(j.at("lo")), vec3_from_json(j.at("hi"))};
    } else if (type == "mesh") {
        TriMesh m;
        for (const auto& v : j.at("vertices")) m.vertices.push_back(vec3_from_json(v));
        for (const auto& f : j.at("faces")) m.faces.push_back({f.at(0).get<int>(), f.at(1).get<int>(), f.at(2).get<int>()});
        p.shape = std::move(m);
    } else {
        throw std::invalid_argument("unknown primitive type '" + type + "'");
    }
    return p;
}

json primitive_to_json(const Primitive& p)
{
    json j;
    j["name"] = p.name;
    if (const auto* s = std::get_if<Plane>(&p.shape)) {
        j["type"] = "plane";
        j["center"] = to_json(s->center);
        j["normal"] = to_json(s->normal);
        j["tangent"] = to_json(s->tangent);
        j["half_u"] = s->half_u;
        j["half_v"] = s->half_v;
    } else if (const auto* s = std::get_if<Sphere>(&p.shape)) {
        j["type"] = "sphere";
        j["center"] = to_json(s->center);
        j["radius"] = s->radius;
    } else if (const auto* s = std::get_if<Box>(&p.shape)) {
        j["type"] = "box";
        j["lo"] = to_json(s->lo);
        j["hi"] = to_json(s->hi);
    } else if (const auto* s = std::get_if<TriMesh>(&p.shape)) {
        j["type"] = "mesh";
        j["vertices"] = json::array();
        for (const auto& v : s->vertices) j["vertices"].push_back(to_json(v));
        j["faces"] = json::array();
        for (const auto& f : s->faces) j["faces"].push_back({f[0], f[1], f[2]});
    }
    return j;
}

CameraPose camera_from_json(const json& j, const CameraPose& base)
{
    CameraPose c = base;
    if (j.contains("position")) c.position = vec3_from_json(j["position"]);
    if (j.contains("forward")) c.forward = vec3_from_json(j["forward"]);
    if (j.contains("up")) c.up = vec3_from_json(j["up"]);
    c.fov_y = j.value("fov_y", c.fov_y);
    c.height = j.value("height", c.height);
    c.width = j.value("width", c.width);
    c = c.orthonormalized();
    validate(c);
    return c;
}

json camera_to_json(const CameraPose& c)
{
    return {{"position", to_json(c.position)}, {"forward", to_json(c.forward)}, {"up", to_json(c.up)},
            {"fov_y", c.fov_y}, {"height", c.height}, {"width", c.width}};
}

} // namespace

SceneConfig scene_config_from_json(const json& j)
{
    SceneConfig c;
    for (const auto& p : j.at("primitives")) c.objects.push_back(primitive_from_json(p));
    const json& e = j.at("emitter");
    c.emitter.center = vec3_from_json(e.at("center"));
    c.emitter.size_index = e.value("size_index", 0.0);
    c.camera = camera_from_json(j.at("camera"), CameraPose{});
    if (j.contains("perturbation")) {
        const json& p = j["perturbation"];
        c.perturbation.count = p.value("count", c.perturbation.count);
        c.perturbation.camera_scale = p.value("camera_scale", c.perturbation.camera_scale);
        c.perturbation.emitter_scale = p.value("emitter_scale", c.perturbation.emitter_scale);
        c.perturbation.seed = p.value("seed", c.perturbation.seed);
        c.perturbation.validate();
    }
    if (j.contains("shadow_map")) {
        const json& s = j["shadow_map"];
        c.shadow_map.height = s.value("height", c.shadow_map.height);
        c.shadow_map.width = s.value("width", c.shadow_map.width);
        c.shadow_map.fov = s.value("fov", c.shadow_map.fov);
        if (c.shadow_map.height < 1 || c.shadow_map.width < 1) throw std::invalid_argument("shadow map size must be >= 1");
    }
    if (j.contains("size_indices")) c.size_indices = j["size_indices"].get<std::vector<double>>();
    if (c.size_indices.empty()) throw std::invalid_argument("size_indices must not be empty");
    for (double s : c.size_indices) (void)emitter_radius(s);
    (void)c.scene();
    return c;
}

json to_json(const SceneConfig& c)
{
    json j;
    j["primitives"] = json::array();
    for (const auto& p : c.objects) j["primitives"].push_back(primitive_to_json(p));
    j["emitter"] = {{"center", to_json(c.emitter.center)}, {"size_index", c.emitter.size_index}};
    j["camera"] = camera_to_json(c.camera);
    j["perturbation"] = {{"count", c.perturbation.count},
                         {"camera_scale", c.perturbation.camera_scale},
                         {"emitter_scale", c.perturbation.emitter_scale},
                         {"seed", c.perturbation.seed}};
    j["shadow_map"] = {{"height", c.shadow_map.height}, {"width", c.shadow_map.width}, {"fov", c.shadow_map.fov}};
    j["size_indices"] = c.size_indices;
    return j;
}

SceneConfig load_scene_config(const std::string& path)
{
    try {
        return scene_config_from_json(json::parse(read_text(path)));
    } catch (const json::exception& e) {
        throw std::invalid_argument(path + ": " + e.what());
    }
}

Trajectory trajectory_from_json(const json& j, const SceneConfig& scene)
{
    Trajectory t;
    if (j.contains("camera"))
        for (const auto& k : j["camera"]) t.camera.push_back({k.at("time").get<double>(), camera_from_json(k, scene.camera)});
    else
        t.camera.push_back({0.0, scene.camera});
    if (j.contains("emitter"))
        for (const auto& k : j["emitter"]) t.emitter.push_back({k.at("time").get<double>(), vec3_from_json(k.at("center"))});
    if (j.contains("objects"))
        for (const auto& o : j["objects"]) {
            ObjectTrack track;
            track.object = o.at("object").get<int>();
            if (track.object < 0 || track.object >= static_cast<int>(scene.objects.size()))
                throw std::invalid_argument("trajectory refers to object " + std::to_string(track.object));
            for (const auto& k : o.at("keys"))
                track.offsets.push_back({k.at("time").get<double>(), vec3_from_json(k.at("offset"))});
            t.objects.push_back(std::move(track));
        }
    t.validate();
    return t;
}

json to_json(const Trajectory& t)
{
    json j;
    j["camera"] = json::array();
    for (const auto& k : t.camera) {
        json c = camera_to_json(k.value);
        c["time"] = k.time;
        j["camera"].push_back(c);
    }
    j["emitter"] = json::array();
    for (const auto& k : t.emitter) j["emitter"].push_back({{"time", k.time}, {"center", to_json(k.value)}});
    j["objects"] = json::array();
    for (const auto& o : t.objects) {
        json keys = json::array();
        for (const auto& k : o.offsets) keys.push_back({{"time", k.time}, {"offset", to_json(k.value)}});
        j["objects"].push_back({{"object", o.object}, {"keys", keys}});
    }
    return j;
}

Trajectory load_trajectory(const std::string& path, const SceneConfig& scene)
{
    try {
        return trajectory_from_json(json::parse(read_text(path)), scene);
    } catch (const json::exception& e) {
        throw std::invalid_argument(path + ": " + e.what());
    }
}

Trajectory static_trajectory(const CameraPose& camera)
{
    Trajectory t;
    t.camera.push_back({0.0, camera});
    return t;
}

} // namespace nsm
