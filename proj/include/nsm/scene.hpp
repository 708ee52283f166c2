#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace nsm {

using Vec3 = Eigen::Vector3d;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct Ray {
    Vec3 origin;
    Vec3 dir; // unit length
    Vec3 at(double t) const { return origin + t * dir; }
};

struct Aabb {
    Vec3 lo = Vec3::Constant(kInf);
    Vec3 hi = Vec3::Constant(-kInf);

    bool empty() const { return (lo.array() > hi.array()).any(); }
    void extend(const Vec3& p);
    void extend(const Aabb& b);
    Vec3 center() const { return 0.5 * (lo + hi); }
    double diagonal() const { return empty() ? 0.0 : (hi - lo).norm(); }
    bool contains(const Aabb& b, double tol = 1e-9) const;
    std::array<Vec3, 8> corners() const;
};

// Primitive shapes, world units in meters.

/// Finite rectangle. `tangent` must be orthogonal to `normal`; the second
/// in-plane axis is normal x tangent.
struct Plane {
    Vec3 center;
    Vec3 normal;
    Vec3 tangent;
    double half_u = 1.0;
    double half_v = 1.0;
};

struct Sphere {
    Vec3 center;
    double radius = 1.0;
};

struct Box {
    Vec3 lo;
    Vec3 hi;
};

/// Counter-clockwise winding (seen from outside) gives the outward normal.
struct TriMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> faces;
};

using Shape = std::variant<Plane, Sphere, Box, TriMesh>;

struct Primitive {
    std::string name;
    Shape shape;
};

struct Triangle {
    Vec3 a, b, c;
    Vec3 normal() const { return (b - a).cross(c - a).normalized(); }
};

Aabb bounds(const Primitive& prim);
std::pair<Vec3, double> bounding_sphere(const Primitive& prim);
Primitive translated(const Primitive& prim, const Vec3& offset);
bool is_finite(const Primitive& prim);

/// Planes are receivers; every other primitive counts as an occluder for the
/// penumbra model's occluder-distance record.
bool is_occluder(const Primitive& prim);

/// Polygonal surface of planes, boxes and meshes. Empty for spheres.
std::vector<Triangle> triangulate(const Primitive& prim);

struct Hit {
    double t = kInf;
    Vec3 normal = Vec3::Zero(); // outward geometric normal, not flipped toward the ray
    int object = -1;
};

/// Largest emitter diameter (size index 4), meters.
inline constexpr double kMaxEmitterDiameter = 0.5;
inline constexpr double kMaxSizeIndex = 4.0;

/// Linear softness-index mapping: 0 is a point light, 4 the 50 cm sphere.
double emitter_radius(double size_index);

struct Emitter {
    Vec3 center = Vec3::Zero();
    double size_index = 0.0;

    double radius() const { return emitter_radius(size_index); }
};

class Scene {
public:
    /// Throws std::invalid_argument on an empty object list or non-finite geometry.
    Scene(std::vector<Primitive> objects, Emitter emitter);

    const std::vector<Primitive>& objects() const { return objects_; }
    const Emitter& emitter() const { return emitter_; }
    const Aabb& bounds() const { return bounds_; }
    double diagonal() const { return bounds_.diagonal(); }

    Scene with_emitter(const Emitter& e) const;
    /// Copy with object `index` moved by `offset`.
    Scene with_object_offset(int index, const Vec3& offset) const;

    /// Nearest hit with t in (t_min, t_max). Two-sided: no backface culling.
    std::optional<Hit> intersect(const Ray& ray, double t_min = 0.0, double t_max = kInf) const;
    /// Any hit with t in (t_min, t_max).
    bool occluded(const Ray& ray, double t_min, double t_max) const;
    /// True when p lies strictly inside a solid primitive (sphere or box).
    bool inside_solid(const Vec3& p) const;

private:
    std::vector<Primitive> objects_;
    Emitter emitter_;
    Aabb bounds_;
};

/// Pinhole camera. Pixel (x, y) has its center at (x + 0.5, y + 0.5); y grows downward.
struct CameraPose {
    Vec3 position = Vec3::Zero();
    Vec3 forward = Vec3(0, 0, -1);
    Vec3 up = Vec3(0, 1, 0);
    double fov_y = 1.0; // radians
    int height = 128;
    int width = 256;

    /// Gram-Schmidt on (forward, up); throws std::invalid_argument on degenerate input.
    CameraPose orthonormalized() const;
    Vec3 right() const { return forward.cross(up).normalized(); }
    /// Focal length in pixels.
    double focal_px() const;
    /// Direction through continuous pixel coordinate (px, py), scaled so its
    /// forward component is 1 (view depth d then scales it to the hit point).
    Vec3 depth_direction(double px, double py) const;
    Ray ray_through(double px, double py) const;

    struct Projection {
        double x = 0, y = 0; // continuous pixel coordinates
        double depth = 0;    // view-space depth along forward
    };
    /// Empty when the point is on or behind the camera plane.
    std::optional<Projection> project(const Vec3& world) const;
};

void validate(const CameraPose& cam);

template <class V>
struct Keyframe {
    double time = 0.0;
    V value;
};

/// Throws std::invalid_argument unless keys are nonempty with strictly increasing times.
template <class V>
void validate_keys(const std::vector<Keyframe<V>>& keys);

/// Piecewise-linear evaluation with clamping outside the key range.
CameraPose trajectory_at(const std::vector<Keyframe<CameraPose>>& keys, double t);
Vec3 trajectory_at(const std::vector<Keyframe<Vec3>>& keys, double t);

struct ObjectTrack {
    int object = 0;
    std::vector<Keyframe<Vec3>> offsets;
};

struct Trajectory {
    std::vector<Keyframe<CameraPose>> camera;
    std::vector<Keyframe<Vec3>> emitter; // emitter center; empty keeps the scene's emitter fixed
    std::vector<ObjectTrack> objects;

    void validate() const;
    /// (first, last) key time over all tracks.
    std::pair<double, double> time_range() const;
    CameraPose camera_at(double t) const { return trajectory_at(camera, t); }
    /// Scene state at time t: emitter center and object offsets applied.
    Scene scene_at(const Scene& base, double t) const;
};

/// Minimum radius used for emitter jitter so point lights still move.
inline constexpr double kMinPerturbRadius = 0.01;

struct PerturbationSpec {
    int count = 3;              // p
    double camera_scale = 0.01; // k1
    double emitter_scale = 0.1; // k2
    std::uint64_t seed = 0;

    void validate() const;
};

struct PerturbedState {
    CameraPose camera;
    Emitter emitter;
};

Vec3 random_unit_vector(std::mt19937_64& rng);

/// Camera moves by exactly k1 * |camera - bounds center| and the emitter by
/// exactly k2 * max(r_e, r_min), each in an independent uniform direction.
std::vector<PerturbedState> sample_perturbation(const Scene& scene, const CameraPose& camera,
                                                const PerturbationSpec& spec, std::mt19937_64& rng);

/// Reference test scene: square ground plane at y = 0, a sphere of radius 0.5 m
/// with its center at `sphere_height`, and the emitter overhead at `emitter_height`.
Scene sphere_over_plane(double sphere_height, double emitter_height, double size_index,
                        double ground_half_extent = 3.0);

} // namespace nsm
