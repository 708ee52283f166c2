#pragma once

#include "nsm/scene.hpp"
#include "nsm/tensor.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace nsm {

class FrustumError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Perspective view shared by the camera pass and the emitter pass.
struct PinholeView {
    Vec3 eye = Vec3::Zero();
    Vec3 right = Vec3::UnitX();
    Vec3 up = Vec3::UnitY();
    Vec3 forward = -Vec3::UnitZ();
    double tan_half_x = 1.0;
    double tan_half_y = 1.0;
    int height = 1;
    int width = 1;

    /// Direction through continuous pixel (px, py) with unit forward component.
    Vec3 depth_direction(double px, double py) const;
    /// Continuous pixel coordinates plus axial depth; empty behind the eye.
    std::optional<CameraPose::Projection> project(const Vec3& p) const;
};

PinholeView camera_view(const CameraPose& cam);

struct ShadowMapSettings {
    int height = 512;
    int width = 512;
    double fov = 0.0; // vertical, radians; 0 fits the frustum to the scene bounds
};

/// Orientation of the emitter frame: forward aims at the scene-bounds center.
/// Throws FrustumError when part of the scene lies behind the emitter.
PinholeView emitter_view(const Scene& scene, const Vec3& emitter_center, const ShadowMapSettings& settings);

struct ShadowMap {
    PinholeView view;
    std::vector<float> depth; // axial emitter-space depth, +infinity where nothing was hit

    int height() const { return view.height; }
    int width() const { return view.width; }
    float at(int x, int y) const { return depth[static_cast<std::size_t>(y) * view.width + x]; }
};

struct GBuffer {
    int height = 0;
    int width = 0;
    CameraPose camera;
    Vec3 emitter_center = Vec3::Zero();
    std::vector<float> depth; // view-space depth d
    std::vector<Eigen::Vector3f> normal;
    std::vector<Eigen::Vector3f> position;
    std::vector<Eigen::Vector3f> normal_e; // normal in the emitter frame (right, up, forward)
    std::vector<float> z_f;
    std::vector<float> c_e;
    std::vector<float> c_c;
    std::vector<std::uint8_t> covered;
    std::vector<int> object;

    std::size_t pixels() const { return static_cast<std::size_t>(height) * width; }
};

/// Four-channel network input: z - z_f, z / z_f, c_e + size_index, c_c / d.
struct FeatureStack {
    Tensor<float> channels;
    std::vector<std::uint8_t> covered;
    double size_index = 0.0;
    double bias = 0.0;

    int height() const { return static_cast<int>(channels.height()); }
    int width() const { return static_cast<int>(channels.width()); }
};

inline constexpr int kFeatureChannels = 4;
inline constexpr const char* kFeatureNames[kFeatureChannels] = {"z-z_f", "z/z_f", "c_e", "c_c/d"};

struct MotionField {
    int height = 0;
    int width = 0;
    std::vector<Eigen::Vector2f> vec; // offset from pixel center to its position in the previous frame
    std::vector<std::uint8_t> valid;
};

/// Depth-comparison bias: 1e-3 of the scene-bounds diagonal.
double default_depth_bias(const Scene& scene);

/// Nearest-hit axial depth per texel center, seen from the emitter center.
/// Throws FrustumError when the emitter sits inside solid geometry.
ShadowMap render_shadowmap(const Scene& scene, const Emitter& emitter, const ShadowMapSettings& settings = {});

/// Nearest-hit attributes through pixel centers, one sample per pixel.
GBuffer render_gbuffer(const Scene& scene, const CameraPose& camera, const Emitter& emitter);

/// Looks up the occluder distance z for every covered pixel (nearest texel) and
/// builds the feature channels. Stored axial depth is converted to distance along
/// the emitter-to-pixel direction so an unoccluded pixel has z == z_f. Misses
/// clamp to z_f. Throws FrustumError when a covered pixel falls outside the map.
FeatureStack assemble_features(const GBuffer& g, const ShadowMap& sm, double size_index, double bias);

/// Per-pixel occluder distance from the shadow map (z_f where unoccluded, 0 where uncovered).
std::vector<float> lookup_occluder_distance(const GBuffer& g, const ShadowMap& sm);

/// Binary point-light visibility from the features: lit iff z >= z_f - bias.
std::vector<float> hard_shadow(const FeatureStack& fs);

/// Reprojects frame t into the previous camera. Valid pixels land inside the
/// previous frame on a covered pixel whose depth agrees within 1% and whose
/// normal has a dot product of at least 0.9.
MotionField motion_vectors(const GBuffer& g_t, const CameraPose& camera_prev, const GBuffer& g_prev);

struct NamedChannel {
    std::string name;
    std::vector<float> values;
};

/// Every candidate input buffer (vector buffers split into components), used by
/// feature selection: d, n.xyz, z, n_e.xyz, z_f, c_e, c_c, z-z_f, z/z_f, c_c/d, n.n_e.
/// The size-index dc-offset is added to c_e.
std::vector<NamedChannel> candidate_channels(const GBuffer& g, const ShadowMap& sm, double size_index);

} // namespace nsm
