#pragma once

#include "nsm/scene.hpp"
#include "nsm/tensor.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace nsm {

/// Ray-traced visibility target in [0, 1] at camera resolution.
struct TargetImage {
    Tensor<float> visibility; // (1, H, W)
    double size_index = 0.0;
    int spp = 0;
    int msaa = 1;

    int height() const { return static_cast<int>(visibility.height()); }
    int width() const { return static_cast<int>(visibility.width()); }
};

struct TraceSettings {
    int spp = 256;  // shadow rays per pixel, split evenly over the MSAA samples
    int msaa = 8;   // 1, 2, 4 or 8
    std::uint64_t seed = 0; // frame seed; per-pixel streams derive from (seed, pixel, sample)
};

/// Sub-pixel offsets (in pixels, relative to the pixel center) of the standard
/// 1/2/4/8-sample patterns.
std::vector<std::pair<double, double>> msaa_pattern(int msaa);

/// Fraction of the spherical emitter visible from `point`, estimated with
/// `samples` shadow rays drawn uniformly in solid angle over the cone the
/// emitter sphere subtends. Rays start at point + eps * normal. A point light
/// (radius 0) uses one ray to the center.
double point_visibility(const Scene& scene, const Vec3& point, const Vec3& normal, const Vec3& emitter_center,
                        double emitter_radius, int samples, double eps, std::mt19937_64& rng);

/// Renders one target per size index over shared primary hits. Sub-samples that
/// miss all geometry count as fully lit.
std::vector<TargetImage> trace_visibility_multi(const Scene& scene, const CameraPose& camera, const Vec3& emitter_center,
                                                const std::vector<double>& size_indices, const TraceSettings& settings);

TargetImage trace_visibility(const Scene& scene, const CameraPose& camera, const Emitter& emitter,
                             const TraceSettings& settings);

/// Separable Gaussian, kernel truncated at +-ceil(3 sigma), edge clamped; sigma 0 is the identity.
TargetImage gaussian_filter(const TargetImage& img, double sigma);

/// Normalized 1D taps used by gaussian_filter (index 0 is the center).
std::vector<double> gaussian_taps(double sigma);

/// Stream seed for a (frame, pixel, sample) triple.
std::uint64_t stream_seed(std::uint64_t frame_seed, std::uint64_t pixel, std::uint64_t sample);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(const std::string& s);

} // namespace nsm
