#pragma once

#include "nsm/raster.hpp"
#include "nsm/scene.hpp"
#include "nsm/tensor.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace nsm {

/// Mean squared difference over covered pixels (all pixels when `covered` is empty).
double mse(const Tensor<float>& img, const Tensor<float>& ref, const std::vector<std::uint8_t>& covered = {});

// ---- channel sensitivity -------------------------------------------------

/// Maps a (C, H, W) input to a (1, H, W) output.
using ChannelModel = std::function<Tensor<float>(const Tensor<float>&)>;

struct SensitivityConfig {
    int repeats = 8;
    double noise_scale = 0.1; // noise std as a fraction of the channel's std
    std::uint64_t seed = 0;
};

struct SensitivityReport {
    std::vector<std::string> names;
    std::vector<double> absolute; // S_i
    std::vector<double> relative; // s_i, sums to 1
    std::vector<double> sigma;    // per-channel std over all covered dataset pixels
    std::size_t samples = 0;      // frames
    std::size_t pixels = 0;       // covered pixels per repeat, summed over frames
    int repeats = 0;
};

/// Absolute sensitivity of every channel: the mean over repeats, frames and
/// covered pixels of |model(f + e) - model(f)| / (noise_scale * sigma_i), where e
/// adds N(0, (noise_scale * sigma_i)^2) noise to channel i only. Throws
/// std::domain_error for a zero-variance channel.
SensitivityReport channel_sensitivity(const ChannelModel& model, const std::vector<Tensor<float>>& inputs,
                                      const std::vector<std::vector<std::uint8_t>>& covered,
                                      const std::vector<std::string>& names, const SensitivityConfig& cfg);

/// s_i = S_i / sum(S); throws std::domain_error when every S_i is zero.
std::vector<double> relative_sensitivity(const std::vector<double>& absolute);

void write_sensitivity_csv(const std::string& path, const SensitivityReport& r);
std::string format_sensitivity(const SensitivityReport& r);

// ---- feature selection ---------------------------------------------------

struct CandidateEvaluation {
    SensitivityReport sensitivity; // over the evaluated channels, in the given order
    double heldout_mse = 0.0;
};

/// Trains a network on the given channels and reports its sensitivities and held-out MSE.
using CandidateTrainer = std::function<CandidateEvaluation(const std::vector<std::string>& channels)>;

struct SelectionConfig {
    double threshold = 0.015;
    int add_per_round = 2;
    int max_rounds = 8;
    /// Channels whose relative sensitivity lies within this margin above the
    /// threshold are retrained without; they are dropped when that does not
    /// raise the held-out MSE. 0 disables the tie-break.
    double tie_margin = 0.0;
};

struct SelectionRound {
    int round = 0;
    std::vector<std::string> channels;
    std::vector<double> relative;
    double heldout_mse = 0.0;
    std::vector<std::string> dropped;
    std::vector<std::string> tie_dropped;
    std::vector<std::string> added;
};

struct SelectionResult {
    std::vector<std::string> selected;
    std::vector<SelectionRound> audit;
};

/// Train, drop channels below the threshold, add the next candidates from `pool`
/// and retrain until nothing is dropped and the pool is exhausted.
/// Throws std::runtime_error if every channel gets dropped.
SelectionResult select_features(const CandidateTrainer& trainer, std::vector<std::string> initial,
                                std::vector<std::string> pool, const SelectionConfig& cfg);

std::string format_selection(const SelectionResult& r);

// ---- penumbra model ------------------------------------------------------

struct PenumbraExtents {
    double inner = 0.0; // x_a
    double outer = 0.0; // x_b
    double total() const { return inner + outer; }
};

/// Inner and outer penumbra extents (m) on a receiver at distance z_f from the
/// emitter, for a spherical emitter of radius r_e and an occluder bounded by the
/// sphere spanning distances [z_min, z_max]. Throws std::domain_error outside
/// 0 < z_min <= z_max < z_f, r_e >= 0.
PenumbraExtents penumbra_extents(double z_min, double z_max, double z_f, double r_e);

struct OccluderRange {
    double z_min = 0.0;
    double z_max = 0.0;
};

/// Range of emitter distances covered by the bounding spheres of all occluders.
OccluderRange occluder_range(const Scene& scene, const Vec3& emitter_center);

/// Per-frame inputs of the penumbra histogram.
struct PenumbraFrame {
    std::vector<float> depth; // view depth d
    std::vector<float> z_f;   // receiver distance to the emitter
    std::vector<std::uint8_t> covered;
    double focal_px = 1.0;
    double emitter_radius = 0.0;
    OccluderRange range;
};

PenumbraFrame penumbra_frame(const GBuffer& g, const Scene& scene);

struct PenumbraStats {
    std::vector<double> widths;  // per counted pixel, in pixels
    double bin_width = 1.0;
    std::vector<std::size_t> histogram;
    double p95 = 0.0;
    double max_width = 0.0;
    std::vector<OccluderRange> ranges;
    std::size_t skipped = 0; // covered pixels with z_f <= z_max
};

/// Per covered pixel, converts the model's total width to pixels at the pixel's
/// depth (width * focal_px / d). P95 is the nearest-rank 95th percentile.
PenumbraStats penumbra_histogram(const std::vector<PenumbraFrame>& frames, double bin_width = 1.0);

/// Nearest-rank percentile of unsorted values, q in (0, 1].
double percentile(std::vector<double> values, double q);

void write_histogram_csv(const std::string& path, const PenumbraStats& s);

/// Oracle visibility sampled along a receiver line.
struct TransitionProfile {
    std::vector<double> positions; // distance along the line (m)
    std::vector<double> visibility;
    double band_start = 0.0;
    double band_end = 0.0;
    bool found = false;

    double width() const { return found ? band_end - band_start : 0.0; }
};

/// Samples visibility at `count` points from `origin` along `direction` over
/// `length`, with `spp` rays per point. The band is the span of sample points
/// whose visibility lies strictly inside (lo, hi).
TransitionProfile measure_transition(const Scene& scene, const Vec3& origin, const Vec3& direction,
                                     const Vec3& normal, double length, int count, int spp, std::uint64_t seed,
                                     double lo = 0.01, double hi = 0.99);

// ---- temporal instability ------------------------------------------------

struct TemporalReport {
    double instability = 0.0; // E
    double alpha_t = 3.0;
    int frames = 0;
    std::size_t valid_pixels = 0;
    double rejected_fraction = 0.0;
};

/// E = mean over valid (pixel, t) of exp(alpha_t * |I_t(p) - I_{t-1}(m(p))|) - 1.
/// motion[t - 1] maps frame t into frame t - 1; the previous value is read at the
/// nearest pixel. Throws std::domain_error when no pixel is valid.
template <class T>
TemporalReport temporal_instability(const std::vector<Tensor<T>>& frames, const std::vector<MotionField>& motion,
                                    double alpha_t = 3.0);

} // namespace nsm
