#pragma once

#include "nsm/analysis.hpp"
#include "nsm/config.hpp"
#include "nsm/training.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace nsm {

struct GeneratorSettings {
    int frames = 1;
    int spp = 256;
    int msaa = 8;
    double sigma = 0.5; // target blur in pixels
    double bias = -1.0; // depth bias in m; negative selects 1e-3 of the scene diagonal
    std::uint64_t seed = 1;

    void validate() const;
};

struct FrameRecord {
    std::string id;
    double time = 0.0;
    std::uint64_t seed = 0;
    std::vector<std::uint64_t> perturbation_seeds; // one per perturbed stack
    OccluderRange range;
    double focal_px = 0.0;
    std::vector<std::string> feature_files; // unperturbed first
    std::vector<std::string> target_files;  // one per size index
    std::string gbuffer_file;               // coverage plus every candidate channel
    std::string motion_file;                // (dx, dy, valid) into the previous frame
};

/// Layout on disk: <root>/manifest.json and <root>/<frame id>/{features_k,
/// target_<size>, gbuffer, motion}.pfm. Stored feature stacks carry c_e without
/// the size offset; loading adds the size index of the target it is paired with.
struct DatasetManifest {
    nlohmann::json scene;      // resolved scene config
    nlohmann::json trajectory; // resolved trajectory
    GeneratorSettings settings;
    int p = 0;
    std::vector<double> size_indices;
    int height = 0;
    int width = 0;
    double bias = 0.0;
    std::vector<std::string> gbuffer_channels;
    std::vector<FrameRecord> frames;
    std::string hash; // FNV-1a over scene, trajectory, settings and p

    std::string compute_hash() const;
};

nlohmann::json to_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(const nlohmann::json& j);

std::string target_file_name(double size_index);

/// Renders every frame and writes the dataset below `root` (created if needed).
/// Frustum violations abort with the frame id in the message.
DatasetManifest generate_dataset(const SceneConfig& scene, const Trajectory& traj, const GeneratorSettings& settings,
                                 const std::string& root);

/// Reads and checks a manifest: hash, file presence and float-map dimensions.
/// Throws FormatError on any mismatch.
DatasetManifest load_manifest(const std::string& root);

struct LoadOptions {
    std::vector<double> size_indices; // empty loads every size
    int p = -1;                       // perturbed stacks per sample; negative loads all
    /// Non-empty replaces the feature stack with these gbuffer channels (no
    /// perturbations). The name "noise" injects uniform [0, 1) noise at covered pixels.
    std::vector<std::string> channels;
    std::uint64_t noise_seed = 0;
};

/// One sample per (frame, size index).
std::vector<TrainingSample> load_samples(const DatasetManifest& m, const std::string& root, const std::vector<int>& frames,
                                         const LoadOptions& opt);

/// Indices of the held-out frames: up to `count` evenly spaced frames, none when
/// fewer than four frames exist.
std::vector<int> heldout_frames(int frames, int count = 10);
std::vector<int> training_frames(int frames, int count = 10);

/// Per-frame penumbra inputs for one emitter size.
std::vector<PenumbraFrame> load_penumbra_frames(const DatasetManifest& m, const std::string& root, double size_index);

/// Motion fields (frame t into t - 1) for frames 1..N-1.
std::vector<MotionField> load_motion(const DatasetManifest& m, const std::string& root);

} // namespace nsm
