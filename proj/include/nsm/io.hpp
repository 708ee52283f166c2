#pragma once

#include "nsm/shadow_net.hpp"
#include "nsm/tensor.hpp"

#include <json.hpp>

#include <stdexcept>
#include <string>

namespace nsm {

class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Float map: "NSMF", then u32 width, height, channels, then channel-planar
/// row-major little-endian f32 values.
void write_float_map(const std::string& path, const Tensor<float>& chw);
/// Throws FormatError on a bad header or a size mismatch (e.g. truncation).
Tensor<float> read_float_map(const std::string& path);

/// 8-bit binary PGM of channel 0 with [0, 1] mapped to [0, 255].
void write_pgm(const std::string& path, const Tensor<float>& chw);

struct Checkpoint {
    NetworkConfig config;
    NetworkWeights weights;
};

/// Binary parameter file ("NSMC", u32 version, u32 count, then per parameter
/// u32 name length, name, u32 rank, u32 dims, f32 values) plus a JSON sidecar
/// at path + ".json" holding the network configuration.
void save_checkpoint(const std::string& path, const NetworkConfig& cfg, const NetworkWeights& w);
Checkpoint load_checkpoint(const std::string& path);

nlohmann::json to_json(const NetworkConfig& cfg);
NetworkConfig network_config_from_json(const nlohmann::json& j);

/// Writes text to a file, replacing it.
void write_text(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);

} // namespace nsm
