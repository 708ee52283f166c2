#pragma once

#include "nsm/autodiff.hpp"
#include "nsm/tensor.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace nsm {

/// Encoder-decoder layout. Level k runs at 1/2^k of the input resolution and
/// carries C(k) = base_channels * 2^(max(k,1)-1) channels (capped at max_channels).
/// With space-to-depth the full-resolution level is replaced by a 2x2 pixel
/// shuffle, so processing starts at level 1 with 4 * in_channels channels.
/// Levels first..layers-2 are encoder/decoder pairs, level layers-1 is the
/// bottleneck.
struct NetworkConfig {
    int layers = 5;
    int base_channels = 16;
    int in_channels = 4;
    bool use_space_to_depth = true;
    int max_channels = 256;
    /// Fixed per-channel input standardization (x - shift) * scale, applied
    /// before the first layer. Empty means identity.
    std::vector<double> input_shift;
    std::vector<double> input_scale;
    /// Training output is (1 + 2m) * sigmoid - m; infer() clamps to [0, 1].
    double output_margin = 0.05;

    void validate() const;
    int first_level() const { return use_space_to_depth ? 1 : 0; }
    int channels(int level) const;
    int output_channels() const { return use_space_to_depth ? 4 : 1; }
    /// Input height and width must be multiples of this.
    int size_multiple() const { return 1 << (layers - 1); }
    void validate_input(int height, int width) const;

    bool operator==(const NetworkConfig&) const = default;
};

struct ParamSpec {
    std::string name;
    Dims shape;
};

/// Ordered parameter list implied by the configuration.
std::vector<ParamSpec> parameter_layout(const NetworkConfig& cfg);

template <class T>
struct NetworkWeightsT {
    std::vector<std::string> names;
    std::vector<Tensor<T>> params;

    std::size_t parameter_count() const;
    const Tensor<T>& get(const std::string& name) const;
    Tensor<T>& get(const std::string& name);

    template <class U>
    NetworkWeightsT<U> cast() const
    {
        NetworkWeightsT<U> out;
        out.names = names;
        for (const auto& p : params) out.params.push_back(p.template cast<U>());
        return out;
    }
};

using NetworkWeights = NetworkWeightsT<float>;

/// He-uniform convolution weights, zero biases.
NetworkWeights init_weights(const NetworkConfig& cfg, std::uint64_t seed);
NetworkWeights zero_weights(const NetworkConfig& cfg);
/// Throws ShapeError unless the weights match the configuration's layout.
template <class T>
void check_weights(const NetworkConfig& cfg, const NetworkWeightsT<T>& w);

/// Sets the input standardization from the mean and standard deviation of
/// every channel over all pixels of `inputs`. Constant channels get scale 1.
void fit_input_standardization(NetworkConfig& cfg, const std::vector<const Tensor<float>*>& inputs);

/// Sets the output head bias so that a zero hidden signal reproduces the median
/// of `targets`, the best constant under L1. In space-to-depth mode only the smooth channel gets the bias.
void fit_output_prior(NetworkWeights& w, const NetworkConfig& cfg, const std::vector<const Tensor<float>*>& targets);

std::size_t conv_params(int in_channels, int out_channels, int kernel);

/// 3 * 2^l pixels.
int receptive_field(int layers);
/// Smallest l >= 2 with receptive_field(l) >= p_w, i.e. ceil(log2(p_w / 3)).
int layers_for_penumbra(double p_w);

/// Records the network on `g`. `params` holds one Var per parameter in layout order.
/// Returns the (1, H, W) shadow image in [0, 1].
template <class T>
Var forward(Graph<T>& g, const NetworkConfig& cfg, const std::vector<Var>& params, Var input);

/// Adds the weights to `g` as parameters (trainable) or constants.
template <class T>
std::vector<Var> bind_weights(Graph<T>& g, const NetworkWeightsT<T>& w, bool trainable);

/// Inference without gradient bookkeeping.
Tensor<float> infer(const NetworkWeights& w, const NetworkConfig& cfg, const Tensor<float>& features);

struct LevelStats {
    int level = 0;
    int height = 0;
    int width = 0;
    std::size_t parameters = 0;
    double flops_per_pixel = 0.0;     // per full-resolution pixel
    double temp_storage_pixels = 0.0; // activation elements read + written
};

struct NetStats {
    std::vector<LevelStats> levels;
    std::size_t total_parameters = 0;
    double total_flops_per_pixel = 0.0;
};

/// Analytic per-level cost of one forward pass at the given resolution.
NetStats net_stats(const NetworkConfig& cfg, int height, int width);

} // namespace nsm
