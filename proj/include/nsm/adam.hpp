#pragma once

#include "nsm/tensor.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace nsm {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    AdamConfig config;
    std::vector<Tensor<float>> m;
    std::vector<Tensor<float>> v;
    std::int64_t step = 0;
};

/// One bias-corrected Adam update applied in place. Moments are created on the
/// first call; a later call with a different parameter layout throws ShapeError.
void adam_step(std::span<Tensor<float>> params, std::span<const Tensor<float>> grads, AdamState& state);

} // namespace nsm
