#include "nsm/adam.hpp"

#include <cmath>

namespace nsm {

void adam_step(std::span<Tensor<float>> params, std::span<const Tensor<float>> grads, AdamState& state)
{
    if (params.size() != grads.size()) throw ShapeError("adam_step: parameter and gradient counts differ");
    for (std::size_t i = 0; i < params.size(); ++i) require_same_shape(params[i].shape(), grads[i].shape(), "adam_step");
    if (state.m.empty()) {
        for (const auto& p : params) {
            state.m.emplace_back(p.shape(), 0.0f);
            state.v.emplace_back(p.shape(), 0.0f);
        }
    }
    if (state.m.size() != params.size()) throw ShapeError("adam_step: state holds a different parameter count");
    for (std::size_t i = 0; i < params.size(); ++i) require_same_shape(params[i].shape(), state.m[i].shape(), "adam_step state");

    const AdamConfig& c = state.config;
    ++state.step;
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor<float>& p = params[i];
        const Tensor<float>& g = grads[i];
        Tensor<float>& m = state.m[i];
        Tensor<float>& v = state.v[i];
        for (std::size_t k = 0; k < p.size(); ++k) {
            const double gk = g[k];
            const double mk = c.beta1 * m[k] + (1.0 - c.beta1) * gk;
            const double vk = c.beta2 * v[k] + (1.0 - c.beta2) * gk * gk;
            m[k] = static_cast<float>(mk);
            v[k] = static_cast<float>(vk);
            const double mhat = mk / bc1;
            const double vhat = vk / bc2;
            p[k] = static_cast<float>(p[k] - c.lr * mhat / (std::sqrt(vhat) + c.eps));
        }
    }
}

} // namespace nsm
