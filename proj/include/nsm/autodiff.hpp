#pragma once

#include "nsm/tensor.hpp"

#include <cstddef>
#include <deque>
#include <functional>
#include <limits>

namespace nsm {

/// Handle to a node of a Graph.
struct Var {
    static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();
    std::size_t id = npos;
    bool valid() const { return id != npos; }
};

/// Tape for reverse-mode differentiation over the closed operator set used by
/// the shadow network and its losses. Nodes are recorded in creation order and
/// backward() walks them in reverse. A node only records a backward closure when
/// one of its inputs requires a gradient, so graphs built from constants are
/// plain forward evaluation.
///
/// A graph is owned by one thread; separate graphs are independent.
template <class T>
class Graph {
public:
    Var constant(Tensor<T> value);
    Var parameter(Tensor<T> value);

    const Tensor<T>& value(Var v) const { return nodes_.at(v.id).value; }
    bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }
    /// Gradient accumulated by backward(); zeros when nothing flowed into v.
    Tensor<T> grad(Var v) const;
    std::size_t size() const { return nodes_.size(); }

    /// Seeds d(loss)/d(loss) = 1 and propagates. `loss` must hold one element.
    void backward(Var loss);

    /// Cross-correlation with zero padding. `bias` may be an invalid Var.
    /// Weights are (out, in, k, k); padding < 0 selects (k - 1) / 2.
    Var conv2d(Var x, Var weights, Var bias, int stride = 1, int padding = -1);
    /// 2x2 mean, stride 2.
    Var avg_pool2(Var x);
    /// 2x bilinear upsampling, half-pixel centers, edge clamped.
    Var upsample2(Var x);
    /// (C, H, W) -> (4C, H/2, W/2); block (dy, dx) goes to channel 4c + 2dy + dx.
    Var space_to_depth(Var x);
    Var depth_to_space(Var x);
    Var add(Var a, Var b);
    Var mul(Var a, Var b);
    Var scale(Var a, T s);
    Var relu(Var x);
    Var sigmoid(Var x);
    Var slice_channels(Var x, std::size_t begin, std::size_t count);
    /// Edge-replicating pad of the two spatial dimensions.
    Var pad_replicate(Var x, int pad);
    /// mean(|a - b|) as a one-element tensor.
    Var mean_abs_diff(Var a, Var b);

private:
    struct Node {
        Tensor<T> value;
        Tensor<T> grad;
        bool requires_grad = false;
        std::function<void()> backward;
    };

    Var push(Tensor<T> value, bool requires_grad);
    Tensor<T>& grad_ref(std::size_t id);
    bool needs(Var v) const { return v.valid() && nodes_[v.id].requires_grad; }

    std::deque<Node> nodes_;
};

extern template class Graph<float>;
extern template class Graph<double>;

// Forward kernels, usable without a graph.
namespace kernels {

template <class T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>* b, int stride, int padding);
template <class T>
Tensor<T> avg_pool2(const Tensor<T>& x);
template <class T>
Tensor<T> upsample2(const Tensor<T>& x);
template <class T>
Tensor<T> space_to_depth(const Tensor<T>& x);
template <class T>
Tensor<T> depth_to_space(const Tensor<T>& x);

} // namespace kernels

} // namespace nsm
