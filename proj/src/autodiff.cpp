#include "nsm/autodiff.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <string>

namespace nsm {

namespace {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void require_rank3(const Dims& s, const char* what)
{
    if (s.size() != 3) throw ShapeError(std::string(what) + ": expected (C,H,W), got " + shape_string(s));
}

void require_even(const Dims& s, const char* what)
{
    require_rank3(s, what);
    if (s[1] % 2 != 0 || s[2] % 2 != 0)
        throw ShapeError(std::string(what) + ": spatial dims must be even, got " + shape_string(s));
}

struct ConvGeom {
    std::size_t cin, h, w, cout, k, ho, wo;
    int stride, pad;
};

template <class T>
ConvGeom conv_geom(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>* b, int stride, int padding)
{
    require_rank3(x.shape(), "conv2d input");
    if (w.rank() != 4 || w.dim(2) != w.dim(3))
        throw ShapeError("conv2d weights: expected (out,in,k,k), got " + shape_string(w.shape()));
    if (w.dim(1) != x.channels())
        throw ShapeError("conv2d: weights expect " + std::to_string(w.dim(1)) + " input channels, input has " +
                         std::to_string(x.channels()));
    if (b && (b->rank() != 1 || b->dim(0) != w.dim(0)))
        throw ShapeError("conv2d bias: expected (" + std::to_string(w.dim(0)) + "), got " + shape_string(b->shape()));
    if (stride < 1) throw ShapeError("conv2d: stride must be >= 1");
    ConvGeom g{};
    g.cin = x.channels();
    g.h = x.height();
    g.w = x.width();
    g.cout = w.dim(0);
    g.k = w.dim(2);
    g.stride = stride;
    g.pad = padding < 0 ? static_cast<int>((g.k - 1) / 2) : padding;
    const long hn = static_cast<long>(g.h) + 2 * g.pad - static_cast<long>(g.k);
    const long wn = static_cast<long>(g.w) + 2 * g.pad - static_cast<long>(g.k);
    if (hn < 0 || wn < 0) throw ShapeError("conv2d: kernel larger than padded input");
    g.ho = static_cast<std::size_t>(hn / stride + 1);
    g.wo = static_cast<std::size_t>(wn / stride + 1);
    return g;
}

bool direct_1x1(const ConvGeom& g) { return g.k == 1 && g.stride == 1 && g.pad == 0; }

// col is (cin*k*k, ho*wo), row r = (ic*k + ky)*k + kx.
template <class T>
void im2col(const T* x, const ConvGeom& g, T* col)
{
    const std::size_t npix = g.ho * g.wo;
    for (std::size_t ic = 0; ic < g.cin; ++ic) {
        const T* src = x + ic * g.h * g.w;
        for (std::size_t ky = 0; ky < g.k; ++ky) {
            for (std::size_t kx = 0; kx < g.k; ++kx) {
                T* dst = col + ((ic * g.k + ky) * g.k + kx) * npix;
                for (std::size_t oy = 0; oy < g.ho; ++oy) {
                    const long iy = static_cast<long>(oy) * g.stride + static_cast<long>(ky) - g.pad;
                    T* row = dst + oy * g.wo;
                    if (iy < 0 || iy >= static_cast<long>(g.h)) {
                        std::fill(row, row + g.wo, T(0));
                        continue;
                    }
                    const T* srow = src + static_cast<std::size_t>(iy) * g.w;
                    for (std::size_t ox = 0; ox < g.wo; ++ox) {
                        const long ix = static_cast<long>(ox) * g.stride + static_cast<long>(kx) - g.pad;
                        row[ox] = (ix < 0 || ix >= static_cast<long>(g.w)) ? T(0) : srow[ix];
                    }
                }
            }
        }
    }
}

template <class T>
void col2im_add(const T* col, const ConvGeom& g, T* dx)
{
    const std::size_t npix = g.ho * g.wo;
    for (std::size_t ic = 0; ic < g.cin; ++ic) {
        T* dst = dx + ic * g.h * g.w;
        for (std::size_t ky = 0; ky < g.k; ++ky) {
            for (std::size_t kx = 0; kx < g.k; ++kx) {
                const T* src = col + ((ic * g.k + ky) * g.k + kx) * npix;
                for (std::size_t oy = 0; oy < g.ho; ++oy) {
                    const long iy = static_cast<long>(oy) * g.stride + static_cast<long>(ky) - g.pad;
                    if (iy < 0 || iy >= static_cast<long>(g.h)) continue;
                    T* drow = dst + static_cast<std::size_t>(iy) * g.w;
                    const T* srow = src + oy * g.wo;
                    for (std::size_t ox = 0; ox < g.wo; ++ox) {
                        const long ix = static_cast<long>(ox) * g.stride + static_cast<long>(kx) - g.pad;
                        if (ix >= 0 && ix < static_cast<long>(g.w)) drow[ix] += srow[ox];
                    }
                }
            }
        }
    }
}

// Per-axis bilinear taps for 2x upsampling with half-pixel centers.
struct Taps {
    std::size_t i0, i1;
    double w0, w1;
};

std::vector<Taps> upsample_taps(std::size_t n)
{
    std::vector<Taps> taps(2 * n);
    for (std::size_t o = 0; o < 2 * n; ++o) {
        const double src = (static_cast<double>(o) + 0.5) / 2.0 - 0.5;
        const double f0 = std::floor(src);
        const double frac = src - f0;
        const long a = static_cast<long>(f0);
        const long last = static_cast<long>(n) - 1;
        taps[o].i0 = static_cast<std::size_t>(std::clamp(a, 0L, last));
        taps[o].i1 = static_cast<std::size_t>(std::clamp(a + 1, 0L, last));
        taps[o].w0 = 1.0 - frac;
        taps[o].w1 = frac;
    }
    return taps;
}

} // namespace

namespace kernels {

template <class T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>* b, int stride, int padding)
{
    const ConvGeom g = conv_geom(x, w, b, stride, padding);
    const std::size_t npix = g.ho * g.wo;
    const std::size_t kk = g.cin * g.k * g.k;
    Tensor<T> out = Tensor<T>::chw(g.cout, g.ho, g.wo);
    Eigen::Map<const RowMat<T>> W(w.data(), g.cout, kk);
    Eigen::Map<RowMat<T>> O(out.data(), g.cout, npix);
    if (direct_1x1(g)) {
        Eigen::Map<const RowMat<T>> X(x.data(), kk, npix);
        O.noalias() = W * X;
    } else {
        RowMat<T> col(kk, npix);
        im2col(x.data(), g, col.data());
        O.noalias() = W * col;
    }
    if (b) {
        for (std::size_t oc = 0; oc < g.cout; ++oc) O.row(oc).array() += (*b)[oc];
    }
    return out;
}

template <class T>
Tensor<T> avg_pool2(const Tensor<T>& x)
{
    require_even(x.shape(), "avg_pool2");
    const std::size_t c = x.channels(), h = x.height() / 2, w = x.width() / 2;
    Tensor<T> out = Tensor<T>::chw(c, h, w);
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t xx = 0; xx < w; ++xx)
                out.at(ch, y, xx) = T(0.25) * (x.at(ch, 2 * y, 2 * xx) + x.at(ch, 2 * y, 2 * xx + 1) +
                                               x.at(ch, 2 * y + 1, 2 * xx) + x.at(ch, 2 * y + 1, 2 * xx + 1));
    return out;
}

template <class T>
Tensor<T> upsample2(const Tensor<T>& x)
{
    require_rank3(x.shape(), "upsample2");
    const std::size_t c = x.channels(), h = x.height(), w = x.width();
    const auto ty = upsample_taps(h);
    const auto tx = upsample_taps(w);
    Tensor<T> out = Tensor<T>::chw(c, 2 * h, 2 * w);
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t y = 0; y < 2 * h; ++y) {
            const Taps& a = ty[y];
            for (std::size_t xx = 0; xx < 2 * w; ++xx) {
                const Taps& bb = tx[xx];
                const T v = T(a.w0 * bb.w0) * x.at(ch, a.i0, bb.i0) + T(a.w0 * bb.w1) * x.at(ch, a.i0, bb.i1) +
                            T(a.w1 * bb.w0) * x.at(ch, a.i1, bb.i0) + T(a.w1 * bb.w1) * x.at(ch, a.i1, bb.i1);
                out.at(ch, y, xx) = v;
            }
        }
    return out;
}

template <class T>
Tensor<T> space_to_depth(const Tensor<T>& x)
{
    require_even(x.shape(), "space_to_depth");
    const std::size_t c = x.channels(), h = x.height() / 2, w = x.width() / 2;
    Tensor<T> out = Tensor<T>::chw(4 * c, h, w);
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t dy = 0; dy < 2; ++dy)
            for (std::size_t dx = 0; dx < 2; ++dx)
                for (std::size_t y = 0; y < h; ++y)
                    for (std::size_t xx = 0; xx < w; ++xx)
                        out.at(4 * ch + 2 * dy + dx, y, xx) = x.at(ch, 2 * y + dy, 2 * xx + dx);
    return out;
}

template <class T>
Tensor<T> depth_to_space(const Tensor<T>& x)
{
    require_rank3(x.shape(), "depth_to_space");
    if (x.channels() % 4 != 0) throw ShapeError("depth_to_space: channels must be a multiple of 4");
    const std::size_t c = x.channels() / 4, h = x.height(), w = x.width();
    Tensor<T> out = Tensor<T>::chw(c, 2 * h, 2 * w);
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t dy = 0; dy < 2; ++dy)
            for (std::size_t dx = 0; dx < 2; ++dx)
                for (std::size_t y = 0; y < h; ++y)
                    for (std::size_t xx = 0; xx < w; ++xx)
                        out.at(ch, 2 * y + dy, 2 * xx + dx) = x.at(4 * ch + 2 * dy + dx, y, xx);
    return out;
}

} // namespace kernels

template <class T>
Var Graph<T>::push(Tensor<T> value, bool requires_grad)
{
    nodes_.push_back(Node{std::move(value), Tensor<T>(), requires_grad, {}});
    return Var{nodes_.size() - 1};
}

template <class T>
Var Graph<T>::constant(Tensor<T> value)
{
    return push(std::move(value), false);
}

template <class T>
Var Graph<T>::parameter(Tensor<T> value)
{
    return push(std::move(value), true);
}

template <class T>
Tensor<T>& Graph<T>::grad_ref(std::size_t id)
{
    Node& n = nodes_[id];
    if (n.grad.empty() && !n.value.empty()) n.grad = Tensor<T>(n.value.shape(), T(0));
    return n.grad;
}

template <class T>
Tensor<T> Graph<T>::grad(Var v) const
{
    const Node& n = nodes_.at(v.id);
    if (n.grad.empty()) return Tensor<T>(n.value.shape(), T(0));
    return n.grad;
}

template <class T>
void Graph<T>::backward(Var loss)
{
    if (nodes_.at(loss.id).value.size() != 1) throw ShapeError("backward: loss must be a scalar");
    grad_ref(loss.id)[0] += T(1);
    for (std::size_t i = loss.id + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (n.backward && !n.grad.empty()) n.backward();
    }
}

template <class T>
Var Graph<T>::conv2d(Var x, Var weights, Var bias, int stride, int padding)
{
    const Tensor<T>* bptr = bias.valid() ? &value(bias) : nullptr;
    Var out = push(kernels::conv2d(value(x), value(weights), bptr, stride, padding),
                   needs(x) || needs(weights) || needs(bias));
    if (!nodes_[out.id].requires_grad) return out;
    nodes_[out.id].backward = [this, x, weights, bias, stride, padding, out] {
        const Tensor<T>& X = value(x);
        const Tensor<T>& Wt = value(weights);
        const ConvGeom g = conv_geom(X, Wt, bias.valid() ? &value(bias) : nullptr, stride, padding);
        const std::size_t npix = g.ho * g.wo;
        const std::size_t kk = g.cin * g.k * g.k;
        Eigen::Map<const RowMat<T>> dO(nodes_[out.id].grad.data(), g.cout, npix);
        const bool one = direct_1x1(g);
        RowMat<T> col;
        if (needs(weights)) {
            Eigen::Map<RowMat<T>> dW(grad_ref(weights.id).data(), g.cout, kk);
            if (one) {
                Eigen::Map<const RowMat<T>> Xm(X.data(), kk, npix);
                dW.noalias() += dO * Xm.transpose();
            } else {
                col.resize(kk, npix);
                im2col(X.data(), g, col.data());
                dW.noalias() += dO * col.transpose();
            }
        }
        if (needs(bias)) {
            Tensor<T>& db = grad_ref(bias.id);
            for (std::size_t oc = 0; oc < g.cout; ++oc) db[oc] += dO.row(oc).sum();
        }
        if (needs(x)) {
            Eigen::Map<const RowMat<T>> W(Wt.data(), g.cout, kk);
            Tensor<T>& dx = grad_ref(x.id);
            if (one) {
                Eigen::Map<RowMat<T>> dX(dx.data(), kk, npix);
                dX.noalias() += W.transpose() * dO;
            } else {
                RowMat<T> dcol = W.transpose() * dO;
                col2im_add(dcol.data(), g, dx.data());
            }
        }
    };
    return out;
}

template <class T>
Var Graph<T>::avg_pool2(Var x)
{
    Var out = push(kernels::avg_pool2(value(x)), needs(x));
    if (!nodes_[out.id].requires_grad) return out;
    nodes_[out.id].backward = [this, x, out] {
        const Tensor<T>& g = nodes_[out.id].grad;
        Tensor<T>& dx = grad_ref(x.id);
        for (std::size_t c = 0; c < g.channels(); ++c)
            for (std::size_t y = 0; y < g.height(); ++y)
                for (std::size_t xx = 0; xx < g.width(); ++xx) {
                    const T q = T(0.25) * g.at(c, y, xx);
                    dx.at(c, 2 * y, 2 * xx) += q;
                    dx.at(c, 2 * y, 2 * xx + 1) += q;
                    dx.at(c, 2 * y + 1, 2 * xx) += q;
                    dx.at(c, 2 * y + 1, 2 * xx + 1) += q;
                }
    };
    return out;
}

template <class T>
Var Graph<T>::upsample2(Var x)
{
    Var out = push(kernels::upsample2(value(x)), needs(x));
    if (!nodes_[out.id].requires_grad) return out;
    nodes_[out.id].backward = [this, x, out] {
        const Tensor<T>& g = nodes_[out.id].grad;
        Tensor<T>& dx = grad_ref(x.id);
        const auto ty = upsample_taps(dx.height());
        const auto tx = upsample_taps(dx.width());
        for (std::size_t c = 0; c < g.channels(); ++c)
            for (std::size_t y = 0; y < g.height(); ++y) {
                const Taps& a = ty[y];
                for (std::size_t xx = 0; xx < g.width(); ++xx) {
                    const Taps& b = tx[xx];
                    const T v = g.at(c, y, xx);
                    dx.at(c, a.i0, b.i0) += T(a.w0 * b.w0) * v;
                    dx.at(c, a.i0, b.i1) += T(a.w0 * b.w1) * v;
                    dx.at(c, a.i1, b.i0) += T(a.w1 * b.w0) * v;
                    dx.at(c, a.i1, b.i1) += T(a.w1 * b.w1) * v;
                }
            }
    };
    return out;
}

template <class T>
Var Graph<T>::space_to_depth(Var x)
{
    Var out = push(kernels::space_to_depth(value(x)), needs(x));
    if (!nodes_[out.id].requires_grad) return out;
    nodes_[out.id].backward = [this, x, out] {
        const Tensor<T> back = kernels::depth_to_space(nodes_[out.id].grad);
        Tensor<T>& dx = grad_ref(x.id);
        for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += back[i];
    };
    return out;
}

template <class T>
Var Graph<T>::depth_to_space(Var x)
{
    Var out = push(kernels::depth_to_space(value(x)), needs(x));
    if (!nodes_[out.id].requires_grad) return out;
    nodes_[out.id].backward = [this, x, out] {
        const Tensor<T> back = kernels::space_to_depth(nodes_[out.id].grad);
        Tensor<T>& dx = grad_ref(x.id);
        for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += back[i];
    };
    return out;
}

template <class T>
Var Graph<T>::add(Var a, Var b)
{
    require_same_shape(value(a).shape(), value(b).shape(), "add");
    Tensor<T> r = value(a);
    const Tensor<T>& bv = value(b);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] += bv[i];
    Var out = push(std::move(r), needs(a) || needs(b));
    if (!nodes_[out.id].requires_grad) return out;
    nodes_[out.id].backward = [this, a, b, out] {
        for (Var v : {a, b}) {
            if (!needs(v)) continue;
            const Tensor<T>& g = nodes_[out.id].grad;
            Tensor<T>& d = grad_ref(v.id);
            for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i];
        }
    };
    return out;
}

template <class T>
Var Graph<T>::mul(Var a, Var b)
{
    require_same_shape(value(a).shape(), value(b).shape(), "mul");
    Tensor<T> r = value(a);
    const Tensor<T>& bv = value(b);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] *= bv[i];
    Var out = push(std::move(r), needs(a) || needs(b));
    if (!nodes_[out.id].requires_grad) return out;
    nodes_[out.id].backward = [this, a, b, out] {
        const Tensor<T>& g = nodes_[out.id].grad;
        if (needs(a)) {
            Tensor<T>& d = grad_ref(a.id);
            const Tensor<T>& o = value(b);
            for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i] * o[i];
        }
        if (needs(b)) {
            Tensor<T>& d = grad_ref(b.id);
            const Tensor<T>& o = value(a);
            for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i] * o[i];
        }
    };
    return out;
}

template <class T>
Var Graph<T>::scale(Var a, T s)
{
    Tensor<T> r = value(a);
    for (auto& v : r.vec()) v *= s;
    Var out = push(std::move(r), needs(a));
    if (!nodes_[out.id].requires_grad) return out;
    nodes_[out.id].backward = [this, a, s, out] {
        const Tensor<T>& g = nodes_[out.id].grad;
        Tensor<T>& d = grad_ref(a.id);
        for (std::size_t i = 0; i < d.size(); ++i) d[i] += s * g[i];
    };
    return out;
}

template <class T>
Var Graph<T>::relu(Var x)
{
    Tensor<T> r = value(x);
    for (auto& v : r.vec()) v = v > T(0) ? v : T(0);
    Var out = push(std::move(r), needs(x));
    if (!nodes_[out.id].requires_grad) return out;
    nodes_[out.id].backward = [this, x, out] {
        const Tensor<T>& g = nodes_[out.id].grad;
        const Tensor<T>& in = value(x);
        Tensor<T>& d = grad_ref(x.id);
        for (std::size_t i = 0; i < d.size(); ++i)
            if (in[i] > T(0)) d[i] += g[i];
    };
    return out;
}

template <class T>
Var Graph<T>::sigmoid(Var x)
{
    Tensor<T> r = value(x);
    for (auto& v : r.vec()) v = T(1) / (T(1) + std::exp(-v));
    Var out = push(std::move(r), needs(x));
    if (!nodes_[out.id].requires_grad) return out;
    nodes_[out.id].backward = [this, x, out] {
        const Tensor<T>& g = nodes_[out.id].grad;
        const Tensor<T>& in = nodes_[x.id].value;
        Tensor<T>& d = grad_ref(x.id);
        // from the input rather than s * (1 - s), which rounds to 0 once s == 1
        for (std::size_t i = 0; i < d.size(); ++i) {
            const T e = std::exp(-std::abs(in[i]));
            d[i] += g[i] * e / ((T(1) + e) * (T(1) + e));
        }
    };
    return out;
}

template <class T>
Var Graph<T>::slice_channels(Var x, std::size_t begin, std::size_t count)
{
    const Tensor<T>& in = value(x);
    require_rank3(in.shape(), "slice_channels");
    if (begin + count > in.channels() || count == 0)
        throw ShapeError("slice_channels: range out of bounds for " + shape_string(in.shape()));
    Tensor<T> r = Tensor<T>::chw(count, in.height(), in.width());
    std::copy(in.data() + begin * in.plane(), in.data() + (begin + count) * in.plane(), r.data());
    Var out = push(std::move(r), needs(x));
    if (!nodes_[out.id].requires_grad) return out;
    nodes_[out.id].backward = [this, x, begin, out] {
        const Tensor<T>& g = nodes_[out.id].grad;
        Tensor<T>& d = grad_ref(x.id);
        T* dst = d.data() + begin * d.plane();
        for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
    };
    return out;
}

template <class T>
Var Graph<T>::pad_replicate(Var x, int pad)
{
    const Tensor<T>& in = value(x);
    require_rank3(in.shape(), "pad_replicate");
    if (pad < 0) throw ShapeError("pad_replicate: negative pad");
    const std::size_t p = static_cast<std::size_t>(pad);
    const std::size_t h = in.height(), w = in.width();
    Tensor<T> r = Tensor<T>::chw(in.channels(), h + 2 * p, w + 2 * p);
    auto src = [p](std::size_t o, std::size_t n) {
        const long s = static_cast<long>(o) - static_cast<long>(p);
        return static_cast<std::size_t>(std::clamp(s, 0L, static_cast<long>(n) - 1));
    };
    for (std::size_t c = 0; c < in.channels(); ++c)
        for (std::size_t y = 0; y < h + 2 * p; ++y)
            for (std::size_t xx = 0; xx < w + 2 * p; ++xx) r.at(c, y, xx) = in.at(c, src(y, h), src(xx, w));
    Var out = push(std::move(r), needs(x));
    if (!nodes_[out.id].requires_grad) return out;
    nodes_[out.id].backward = [this, x, p, out, src] {
        const Tensor<T>& g = nodes_[out.id].grad;
        Tensor<T>& d = grad_ref(x.id);
        const std::size_t h = d.height(), w = d.width();
        for (std::size_t c = 0; c < g.channels(); ++c)
            for (std::size_t y = 0; y < h + 2 * p; ++y)
                for (std::size_t xx = 0; xx < w + 2 * p; ++xx) d.at(c, src(y, h), src(xx, w)) += g.at(c, y, xx);
    };
    return out;
}

template <class T>
Var Graph<T>::mean_abs_diff(Var a, Var b)
{
    require_same_shape(value(a).shape(), value(b).shape(), "mean_abs_diff");
    const Tensor<T>& av = value(a);
    const Tensor<T>& bv = value(b);
    const std::size_t n = av.size();
    if (n == 0) throw ShapeError("mean_abs_diff: empty tensors");
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += std::abs(static_cast<double>(av[i]) - static_cast<double>(bv[i]));
    Var out = push(Tensor<T>(Dims{1}, T(acc / static_cast<double>(n))), needs(a) || needs(b));
    if (!nodes_[out.id].requires_grad) return out;
    nodes_[out.id].backward = [this, a, b, n, out] {
        const T g = nodes_[out.id].grad[0] / static_cast<T>(n);
        const Tensor<T>& av = value(a);
        const Tensor<T>& bv = value(b);
        auto sgn = [](T d) { return d > T(0) ? T(1) : (d < T(0) ? T(-1) : T(0)); };
        if (needs(a)) {
            Tensor<T>& d = grad_ref(a.id);
            for (std::size_t i = 0; i < n; ++i) d[i] += g * sgn(av[i] - bv[i]);
        }
        if (needs(b)) {
            Tensor<T>& d = grad_ref(b.id);
            for (std::size_t i = 0; i < n; ++i) d[i] -= g * sgn(av[i] - bv[i]);
        }
    };
    return out;
}

template class Graph<float>;
template class Graph<double>;

namespace kernels {
template Tensor<float> conv2d(const Tensor<float>&, const Tensor<float>&, const Tensor<float>*, int, int);
template Tensor<double> conv2d(const Tensor<double>&, const Tensor<double>&, const Tensor<double>*, int, int);
template Tensor<float> avg_pool2(const Tensor<float>&);
template Tensor<double> avg_pool2(const Tensor<double>&);
template Tensor<float> upsample2(const Tensor<float>&);
template Tensor<double> upsample2(const Tensor<double>&);
template Tensor<float> space_to_depth(const Tensor<float>&);
template Tensor<double> space_to_depth(const Tensor<double>&);
template Tensor<float> depth_to_space(const Tensor<float>&);
template Tensor<double> depth_to_space(const Tensor<double>&);
} // namespace kernels

} // namespace nsm
