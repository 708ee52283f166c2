#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace nsm {

class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

using Dims = std::vector<std::size_t>;

std::string shape_string(const Dims& s);
std::size_t shape_size(const Dims& s);

/// Dense row-major tensor. Images use the (channels, height, width) layout;
/// convolution weights use (out, in, k, k).
template <class T>
class Tensor {
public:
    using value_type = T;
    // Aligned so vectorized reductions split the same way for every buffer.
    using Storage = std::vector<T, Eigen::aligned_allocator<T>>;

    Tensor() = default;
    explicit Tensor(Dims shape, T fill = T(0));
    Tensor(Dims shape, std::vector<T> data);

    static Tensor chw(std::size_t c, std::size_t h, std::size_t w, T fill = T(0))
    {
        return Tensor(Dims{c, h, w}, fill);
    }

    const Dims& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    // (C, H, W) accessors; valid for rank-3 tensors only.
    std::size_t channels() const { return shape_[0]; }
    std::size_t height() const { return shape_[1]; }
    std::size_t width() const { return shape_[2]; }
    std::size_t plane() const { return shape_[1] * shape_[2]; }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    std::span<T> span() { return data_; }
    std::span<const T> span() const { return data_; }
    Storage& vec() { return data_; }
    const Storage& vec() const { return data_; }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    T& at(std::size_t c, std::size_t y, std::size_t x) { return data_[(c * shape_[1] + y) * shape_[2] + x]; }
    const T& at(std::size_t c, std::size_t y, std::size_t x) const
    {
        return data_[(c * shape_[1] + y) * shape_[2] + x];
    }

    std::span<T> channel(std::size_t c) { return std::span<T>(data_).subspan(c * plane(), plane()); }
    std::span<const T> channel(std::size_t c) const
    {
        return std::span<const T>(data_).subspan(c * plane(), plane());
    }

    void fill(T v);
    Tensor reshaped(Dims s) const;

    template <class U>
    Tensor<U> cast() const
    {
        std::vector<U> out(data_.begin(), data_.end());
        return Tensor<U>(shape_, std::move(out));
    }

    bool operator==(const Tensor& o) const { return shape_ == o.shape_ && data_ == o.data_; }

private:
    Dims shape_;
    Storage data_;
};

/// Throws ShapeError naming `what` when the shapes differ.
void require_same_shape(const Dims& a, const Dims& b, const char* what);

extern template class Tensor<float>;
extern template class Tensor<double>;

} // namespace nsm
