#include "nsm/tensor.hpp"

#include <algorithm>
#include <functional>
#include <numeric>

namespace nsm {

std::string shape_string(const Dims& s)
{
    std::string out = "(";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + ")";
}

std::size_t shape_size(const Dims& s)
{
    return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

void require_same_shape(const Dims& a, const Dims& b, const char* what)
{
    if (a != b) throw ShapeError(std::string(what) + ": shape mismatch " + shape_string(a) + " vs " + shape_string(b));
}

template <class T>
Tensor<T>::Tensor(Dims shape, T fill) : shape_(std::move(shape)), data_(shape_size(shape_), fill)
{
}

template <class T>
Tensor<T>::Tensor(Dims shape, std::vector<T> data) : shape_(std::move(shape)), data_(data.begin(), data.end())
{
    if (data_.size() != shape_size(shape_))
        throw ShapeError("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                         shape_string(shape_));
}

template <class T>
void Tensor<T>::fill(T v)
{
    std::fill(data_.begin(), data_.end(), v);
}

template <class T>
Tensor<T> Tensor<T>::reshaped(Dims s) const
{
    if (shape_size(s) != data_.size()) throw ShapeError("reshape to " + shape_string(s) + " changes element count");
    Tensor out = *this;
    out.shape_ = std::move(s);
    return out;
}

template class Tensor<float>;
template class Tensor<double>;

} // namespace nsm
