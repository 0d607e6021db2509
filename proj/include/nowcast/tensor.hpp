#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "nowcast/common.hpp"

namespace nowcast {

// Dense row-major n-d array. Always contiguous; shape is dynamic.
template <typename T>
class TensorT {
public:
    TensorT() = default;

    explicit TensorT(std::vector<long> shape) : shape_(std::move(shape)) {
        data_.assign(numel_of(shape_), T(0));
    }

    TensorT(std::initializer_list<long> shape) : TensorT(std::vector<long>(shape)) {}

    static TensorT full(std::vector<long> shape, T value) {
        TensorT t(std::move(shape));
        std::fill(t.data_.begin(), t.data_.end(), value);
        return t;
    }

    const std::vector<long>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    long dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    template <typename... I>
    T& at(I... idx) {
        return data_[flat(idx...)];
    }
    template <typename... I>
    const T& at(I... idx) const {
        return data_[flat(idx...)];
    }

    template <typename... I>
    std::size_t flat(I... idx) const {
        static_assert((std::is_integral_v<I> && ...));
        const long ix[] = {static_cast<long>(idx)...};
        std::size_t n = sizeof...(idx);
        std::size_t off = 0;
        for (std::size_t d = 0; d < n; ++d) off = off * static_cast<std::size_t>(shape_[d]) + static_cast<std::size_t>(ix[d]);
        return off;
    }

    void fill(T value) { std::fill(data_.begin(), data_.end(), value); }
    void zero() { fill(T(0)); }

    void reshape(std::vector<long> shape) {
        if (numel_of(shape) != data_.size())
            throw DataError("reshape: element count mismatch (" + shape_str(shape_) + " -> " + shape_str(shape) + ")");
        shape_ = std::move(shape);
    }

    bool same_shape(const TensorT& o) const { return shape_ == o.shape_; }

    template <typename U>
    TensorT<U> cast() const {
        TensorT<U> out(shape_);
        for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
        return out;
    }

    static std::string shape_str(const std::vector<long>& s) {
        std::ostringstream os;
        os << "[";
        for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
        os << "]";
        return os.str();
    }
    std::string shape_str() const { return shape_str(shape_); }

    static std::size_t numel_of(const std::vector<long>& shape) {
        std::size_t n = 1;
        for (long d : shape) n *= static_cast<std::size_t>(d);
        return shape.empty() ? 0 : n;
    }

private:
    std::vector<long> shape_;
    std::vector<T> data_;
};

using Tensor = TensorT<float>;
using Mask = TensorT<std::uint8_t>;

template <typename T>
void require_shape(const TensorT<T>& t, const std::vector<long>& shape, const char* what) {
    if (t.shape() != shape)
        throw DataError(std::string(what) + ": expected shape " + TensorT<T>::shape_str(shape) + ", got " + t.shape_str());
}

}  // namespace nowcast
