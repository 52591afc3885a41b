#pragma once

#include <algorithm>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <vector>

#include "exitwise/errors.hpp"

namespace exitwise {

// Dense rank-1..4 array, row-major, value-semantic. Images use H x W x C.
// T is float on the training/inference path and double for gradient
// verification.
template <typename T>
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> shape, T fill = T{0})
        : shape_(std::move(shape)) {
        validate_shape();
        data_.assign(element_count(shape_), fill);
    }

    Tensor(std::vector<std::size_t> shape, std::vector<T> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        validate_shape();
        if (data_.size() != element_count(shape_)) {
            std::ostringstream msg;
            msg << "tensor data length " << data_.size()
                << " does not match shape product " << element_count(shape_);
            throw DimensionError(msg.str());
        }
    }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    std::size_t extent(std::size_t axis) const { return shape_.at(axis); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    std::vector<T>& raw() { return data_; }
    const std::vector<T>& raw() const { return data_; }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    // Rank-2 access (rows x cols).
    T& at2(std::size_t i, std::size_t j) {
        return data_[i * shape_[1] + j];
    }
    const T& at2(std::size_t i, std::size_t j) const {
        return data_[i * shape_[1] + j];
    }

    // Rank-3 access (H x W x C).
    T& at3(std::size_t y, std::size_t x, std::size_t c) {
        return data_[(y * shape_[1] + x) * shape_[2] + c];
    }
    const T& at3(std::size_t y, std::size_t x, std::size_t c) const {
        return data_[(y * shape_[1] + x) * shape_[2] + c];
    }

    // Rank-4 access (h x w x in_channels x filters).
    T& at4(std::size_t a, std::size_t b, std::size_t c, std::size_t d) {
        return data_[((a * shape_[1] + b) * shape_[2] + c) * shape_[3] + d];
    }
    const T& at4(std::size_t a, std::size_t b, std::size_t c, std::size_t d) const {
        return data_[((a * shape_[1] + b) * shape_[2] + c) * shape_[3] + d];
    }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    // Reinterpret as flat rank-1 tensor; element order is preserved.
    Tensor flattened() const { return Tensor({data_.size()}, data_); }

    template <typename U>
    Tensor<U> cast() const {
        std::vector<U> out(data_.size());
        std::transform(data_.begin(), data_.end(), out.begin(),
                       [](T v) { return static_cast<U>(v); });
        return Tensor<U>(shape_, std::move(out));
    }

    friend bool operator==(const Tensor& a, const Tensor& b) {
        return a.shape_ == b.shape_ && a.data_ == b.data_;
    }

    static std::size_t element_count(const std::vector<std::size_t>& shape) {
        return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                               std::multiplies<>());
    }

private:
    void validate_shape() const {
        if (shape_.empty() || shape_.size() > 4) {
            throw DimensionError("tensor rank must be 1..4, got " +
                                 std::to_string(shape_.size()));
        }
        for (std::size_t e : shape_) {
            if (e < 1) throw DimensionError("tensor extents must be >= 1");
        }
    }

    std::vector<std::size_t> shape_;
    std::vector<T> data_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

inline std::string shape_to_string(const std::vector<std::size_t>& shape) {
    std::string s;
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(shape[i]);
    }
    return s;
}

}  // namespace exitwise
