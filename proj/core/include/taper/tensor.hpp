#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace taper {

/// Dense n-dimensional array of 64-bit reals, row-major.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape);  // zero-filled
    Tensor(std::vector<std::size_t> shape, std::vector<double> data);

    static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }
    static Tensor full(std::vector<std::size_t> shape, double value);
    /// 1-D tensor from a value list.
    static Tensor vector(std::vector<double> values);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    std::size_t dim(std::size_t i) const { return shape_[i]; }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& values() { return data_; }
    const std::vector<double>& values() const { return data_; }
    std::span<double> flat() { return data_; }
    std::span<const double> flat() const { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    /// Returns a copy with a new shape of the same total size.
    Tensor reshaped(std::vector<std::size_t> shape) const;

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

std::size_t shape_size(std::span<const std::size_t> shape);
std::string shape_str(std::span<const std::size_t> shape);

}  // namespace taper
