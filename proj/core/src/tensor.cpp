#include "taper/tensor.hpp"

#include <sstream>

#include "taper/error.hpp"

namespace taper {

namespace {

void check_shape(const std::vector<std::size_t>& shape) {
    if (shape.empty()) throw Error("tensor shape must have at least one dimension");
    for (std::size_t d : shape) {
        if (d == 0) throw Error("tensor dimensions must be >= 1, got shape " + shape_str(shape));
    }
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape) : shape_(std::move(shape)) {
    check_shape(shape_);
    data_.assign(shape_size(shape_), 0.0);
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    check_shape(shape_);
    if (shape_size(shape_) != data_.size()) {
        throw Error("tensor data length " + std::to_string(data_.size()) +
                    " does not match shape " + shape_str(shape_));
    }
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value) {
    Tensor t(std::move(shape));
    for (double& v : t.data_) v = value;
    return t;
}

Tensor Tensor::vector(std::vector<double> values) {
    std::size_t n = values.size();
    return Tensor({n}, std::move(values));
}

Tensor Tensor::reshaped(std::vector<std::size_t> shape) const {
    if (shape_size(shape) != size()) {
        throw Error("cannot reshape tensor of size " + std::to_string(size()) + " to " +
                    shape_str(shape));
    }
    return Tensor(std::move(shape), data_);
}

std::size_t shape_size(std::span<const std::size_t> shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

std::string shape_str(std::span<const std::size_t> shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ", ";
        os << shape[i];
    }
    os << ']';
    return os.str();
}

}  // namespace taper
