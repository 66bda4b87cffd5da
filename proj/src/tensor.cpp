#include "lumir/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace lumir {

namespace {

std::int64_t count_elements(const std::vector<int>& shape) {
    if (shape.empty() || shape.size() > 4) {
        throw std::invalid_argument("tensor rank must be 1..4, got " + shape_str(shape));
    }
    std::int64_t n = 1;
    for (int d : shape) {
        if (d <= 0) {
            throw std::invalid_argument("tensor dims must be positive, got " + shape_str(shape));
        }
        n *= d;
    }
    return n;
}

}  // namespace

Tensor::Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    data_.assign(static_cast<size_t>(count_elements(shape_)), 0.0);
}

Tensor Tensor::zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

Tensor Tensor::full(std::vector<int> shape, double value) {
    Tensor t(std::move(shape));
    std::fill(t.data_.begin(), t.data_.end(), value);
    return t;
}

Tensor Tensor::from_data(std::vector<int> shape, std::vector<double> data) {
    Tensor t;
    if (count_elements(shape) != static_cast<std::int64_t>(data.size())) {
        throw std::invalid_argument("data size does not match shape " + shape_str(shape));
    }
    t.shape_ = std::move(shape);
    t.data_ = std::move(data);
    return t;
}

double& Tensor::at(int c, int h, int w) {
    return data_[(static_cast<size_t>(c) * dim(1) + h) * dim(2) + w];
}

double Tensor::at(int c, int h, int w) const {
    return data_[(static_cast<size_t>(c) * dim(1) + h) * dim(2) + w];
}

double& Tensor::at(int r, int c) { return data_[static_cast<size_t>(r) * dim(1) + c]; }

double Tensor::at(int r, int c) const { return data_[static_cast<size_t>(r) * dim(1) + c]; }

bool Tensor::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double Tensor::min_value() const { return *std::min_element(data_.begin(), data_.end()); }

double Tensor::max_value() const { return *std::max_element(data_.begin(), data_.end()); }

Tensor& Tensor::operator+=(const Tensor& other) {
    if (!same_shape(other)) {
        throw std::invalid_argument("shape mismatch in += : " + shape_str(*this) + " vs " +
                                    shape_str(other));
    }
    for (size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
}

Tensor& Tensor::operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
}

Tensor Tensor::reshaped(std::vector<int> shape) const {
    if (count_elements(shape) != numel()) {
        throw std::invalid_argument("reshape element count mismatch: " + shape_str(*this) +
                                    " -> " + shape_str(shape));
    }
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = data_;
    return t;
}

std::string shape_str(const std::vector<int>& shape) {
    std::ostringstream os;
    os << "(";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ",";
        os << shape[i];
    }
    os << ")";
    return os.str();
}

std::string shape_str(const Tensor& t) { return shape_str(t.shape()); }

void check_shape(const Tensor& t, const std::vector<int>& expect, const char* what) {
    if (t.shape() != expect) {
        throw std::invalid_argument(std::string(what) + ": expected shape " + shape_str(expect) +
                                    ", got " + shape_str(t));
    }
}

}  // namespace lumir
