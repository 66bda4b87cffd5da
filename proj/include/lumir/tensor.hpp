#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace lumir {

// Dense row-major tensor of doubles, rank 1..4. Images are (C, H, W),
// token matrices are (L, C), prompt banks are (N, C, H, W).
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int> shape);

    static Tensor zeros(std::vector<int> shape);
    static Tensor full(std::vector<int> shape, double value);
    static Tensor from_data(std::vector<int> shape, std::vector<double> data);

    int rank() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
    std::int64_t numel() const { return static_cast<std::int64_t>(data_.size()); }
    const std::vector<int>& shape() const { return shape_; }
    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& vec() { return data_; }
    const std::vector<double>& vec() const { return data_; }

    double& operator[](std::int64_t i) { return data_[static_cast<size_t>(i)]; }
    double operator[](std::int64_t i) const { return data_[static_cast<size_t>(i)]; }

    // rank-3 (C,H,W) accessors
    double& at(int c, int h, int w);
    double at(int c, int h, int w) const;
    // rank-2 (R,C) accessors
    double& at(int r, int c);
    double at(int r, int c) const;

    bool all_finite() const;
    double min_value() const;
    double max_value() const;

    Tensor& operator+=(const Tensor& other);
    Tensor& operator*=(double s);

    // Returns a tensor with the same data reinterpreted under a new shape
    // of equal element count.
    Tensor reshaped(std::vector<int> shape) const;

private:
    std::vector<int> shape_;
    std::vector<double> data_;
};

std::string shape_str(const std::vector<int>& shape);
std::string shape_str(const Tensor& t);

void check_shape(const Tensor& t, const std::vector<int>& expect, const char* what);

}  // namespace lumir
