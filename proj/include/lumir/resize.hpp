#pragma once

#include <vector>

#include "lumir/tensor.hpp"

namespace lumir {

// Linear interpolation support for one axis, half-pixel-centered
// (source = (dst + 0.5) * in/out - 0.5, clamped to the valid range).
struct LinTap {
    int i0;
    int i1;
    double w1;  // value = (1-w1)*x[i0] + w1*x[i1]
};

std::vector<LinTap> interp_taps(int in_size, int out_size);

// Block-mean (area) pooling by an integer factor; dims must divide.
Tensor block_mean_down(const Tensor& x, int factor);
// Bilinear resize to an arbitrary target size; exact on constants.
Tensor bilinear_resize(const Tensor& x, int out_h, int out_w);
// Bilinear upsample by an integer factor.
Tensor bilinear_upsample(const Tensor& x, int factor);
Tensor nearest_upsample_tensor(const Tensor& x, int factor);

}  // namespace lumir
