#include "lumir/resize.hpp"

#include <cmath>
#include <stdexcept>

namespace lumir {

namespace {

void require_chw(const Tensor& x, const char* what) {
    if (x.rank() != 3) {
        throw std::invalid_argument(std::string(what) + ": expected a (C,H,W) tensor, got " +
                                    shape_str(x));
    }
}

}  // namespace

std::vector<LinTap> interp_taps(int in_size, int out_size) {
    std::vector<LinTap> taps(static_cast<size_t>(out_size));
    double scale = static_cast<double>(in_size) / out_size;
    for (int o = 0; o < out_size; ++o) {
        double src = (o + 0.5) * scale - 0.5;
        if (src < 0.0) src = 0.0;
        if (src > in_size - 1) src = in_size - 1;
        int i0 = static_cast<int>(std::floor(src));
        int i1 = i0 + 1 < in_size ? i0 + 1 : in_size - 1;
        taps[static_cast<size_t>(o)] = LinTap{i0, i1, src - i0};
    }
    return taps;
}

Tensor block_mean_down(const Tensor& x, int factor) {
    require_chw(x, "block_mean_down");
    if (factor < 1) throw std::invalid_argument("block_mean_down: factor must be >= 1");
    if (factor == 1) return x;
    int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    if (h % factor != 0 || w % factor != 0) {
        throw std::invalid_argument("block_mean_down: dims " + shape_str(x) +
                                    " not divisible by factor " + std::to_string(factor));
    }
    int oh = h / factor, ow = w / factor;
    Tensor out({c, oh, ow});
    double inv = 1.0 / (static_cast<double>(factor) * factor);
    for (int ci = 0; ci < c; ++ci) {
        for (int yo = 0; yo < oh; ++yo) {
            for (int xo = 0; xo < ow; ++xo) {
                double s = 0.0;
                for (int dy = 0; dy < factor; ++dy) {
                    for (int dx = 0; dx < factor; ++dx) {
                        s += x.at(ci, yo * factor + dy, xo * factor + dx);
                    }
                }
                out.at(ci, yo, xo) = s * inv;
            }
        }
    }
    return out;
}

Tensor bilinear_resize(const Tensor& x, int out_h, int out_w) {
    require_chw(x, "bilinear_resize");
    if (out_h < 1 || out_w < 1) throw std::invalid_argument("bilinear_resize: bad target size");
    int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    if (h == out_h && w == out_w) return x;
    auto ty = interp_taps(h, out_h);
    auto tx = interp_taps(w, out_w);
    Tensor out({c, out_h, out_w});
    for (int ci = 0; ci < c; ++ci) {
        for (int yo = 0; yo < out_h; ++yo) {
            const LinTap& a = ty[static_cast<size_t>(yo)];
            for (int xo = 0; xo < out_w; ++xo) {
                const LinTap& b = tx[static_cast<size_t>(xo)];
                double v00 = x.at(ci, a.i0, b.i0), v01 = x.at(ci, a.i0, b.i1);
                double v10 = x.at(ci, a.i1, b.i0), v11 = x.at(ci, a.i1, b.i1);
                double top = v00 + (v01 - v00) * b.w1;
                double bot = v10 + (v11 - v10) * b.w1;
                out.at(ci, yo, xo) = top + (bot - top) * a.w1;
            }
        }
    }
    return out;
}

Tensor bilinear_upsample(const Tensor& x, int factor) {
    require_chw(x, "bilinear_upsample");
    if (factor < 1) throw std::invalid_argument("bilinear_upsample: factor must be >= 1");
    if (factor == 1) return x;
    return bilinear_resize(x, x.dim(1) * factor, x.dim(2) * factor);
}

Tensor nearest_upsample_tensor(const Tensor& x, int factor) {
    require_chw(x, "nearest_upsample");
    if (factor < 1) throw std::invalid_argument("nearest_upsample: factor must be >= 1");
    if (factor == 1) return x;
    int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    Tensor out({c, h * factor, w * factor});
    for (int ci = 0; ci < c; ++ci) {
        for (int yo = 0; yo < h * factor; ++yo) {
            for (int xo = 0; xo < w * factor; ++xo) {
                out.at(ci, yo, xo) = x.at(ci, yo / factor, xo / factor);
            }
        }
    }
    return out;
}

}  // namespace lumir
