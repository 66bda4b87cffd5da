#pragma once

#include <string>
#include <vector>

#include "lumir/tensor.hpp"

namespace lumir {

// 10*log10(peak^2 / MSE), capped at 100 dB (identical images report the cap).
double psnr(const Tensor& a, const Tensor& b, double peak = 1.0);

// Mean local SSIM with an 11-tap Gaussian window (sigma 1.5), K1=0.01,
// K2=0.03; windows are evaluated where they fit entirely; channels averaged.
double ssim(const Tensor& a, const Tensor& b, double peak = 1.0);

// Davies-Bouldin index with Euclidean centroid distances; scatter is the
// mean distance to the centroid. labels are arbitrary ints; every cluster
// must be nonempty and centroids pairwise distinct.
double davies_bouldin(const std::vector<std::vector<double>>& features,
                      const std::vector<int>& labels);

struct MetricRow {
    std::string id;
    double psnr = 0.0;
    double ssim = 0.0;
};

struct MetricReport {
    std::vector<MetricRow> rows;
    double psnr_mean = 0.0, psnr_std = 0.0;
    double ssim_mean = 0.0, ssim_std = 0.0;

    static MetricReport build(std::vector<MetricRow> rows);
    // CSV with per-image rows followed by a line prefixed "AGGREGATE".
    std::string to_csv() const;
};

}  // namespace lumir
