#include "lumir/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <stdexcept>

namespace lumir {

namespace {

constexpr double kPsnrCap = 100.0;

void require_pair(const Tensor& a, const Tensor& b, const char* what) {
    if (!a.same_shape(b)) {
        throw std::invalid_argument(std::string(what) + ": shape mismatch " + shape_str(a) +
                                    " vs " + shape_str(b));
    }
}

std::vector<double> gaussian_window(int taps, double sigma) {
    std::vector<double> w(static_cast<size_t>(taps));
    int half = taps / 2;
    double sum = 0.0;
    for (int i = 0; i < taps; ++i) {
        double d = i - half;
        w[static_cast<size_t>(i)] = std::exp(-d * d / (2.0 * sigma * sigma));
        sum += w[static_cast<size_t>(i)];
    }
    for (double& v : w) v /= sum;
    return w;
}

}  // namespace

double psnr(const Tensor& a, const Tensor& b, double peak) {
    require_pair(a, b, "psnr");
    if (!(peak > 0.0)) throw std::invalid_argument("psnr: peak must be > 0");
    double mse = 0.0;
    for (std::int64_t i = 0; i < a.numel(); ++i) {
        double d = a[i] - b[i];
        mse += d * d;
    }
    mse /= static_cast<double>(a.numel());
    if (mse == 0.0) return kPsnrCap;
    double value = 10.0 * std::log10(peak * peak / mse);
    if (!std::isfinite(value)) return value;  // NaN inputs must not hit the cap
    return std::min(kPsnrCap, value);
}

double ssim(const Tensor& a, const Tensor& b, double peak) {
    require_pair(a, b, "ssim");
    if (a.rank() != 3) throw std::invalid_argument("ssim: expected (C,H,W) tensors");
    const int taps = 11;
    const double sigma = 1.5;
    const double k1 = 0.01, k2 = 0.03;
    int c = a.dim(0), h = a.dim(1), w = a.dim(2);
    if (h < taps || w < taps) {
        throw std::invalid_argument("ssim: image " + shape_str(a) + " smaller than the " +
                                    std::to_string(taps) + "-tap window");
    }
    double c1 = (k1 * peak) * (k1 * peak);
    double c2 = (k2 * peak) * (k2 * peak);
    std::vector<double> win = gaussian_window(taps, sigma);

    double total = 0.0;
    std::int64_t count = 0;
    for (int ch = 0; ch < c; ++ch) {
        for (int y = 0; y + taps <= h; ++y) {
            for (int x = 0; x + taps <= w; ++x) {
                double ma = 0.0, mb = 0.0, saa = 0.0, sbb = 0.0, sab = 0.0;
                for (int dy = 0; dy < taps; ++dy) {
                    double wy = win[static_cast<size_t>(dy)];
                    for (int dx = 0; dx < taps; ++dx) {
                        double wgt = wy * win[static_cast<size_t>(dx)];
                        double va = a.at(ch, y + dy, x + dx);
                        double vb = b.at(ch, y + dy, x + dx);
                        ma += wgt * va;
                        mb += wgt * vb;
                        saa += wgt * va * va;
                        sbb += wgt * vb * vb;
                        sab += wgt * va * vb;
                    }
                }
                double var_a = saa - ma * ma;
                double var_b = sbb - mb * mb;
                double cov = sab - ma * mb;
                double num = (2.0 * ma * mb + c1) * (2.0 * cov + c2);
                double den = (ma * ma + mb * mb + c1) * (var_a + var_b + c2);
                total += num / den;
                ++count;
            }
        }
    }
    return total / static_cast<double>(count);
}

double davies_bouldin(const std::vector<std::vector<double>>& features,
                      const std::vector<int>& labels) {
    if (features.size() != labels.size()) {
        throw std::invalid_argument("davies_bouldin: features/labels length mismatch");
    }
    if (features.empty()) throw std::invalid_argument("davies_bouldin: empty input");
    size_t dim = features.front().size();
    for (const auto& f : features) {
        if (f.size() != dim) throw std::invalid_argument("davies_bouldin: ragged feature vectors");
    }
    std::map<int, std::vector<size_t>> clusters;
    for (size_t i = 0; i < labels.size(); ++i) clusters[labels[i]].push_back(i);
    if (clusters.size() < 2) throw std::invalid_argument("davies_bouldin: need >= 2 clusters");

    std::vector<std::vector<double>> centroids;
    std::vector<double> scatter;
    for (const auto& [label, members] : clusters) {
        std::vector<double> centroid(dim, 0.0);
        for (size_t i : members) {
            for (size_t d = 0; d < dim; ++d) centroid[d] += features[i][d];
        }
        for (double& v : centroid) v /= static_cast<double>(members.size());
        double s = 0.0;
        for (size_t i : members) {
            double sq = 0.0;
            for (size_t d = 0; d < dim; ++d) {
                double diff = features[i][d] - centroid[d];
                sq += diff * diff;
            }
            s += std::sqrt(sq);
        }
        scatter.push_back(s / static_cast<double>(members.size()));
        centroids.push_back(std::move(centroid));
    }

    size_t k = centroids.size();
    double dbi = 0.0;
    for (size_t i = 0; i < k; ++i) {
        double worst = 0.0;
        for (size_t j = 0; j < k; ++j) {
            if (i == j) continue;
            double sq = 0.0;
            for (size_t d = 0; d < dim; ++d) {
                double diff = centroids[i][d] - centroids[j][d];
                sq += diff * diff;
            }
            double dist = std::sqrt(sq);
            if (dist == 0.0) {
                throw std::invalid_argument(
                    "davies_bouldin: coincident centroids make the index degenerate");
            }
            worst = std::max(worst, (scatter[i] + scatter[j]) / dist);
        }
        dbi += worst;
    }
    return dbi / static_cast<double>(k);
}

MetricReport MetricReport::build(std::vector<MetricRow> rows) {
    if (rows.empty()) throw std::invalid_argument("MetricReport: no rows");
    MetricReport r;
    r.rows = std::move(rows);
    double n = static_cast<double>(r.rows.size());
    for (const MetricRow& row : r.rows) {
        r.psnr_mean += row.psnr;
        r.ssim_mean += row.ssim;
    }
    r.psnr_mean /= n;
    r.ssim_mean /= n;
    for (const MetricRow& row : r.rows) {
        r.psnr_std += (row.psnr - r.psnr_mean) * (row.psnr - r.psnr_mean);
        r.ssim_std += (row.ssim - r.ssim_mean) * (row.ssim - r.ssim_mean);
    }
    r.psnr_std = std::sqrt(r.psnr_std / n);
    r.ssim_std = std::sqrt(r.ssim_std / n);
    return r;
}

std::string MetricReport::to_csv() const {
    std::ostringstream os;
    char buf[96];
    os << "id,psnr,ssim\n";
    for (const MetricRow& row : rows) {
        std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f", row.id.c_str(), row.psnr, row.ssim);
        os << buf << "\n";
    }
    std::snprintf(buf, sizeof(buf), "AGGREGATE,%.6f,%.6f", psnr_mean, ssim_mean);
    os << buf << "\n";
    std::snprintf(buf, sizeof(buf), "AGGREGATE_STD,%.6f,%.6f", psnr_std, ssim_std);
    os << buf << "\n";
    return os.str();
}

}  // namespace lumir
