#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "lumir/metrics.hpp"
#include "lumir/rng.hpp"

using namespace lumir;

namespace {

// independent straight-line SSIM: separate passes per statistic
double ssim_reference(const Tensor& a, const Tensor& b) {
    const int taps = 11;
    const double sigma = 1.5;
    double kernel[taps];
    double ksum = 0.0;
    for (int i = 0; i < taps; ++i) {
        double d = i - 5;
        kernel[i] = std::exp(-d * d / (2.0 * sigma * sigma));
        ksum += kernel[i];
    }
    for (double& k : kernel) k /= ksum;
    const double c1 = 1e-4, c2 = 9e-4;
    int cdim = a.dim(0), h = a.dim(1), w = a.dim(2);
    double total = 0.0;
    int count = 0;
    for (int ch = 0; ch < cdim; ++ch) {
        for (int y = 0; y + taps <= h; ++y) {
            for (int x = 0; x + taps <= w; ++x) {
                double mu_a = 0.0, mu_b = 0.0;
                for (int i = 0; i < taps; ++i) {
                    for (int j = 0; j < taps; ++j) {
                        mu_a += kernel[i] * kernel[j] * a.at(ch, y + i, x + j);
                        mu_b += kernel[i] * kernel[j] * b.at(ch, y + i, x + j);
                    }
                }
                double va = 0.0, vb = 0.0, cov = 0.0;
                for (int i = 0; i < taps; ++i) {
                    for (int j = 0; j < taps; ++j) {
                        double da = a.at(ch, y + i, x + j) - mu_a;
                        double db = b.at(ch, y + i, x + j) - mu_b;
                        va += kernel[i] * kernel[j] * da * da;
                        vb += kernel[i] * kernel[j] * db * db;
                        cov += kernel[i] * kernel[j] * da * db;
                    }
                }
                // weighted central moments differ from E[x^2]-E[x]^2 by zero here
                total += ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) /
                         ((mu_a * mu_a + mu_b * mu_b + c1) * (va + vb + c2));
                ++count;
            }
        }
    }
    return total / count;
}

}  // namespace

TEST_CASE("psnr closed-form cases") {
    Tensor a = Tensor::full({1, 4, 4}, 0.3);
    CHECK(psnr(a, a) == 100.0);  // identical images hit the documented cap
    Tensor zero = Tensor::zeros({1, 4, 4});
    Tensor tenth = Tensor::full({1, 4, 4}, 0.1);
    CHECK(psnr(zero, tenth) == doctest::Approx(20.0).epsilon(1e-9));
    Tensor half = Tensor::full({1, 4, 4}, 0.5);
    CHECK(psnr(zero, half) == doctest::Approx(10.0 * std::log10(4.0)).epsilon(1e-9));
    CHECK(psnr(zero, half) == doctest::Approx(6.0206).epsilon(1e-4));
    CHECK_THROWS_AS(psnr(a, Tensor::zeros({1, 2, 2})), std::invalid_argument);
}

TEST_CASE("psnr is symmetric and decreases with added noise") {
    Rng rng(111);
    Tensor a = rng.normal_tensor({1, 6, 6});
    Tensor b = rng.normal_tensor({1, 6, 6});
    CHECK(psnr(a, b) == doctest::Approx(psnr(b, a)).epsilon(1e-12));
    Tensor base = Tensor::full({1, 8, 8}, 0.5);
    double prev = 1e9;
    for (double amp : {0.01, 0.03, 0.1, 0.3}) {
        Rng noise_rng(5);
        Tensor noisy = base;
        for (std::int64_t i = 0; i < noisy.numel(); ++i) noisy[i] += amp * noise_rng.normal();
        double cur = psnr(base, noisy);
        CHECK(cur < prev);
        prev = cur;
    }
}

TEST_CASE("ssim closed-form and oracle cases") {
    Tensor a = Tensor::full({1, 12, 12}, 0.3);
    CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12));
    Tensor zero = Tensor::zeros({1, 12, 12});
    Tensor one = Tensor::full({1, 12, 12}, 1.0);
    // variance terms vanish; luminance term is C1/(1+C1)
    CHECK(ssim(zero, one) == doctest::Approx(1e-4 / 1.0001).epsilon(1e-9));
    CHECK(std::abs(ssim(zero, one) - 9.999e-5) < 1e-6);

    Rng rng(112);
    Tensor x = rng.normal_tensor({2, 14, 13});
    Tensor y = rng.normal_tensor({2, 14, 13});
    for (std::int64_t i = 0; i < x.numel(); ++i) {
        x[i] = 0.5 + 0.2 * std::tanh(x[i]);
        y[i] = x[i] + 0.1 * std::tanh(y[i]);
    }
    CHECK(ssim(x, y) == doctest::Approx(ssim_reference(x, y)).epsilon(1e-6));
    CHECK(ssim(x, y) == doctest::Approx(ssim(y, x)).epsilon(1e-12));
    CHECK_THROWS_AS(ssim(Tensor({1, 8, 8}), Tensor({1, 8, 8})), std::invalid_argument);
}

TEST_CASE("davies-bouldin hand cases") {
    // two singleton clusters: zero scatter
    CHECK(davies_bouldin({{0.0, 0.0}, {3.0, 4.0}}, {0, 1}) == doctest::Approx(0.0));
    // the worked pair of two-point clusters
    std::vector<std::vector<double>> f{{0, 0}, {0, 2}, {10, 0}, {10, 2}};
    CHECK(davies_bouldin(f, {0, 0, 1, 1}) == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("davies-bouldin matches a direct pairwise oracle") {
    Rng rng(113);
    std::vector<std::vector<double>> features;
    std::vector<int> labels;
    for (int c = 0; c < 3; ++c) {
        for (int i = 0; i < 5; ++i) {
            features.push_back({c * 3.0 + rng.normal() * 0.3, rng.normal() * 0.3});
            labels.push_back(c);
        }
    }
    // direct computation
    double oracle = 0.0;
    {
        std::vector<std::vector<double>> centroid(3, std::vector<double>(2, 0.0));
        std::vector<double> scatter(3, 0.0);
        for (int c = 0; c < 3; ++c) {
            for (int i = 0; i < 5; ++i) {
                centroid[c][0] += features[c * 5 + i][0] / 5.0;
                centroid[c][1] += features[c * 5 + i][1] / 5.0;
            }
            for (int i = 0; i < 5; ++i) {
                scatter[c] += std::hypot(features[c * 5 + i][0] - centroid[c][0],
                                         features[c * 5 + i][1] - centroid[c][1]) /
                              5.0;
            }
        }
        for (int i = 0; i < 3; ++i) {
            double worst = 0.0;
            for (int j = 0; j < 3; ++j) {
                if (i == j) continue;
                double d = std::hypot(centroid[i][0] - centroid[j][0],
                                      centroid[i][1] - centroid[j][1]);
                worst = std::max(worst, (scatter[i] + scatter[j]) / d);
            }
            oracle += worst / 3.0;
        }
    }
    CHECK(davies_bouldin(features, labels) == doctest::Approx(oracle).epsilon(1e-12));

    // invariance under a global translation
    std::vector<std::vector<double>> shifted = features;
    for (auto& v : shifted) {
        v[0] += 42.0;
        v[1] -= 17.0;
    }
    CHECK(davies_bouldin(shifted, labels) ==
          doctest::Approx(davies_bouldin(features, labels)).epsilon(1e-9));
}

TEST_CASE("davies-bouldin rejects degenerate inputs") {
    CHECK_THROWS_AS(davies_bouldin({{1.0}}, {0}), std::invalid_argument);
    CHECK_THROWS_AS(davies_bouldin({{1.0}, {1.0}}, {0, 1}), std::invalid_argument);
    CHECK_THROWS_AS(davies_bouldin({{1.0}, {2.0}}, {0}), std::invalid_argument);
}

TEST_CASE("metric report aggregates match the row means") {
    std::vector<MetricRow> rows{{"a", 10.0, 0.5}, {"b", 20.0, 0.7}, {"c", 12.0, 0.9}};
    MetricReport rep = MetricReport::build(rows);
    CHECK(std::abs(rep.psnr_mean - 14.0) < 1e-9);
    CHECK(std::abs(rep.ssim_mean - 0.7) < 1e-9);
    std::string csv = rep.to_csv();
    CHECK(csv.find("AGGREGATE,") != std::string::npos);
    CHECK(csv.find("id,psnr,ssim") == 0);
}
