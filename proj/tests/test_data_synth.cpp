#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <stdexcept>
#include <fstream>

#include "lumir/data_synth.hpp"
#include "lumir/image_io.hpp"

using namespace lumir;
namespace fs = std::filesystem;

TEST_CASE("exposure shift follows the gamma 2.2 linear-light model") {
    Tensor v = Tensor::full({1, 1, 1}, 0.4);
    // ev = 0 is the identity
    CHECK(apply_exposure_shift(v, 0.0)[0] == doctest::Approx(0.4).epsilon(1e-12));
    // one stop up on an encoded 0.4: linearize, double, re-encode
    double expect = std::pow(2.0 * std::pow(0.4, 2.2), 1.0 / 2.2);
    Tensor up = apply_exposure_shift(v, 1.0);
    CHECK(up[0] == doctest::Approx(expect).epsilon(1e-12));
    CHECK(up[0] == doctest::Approx(0.549).epsilon(2e-3));  // hand arithmetic
    // +4 stops saturates
    CHECK(apply_exposure_shift(Tensor::full({1, 1, 1}, 0.6), 4.0)[0] == 1.0);
}

TEST_CASE("exposure shift round trips where no clipping occurred") {
    Rng rng(101);
    Tensor img({3, 8, 8});
    for (std::int64_t i = 0; i < img.numel(); ++i) {
        img[i] = rng.uniform(0.05, 0.35);  // headroom for +1.5 stops in linear light
    }
    Tensor round = apply_exposure_shift(apply_exposure_shift(img, 1.5), -1.5);
    for (std::int64_t i = 0; i < img.numel(); ++i) {
        CHECK(std::abs(round[i] - img[i]) < 1e-4);
    }
}

TEST_CASE("lowlight corruption is multiplicative gamma compression") {
    Tensor half = Tensor::full({1, 1, 1}, 0.5);
    CHECK(apply_lowlight(half, 1.0, 1.0)[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(apply_lowlight(half, 2.0, 1.0)[0] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(apply_lowlight(half, 2.0, 0.5)[0] == doctest::Approx(0.125).epsilon(1e-12));
    CHECK_THROWS_AS(apply_lowlight(half, 0.0, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(apply_lowlight(half, 2.0, 0.0), std::invalid_argument);
}

TEST_CASE("lowlight preserves pointwise ordering and the unit range") {
    Rng rng(102);
    Tensor a({1, 4, 4}), b({1, 4, 4});
    for (std::int64_t i = 0; i < a.numel(); ++i) {
        a[i] = rng.uniform();
        b[i] = std::min(1.0, a[i] + rng.uniform(0.0, 0.3));
    }
    Tensor la = apply_lowlight(a, 2.7, 0.3);
    Tensor lb = apply_lowlight(b, 2.7, 0.3);
    for (std::int64_t i = 0; i < a.numel(); ++i) {
        CHECK(la[i] <= lb[i] + 1e-15);
        CHECK(la[i] >= 0.0);
        CHECK(la[i] <= 1.0);
    }
}

TEST_CASE("generated datasets are balanced, labeled and deterministic") {
    fs::path dir = fs::temp_directory_path() / "lumir_datagen_test";
    fs::remove_all(dir);
    DatagenOptions opt;
    opt.count = 4;
    opt.seed = 7;
    opt.width = 16;
    opt.height = 16;
    auto manifest = generate_dataset((dir / "a").string(), opt);
    REQUIRE(manifest.size() == 4);
    int over = 0, under = 0;
    for (const auto& e : manifest) {
        if (e.label == "overexposed") ++over;
        if (e.label == "underexposed") ++under;
        CHECK(std::abs(e.ev) >= 1.5);
        CHECK(std::abs(e.ev) <= 3.5);
    }
    CHECK(over == 2);
    CHECK(under == 2);

    auto manifest2 = generate_dataset((dir / "b").string(), opt);
    for (const auto& e : manifest) {
        auto bytes_a = read_file_bytes((dir / "a" / "input" / (e.id + ".png")).string());
        auto bytes_b = read_file_bytes((dir / "b" / "input" / (e.id + ".png")).string());
        CHECK(bytes_a == bytes_b);
    }
    auto csv_a = read_file_bytes((dir / "a" / "manifest.csv").string());
    auto csv_b = read_file_bytes((dir / "b" / "manifest.csv").string());
    CHECK(csv_a == csv_b);

    // corrupted differs from ground truth (the ev range excludes identity)
    auto samples = load_dataset((dir / "a").string());
    REQUIRE(samples.size() == 4);
    for (const auto& s : samples) {
        double diff = 0.0;
        for (std::int64_t i = 0; i < s.corrupted.numel(); ++i) {
            diff += std::abs(s.corrupted[i] - s.ground_truth[i]);
        }
        CHECK(diff / static_cast<double>(s.corrupted.numel()) > 0.01);
        CHECK(s.corrupted.min_value() >= 0.0);
        CHECK(s.corrupted.max_value() <= 1.0);
    }
    fs::remove_all(dir);
}

TEST_CASE("lowlight mode labels every sample lowlight") {
    fs::path dir = fs::temp_directory_path() / "lumir_datagen_ll";
    fs::remove_all(dir);
    DatagenOptions opt;
    opt.count = 3;
    opt.seed = 9;
    opt.mode = "lowlight";
    opt.width = 16;
    opt.height = 16;
    auto manifest = generate_dataset(dir.string(), opt);
    for (const auto& e : manifest) {
        CHECK(e.label == "lowlight");
        CHECK(e.gamma >= 2.0);
        CHECK(e.gamma <= 4.0);
        CHECK(e.illum >= 0.1);
        CHECK(e.illum <= 0.5);
    }
    auto samples = load_dataset(dir.string());
    CHECK(samples[0].label == DegradationLabel::Lowlight);
    fs::remove_all(dir);
}

TEST_CASE("datagen validates its inputs") {
    DatagenOptions opt;
    opt.count = 0;
    CHECK_THROWS_AS(generate_dataset("/tmp/lumir_never", opt), std::invalid_argument);
    opt.count = 1;
    opt.mode = "unknown";
    CHECK_THROWS_AS(generate_dataset("/tmp/lumir_never", opt), std::invalid_argument);
    opt.mode = "ev_shift";
    opt.source_dir = "/nonexistent/sources";
    CHECK_THROWS_AS(generate_dataset("/tmp/lumir_never", opt), std::runtime_error);
}
