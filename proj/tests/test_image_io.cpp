#include <doctest.h>

#include <filesystem>
#include <stdexcept>

#include "lumir/image_io.hpp"
#include "lumir/rng.hpp"

using namespace lumir;
namespace fs = std::filesystem;

TEST_CASE("png encode/decode round trip is exact") {
    Rng rng(91);
    const int w = 13, h = 7;
    std::vector<unsigned char> rgb(static_cast<size_t>(w) * h * 3);
    for (auto& v : rgb) v = static_cast<unsigned char>(rng.uniform_int(0, 255));
    auto bytes = encode_png_rgb8(w, h, rgb);
    int rw = 0, rh = 0;
    auto decoded = decode_png_rgb8(bytes, rw, rh);
    CHECK(rw == w);
    CHECK(rh == h);
    CHECK(decoded == rgb);
}

TEST_CASE("png encoding is byte deterministic") {
    std::vector<unsigned char> rgb(48, 128);
    rgb[5] = 7;
    CHECK(encode_png_rgb8(4, 4, rgb) == encode_png_rgb8(4, 4, rgb));
}

TEST_CASE("tensor png round trip quantizes to 8 bits") {
    fs::path dir = fs::temp_directory_path() / "lumir_png_test";
    fs::create_directories(dir);
    Rng rng(92);
    Tensor img({3, 6, 5});
    for (std::int64_t i = 0; i < img.numel(); ++i) img[i] = rng.uniform();
    std::string path = (dir / "t.png").string();
    write_png(path, img);
    Tensor back = read_png(path);
    REQUIRE(back.same_shape(img));
    for (std::int64_t i = 0; i < img.numel(); ++i) {
        CHECK(std::abs(back[i] - img[i]) <= 0.5 / 255.0 + 1e-12);
    }
    // single-channel tensors are replicated to gray RGB
    Tensor gray = Tensor::full({1, 6, 5}, 0.25);
    write_png(path, gray);
    Tensor gback = read_png(path);
    CHECK(gback.dim(0) == 3);
    CHECK(gback.at(0, 0, 0) == gback.at(2, 0, 0));
    fs::remove_all(dir);
}

TEST_CASE("png decoder rejects garbage") {
    int w = 0, h = 0;
    CHECK_THROWS_AS(decode_png_rgb8({1, 2, 3, 4}, w, h), std::runtime_error);
    CHECK_THROWS_AS(read_png("/nonexistent/file.png"), std::runtime_error);
    CHECK_THROWS_AS(write_png("/nonexistent/dir/file.png", Tensor::full({3, 4, 4}, 0.5)),
                    std::runtime_error);
    CHECK_THROWS_AS(write_png("x.png", Tensor::full({2, 4, 4}, 0.5)), std::invalid_argument);
}
