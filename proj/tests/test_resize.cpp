#include <doctest.h>

#include <stdexcept>

#include "lumir/resize.hpp"
#include "lumir/rng.hpp"

using namespace lumir;

TEST_CASE("block mean pooling") {
    Tensor x = Tensor::from_data({1, 2, 2}, {0, 0, 1, 1});
    Tensor down = block_mean_down(x, 2);
    CHECK(down.shape() == std::vector<int>{1, 1, 1});
    CHECK(down[0] == doctest::Approx(0.5));

    Tensor c = Tensor::full({3, 4, 4}, 0.25);
    Tensor dc = block_mean_down(c, 2);
    for (std::int64_t i = 0; i < dc.numel(); ++i) CHECK(dc[i] == doctest::Approx(0.25));

    CHECK(block_mean_down(c, 1).same_shape(c));
    CHECK_THROWS_AS(block_mean_down(Tensor({1, 3, 4}), 2), std::invalid_argument);
    CHECK_THROWS_AS(block_mean_down(c, 0), std::invalid_argument);
}

TEST_CASE("constants are fixed points of resampling") {
    Tensor c = Tensor::full({2, 4, 6}, 0.7);
    Tensor up = bilinear_upsample(block_mean_down(c, 2), 2);
    REQUIRE(up.same_shape(c));
    for (std::int64_t i = 0; i < up.numel(); ++i) CHECK(up[i] == doctest::Approx(0.7));

    Tensor any = bilinear_resize(c, 5, 11);
    for (std::int64_t i = 0; i < any.numel(); ++i) CHECK(any[i] == doctest::Approx(0.7));

    Tensor nn = nearest_upsample_tensor(c, 3);
    CHECK(nn.shape() == std::vector<int>{2, 12, 18});
    for (std::int64_t i = 0; i < nn.numel(); ++i) CHECK(nn[i] == 0.7);
}

TEST_CASE("bilinear upsample interpolates between samples") {
    Tensor x = Tensor::from_data({1, 1, 2}, {0.0, 1.0});
    Tensor up = bilinear_upsample(x, 2);
    CHECK(up.shape() == std::vector<int>{1, 2, 4});
    CHECK(up.at(0, 0, 0) == doctest::Approx(0.0));
    CHECK(up.at(0, 0, 1) == doctest::Approx(0.25));
    CHECK(up.at(0, 0, 2) == doctest::Approx(0.75));
    CHECK(up.at(0, 0, 3) == doctest::Approx(1.0));
}

TEST_CASE("block mean then upsample halves detail but keeps scale") {
    Rng rng(3);
    Tensor x = rng.normal_tensor({2, 8, 8});
    Tensor round = bilinear_upsample(block_mean_down(x, 2), 2);
    CHECK(round.same_shape(x));
}
