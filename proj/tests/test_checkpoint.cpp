#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>

#include "lumir/checkpoint.hpp"

using namespace lumir;
namespace fs = std::filesystem;

namespace {

ModelConfig small_config() {
    ModelConfig cfg;
    cfg.levels = 2;
    cfg.base_channels = 4;
    cfg.channel_mults = {1, 2};
    cfg.heads = {1, 1};
    cfg.time_embed_dim = 8;
    cfg.image_channels = 1;
    cfg.prompt_components = 2;
    cfg.prompt_size = 4;
    cfg.bottleneck_blocks = 1;
    return cfg;
}

}  // namespace

TEST_CASE("checkpoint round trip restores parameters bit for bit") {
    fs::path dir = fs::temp_directory_path() / "lumir_ckpt_test";
    fs::create_directories(dir);
    std::string path = (dir / "model.ckpt").string();

    Rng rng(77);
    Model model(small_config(), rng);
    ScheduleSpec sched;
    sched.steps = 6;
    sched.noise.alpha_bar_start = 0.995;
    sched.noise.alpha_bar_end = 0.03;
    sched.scaling = {{3, 2}};
    save_checkpoint(path, model, sched);

    LoadedCheckpoint back = load_checkpoint(path);
    CHECK(back.schedule.steps == 6);
    CHECK(back.schedule.noise.alpha_bar_start == 0.995);
    CHECK(back.schedule.scaling == sched.scaling);
    CHECK(back.model.config().levels == 2);
    CHECK(back.model.config().base_channels == 4);
    REQUIRE(back.model.params().names() == model.params().names());
    for (const std::string& name : model.params().names()) {
        const Tensor& a = model.params().get(name);
        const Tensor& b = back.model.params().get(name);
        REQUIRE(a.same_shape(b));
        CHECK(std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<size_t>(a.numel())) ==
              0);
    }
    fs::remove_all(dir);
}

TEST_CASE("checkpoint loader rejects malformed files") {
    fs::path dir = fs::temp_directory_path() / "lumir_ckpt_bad";
    fs::create_directories(dir);
    std::string path = (dir / "bad.ckpt").string();
    {
        std::ofstream f(path, std::ios::binary);
        f << "not a checkpoint at all";
    }
    CHECK_THROWS_AS(load_checkpoint(path), std::runtime_error);
    CHECK_THROWS_AS(load_checkpoint((dir / "missing.ckpt").string()), std::runtime_error);

    // truncated file: valid header, cut parameter table
    Rng rng(78);
    Model model(small_config(), rng);
    std::string good = (dir / "good.ckpt").string();
    save_checkpoint(good, model, ScheduleSpec{});
    std::ifstream in(good, std::ios::binary);
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    bytes.resize(bytes.size() / 2);
    std::string cut = (dir / "cut.ckpt").string();
    {
        std::ofstream f(cut, std::ios::binary);
        f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
    CHECK_THROWS_AS(load_checkpoint(cut), std::runtime_error);
    fs::remove_all(dir);
}
