#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "lumir/cli.hpp"
#include "lumir/image_io.hpp"

using namespace lumir;
namespace fs = std::filesystem;

namespace {

std::string tmp_dir(const std::string& name) {
    fs::path p = fs::temp_directory_path() / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p.string();
}

}  // namespace

TEST_CASE("unknown commands and missing paths exit with code 1") {
    CHECK(cli::run({"frobnicate"}) == 1);
    CHECK(cli::run({}) == 1);
    CHECK(cli::run({"train", "--input", "/nonexistent/data", "--output", "/tmp/x"}) == 1);
    CHECK(cli::run({"restore", "--input", "/nonexistent", "--checkpoint", "/none.ckpt",
                    "--output", "/tmp/x"}) == 1);
    CHECK(cli::run({"eval", "--input", "/nonexistent", "--gt", "/nonexistent"}) == 1);
    CHECK(cli::run({"datagen"}) == 1);  // --output missing
}

TEST_CASE("help exits cleanly") { CHECK(cli::run({"--help"}) == 0); }

TEST_CASE("datagen is byte deterministic across runs") {
    std::string a = tmp_dir("lumir_cli_a");
    std::string b = tmp_dir("lumir_cli_b");
    std::vector<std::string> args{"datagen", "--count", "4", "--seed", "7", "--set",
                                  "datagen.width=16", "--set", "datagen.height=16"};
    auto with_out = [&](const std::string& out) {
        std::vector<std::string> full = args;
        full.push_back("--output");
        full.push_back(out);
        return full;
    };
    CHECK(cli::run(with_out(a)) == 0);
    CHECK(cli::run(with_out(b)) == 0);
    for (const char* rel : {"manifest.csv", "gt/gen-0000.png", "input/gen-0003.png"}) {
        auto ba = read_file_bytes((fs::path(a) / rel).string());
        auto bb = read_file_bytes((fs::path(b) / rel).string());
        CHECK(ba == bb);
    }
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST_CASE("eval on identical directories reports the psnr cap and unit ssim") {
    std::string base = tmp_dir("lumir_cli_eval");
    CHECK(cli::run({"datagen", "--count", "2", "--seed", "3", "--output", base, "--set",
                    "datagen.width=16", "--set", "datagen.height=16"}) == 0);
    std::string report_dir = tmp_dir("lumir_cli_eval_out");
    CHECK(cli::run({"eval", "--input", base + "/gt", "--gt", base + "/gt", "--output",
                    report_dir}) == 0);
    std::ifstream csv(fs::path(report_dir) / "metrics.csv");
    REQUIRE(csv.good());
    std::string line, aggregate;
    while (std::getline(csv, line)) {
        if (line.rfind("AGGREGATE,", 0) == 0) aggregate = line;
    }
    CHECK(aggregate == "AGGREGATE,100.000000,1.000000");
    fs::remove_all(base);
    fs::remove_all(report_dir);
}

TEST_CASE("train, restore, diagnose and eval run end to end on a miniature setup") {
    std::string data = tmp_dir("lumir_cli_flow_data");
    std::string run = tmp_dir("lumir_cli_flow_run");
    std::string restored = tmp_dir("lumir_cli_flow_restored");
    CHECK(cli::run({"datagen", "--count", "6", "--seed", "5", "--output", data, "--set",
                    "datagen.width=16", "--set", "datagen.height=16"}) == 0);
    CHECK(cli::run({"train", "--input", data, "--output", run, "--seed", "1", "--epochs", "2",
                    "--set", "model.levels=2", "--set", "model.base_channels=4", "--set",
                    "model.channel_mults=1,2", "--set", "model.heads=1,1", "--set",
                    "model.time_embed_dim=8", "--set", "model.prompt_components=2", "--set",
                    "model.prompt_size=4", "--set", "model.bottleneck_blocks=1", "--set",
                    "schedule.steps=3", "--set", "schedule.scaling_steps=2:2", "--set",
                    "train.holdout=2", "--set", "train.batch_size=2", "--set",
                    "train.report_every=0"}) == 0);
    CHECK(fs::is_regular_file(fs::path(run) / "model.ckpt"));
    CHECK(fs::is_regular_file(fs::path(run) / "loss_trace.csv"));

    CHECK(cli::run({"restore", "--input", data, "--checkpoint", run + "/model.ckpt", "--output",
                    restored, "--seed", "2", "--set", "restore.skip=4"}) == 0);
    int count = 0;
    for (const auto& e : fs::directory_iterator(restored)) {
        CHECK(e.path().extension() == ".png");
        ++count;
    }
    CHECK(count == 2);

    CHECK(cli::run({"eval", "--input", restored, "--gt", data + "/gt"}) == 0);
    std::string diag = tmp_dir("lumir_cli_flow_diag");
    CHECK(cli::run({"cluster-diagnose", "--input", data, "--checkpoint", run + "/model.ckpt",
                    "--output", diag, "--seed", "3"}) == 0);
    std::ifstream dbi(fs::path(diag) / "dbi.csv");
    REQUIRE(dbi.good());
    std::string header;
    std::getline(dbi, header);
    CHECK(header == "block,dbi,count");
    int rows = 0;
    std::string line;
    while (std::getline(dbi, line)) {
        if (!line.empty()) ++rows;
    }
    CHECK(rows == 1);  // levels=2 has a single prompt stage
    for (const std::string& d : {data, run, restored, diag}) fs::remove_all(d);
}
