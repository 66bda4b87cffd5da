#include "lumir/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>

#include "lumir/checkpoint.hpp"
#include "lumir/config.hpp"
#include "lumir/data_synth.hpp"
#include "lumir/diagnostics.hpp"
#include "lumir/diffusion.hpp"
#include "lumir/image_io.hpp"
#include "lumir/metrics.hpp"
#include "lumir/model.hpp"
#include "lumir/train.hpp"

namespace fs = std::filesystem;

namespace lumir::cli {

namespace {

struct Options {
    std::string command;
    std::string config_path;
    std::string input;
    std::string output;
    std::string checkpoint;
    std::string gt;
    std::uint64_t seed = 0;
    int count = 8;
    int epochs = -1;
    std::vector<std::string> overrides;
};

KvConfig assemble_config(const Options& opt) {
    KvConfig cfg;
    if (!opt.config_path.empty()) {
        if (!fs::is_regular_file(opt.config_path)) {
            throw std::invalid_argument("config file not found: " + opt.config_path);
        }
        cfg = KvConfig::parse_file(opt.config_path);
    }
    cfg.apply_overrides(opt.overrides);
    return cfg;
}

void require_dir(const std::string& path, const char* what) {
    if (path.empty() || !fs::is_directory(path)) {
        throw std::invalid_argument(std::string(what) + " directory not found: " +
                                    (path.empty() ? "(unset)" : path));
    }
}

void require_file(const std::string& path, const char* what) {
    if (path.empty() || !fs::is_regular_file(path)) {
        throw std::invalid_argument(std::string(what) + " not found: " +
                                    (path.empty() ? "(unset)" : path));
    }
}

std::vector<fs::path> list_pngs(const fs::path& dir) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.path().extension() == ".png") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    return files;
}

TrainConfig train_config_from(const Options& opt, const KvConfig& cfg) {
    TrainConfig tc;
    tc.epochs = opt.epochs > 0 ? opt.epochs : cfg.get_int("train.epochs", 50);
    tc.learning_rate = cfg.get_double("train.learning_rate", 1e-4);
    tc.batch_size = cfg.get_int("train.batch_size", 4);
    tc.max_steps = cfg.get_int("train.max_steps", 0);
    tc.grad_clip = cfg.get_double("train.grad_clip", 0.0);
    tc.seed = opt.seed;
    tc.validate();
    return tc;
}

int cmd_datagen(const Options& opt, const KvConfig& cfg) {
    if (opt.output.empty()) throw std::invalid_argument("datagen: --output is required");
    DatagenOptions d;
    d.count = opt.count;
    d.seed = opt.seed;
    d.mode = cfg.get_str("datagen.mode", "ev_shift");
    d.width = cfg.get_int("datagen.width", 64);
    d.height = cfg.get_int("datagen.height", 64);
    d.ev_min = cfg.get_double("datagen.ev_min", 1.5);
    d.ev_max = cfg.get_double("datagen.ev_max", 3.5);
    d.gamma_min = cfg.get_double("datagen.gamma_min", 2.0);
    d.gamma_max = cfg.get_double("datagen.gamma_max", 4.0);
    d.illum_min = cfg.get_double("datagen.illum_min", 0.1);
    d.illum_max = cfg.get_double("datagen.illum_max", 0.5);
    d.source_dir = opt.input;
    if (!d.source_dir.empty()) require_dir(d.source_dir, "source");
    auto manifest = generate_dataset(opt.output, d);
    std::cout << "wrote " << manifest.size() << " pairs to " << opt.output << "\n";
    return 0;
}

int cmd_train(const Options& opt, const KvConfig& cfg) {
    require_dir(opt.input, "dataset");
    require_file((fs::path(opt.input) / "manifest.csv").string(), "dataset manifest");
    if (opt.output.empty()) throw std::invalid_argument("train: --output is required");

    ModelConfig mc = ModelConfig::from_config(cfg);
    ScheduleSpec sched = schedule_spec_from_config(cfg);
    auto [ns, ss] = build_schedules(sched.steps, sched.noise, sched.scaling);
    TrainConfig tc = train_config_from(opt, cfg);

    std::vector<PairedSample> dataset = load_dataset(opt.input);
    int holdout = cfg.get_int("train.holdout", 0);
    if (holdout < 0 || holdout >= static_cast<int>(dataset.size())) {
        throw std::invalid_argument("train.holdout must lie in [0, dataset size)");
    }
    if (holdout > 0) dataset.resize(dataset.size() - static_cast<size_t>(holdout));

    Rng init_rng = Rng(tc.seed).child(1);
    Model model(mc, init_rng);
    std::cout << "training on " << dataset.size() << " pairs, "
              << model.params().total_size() << " parameters\n";

    int report_every = cfg.get_int("train.report_every", 25);
    auto trace = train_loop(model, dataset, tc, ns, ss, [&](const TraceRow& row) {
        if (report_every > 0 && row.step % report_every == 0) {
            std::printf("epoch %d step %d loss %.5f\n", row.epoch, row.step, row.loss);
            std::fflush(stdout);
        }
    });

    fs::create_directories(opt.output);
    save_checkpoint((fs::path(opt.output) / "model.ckpt").string(), model, sched);
    std::ofstream trace_file(fs::path(opt.output) / "loss_trace.csv", std::ios::trunc);
    trace_file << trace_to_csv(trace);
    std::cout << "final loss " << (trace.empty() ? 0.0 : trace.back().loss) << ", checkpoint at "
              << (fs::path(opt.output) / "model.ckpt").string() << "\n";
    return 0;
}

int cmd_restore(const Options& opt, const KvConfig& cfg) {
    require_dir(opt.input, "input");
    require_file(opt.checkpoint, "checkpoint");
    if (opt.output.empty()) throw std::invalid_argument("restore: --output is required");

    LoadedCheckpoint ckpt = load_checkpoint(opt.checkpoint);
    auto [ns, ss] = build_schedules(ckpt.schedule.steps, ckpt.schedule.noise,
                                    ckpt.schedule.scaling);

    fs::path in_dir = fs::path(opt.input);
    if (fs::is_directory(in_dir / "input")) in_dir /= "input";
    std::vector<fs::path> files = list_pngs(in_dir);
    if (files.empty()) throw std::invalid_argument("restore: no .png files in " + in_dir.string());
    int skip = cfg.get_int("restore.skip", 0);
    int limit = cfg.get_int("restore.limit", 0);
    if (skip < 0 || skip >= static_cast<int>(files.size())) {
        throw std::invalid_argument("restore.skip out of range");
    }
    files.erase(files.begin(), files.begin() + skip);
    if (limit > 0 && static_cast<int>(files.size()) > limit) files.resize(static_cast<size_t>(limit));

    fs::create_directories(opt.output);
    Rng base(opt.seed);
    Predictor predictor = ckpt.model.predictor();
    int done = 0;
    for (const fs::path& f : files) {
        Tensor cond = read_png(f.string());
        Rng rng = base.child(hash_string(f.filename().string()));
        Tensor restored = sample(predictor, cond, ns, ss, rng);
        write_png((fs::path(opt.output) / f.filename()).string(), restored);
        ++done;
        if (done % 10 == 0 || done == static_cast<int>(files.size())) {
            std::printf("restored %d/%zu\n", done, files.size());
            std::fflush(stdout);
        }
    }
    return 0;
}

int cmd_eval(const Options& opt, const KvConfig& cfg) {
    require_dir(opt.input, "input");
    require_dir(opt.gt, "ground-truth");
    std::vector<fs::path> in_files = list_pngs(opt.input);
    std::set<std::string> gt_names;
    for (const fs::path& f : list_pngs(opt.gt)) gt_names.insert(f.filename().string());
    std::vector<fs::path> paired;
    for (const fs::path& f : in_files) {
        if (gt_names.count(f.filename().string())) paired.push_back(f);
    }
    if (paired.empty()) throw std::invalid_argument("eval: no paired .png files between dirs");
    int skip = cfg.get_int("eval.skip", 0);
    int limit = cfg.get_int("eval.limit", 0);
    if (skip < 0 || skip >= static_cast<int>(paired.size())) {
        throw std::invalid_argument("eval.skip out of range");
    }
    paired.erase(paired.begin(), paired.begin() + skip);
    if (limit > 0 && static_cast<int>(paired.size()) > limit) {
        paired.resize(static_cast<size_t>(limit));
    }

    std::vector<MetricRow> rows;
    for (const fs::path& f : paired) {
        Tensor a = read_png(f.string());
        Tensor b = read_png((fs::path(opt.gt) / f.filename()).string());
        MetricRow row;
        row.id = f.stem().string();
        row.psnr = psnr(a, b);
        row.ssim = ssim(a, b);
        rows.push_back(std::move(row));
    }
    MetricReport report = MetricReport::build(std::move(rows));
    if (!opt.output.empty()) {
        fs::create_directories(opt.output);
        std::ofstream out(fs::path(opt.output) / "metrics.csv", std::ios::trunc);
        out << report.to_csv();
    }
    std::printf("evaluated %zu pairs: PSNR %.4f dB (std %.4f), SSIM %.6f (std %.6f)\n",
                report.rows.size(), report.psnr_mean, report.psnr_std, report.ssim_mean,
                report.ssim_std);
    return 0;
}

int cmd_cluster_diagnose(const Options& opt, const KvConfig& cfg) {
    require_dir(opt.input, "dataset");
    require_file(opt.checkpoint, "checkpoint");
    LoadedCheckpoint ckpt = load_checkpoint(opt.checkpoint);
    auto [ns, ss] = build_schedules(ckpt.schedule.steps, ckpt.schedule.noise,
                                    ckpt.schedule.scaling);
    std::vector<PairedSample> dataset = load_dataset(opt.input);
    int skip = cfg.get_int("diagnose.skip", 0);
    int limit = cfg.get_int("diagnose.limit", 0);
    if (skip < 0 || skip >= static_cast<int>(dataset.size())) {
        throw std::invalid_argument("diagnose.skip out of range");
    }
    dataset.erase(dataset.begin(), dataset.begin() + skip);
    if (limit > 0 && static_cast<int>(dataset.size()) > limit) {
        dataset.resize(static_cast<size_t>(limit));
    }

    PromptFeatureSet features = extract_prompt_features(ckpt.model, dataset, ns, ss, opt.seed);
    std::vector<double> dbi = per_block_dbi(features);
    std::printf("block  dbi\n");
    for (size_t b = 0; b < dbi.size(); ++b) std::printf("%5zu  %.6f\n", b + 1, dbi[b]);
    if (!opt.output.empty()) {
        fs::create_directories(opt.output);
        std::ofstream out(fs::path(opt.output) / "dbi.csv", std::ios::trunc);
        out << dbi_report_csv(dbi, static_cast<int>(dataset.size()));
    }
    return 0;
}

}  // namespace

int run(const std::vector<std::string>& args) {
    CLI::App app{"pyramid-diffusion illumination correction pipeline"};
    app.require_subcommand(1);

    Options opt;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", opt.config_path, "key-value config file");
        sub->add_option("--seed", opt.seed, "random seed");
        sub->add_option("--input", opt.input, "input directory");
        sub->add_option("--output", opt.output, "output directory");
        sub->add_option("--count", opt.count, "number of items to generate");
        sub->add_option("--epochs", opt.epochs, "training epochs");
        sub->add_option("--checkpoint", opt.checkpoint, "model checkpoint path");
        sub->add_option("--set", opt.overrides, "key=value override, repeatable");
    };
    CLI::App* datagen = app.add_subcommand("datagen", "synthesize a paired dataset");
    CLI::App* train = app.add_subcommand("train", "train the restoration model");
    CLI::App* restore = app.add_subcommand("restore", "restore a directory of images");
    CLI::App* eval = app.add_subcommand("eval", "PSNR/SSIM report over paired directories");
    CLI::App* diagnose =
        app.add_subcommand("cluster-diagnose", "per-block prompt feature separation (DBI)");
    for (CLI::App* sub : {datagen, train, restore, eval, diagnose}) add_common(sub);
    eval->add_option("--gt", opt.gt, "ground-truth directory");

    std::vector<const char*> argv;
    argv.push_back("lumir");
    for (const std::string& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    CLI::App* sub = app.get_subcommands().front();
    opt.command = sub->get_name();
    try {
        KvConfig cfg = assemble_config(opt);
        if (opt.command == "datagen") return cmd_datagen(opt, cfg);
        if (opt.command == "train") return cmd_train(opt, cfg);
        if (opt.command == "restore") return cmd_restore(opt, cfg);
        if (opt.command == "eval") return cmd_eval(opt, cfg);
        if (opt.command == "cluster-diagnose") return cmd_cluster_diagnose(opt, cfg);
        std::cerr << "unknown command: " << opt.command << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "runtime failure: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace lumir::cli
