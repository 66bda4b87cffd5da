#include "lumir/data_synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "lumir/image_io.hpp"

namespace fs = std::filesystem;

namespace lumir {

namespace {

constexpr double kGamma = 2.2;

double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

std::string format_value(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream is(line);
    while (std::getline(is, item, ',')) out.push_back(item);
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

}  // namespace

std::string label_name(DegradationLabel label) {
    switch (label) {
        case DegradationLabel::Overexposed: return "overexposed";
        case DegradationLabel::Underexposed: return "underexposed";
        case DegradationLabel::Lowlight: return "lowlight";
    }
    throw std::logic_error("label_name: bad label");
}

DegradationLabel label_from_name(const std::string& name) {
    if (name == "overexposed") return DegradationLabel::Overexposed;
    if (name == "underexposed") return DegradationLabel::Underexposed;
    if (name == "lowlight") return DegradationLabel::Lowlight;
    throw std::invalid_argument("unknown degradation label: " + name);
}

Tensor apply_exposure_shift(const Tensor& img, double ev) {
    Tensor out(img.shape());
    double gain = std::pow(2.0, ev);
    for (std::int64_t i = 0; i < img.numel(); ++i) {
        double linear = std::pow(clamp01(img[i]), kGamma);
        out[i] = std::pow(clamp01(linear * gain), 1.0 / kGamma);
    }
    return out;
}

Tensor apply_lowlight(const Tensor& img, double gamma, double illum) {
    if (!(gamma > 0.0)) throw std::invalid_argument("apply_lowlight: gamma must be > 0");
    if (!(illum > 0.0 && illum <= 1.0)) {
        throw std::invalid_argument("apply_lowlight: illum must lie in (0,1]");
    }
    Tensor out(img.shape());
    for (std::int64_t i = 0; i < img.numel(); ++i) {
        out[i] = clamp01(illum * std::pow(clamp01(img[i]), gamma));
    }
    return out;
}

Tensor procedural_source_image(int height, int width, Rng& rng) {
    if (height < 4 || width < 4) throw std::invalid_argument("procedural image: size too small");
    // smooth bilinear base
    double c00 = rng.uniform(0.3, 0.7), c01 = rng.uniform(0.3, 0.7);
    double c10 = rng.uniform(0.3, 0.7), c11 = rng.uniform(0.3, 0.7);
    Tensor lum({1, height, width});
    for (int y = 0; y < height; ++y) {
        double fy = height > 1 ? static_cast<double>(y) / (height - 1) : 0.0;
        for (int x = 0; x < width; ++x) {
            double fx = width > 1 ? static_cast<double>(x) / (width - 1) : 0.0;
            double top = c00 + (c01 - c00) * fx;
            double bot = c10 + (c11 - c10) * fx;
            lum.at(0, y, x) = top + (bot - top) * fy;
        }
    }
    // soft-edged ellipses
    int shapes = rng.uniform_int(3, 5);
    for (int s = 0; s < shapes; ++s) {
        double cx = rng.uniform(0.15, 0.85) * width;
        double cy = rng.uniform(0.15, 0.85) * height;
        double rx = rng.uniform(0.10, 0.35) * width;
        double ry = rng.uniform(0.10, 0.35) * height;
        double amp = rng.uniform(0.18, 0.35) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
        for (int y = 0; y < height; ++y) {
            for (int x = 0; x < width; ++x) {
                double dx = (x - cx) / rx, dy = (y - cy) / ry;
                double r = std::sqrt(dx * dx + dy * dy);
                if (r < 1.0) {
                    double edge = r > 0.85 ? (1.0 - r) / 0.15 : 1.0;  // narrow rim
                    lum.at(0, y, x) += amp * edge;
                }
            }
        }
    }
    // oriented texture at two frequencies so local structure carries signal
    for (double amp : {0.07, 0.05}) {
        double fxw = rng.uniform(2.0, 7.0), fyw = rng.uniform(2.0, 7.0);
        double phase = rng.uniform(0.0, 2.0 * M_PI);
        for (int y = 0; y < height; ++y) {
            for (int x = 0; x < width; ++x) {
                lum.at(0, y, x) += amp * std::sin(2.0 * M_PI * (fxw * x / width +
                                                                fyw * y / height) +
                                                  phase);
            }
        }
    }
    // channel tints
    double tint[3] = {rng.uniform(-0.06, 0.06), rng.uniform(-0.06, 0.06),
                      rng.uniform(-0.06, 0.06)};
    Tensor img({3, height, width});
    for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < height; ++y) {
            for (int x = 0; x < width; ++x) {
                double v = lum.at(0, y, x) + tint[c];
                img.at(c, y, x) = std::min(0.97, std::max(0.03, v));
            }
        }
    }
    return img;
}

std::vector<ManifestEntry> generate_dataset(const std::string& out_dir,
                                            const DatagenOptions& options) {
    if (options.count < 1) throw std::invalid_argument("generate_dataset: count must be >= 1");
    if (options.mode != "ev_shift" && options.mode != "lowlight") {
        throw std::invalid_argument("generate_dataset: mode must be ev_shift or lowlight");
    }
    fs::create_directories(fs::path(out_dir) / "gt");
    fs::create_directories(fs::path(out_dir) / "input");

    std::vector<std::string> sources;
    if (!options.source_dir.empty()) {
        if (!fs::is_directory(options.source_dir)) {
            throw std::runtime_error("generate_dataset: source directory not readable: " +
                                     options.source_dir);
        }
        for (const auto& entry : fs::directory_iterator(options.source_dir)) {
            if (entry.path().extension() == ".png") sources.push_back(entry.path().string());
        }
        std::sort(sources.begin(), sources.end());
        if (sources.empty()) {
            throw std::runtime_error("generate_dataset: no .png sources in " + options.source_dir);
        }
    }

    Rng base(options.seed);
    std::vector<ManifestEntry> manifest;
    manifest.reserve(static_cast<size_t>(options.count));
    for (int i = 0; i < options.count; ++i) {
        Rng rng = base.child(static_cast<std::uint64_t>(i));
        char idbuf[32];
        std::snprintf(idbuf, sizeof(idbuf), "gen-%04d", i);
        ManifestEntry e;
        e.id = idbuf;
        e.mode = options.mode;

        Tensor gt = sources.empty()
                        ? procedural_source_image(options.height, options.width, rng)
                        : read_png(sources[static_cast<size_t>(i) % sources.size()]);
        Tensor corrupted;
        if (options.mode == "ev_shift") {
            bool over = i % 2 == 0;  // alternate for exact balance
            double mag = rng.uniform(options.ev_min, options.ev_max);
            e.ev = over ? mag : -mag;
            e.label = over ? "overexposed" : "underexposed";
            corrupted = apply_exposure_shift(gt, e.ev);
        } else {
            e.gamma = rng.uniform(options.gamma_min, options.gamma_max);
            e.illum = rng.uniform(options.illum_min, options.illum_max);
            e.label = "lowlight";
            corrupted = apply_lowlight(gt, e.gamma, e.illum);
        }
        write_png((fs::path(out_dir) / "gt" / (e.id + ".png")).string(), gt);
        write_png((fs::path(out_dir) / "input" / (e.id + ".png")).string(), corrupted);
        manifest.push_back(std::move(e));
    }

    std::ostringstream os;
    os << "id,label,mode,ev,gamma,illum\n";
    for (const ManifestEntry& e : manifest) {
        os << e.id << "," << e.label << "," << e.mode << ",";
        os << (e.mode == "ev_shift" ? format_value(e.ev) : "") << ",";
        os << (e.mode == "lowlight" ? format_value(e.gamma) : "") << ",";
        os << (e.mode == "lowlight" ? format_value(e.illum) : "") << "\n";
    }
    // single final write keeps partially generated runs distinguishable
    fs::path tmp = fs::path(out_dir) / "manifest.csv.tmp";
    {
        std::ofstream f(tmp, std::ios::trunc);
        if (!f) throw std::runtime_error("generate_dataset: cannot write manifest");
        f << os.str();
    }
    fs::rename(tmp, fs::path(out_dir) / "manifest.csv");
    return manifest;
}

std::vector<ManifestEntry> read_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open manifest: " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty manifest: " + path);
    std::vector<ManifestEntry> entries;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto cols = split_csv_line(line);
        if (cols.size() != 6) {
            throw std::runtime_error("manifest row with " + std::to_string(cols.size()) +
                                     " columns: " + line);
        }
        ManifestEntry e;
        e.id = cols[0];
        e.label = cols[1];
        e.mode = cols[2];
        if (!cols[3].empty()) e.ev = std::stod(cols[3]);
        if (!cols[4].empty()) e.gamma = std::stod(cols[4]);
        if (!cols[5].empty()) e.illum = std::stod(cols[5]);
        entries.push_back(std::move(e));
    }
    return entries;
}

std::vector<PairedSample> load_dataset(const std::string& dir) {
    auto entries = read_manifest((fs::path(dir) / "manifest.csv").string());
    std::vector<PairedSample> samples;
    samples.reserve(entries.size());
    for (const ManifestEntry& e : entries) {
        PairedSample s;
        s.id = e.id;
        s.label = label_from_name(e.label);
        s.ground_truth = read_png((fs::path(dir) / "gt" / (e.id + ".png")).string());
        s.corrupted = read_png((fs::path(dir) / "input" / (e.id + ".png")).string());
        if (!s.ground_truth.same_shape(s.corrupted)) {
            throw std::runtime_error("dataset pair shape mismatch for id " + e.id);
        }
        samples.push_back(std::move(s));
    }
    return samples;
}

}  // namespace lumir
