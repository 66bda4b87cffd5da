#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lumir/rng.hpp"
#include "lumir/tensor.hpp"

namespace lumir {

enum class DegradationLabel { Overexposed, Underexposed, Lowlight };

std::string label_name(DegradationLabel label);
DegradationLabel label_from_name(const std::string& name);

struct PairedSample {
    Tensor corrupted;
    Tensor ground_truth;
    DegradationLabel label = DegradationLabel::Overexposed;
    std::string id;
};

// Exposure shift of `ev` stops, applied in linear light under a gamma-2.2
// transfer function; output clipped to [0,1].
Tensor apply_exposure_shift(const Tensor& img, double ev);

// out = illum * img^gamma, clipped to [0,1].
Tensor apply_lowlight(const Tensor& img, double gamma, double illum);

// Self-contained source imagery: smooth gradients plus soft shapes, kept
// mostly mid-range so exposure errors stay recoverable.
Tensor procedural_source_image(int height, int width, Rng& rng);

struct DatagenOptions {
    int count = 8;
    std::uint64_t seed = 0;
    std::string mode = "ev_shift";  // "ev_shift" | "lowlight"
    int width = 64;
    int height = 64;
    double ev_min = 1.5, ev_max = 3.5;
    double gamma_min = 2.0, gamma_max = 4.0;
    double illum_min = 0.1, illum_max = 0.5;
    std::string source_dir;  // optional; procedural sources when empty
};

struct ManifestEntry {
    std::string id;
    std::string label;
    std::string mode;
    double ev = 0.0;
    double gamma = 0.0;
    double illum = 0.0;
};

// Writes out_dir/{gt,input}/<id>.png and out_dir/manifest.csv, returning the
// manifest. Deterministic bytes for a fixed seed. ev_shift mode alternates
// over/under so counts stay balanced.
std::vector<ManifestEntry> generate_dataset(const std::string& out_dir,
                                            const DatagenOptions& options);

std::vector<ManifestEntry> read_manifest(const std::string& path);
std::vector<PairedSample> load_dataset(const std::string& dir);

}  // namespace lumir
