#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lumir/data_synth.hpp"
#include "lumir/model.hpp"
#include "lumir/schedule.hpp"

namespace lumir {

// Spatially pooled prompt-module outputs per image, grouped by block index
// (coarse to fine) and tagged with the degradation label.
struct PromptFeatureSet {
    // per_block[b][i] is the feature vector of image i at prompt block b
    std::vector<std::vector<std::vector<double>>> per_block;
    std::vector<int> labels;  // per image
    std::vector<std::string> ids;
};

// Runs one network forward per image at the final timestep (x_1 built from
// the ground truth, conditioning on the corrupted image) and records every
// prompt module's pooled output.
PromptFeatureSet extract_prompt_features(const Model& model,
                                         const std::vector<PairedSample>& samples,
                                         const NoiseSchedule& ns, const ScalingSchedule& ss,
                                         std::uint64_t seed);

// Davies-Bouldin index per prompt block.
std::vector<double> per_block_dbi(const PromptFeatureSet& features);

// CSV with header "block,dbi,count" and one row per prompt block.
std::string dbi_report_csv(const std::vector<double>& dbi, int image_count);

}  // namespace lumir
