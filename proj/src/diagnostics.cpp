#include "lumir/diagnostics.hpp"

#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "lumir/diffusion.hpp"
#include "lumir/metrics.hpp"

namespace lumir {

PromptFeatureSet extract_prompt_features(const Model& model,
                                         const std::vector<PairedSample>& samples,
                                         const NoiseSchedule& ns, const ScalingSchedule& ss,
                                         std::uint64_t seed) {
    if (samples.empty()) throw std::invalid_argument("extract_prompt_features: no samples");
    int blocks = model.prompt_block_count();
    if (blocks == 0) {
        throw std::invalid_argument("extract_prompt_features: model has no prompt modules");
    }
    PromptFeatureSet set;
    set.per_block.resize(static_cast<size_t>(blocks));
    (void)seed;  // the diagnostic forward is fully deterministic
    for (const PairedSample& s : samples) {
        // one forward at the final denoising step with the noise term zeroed,
        // so identical pixels always map to identical features; the
        // conditioning input carries the degradation signature
        Tensor x1 = forward_sample(s.ground_truth, 1, ns, ss,
                                   Tensor::zeros(downscale_to_level(s.ground_truth, ss, 1).shape()));
        Tensor cond1 = downscale_to_level(s.corrupted, ss, 1);
        std::vector<std::vector<double>> pooled;
        model.predict(x1, cond1, 1, &pooled);
        if (static_cast<int>(pooled.size()) != blocks) {
            throw std::logic_error("extract_prompt_features: unexpected prompt block count");
        }
        for (int b = 0; b < blocks; ++b) {
            set.per_block[static_cast<size_t>(b)].push_back(std::move(pooled[static_cast<size_t>(b)]));
        }
        set.labels.push_back(static_cast<int>(s.label));
        set.ids.push_back(s.id);
    }
    return set;
}

std::vector<double> per_block_dbi(const PromptFeatureSet& features) {
    std::vector<double> out;
    out.reserve(features.per_block.size());
    for (const auto& block_features : features.per_block) {
        out.push_back(davies_bouldin(block_features, features.labels));
    }
    return out;
}

std::string dbi_report_csv(const std::vector<double>& dbi, int image_count) {
    std::ostringstream os;
    os << "block,dbi,count\n";
    char buf[64];
    for (size_t b = 0; b < dbi.size(); ++b) {
        std::snprintf(buf, sizeof(buf), "%zu,%.6f,%d", b + 1, dbi[b], image_count);
        os << buf << "\n";
    }
    return os.str();
}

}  // namespace lumir
