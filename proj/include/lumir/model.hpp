#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "lumir/autograd.hpp"
#include "lumir/config.hpp"
#include "lumir/diffusion.hpp"
#include "lumir/prompt.hpp"
#include "lumir/rng.hpp"
#include "lumir/tensor.hpp"

namespace lumir {

// Structural hyperparameters of the U-shaped restoration network.
struct ModelConfig {
    int levels = 4;
    int base_channels = 16;
    std::vector<int> channel_mults = {1, 2, 2, 4};  // one per level
    std::vector<int> heads = {};                    // per level; empty = width/16, min 1
    int blocks_per_stage = 1;
    int bottleneck_blocks = 2;
    int time_embed_dim = 64;
    int image_channels = 3;
    int prompt_components = 5;  // N
    int prompt_size = 8;        // H_p = W_p of the component bank
    bool use_api = true;
    bool use_gps = true;
    std::string block_kind = "transformer";  // "transformer" | "conv"

    void validate() const;
    int width(int level) const;
    int head_count(int level) const;
    int spatial_divisor() const { return 1 << (levels - 1); }
    bool prompt_active() const { return use_api || use_gps; }

    void to_config(KvConfig& out) const;  // "model.*" keys
    static ModelConfig from_config(const KvConfig& cfg);
};

// Flat, ordered bag of named parameter tensors. Registration order is the
// canonical parameter order of the checkpoint format.
class ParamStore {
public:
    Tensor& add(const std::string& name, Tensor init);
    Tensor& get(const std::string& name);
    const Tensor& get(const std::string& name) const;
    bool has(const std::string& name) const;
    const std::vector<std::string>& names() const { return order_; }
    std::int64_t total_size() const;

private:
    std::vector<std::string> order_;
    std::unordered_map<std::string, Tensor> map_;
};

// Sinusoidal features for an integer timestep (half sin, half cos).
Tensor sinusoidal_embedding(int t, int dim);

using LeafMap = std::unordered_map<std::string, ag::Var>;

// One pre-norm block with additive time-embedding injection after the first
// sub-layer. block_kind "transformer" uses token attention + FFN, "conv"
// uses two 3x3 convolutions. Parameters are looked up as "<prefix>.<name>".
ag::Var transformer_block(ag::Graph& g, const LeafMap& leaves, const std::string& prefix,
                          ag::Var x, ag::Var temb, const ModelConfig& cfg, int level);

class Model {
public:
    Model(ModelConfig cfg, Rng& rng);

    const ModelConfig& config() const { return cfg_; }
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }

    // Inserts every parameter as a graph leaf, in registration order.
    LeafMap make_leaves(ag::Graph& g, bool requires_grad) const;

    // Builds the restoration network on the tape. x_t/cond: (C_img,h,w) with
    // h,w divisible by 2^(levels-1); t >= 0. When prompt_sink is non-null the
    // spatial mean of every prompt module output is appended coarse-to-fine.
    ag::Var forward(ag::Graph& g, const LeafMap& leaves, ag::Var x_t, ag::Var cond, int t,
                    std::vector<std::vector<double>>* prompt_sink = nullptr) const;

    // Convenience single forward pass over plain tensors.
    Tensor predict(const Tensor& x_t, const Tensor& cond, int t,
                   std::vector<std::vector<double>>* prompt_sink = nullptr) const;

    Predictor predictor() const;

    int prompt_block_count() const { return prompt_active_count(); }

private:
    int prompt_active_count() const;
    void register_params(Rng& rng);

    ModelConfig cfg_;
    ParamStore params_;
};

}  // namespace lumir
