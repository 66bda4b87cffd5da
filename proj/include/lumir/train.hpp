#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "lumir/data_synth.hpp"
#include "lumir/model.hpp"
#include "lumir/schedule.hpp"

namespace lumir {

struct TrainConfig {
    int epochs = 50;
    double learning_rate = 1e-4;
    int batch_size = 4;
    std::uint64_t seed = 0;
    int max_steps = 0;      // 0 = no cap on optimizer updates
    double grad_clip = 0.0; // 0 = off; otherwise global-norm clipping

    void validate() const;
};

// Adaptive-moment state, one (m, v) pair per parameter name.
struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::int64_t step = 0;
    std::unordered_map<std::string, std::pair<Tensor, Tensor>> moments;
};

struct TraceRow {
    int epoch = 0;
    int step = 0;  // global optimizer update index, 1-based
    double loss = 0.0;
};

// One optimizer update over a batch: per sample draws t uniformly, forms
// x_t from the ground truth, predicts, and accumulates the L1 loss against
// the ground truth at the level resolution. Returns the batch loss.
double train_step(Model& model, const std::vector<const PairedSample*>& batch,
                  const NoiseSchedule& ns, const ScalingSchedule& ss, Rng& rng, AdamState& adam,
                  const TrainConfig& cfg);

using TrainLogger = std::function<void(const TraceRow&)>;

// Epoch loop with per-epoch reshuffling. Deterministic for a fixed seed.
std::vector<TraceRow> train_loop(Model& model, const std::vector<PairedSample>& dataset,
                                 const TrainConfig& cfg, const NoiseSchedule& ns,
                                 const ScalingSchedule& ss, const TrainLogger& logger = nullptr);

std::string trace_to_csv(const std::vector<TraceRow>& trace);

}  // namespace lumir
