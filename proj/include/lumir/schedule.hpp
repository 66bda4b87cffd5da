#pragma once

#include <utility>
#include <vector>

#include "lumir/config.hpp"

namespace lumir {

// Per-step noise retention factors. alphas[t-1] holds the factor for step
// t in 1..T; alpha_bars holds the running products.
struct NoiseSchedule {
    int steps = 0;
    std::vector<double> alphas;
    std::vector<double> alpha_bars;

    double alpha(int t) const;      // t in [1, steps]
    double alpha_bar(int t) const;  // t in [0, steps]; alpha_bar(0) == 1
};

// Cumulative downscale factor per step; factors[t] = U_t for t in 0..T,
// U_0 = 1, nondecreasing, consecutive ratios integral.
struct ScalingSchedule {
    std::vector<int> factors;

    int steps() const { return static_cast<int>(factors.size()) - 1; }
    int factor(int t) const;  // U_t, t in [0, steps]
    int ratio(int t) const;   // U_t / U_{t-1}, t in [1, steps]
};

// Descriptor for the noise schedule: explicit alphas win when provided,
// otherwise alpha_bar ramps linearly from start to end over T steps.
struct NoiseSpec {
    std::vector<double> explicit_alphas;
    double alpha_bar_start = 0.9999;
    double alpha_bar_end = 0.02;
};

// Resolution-change steps: (t, ratio) means U_t = ratio * U_{t-1}.
using ScalingSpec = std::vector<std::pair<int, int>>;

NoiseSchedule build_noise_schedule(int steps, const NoiseSpec& spec);
ScalingSchedule build_scaling_schedule(int steps, const ScalingSpec& spec);
std::pair<NoiseSchedule, ScalingSchedule> build_schedules(int steps, const NoiseSpec& noise_spec,
                                                          const ScalingSpec& scaling_spec);

void validate_schedule(const NoiseSchedule& ns);
void validate_schedule(const ScalingSchedule& ss);

// Key-value serialization. Keys: steps, alpha_bar_start, alpha_bar_end,
// scaling_steps (comma-separated "t:ratio" entries, may be empty).
void schedule_to_config(const NoiseSpec& noise_spec, int steps, const ScalingSpec& scaling_spec,
                        KvConfig& out);
struct ScheduleSpec {
    int steps = 8;
    NoiseSpec noise;
    ScalingSpec scaling = {{4, 2}};
};
ScheduleSpec schedule_spec_from_config(const KvConfig& cfg);
void schedule_spec_to_config(const ScheduleSpec& spec, KvConfig& out);
ScheduleSpec default_schedule_spec();

}  // namespace lumir
