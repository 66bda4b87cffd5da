#pragma once

#include <functional>

#include "lumir/rng.hpp"
#include "lumir/schedule.hpp"
#include "lumir/tensor.hpp"

namespace lumir {

// x downscaled by the cumulative factor U_t (block mean).
Tensor downscale_to_level(const Tensor& x, const ScalingSchedule& ss, int t);

// x_t = sqrt(abar_t) * (x0 downscaled to level t) + sqrt(1 - abar_t) * noise
Tensor forward_sample(const Tensor& x0, int t, const NoiseSchedule& ns,
                      const ScalingSchedule& ss, const Tensor& noise);
Tensor forward_sample(const Tensor& x0, int t, const NoiseSchedule& ns,
                      const ScalingSchedule& ss, Rng& rng);

// One reverse transition p(x_{t-1} | x_t) given the model's restored-image
// estimate y_pred at the resolution of level t. The noise tensor must match
// the output resolution; the variance vanishes at t = 1.
Tensor reverse_step(const Tensor& x_t, int t, const Tensor& y_pred, const NoiseSchedule& ns,
                    const ScalingSchedule& ss, const Tensor& noise);
Tensor reverse_step(const Tensor& x_t, int t, const Tensor& y_pred, const NoiseSchedule& ns,
                    const ScalingSchedule& ss, Rng& rng);

// Maps (x_t, cond at the same resolution, t) to the restored-image estimate.
using Predictor = std::function<Tensor(const Tensor& x_t, const Tensor& cond, int t)>;
// Observes each produced state: (t_next, x_{t_next}) for t_next = T-1 .. 0.
using SampleObserver = std::function<void(int t_next, const Tensor& x)>;

// Full reverse chain: starts from standard normal noise at the coarsest
// level, conditions the predictor on cond downscaled to each level, and
// clamps the final estimate to [0,1].
Tensor sample(const Predictor& predictor, const Tensor& cond, const NoiseSchedule& ns,
              const ScalingSchedule& ss, Rng& rng, const SampleObserver& observer = nullptr);

}  // namespace lumir
