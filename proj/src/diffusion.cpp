#include "lumir/diffusion.hpp"

#include <cmath>
#include <stdexcept>

#include "lumir/resize.hpp"

namespace lumir {

namespace {

void require_step(int t, int steps, const char* what) {
    if (t < 1 || t > steps) {
        throw std::invalid_argument(std::string(what) + ": t=" + std::to_string(t) +
                                    " outside [1," + std::to_string(steps) + "]");
    }
}

void require_matching(const NoiseSchedule& ns, const ScalingSchedule& ss) {
    if (ns.steps != ss.steps()) {
        throw std::invalid_argument("schedules disagree on step count: " +
                                    std::to_string(ns.steps) + " vs " +
                                    std::to_string(ss.steps()));
    }
}

}  // namespace

Tensor downscale_to_level(const Tensor& x, const ScalingSchedule& ss, int t) {
    if (t < 0 || t > ss.steps()) throw std::invalid_argument("downscale_to_level: t out of range");
    return block_mean_down(x, ss.factor(t));
}

Tensor forward_sample(const Tensor& x0, int t, const NoiseSchedule& ns, const ScalingSchedule& ss,
                      const Tensor& noise) {
    require_matching(ns, ss);
    require_step(t, ns.steps, "forward_sample");
    Tensor base = downscale_to_level(x0, ss, t);
    if (!noise.same_shape(base)) {
        throw std::invalid_argument("forward_sample: noise shape " + shape_str(noise) +
                                    " does not match level shape " + shape_str(base));
    }
    double ab = ns.alpha_bar(t);
    double signal = std::sqrt(ab);
    double sigma = std::sqrt(1.0 - ab);
    Tensor out = std::move(base);
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = signal * out[i] + sigma * noise[i];
    return out;
}

Tensor forward_sample(const Tensor& x0, int t, const NoiseSchedule& ns, const ScalingSchedule& ss,
                      Rng& rng) {
    require_matching(ns, ss);
    require_step(t, ns.steps, "forward_sample");
    Tensor base = downscale_to_level(x0, ss, t);
    Tensor noise = rng.normal_tensor(base.shape());
    double ab = ns.alpha_bar(t);
    double signal = std::sqrt(ab);
    double sigma = std::sqrt(1.0 - ab);
    for (std::int64_t i = 0; i < base.numel(); ++i) base[i] = signal * base[i] + sigma * noise[i];
    return base;
}

Tensor reverse_step(const Tensor& x_t, int t, const Tensor& y_pred, const NoiseSchedule& ns,
                    const ScalingSchedule& ss, const Tensor& noise) {
    require_matching(ns, ss);
    require_step(t, ns.steps, "reverse_step");
    if (!x_t.same_shape(y_pred)) {
        throw std::invalid_argument("reverse_step: x_t " + shape_str(x_t) + " and y_pred " +
                                    shape_str(y_pred) + " must share the level resolution");
    }
    double a_t = ns.alpha(t);
    double ab_t = ns.alpha_bar(t);
    double ab_prev = ns.alpha_bar(t - 1);
    int r = ss.ratio(t);
    Tensor mean;
    double var;
    if (r == 1) {
        double cy = std::sqrt(ab_prev) * (1.0 - a_t) / (1.0 - ab_t);
        double cx = std::sqrt(a_t) * (1.0 - ab_prev) / (1.0 - ab_t);
        mean = Tensor(x_t.shape());
        for (std::int64_t i = 0; i < mean.numel(); ++i) mean[i] = cy * y_pred[i] + cx * x_t[i];
        var = (1.0 - ab_prev) * (1.0 - a_t) / (1.0 - ab_t);
    } else {
        mean = bilinear_upsample(y_pred, r);
        double c = std::sqrt(ab_prev);
        for (std::int64_t i = 0; i < mean.numel(); ++i) mean[i] *= c;
        var = 1.0 - ab_prev;
    }
    if (!noise.same_shape(mean)) {
        throw std::invalid_argument("reverse_step: noise shape " + shape_str(noise) +
                                    " does not match output shape " + shape_str(mean));
    }
    double sigma = t == 1 ? 0.0 : std::sqrt(var);
    if (sigma != 0.0) {
        for (std::int64_t i = 0; i < mean.numel(); ++i) mean[i] += sigma * noise[i];
    }
    return mean;
}

Tensor reverse_step(const Tensor& x_t, int t, const Tensor& y_pred, const NoiseSchedule& ns,
                    const ScalingSchedule& ss, Rng& rng) {
    require_matching(ns, ss);
    require_step(t, ns.steps, "reverse_step");
    int r = ss.ratio(t);
    std::vector<int> out_shape = x_t.shape();
    if (r != 1) {
        out_shape[1] *= r;
        out_shape[2] *= r;
    }
    Tensor noise = t == 1 ? Tensor::zeros(out_shape) : rng.normal_tensor(out_shape);
    return reverse_step(x_t, t, y_pred, ns, ss, noise);
}

Tensor sample(const Predictor& predictor, const Tensor& cond, const NoiseSchedule& ns,
              const ScalingSchedule& ss, Rng& rng, const SampleObserver& observer) {
    require_matching(ns, ss);
    if (cond.rank() != 3) throw std::invalid_argument("sample: cond must be (C,H,W)");
    int coarsest = ss.factor(ss.steps());
    if (cond.dim(1) % coarsest != 0 || cond.dim(2) % coarsest != 0) {
        throw std::invalid_argument("sample: cond dims " + shape_str(cond) +
                                    " are not divisible by the coarsest factor " +
                                    std::to_string(coarsest));
    }
    int t_max = ns.steps;
    Tensor x = rng.normal_tensor({cond.dim(0), cond.dim(1) / coarsest, cond.dim(2) / coarsest});
    for (int t = t_max; t >= 1; --t) {
        Tensor cond_t = downscale_to_level(cond, ss, t);
        Tensor y = predictor(x, cond_t, t);
        if (!y.same_shape(x)) {
            throw std::invalid_argument("sample: predictor returned shape " + shape_str(y) +
                                        ", expected " + shape_str(x));
        }
        x = reverse_step(x, t, y, ns, ss, rng);
        if (observer) observer(t - 1, x);
    }
    for (std::int64_t i = 0; i < x.numel(); ++i) {
        double v = x[i];
        x[i] = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
    }
    return x;
}

}  // namespace lumir
