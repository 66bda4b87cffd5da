#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "lumir/autograd.hpp"
#include "lumir/rng.hpp"
#include "lumir/tensor.hpp"

namespace lumir::testutil {

// Builds a scalar loss from graph leaves; inputs[i] becomes leaf i.
using LossBuilder = std::function<ag::Var(ag::Graph&, const std::vector<ag::Var>&)>;

struct GradCheckResult {
    double max_rel_err = 0.0;
    std::int64_t checked = 0;
};

inline double rel_err(double a, double n) {
    double scale = std::max(std::abs(a), std::abs(n));
    if (scale < 1e-9) return 0.0;  // both effectively zero
    return std::abs(a - n) / scale;
}

// Central finite differences against the tape gradients, element by element.
// `stride` subsamples large tensors deterministically (1 = every element).
inline GradCheckResult check_gradients(const std::vector<Tensor>& inputs,
                                       const LossBuilder& build, double fd_step = 1e-5,
                                       int stride = 1) {
    GradCheckResult result;
    // analytic pass
    ag::Graph g;
    std::vector<ag::Var> leaves;
    leaves.reserve(inputs.size());
    for (const Tensor& t : inputs) leaves.push_back(g.leaf(t, true));
    ag::Var loss = build(g, leaves);
    g.backward(loss);
    std::vector<Tensor> analytic;
    for (const ag::Var& v : leaves) {
        analytic.push_back(g.has_grad(v) ? g.grad(v) : Tensor::zeros(v.val().shape()));
    }

    auto eval_loss = [&](const std::vector<Tensor>& perturbed) {
        ag::Graph gg;
        std::vector<ag::Var> ls;
        ls.reserve(perturbed.size());
        for (const Tensor& t : perturbed) ls.push_back(gg.leaf(t, false));
        return build(gg, ls).val()[0];
    };

    std::vector<Tensor> work = inputs;
    for (size_t i = 0; i < inputs.size(); ++i) {
        for (std::int64_t j = 0; j < inputs[i].numel(); j += stride) {
            double saved = work[i][j];
            work[i][j] = saved + fd_step;
            double lp = eval_loss(work);
            work[i][j] = saved - fd_step;
            double lm = eval_loss(work);
            work[i][j] = saved;
            double numeric = (lp - lm) / (2.0 * fd_step);
            result.max_rel_err = std::max(result.max_rel_err, rel_err(analytic[i][j], numeric));
            ++result.checked;
        }
    }
    return result;
}

inline Tensor random_tensor(std::vector<int> shape, Rng& rng, double scale = 1.0) {
    Tensor t = rng.normal_tensor(std::move(shape));
    t *= scale;
    return t;
}

}  // namespace lumir::testutil
