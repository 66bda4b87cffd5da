#include "lumir/train.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "lumir/diffusion.hpp"

namespace lumir {

void TrainConfig::validate() const {
    if (epochs < 1) throw std::invalid_argument("TrainConfig: epochs must be >= 1");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("TrainConfig: learning_rate must be > 0");
    if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
    if (max_steps < 0) throw std::invalid_argument("TrainConfig: max_steps must be >= 0");
    if (grad_clip < 0.0) throw std::invalid_argument("TrainConfig: grad_clip must be >= 0");
}

double train_step(Model& model, const std::vector<const PairedSample*>& batch,
                  const NoiseSchedule& ns, const ScalingSchedule& ss, Rng& rng, AdamState& adam,
                  const TrainConfig& cfg) {
    if (batch.empty()) throw std::invalid_argument("train_step: empty batch");
    ParamStore& params = model.params();
    std::unordered_map<std::string, Tensor> grad_sum;
    grad_sum.reserve(params.names().size());

    double loss_sum = 0.0;
    for (const PairedSample* sample : batch) {
        int t = rng.uniform_int(1, ns.steps);
        Tensor target = downscale_to_level(sample->ground_truth, ss, t);
        Tensor noise = rng.normal_tensor(target.shape());
        Tensor x_t = forward_sample(sample->ground_truth, t, ns, ss, noise);
        Tensor cond_t = downscale_to_level(sample->corrupted, ss, t);

        ag::Graph g;
        LeafMap leaves = model.make_leaves(g, true);
        ag::Var y = model.forward(g, leaves, g.leaf(std::move(x_t)), g.leaf(std::move(cond_t)), t);
        ag::Var loss = ag::l1_loss(y, g.leaf(std::move(target)));
        double loss_value = loss.val()[0];
        if (!std::isfinite(loss_value)) {
            throw std::runtime_error("train_step: non-finite loss " + std::to_string(loss_value) +
                                     " for sample '" + sample->id + "' at t=" + std::to_string(t));
        }
        loss_sum += loss_value;
        g.backward(loss);
        for (const std::string& name : params.names()) {
            const ag::Var& leaf = leaves.at(name);
            if (!g.has_grad(leaf)) continue;
            auto it = grad_sum.find(name);
            if (it == grad_sum.end()) {
                grad_sum.emplace(name, g.grad(leaf));
            } else {
                it->second += g.grad(leaf);
            }
        }
    }

    double inv_batch = 1.0 / static_cast<double>(batch.size());
    if (cfg.grad_clip > 0.0) {
        double sq = 0.0;
        for (auto& [name, grad] : grad_sum) {
            for (std::int64_t i = 0; i < grad.numel(); ++i) {
                double v = grad[i] * inv_batch;
                sq += v * v;
            }
        }
        double norm = std::sqrt(sq);
        if (norm > cfg.grad_clip) inv_batch *= cfg.grad_clip / norm;
    }

    adam.step += 1;
    double bc1 = 1.0 - std::pow(adam.beta1, static_cast<double>(adam.step));
    double bc2 = 1.0 - std::pow(adam.beta2, static_cast<double>(adam.step));
    for (const std::string& name : params.names()) {
        auto it = grad_sum.find(name);
        if (it == grad_sum.end()) continue;
        Tensor& theta = params.get(name);
        auto [mit, inserted] = adam.moments.try_emplace(
            name, std::make_pair(Tensor::zeros(theta.shape()), Tensor::zeros(theta.shape())));
        Tensor& m = mit->second.first;
        Tensor& v = mit->second.second;
        const Tensor& grad = it->second;
        for (std::int64_t i = 0; i < theta.numel(); ++i) {
            double gi = grad[i] * inv_batch;
            m[i] = adam.beta1 * m[i] + (1.0 - adam.beta1) * gi;
            v[i] = adam.beta2 * v[i] + (1.0 - adam.beta2) * gi * gi;
            double mhat = m[i] / bc1;
            double vhat = v[i] / bc2;
            theta[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + adam.eps);
        }
    }
    return loss_sum * (1.0 / static_cast<double>(batch.size()));
}

std::vector<TraceRow> train_loop(Model& model, const std::vector<PairedSample>& dataset,
                                 const TrainConfig& cfg, const NoiseSchedule& ns,
                                 const ScalingSchedule& ss, const TrainLogger& logger) {
    cfg.validate();
    if (dataset.empty()) throw std::invalid_argument("train_loop: dataset is empty");
    Rng rng(cfg.seed);
    AdamState adam;
    std::vector<TraceRow> trace;
    std::vector<const PairedSample*> order;
    order.reserve(dataset.size());
    for (const PairedSample& s : dataset) order.push_back(&s);

    int global_step = 0;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        rng.shuffle(order);
        for (size_t begin = 0; begin < order.size(); begin += static_cast<size_t>(cfg.batch_size)) {
            size_t end = std::min(order.size(), begin + static_cast<size_t>(cfg.batch_size));
            std::vector<const PairedSample*> batch(order.begin() + static_cast<std::ptrdiff_t>(begin),
                                                   order.begin() + static_cast<std::ptrdiff_t>(end));
            double loss = train_step(model, batch, ns, ss, rng, adam, cfg);
            ++global_step;
            TraceRow row{epoch, global_step, loss};
            trace.push_back(row);
            if (logger) logger(row);
            if (cfg.max_steps > 0 && global_step >= cfg.max_steps) return trace;
        }
    }
    return trace;
}

std::string trace_to_csv(const std::vector<TraceRow>& trace) {
    std::ostringstream os;
    os << "epoch,step,loss\n";
    char buf[64];
    for (const TraceRow& row : trace) {
        std::snprintf(buf, sizeof(buf), "%.10g", row.loss);
        os << row.epoch << "," << row.step << "," << buf << "\n";
    }
    return os.str();
}

}  // namespace lumir
