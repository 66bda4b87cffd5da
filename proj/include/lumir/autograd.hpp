#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "lumir/tensor.hpp"

namespace lumir::ag {

class Graph;

// Handle to a node on a Graph tape. Cheap to copy; invalid by default so
// optional arguments (e.g. a missing bias) can be expressed as Var{}.
struct Var {
    int id = -1;
    Graph* graph = nullptr;

    bool valid() const { return id >= 0 && graph != nullptr; }
    const Tensor& val() const;
    const std::vector<int>& shape() const;
};

// Reverse-mode tape. Nodes are appended in evaluation order; backward()
// walks the tape in reverse. One Graph per forward pass; values and
// cached intermediates live for the lifetime of the Graph.
class Graph {
public:
    Var leaf(Tensor value, bool requires_grad = false);

    const Tensor& value(const Var& v) const;
    bool requires_grad(const Var& v) const;
    bool has_grad(const Var& v) const;
    const Tensor& grad(const Var& v) const;

    // Seeds d(loss)=1 and propagates. loss must be scalar-shaped (numel 1).
    void backward(const Var& loss);

    size_t size() const { return nodes_.size(); }

    // --- op-implementation interface ---
    Var make_node(Tensor value, bool requires_grad, std::function<void(Graph&)> backward_fn);
    const Tensor& node_value(int id) const { return nodes_[static_cast<size_t>(id)].value; }
    const Tensor& node_grad(int id) const { return nodes_[static_cast<size_t>(id)].grad; }
    bool node_requires_grad(int id) const { return nodes_[static_cast<size_t>(id)].requires_grad; }
    // Lazily allocates a zero gradient buffer for node `id` and returns it.
    Tensor& grad_acc(int id);

private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool requires_grad = false;
        std::function<void(Graph&)> backward_fn;
    };
    std::vector<Node> nodes_;
};

// ---- elementwise and structural ops ----
Var add(Var a, Var b);
Var add_n(const std::vector<Var>& xs);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var sigmoid(Var x);
Var gelu(Var x);

// x: (M,K) or (K); w: (K,N); optional bias b: (N)
Var linear(Var x, Var w, Var b = Var{});
// x: (C,H,W), bias: (C), broadcast over spatial dims
Var add_channel_bias(Var x, Var bias);
// per spatial position normalization over channels; gain/bias: (C)
Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-6);

Var channel_concat(const std::vector<Var>& xs);
Var channel_concat(Var a, Var b);
Var channel_avg_pool(Var x);  // (C,H,W) -> (1,H,W)
Var channel_max_pool(Var x);  // (C,H,W) -> (1,H,W)
Var spatial_mean(Var x);      // (C,H,W) -> (C)
// bank: (N,C,H,W), weights: (N) -> (C,H,W)
Var weighted_component_sum(Var bank, Var weights);

Var bilinear_resize(Var x, int out_h, int out_w);
Var nearest_upsample(Var x, int factor);

Var to_tokens(Var x);                 // (C,H,W) -> (H*W, C)
Var from_tokens(Var t, int h, int w); // (H*W, C) -> (C,H,W)
Var gather_rows(Var t, std::shared_ptr<const std::vector<int>> perm);
// y[k,:] = x[k,:] / sqrt(mean(x[k,:]^2) + eps)
Var rms_norm_rows(Var x, double eps = 1e-8);

// mean absolute deviation; returns shape (1)
Var l1_loss(Var pred, Var target);

// ---- convolution ----
// x: (Cin,H,W), w: (Cout,Cin,k,k), optional b: (Cout)
Var conv2d(Var x, Var w, Var b, int stride, int pad);

// ---- attention ----
// x: token matrix (L,C); weight matrices (C,C); biases (C)
Var multihead_attention(Var x, Var wq, Var bq, Var wk, Var bk, Var wv, Var bv, Var wo, Var bo,
                        int heads);

// ---- gated linear recurrence ----
// h_k = a_k*h_{k-1} + b_k*u_k ; y_k = c_k*h_k ; h_0 = 0. All inputs (L,C).
Var scan_recurrence(Var a, Var b, Var c, Var u);

}  // namespace lumir::ag
