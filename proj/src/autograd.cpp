#include "lumir/autograd.hpp"

#include <stdexcept>

namespace lumir::ag {

const Tensor& Var::val() const {
    if (!valid()) throw std::logic_error("access to invalid Var");
    return graph->value(*this);
}

const std::vector<int>& Var::shape() const { return val().shape(); }

Var Graph::leaf(Tensor value, bool requires_grad) {
    nodes_.push_back(Node{std::move(value), Tensor{}, requires_grad, nullptr});
    return Var{static_cast<int>(nodes_.size()) - 1, this};
}

const Tensor& Graph::value(const Var& v) const {
    return nodes_[static_cast<size_t>(v.id)].value;
}

bool Graph::requires_grad(const Var& v) const {
    return nodes_[static_cast<size_t>(v.id)].requires_grad;
}

bool Graph::has_grad(const Var& v) const {
    return !nodes_[static_cast<size_t>(v.id)].grad.empty();
}

const Tensor& Graph::grad(const Var& v) const {
    const Node& n = nodes_[static_cast<size_t>(v.id)];
    if (n.grad.empty()) throw std::logic_error("no gradient recorded for this node");
    return n.grad;
}

Var Graph::make_node(Tensor value, bool requires_grad, std::function<void(Graph&)> backward_fn) {
    nodes_.push_back(Node{std::move(value), Tensor{}, requires_grad,
                          requires_grad ? std::move(backward_fn) : nullptr});
    return Var{static_cast<int>(nodes_.size()) - 1, this};
}

Tensor& Graph::grad_acc(int id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (n.grad.empty()) n.grad = Tensor::zeros(n.value.shape());
    return n.grad;
}

void Graph::backward(const Var& loss) {
    if (!loss.valid() || loss.graph != this) throw std::logic_error("backward: foreign Var");
    if (value(loss).numel() != 1) throw std::invalid_argument("backward: loss must be scalar");
    grad_acc(loss.id)[0] = 1.0;
    for (int id = loss.id; id >= 0; --id) {
        Node& n = nodes_[static_cast<size_t>(id)];
        if (!n.requires_grad || n.grad.empty() || !n.backward_fn) continue;
        n.backward_fn(*this);
    }
}

}  // namespace lumir::ag
