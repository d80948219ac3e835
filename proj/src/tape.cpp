#include "docsr/tape.hpp"

namespace docsr {

int Tape::input(Tensor value, bool requires_grad) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

int Tape::emit(Tensor value, bool requires_grad, std::function<void(Tape&)> backward) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    if (requires_grad) n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

Tensor Tape::grad_of(int id) const {
    const Node& n = nodes_[static_cast<size_t>(id)];
    if (n.has_grad) return n.grad;
    return Tensor::zeros(n.value.shape());
}

void Tape::accumulate(int id, const Tensor& g) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (!n.requires_grad) return;
    if (!n.has_grad) {
        n.grad = Tensor::zeros(n.value.shape());
        n.has_grad = true;
    }
    require_same_shape(n.grad, g, "Tape::accumulate");
    double* dst = n.grad.data();
    const double* src = g.data();
    int64_t sz = g.size();
    for (int64_t i = 0; i < sz; ++i) dst[i] += src[i];
}

Tensor* Tape::grad_buffer(int id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (!n.requires_grad) return nullptr;
    if (!n.has_grad) {
        n.grad = Tensor::zeros(n.value.shape());
        n.has_grad = true;
    }
    return &n.grad;
}

void Tape::backward(int root) {
    Node& r = nodes_[static_cast<size_t>(root)];
    if (r.value.size() != 1) throw ContractError("backward root must be scalar");
    if (!r.requires_grad) return;  // nothing differentiable upstream
    r.grad = Tensor::full(r.value.shape(), 1.0);
    r.has_grad = true;
    for (int id = root; id >= 0; --id) {
        Node& n = nodes_[static_cast<size_t>(id)];
        if (n.has_grad && n.backward) n.backward(*this);
    }
}

}  // namespace docsr
