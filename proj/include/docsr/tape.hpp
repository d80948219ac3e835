#pragma once

#include <functional>
#include <vector>

#include "docsr/tensor.hpp"

namespace docsr {

// Reverse-mode autodiff over a dynamically built tape. Nodes are created
// in topological order (every op's parents precede it), so backward() is
// a single reverse sweep. Supervisor parameters enter as constants
// (requires_grad = false) which structurally guarantees no gradient ever
// accumulates into them.
class Tape {
public:
    struct Node {
        Tensor value;
        Tensor grad;      // allocated lazily
        bool requires_grad = false;
        bool has_grad = false;
        std::function<void(Tape&)> backward;  // empty for leaves
    };

    int input(Tensor value, bool requires_grad);
    int constant(Tensor value) { return input(std::move(value), false); }
    int constant_scalar(double v) { return input(Tensor::scalar(v), false); }

    int emit(Tensor value, bool requires_grad, std::function<void(Tape&)> backward);

    const Tensor& val(int id) const { return nodes_[static_cast<size_t>(id)].value; }
    bool needs_grad(int id) const { return nodes_[static_cast<size_t>(id)].requires_grad; }

    // Gradient of the most recent backward() root w.r.t. node id; zeros if
    // the node was not reached.
    Tensor grad_of(int id) const;

    // Adds g into the gradient buffer of id (no-op when the node does not
    // require grad).
    void accumulate(int id, const Tensor& g);
    // Raw access for op kernels that scatter element-by-element; returns
    // nullptr when the node does not require grad.
    Tensor* grad_buffer(int id);

    // Seeds d(root) = 1 and runs the reverse sweep. root must be scalar.
    void backward(int root);

    size_t node_count() const { return nodes_.size(); }

private:
    std::vector<Node> nodes_;
};

}  // namespace docsr
