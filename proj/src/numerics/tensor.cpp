#include "scenegen/numerics/tensor.hpp"

#include <algorithm>

namespace scenegen {

namespace {
thread_local bool g_grad_enabled = true;

int64_t shape_numel(const std::vector<int>& shape) {
    int64_t n = 1;
    for (int d : shape) {
        SG_CHECK_SHAPE(d >= 0, "negative dimension");
        n *= d;
    }
    return n;
}
}  // namespace

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

Tensor Tensor::zeros(std::vector<int> shape) {
    auto n = std::make_shared<TensorNode>();
    n->shape = std::move(shape);
    n->value.assign(static_cast<size_t>(shape_numel(n->shape)), real(0));
    return Tensor(n);
}

Tensor Tensor::full(std::vector<int> shape, real v) {
    auto n = std::make_shared<TensorNode>();
    n->shape = std::move(shape);
    n->value.assign(static_cast<size_t>(shape_numel(n->shape)), v);
    return Tensor(n);
}

Tensor Tensor::from_data(std::vector<int> shape, std::vector<real> data) {
    auto n = std::make_shared<TensorNode>();
    n->shape = std::move(shape);
    SG_CHECK_SHAPE(static_cast<int64_t>(data.size()) == shape_numel(n->shape),
                   "from_data: size does not match shape");
    n->value = std::move(data);
    return Tensor(n);
}

Tensor Tensor::scalar(real v) { return from_data({1}, {v}); }

Tensor Tensor::leaf(std::vector<int> shape, std::vector<real> data, bool requires_grad) {
    Tensor t = from_data(std::move(shape), std::move(data));
    t.node()->requires_grad = requires_grad;
    return t;
}

void GradMap::add_scaled(const GradMap& other, real s) {
    for (const auto& [node, g] : other.grads_) {
        auto& dst = grads_[node];
        if (dst.empty()) dst.assign(g.size(), real(0));
        for (size_t i = 0; i < g.size(); ++i) dst[i] += s * g[i];
    }
}

void GradMap::scale(real s) {
    for (auto& [node, g] : grads_)
        for (auto& v : g) v *= s;
}

GradMap backward(const Tensor& loss) {
    SG_CHECK(loss.defined() && loss.numel() == 1, "backward: loss must be a scalar tensor");
    SG_CHECK(loss.node()->requires_grad, "backward: loss does not require grad");

    // Iterative topological order over the requires_grad subgraph.
    std::vector<TensorNode*> order;
    std::unordered_map<TensorNode*, int> state;  // 0 unseen, 1 open, 2 done
    std::vector<TensorNode*> stack{loss.node()};
    while (!stack.empty()) {
        TensorNode* n = stack.back();
        int& st = state[n];
        if (st == 0) {
            st = 1;
            for (const auto& in : n->inputs)
                if (in->requires_grad && state[in.get()] == 0) stack.push_back(in.get());
        } else {
            stack.pop_back();
            if (st == 1) {
                st = 2;
                order.push_back(n);
            }
        }
    }

    for (TensorNode* n : order) n->grad.assign(n->value.size(), real(0));
    loss.node()->grad[0] = real(1);

    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        TensorNode* n = *it;
        if (n->backprop) n->backprop(*n);
    }

    GradMap out;
    for (TensorNode* n : order) {
        if (n->leaf && n->requires_grad) out.slot(n) = n->grad;
        n->grad.clear();
        n->grad.shrink_to_fit();
    }
    return out;
}

}  // namespace scenegen
