#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "scenegen/common.hpp"

namespace scenegen {

struct TensorNode;
using NodePtr = std::shared_ptr<TensorNode>;

// One value in the dynamic autodiff graph. Rebuilt every forward pass; value
// is immutable once the node is created (parameters are updated between
// graphs by the optimizer).
struct TensorNode {
    std::vector<int> shape;
    std::vector<real> value;
    std::vector<real> grad;  // allocated only while backward() runs
    bool requires_grad = false;
    bool leaf = true;
    std::vector<NodePtr> inputs;
    // Reads this->grad and accumulates into inputs' grad buffers.
    std::function<void(TensorNode&)> backprop;

    int64_t numel() const {
        int64_t n = 1;
        for (int d : shape) n *= d;
        return n;
    }
};

// Value-semantic handle onto a graph node.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(NodePtr n) : node_(std::move(n)) {}

    static Tensor zeros(std::vector<int> shape);
    static Tensor full(std::vector<int> shape, real v);
    static Tensor from_data(std::vector<int> shape, std::vector<real> data);
    static Tensor scalar(real v);
    // Leaf with requires_grad set; the optimizer and checkpoints work on these.
    static Tensor leaf(std::vector<int> shape, std::vector<real> data, bool requires_grad);

    bool defined() const { return node_ != nullptr; }
    const std::vector<int>& shape() const { return node_->shape; }
    int dim(int i) const { return node_->shape[static_cast<size_t>(i)]; }
    int ndim() const { return static_cast<int>(node_->shape.size()); }
    int64_t numel() const { return node_->numel(); }
    bool requires_grad() const { return node_->requires_grad; }

    const std::vector<real>& data() const { return node_->value; }
    // In-place access for leaves (optimizer updates, checkpoint load).
    std::vector<real>& mutable_data() {
        SG_CHECK(node_->leaf, "mutable_data: only leaf tensors may be mutated");
        return node_->value;
    }

    real item() const {
        SG_CHECK(node_ && node_->numel() == 1, "item: tensor is not scalar");
        return node_->value[0];
    }

    real at(int64_t i) const { return node_->value[static_cast<size_t>(i)]; }
    real at(int r, int c) const {
        return node_->value[static_cast<size_t>(r) * dim(1) + c];
    }

    TensorNode* node() const { return node_.get(); }
    const NodePtr& node_ptr() const { return node_; }

private:
    NodePtr node_;
};

// Thread-local autograd switch. While disabled, ops produce graph-free nodes
// (no inputs, no backprop closures) so long sampling trajectories stay cheap.
bool grad_enabled();
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;

private:
    bool prev_;
};

// Gradients of one backward pass, keyed by leaf node. Leaf handles stay valid
// as long as the parameter tensors live.
class GradMap {
public:
    const std::vector<real>* find(const Tensor& t) const {
        auto it = grads_.find(t.node());
        return it == grads_.end() ? nullptr : &it->second;
    }
    std::vector<real>& slot(const TensorNode* n) { return grads_[n]; }
    // this += s * other, matching slots created as needed. Reduction order is
    // the caller's responsibility (iterate scenes in a fixed order).
    void add_scaled(const GradMap& other, real s);
    void scale(real s);
    bool empty() const { return grads_.empty(); }
    size_t size() const { return grads_.size(); }
    auto begin() const { return grads_.begin(); }
    auto end() const { return grads_.end(); }

private:
    std::unordered_map<const TensorNode*, std::vector<real>> grads_;
};

// Reverse-mode sweep from a scalar loss. Returns dLoss/dLeaf for every
// reachable leaf with requires_grad; interior grad buffers are freed before
// returning. A node feeding several consumers receives the sum of their
// contributions.
GradMap backward(const Tensor& loss);

}  // namespace scenegen
