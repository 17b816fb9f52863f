#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "scenegen/numerics/tensor.hpp"

namespace scenegen {

// Ordered registry of named leaf parameters. Registration order is the
// canonical serialization order for checkpoints.
class ParamStore {
 public:
    // Registers a leaf tensor under `name` and returns it. Throws on duplicates.
    Tensor add(const std::string& name, Tensor t);

    bool has(const std::string& name) const;
    Tensor get(const std::string& name) const;

    const std::vector<std::pair<std::string, Tensor>>& items() const { return items_; }
    size_t size() const { return items_.size(); }
    int64_t total_scalars() const;

    // Flips requires_grad per parameter; pred receives the parameter name.
    void set_trainable(const std::function<bool(const std::string&)>& pred);
    std::vector<std::string> trainable_names() const;

 private:
    std::vector<std::pair<std::string, Tensor>> items_;
    std::map<std::string, size_t> index_;
};

struct AdamWConfig {
    real lr = real(5e-5);
    real beta1 = real(0.9);
    real beta2 = real(0.999);
    real eps = real(1e-8);
    real weight_decay = real(0.01);
};

// Decoupled weight decay Adam. Parameters without a gradient entry are left
// untouched (no decay, no moment update), so frozen weights stay bit-identical.
class AdamW {
 public:
    struct Moments {
        std::vector<real> m;
        std::vector<real> v;
    };

    explicit AdamW(AdamWConfig cfg = {}) : cfg_(cfg) {}

    void step(ParamStore& params, const GradMap& grads);

    const AdamWConfig& config() const { return cfg_; }
    void set_lr(real lr) { cfg_.lr = lr; }

    int64_t step_count() const { return t_; }
    void set_step_count(int64_t t) { t_ = t; }
    std::map<std::string, Moments>& state() { return state_; }
    const std::map<std::string, Moments>& state() const { return state_; }

 private:
    AdamWConfig cfg_;
    int64_t t_ = 0;
    std::map<std::string, Moments> state_;
};

}  // namespace scenegen
