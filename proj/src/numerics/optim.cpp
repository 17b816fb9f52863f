#include "scenegen/numerics/optim.hpp"

#include <cmath>

namespace scenegen {

Tensor ParamStore::add(const std::string& name, Tensor t) {
    SG_CHECK(!index_.count(name), "duplicate parameter name: " + name);
    SG_CHECK(t.node()->leaf, "parameter must be a leaf tensor: " + name);
    index_[name] = items_.size();
    items_.emplace_back(name, t);
    return t;
}

bool ParamStore::has(const std::string& name) const { return index_.count(name) > 0; }

Tensor ParamStore::get(const std::string& name) const {
    auto it = index_.find(name);
    SG_CHECK(it != index_.end(), "unknown parameter: " + name);
    return items_[it->second].second;
}

int64_t ParamStore::total_scalars() const {
    int64_t n = 0;
    for (const auto& [name, t] : items_) n += t.numel();
    return n;
}

void ParamStore::set_trainable(const std::function<bool(const std::string&)>& pred) {
    for (auto& [name, t] : items_) t.node()->requires_grad = pred(name);
}

std::vector<std::string> ParamStore::trainable_names() const {
    std::vector<std::string> out;
    for (const auto& [name, t] : items_)
        if (t.requires_grad()) out.push_back(name);
    return out;
}

void AdamW::step(ParamStore& params, const GradMap& grads) {
    ++t_;
    const real bc1 = real(1) - std::pow(cfg_.beta1, static_cast<real>(t_));
    const real bc2 = real(1) - std::pow(cfg_.beta2, static_cast<real>(t_));
    for (auto& [name, t] : const_cast<std::vector<std::pair<std::string, Tensor>>&>(params.items())) {
        const std::vector<real>* g = grads.find(t);
        if (!g) continue;
        auto& mom = state_[name];
        if (mom.m.empty()) {
            mom.m.assign(g->size(), real(0));
            mom.v.assign(g->size(), real(0));
        }
        SG_CHECK(mom.m.size() == g->size(), "optimizer state size mismatch for " + name);
        auto& w = t.mutable_data();
        for (size_t i = 0; i < w.size(); ++i) {
            const real gi = (*g)[i];
            mom.m[i] = cfg_.beta1 * mom.m[i] + (real(1) - cfg_.beta1) * gi;
            mom.v[i] = cfg_.beta2 * mom.v[i] + (real(1) - cfg_.beta2) * gi * gi;
            const real mhat = mom.m[i] / bc1;
            const real vhat = mom.v[i] / bc2;
            w[i] -= cfg_.lr * (mhat / (std::sqrt(vhat) + cfg_.eps) + cfg_.weight_decay * w[i]);
        }
    }
}

}  // namespace scenegen
