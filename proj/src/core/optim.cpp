#include "core/optim.hpp"

#include <cmath>

#include "core/rng.hpp"

namespace reca {

Param& ParamStore::add_zeros(const std::string& name, Shape shape) {
    if (params.count(name))
        fail(Error::Kind::invalid_arg, "param '" + name + "' already exists");
    Param p;
    p.name = name;
    p.shape = std::move(shape);
    int64_t n = numel(p.shape);
    p.w.assign(n, 0.0);
    p.g.assign(n, 0.0);
    p.m.assign(n, 0.0);
    p.v.assign(n, 0.0);
    return params.emplace(name, std::move(p)).first->second;
}

Param& ParamStore::add_gaussian(const std::string& name, Shape shape, double std_dev,
                                uint64_t seed) {
    Param& p = add_zeros(name, std::move(shape));
    Rng rng = rng_stream(seed, "init/" + name);
    for (double& w : p.w) w = rng.gauss() * std_dev;
    return p;
}

Param& ParamStore::at(const std::string& name) {
    auto it = params.find(name);
    if (it == params.end()) fail(Error::Kind::invalid_arg, "no param named '" + name + "'");
    return it->second;
}

const Param& ParamStore::at(const std::string& name) const {
    auto it = params.find(name);
    if (it == params.end()) fail(Error::Kind::invalid_arg, "no param named '" + name + "'");
    return it->second;
}

void ParamStore::zero_grads() {
    for (auto& [_, p] : params) std::fill(p.g.begin(), p.g.end(), 0.0);
}

void ParamStore::set_all_trainable(bool t) {
    for (auto& [_, p] : params) p.trainable = t;
}

int64_t ParamStore::total_size() const {
    int64_t n = 0;
    for (const auto& [_, p] : params) n += numel(p.shape);
    return n;
}

void AdamW::step(ParamStore& ps) {
    ++t;
    double bc1 = 1.0 - std::pow(beta1, (double)t);
    double bc2 = 1.0 - std::pow(beta2, (double)t);
    for (auto& [_, p] : ps.params) {
        if (!p.trainable) continue;
        for (size_t i = 0; i < p.w.size(); ++i) {
            double g = p.g[i];
            p.m[i] = beta1 * p.m[i] + (1.0 - beta1) * g;
            p.v[i] = beta2 * p.v[i] + (1.0 - beta2) * g * g;
            double mhat = p.m[i] / bc1;
            double vhat = p.v[i] / bc2;
            p.w[i] -= lr * (mhat / (std::sqrt(vhat) + eps) + weight_decay * p.w[i]);
        }
    }
}

} // namespace reca
