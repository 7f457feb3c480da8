#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "core/tensor.hpp"

namespace reca {

// One named parameter tensor with its gradient accumulator and AdamW moments.
struct Param {
    std::string name;
    Shape shape;
    std::vector<double> w;
    std::vector<double> g;   // zeroed by ParamStore::zero_grads, summed by backward()
    std::vector<double> m;   // first moment
    std::vector<double> v;   // second moment
    bool trainable = true;
};

// Ordered by name: iteration order (and therefore every reduction order that
// touches all parameters) is deterministic.
struct ParamStore {
    std::map<std::string, Param> params;

    Param& add_zeros(const std::string& name, Shape shape);
    // gaussian(0, std) initialization from the stream "init/<name>" of `seed`
    Param& add_gaussian(const std::string& name, Shape shape, double std_dev, uint64_t seed);
    Param& at(const std::string& name);
    const Param& at(const std::string& name) const;
    bool has(const std::string& name) const { return params.count(name) != 0; }

    void zero_grads();
    void set_all_trainable(bool t);
    int64_t total_size() const;
};

// Decoupled weight decay Adam.  With a zero gradient the moments stay zero and
// a step shrinks a weight by exactly lr * wd * w.
struct AdamW {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.95;
    double eps = 1e-8;
    double weight_decay = 0.01;
    int64_t t = 0;  // completed steps (for bias correction)

    // updates trainable parameters from their accumulated gradients
    void step(ParamStore& ps);
};

} // namespace reca
