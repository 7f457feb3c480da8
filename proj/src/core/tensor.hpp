#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "core/error.hpp"

namespace reca {

// Shapes are small (rank <= 3 in practice).  All data is row-major f64.
using Shape = std::vector<int>;

int64_t numel(const Shape& s);
std::string shape_str(const Shape& s);

// ----- reverse-mode tape ------------------------------------------------------
//
// A Tape records one forward computation over f64 tensors and can replay it
// backwards once.  Values are materialized per node (copy-on-slice, no stride
// tricks).  Leaves may point at external storage (parameters) and may carry an
// external gradient sink that backward() accumulates into, so a fresh tape per
// sample adds gradients straight into the parameter store.
//
// Node ids are indices into the tape; ops only consume earlier ids, so
// creation order is a topological order and backward() is a reverse sweep.
class Tape {
public:
    using Id = int32_t;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // leaf over external storage; if grad_sink != nullptr and requires_grad,
    // backward() accumulates d(loss)/d(leaf) into it (+=, caller zeroes it)
    Id leaf(const double* data, Shape shape, bool requires_grad, double* grad_sink = nullptr);
    // leaf owning a copy of the given values, no gradient
    Id constant(std::vector<double> v, Shape shape);
    Id constant_scalar(double v);

    // ----- differentiable operations  (shapes checked, errors name both) -----
    Id matmul(Id a, Id b);                        // [m,k]x[k,n] -> [m,n]
    Id matmul_nt(Id a, Id b);                     // [m,k]x[n,k] -> [m,n]  (a * b^T)
    Id add(Id a, Id b);                           // same shape
    Id add_rowvec(Id x, Id b);                    // [m,n] + [n] per row
    Id mul(Id a, Id b);                           // elementwise, same shape
    Id mul_scalar_node(Id x, Id s);               // x * s, s has shape [1]
    Id scale(Id x, double c);
    Id add_const(Id x, const std::vector<double>& c);  // x + fixed tensor (e.g. attention mask)
    Id concat_rows(const std::vector<Id>& xs);    // all [*,n]
    Id concat_cols(const std::vector<Id>& xs);    // all [m,*]
    Id slice_rows(Id x, int r0, int r1);          // rows [r0,r1)
    Id slice_cols(Id x, int c0, int c1);          // cols [c0,c1)
    Id gather_rows(Id x, std::vector<int> idx);   // rows picked by index (dup ok)
    Id mask_fill(Id x, const std::vector<uint8_t>& mask, double value);  // sentinel at mask=1
    Id softmax_rows(Id x);                        // last axis, max-subtracted
    Id layer_norm(Id x, Id gain, Id bias);        // per row over last axis, eps 1e-5
    Id gelu(Id x);                                // exact erf form
    Id mean_all(Id x);                            // -> [1]
    Id cross_entropy(Id logits, std::vector<int> targets);     // mean -log softmax[target] -> [1]
    Id mse(Id pred, const std::vector<double>& target);        // mean squared error -> [1]

    // ----- execution ----------------------------------------------------------
    void backward(Id loss);  // loss must be scalar; may be called once per tape

    const Shape& shape_of(Id id) const { return nodes_[check(id)].shape; }
    const double* val(Id id) const;
    std::vector<double> val_copy(Id id) const;
    std::vector<double> grad_of(Id id) const;    // zeroes if grad never reached it
    bool requires_grad(Id id) const { return nodes_[check(id)].rg; }
    size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Shape shape;
        std::vector<double> val;        // empty when ext != nullptr
        const double* ext = nullptr;
        std::vector<double> grad;       // lazily allocated
        double* sink = nullptr;
        bool rg = false;
        std::function<void(Tape&)> back;  // accumulates into parents' grads
    };

    std::vector<Node> nodes_;
    bool ran_backward_ = false;

    Id check(Id id) const;
    Id push(Node n);
    double* ensure_grad(Id id);
    const double* vptr(Id id) const;
    friend struct TapeTestPeek;
};

// ----- small inference-side helpers (no tape) ---------------------------------

// softmax in place with temperature; temperature 0 is the caller's greedy path
void softmax_inplace(std::vector<double>& logits);
// lowest index wins ties
int argmax_lowest(const double* v, int n);

} // namespace reca
