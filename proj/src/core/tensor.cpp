#include "core/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace reca {

int64_t numel(const Shape& s) {
    int64_t n = 1;
    for (int d : s) n *= d;
    return n;
}

std::string shape_str(const Shape& s) {
    std::string out = "(";
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) out += "x";
        out += std::to_string(s[i]);
    }
    return out + ")";
}

static void need_rank2(const Shape& s, const char* op) {
    if (s.size() != 2) fail(Error::Kind::invalid_arg,
        std::string(op) + ": expected rank-2 tensor, got " + shape_str(s));
}

// ----- matmul kernels ---------------------------------------------------------
// ikj order keeps the inner loop contiguous in both B and C; -O3 vectorizes it.

static void mm_nn(const double* __restrict a, const double* __restrict b,
                  double* __restrict c, int m, int k, int n, bool accumulate) {
    if (!accumulate) std::memset(c, 0, sizeof(double) * (size_t)m * n);
    for (int i = 0; i < m; ++i) {
        const double* ai = a + (size_t)i * k;
        double* ci = c + (size_t)i * n;
        for (int p = 0; p < k; ++p) {
            double aip = ai[p];
            const double* bp = b + (size_t)p * n;
            for (int j = 0; j < n; ++j) ci[j] += aip * bp[j];
        }
    }
}

// c[m,n] (+)= a[m,k] * b[n,k]^T
static void mm_nt(const double* __restrict a, const double* __restrict b,
                  double* __restrict c, int m, int k, int n, bool accumulate) {
    for (int i = 0; i < m; ++i) {
        const double* ai = a + (size_t)i * k;
        double* ci = c + (size_t)i * n;
        for (int j = 0; j < n; ++j) {
            const double* bj = b + (size_t)j * k;
            double acc = 0.0;
            for (int p = 0; p < k; ++p) acc += ai[p] * bj[p];
            ci[j] = accumulate ? ci[j] + acc : acc;
        }
    }
}

// c[m,n] (+)= a[k,m]^T * b[k,n]
static void mm_tn(const double* __restrict a, const double* __restrict b,
                  double* __restrict c, int m, int k, int n, bool accumulate) {
    if (!accumulate) std::memset(c, 0, sizeof(double) * (size_t)m * n);
    for (int p = 0; p < k; ++p) {
        const double* ap = a + (size_t)p * m;
        const double* bp = b + (size_t)p * n;
        for (int i = 0; i < m; ++i) {
            double api = ap[i];
            double* ci = c + (size_t)i * n;
            for (int j = 0; j < n; ++j) ci[j] += api * bp[j];
        }
    }
}

// ----- tape plumbing ----------------------------------------------------------

Tape::Id Tape::check(Id id) const {
    if (id < 0 || (size_t)id >= nodes_.size())
        fail(Error::Kind::invalid_arg, "tape: bad node id " + std::to_string(id));
    return id;
}

Tape::Id Tape::push(Node n) {
    nodes_.push_back(std::move(n));
    return (Id)(nodes_.size() - 1);
}

const double* Tape::vptr(Id id) const {
    const Node& n = nodes_[id];
    return n.ext ? n.ext : n.val.data();
}

const double* Tape::val(Id id) const { return vptr(check(id)); }

std::vector<double> Tape::val_copy(Id id) const {
    check(id);
    const double* p = vptr(id);
    return std::vector<double>(p, p + numel(nodes_[id].shape));
}

double* Tape::ensure_grad(Id id) {
    Node& n = nodes_[id];
    if (n.grad.empty()) n.grad.assign(numel(n.shape), 0.0);
    return n.grad.data();
}

std::vector<double> Tape::grad_of(Id id) const {
    check(id);
    const Node& n = nodes_[id];
    if (!n.grad.empty()) return n.grad;
    return std::vector<double>(numel(n.shape), 0.0);
}

Tape::Id Tape::leaf(const double* data, Shape shape, bool requires_grad, double* grad_sink) {
    if (data == nullptr) fail(Error::Kind::invalid_arg, "leaf: null data");
    Node n;
    n.shape = std::move(shape);
    n.ext = data;
    n.rg = requires_grad;
    n.sink = requires_grad ? grad_sink : nullptr;
    return push(std::move(n));
}

Tape::Id Tape::constant(std::vector<double> v, Shape shape) {
    if ((int64_t)v.size() != numel(shape))
        fail(Error::Kind::invalid_arg,
             "constant: " + std::to_string(v.size()) + " values for shape " + shape_str(shape));
    Node n;
    n.shape = std::move(shape);
    n.val = std::move(v);
    return push(std::move(n));
}

Tape::Id Tape::constant_scalar(double v) { return constant({v}, {1}); }

void Tape::backward(Id loss) {
    check(loss);
    if (ran_backward_) fail(Error::Kind::state, "tape: backward() called twice");
    ran_backward_ = true;
    if (numel(nodes_[loss].shape) != 1)
        fail(Error::Kind::invalid_arg,
             "backward: loss must be scalar, got " + shape_str(nodes_[loss].shape));
    if (!nodes_[loss].rg) return;  // nothing trainable upstream
    ensure_grad(loss)[0] = 1.0;
    for (Id i = loss; i >= 0; --i) {
        Node& n = nodes_[i];
        if (!n.rg || n.grad.empty()) continue;
        if (n.back) n.back(*this);
        if (n.sink) {
            int64_t m = numel(n.shape);
            for (int64_t j = 0; j < m; ++j) n.sink[j] += n.grad[j];
        }
    }
}

// ----- operations -------------------------------------------------------------

Tape::Id Tape::matmul(Id a, Id b) {
    check(a); check(b);
    const Shape& sa = nodes_[a].shape;
    const Shape& sb = nodes_[b].shape;
    need_rank2(sa, "matmul"); need_rank2(sb, "matmul");
    if (sa[1] != sb[0])
        fail(Error::Kind::invalid_arg,
             "matmul: inner dimensions disagree, " + shape_str(sa) + " vs " + shape_str(sb));
    int m = sa[0], k = sa[1], n = sb[1];
    Node out;
    out.shape = {m, n};
    out.val.resize((size_t)m * n);
    mm_nn(vptr(a), vptr(b), out.val.data(), m, k, n, false);
    out.rg = nodes_[a].rg || nodes_[b].rg;
    if (out.rg) {
        Id self = (Id)nodes_.size();
        out.back = [a, b, self, m, k, n](Tape& t) {
            const double* go = t.nodes_[self].grad.data();
            // c = a b:  ga += gc * b^T ;  gb += a^T * gc
            if (t.nodes_[a].rg) mm_nt(go, t.vptr(b), t.ensure_grad(a), m, n, k, true);
            if (t.nodes_[b].rg) mm_tn(t.vptr(a), go, t.ensure_grad(b), k, m, n, true);
        };
    }
    return push(std::move(out));
}

Tape::Id Tape::matmul_nt(Id a, Id b) {
    check(a); check(b);
    const Shape& sa = nodes_[a].shape;
    const Shape& sb = nodes_[b].shape;
    need_rank2(sa, "matmul_nt"); need_rank2(sb, "matmul_nt");
    if (sa[1] != sb[1])
        fail(Error::Kind::invalid_arg,
             "matmul_nt: inner dimensions disagree, " + shape_str(sa) + " vs " + shape_str(sb));
    int m = sa[0], k = sa[1], n = sb[0];
    Node out;
    out.shape = {m, n};
    out.val.resize((size_t)m * n);
    mm_nt(vptr(a), vptr(b), out.val.data(), m, k, n, false);
    out.rg = nodes_[a].rg || nodes_[b].rg;
    if (out.rg) {
        Id self = (Id)nodes_.size();
        out.back = [a, b, self, m, k, n](Tape& t) {
            const double* go = t.nodes_[self].grad.data();
            // c = a b^T:  ga += gc * b ;  gb += gc^T * a
            if (t.nodes_[a].rg) mm_nn(go, t.vptr(b), t.ensure_grad(a), m, n, k, true);
            if (t.nodes_[b].rg) mm_tn(go, t.vptr(a), t.ensure_grad(b), n, m, k, true);
        };
    }
    return push(std::move(out));
}

Tape::Id Tape::add(Id a, Id b) {
    check(a); check(b);
    if (nodes_[a].shape != nodes_[b].shape)
        fail(Error::Kind::invalid_arg, "add: shape mismatch, " + shape_str(nodes_[a].shape) +
                                           " vs " + shape_str(nodes_[b].shape));
    int64_t m = numel(nodes_[a].shape);
    Node out;
    out.shape = nodes_[a].shape;
    out.val.resize(m);
    const double* pa = vptr(a);
    const double* pb = vptr(b);
    for (int64_t i = 0; i < m; ++i) out.val[i] = pa[i] + pb[i];
    out.rg = nodes_[a].rg || nodes_[b].rg;
    if (out.rg) {
        Id self = (Id)nodes_.size();
        out.back = [a, b, self, m](Tape& t) {
            const double* go = t.nodes_[self].grad.data();
            if (t.nodes_[a].rg) {
                double* ga = t.ensure_grad(a);
                for (int64_t i = 0; i < m; ++i) ga[i] += go[i];
            }
            if (t.nodes_[b].rg) {
                double* gb = t.ensure_grad(b);
                for (int64_t i = 0; i < m; ++i) gb[i] += go[i];
            }
        };
    }
    return push(std::move(out));
}

Tape::Id Tape::add_rowvec(Id x, Id b) {
    check(x); check(b);
    const Shape& sx = nodes_[x].shape;
    need_rank2(sx, "add_rowvec");
    if (nodes_[b].shape != Shape{sx[1]})
        fail(Error::Kind::invalid_arg, "add_rowvec: " + shape_str(sx) + " vs " +
                                           shape_str(nodes_[b].shape));
    int m = sx[0], n = sx[1];
    Node out;
    out.shape = sx;
    out.val.resize((size_t)m * n);
    const double* px = vptr(x);
    const double* pb = vptr(b);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out.val[(size_t)i * n + j] = px[(size_t)i * n + j] + pb[j];
    out.rg = nodes_[x].rg || nodes_[b].rg;
    if (out.rg) {
        Id self = (Id)nodes_.size();
        out.back = [x, b, self, m, n](Tape& t) {
            const double* go = t.nodes_[self].grad.data();
            if (t.nodes_[x].rg) {
                double* gx = t.ensure_grad(x);
                for (int64_t i = 0; i < (int64_t)m * n; ++i) gx[i] += go[i];
            }
            if (t.nodes_[b].rg) {
                double* gb = t.ensure_grad(b);
                for (int i = 0; i < m; ++i)
                    for (int j = 0; j < n; ++j) gb[j] += go[(size_t)i * n + j];
            }
        };
    }
    return push(std::move(out));
}

Tape::Id Tape::mul(Id a, Id b) {
    check(a); check(b);
    if (nodes_[a].shape != nodes_[b].shape)
        fail(Error::Kind::invalid_arg, "mul: shape mismatch, " + shape_str(nodes_[a].shape) +
                                           " vs " + shape_str(nodes_[b].shape));
    int64_t m = numel(nodes_[a].shape);
    Node out;
    out.shape = nodes_[a].shape;
    out.val.resize(m);
    const double* pa = vptr(a);
    const double* pb = vptr(b);
    for (int64_t i = 0; i < m; ++i) out.val[i] = pa[i] * pb[i];
    out.rg = nodes_[a].rg || nodes_[b].rg;
    if (out.rg) {
        Id self = (Id)nodes_.size();
        out.back = [a, b, self, m](Tape& t) {
            const double* go = t.nodes_[self].grad.data();
            if (t.nodes_[a].rg) {
                double* ga = t.ensure_grad(a);
                const double* pb2 = t.vptr(b);
                for (int64_t i = 0; i < m; ++i) ga[i] += go[i] * pb2[i];
            }
            if (t.nodes_[b].rg) {
                double* gb = t.ensure_grad(b);
                const double* pa2 = t.vptr(a);
                for (int64_t i = 0; i < m; ++i) gb[i] += go[i] * pa2[i];
            }
        };
    }
    return push(std::move(out));
}

Tape::Id Tape::mul_scalar_node(Id x, Id s) {
    check(x); check(s);
    if (numel(nodes_[s].shape) != 1)
        fail(Error::Kind::invalid_arg, "mul_scalar_node: scale must be scalar, got " +
                                           shape_str(nodes_[s].shape));
    int64_t m = numel(nodes_[x].shape);
    double sv = vptr(s)[0];
    Node out;
    out.shape = nodes_[x].shape;
    out.val.resize(m);
    const double* px = vptr(x);
    for (int64_t i = 0; i < m; ++i) out.val[i] = px[i] * sv;
    out.rg = nodes_[x].rg || nodes_[s].rg;
    if (out.rg) {
        Id self = (Id)nodes_.size();
        out.back = [x, s, self, m, sv](Tape& t) {
            const double* go = t.nodes_[self].grad.data();
            if (t.nodes_[x].rg) {
                double* gx = t.ensure_grad(x);
                for (int64_t i = 0; i < m; ++i) gx[i] += go[i] * sv;
            }
            if (t.nodes_[s].rg) {
                double* gs = t.ensure_grad(s);
                const double* px2 = t.vptr(x);
                double acc = 0.0;
                for (int64_t i = 0; i < m; ++i) acc += go[i] * px2[i];
                gs[0] += acc;
            }
        };
    }
    return push(std::move(out));
}

Tape::Id Tape::scale(Id x, double c) {
    check(x);
    int64_t m = numel(nodes_[x].shape);
    Node out;
    out.shape = nodes_[x].shape;
    out.val.resize(m);
    const double* px = vptr(x);
    for (int64_t i = 0; i < m; ++i) out.val[i] = px[i] * c;
    out.rg = nodes_[x].rg;
    if (out.rg) {
        Id self = (Id)nodes_.size();
        out.back = [x, self, m, c](Tape& t) {
            const double* go = t.nodes_[self].grad.data();
            double* gx = t.ensure_grad(x);
            for (int64_t i = 0; i < m; ++i) gx[i] += go[i] * c;
        };
    }
    return push(std::move(out));
}

Tape::Id Tape::add_const(Id x, const std::vector<double>& c) {
    check(x);
    int64_t m = numel(nodes_[x].shape);
    if ((int64_t)c.size() != m)
        fail(Error::Kind::invalid_arg, "add_const: " + std::to_string(c.size()) +
                                           " values for shape " + shape_str(nodes_[x].shape));
    Node out;
    out.shape = nodes_[x].shape;
    out.val.resize(m);
    const double* px = vptr(x);
    for (int64_t i = 0; i < m; ++i) out.val[i] = px[i] + c[i];
    out.rg = nodes_[x].rg;
    if (out.rg) {
        Id self = (Id)nodes_.size();
        out.back = [x, self, m](Tape& t) {
            const double* go = t.nodes_[self].grad.data();
            double* gx = t.ensure_grad(x);
            for (int64_t i = 0; i < m; ++i) gx[i] += go[i];
        };
    }
    return push(std::move(out));
}

Tape::Id Tape::concat_rows(const std::vector<Id>& xs) {
    if (xs.empty()) fail(Error::Kind::invalid_arg, "concat_rows: empty list");
    int n = -1, rows = 0;
    for (Id x : xs) {
        check(x);
        need_rank2(nodes_[x].shape, "concat_rows");
        if (n < 0) n = nodes_[x].shape[1];
        if (nodes_[x].shape[1] != n)
            fail(Error::Kind::invalid_arg, "concat_rows: column mismatch, " +
                                               shape_str(nodes_[xs[0]].shape) + " vs " +
                                               shape_str(nodes_[x].shape));
        rows += nodes_[x].shape[0];
    }
    Node out;
    out.shape = {rows, n};
    out.val.resize((size_t)rows * n);
    size_t off = 0;
    for (Id x : xs) {
        size_t m = (size_t)numel(nodes_[x].shape);
        std::memcpy(out.val.data() + off, vptr(x), m * sizeof(double));
        off += m;
        out.rg = out.rg || nodes_[x].rg;
    }
    if (out.rg) {
        Id self = (Id)nodes_.size();
        std::vector<Id> parts = xs;
        out.back = [parts, self](Tape& t) {
            const double* go = t.nodes_[self].grad.data();
            size_t off2 = 0;
            for (Id x : parts) {
                size_t m = (size_t)numel(t.nodes_[x].shape);
                if (t.nodes_[x].rg) {
                    double* gx = t.ensure_grad(x);
                    for (size_t i = 0; i < m; ++i) gx[i] += go[off2 + i];
                }
                off2 += m;
            }
        };
    }
    return push(std::move(out));
}

Tape::Id Tape::concat_cols(const std::vector<Id>& xs) {
    if (xs.empty()) fail(Error::Kind::invalid_arg, "concat_cols: empty list");
    int m = -1, cols = 0;
    for (Id x : xs) {
        check(x);
        need_rank2(nodes_[x].shape, "concat_cols");
        if (m < 0) m = nodes_[x].shape[0];
        if (nodes_[x].shape[0] != m)
            fail(Error::Kind::invalid_arg, "concat_cols: row mismatch, " +
                                               shape_str(nodes_[xs[0]].shape) + " vs " +
                                               shape_str(nodes_[x].shape));
        cols += nodes_[x].shape[1];
    }
    Node out;
    out.shape = {m, cols};
    out.val.resize((size_t)m * cols);
    int coff = 0;
    for (Id x : xs) {
        int w = nodes_[x].shape[1];
        const double* px = vptr(x);
        for (int i = 0; i < m; ++i)
            std::memcpy(out.val.data() + (size_t)i * cols + coff, px + (size_t)i * w,
                        (size_t)w * sizeof(double));
        coff += w;
        out.rg = out.rg || nodes_[x].rg;
    }
    if (out.rg) {
        Id self = (Id)nodes_.size();
        std::vector<Id> parts = xs;
        out.back = [parts, self, m, cols](Tape& t) {
            const double* go = t.nodes_[self].grad.data();
            int coff2 = 0;
            for (Id x : parts) {
                int w = t.nodes_[x].shape[1];
                if (t.nodes_[x].rg) {
                    double* gx = t.ensure_grad(x);
                    for (int i = 0; i < m; ++i)
                        for (int j = 0; j < w; ++j)
                            gx[(size_t)i * w + j] += go[(size_t)i * cols + coff2 + j];
                }
                coff2 += w;
            }
        };
    }
    return push(std::move(out));
}

Tape::Id Tape::slice_rows(Id x, int r0, int r1) {
    check(x);
    const Shape& s = nodes_[x].shape;
    need_rank2(s, "slice_rows");
    if (r0 < 0 || r1 > s[0] || r0 >= r1)
        fail(Error::Kind::invalid_arg, "slice_rows: [" + std::to_string(r0) + "," +
                                           std::to_string(r1) + ") out of " + shape_str(s));
    int n = s[1], m = r1 - r0;
    Node out;
    out.shape = {m, n};
    out.val.assign(vptr(x) + (size_t)r0 * n, vptr(x) + (size_t)r1 * n);
    out.rg = nodes_[x].rg;
    if (out.rg) {
        Id self = (Id)nodes_.size();
        out.back = [x, self, r0, m, n](Tape& t) {
            const double* go = t.nodes_[self].grad.data();
            double* gx = t.ensure_grad(x);
            for (int64_t i = 0; i < (int64_t)m * n; ++i) gx[(size_t)r0 * n + i] += go[i];
        };
    }
    return push(std::move(out));
}

Tape::Id Tape::slice_cols(Id x, int c0, int c1) {
    check(x);
    const Shape& s = nodes_[x].shape;
    need_rank2(s, "slice_cols");
    if (c0 < 0 || c1 > s[1] || c0 >= c1)
        fail(Error::Kind::invalid_arg, "slice_cols: [" + std::to_string(c0) + "," +
                                           std::to_string(c1) + ") out of " + shape_str(s));
    int m = s[0], n = s[1], w = c1 - c0;
    Node out;
    out.shape = {m, w};
    out.val.resize((size_t)m * w);
    const double* px = vptr(x);
    for (int i = 0; i < m; ++i)
        std::memcpy(out.val.data() + (size_t)i * w, px + (size_t)i * n + c0,
                    (size_t)w * sizeof(double));
    out.rg = nodes_[x].rg;
    if (out.rg) {
        Id self = (Id)nodes_.size();
        out.back = [x, self, c0, m, n, w](Tape& t) {
            const double* go = t.nodes_[self].grad.data();
            double* gx = t.ensure_grad(x);
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < w; ++j) gx[(size_t)i * n + c0 + j] += go[(size_t)i * w + j];
        };
    }
    return push(std::move(out));
}

Tape::Id Tape::gather_rows(Id x, std::vector<int> idx) {
    check(x);
    const Shape& s = nodes_[x].shape;
    need_rank2(s, "gather_rows");
    for (int i : idx)
        if (i < 0 || i >= s[0])
            fail(Error::Kind::invalid_arg, "gather_rows: index " + std::to_string(i) +
                                               " out of " + shape_str(s));
    int n = s[1], m = (int)idx.size();
    Node out;
    out.shape = {m, n};
    out.val.resize((size_t)m * n);
    const double* px = vptr(x);
    for (int i = 0; i < m; ++i)
        std::memcpy(out.val.data() + (size_t)i * n, px + (size_t)idx[i] * n,
                    (size_t)n * sizeof(double));
    out.rg = nodes_[x].rg;
    if (out.rg) {
        Id self = (Id)nodes_.size();
        out.back = [x, self, idx = std::move(idx), n](Tape& t) {
            const double* go = t.nodes_[self].grad.data();
            double* gx = t.ensure_grad(x);
            for (size_t i = 0; i < idx.size(); ++i)
                for (int j = 0; j < n; ++j) gx[(size_t)idx[i] * n + j] += go[i * n + j];
        };
    }
    return push(std::move(out));
}

Tape::Id Tape::mask_fill(Id x, const std::vector<uint8_t>& mask, double value) {
    check(x);
    int64_t m = numel(nodes_[x].shape);
    if ((int64_t)mask.size() != m)
        fail(Error::Kind::invalid_arg, "mask_fill: mask of " + std::to_string(mask.size()) +
                                           " for shape " + shape_str(nodes_[x].shape));
    Node out;
    out.shape = nodes_[x].shape;
    out.val.resize(m);
    const double* px = vptr(x);
    for (int64_t i = 0; i < m; ++i) out.val[i] = mask[i] ? value : px[i];
    out.rg = nodes_[x].rg;
    if (out.rg) {
        Id self = (Id)nodes_.size();
        out.back = [x, self, mask, m](Tape& t) {
            const double* go = t.nodes_[self].grad.data();
            double* gx = t.ensure_grad(x);
            for (int64_t i = 0; i < m; ++i)
                if (!mask[i]) gx[i] += go[i];
        };
    }
    return push(std::move(out));
}

Tape::Id Tape::softmax_rows(Id x) {
    check(x);
    const Shape& s = nodes_[x].shape;
    need_rank2(s, "softmax_rows");
    int m = s[0], n = s[1];
    Node out;
    out.shape = s;
    out.val.resize((size_t)m * n);
    const double* px = vptr(x);
    for (int i = 0; i < m; ++i) {
        const double* row = px + (size_t)i * n;
        double* orow = out.val.data() + (size_t)i * n;
        double mx = row[0];
        for (int j = 1; j < n; ++j) mx = std::max(mx, row[j]);
        double z = 0.0;
        for (int j = 0; j < n; ++j) {
            orow[j] = std::exp(row[j] - mx);
            z += orow[j];
        }
        double inv = 1.0 / z;
        for (int j = 0; j < n; ++j) orow[j] *= inv;
    }
    out.rg = nodes_[x].rg;
    if (out.rg) {
        Id self = (Id)nodes_.size();
        out.back = [x, self, m, n](Tape& t) {
            const double* go = t.nodes_[self].grad.data();
            const double* y = t.vptr(self);
            double* gx = t.ensure_grad(x);
            for (int i = 0; i < m; ++i) {
                const double* yr = y + (size_t)i * n;
                const double* gr = go + (size_t)i * n;
                double dot = 0.0;
                for (int j = 0; j < n; ++j) dot += gr[j] * yr[j];
                double* gxr = gx + (size_t)i * n;
                for (int j = 0; j < n; ++j) gxr[j] += yr[j] * (gr[j] - dot);
            }
        };
    }
    return push(std::move(out));
}

Tape::Id Tape::layer_norm(Id x, Id gain, Id bias) {
    check(x); check(gain); check(bias);
    const Shape& s = nodes_[x].shape;
    need_rank2(s, "layer_norm");
    int m = s[0], n = s[1];
    if (nodes_[gain].shape != Shape{n} || nodes_[bias].shape != Shape{n})
        fail(Error::Kind::invalid_arg, "layer_norm: gain/bias " + shape_str(nodes_[gain].shape) +
                                           "/" + shape_str(nodes_[bias].shape) + " for " +
                                           shape_str(s));
    const double eps = 1e-5;
    Node out;
    out.shape = s;
    out.val.resize((size_t)m * n);
    const double* px = vptr(x);
    const double* pg = vptr(gain);
    const double* pb = vptr(bias);
    // stash (mean, inv std) per row for the backward pass
    std::vector<double> stats(2 * (size_t)m);
    for (int i = 0; i < m; ++i) {
        const double* row = px + (size_t)i * n;
        double mu = 0.0;
        for (int j = 0; j < n; ++j) mu += row[j];
        mu /= n;
        double var = 0.0;
        for (int j = 0; j < n; ++j) var += (row[j] - mu) * (row[j] - mu);
        var /= n;
        double inv = 1.0 / std::sqrt(var + eps);
        stats[2 * (size_t)i] = mu;
        stats[2 * (size_t)i + 1] = inv;
        double* orow = out.val.data() + (size_t)i * n;
        for (int j = 0; j < n; ++j) orow[j] = (row[j] - mu) * inv * pg[j] + pb[j];
    }
    out.rg = nodes_[x].rg || nodes_[gain].rg || nodes_[bias].rg;
    if (out.rg) {
        Id self = (Id)nodes_.size();
        out.back = [x, gain, bias, self, m, n, stats = std::move(stats)](Tape& t) {
            const double* go = t.nodes_[self].grad.data();
            const double* px2 = t.vptr(x);
            const double* pg2 = t.vptr(gain);
            for (int i = 0; i < m; ++i) {
                double mu = stats[2 * (size_t)i];
                double inv = stats[2 * (size_t)i + 1];
                const double* row = px2 + (size_t)i * n;
                const double* gr = go + (size_t)i * n;
                // xhat = (x - mu) * inv
                if (t.nodes_[gain].rg) {
                    double* gg = t.ensure_grad(gain);
                    for (int j = 0; j < n; ++j) gg[j] += gr[j] * (row[j] - mu) * inv;
                }
                if (t.nodes_[bias].rg) {
                    double* gb = t.ensure_grad(bias);
                    for (int j = 0; j < n; ++j) gb[j] += gr[j];
                }
                if (t.nodes_[x].rg) {
                    double* gx = t.ensure_grad(x) + (size_t)i * n;
                    // dL/dxhat = gr * gain ; standard layernorm backward
                    double sum1 = 0.0, sum2 = 0.0;
                    for (int j = 0; j < n; ++j) {
                        double dxh = gr[j] * pg2[j];
                        sum1 += dxh;
                        sum2 += dxh * (row[j] - mu) * inv;
                    }
                    for (int j = 0; j < n; ++j) {
                        double dxh = gr[j] * pg2[j];
                        double xh = (row[j] - mu) * inv;
                        gx[j] += inv * (dxh - sum1 / n - xh * sum2 / n);
                    }
                }
            }
        };
    }
    return push(std::move(out));
}

Tape::Id Tape::gelu(Id x) {
    check(x);
    int64_t m = numel(nodes_[x].shape);
    Node out;
    out.shape = nodes_[x].shape;
    out.val.resize(m);
    const double* px = vptr(x);
    const double inv_sqrt2 = 0.70710678118654752440;
    for (int64_t i = 0; i < m; ++i)
        out.val[i] = 0.5 * px[i] * (1.0 + std::erf(px[i] * inv_sqrt2));
    out.rg = nodes_[x].rg;
    if (out.rg) {
        Id self = (Id)nodes_.size();
        out.back = [x, self, m, inv_sqrt2](Tape& t) {
            const double* go = t.nodes_[self].grad.data();
            const double* px2 = t.vptr(x);
            double* gx = t.ensure_grad(x);
            const double inv_sqrt2pi = 0.39894228040143267794;
            for (int64_t i = 0; i < m; ++i) {
                double v = px2[i];
                double phi = 0.5 * (1.0 + std::erf(v * inv_sqrt2));
                double pdf = inv_sqrt2pi * std::exp(-0.5 * v * v);
                gx[i] += go[i] * (phi + v * pdf);
            }
        };
    }
    return push(std::move(out));
}

Tape::Id Tape::mean_all(Id x) {
    check(x);
    int64_t m = numel(nodes_[x].shape);
    const double* px = vptr(x);
    double acc = 0.0;
    for (int64_t i = 0; i < m; ++i) acc += px[i];
    Node out;
    out.shape = {1};
    out.val = {acc / (double)m};
    out.rg = nodes_[x].rg;
    if (out.rg) {
        Id self = (Id)nodes_.size();
        out.back = [x, self, m](Tape& t) {
            double g = t.nodes_[self].grad[0] / (double)m;
            double* gx = t.ensure_grad(x);
            for (int64_t i = 0; i < m; ++i) gx[i] += g;
        };
    }
    return push(std::move(out));
}

Tape::Id Tape::cross_entropy(Id logits, std::vector<int> targets) {
    check(logits);
    const Shape& s = nodes_[logits].shape;
    need_rank2(s, "cross_entropy");
    int m = s[0], n = s[1];
    if ((int)targets.size() != m)
        fail(Error::Kind::invalid_arg, "cross_entropy: " + std::to_string(targets.size()) +
                                           " targets for logits " + shape_str(s));
    for (int t : targets)
        if (t < 0 || t >= n)
            fail(Error::Kind::invalid_arg,
                 "cross_entropy: target " + std::to_string(t) + " out of " + shape_str(s));
    // save probabilities for the backward pass
    std::vector<double> probs((size_t)m * n);
    const double* px = vptr(logits);
    double loss = 0.0;
    for (int i = 0; i < m; ++i) {
        const double* row = px + (size_t)i * n;
        double* prow = probs.data() + (size_t)i * n;
        double mx = row[0];
        for (int j = 1; j < n; ++j) mx = std::max(mx, row[j]);
        double z = 0.0;
        for (int j = 0; j < n; ++j) {
            prow[j] = std::exp(row[j] - mx);
            z += prow[j];
        }
        double inv = 1.0 / z;
        for (int j = 0; j < n; ++j) prow[j] *= inv;
        loss -= std::log(prow[targets[i]]);
    }
    Node out;
    out.shape = {1};
    out.val = {loss / m};
    out.rg = nodes_[logits].rg;
    if (out.rg) {
        Id self = (Id)nodes_.size();
        out.back = [logits, self, m, n, probs = std::move(probs),
                    targets = std::move(targets)](Tape& t) {
            double g = t.nodes_[self].grad[0] / (double)m;
            double* gx = t.ensure_grad(logits);
            for (int i = 0; i < m; ++i) {
                const double* prow = probs.data() + (size_t)i * n;
                double* gr = gx + (size_t)i * n;
                for (int j = 0; j < n; ++j) gr[j] += g * prow[j];
                gr[targets[i]] -= g;
            }
        };
    }
    return push(std::move(out));
}

Tape::Id Tape::mse(Id pred, const std::vector<double>& target) {
    check(pred);
    int64_t m = numel(nodes_[pred].shape);
    if ((int64_t)target.size() != m)
        fail(Error::Kind::invalid_arg, "mse: " + std::to_string(target.size()) +
                                           " targets for prediction " +
                                           shape_str(nodes_[pred].shape));
    const double* px = vptr(pred);
    double acc = 0.0;
    for (int64_t i = 0; i < m; ++i) {
        double d = px[i] - target[i];
        acc += d * d;
    }
    Node out;
    out.shape = {1};
    out.val = {acc / (double)m};
    out.rg = nodes_[pred].rg;
    if (out.rg) {
        Id self = (Id)nodes_.size();
        out.back = [pred, self, m, target](Tape& t) {
            double g = t.nodes_[self].grad[0] * 2.0 / (double)m;
            const double* px2 = t.vptr(pred);
            double* gx = t.ensure_grad(pred);
            for (int64_t i = 0; i < m; ++i) gx[i] += g * (px2[i] - target[i]);
        };
    }
    return push(std::move(out));
}

// ----- inference helpers ------------------------------------------------------

void softmax_inplace(std::vector<double>& logits) {
    double mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);
    double z = 0.0;
    for (double& v : logits) {
        v = std::exp(v - mx);
        z += v;
    }
    for (double& v : logits) v /= z;
}

int argmax_lowest(const double* v, int n) {
    int best = 0;
    for (int i = 1; i < n; ++i)
        if (v[i] > v[best]) best = i;
    return best;
}

} // namespace reca
