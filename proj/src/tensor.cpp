#include "snowflake/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

#include "snowflake/kernels.hpp"

namespace snowflake::nd {

namespace {

thread_local bool t_grad_enabled = true;

std::size_t numel_of(const Shape& shape) {
    if (shape.empty()) throw ShapeError("tensor: empty shape");
    std::size_t n = 1;
    for (std::size_t d : shape) {
        if (d == 0) throw ShapeError("tensor: zero dimension in shape " + shape_str(shape));
        n *= d;
    }
    return n;
}

void check_defined(const Tensor& t, const char* op) {
    if (!t.defined()) throw ContractError(std::string(op) + ": undefined tensor");
}

// outer x len x inner decomposition around one axis
struct AxisSplit {
    std::size_t outer, len, inner;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis) {
    if (axis >= shape.size())
        throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " + shape_str(shape));
    AxisSplit s{1, shape[axis], 1};
    for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
    for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
    return s;
}

Shape drop_axis(const Shape& shape, std::size_t axis) {
    if (shape.size() == 1) return Shape{1};
    Shape out = shape;
    out.erase(out.begin() + static_cast<std::ptrdiff_t>(axis));
    return out;
}

enum class Broadcast { None, RowA, RowB };  // RowA: a is 1xC against b NxC

Broadcast binary_mode(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() == b.shape()) return Broadcast::None;
    if (a.rank() == 2 && b.rank() == 2 && a.dim(1) == b.dim(1)) {
        if (a.dim(0) == 1) return Broadcast::RowA;
        if (b.dim(0) == 1) return Broadcast::RowB;
    }
    throw ShapeError(std::string(op) + ": shapes " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()) + " are not elementwise/row-broadcast compatible");
}

// column sums of an NxC buffer added into a 1xC accumulator
void add_col_sums(const std::vector<double>& g, std::size_t rows, std::size_t cols,
                  std::vector<double>& acc) {
    for (std::size_t i = 0; i < rows; ++i)
        kernels::active().add(acc.data(), g.data() + i * cols, acc.data(), cols);
}

std::vector<double> transposed_2d(std::span<const double> src, std::size_t rows, std::size_t cols) {
    std::vector<double> out(src.size());
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) out[j * rows + i] = src[i * cols + j];
    return out;
}

}  // namespace

std::string shape_str(const Shape& s) {
    std::string out = "(";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + ")";
}

bool grad_enabled() { return t_grad_enabled; }

NoGrad::NoGrad() : prev_(t_grad_enabled) { t_grad_enabled = false; }
NoGrad::~NoGrad() { t_grad_enabled = prev_; }

Tensor make_leaf(Shape shape, std::vector<double> data, bool requires_grad) {
    const std::size_t n = numel_of(shape);
    if (n != data.size())
        throw ShapeError("tensor: shape " + shape_str(shape) + " wants " + std::to_string(n) +
                         " values, got " + std::to_string(data.size()));
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->data = std::move(data);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor make_op(Shape shape, std::vector<double> data, std::vector<Tensor> parents, BackwardFn fn) {
    Tensor out = make_leaf(std::move(shape), std::move(data), false);
    if (t_grad_enabled) {
        bool any = false;
        for (const Tensor& p : parents) any = any || p.requires_grad();
        if (any) {
            out.n_->requires_grad = true;
            out.n_->parents = std::move(parents);
            out.n_->backward = std::move(fn);
        }
    }
    return out;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    std::vector<double> d(numel_of(shape), 0.0);
    return make_leaf(std::move(shape), std::move(d), requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    std::vector<double> d(numel_of(shape), value);
    return make_leaf(std::move(shape), std::move(d), requires_grad);
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
    return make_leaf(std::move(shape), std::move(data), requires_grad);
}

Tensor Tensor::identity(std::size_t n) {
    std::vector<double> d(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) d[i * n + i] = 1.0;
    return make_leaf({n, n}, std::move(d), false);
}

Tensor Tensor::randn(Shape shape, Rng& rng, double stddev, bool requires_grad) {
    std::vector<double> d(numel_of(shape));
    for (double& v : d) v = rng.normal() * stddev;
    return make_leaf(std::move(shape), std::move(d), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return make_leaf({1}, {value}, requires_grad);
}

std::span<const double> Tensor::grad() const {
    if (n_->grad.empty())
        throw ContractError("tensor: gradient requested but never populated");
    return n_->grad;
}

void Tensor::zero_grad() {
    std::fill(n_->grad.begin(), n_->grad.end(), 0.0);
}

double Tensor::value() const {
    if (numel() != 1) throw ContractError("tensor: value() on non-scalar shape " + shape_str(shape()));
    return n_->data[0];
}

double Tensor::at(std::size_t i) const {
    if (i >= numel()) throw IndexError("tensor: flat index " + std::to_string(i) + " out of range");
    return n_->data[i];
}

double Tensor::at(std::size_t i, std::size_t j) const {
    if (rank() != 2) throw ContractError("tensor: at(i,j) on rank-" + std::to_string(rank()) + " tensor");
    if (i >= dim(0) || j >= dim(1))
        throw IndexError("tensor: index (" + std::to_string(i) + "," + std::to_string(j) +
                         ") out of range for " + shape_str(shape()));
    return n_->data[i * dim(1) + j];
}

// ---- matmul ---------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    check_defined(a, "matmul");
    check_defined(b, "matmul");
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
        throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    std::vector<double> out(m * n, 0.0);
    kernels::active().matmul(a.data().data(), b.data().data(), out.data(), m, k, n);

    return make_op({m, n}, std::move(out), {a, b},
                   [a, b, m, k, n](const std::vector<double>& g, const ParentGrads& pg) {
                       if (pg[0]) {
                           // dA += G * B^T
                           auto bt = transposed_2d(b.data(), k, n);
                           kernels::active().matmul(g.data(), bt.data(), pg[0]->data(), m, n, k);
                       }
                       if (pg[1]) {
                           // dB += A^T * G
                           auto at = transposed_2d(a.data(), m, k);
                           kernels::active().matmul(at.data(), g.data(), pg[1]->data(), k, m, n);
                       }
                   });
}

// ---- binary elementwise ----------------------------------------------------

namespace {

template <typename Fwd>
Tensor binary_op(const Tensor& a, const Tensor& b, const char* name, Fwd fwd, BackwardFn bwd) {
    check_defined(a, name);
    check_defined(b, name);
    const Broadcast mode = binary_mode(a, b, name);
    const Tensor& big = (mode == Broadcast::RowA) ? b : a;
    std::vector<double> out(big.numel());
    fwd(mode, out);
    return make_op(big.shape(), std::move(out), {a, b}, std::move(bwd));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, "add",
        [&](Broadcast mode, std::vector<double>& out) {
            const auto& K = kernels::active();
            if (mode == Broadcast::None) {
                K.add(a.data().data(), b.data().data(), out.data(), out.size());
            } else {
                const Tensor& row = (mode == Broadcast::RowA) ? a : b;
                const Tensor& mat = (mode == Broadcast::RowA) ? b : a;
                const std::size_t c = mat.dim(1);
                for (std::size_t i = 0; i < mat.dim(0); ++i)
                    K.add(mat.data().data() + i * c, row.data().data(), out.data() + i * c, c);
            }
        },
        [a, b](const std::vector<double>& g, const ParentGrads& pg) {
            auto side = [&](std::size_t idx, const Tensor& t) {
                if (!pg[idx]) return;
                if (t.numel() == g.size()) {
                    kernels::active().add(pg[idx]->data(), g.data(), pg[idx]->data(), g.size());
                } else {
                    add_col_sums(g, g.size() / t.dim(1), t.dim(1), *pg[idx]);
                }
            };
            side(0, a);
            side(1, b);
        });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, "sub",
        [&](Broadcast mode, std::vector<double>& out) {
            const auto& K = kernels::active();
            if (mode == Broadcast::None) {
                K.sub(a.data().data(), b.data().data(), out.data(), out.size());
            } else if (mode == Broadcast::RowB) {
                const std::size_t c = a.dim(1);
                for (std::size_t i = 0; i < a.dim(0); ++i)
                    K.sub(a.data().data() + i * c, b.data().data(), out.data() + i * c, c);
            } else {  // 1xC minus NxC
                const std::size_t c = b.dim(1);
                for (std::size_t i = 0; i < b.dim(0); ++i)
                    K.sub(a.data().data(), b.data().data() + i * c, out.data() + i * c, c);
            }
        },
        [a, b](const std::vector<double>& g, const ParentGrads& pg) {
            if (pg[0]) {
                if (a.numel() == g.size())
                    kernels::active().add(pg[0]->data(), g.data(), pg[0]->data(), g.size());
                else
                    add_col_sums(g, g.size() / a.dim(1), a.dim(1), *pg[0]);
            }
            if (pg[1]) {
                if (b.numel() == g.size()) {
                    kernels::active().axpy(-1.0, g.data(), pg[1]->data(), g.size());
                } else {
                    std::vector<double> neg_sum(b.numel(), 0.0);
                    add_col_sums(g, g.size() / b.dim(1), b.dim(1), neg_sum);
                    kernels::active().axpy(-1.0, neg_sum.data(), pg[1]->data(), neg_sum.size());
                }
            }
        });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, "mul",
        [&](Broadcast mode, std::vector<double>& out) {
            const auto& K = kernels::active();
            if (mode == Broadcast::None) {
                K.mul(a.data().data(), b.data().data(), out.data(), out.size());
            } else {
                const Tensor& row = (mode == Broadcast::RowA) ? a : b;
                const Tensor& mat = (mode == Broadcast::RowA) ? b : a;
                const std::size_t c = mat.dim(1);
                for (std::size_t i = 0; i < mat.dim(0); ++i)
                    K.mul(mat.data().data() + i * c, row.data().data(), out.data() + i * c, c);
            }
        },
        [a, b](const std::vector<double>& g, const ParentGrads& pg) {
            const auto& K = kernels::active();
            auto side = [&](std::size_t idx, const Tensor& self, const Tensor& other) {
                if (!pg[idx]) return;
                if (self.numel() == g.size() && other.numel() == g.size()) {
                    K.madd(g.data(), other.data().data(), pg[idx]->data(), g.size());
                } else if (self.numel() == g.size()) {
                    // other is the broadcast row
                    const std::size_t c = self.dim(1);
                    for (std::size_t i = 0; i < self.dim(0); ++i)
                        K.madd(g.data() + i * c, other.data().data(), pg[idx]->data() + i * c, c);
                } else {
                    // self is the broadcast row: dRow[j] += sum_i g[i,j]*other[i,j]
                    const std::size_t c = self.dim(1);
                    for (std::size_t i = 0; i < g.size() / c; ++i)
                        K.madd(g.data() + i * c, other.data().data() + i * c, pg[idx]->data(), c);
                }
            };
            side(0, a, b);
            side(1, b, a);
        });
}

// ---- unary ------------------------------------------------------------------

Tensor neg(const Tensor& x) {
    check_defined(x, "neg");
    std::vector<double> out(x.numel());
    kernels::active().neg(x.data().data(), out.data(), out.size());
    return make_op(x.shape(), std::move(out), {x},
                   [](const std::vector<double>& g, const ParentGrads& pg) {
                       if (pg[0]) kernels::active().axpy(-1.0, g.data(), pg[0]->data(), g.size());
                   });
}

Tensor tanh(const Tensor& x) {
    check_defined(x, "tanh");
    std::vector<double> out(x.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(x.data()[i]);
    std::vector<double> y = out;  // d/dx tanh = 1 - y^2
    return make_op(x.shape(), std::move(out), {x},
                   [y = std::move(y)](const std::vector<double>& g, const ParentGrads& pg) {
                       if (!pg[0]) return;
                       std::vector<double>& acc = *pg[0];
                       for (std::size_t i = 0; i < g.size(); ++i)
                           acc[i] += g[i] * (1.0 - y[i] * y[i]);
                   });
}

Tensor relu(const Tensor& x) {
    check_defined(x, "relu");
    std::vector<double> out(x.numel());
    kernels::active().relu(x.data().data(), out.data(), out.size());
    return make_op(x.shape(), std::move(out), {x},
                   [x](const std::vector<double>& g, const ParentGrads& pg) {
                       if (pg[0])
                           kernels::active().relu_bwd(x.data().data(), g.data(), pg[0]->data(),
                                                      g.size());
                   });
}

Tensor exp(const Tensor& x) {
    check_defined(x, "exp");
    std::vector<double> out(x.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(x.data()[i]);
    std::vector<double> y = out;
    return make_op(x.shape(), std::move(out), {x},
                   [y = std::move(y)](const std::vector<double>& g, const ParentGrads& pg) {
                       if (!pg[0]) return;
                       kernels::active().madd(g.data(), y.data(), pg[0]->data(), g.size());
                   });
}

Tensor scale(const Tensor& x, double c) {
    check_defined(x, "scale");
    std::vector<double> out(x.numel(), 0.0);
    kernels::active().axpy(c, x.data().data(), out.data(), out.size());
    return make_op(x.shape(), std::move(out), {x},
                   [c](const std::vector<double>& g, const ParentGrads& pg) {
                       if (pg[0]) kernels::active().axpy(c, g.data(), pg[0]->data(), g.size());
                   });
}

// ---- softmax ----------------------------------------------------------------

Tensor softmax_rows(const Tensor& x) {
    check_defined(x, "softmax_rows");
    if (x.rank() != 2)
        throw ShapeError("softmax_rows: want rank-2 tensor, got " + shape_str(x.shape()));
    const std::size_t rows = x.dim(0), cols = x.dim(1);
    std::vector<double> out(x.numel());
    for (std::size_t i = 0; i < rows; ++i) {
        const double* src = x.data().data() + i * cols;
        double* dst = out.data() + i * cols;
        double mx = src[0];
        for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, src[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < cols; ++j) {
            dst[j] = std::exp(src[j] - mx);
            sum += dst[j];
        }
        for (std::size_t j = 0; j < cols; ++j) dst[j] /= sum;
    }
    std::vector<double> y = out;
    return make_op(x.shape(), std::move(out), {x},
                   [y = std::move(y), rows, cols](const std::vector<double>& g, const ParentGrads& pg) {
                       if (!pg[0]) return;
                       std::vector<double>& acc = *pg[0];
                       for (std::size_t i = 0; i < rows; ++i) {
                           const double* yi = y.data() + i * cols;
                           const double* gi = g.data() + i * cols;
                           double dot = 0.0;
                           for (std::size_t j = 0; j < cols; ++j) dot += gi[j] * yi[j];
                           double* ai = acc.data() + i * cols;
                           for (std::size_t j = 0; j < cols; ++j)
                               ai[j] += yi[j] * (gi[j] - dot);
                       }
                   });
}

// ---- reductions ---------------------------------------------------------------

namespace {

Tensor reduce_linear(const Tensor& x, std::optional<std::size_t> axis, bool mean, const char* name) {
    check_defined(x, name);
    if (!axis) {
        double sum = 0.0;
        for (double v : x.data()) sum += v;
        const double denom = mean ? static_cast<double>(x.numel()) : 1.0;
        const double w = 1.0 / denom;
        return make_op({1}, {sum / denom}, {x},
                       [w, n = x.numel()](const std::vector<double>& g, const ParentGrads& pg) {
                           if (!pg[0]) return;
                           const double gv = g[0] * w;
                           std::vector<double>& acc = *pg[0];
                           for (std::size_t i = 0; i < n; ++i) acc[i] += gv;
                       });
    }
    const AxisSplit s = split_axis(x.shape(), *axis);
    const double w = mean ? 1.0 / static_cast<double>(s.len) : 1.0;
    std::vector<double> out(s.outer * s.inner, 0.0);
    for (std::size_t o = 0; o < s.outer; ++o)
        for (std::size_t t = 0; t < s.len; ++t)
            kernels::active().axpy(w, x.data().data() + (o * s.len + t) * s.inner,
                                   out.data() + o * s.inner, s.inner);
    return make_op(drop_axis(x.shape(), *axis), std::move(out), {x},
                   [s, w](const std::vector<double>& g, const ParentGrads& pg) {
                       if (!pg[0]) return;
                       for (std::size_t o = 0; o < s.outer; ++o)
                           for (std::size_t t = 0; t < s.len; ++t)
                               kernels::active().axpy(w, g.data() + o * s.inner,
                                                      pg[0]->data() + (o * s.len + t) * s.inner,
                                                      s.inner);
                   });
}

}  // namespace

Tensor reduce_sum(const Tensor& x, std::optional<std::size_t> axis) {
    return reduce_linear(x, axis, false, "reduce_sum");
}

Tensor reduce_mean(const Tensor& x, std::optional<std::size_t> axis) {
    return reduce_linear(x, axis, true, "reduce_mean");
}

Tensor reduce_max(const Tensor& x, std::size_t axis) {
    check_defined(x, "reduce_max");
    const AxisSplit s = split_axis(x.shape(), axis);
    std::vector<double> out(s.outer * s.inner);
    std::vector<std::size_t> argmax(out.size());
    for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t i = 0; i < s.inner; ++i) {
            double best = x.data()[(o * s.len) * s.inner + i];
            std::size_t bt = 0;
            for (std::size_t t = 1; t < s.len; ++t) {
                const double v = x.data()[(o * s.len + t) * s.inner + i];
                if (v > best) {  // strict: ties keep the lowest index
                    best = v;
                    bt = t;
                }
            }
            out[o * s.inner + i] = best;
            argmax[o * s.inner + i] = (o * s.len + bt) * s.inner + i;
        }
    }
    return make_op(drop_axis(x.shape(), axis), std::move(out), {x},
                   [am = std::move(argmax)](const std::vector<double>& g, const ParentGrads& pg) {
                       if (!pg[0]) return;
                       for (std::size_t i = 0; i < g.size(); ++i) (*pg[0])[am[i]] += g[i];
                   });
}

// ---- indexing / restructuring --------------------------------------------------

Tensor gather(const Tensor& x, std::span<const std::size_t> indices, std::size_t axis) {
    check_defined(x, "gather");
    const AxisSplit s = split_axis(x.shape(), axis);
    if (indices.empty()) throw ContractError("gather: empty index list");
    for (std::size_t idx : indices)
        if (idx >= s.len)
            throw IndexError("gather: index " + std::to_string(idx) + " out of range for axis of " +
                             std::to_string(s.len));
    Shape out_shape = x.shape();
    out_shape[axis] = indices.size();
    std::vector<double> out(s.outer * indices.size() * s.inner);
    for (std::size_t o = 0; o < s.outer; ++o)
        for (std::size_t t = 0; t < indices.size(); ++t)
            std::copy_n(x.data().data() + (o * s.len + indices[t]) * s.inner, s.inner,
                        out.data() + (o * indices.size() + t) * s.inner);
    std::vector<std::size_t> idx(indices.begin(), indices.end());
    return make_op(std::move(out_shape), std::move(out), {x},
                   [s, idx = std::move(idx)](const std::vector<double>& g, const ParentGrads& pg) {
                       if (!pg[0]) return;
                       for (std::size_t o = 0; o < s.outer; ++o)
                           for (std::size_t t = 0; t < idx.size(); ++t)
                               kernels::active().axpy(
                                   1.0, g.data() + (o * idx.size() + t) * s.inner,
                                   pg[0]->data() + (o * s.len + idx[t]) * s.inner, s.inner);
                   });
}

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
    if (parts.empty()) throw ContractError("concat: no tensors");
    for (const Tensor& p : parts) check_defined(p, "concat");
    const Shape& ref = parts[0].shape();
    Shape out_shape = ref;
    std::size_t total = 0;
    for (const Tensor& p : parts) {
        if (p.rank() != ref.size())
            throw ShapeError("concat: rank mismatch " + shape_str(p.shape()) + " vs " + shape_str(ref));
        for (std::size_t d = 0; d < ref.size(); ++d)
            if (d != axis && p.dim(d) != ref[d])
                throw ShapeError("concat: off-axis mismatch " + shape_str(p.shape()) + " vs " +
                                 shape_str(ref));
        total += p.dim(axis);
    }
    out_shape[axis] = total;
    const AxisSplit so = split_axis(out_shape, axis);
    std::vector<double> out(so.outer * so.len * so.inner);
    std::size_t offset = 0;
    for (const Tensor& p : parts) {
        const std::size_t plen = p.dim(axis);
        for (std::size_t o = 0; o < so.outer; ++o)
            std::copy_n(p.data().data() + o * plen * so.inner, plen * so.inner,
                        out.data() + (o * so.len + offset) * so.inner);
        offset += plen;
    }
    std::vector<Tensor> parents(parts.begin(), parts.end());
    std::vector<std::size_t> lens;
    for (const Tensor& p : parts) lens.push_back(p.dim(axis));
    return make_op(std::move(out_shape), std::move(out), std::move(parents),
                   [so, lens = std::move(lens)](const std::vector<double>& g, const ParentGrads& pg) {
                       std::size_t offset = 0;
                       for (std::size_t pi = 0; pi < lens.size(); ++pi) {
                           if (pg[pi])
                               for (std::size_t o = 0; o < so.outer; ++o)
                                   kernels::active().axpy(
                                       1.0, g.data() + (o * so.len + offset) * so.inner,
                                       pg[pi]->data() + o * lens[pi] * so.inner,
                                       lens[pi] * so.inner);
                           offset += lens[pi];
                       }
                   });
}

Tensor reshape(const Tensor& x, Shape shape) {
    check_defined(x, "reshape");
    if (numel_of(shape) != x.numel())
        throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
    std::vector<double> out(x.data().begin(), x.data().end());
    return make_op(std::move(shape), std::move(out), {x},
                   [](const std::vector<double>& g, const ParentGrads& pg) {
                       if (pg[0]) kernels::active().add(pg[0]->data(), g.data(), pg[0]->data(), g.size());
                   });
}

namespace {

// dst[perm-permuted coordinates] = src; returns permuted copy of `data`
std::vector<double> permute_copy(std::span<const double> data, const Shape& shape,
                                 const std::vector<std::size_t>& perm, Shape& out_shape) {
    const std::size_t r = shape.size();
    out_shape.resize(r);
    for (std::size_t i = 0; i < r; ++i) out_shape[i] = shape[perm[i]];
    std::vector<std::size_t> in_strides(r, 1), out_strides(r, 1);
    for (std::size_t i = r; i-- > 1;) in_strides[i - 1] = in_strides[i] * shape[i];
    for (std::size_t i = r; i-- > 1;) out_strides[i - 1] = out_strides[i] * out_shape[i];
    std::vector<double> out(data.size());
    std::vector<std::size_t> coord(r, 0);
    for (std::size_t flat = 0; flat < data.size(); ++flat) {
        std::size_t rem = flat;
        std::size_t dst = 0;
        for (std::size_t i = 0; i < r; ++i) {
            coord[i] = rem / in_strides[i];
            rem %= in_strides[i];
        }
        for (std::size_t i = 0; i < r; ++i) dst += coord[perm[i]] * out_strides[i];
        out[dst] = data[flat];
    }
    return out;
}

}  // namespace

Tensor transpose(const Tensor& x) {
    if (x.rank() != 2)
        throw ShapeError("transpose: default form wants rank-2 tensor, got " + shape_str(x.shape()));
    return transpose(x, {1, 0});
}

Tensor transpose(const Tensor& x, std::vector<std::size_t> perm) {
    check_defined(x, "transpose");
    if (perm.size() != x.rank())
        throw ShapeError("transpose: permutation size " + std::to_string(perm.size()) +
                         " vs rank " + std::to_string(x.rank()));
    std::vector<bool> seen(perm.size(), false);
    for (std::size_t p : perm) {
        if (p >= perm.size() || seen[p]) throw ShapeError("transpose: invalid permutation");
        seen[p] = true;
    }
    Shape out_shape;
    std::vector<double> out = permute_copy(x.data(), x.shape(), perm, out_shape);
    std::vector<std::size_t> inv(perm.size());
    for (std::size_t i = 0; i < perm.size(); ++i) inv[perm[i]] = i;
    const Shape gshape = out_shape;
    return make_op(std::move(out_shape), std::move(out), {x},
                   [inv = std::move(inv), gshape](const std::vector<double>& g, const ParentGrads& pg) {
                       if (!pg[0]) return;
                       Shape back_shape;
                       std::vector<double> gt = permute_copy(g, gshape, inv, back_shape);
                       kernels::active().add(pg[0]->data(), gt.data(), pg[0]->data(), gt.size());
                   });
}

// ---- backward engine -------------------------------------------------------------

void backward(const Tensor& loss) {
    check_defined(loss, "backward");
    if (loss.numel() != 1)
        throw ContractError("backward: loss must be scalar, got shape " + shape_str(loss.shape()));
    if (!loss.requires_grad()) return;  // nothing reachable

    // Post-order over requires_grad ancestors, iterative.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack{{loss.node(), 0}};
    visited.insert(loss.node());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* p = node->parents[next].node();
            ++next;
            if (p->requires_grad && !visited.count(p)) {
                visited.insert(p);
                stack.push_back({p, 0});
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    std::unordered_map<Node*, std::vector<double>> gm;
    gm[loss.node()] = {1.0};
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* node = *it;
        auto git = gm.find(node);
        if (git == gm.end()) continue;
        if (node->backward) {
            ParentGrads pg(node->parents.size(), nullptr);
            for (std::size_t i = 0; i < node->parents.size(); ++i) {
                const Tensor& p = node->parents[i];
                if (!p.requires_grad()) continue;
                auto& buf = gm[p.node()];
                if (buf.empty()) buf.assign(p.numel(), 0.0);
                pg[i] = &buf;
            }
            node->backward(git->second, pg);
        } else if (node->requires_grad) {
            if (node->grad.empty()) node->grad.assign(node->data.size(), 0.0);
            kernels::active().add(node->grad.data(), git->second.data(), node->grad.data(),
                                  node->grad.size());
        }
        if (node != loss.node()) gm.erase(node);  // free as we go
    }
}

}  // namespace snowflake::nd
