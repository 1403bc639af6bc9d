#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "snowflake/error.hpp"
#include "snowflake/rng.hpp"

namespace snowflake::nd {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& s);

class Tensor;

// Gradient contributions flowing into each parent during backward(); entries
// are nullptr for parents that do not require grad.
using ParentGrads = std::vector<std::vector<double>*>;
using BackwardFn = std::function<void(const std::vector<double>& gout, const ParentGrads& pg)>;

struct Node {
    Shape shape;
    std::vector<double> data;
    bool requires_grad = false;
    std::vector<double> grad;  // persistent accumulator, leaves only
    std::vector<Tensor> parents;
    BackwardFn backward;

    std::size_t numel() const { return data.size(); }
    bool is_leaf() const { return !backward; }
};

// Dense row-major float64 tensor with reverse-mode autodiff. A Tensor is a
// cheap handle to an immutable node; ops build a graph when grad mode is on
// and any input requires grad. Weight updates go through mutable_data()
// between graph builds.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false);
    static Tensor identity(std::size_t n);
    // i.i.d. normal(0, stddev)
    static Tensor randn(Shape shape, Rng& rng, double stddev = 1.0, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    bool defined() const { return n_ != nullptr; }
    const Shape& shape() const { return n_->shape; }
    std::size_t rank() const { return n_->shape.size(); }
    std::size_t dim(std::size_t i) const { return n_->shape[i]; }
    std::size_t numel() const { return n_->data.size(); }
    bool requires_grad() const { return n_->requires_grad; }

    std::span<const double> data() const { return n_->data; }
    std::span<double> mutable_data() { return n_->data; }

    bool has_grad() const { return !n_->grad.empty(); }
    std::span<const double> grad() const;
    void zero_grad();

    double value() const;                       // scalar tensors
    double at(std::size_t i) const;             // flat index
    double at(std::size_t i, std::size_t j) const;

    Node* node() const { return n_.get(); }

private:
    explicit Tensor(std::shared_ptr<Node> n) : n_(std::move(n)) {}
    std::shared_ptr<Node> n_;

    friend Tensor make_op(Shape, std::vector<double>, std::vector<Tensor>, BackwardFn);
    friend Tensor make_leaf(Shape, std::vector<double>, bool);
};

// Graph-construction primitives. make_op attaches parents/backward only when
// grad mode is on and some parent requires grad; otherwise the result is a
// plain constant and the inputs can be freed. Custom differentiable ops
// outside this module (the point-set losses) are built with make_op too.
Tensor make_leaf(Shape shape, std::vector<double> data, bool requires_grad);
Tensor make_op(Shape shape, std::vector<double> data, std::vector<Tensor> parents, BackwardFn fn);

bool grad_enabled();
struct NoGrad {
    NoGrad();
    ~NoGrad();
    NoGrad(const NoGrad&) = delete;
    NoGrad& operator=(const NoGrad&) = delete;

private:
    bool prev_;
};

// ---- operations -----------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);

// Binary elementwise ops accept identical shapes, or a 1xC row broadcast
// against an NxC matrix (either side). Nothing else.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

Tensor neg(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor scale(const Tensor& x, double c);

// Row-wise softmax of a 2-D tensor, stabilized by row-max subtraction.
Tensor softmax_rows(const Tensor& x);

// axis = nullopt reduces over all elements to a {1} tensor.
Tensor reduce_sum(const Tensor& x, std::optional<std::size_t> axis = std::nullopt);
Tensor reduce_mean(const Tensor& x, std::optional<std::size_t> axis = std::nullopt);
// max keeps an axis; gradient routes to the argmax (ties: lowest index).
Tensor reduce_max(const Tensor& x, std::size_t axis);

Tensor gather(const Tensor& x, std::span<const std::size_t> indices, std::size_t axis = 0);
Tensor concat(std::span<const Tensor> parts, std::size_t axis);
Tensor reshape(const Tensor& x, Shape shape);
Tensor transpose(const Tensor& x);                           // 2-D swap
Tensor transpose(const Tensor& x, std::vector<std::size_t> perm);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator-(const Tensor& x) { return neg(x); }

// Reverse-mode sweep from a scalar loss. Leaf tensors with requires_grad
// receive additive contributions in .grad (repeated calls accumulate).
void backward(const Tensor& loss);

}  // namespace snowflake::nd
