#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace sun {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& s);

namespace detail {

struct TensorNode {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;  // sized lazily; empty means all-zero
    bool requires_grad = false;
    std::vector<std::shared_ptr<TensorNode>> parents;
    // Accumulates into the parents' grads given this node's grad.
    std::function<void(TensorNode&)> backward_fn;

    std::size_t numel() const { return data.size(); }
    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
    }
};

}  // namespace detail

// Dense row-major f64 tensor participating in a reverse-mode graph. Value
// semantics over a shared node: copies alias the same storage. Data is
// immutable after construction except through mutable_data(), which is
// reserved for optimizer updates on leaf parameters.
class Tensor {
 public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor scalar(double value);
    static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::size_t numel() const { return node_->data.size(); }
    std::size_t rank() const { return node_->shape.size(); }
    std::size_t dim(std::size_t i) const { return node_->shape[i]; }

    std::span<const double> data() const { return node_->data; }
    std::span<double> mutable_data() { return node_->data; }
    double item() const;
    double at(std::size_t i) const { return node_->data[i]; }

    bool requires_grad() const { return node_->requires_grad; }
    std::span<const double> grad() const;
    void zero_grad();

    std::shared_ptr<detail::TensorNode> node() const { return node_; }

 private:
    explicit Tensor(std::shared_ptr<detail::TensorNode> n) : node_(std::move(n)) {}
    std::shared_ptr<detail::TensorNode> node_;

    friend Tensor make_op_result(Shape shape, std::vector<double> data,
                                 std::vector<Tensor> inputs,
                                 std::function<void(detail::TensorNode&)> backward_fn);
};

// Scoped switch that stops ops from recording the graph (inference mode).
class NoGradGuard {
 public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
    bool prev_;
};

bool grad_enabled();

// Graph construction hook shared by all ops.
Tensor make_op_result(Shape shape, std::vector<double> data, std::vector<Tensor> inputs,
                      std::function<void(detail::TensorNode&)> backward_fn);

// --- elementwise / scalar ---
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double c);
Tensor add_const(const Tensor& x, double c);
Tensor exp(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor clamp(const Tensor& x, double lo, double hi);

// --- reductions ---
Tensor sum_all(const Tensor& x);
Tensor mean_all(const Tensor& x);
Tensor logsumexp(const Tensor& x);                // n >= 1, any shape; reduces all
Tensor max_over_rows(const Tensor& x);            // [k x m] -> [m], first argmax on ties
Tensor mean_over_rows(const Tensor& x);           // [k x m] -> [m]

// --- linear algebra ---
Tensor matmul(const Tensor& a, const Tensor& b);      // [n x p] . [p x q]
Tensor matmul_nt(const Tensor& a, const Tensor& b);   // [n x p] . [m x p]^T -> [n x m]
Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b);  // x.w + b (bias per column)

// --- shape / indexing ---
Tensor reshape(const Tensor& x, Shape shape);
Tensor slice_rows(const Tensor& x, std::size_t r0, std::size_t r1);
Tensor slice_cols(const Tensor& x, std::size_t c0, std::size_t c1);
Tensor concat_cols(const std::vector<Tensor>& parts);  // [n x mi] -> [n x sum(mi)]
Tensor concat_vec(const std::vector<Tensor>& parts);   // 1-D pieces -> one 1-D tensor
Tensor stack_scalars(const std::vector<Tensor>& parts);
Tensor broadcast_row(const Tensor& v, std::size_t n);  // [d] -> [n x d]
Tensor pick(const Tensor& x, std::size_t i);           // flat index -> scalar
Tensor embedding_rows(const Tensor& table, const std::vector<std::size_t>& ids);
Tensor im2col(const Tensor& x, std::size_t window);    // [n x d] -> [(n-w+1) x (w*d)]

// --- rows ---
Tensor softmax_rows(const Tensor& x);              // [n x m], softmax along each row
Tensor layer_norm(const Tensor& x, double eps);    // [n x d] rows normalized, no affine

// --- stochastic / similarity ---
struct DropoutResult {
    Tensor value;
    std::vector<double> mask;  // 1.0 kept, 0.0 dropped (pre-scaling)
};
DropoutResult dropout(const Tensor& x, double rate, std::uint64_t seed, bool training);
Tensor cosine_sim(const Tensor& a, const Tensor& b);  // 1-D inputs, scalar output

// Convolution over the token axis followed by max-over-time pooling, one
// kernel per window width; outputs concatenated in ascending window order.
Tensor conv_maxpool(const Tensor& x, const std::vector<std::size_t>& windows,
                    const std::vector<Tensor>& kernels, const std::vector<Tensor>& biases);

// Reverse-mode accumulation from a scalar loss. Grads accumulate across calls;
// callers zero them explicitly between steps.
void backward(const Tensor& loss);

}  // namespace sun
