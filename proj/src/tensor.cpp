#include "sun/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "sun/error.hpp"
#include "sun/rng.hpp"

namespace sun {

using detail::TensorNode;

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << "x";
        os << s[i];
    }
    os << "]";
    return os.str();
}

namespace {

thread_local bool g_grad_enabled = true;

std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (auto d : s) n *= d;
    return n;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw dimension_error(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                              " vs " + shape_str(b.shape()));
    }
}

void require_matrix(const Tensor& t, const char* op) {
    if (t.rank() != 2) {
        throw dimension_error(std::string(op) + ": expected matrix, got " + shape_str(t.shape()));
    }
}

// Accumulate g into parent's grad when it participates in the graph.
void accum(const std::shared_ptr<TensorNode>& p, std::size_t i, double g) {
    if (p->requires_grad) {
        p->ensure_grad();
        p->grad[i] += g;
    }
}

}  // namespace

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }
bool grad_enabled() { return g_grad_enabled; }

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    return from_data(shape, std::vector<double>(shape_numel(shape), 0.0), requires_grad);
}

Tensor Tensor::scalar(double value) { return from_data({1}, {value}); }

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
    if (shape_numel(shape) != data.size()) {
        throw dimension_error("from_data: shape " + shape_str(shape) + " wants " +
                              std::to_string(shape_numel(shape)) + " values, got " +
                              std::to_string(data.size()));
    }
    auto node = std::make_shared<TensorNode>();
    node->shape = std::move(shape);
    node->data = std::move(data);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

double Tensor::item() const {
    if (numel() != 1) {
        throw dimension_error("item: tensor " + shape_str(shape()) + " is not scalar");
    }
    return node_->data[0];
}

std::span<const double> Tensor::grad() const {
    const_cast<TensorNode*>(node_.get())->ensure_grad();
    return node_->grad;
}

void Tensor::zero_grad() { node_->grad.assign(node_->data.size(), 0.0); }

Tensor make_op_result(Shape shape, std::vector<double> data, std::vector<Tensor> inputs,
                      std::function<void(TensorNode&)> backward_fn) {
    Tensor out = Tensor::from_data(std::move(shape), std::move(data));
    bool needs = false;
    if (g_grad_enabled) {
        for (const auto& in : inputs) {
            if (in.defined() && in.requires_grad()) needs = true;
        }
    }
    if (needs) {
        auto node = out.node();
        node->requires_grad = true;
        node->parents.reserve(inputs.size());
        for (const auto& in : inputs) node->parents.push_back(in.node());
        node->backward_fn = std::move(backward_fn);
    }
    return out;
}

// ---------------------------------------------------------------- elementwise

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) + b.at(i);
    return make_op_result(a.shape(), std::move(out), {a, b}, [](TensorNode& self) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            accum(self.parents[0], i, self.grad[i]);
            accum(self.parents[1], i, self.grad[i]);
        }
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) - b.at(i);
    return make_op_result(a.shape(), std::move(out), {a, b}, [](TensorNode& self) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            accum(self.parents[0], i, self.grad[i]);
            accum(self.parents[1], i, -self.grad[i]);
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) * b.at(i);
    return make_op_result(a.shape(), std::move(out), {a, b}, [](TensorNode& self) {
        const auto& av = self.parents[0]->data;
        const auto& bv = self.parents[1]->data;
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            accum(self.parents[0], i, self.grad[i] * bv[i]);
            accum(self.parents[1], i, self.grad[i] * av[i]);
        }
    });
}

Tensor scale(const Tensor& x, double c) {
    std::vector<double> out(x.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.at(i) * c;
    return make_op_result(x.shape(), std::move(out), {x}, [c](TensorNode& self) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) accum(self.parents[0], i, self.grad[i] * c);
    });
}

Tensor add_const(const Tensor& x, double c) {
    std::vector<double> out(x.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.at(i) + c;
    return make_op_result(x.shape(), std::move(out), {x}, [](TensorNode& self) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) accum(self.parents[0], i, self.grad[i]);
    });
}

Tensor exp(const Tensor& x) {
    std::vector<double> out(x.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(x.at(i));
    return make_op_result(x.shape(), std::move(out), {x}, [](TensorNode& self) {
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            accum(self.parents[0], i, self.grad[i] * self.data[i]);
    });
}

Tensor tanh(const Tensor& x) {
    std::vector<double> out(x.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(x.at(i));
    return make_op_result(x.shape(), std::move(out), {x}, [](TensorNode& self) {
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            accum(self.parents[0], i, self.grad[i] * (1.0 - self.data[i] * self.data[i]));
    });
}

Tensor relu(const Tensor& x) {
    std::vector<double> out(x.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.at(i) > 0.0 ? x.at(i) : 0.0;
    return make_op_result(x.shape(), std::move(out), {x}, [](TensorNode& self) {
        const auto& xv = self.parents[0]->data;
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            if (xv[i] > 0.0) accum(self.parents[0], i, self.grad[i]);
    });
}

Tensor sigmoid(const Tensor& x) {
    std::vector<double> out(x.numel());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double v = x.at(i);
        // Split by sign so exp never overflows.
        out[i] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
    }
    return make_op_result(x.shape(), std::move(out), {x}, [](TensorNode& self) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            const double s = self.data[i];
            accum(self.parents[0], i, self.grad[i] * s * (1.0 - s));
        }
    });
}

Tensor clamp(const Tensor& x, double lo, double hi) {
    std::vector<double> out(x.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::min(hi, std::max(lo, x.at(i)));
    return make_op_result(x.shape(), std::move(out), {x}, [lo, hi](TensorNode& self) {
        const auto& xv = self.parents[0]->data;
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            if (xv[i] > lo && xv[i] < hi) accum(self.parents[0], i, self.grad[i]);
    });
}

// ---------------------------------------------------------------- reductions

Tensor sum_all(const Tensor& x) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.numel(); ++i) s += x.at(i);
    return make_op_result({1}, {s}, {x}, [](TensorNode& self) {
        const double g = self.grad[0];
        for (std::size_t i = 0; i < self.parents[0]->data.size(); ++i) accum(self.parents[0], i, g);
    });
}

Tensor mean_all(const Tensor& x) {
    if (x.numel() == 0) throw dimension_error("mean_all: empty tensor");
    return scale(sum_all(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor logsumexp(const Tensor& x) {
    if (x.numel() == 0) throw std::domain_error("logsumexp: empty input");
    double mx = x.at(0);
    for (std::size_t i = 1; i < x.numel(); ++i) mx = std::max(mx, x.at(i));
    double s = 0.0;
    for (std::size_t i = 0; i < x.numel(); ++i) s += std::exp(x.at(i) - mx);
    const double lse = mx + std::log(s);
    return make_op_result({1}, {lse}, {x}, [](TensorNode& self) {
        const double g = self.grad[0];
        const double lse_v = self.data[0];
        const auto& xv = self.parents[0]->data;
        for (std::size_t i = 0; i < xv.size(); ++i)
            accum(self.parents[0], i, g * std::exp(xv[i] - lse_v));
    });
}

Tensor max_over_rows(const Tensor& x) {
    require_matrix(x, "max_over_rows");
    const std::size_t k = x.dim(0), m = x.dim(1);
    if (k == 0) throw std::domain_error("max_over_rows: no rows");
    std::vector<double> out(m);
    auto arg = std::make_shared<std::vector<std::size_t>>(m, 0);
    for (std::size_t j = 0; j < m; ++j) {
        double best = x.at(j);
        std::size_t bi = 0;
        for (std::size_t i = 1; i < k; ++i) {
            const double v = x.at(i * m + j);
            if (v > best) {
                best = v;
                bi = i;
            }
        }
        out[j] = best;
        (*arg)[j] = bi;
    }
    return make_op_result({m}, std::move(out), {x}, [arg, m](TensorNode& self) {
        for (std::size_t j = 0; j < m; ++j) accum(self.parents[0], (*arg)[j] * m + j, self.grad[j]);
    });
}

Tensor mean_over_rows(const Tensor& x) {
    require_matrix(x, "mean_over_rows");
    const std::size_t k = x.dim(0), m = x.dim(1);
    if (k == 0) throw std::domain_error("mean_over_rows: no rows");
    std::vector<double> out(m, 0.0);
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < m; ++j) out[j] += x.at(i * m + j);
    for (auto& v : out) v /= static_cast<double>(k);
    return make_op_result({m}, std::move(out), {x}, [k, m](TensorNode& self) {
        const double inv = 1.0 / static_cast<double>(k);
        for (std::size_t i = 0; i < k; ++i)
            for (std::size_t j = 0; j < m; ++j) accum(self.parents[0], i * m + j, self.grad[j] * inv);
    });
}

// ------------------------------------------------------------ linear algebra

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_matrix(a, "matmul");
    require_matrix(b, "matmul");
    const std::size_t n = a.dim(0), p = a.dim(1), q = b.dim(1);
    if (b.dim(0) != p) {
        throw dimension_error("matmul: inner dimensions disagree " + shape_str(a.shape()) +
                              " vs " + shape_str(b.shape()));
    }
    std::vector<double> out(n * q, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < p; ++k) {
            const double av = a.at(i * p + k);
            if (av == 0.0) continue;
            for (std::size_t j = 0; j < q; ++j) out[i * q + j] += av * b.at(k * q + j);
        }
    return make_op_result({n, q}, std::move(out), {a, b}, [n, p, q](TensorNode& self) {
        const auto& av = self.parents[0]->data;
        const auto& bv = self.parents[1]->data;
        if (self.parents[0]->requires_grad) {
            self.parents[0]->ensure_grad();
            auto& ga = self.parents[0]->grad;
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < q; ++j) {
                    const double g = self.grad[i * q + j];
                    if (g == 0.0) continue;
                    for (std::size_t k = 0; k < p; ++k) ga[i * p + k] += g * bv[k * q + j];
                }
        }
        if (self.parents[1]->requires_grad) {
            self.parents[1]->ensure_grad();
            auto& gb = self.parents[1]->grad;
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t k = 0; k < p; ++k) {
                    const double a_ik = av[i * p + k];
                    if (a_ik == 0.0) continue;
                    for (std::size_t j = 0; j < q; ++j) gb[k * q + j] += a_ik * self.grad[i * q + j];
                }
        }
    });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    require_matrix(a, "matmul_nt");
    require_matrix(b, "matmul_nt");
    const std::size_t n = a.dim(0), p = a.dim(1), m = b.dim(0);
    if (b.dim(1) != p) {
        throw dimension_error("matmul_nt: inner dimensions disagree " + shape_str(a.shape()) +
                              " vs " + shape_str(b.shape()));
    }
    std::vector<double> out(n * m, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < p; ++k) s += a.at(i * p + k) * b.at(j * p + k);
            out[i * m + j] = s;
        }
    return make_op_result({n, m}, std::move(out), {a, b}, [n, p, m](TensorNode& self) {
        const auto& av = self.parents[0]->data;
        const auto& bv = self.parents[1]->data;
        if (self.parents[0]->requires_grad) {
            self.parents[0]->ensure_grad();
            auto& ga = self.parents[0]->grad;
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < m; ++j) {
                    const double g = self.grad[i * m + j];
                    if (g == 0.0) continue;
                    for (std::size_t k = 0; k < p; ++k) ga[i * p + k] += g * bv[j * p + k];
                }
        }
        if (self.parents[1]->requires_grad) {
            self.parents[1]->ensure_grad();
            auto& gb = self.parents[1]->grad;
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < m; ++j) {
                    const double g = self.grad[i * m + j];
                    if (g == 0.0) continue;
                    for (std::size_t k = 0; k < p; ++k) gb[j * p + k] += g * av[i * p + k];
                }
        }
    });
}

Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b) {
    require_matrix(x, "affine");
    require_matrix(w, "affine");
    const std::size_t n = x.dim(0), p = x.dim(1), q = w.dim(1);
    if (w.dim(0) != p) {
        throw dimension_error("affine: inner dimensions disagree " + shape_str(x.shape()) +
                              " vs " + shape_str(w.shape()));
    }
    if (b.rank() != 1 || b.dim(0) != q) {
        throw dimension_error("affine: bias " + shape_str(b.shape()) + " does not match weight " +
                              shape_str(w.shape()));
    }
    std::vector<double> out(n * q);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < q; ++j) out[i * q + j] = b.at(j);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < p; ++k) {
            const double xv = x.at(i * p + k);
            if (xv == 0.0) continue;
            for (std::size_t j = 0; j < q; ++j) out[i * q + j] += xv * w.at(k * q + j);
        }
    return make_op_result({n, q}, std::move(out), {x, w, b}, [n, p, q](TensorNode& self) {
        const auto& xv = self.parents[0]->data;
        const auto& wv = self.parents[1]->data;
        if (self.parents[0]->requires_grad) {
            self.parents[0]->ensure_grad();
            auto& gx = self.parents[0]->grad;
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < q; ++j) {
                    const double g = self.grad[i * q + j];
                    if (g == 0.0) continue;
                    for (std::size_t k = 0; k < p; ++k) gx[i * p + k] += g * wv[k * q + j];
                }
        }
        if (self.parents[1]->requires_grad) {
            self.parents[1]->ensure_grad();
            auto& gw = self.parents[1]->grad;
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t k = 0; k < p; ++k) {
                    const double x_ik = xv[i * p + k];
                    if (x_ik == 0.0) continue;
                    for (std::size_t j = 0; j < q; ++j) gw[k * q + j] += x_ik * self.grad[i * q + j];
                }
        }
        if (self.parents[2]->requires_grad) {
            self.parents[2]->ensure_grad();
            auto& gb = self.parents[2]->grad;
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < q; ++j) gb[j] += self.grad[i * q + j];
        }
    });
}

// ------------------------------------------------------------ shape/indexing

Tensor reshape(const Tensor& x, Shape shape) {
    if (shape_numel(shape) != x.numel()) {
        throw dimension_error("reshape: " + shape_str(x.shape()) + " -> " + shape_str(shape) +
                              " changes element count");
    }
    std::vector<double> out(x.data().begin(), x.data().end());
    return make_op_result(std::move(shape), std::move(out), {x}, [](TensorNode& self) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) accum(self.parents[0], i, self.grad[i]);
    });
}

Tensor slice_rows(const Tensor& x, std::size_t r0, std::size_t r1) {
    require_matrix(x, "slice_rows");
    const std::size_t m = x.dim(1);
    if (r0 > r1 || r1 > x.dim(0)) throw dimension_error("slice_rows: bad range");
    std::vector<double> out(x.data().begin() + r0 * m, x.data().begin() + r1 * m);
    return make_op_result({r1 - r0, m}, std::move(out), {x}, [r0, m](TensorNode& self) {
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            accum(self.parents[0], r0 * m + i, self.grad[i]);
    });
}

Tensor slice_cols(const Tensor& x, std::size_t c0, std::size_t c1) {
    require_matrix(x, "slice_cols");
    const std::size_t n = x.dim(0), m = x.dim(1);
    if (c0 > c1 || c1 > m) throw dimension_error("slice_cols: bad range");
    const std::size_t w = c1 - c0;
    std::vector<double> out(n * w);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < w; ++j) out[i * w + j] = x.at(i * m + c0 + j);
    return make_op_result({n, w}, std::move(out), {x}, [n, m, c0, w](TensorNode& self) {
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < w; ++j)
                accum(self.parents[0], i * m + c0 + j, self.grad[i * w + j]);
    });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw dimension_error("concat_cols: no parts");
    const std::size_t n = parts[0].dim(0);
    std::size_t total = 0;
    for (const auto& p : parts) {
        require_matrix(p, "concat_cols");
        if (p.dim(0) != n) throw dimension_error("concat_cols: row counts disagree");
        total += p.dim(1);
    }
    std::vector<double> out(n * total);
    std::size_t off = 0;
    for (const auto& p : parts) {
        const std::size_t w = p.dim(1);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < w; ++j) out[i * total + off + j] = p.at(i * w + j);
        off += w;
    }
    auto widths = std::make_shared<std::vector<std::size_t>>();
    for (const auto& p : parts) widths->push_back(p.dim(1));
    return make_op_result({n, total}, std::move(out), parts, [n, total, widths](TensorNode& self) {
        std::size_t off = 0;
        for (std::size_t k = 0; k < widths->size(); ++k) {
            const std::size_t w = (*widths)[k];
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < w; ++j)
                    accum(self.parents[k], i * w + j, self.grad[i * total + off + j]);
            off += w;
        }
    });
}

Tensor concat_vec(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw dimension_error("concat_vec: no parts");
    std::size_t total = 0;
    for (const auto& p : parts) total += p.numel();
    std::vector<double> out;
    out.reserve(total);
    for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
    auto sizes = std::make_shared<std::vector<std::size_t>>();
    for (const auto& p : parts) sizes->push_back(p.numel());
    return make_op_result({total}, std::move(out), parts, [sizes](TensorNode& self) {
        std::size_t off = 0;
        for (std::size_t k = 0; k < sizes->size(); ++k) {
            for (std::size_t i = 0; i < (*sizes)[k]; ++i) accum(self.parents[k], i, self.grad[off + i]);
            off += (*sizes)[k];
        }
    });
}

Tensor stack_scalars(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw dimension_error("stack_scalars: no parts");
    std::vector<double> out;
    out.reserve(parts.size());
    for (const auto& p : parts) out.push_back(p.item());
    return make_op_result({parts.size()}, std::move(out), parts, [](TensorNode& self) {
        for (std::size_t k = 0; k < self.parents.size(); ++k) accum(self.parents[k], 0, self.grad[k]);
    });
}

Tensor broadcast_row(const Tensor& v, std::size_t n) {
    if (v.rank() != 1) throw dimension_error("broadcast_row: expected vector, got " + shape_str(v.shape()));
    const std::size_t d = v.dim(0);
    std::vector<double> out(n * d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) out[i * d + j] = v.at(j);
    return make_op_result({n, d}, std::move(out), {v}, [n, d](TensorNode& self) {
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) accum(self.parents[0], j, self.grad[i * d + j]);
    });
}

Tensor pick(const Tensor& x, std::size_t i) {
    if (i >= x.numel()) throw dimension_error("pick: index out of range");
    return make_op_result({1}, {x.at(i)}, {x}, [i](TensorNode& self) {
        accum(self.parents[0], i, self.grad[0]);
    });
}

Tensor embedding_rows(const Tensor& table, const std::vector<std::size_t>& ids) {
    require_matrix(table, "embedding_rows");
    const std::size_t v = table.dim(0), d = table.dim(1);
    std::vector<double> out(ids.size() * d);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] >= v) {
            throw dimension_error("embedding_rows: index " + std::to_string(ids[i]) +
                                  " out of table " + shape_str(table.shape()));
        }
        for (std::size_t j = 0; j < d; ++j) out[i * d + j] = table.at(ids[i] * d + j);
    }
    auto saved = std::make_shared<std::vector<std::size_t>>(ids);
    return make_op_result({ids.size(), d}, std::move(out), {table}, [saved, d](TensorNode& self) {
        for (std::size_t i = 0; i < saved->size(); ++i)
            for (std::size_t j = 0; j < d; ++j)
                accum(self.parents[0], (*saved)[i] * d + j, self.grad[i * d + j]);
    });
}

Tensor im2col(const Tensor& x, std::size_t window) {
    require_matrix(x, "im2col");
    const std::size_t n = x.dim(0), d = x.dim(1);
    if (window == 0 || window > n) {
        throw std::domain_error("im2col: window " + std::to_string(window) +
                                " does not fit sequence of length " + std::to_string(n));
    }
    const std::size_t rows = n - window + 1, w = window * d;
    std::vector<double> out(rows * w);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < w; ++j) out[i * w + j] = x.at(i * d + j);
    return make_op_result({rows, w}, std::move(out), {x}, [rows, w, d](TensorNode& self) {
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < w; ++j) accum(self.parents[0], i * d + j, self.grad[i * w + j]);
    });
}

// ------------------------------------------------------------------ row ops

Tensor softmax_rows(const Tensor& x) {
    require_matrix(x, "softmax_rows");
    const std::size_t n = x.dim(0), m = x.dim(1);
    std::vector<double> out(n * m);
    for (std::size_t i = 0; i < n; ++i) {
        double mx = x.at(i * m);
        for (std::size_t j = 1; j < m; ++j) mx = std::max(mx, x.at(i * m + j));
        double s = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            out[i * m + j] = std::exp(x.at(i * m + j) - mx);
            s += out[i * m + j];
        }
        for (std::size_t j = 0; j < m; ++j) out[i * m + j] /= s;
    }
    return make_op_result({n, m}, std::move(out), {x}, [n, m](TensorNode& self) {
        for (std::size_t i = 0; i < n; ++i) {
            double dot = 0.0;
            for (std::size_t j = 0; j < m; ++j) dot += self.grad[i * m + j] * self.data[i * m + j];
            for (std::size_t j = 0; j < m; ++j)
                accum(self.parents[0], i * m + j,
                      self.data[i * m + j] * (self.grad[i * m + j] - dot));
        }
    });
}

Tensor layer_norm(const Tensor& x, double eps) {
    require_matrix(x, "layer_norm");
    if (eps <= 0.0) throw std::domain_error("layer_norm: eps must be positive");
    const std::size_t n = x.dim(0), d = x.dim(1);
    std::vector<double> out(n * d);
    auto inv_std = std::make_shared<std::vector<double>>(n);
    for (std::size_t i = 0; i < n; ++i) {
        double mean = 0.0;
        for (std::size_t j = 0; j < d; ++j) mean += x.at(i * d + j);
        mean /= static_cast<double>(d);
        double var = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            const double c = x.at(i * d + j) - mean;
            var += c * c;
        }
        var /= static_cast<double>(d);
        const double is = 1.0 / std::sqrt(var + eps);
        (*inv_std)[i] = is;
        for (std::size_t j = 0; j < d; ++j) out[i * d + j] = (x.at(i * d + j) - mean) * is;
    }
    return make_op_result({n, d}, std::move(out), {x}, [n, d, inv_std](TensorNode& self) {
        for (std::size_t i = 0; i < n; ++i) {
            double g_mean = 0.0, gy_dot = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                g_mean += self.grad[i * d + j];
                gy_dot += self.grad[i * d + j] * self.data[i * d + j];
            }
            g_mean /= static_cast<double>(d);
            gy_dot /= static_cast<double>(d);
            const double is = (*inv_std)[i];
            for (std::size_t j = 0; j < d; ++j) {
                const double y = self.data[i * d + j];
                accum(self.parents[0], i * d + j, is * (self.grad[i * d + j] - g_mean - y * gy_dot));
            }
        }
    });
}

// -------------------------------------------------- stochastic / similarity

DropoutResult dropout(const Tensor& x, double rate, std::uint64_t seed, bool training) {
    if (rate < 0.0 || rate >= 1.0) {
        throw std::domain_error("dropout: rate " + std::to_string(rate) + " outside [0, 1)");
    }
    std::vector<double> mask(x.numel(), 1.0);
    if (training && rate > 0.0) {
        Rng rng(seed);
        for (auto& m : mask) m = rng.uniform01() < rate ? 0.0 : 1.0;
    }
    const double inv_keep = training ? 1.0 / (1.0 - rate) : 1.0;
    std::vector<double> out(x.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.at(i) * mask[i] * inv_keep;
    auto saved = std::make_shared<std::vector<double>>(mask);
    Tensor value = make_op_result(x.shape(), std::move(out), {x}, [saved, inv_keep](TensorNode& self) {
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            accum(self.parents[0], i, self.grad[i] * (*saved)[i] * inv_keep);
    });
    return {std::move(value), std::move(mask)};
}

Tensor cosine_sim(const Tensor& a, const Tensor& b) {
    if (a.rank() != 1 || b.rank() != 1 || a.dim(0) != b.dim(0)) {
        throw dimension_error("cosine_sim: shapes " + shape_str(a.shape()) + " vs " +
                              shape_str(b.shape()));
    }
    const std::size_t d = a.dim(0);
    double dot = 0.0, na2 = 0.0, nb2 = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        dot += a.at(i) * b.at(i);
        na2 += a.at(i) * a.at(i);
        nb2 += b.at(i) * b.at(i);
    }
    if (na2 == 0.0 || nb2 == 0.0) {
        throw std::domain_error("cosine_sim: zero-norm input (collapsed representation)");
    }
    const double na = std::sqrt(na2), nb = std::sqrt(nb2);
    const double s = dot / (na * nb);
    return make_op_result({1}, {s}, {a, b}, [d, na, nb, s](TensorNode& self) {
        const double g = self.grad[0];
        const auto& av = self.parents[0]->data;
        const auto& bv = self.parents[1]->data;
        for (std::size_t i = 0; i < d; ++i) {
            accum(self.parents[0], i, g * (bv[i] / (na * nb) - s * av[i] / (na * na)));
            accum(self.parents[1], i, g * (av[i] / (na * nb) - s * bv[i] / (nb * nb)));
        }
    });
}

Tensor conv_maxpool(const Tensor& x, const std::vector<std::size_t>& windows,
                    const std::vector<Tensor>& kernels, const std::vector<Tensor>& biases) {
    require_matrix(x, "conv_maxpool");
    if (windows.size() != kernels.size() || windows.size() != biases.size()) {
        throw dimension_error("conv_maxpool: windows/kernels/biases counts disagree");
    }
    const std::size_t n = x.dim(0), d = x.dim(1);
    std::vector<Tensor> pooled;
    std::vector<std::size_t> order(windows.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return windows[a] < windows[b]; });
    for (const std::size_t k : order) {
        const std::size_t w = windows[k];
        if (w > n) {
            throw std::domain_error("conv_maxpool: sequence of length " + std::to_string(n) +
                                    " shorter than window " + std::to_string(w));
        }
        if (kernels[k].rank() != 2 || kernels[k].dim(0) != w * d) {
            throw dimension_error("conv_maxpool: kernel " + shape_str(kernels[k].shape()) +
                                  " does not match window " + std::to_string(w) + " over " +
                                  shape_str(x.shape()));
        }
        Tensor patches = im2col(x, w);
        Tensor conv = affine(patches, kernels[k], biases[k]);
        pooled.push_back(max_over_rows(conv));
    }
    return concat_vec(pooled);
}

// ----------------------------------------------------------------- backward

void backward(const Tensor& loss) {
    if (!loss.defined() || loss.numel() != 1) {
        throw dimension_error("backward: loss must be a scalar tensor");
    }
    auto root = loss.node();
    if (!root->requires_grad) return;  // constant loss: nothing reachable

    // Iterative post-order DFS; visit each node once.
    std::vector<TensorNode*> order;
    std::unordered_set<TensorNode*> seen;
    std::vector<std::pair<TensorNode*, std::size_t>> stack;
    stack.emplace_back(root.get(), 0);
    seen.insert(root.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            TensorNode* p = node->parents[next++].get();
            if (p->requires_grad && !seen.count(p)) {
                seen.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    // Interior buffers are per-call scratch; only leaf grads accumulate
    // across repeated calls.
    for (TensorNode* node : order) {
        if (node->backward_fn) node->grad.assign(node->data.size(), 0.0);
    }
    root->ensure_grad();
    root->grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        TensorNode* node = *it;
        if (node->backward_fn) {
            node->ensure_grad();
            node->backward_fn(*node);
        }
    }
}

}  // namespace sun
