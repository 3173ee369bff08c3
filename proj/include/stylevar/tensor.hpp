#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "stylevar/common.hpp"
#include "stylevar/rng.hpp"

namespace stylevar {

struct TensorNode {
    std::vector<int> shape;
    std::vector<real> data;
    std::vector<real> grad;  // empty until touched by backward
    bool requires_grad = false;
    std::vector<std::shared_ptr<TensorNode>> parents;
    std::function<void()> backward_fn;

    std::int64_t numel() const {
        std::int64_t n = 1;
        for (int d : shape) n *= d;
        return n;
    }
    void ensure_grad() {
        if (grad.empty()) grad.assign(data.size(), real(0));
    }
};

class Graph;

namespace detail {
inline Graph*& current_graph() {
    thread_local Graph* g = nullptr;
    return g;
}
}  // namespace detail

// Dynamic tape: ops append in execution order, so reverse iteration is a
// reverse topological order and visits each node exactly once.
class Graph {
public:
    void record(std::shared_ptr<TensorNode> n) { order_.push_back(std::move(n)); }

    void backward_node(const std::shared_ptr<TensorNode>& loss, real seed = real(1)) {
        require(loss != nullptr, "backward: empty tensor");
        require(loss->numel() == 1, "backward: loss must be scalar, got shape ", shape_str(loss->shape));
        require(!consumed_, "backward: graph already consumed; reset explicitly");
        require(std::isfinite(loss->data[0]), "backward: non-finite loss value ", loss->data[0]);
        loss->ensure_grad();
        loss->grad[0] += seed;
        for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
            TensorNode& n = **it;
            if (n.backward_fn && !n.grad.empty()) n.backward_fn();
        }
        consumed_ = true;
    }

    std::size_t size() const { return order_.size(); }
    bool consumed() const { return consumed_; }

    void clear() {
        order_.clear();
        consumed_ = false;
    }

private:
    std::vector<std::shared_ptr<TensorNode>> order_;
    bool consumed_ = false;
};

// Makes `g` the recording target for the current thread while in scope.
class GraphScope {
public:
    explicit GraphScope(Graph& g) : prev_(detail::current_graph()) { detail::current_graph() = &g; }
    ~GraphScope() { detail::current_graph() = prev_; }
    GraphScope(const GraphScope&) = delete;
    GraphScope& operator=(const GraphScope&) = delete;

private:
    Graph* prev_;
};

class NoGradScope {
public:
    NoGradScope() : prev_(detail::current_graph()) { detail::current_graph() = nullptr; }
    ~NoGradScope() { detail::current_graph() = prev_; }
    NoGradScope(const NoGradScope&) = delete;
    NoGradScope& operator=(const NoGradScope&) = delete;

private:
    Graph* prev_;
};

class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<TensorNode> n) : n_(std::move(n)) {}

    static Tensor zeros(std::vector<int> shape, bool requires_grad = false) {
        auto n = std::make_shared<TensorNode>();
        std::int64_t count = 1;
        for (int d : shape) {
            require(d >= 0, "tensor dim must be non-negative, got ", d);
            count *= d;
        }
        n->shape = std::move(shape);
        n->data.assign(static_cast<std::size_t>(count), real(0));
        n->requires_grad = requires_grad;
        return Tensor(n);
    }

    static Tensor from(std::vector<int> shape, std::vector<real> data, bool requires_grad = false) {
        auto n = std::make_shared<TensorNode>();
        std::int64_t count = 1;
        for (int d : shape) count *= d;
        require(static_cast<std::int64_t>(data.size()) == count,
                "tensor data length ", data.size(), " does not match shape ", shape_str(shape));
        n->shape = std::move(shape);
        n->data = std::move(data);
        n->requires_grad = requires_grad;
        return Tensor(n);
    }

    static Tensor scalar(real v) { return from({1}, {v}); }

    static Tensor randn(std::vector<int> shape, Rng& rng, real stddev = real(1),
                        bool requires_grad = false) {
        Tensor t = zeros(std::move(shape), requires_grad);
        for (real& x : t.node()->data) x = static_cast<real>(rng.next_normal()) * stddev;
        return t;
    }

    bool defined() const { return n_ != nullptr; }
    const std::vector<int>& shape() const { return n_->shape; }
    int dim(int i) const { return n_->shape[static_cast<std::size_t>(i)]; }
    int ndim() const { return static_cast<int>(n_->shape.size()); }
    std::int64_t numel() const { return n_->numel(); }
    bool requires_grad() const { return n_ && n_->requires_grad; }

    const std::vector<real>& data() const { return n_->data; }
    std::vector<real>& mutable_data() { return n_->data; }
    const std::vector<real>& grad() const { return n_->grad; }
    std::vector<real>& mutable_grad() { return n_->grad; }
    bool has_grad() const { return !n_->grad.empty(); }
    void zero_grad() { n_->grad.clear(); }

    real item() const {
        require(n_ && n_->numel() == 1, "item(): tensor is not scalar");
        return n_->data[0];
    }
    real at(int i, int j) const { return n_->data[static_cast<std::size_t>(i) * dim(1) + j]; }

    const std::shared_ptr<TensorNode>& node() const { return n_; }

    // Detached copy of the values (no graph history).
    Tensor detach() const { return from(n_->shape, n_->data); }

private:
    std::shared_ptr<TensorNode> n_;
};

inline void backward(Graph& g, const Tensor& loss, real seed = real(1)) {
    g.backward_node(loss.node(), seed);
}

// ---------------------------------------------------------------------------
// op plumbing

namespace detail {

// Creates the output node and wires backward recording. `bw` receives the
// finished output node; parents are captured by the caller's closure.
// Exposed so tests can build deliberately broken primitives.
inline Tensor make_op(std::vector<int> shape, std::vector<real> data,
                      const std::vector<Tensor>& parents,
                      std::function<void(TensorNode&)> bw) {
    Tensor out = Tensor::from(std::move(shape), std::move(data));
    Graph* g = current_graph();
    bool need = false;
    if (g) {
        for (const Tensor& p : parents) {
            if (p.requires_grad()) {
                need = true;
                break;
            }
        }
    }
    if (need) {
        auto n = out.node();
        n->requires_grad = true;
        for (const Tensor& p : parents) n->parents.push_back(p.node());
        TensorNode* raw = n.get();
        n->backward_fn = [raw, fn = std::move(bw)]() { fn(*raw); };
        g->record(n);
    }
    return out;
}

inline void check_finite_input(const char* op, const Tensor& t) {
    if (finite_checks() && !all_finite(t.data())) {
        fail(op, ": non-finite input past check barrier");
    }
}

inline void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    require(a.shape() == b.shape(), op, ": shape mismatch ", shape_str(a.shape()), " vs ",
            shape_str(b.shape()));
}

// (rows, cols) view of a 1-D or 2-D tensor; softmax/layernorm/attention treat
// the last dim as the feature axis.
inline std::pair<int, int> rows_cols(const Tensor& t) {
    if (t.ndim() == 1) return {1, t.dim(0)};
    require(t.ndim() == 2, "expected 1-D or 2-D tensor, got ", shape_str(t.shape()));
    return {t.dim(0), t.dim(1)};
}

}  // namespace detail

// ---------------------------------------------------------------------------
// primitives

inline Tensor add(const Tensor& a, const Tensor& b) {
    // same-shape add, or (n,d) + (d) row-broadcast bias add
    if (a.shape() == b.shape()) {
        std::vector<real> out(a.data());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.data()[i];
        auto an = a.node(), bn = b.node();
        return detail::make_op(a.shape(), std::move(out), {a, b}, [an, bn](TensorNode& o) {
            if (an->requires_grad) {
                an->ensure_grad();
                for (std::size_t i = 0; i < o.grad.size(); ++i) an->grad[i] += o.grad[i];
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                for (std::size_t i = 0; i < o.grad.size(); ++i) bn->grad[i] += o.grad[i];
            }
        });
    }
    require(a.ndim() == 2 && b.ndim() == 1 && a.dim(1) == b.dim(0),
            "add: shape mismatch ", shape_str(a.shape()), " vs ", shape_str(b.shape()));
    int n = a.dim(0), d = a.dim(1);
    std::vector<real> out(a.data());
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) out[static_cast<std::size_t>(i) * d + j] += b.data()[j];
    auto an = a.node(), bn = b.node();
    return detail::make_op(a.shape(), std::move(out), {a, b}, [an, bn, n, d](TensorNode& o) {
        if (an->requires_grad) {
            an->ensure_grad();
            for (std::size_t i = 0; i < o.grad.size(); ++i) an->grad[i] += o.grad[i];
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < d; ++j)
                    bn->grad[j] += o.grad[static_cast<std::size_t>(i) * d + j];
        }
    });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
    detail::check_same_shape("sub", a, b);
    std::vector<real> out(a.data());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.data()[i];
    auto an = a.node(), bn = b.node();
    return detail::make_op(a.shape(), std::move(out), {a, b}, [an, bn](TensorNode& o) {
        if (an->requires_grad) {
            an->ensure_grad();
            for (std::size_t i = 0; i < o.grad.size(); ++i) an->grad[i] += o.grad[i];
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            for (std::size_t i = 0; i < o.grad.size(); ++i) bn->grad[i] -= o.grad[i];
        }
    });
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
    detail::check_same_shape("mul", a, b);
    std::vector<real> out(a.data());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.data()[i];
    auto an = a.node(), bn = b.node();
    return detail::make_op(a.shape(), std::move(out), {a, b}, [an, bn](TensorNode& o) {
        if (an->requires_grad) {
            an->ensure_grad();
            for (std::size_t i = 0; i < o.grad.size(); ++i) an->grad[i] += o.grad[i] * bn->data[i];
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            for (std::size_t i = 0; i < o.grad.size(); ++i) bn->grad[i] += o.grad[i] * an->data[i];
        }
    });
}

inline Tensor scalar_mul(const Tensor& a, real s) {
    std::vector<real> out(a.data());
    for (real& x : out) x *= s;
    auto an = a.node();
    return detail::make_op(a.shape(), std::move(out), {a}, [an, s](TensorNode& o) {
        an->ensure_grad();
        for (std::size_t i = 0; i < o.grad.size(); ++i) an->grad[i] += o.grad[i] * s;
    });
}

inline Tensor neg(const Tensor& a) { return scalar_mul(a, real(-1)); }

inline Tensor matmul(const Tensor& a, const Tensor& b) {
    require(a.ndim() == 2 && b.ndim() == 2 && a.dim(1) == b.dim(0),
            "matmul: shape mismatch ", shape_str(a.shape()), " x ", shape_str(b.shape()));
    int n = a.dim(0), k = a.dim(1), m = b.dim(1);
    std::vector<real> out(static_cast<std::size_t>(n) * m, real(0));
    const real* A = a.data().data();
    const real* B = b.data().data();
    for (int i = 0; i < n; ++i) {
        for (int p = 0; p < k; ++p) {
            real av = A[static_cast<std::size_t>(i) * k + p];
            if (av == real(0)) continue;
            real* orow = out.data() + static_cast<std::size_t>(i) * m;
            const real* brow = B + static_cast<std::size_t>(p) * m;
            for (int j = 0; j < m; ++j) orow[j] += av * brow[j];
        }
    }
    auto an = a.node(), bn = b.node();
    return detail::make_op({n, m}, std::move(out), {a, b}, [an, bn, n, k, m](TensorNode& o) {
        if (an->requires_grad) {
            an->ensure_grad();  // dA = dY * B^T
            for (int i = 0; i < n; ++i)
                for (int p = 0; p < k; ++p) {
                    real acc = 0;
                    const real* grow = o.grad.data() + static_cast<std::size_t>(i) * m;
                    const real* brow = bn->data.data() + static_cast<std::size_t>(p) * m;
                    for (int j = 0; j < m; ++j) acc += grow[j] * brow[j];
                    an->grad[static_cast<std::size_t>(i) * k + p] += acc;
                }
        }
        if (bn->requires_grad) {
            bn->ensure_grad();  // dB = A^T * dY
            for (int i = 0; i < n; ++i) {
                const real* arow = an->data.data() + static_cast<std::size_t>(i) * k;
                const real* grow = o.grad.data() + static_cast<std::size_t>(i) * m;
                for (int p = 0; p < k; ++p) {
                    real av = arow[p];
                    if (av == real(0)) continue;
                    real* brow = bn->grad.data() + static_cast<std::size_t>(p) * m;
                    for (int j = 0; j < m; ++j) brow[j] += av * grow[j];
                }
            }
        }
    });
}

inline Tensor transpose(const Tensor& a) {
    require(a.ndim() == 2, "transpose: expected 2-D, got ", shape_str(a.shape()));
    int n = a.dim(0), m = a.dim(1);
    std::vector<real> out(a.data().size());
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j)
            out[static_cast<std::size_t>(j) * n + i] = a.data()[static_cast<std::size_t>(i) * m + j];
    auto an = a.node();
    return detail::make_op({m, n}, std::move(out), {a}, [an, n, m](TensorNode& o) {
        an->ensure_grad();
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < m; ++j)
                an->grad[static_cast<std::size_t>(i) * m + j] +=
                    o.grad[static_cast<std::size_t>(j) * n + i];
    });
}

inline Tensor softmax(const Tensor& a) {
    detail::check_finite_input("softmax", a);
    auto [n, m] = detail::rows_cols(a);
    require(m > 0, "softmax: empty rows");
    std::vector<real> out(a.data().size());
    for (int i = 0; i < n; ++i) {
        const real* x = a.data().data() + static_cast<std::size_t>(i) * m;
        real* y = out.data() + static_cast<std::size_t>(i) * m;
        real mx = x[0];
        for (int j = 1; j < m; ++j) mx = std::max(mx, x[j]);
        real sum = 0;
        for (int j = 0; j < m; ++j) {
            y[j] = std::exp(x[j] - mx);
            sum += y[j];
        }
        for (int j = 0; j < m; ++j) y[j] /= sum;
    }
    auto an = a.node();
    return detail::make_op(a.shape(), std::move(out), {a}, [an, n = n, m = m](TensorNode& o) {
        an->ensure_grad();
        for (int i = 0; i < n; ++i) {
            const real* y = o.data.data() + static_cast<std::size_t>(i) * m;
            const real* gy = o.grad.data() + static_cast<std::size_t>(i) * m;
            real dot = 0;
            for (int j = 0; j < m; ++j) dot += gy[j] * y[j];
            real* gx = an->grad.data() + static_cast<std::size_t>(i) * m;
            for (int j = 0; j < m; ++j) gx[j] += y[j] * (gy[j] - dot);
        }
    });
}

inline Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                         real eps = real(1e-5)) {
    detail::check_finite_input("layer_norm", x);
    auto [n, d] = detail::rows_cols(x);
    require(gamma.numel() == d && beta.numel() == d, "layer_norm: gamma/beta size mismatch, dim ",
            d);
    std::vector<real> out(x.data().size());
    std::vector<real> xhat(x.data().size());
    std::vector<real> inv_std(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const real* row = x.data().data() + static_cast<std::size_t>(i) * d;
        real mean = 0;
        for (int j = 0; j < d; ++j) mean += row[j];
        mean /= d;
        real var = 0;
        for (int j = 0; j < d; ++j) {
            real c = row[j] - mean;
            var += c * c;
        }
        var /= d;
        real is = real(1) / std::sqrt(var + eps);
        inv_std[static_cast<std::size_t>(i)] = is;
        for (int j = 0; j < d; ++j) {
            std::size_t off = static_cast<std::size_t>(i) * d + j;
            xhat[off] = (row[j] - mean) * is;
            out[off] = gamma.data()[j] * xhat[off] + beta.data()[j];
        }
    }
    auto xn = x.node(), gn = gamma.node(), bn = beta.node();
    return detail::make_op(
        x.shape(), std::move(out), {x, gamma, beta},
        [xn, gn, bn, n = n, d = d, xhat = std::move(xhat), inv_std = std::move(inv_std)](TensorNode& o) {
            for (int i = 0; i < n; ++i) {
                const real* gy = o.grad.data() + static_cast<std::size_t>(i) * d;
                const real* xh = xhat.data() + static_cast<std::size_t>(i) * d;
                if (bn->requires_grad) {
                    bn->ensure_grad();
                    for (int j = 0; j < d; ++j) bn->grad[j] += gy[j];
                }
                if (gn->requires_grad) {
                    gn->ensure_grad();
                    for (int j = 0; j < d; ++j) gn->grad[j] += gy[j] * xh[j];
                }
                if (xn->requires_grad) {
                    xn->ensure_grad();
                    real mean_g = 0, mean_gx = 0;
                    for (int j = 0; j < d; ++j) {
                        real dxh = gy[j] * gn->data[j];
                        mean_g += dxh;
                        mean_gx += dxh * xh[j];
                    }
                    mean_g /= d;
                    mean_gx /= d;
                    real is = inv_std[static_cast<std::size_t>(i)];
                    real* gx = xn->grad.data() + static_cast<std::size_t>(i) * d;
                    for (int j = 0; j < d; ++j) {
                        real dxh = gy[j] * gn->data[j];
                        gx[j] += is * (dxh - mean_g - xh[j] * mean_gx);
                    }
                }
            }
        });
}

inline Tensor gelu(const Tensor& a) {
    static constexpr real inv_sqrt2 = real(0.70710678118654752440);
    static constexpr real inv_sqrt_2pi = real(0.39894228040143267794);
    std::vector<real> out(a.data().size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        real x = a.data()[i];
        out[i] = real(0.5) * x * (real(1) + std::erf(x * inv_sqrt2));
    }
    auto an = a.node();
    return detail::make_op(a.shape(), std::move(out), {a}, [an](TensorNode& o) {
        an->ensure_grad();
        for (std::size_t i = 0; i < o.grad.size(); ++i) {
            real x = an->data[i];
            real cdf = real(0.5) * (real(1) + std::erf(x * inv_sqrt2));
            real pdf = inv_sqrt_2pi * std::exp(real(-0.5) * x * x);
            an->grad[i] += o.grad[i] * (cdf + x * pdf);
        }
    });
}

inline Tensor exp(const Tensor& a) {
    std::vector<real> out(a.data().size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(a.data()[i]);
    auto an = a.node();
    return detail::make_op(a.shape(), std::move(out), {a}, [an](TensorNode& o) {
        an->ensure_grad();
        for (std::size_t i = 0; i < o.grad.size(); ++i) an->grad[i] += o.grad[i] * o.data[i];
    });
}

inline Tensor clampt(const Tensor& a, real lo, real hi) {
    std::vector<real> out(a.data().size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::clamp(a.data()[i], lo, hi);
    auto an = a.node();
    return detail::make_op(a.shape(), std::move(out), {a}, [an, lo, hi](TensorNode& o) {
        an->ensure_grad();
        for (std::size_t i = 0; i < o.grad.size(); ++i) {
            real x = an->data[i];
            if (x >= lo && x <= hi) an->grad[i] += o.grad[i];
        }
    });
}

// Elementwise min; ties route gradient to the first argument.
inline Tensor minimum(const Tensor& a, const Tensor& b) {
    detail::check_same_shape("minimum", a, b);
    std::vector<real> out(a.data().size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::min(a.data()[i], b.data()[i]);
    auto an = a.node(), bn = b.node();
    return detail::make_op(a.shape(), std::move(out), {a, b}, [an, bn](TensorNode& o) {
        for (std::size_t i = 0; i < o.grad.size(); ++i) {
            bool first = an->data[i] <= bn->data[i];
            if (first && an->requires_grad) {
                an->ensure_grad();
                an->grad[i] += o.grad[i];
            } else if (!first && bn->requires_grad) {
                bn->ensure_grad();
                bn->grad[i] += o.grad[i];
            }
        }
    });
}

inline Tensor embedding(const Tensor& table, const std::vector<int>& idx) {
    require(table.ndim() == 2, "embedding: table must be 2-D, got ", shape_str(table.shape()));
    int v = table.dim(0), d = table.dim(1);
    std::vector<real> out(idx.size() * static_cast<std::size_t>(d));
    for (std::size_t i = 0; i < idx.size(); ++i) {
        require(idx[i] >= 0 && idx[i] < v, "embedding: index ", idx[i], " out of range [0,", v, ")");
        std::copy_n(table.data().data() + static_cast<std::size_t>(idx[i]) * d, d,
                    out.data() + i * static_cast<std::size_t>(d));
    }
    auto tn = table.node();
    return detail::make_op({static_cast<int>(idx.size()), d}, std::move(out), {table},
                           [tn, idx, d](TensorNode& o) {
                               tn->ensure_grad();
                               for (std::size_t i = 0; i < idx.size(); ++i) {
                                   real* dst = tn->grad.data() + static_cast<std::size_t>(idx[i]) * d;
                                   const real* src = o.grad.data() + i * static_cast<std::size_t>(d);
                                   for (int j = 0; j < d; ++j) dst[j] += src[j];
                               }
                           });
}

// Flat gather; index -1 reads as 0 (zero padding for im2col-style patches).
inline Tensor gather(const Tensor& x, const std::vector<int>& idx) {
    std::int64_t n = x.numel();
    std::vector<real> out(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        require(idx[i] >= -1 && idx[i] < n, "gather: index ", idx[i], " out of range [-1,", n, ")");
        out[i] = idx[i] < 0 ? real(0) : x.data()[static_cast<std::size_t>(idx[i])];
    }
    auto xn = x.node();
    return detail::make_op({static_cast<int>(idx.size())}, std::move(out), {x},
                           [xn, idx](TensorNode& o) {
                               xn->ensure_grad();
                               for (std::size_t i = 0; i < idx.size(); ++i) {
                                   if (idx[i] >= 0)
                                       xn->grad[static_cast<std::size_t>(idx[i])] += o.grad[i];
                               }
                           });
}

inline Tensor concat_rows(const std::vector<Tensor>& parts) {
    require(!parts.empty(), "concat_rows: no inputs");
    int cols = parts[0].ndim() == 2 ? parts[0].dim(1) : parts[0].dim(0);
    int rows = 0;
    for (const Tensor& p : parts) {
        auto [r, c] = detail::rows_cols(p);
        require(c == cols, "concat_rows: column mismatch ", c, " vs ", cols);
        rows += r;
    }
    std::vector<real> out;
    out.reserve(static_cast<std::size_t>(rows) * cols);
    for (const Tensor& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
    std::vector<std::shared_ptr<TensorNode>> nodes;
    for (const Tensor& p : parts) nodes.push_back(p.node());
    return detail::make_op({rows, cols}, std::move(out), parts, [nodes](TensorNode& o) {
        std::size_t off = 0;
        for (const auto& pn : nodes) {
            std::size_t len = pn->data.size();
            if (pn->requires_grad) {
                pn->ensure_grad();
                for (std::size_t i = 0; i < len; ++i) pn->grad[i] += o.grad[off + i];
            }
            off += len;
        }
    });
}

inline Tensor concat_cols(const std::vector<Tensor>& parts) {
    require(!parts.empty(), "concat_cols: no inputs");
    int rows = parts[0].dim(0);
    int cols = 0;
    for (const Tensor& p : parts) {
        require(p.ndim() == 2 && p.dim(0) == rows, "concat_cols: row mismatch");
        cols += p.dim(1);
    }
    std::vector<real> out(static_cast<std::size_t>(rows) * cols);
    int coff = 0;
    for (const Tensor& p : parts) {
        int pc = p.dim(1);
        for (int i = 0; i < rows; ++i)
            std::copy_n(p.data().data() + static_cast<std::size_t>(i) * pc, pc,
                        out.data() + static_cast<std::size_t>(i) * cols + coff);
        coff += pc;
    }
    std::vector<std::shared_ptr<TensorNode>> nodes;
    std::vector<int> widths;
    for (const Tensor& p : parts) {
        nodes.push_back(p.node());
        widths.push_back(p.dim(1));
    }
    return detail::make_op({rows, cols}, std::move(out), parts,
                           [nodes, widths, rows, cols](TensorNode& o) {
                               int coff = 0;
                               for (std::size_t pi = 0; pi < nodes.size(); ++pi) {
                                   int pc = widths[pi];
                                   if (nodes[pi]->requires_grad) {
                                       nodes[pi]->ensure_grad();
                                       for (int i = 0; i < rows; ++i)
                                           for (int j = 0; j < pc; ++j)
                                               nodes[pi]->grad[static_cast<std::size_t>(i) * pc + j] +=
                                                   o.grad[static_cast<std::size_t>(i) * cols + coff + j];
                                   }
                                   coff += pc;
                               }
                           });
}

inline Tensor slice_rows(const Tensor& x, int r0, int r1) {
    auto [n, m] = detail::rows_cols(x);
    require(0 <= r0 && r0 <= r1 && r1 <= n, "slice_rows: bad range [", r0, ",", r1, ") of ", n);
    std::vector<real> out(x.data().begin() + static_cast<std::size_t>(r0) * m,
                          x.data().begin() + static_cast<std::size_t>(r1) * m);
    auto xn = x.node();
    return detail::make_op({r1 - r0, m}, std::move(out), {x}, [xn, r0, m](TensorNode& o) {
        xn->ensure_grad();
        std::size_t base = static_cast<std::size_t>(r0) * m;
        for (std::size_t i = 0; i < o.grad.size(); ++i) xn->grad[base + i] += o.grad[i];
    });
}

inline Tensor slice_cols(const Tensor& x, int c0, int c1) {
    require(x.ndim() == 2, "slice_cols: expected 2-D");
    int n = x.dim(0), m = x.dim(1);
    require(0 <= c0 && c0 <= c1 && c1 <= m, "slice_cols: bad range [", c0, ",", c1, ") of ", m);
    int w = c1 - c0;
    std::vector<real> out(static_cast<std::size_t>(n) * w);
    for (int i = 0; i < n; ++i)
        std::copy_n(x.data().data() + static_cast<std::size_t>(i) * m + c0, w,
                    out.data() + static_cast<std::size_t>(i) * w);
    auto xn = x.node();
    return detail::make_op({n, w}, std::move(out), {x}, [xn, c0, n, m, w](TensorNode& o) {
        xn->ensure_grad();
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < w; ++j)
                xn->grad[static_cast<std::size_t>(i) * m + c0 + j] +=
                    o.grad[static_cast<std::size_t>(i) * w + j];
    });
}

inline Tensor reshape(const Tensor& x, std::vector<int> shape) {
    std::int64_t count = 1;
    for (int d : shape) count *= d;
    require(count == x.numel(), "reshape: numel mismatch ", shape_str(x.shape()), " -> ",
            shape_str(shape));
    auto xn = x.node();
    return detail::make_op(std::move(shape), x.data(), {x}, [xn](TensorNode& o) {
        xn->ensure_grad();
        for (std::size_t i = 0; i < o.grad.size(); ++i) xn->grad[i] += o.grad[i];
    });
}

inline Tensor sum_all(const Tensor& x) {
    real s = std::accumulate(x.data().begin(), x.data().end(), real(0));
    auto xn = x.node();
    return detail::make_op({1}, {s}, {x}, [xn](TensorNode& o) {
        xn->ensure_grad();
        for (real& g : xn->grad) g += o.grad[0];
    });
}

inline Tensor mean_all(const Tensor& x) {
    require(x.numel() > 0, "mean_all: empty tensor");
    real s = std::accumulate(x.data().begin(), x.data().end(), real(0));
    real inv = real(1) / static_cast<real>(x.numel());
    auto xn = x.node();
    return detail::make_op({1}, {s * inv}, {x}, [xn, inv](TensorNode& o) {
        xn->ensure_grad();
        for (real& g : xn->grad) g += o.grad[0] * inv;
    });
}

namespace detail {
inline real logsumexp_row(const real* x, int m) {
    real mx = x[0];
    for (int j = 1; j < m; ++j) mx = std::max(mx, x[j]);
    real s = 0;
    for (int j = 0; j < m; ++j) s += std::exp(x[j] - mx);
    return mx + std::log(s);
}
}  // namespace detail

// Mean cross-entropy of rows of `logits` against integer targets.
inline Tensor cross_entropy(const Tensor& logits, const std::vector<int>& targets) {
    detail::check_finite_input("cross_entropy", logits);
    auto [n, v] = detail::rows_cols(logits);
    require(static_cast<int>(targets.size()) == n, "cross_entropy: ", targets.size(),
            " targets for ", n, " rows");
    real loss = 0;
    for (int i = 0; i < n; ++i) {
        require(targets[i] >= 0 && targets[i] < v, "cross_entropy: target ", targets[i],
                " out of range [0,", v, ")");
        const real* row = logits.data().data() + static_cast<std::size_t>(i) * v;
        loss += detail::logsumexp_row(row, v) - row[targets[i]];
    }
    loss /= n;
    auto ln = logits.node();
    return detail::make_op({1}, {loss}, {logits}, [ln, targets, n = n, v = v](TensorNode& o) {
        ln->ensure_grad();
        real g = o.grad[0] / n;
        for (int i = 0; i < n; ++i) {
            const real* row = ln->data.data() + static_cast<std::size_t>(i) * v;
            real lse = detail::logsumexp_row(row, v);
            real* gx = ln->grad.data() + static_cast<std::size_t>(i) * v;
            for (int j = 0; j < v; ++j) gx[j] += g * std::exp(row[j] - lse);
            gx[targets[i]] -= g;
        }
    });
}

// Per-row log softmax evaluated at the target index: log p(target_i | row_i).
inline Tensor gather_log_softmax(const Tensor& logits, const std::vector<int>& targets) {
    detail::check_finite_input("gather_log_softmax", logits);
    auto [n, v] = detail::rows_cols(logits);
    require(static_cast<int>(targets.size()) == n, "gather_log_softmax: ", targets.size(),
            " targets for ", n, " rows");
    std::vector<real> out(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        require(targets[i] >= 0 && targets[i] < v, "gather_log_softmax: target ", targets[i],
                " out of range [0,", v, ")");
        const real* row = logits.data().data() + static_cast<std::size_t>(i) * v;
        out[static_cast<std::size_t>(i)] = row[targets[i]] - detail::logsumexp_row(row, v);
    }
    auto ln = logits.node();
    return detail::make_op({n}, std::move(out), {logits}, [ln, targets, n = n, v = v](TensorNode& o) {
        ln->ensure_grad();
        for (int i = 0; i < n; ++i) {
            real g = o.grad[static_cast<std::size_t>(i)];
            if (g == real(0)) continue;
            const real* row = ln->data.data() + static_cast<std::size_t>(i) * v;
            real lse = detail::logsumexp_row(row, v);
            real* gx = ln->grad.data() + static_cast<std::size_t>(i) * v;
            for (int j = 0; j < v; ++j) gx[j] -= g * std::exp(row[j] - lse);
            gx[targets[i]] += g;
        }
    });
}

}  // namespace stylevar
