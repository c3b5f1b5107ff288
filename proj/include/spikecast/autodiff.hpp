// SPDX-License-Identifier: Apache-2.0
#pragma once

// Reverse-mode tape over dense double tensors. Ops are coarse (whole-tensor)
// so the per-node overhead stays small at desk scale. Building an expression
// IS the forward pass; backward() walks the tape once in reverse order.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "spikecast/rng.hpp"
#include "spikecast/tensor.hpp"

namespace spikecast::ad {

struct Value {
    std::int32_t id = -1;
    bool valid() const { return id >= 0; }
};

class Graph {
  public:
    using BackwardFn = std::function<void(Graph&, std::int32_t)>;

    struct Node {
        const char* op;
        std::vector<std::int32_t> in;
        Tensor value;
        Tensor grad;
        BackwardFn backward;
        bool needs_grad = false;
    };

    Value input(Tensor t) {
        bool rg = t.requires_grad;
        return push("input", {}, std::move(t), nullptr, rg);
    }

    Value constant(Tensor t) {
        t.requires_grad = false;
        return push("const", {}, std::move(t), nullptr, false);
    }

    Value constant(double v) { return constant(Tensor::scalar(v)); }

    /// Register an operation node with a caller-supplied backward rule. This
    /// is the extension point the firing nonlinearity uses; tests use it to
    /// inject deliberately wrong partials.
    Value make(const char* op, std::vector<std::int32_t> in, Tensor out, BackwardFn bw) {
        bool needs = false;
        for (std::int32_t i : in) needs = needs || node(i).needs_grad;
        if (!out.all_finite()) {
            throw std::runtime_error(std::string("non-finite forward output in op '") + op + "'");
        }
        return push(op, std::move(in), std::move(out), needs ? std::move(bw) : nullptr, needs);
    }

    const Node& node(std::int32_t id) const { return nodes_[static_cast<std::size_t>(id)]; }
    Node& node(std::int32_t id) { return nodes_[static_cast<std::size_t>(id)]; }

    const Tensor& value(Value v) const { return node(check(v)).value; }
    const Tensor& val(std::int32_t id) const { return node(id).value; }

    /// Gradient of the last backward() seed with respect to `v`. Zero tensor
    /// if no gradient flowed (e.g. constants).
    const Tensor& grad(Value v) const {
        const Node& n = node(check(v));
        if (n.grad.numel() == 0) {
            zero_cache_ = Tensor::zeros(n.value.shape);
            return zero_cache_;
        }
        return n.grad;
    }

    /// Mutable grad accumulator; nullptr when the node does not need one.
    double* gptr(std::int32_t id) {
        Node& n = node(id);
        if (!n.needs_grad) return nullptr;
        if (n.grad.numel() == 0) n.grad = Tensor::zeros(n.value.shape);
        return n.grad.data.data();
    }

    void backward(Value root) { backward(root, Tensor::full(value(root).shape, 1.0)); }

    /// Fresh reverse sweep: grads are reset, the seed is injected at `root`,
    /// and every node at or below `root` is visited exactly once in reverse
    /// insertion (= reverse topological) order.
    void backward(Value root, const Tensor& seed) {
        if (nodes_.empty()) throw std::logic_error("Graph::backward before any forward evaluation");
        std::int32_t r = check(root);
        if (!node(r).value.same_shape(seed)) {
            throw std::invalid_argument("Graph::backward: seed shape " + seed.shape_str() +
                                        " != output shape " + node(r).value.shape_str());
        }
        for (auto& n : nodes_) n.grad = Tensor();
        if (!node(r).needs_grad) return;
        node(r).grad = seed;
        for (std::int32_t id = r; id >= 0; --id) {
            Node& n = node(id);
            if (n.backward && n.grad.numel() != 0) n.backward(*this, id);
        }
    }

    void clear() { nodes_.clear(); }
    std::size_t node_count() const { return nodes_.size(); }
    bool evaluated() const { return !nodes_.empty(); }

  private:
    Value push(const char* op, std::vector<std::int32_t> in, Tensor t, BackwardFn bw, bool needs) {
        nodes_.push_back(Node{op, std::move(in), std::move(t), Tensor(), std::move(bw), needs});
        return Value{static_cast<std::int32_t>(nodes_.size() - 1)};
    }

    std::int32_t check(Value v) const {
        if (!v.valid() || static_cast<std::size_t>(v.id) >= nodes_.size()) {
            throw std::logic_error("Graph: invalid value handle");
        }
        return v.id;
    }

    std::vector<Node> nodes_;
    mutable Tensor zero_cache_;
};

namespace detail {

inline void require(bool cond, const char* op, const std::string& msg) {
    if (!cond) throw std::invalid_argument(std::string(op) + ": " + msg);
}

inline void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    require(a.same_shape(b), op, "shape mismatch " + a.shape_str() + " vs " + b.shape_str());
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise arithmetic
// ---------------------------------------------------------------------------

inline Value add(Graph& g, Value a, Value b) {
    const Tensor &ta = g.value(a), &tb = g.value(b);
    detail::require_same_shape("add", ta, tb);
    Tensor out = ta;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] += tb[i];
    return g.make("add", {a.id, b.id}, std::move(out), [](Graph& g, std::int32_t id) {
        const auto& n = g.node(id);
        double* ga = g.gptr(n.in[0]);
        double* gb = g.gptr(n.in[1]);
        for (std::size_t i = 0; i < n.grad.numel(); ++i) {
            if (ga) ga[i] += n.grad[i];
            if (gb) gb[i] += n.grad[i];
        }
    });
}

inline Value sub(Graph& g, Value a, Value b) {
    const Tensor &ta = g.value(a), &tb = g.value(b);
    detail::require_same_shape("sub", ta, tb);
    Tensor out = ta;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] -= tb[i];
    return g.make("sub", {a.id, b.id}, std::move(out), [](Graph& g, std::int32_t id) {
        const auto& n = g.node(id);
        double* ga = g.gptr(n.in[0]);
        double* gb = g.gptr(n.in[1]);
        for (std::size_t i = 0; i < n.grad.numel(); ++i) {
            if (ga) ga[i] += n.grad[i];
            if (gb) gb[i] -= n.grad[i];
        }
    });
}

inline Value mul(Graph& g, Value a, Value b) {
    const Tensor &ta = g.value(a), &tb = g.value(b);
    detail::require_same_shape("mul", ta, tb);
    Tensor out = ta;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= tb[i];
    return g.make("mul", {a.id, b.id}, std::move(out), [](Graph& g, std::int32_t id) {
        const auto& n = g.node(id);
        const Tensor &va = g.val(n.in[0]), &vb = g.val(n.in[1]);
        double* ga = g.gptr(n.in[0]);
        double* gb = g.gptr(n.in[1]);
        for (std::size_t i = 0; i < n.grad.numel(); ++i) {
            if (ga) ga[i] += n.grad[i] * vb[i];
            if (gb) gb[i] += n.grad[i] * va[i];
        }
    });
}

inline Value div(Graph& g, Value a, Value b) {
    const Tensor &ta = g.value(a), &tb = g.value(b);
    detail::require_same_shape("div", ta, tb);
    Tensor out = ta;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] /= tb[i];
    return g.make("div", {a.id, b.id}, std::move(out), [](Graph& g, std::int32_t id) {
        const auto& n = g.node(id);
        const Tensor &va = g.val(n.in[0]), &vb = g.val(n.in[1]);
        double* ga = g.gptr(n.in[0]);
        double* gb = g.gptr(n.in[1]);
        for (std::size_t i = 0; i < n.grad.numel(); ++i) {
            if (ga) ga[i] += n.grad[i] / vb[i];
            if (gb) gb[i] -= n.grad[i] * va[i] / (vb[i] * vb[i]);
        }
    });
}

inline Value scale(Graph& g, Value a, double c) {
    Tensor out = g.value(a);
    for (double& v : out.data) v *= c;
    return g.make("scale", {a.id}, std::move(out), [c](Graph& g, std::int32_t id) {
        const auto& n = g.node(id);
        if (double* ga = g.gptr(n.in[0])) {
            for (std::size_t i = 0; i < n.grad.numel(); ++i) ga[i] += c * n.grad[i];
        }
    });
}

inline Value add_const(Graph& g, Value a, double c) {
    Tensor out = g.value(a);
    for (double& v : out.data) v += c;
    return g.make("add_const", {a.id}, std::move(out), [](Graph& g, std::int32_t id) {
        const auto& n = g.node(id);
        if (double* ga = g.gptr(n.in[0])) {
            for (std::size_t i = 0; i < n.grad.numel(); ++i) ga[i] += n.grad[i];
        }
    });
}

inline Value neg(Graph& g, Value a) { return scale(g, a, -1.0); }

// ---------------------------------------------------------------------------
// Smooth nonlinearities
// ---------------------------------------------------------------------------

inline Value exp_(Graph& g, Value a) {
    Tensor out = g.value(a);
    for (double& v : out.data) v = std::exp(v);
    return g.make("exp", {a.id}, std::move(out), [](Graph& g, std::int32_t id) {
        const auto& n = g.node(id);
        if (double* ga = g.gptr(n.in[0])) {
            for (std::size_t i = 0; i < n.grad.numel(); ++i) ga[i] += n.grad[i] * n.value[i];
        }
    });
}

inline Value log_(Graph& g, Value a) {
    Tensor out = g.value(a);
    for (double& v : out.data) v = std::log(v);
    return g.make("log", {a.id}, std::move(out), [](Graph& g, std::int32_t id) {
        const auto& n = g.node(id);
        const Tensor& va = g.val(n.in[0]);
        if (double* ga = g.gptr(n.in[0])) {
            for (std::size_t i = 0; i < n.grad.numel(); ++i) ga[i] += n.grad[i] / va[i];
        }
    });
}

inline Value sqrt_(Graph& g, Value a) {
    Tensor out = g.value(a);
    for (double& v : out.data) v = std::sqrt(v);
    return g.make("sqrt", {a.id}, std::move(out), [](Graph& g, std::int32_t id) {
        const auto& n = g.node(id);
        if (double* ga = g.gptr(n.in[0])) {
            for (std::size_t i = 0; i < n.grad.numel(); ++i) {
                ga[i] += n.grad[i] * 0.5 / n.value[i];
            }
        }
    });
}

inline Value tanh_(Graph& g, Value a) {
    Tensor out = g.value(a);
    for (double& v : out.data) v = std::tanh(v);
    return g.make("tanh", {a.id}, std::move(out), [](Graph& g, std::int32_t id) {
        const auto& n = g.node(id);
        if (double* ga = g.gptr(n.in[0])) {
            for (std::size_t i = 0; i < n.grad.numel(); ++i) {
                ga[i] += n.grad[i] * (1.0 - n.value[i] * n.value[i]);
            }
        }
    });
}

inline Value sigmoid(Graph& g, Value a) {
    Tensor out = g.value(a);
    for (double& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
    return g.make("sigmoid", {a.id}, std::move(out), [](Graph& g, std::int32_t id) {
        const auto& n = g.node(id);
        if (double* ga = g.gptr(n.in[0])) {
            for (std::size_t i = 0; i < n.grad.numel(); ++i) {
                ga[i] += n.grad[i] * n.value[i] * (1.0 - n.value[i]);
            }
        }
    });
}

inline Value elu(Graph& g, Value a) {
    const Tensor& ta = g.value(a);
    Tensor out = ta;
    for (double& v : out.data) v = v > 0.0 ? v : std::expm1(v);
    return g.make("elu", {a.id}, std::move(out), [](Graph& g, std::int32_t id) {
        const auto& n = g.node(id);
        const Tensor& va = g.val(n.in[0]);
        if (double* ga = g.gptr(n.in[0])) {
            for (std::size_t i = 0; i < n.grad.numel(); ++i) {
                ga[i] += n.grad[i] * (va[i] > 0.0 ? 1.0 : n.value[i] + 1.0);
            }
        }
    });
}

inline Value leaky_relu(Graph& g, Value a, double alpha = 0.2) {
    const Tensor& ta = g.value(a);
    Tensor out = ta;
    for (double& v : out.data) v = v > 0.0 ? v : alpha * v;
    return g.make("leaky_relu", {a.id}, std::move(out), [alpha](Graph& g, std::int32_t id) {
        const auto& n = g.node(id);
        const Tensor& va = g.val(n.in[0]);
        if (double* ga = g.gptr(n.in[0])) {
            for (std::size_t i = 0; i < n.grad.numel(); ++i) {
                ga[i] += n.grad[i] * (va[i] > 0.0 ? 1.0 : alpha);
            }
        }
    });
}

// ---------------------------------------------------------------------------
// Linear algebra
// ---------------------------------------------------------------------------

inline Value matmul(Graph& g, Value a, Value b) {
    const Tensor &ta = g.value(a), &tb = g.value(b);
    detail::require(ta.rank() == 2 && tb.rank() == 2, "matmul", "operands must be rank 2");
    detail::require(ta.shape[1] == tb.shape[0], "matmul",
                    "inner extents differ: " + ta.shape_str() + " vs " + tb.shape_str());
    std::size_t m = ta.shape[0], k = ta.shape[1], n = tb.shape[1];
    Tensor out({m, n});
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            double aip = ta.data[i * k + p];
            if (aip == 0.0) continue;
            const double* brow = &tb.data[p * n];
            double* orow = &out.data[i * n];
            for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
        }
    }
    return g.make("matmul", {a.id, b.id}, std::move(out), [m, k, n](Graph& g, std::int32_t id) {
        const auto& node = g.node(id);
        const Tensor &va = g.val(node.in[0]), &vb = g.val(node.in[1]);
        const double* G = node.grad.data.data();
        if (double* ga = g.gptr(node.in[0])) {
            // dA = G * B^T
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t p = 0; p < k; ++p) {
                    double s = 0.0;
                    const double* grow = &G[i * n];
                    const double* brow = &vb.data[p * n];
                    for (std::size_t j = 0; j < n; ++j) s += grow[j] * brow[j];
                    ga[i * k + p] += s;
                }
            }
        }
        if (double* gb = g.gptr(node.in[1])) {
            // dB = A^T * G
            for (std::size_t i = 0; i < m; ++i) {
                const double* grow = &G[i * n];
                for (std::size_t p = 0; p < k; ++p) {
                    double aip = va.data[i * k + p];
                    if (aip == 0.0) continue;
                    double* brow = &gb[p * n];
                    for (std::size_t j = 0; j < n; ++j) brow[j] += aip * grow[j];
                }
            }
        }
    });
}

inline Value transpose(Graph& g, Value a) {
    const Tensor& ta = g.value(a);
    detail::require(ta.rank() == 2, "transpose", "operand must be rank 2");
    std::size_t r = ta.shape[0], c = ta.shape[1];
    Tensor out({c, r});
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) out.data[j * r + i] = ta.data[i * c + j];
    }
    return g.make("transpose", {a.id}, std::move(out), [r, c](Graph& g, std::int32_t id) {
        const auto& n = g.node(id);
        if (double* ga = g.gptr(n.in[0])) {
            for (std::size_t i = 0; i < r; ++i) {
                for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += n.grad.data[j * r + i];
            }
        }
    });
}

inline Value reshape(Graph& g, Value a, std::vector<std::size_t> shape) {
    Tensor out = g.value(a).reshaped(std::move(shape));
    return g.make("reshape", {a.id}, std::move(out), [](Graph& g, std::int32_t id) {
        const auto& n = g.node(id);
        if (double* ga = g.gptr(n.in[0])) {
            for (std::size_t i = 0; i < n.grad.numel(); ++i) ga[i] += n.grad[i];
        }
    });
}

// ---------------------------------------------------------------------------
// Softmax (row-wise on matrices, whole tensor on vectors)
// ---------------------------------------------------------------------------

inline Value softmax(Graph& g, Value a) {
    const Tensor& ta = g.value(a);
    std::size_t rows = ta.rank() == 2 ? ta.shape[0] : 1;
    std::size_t cols = ta.rank() == 2 ? ta.shape[1] : ta.numel();
    Tensor out = ta;
    for (std::size_t i = 0; i < rows; ++i) {
        double* row = &out.data[i * cols];
        double mx = row[0];
        for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, row[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < cols; ++j) {
            row[j] = std::exp(row[j] - mx);
            sum += row[j];
        }
        for (std::size_t j = 0; j < cols; ++j) row[j] /= sum;
    }
    // Backward via the JVP: dx = y .* (dy - <dy, y>) per row; the Jacobian is
    // never materialized.
    return g.make("softmax", {a.id}, std::move(out), [rows, cols](Graph& g, std::int32_t id) {
        const auto& n = g.node(id);
        if (double* ga = g.gptr(n.in[0])) {
            for (std::size_t i = 0; i < rows; ++i) {
                const double* y = &n.value.data[i * cols];
                const double* dy = &n.grad.data[i * cols];
                double dot = 0.0;
                for (std::size_t j = 0; j < cols; ++j) dot += dy[j] * y[j];
                for (std::size_t j = 0; j < cols; ++j) ga[i * cols + j] += y[j] * (dy[j] - dot);
            }
        }
    });
}

// ---------------------------------------------------------------------------
// Shape surgery: concatenate / slice / gather
// ---------------------------------------------------------------------------

inline Value concat_rows(Graph& g, const std::vector<Value>& parts) {
    detail::require(!parts.empty(), "concat_rows", "no operands");
    std::size_t cols = g.value(parts[0]).cols();
    std::size_t rows = 0;
    std::vector<std::int32_t> in;
    std::vector<std::size_t> part_rows;
    for (Value p : parts) {
        const Tensor& t = g.value(p);
        detail::require(t.rank() == 2 && t.shape[1] == cols, "concat_rows",
                        "column extents differ");
        rows += t.shape[0];
        part_rows.push_back(t.shape[0]);
        in.push_back(p.id);
    }
    Tensor out({rows, cols});
    std::size_t r = 0;
    for (Value p : parts) {
        const Tensor& t = g.value(p);
        std::copy(t.data.begin(), t.data.end(), out.data.begin() + static_cast<long>(r * cols));
        r += t.shape[0];
    }
    return g.make("concat_rows", std::move(in), std::move(out),
                  [part_rows, cols](Graph& g, std::int32_t id) {
                      const auto& n = g.node(id);
                      std::size_t r = 0;
                      for (std::size_t k = 0; k < n.in.size(); ++k) {
                          if (double* gp = g.gptr(n.in[k])) {
                              for (std::size_t i = 0; i < part_rows[k] * cols; ++i) {
                                  gp[i] += n.grad.data[r * cols + i];
                              }
                          }
                          r += part_rows[k];
                      }
                  });
}

inline Value concat_cols(Graph& g, const std::vector<Value>& parts) {
    detail::require(!parts.empty(), "concat_cols", "no operands");
    std::size_t rows = g.value(parts[0]).rows();
    std::size_t cols = 0;
    std::vector<std::int32_t> in;
    std::vector<std::size_t> part_cols;
    for (Value p : parts) {
        const Tensor& t = g.value(p);
        detail::require(t.rank() == 2 && t.shape[0] == rows, "concat_cols", "row extents differ");
        cols += t.shape[1];
        part_cols.push_back(t.shape[1]);
        in.push_back(p.id);
    }
    Tensor out({rows, cols});
    std::size_t c0 = 0;
    for (Value p : parts) {
        const Tensor& t = g.value(p);
        for (std::size_t i = 0; i < rows; ++i) {
            std::copy(&t.data[i * t.shape[1]], &t.data[(i + 1) * t.shape[1]],
                      &out.data[i * cols + c0]);
        }
        c0 += t.shape[1];
    }
    return g.make("concat_cols", std::move(in), std::move(out),
                  [part_cols, rows, cols](Graph& g, std::int32_t id) {
                      const auto& n = g.node(id);
                      std::size_t c0 = 0;
                      for (std::size_t k = 0; k < n.in.size(); ++k) {
                          if (double* gp = g.gptr(n.in[k])) {
                              for (std::size_t i = 0; i < rows; ++i) {
                                  for (std::size_t j = 0; j < part_cols[k]; ++j) {
                                      gp[i * part_cols[k] + j] += n.grad.data[i * cols + c0 + j];
                                  }
                              }
                          }
                          c0 += part_cols[k];
                      }
                  });
}

inline Value slice_rows(Graph& g, Value a, std::size_t r0, std::size_t r1) {
    const Tensor& ta = g.value(a);
    detail::require(ta.rank() == 2 && r0 < r1 && r1 <= ta.shape[0], "slice_rows",
                    "row range out of bounds");
    std::size_t cols = ta.shape[1];
    Tensor out({r1 - r0, cols});
    std::copy(&ta.data[r0 * cols], &ta.data[r1 * cols], out.data.begin());
    return g.make("slice_rows", {a.id}, std::move(out), [r0, cols](Graph& g, std::int32_t id) {
        const auto& n = g.node(id);
        if (double* ga = g.gptr(n.in[0])) {
            for (std::size_t i = 0; i < n.grad.numel(); ++i) ga[r0 * cols + i] += n.grad[i];
        }
    });
}

inline Value slice_cols(Graph& g, Value a, std::size_t c0, std::size_t c1) {
    const Tensor& ta = g.value(a);
    detail::require(ta.rank() == 2 && c0 < c1 && c1 <= ta.shape[1], "slice_cols",
                    "column range out of bounds");
    std::size_t rows = ta.shape[0], cols = ta.shape[1], w = c1 - c0;
    Tensor out({rows, w});
    for (std::size_t i = 0; i < rows; ++i) {
        std::copy(&ta.data[i * cols + c0], &ta.data[i * cols + c1], &out.data[i * w]);
    }
    return g.make("slice_cols", {a.id}, std::move(out),
                  [rows, cols, c0, w](Graph& g, std::int32_t id) {
                      const auto& n = g.node(id);
                      if (double* ga = g.gptr(n.in[0])) {
                          for (std::size_t i = 0; i < rows; ++i) {
                              for (std::size_t j = 0; j < w; ++j) {
                                  ga[i * cols + c0 + j] += n.grad.data[i * w + j];
                              }
                          }
                      }
                  });
}

inline Value slice_flat(Graph& g, Value a, std::size_t start, std::size_t len) {
    const Tensor& ta = g.value(a);
    detail::require(start + len <= ta.numel(), "slice_flat", "range out of bounds");
    Tensor out({len});
    std::copy(ta.data.begin() + static_cast<long>(start),
              ta.data.begin() + static_cast<long>(start + len), out.data.begin());
    return g.make("slice_flat", {a.id}, std::move(out), [start](Graph& g, std::int32_t id) {
        const auto& n = g.node(id);
        if (double* ga = g.gptr(n.in[0])) {
            for (std::size_t i = 0; i < n.grad.numel(); ++i) ga[start + i] += n.grad[i];
        }
    });
}

inline Value slice_stride(Graph& g, Value a, std::size_t start, std::size_t stride,
                          std::size_t n_out) {
    const Tensor& ta = g.value(a);
    detail::require(n_out > 0 && start + (n_out - 1) * stride < ta.numel(), "slice_stride",
                    "strided range out of bounds");
    Tensor out({n_out});
    for (std::size_t i = 0; i < n_out; ++i) out[i] = ta[start + i * stride];
    return g.make("slice_stride", {a.id}, std::move(out),
                  [start, stride](Graph& g, std::int32_t id) {
                      const auto& n = g.node(id);
                      if (double* ga = g.gptr(n.in[0])) {
                          for (std::size_t i = 0; i < n.grad.numel(); ++i) {
                              ga[start + i * stride] += n.grad[i];
                          }
                      }
                  });
}

/// Row gather with zero padding: index -1 yields a zero row. Used for im2col
/// convolution lowering.
inline Value gather_rows(Graph& g, Value a, std::vector<long> idx) {
    const Tensor& ta = g.value(a);
    detail::require(ta.rank() == 2, "gather_rows", "operand must be rank 2");
    std::size_t cols = ta.shape[1];
    for (long i : idx) {
        detail::require(i >= -1 && i < static_cast<long>(ta.shape[0]), "gather_rows",
                        "row index out of bounds");
    }
    Tensor out({idx.size(), cols});
    for (std::size_t r = 0; r < idx.size(); ++r) {
        if (idx[r] >= 0) {
            std::copy(&ta.data[static_cast<std::size_t>(idx[r]) * cols],
                      &ta.data[(static_cast<std::size_t>(idx[r]) + 1) * cols], &out.data[r * cols]);
        }
    }
    return g.make("gather_rows", {a.id}, std::move(out),
                  [idx = std::move(idx), cols](Graph& g, std::int32_t id) {
                      const auto& n = g.node(id);
                      if (double* ga = g.gptr(n.in[0])) {
                          for (std::size_t r = 0; r < idx.size(); ++r) {
                              if (idx[r] < 0) continue;
                              double* dst = &ga[static_cast<std::size_t>(idx[r]) * cols];
                              const double* src = &n.grad.data[r * cols];
                              for (std::size_t j = 0; j < cols; ++j) dst[j] += src[j];
                          }
                      }
                  });
}

// ---------------------------------------------------------------------------
// Reductions and broadcasts
// ---------------------------------------------------------------------------

inline Value sum_all(Graph& g, Value a) {
    const Tensor& ta = g.value(a);
    double s = 0.0;
    for (double v : ta.data) s += v;
    return g.make("sum", {a.id}, Tensor::scalar(s), [](Graph& g, std::int32_t id) {
        const auto& n = g.node(id);
        if (double* ga = g.gptr(n.in[0])) {
            std::size_t m = g.val(n.in[0]).numel();
            for (std::size_t i = 0; i < m; ++i) ga[i] += n.grad[0];
        }
    });
}

inline Value mean_all(Graph& g, Value a) {
    const Tensor& ta = g.value(a);
    double s = 0.0;
    for (double v : ta.data) s += v;
    std::size_t m = ta.numel();
    return g.make("mean", {a.id}, Tensor::scalar(s / static_cast<double>(m)),
                  [m](Graph& g, std::int32_t id) {
                      const auto& n = g.node(id);
                      if (double* ga = g.gptr(n.in[0])) {
                          double w = n.grad[0] / static_cast<double>(m);
                          for (std::size_t i = 0; i < m; ++i) ga[i] += w;
                      }
                  });
}

/// Mean over rows: {r,c} -> {1,c}.
inline Value mean_rows(Graph& g, Value a) {
    const Tensor& ta = g.value(a);
    detail::require(ta.rank() == 2, "mean_rows", "operand must be rank 2");
    std::size_t r = ta.shape[0], c = ta.shape[1];
    Tensor out({1, c});
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) out[j] += ta.data[i * c + j];
    }
    for (std::size_t j = 0; j < c; ++j) out[j] /= static_cast<double>(r);
    return g.make("mean_rows", {a.id}, std::move(out), [r, c](Graph& g, std::int32_t id) {
        const auto& n = g.node(id);
        if (double* ga = g.gptr(n.in[0])) {
            for (std::size_t i = 0; i < r; ++i) {
                for (std::size_t j = 0; j < c; ++j) {
                    ga[i * c + j] += n.grad[j] / static_cast<double>(r);
                }
            }
        }
    });
}

/// Mean over columns: {r,c} -> {r,1}.
inline Value mean_cols(Graph& g, Value a) {
    const Tensor& ta = g.value(a);
    detail::require(ta.rank() == 2, "mean_cols", "operand must be rank 2");
    std::size_t r = ta.shape[0], c = ta.shape[1];
    Tensor out({r, 1});
    for (std::size_t i = 0; i < r; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < c; ++j) s += ta.data[i * c + j];
        out[i] = s / static_cast<double>(c);
    }
    return g.make("mean_cols", {a.id}, std::move(out), [r, c](Graph& g, std::int32_t id) {
        const auto& n = g.node(id);
        if (double* ga = g.gptr(n.in[0])) {
            for (std::size_t i = 0; i < r; ++i) {
                for (std::size_t j = 0; j < c; ++j) {
                    ga[i * c + j] += n.grad[i] / static_cast<double>(c);
                }
            }
        }
    });
}

/// Broadcast row-vector add: {r,c} + {1,c} (or {c}).
inline Value add_rowvec(Graph& g, Value a, Value b) {
    const Tensor &ta = g.value(a), &tb = g.value(b);
    detail::require(ta.rank() == 2, "add_rowvec", "left operand must be rank 2");
    std::size_t r = ta.shape[0], c = ta.shape[1];
    detail::require(tb.numel() == c, "add_rowvec", "vector length mismatch");
    Tensor out = ta;
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) out.data[i * c + j] += tb[j];
    }
    return g.make("add_rowvec", {a.id, b.id}, std::move(out), [r, c](Graph& g, std::int32_t id) {
        const auto& n = g.node(id);
        double* ga = g.gptr(n.in[0]);
        double* gb = g.gptr(n.in[1]);
        for (std::size_t i = 0; i < r; ++i) {
            for (std::size_t j = 0; j < c; ++j) {
                double gij = n.grad.data[i * c + j];
                if (ga) ga[i * c + j] += gij;
                if (gb) gb[j] += gij;
            }
        }
    });
}

/// Broadcast row-vector multiply: {r,c} .* {1,c} (or {c}).
inline Value mul_rowvec(Graph& g, Value a, Value b) {
    const Tensor &ta = g.value(a), &tb = g.value(b);
    detail::require(ta.rank() == 2, "mul_rowvec", "left operand must be rank 2");
    std::size_t r = ta.shape[0], c = ta.shape[1];
    detail::require(tb.numel() == c, "mul_rowvec", "vector length mismatch");
    Tensor out = ta;
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) out.data[i * c + j] *= tb[j];
    }
    return g.make("mul_rowvec", {a.id, b.id}, std::move(out), [r, c](Graph& g, std::int32_t id) {
        const auto& n = g.node(id);
        const Tensor &va = g.val(n.in[0]), &vb = g.val(n.in[1]);
        double* ga = g.gptr(n.in[0]);
        double* gb = g.gptr(n.in[1]);
        for (std::size_t i = 0; i < r; ++i) {
            for (std::size_t j = 0; j < c; ++j) {
                double gij = n.grad.data[i * c + j];
                if (ga) ga[i * c + j] += gij * vb[j];
                if (gb) gb[j] += gij * va.data[i * c + j];
            }
        }
    });
}

/// Elementwise subtract of a 1-element value, broadcast over a tensor.
inline Value sub_bcast(Graph& g, Value a, Value s) {
    const Tensor &ta = g.value(a), &ts = g.value(s);
    detail::require(ts.numel() == 1, "sub_bcast", "broadcast operand must be scalar");
    Tensor out = ta;
    for (double& v : out.data) v -= ts[0];
    return g.make("sub_bcast", {a.id, s.id}, std::move(out), [](Graph& g, std::int32_t id) {
        const auto& n = g.node(id);
        double* ga = g.gptr(n.in[0]);
        double* gs = g.gptr(n.in[1]);
        for (std::size_t i = 0; i < n.grad.numel(); ++i) {
            if (ga) ga[i] += n.grad[i];
            if (gs) gs[0] -= n.grad[i];
        }
    });
}

/// Elementwise divide by a 1-element value, broadcast over a tensor.
inline Value div_bcast(Graph& g, Value a, Value s) {
    const Tensor &ta = g.value(a), &ts = g.value(s);
    detail::require(ts.numel() == 1, "div_bcast", "broadcast operand must be scalar");
    Tensor out = ta;
    for (double& v : out.data) v /= ts[0];
    return g.make("div_bcast", {a.id, s.id}, std::move(out), [](Graph& g, std::int32_t id) {
        const auto& n = g.node(id);
        const Tensor& va = g.val(n.in[0]);
        double sv = g.val(n.in[1])[0];
        double* ga = g.gptr(n.in[0]);
        double* gs = g.gptr(n.in[1]);
        for (std::size_t i = 0; i < n.grad.numel(); ++i) {
            if (ga) ga[i] += n.grad[i] / sv;
            if (gs) gs[0] -= n.grad[i] * va[i] / (sv * sv);
        }
    });
}

// ---------------------------------------------------------------------------
// Gradient verification harness
// ---------------------------------------------------------------------------

struct GradCheckReport {
    std::string op;
    double max_rel_err = 0.0;
    double tol = 0.0;
    bool passed = false;
};

/// Compare reverse-mode gradients of a scalar-valued graph builder against
/// central finite differences. `build` is invoked on fresh graphs; it must be
/// a pure function of its tensor inputs. When an input has more elements than
/// `max_coords_per_input`, a seeded random subset of coordinates is probed.
template <typename BuildFn>
GradCheckReport grad_check(const std::string& op_name, BuildFn&& build,
                           const std::vector<Tensor>& inputs, double tol = 1e-4,
                           double step = 1e-5,
                           std::size_t max_coords_per_input = std::numeric_limits<std::size_t>::max(),
                           std::uint64_t coord_seed = 0x5eedULL) {
    for (const Tensor& t : inputs) {
        if (!t.all_finite()) throw std::invalid_argument("grad_check: non-finite input");
    }
    auto eval = [&](const std::vector<Tensor>& ins, std::vector<Tensor>* grads) {
        Graph g;
        std::vector<Value> vals;
        vals.reserve(ins.size());
        for (const Tensor& t : ins) {
            Tensor leaf = t;
            leaf.requires_grad = grads != nullptr;
            vals.push_back(g.input(std::move(leaf)));
        }
        Value out = build(g, vals);
        if (!g.value(out).is_scalar()) {
            throw std::invalid_argument("grad_check: graph output must be scalar");
        }
        double y = g.value(out)[0];
        if (grads) {
            g.backward(out);
            grads->clear();
            for (Value v : vals) grads->push_back(g.grad(v));
        }
        return y;
    };

    std::vector<Tensor> analytic;
    eval(inputs, &analytic);

    GradCheckReport rep;
    rep.op = op_name;
    rep.tol = tol;
    Rng pick(coord_seed);
    std::vector<Tensor> work = inputs;
    for (std::size_t t = 0; t < inputs.size(); ++t) {
        std::vector<std::size_t> coords(inputs[t].numel());
        std::iota(coords.begin(), coords.end(), 0);
        if (coords.size() > max_coords_per_input) {
            pick.shuffle(coords);
            coords.resize(max_coords_per_input);
            std::sort(coords.begin(), coords.end());
        }
        for (std::size_t c : coords) {
            double orig = work[t][c];
            work[t][c] = orig + step;
            double fp = eval(work, nullptr);
            work[t][c] = orig - step;
            double fm = eval(work, nullptr);
            work[t][c] = orig;
            double numeric = (fp - fm) / (2.0 * step);
            double a = analytic[t][c];
            double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
            rep.max_rel_err = std::max(rep.max_rel_err, std::abs(a - numeric) / denom);
        }
    }
    rep.passed = rep.max_rel_err <= tol;
    return rep;
}

}  // namespace spikecast::ad
