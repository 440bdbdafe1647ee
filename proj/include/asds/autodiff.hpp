#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "asds/tensor.hpp"

namespace asds {

/// Reverse-mode tape. Ops evaluate eagerly; backward() walks the tape in
/// reverse and accumulates gradients into every node that can reach a
/// trainable leaf. One tape describes one evaluation; rebuild per step.
///
/// Backward may be called repeatedly on the same tape (with zero_grad()
/// in between) to differentiate several scalars sharing one forward pass.
template <typename T>
class Tape {
public:
    struct Var {
        int id = -1;
        bool valid() const { return id >= 0; }
    };

    Var leaf(Tensor<T> value, bool trainable = false, std::string name = {}) {
        Node n;
        n.op = Op::Leaf;
        n.value = std::move(value);
        n.needs_grad = trainable;
        const int id = push(std::move(n));
        if (trainable && !name.empty()) named_[name] = id;
        return {id};
    }

    Var constant(Tensor<T> value) { return leaf(std::move(value), false); }

    Var add(Var a, Var b) {
        return unary2(Op::Add, a, b, asds::add(value(a), value(b)));
    }

    Var sub(Var a, Var b) {
        return unary2(Op::Sub, a, b, asds::sub(value(a), value(b)));
    }

    Var mul(Var a, Var b) {
        return unary2(Op::Mul, a, b, asds::mul(value(a), value(b)));
    }

    Var scalar_mul(Var a, T s) {
        Node n = make(Op::ScalarMul, {a.id}, scale(value(a), s));
        n.saux = s;
        return {push(std::move(n))};
    }

    Var add_bias(Var m, Var bias) {
        return unary2(Op::AddBias, m, bias, asds::add_bias(value(m), value(bias)));
    }

    /// Row-wise scale by a vector: out(i,j) = m(i,j) * s(j). Explicit
    /// companion to the bias-add broadcast, used for layer-norm gains.
    Var row_scale(Var m, Var s) {
        const Tensor<T>& mv = value(m);
        const Tensor<T>& sv = value(s);
        detail::check_matrix(mv, "row_scale");
        require(sv.rank() == 1 && sv.numel() == mv.cols(), "row_scale: scale length mismatch");
        Tensor<T> out = mv;
        for (std::size_t i = 0; i < out.rows(); ++i) {
            T* r = out.row(i);
            for (std::size_t j = 0; j < out.cols(); ++j) r[j] *= sv[j];
        }
        return unary2(Op::RowScale, m, s, std::move(out));
    }

    Var matmul(Var a, Var b) {
        return unary2(Op::MatMul, a, b, asds::matmul(value(a), value(b)));
    }

    Var matmul_nt(Var a, Var b) {
        return unary2(Op::MatMulNT, a, b, asds::matmul_nt(value(a), value(b)));
    }

    /// out = m[indices, :]. Backward scatter-adds into the source rows.
    Var gather_rows(Var m, std::vector<int> indices) {
        const Tensor<T>& mv = value(m);
        detail::check_matrix(mv, "gather_rows");
        Tensor<T> out({indices.size(), mv.cols()});
        for (std::size_t i = 0; i < indices.size(); ++i) {
            const int src = indices[i];
            require(src >= 0 && static_cast<std::size_t>(src) < mv.rows(),
                    "gather_rows: index out of range");
            std::copy(mv.row(src), mv.row(src) + mv.cols(), out.row(i));
        }
        Node n = make(Op::GatherRows, {m.id}, std::move(out));
        n.iaux = std::move(indices);
        return {push(std::move(n))};
    }

    Var relu(Var a) {
        Tensor<T> out = value(a);
        for (std::size_t i = 0; i < out.numel(); ++i) out[i] = out[i] > T(0) ? out[i] : T(0);
        return {push(make(Op::Relu, {a.id}, std::move(out)))};
    }

    Var tanh(Var a) {
        Tensor<T> out = value(a);
        for (std::size_t i = 0; i < out.numel(); ++i) out[i] = std::tanh(out[i]);
        return {push(make(Op::Tanh, {a.id}, std::move(out)))};
    }

    Var sigmoid(Var a) {
        Tensor<T> out = value(a);
        for (std::size_t i = 0; i < out.numel(); ++i) out[i] = sigmoid_scalar(out[i]);
        return {push(make(Op::Sigmoid, {a.id}, std::move(out)))};
    }

    Var softmax_rows(Var a) {
        return {push(make(Op::SoftmaxRows, {a.id}, asds::softmax_rows(value(a))))};
    }

    /// Per-row standardization to zero mean, unit variance (no affine).
    Var layer_norm_rows(Var a, T eps = T(1e-5)) {
        const Tensor<T>& x = value(a);
        detail::check_matrix(x, "layer_norm_rows");
        const std::size_t n = x.rows(), d = x.cols();
        Tensor<T> out({n, d});
        Tensor<T> rstd({n});
        for (std::size_t i = 0; i < n; ++i) {
            const T* xi = x.row(i);
            T mean = 0;
            for (std::size_t j = 0; j < d; ++j) mean += xi[j];
            mean /= static_cast<T>(d);
            T var = 0;
            for (std::size_t j = 0; j < d; ++j) {
                const T c = xi[j] - mean;
                var += c * c;
            }
            var /= static_cast<T>(d);
            const T r = T(1) / std::sqrt(var + eps);
            rstd[i] = r;
            T* oi = out.row(i);
            for (std::size_t j = 0; j < d; ++j) oi[j] = (xi[j] - mean) * r;
        }
        Node node = make(Op::LayerNormRows, {a.id}, std::move(out));
        node.cache = std::move(rstd);
        return {push(std::move(node))};
    }

    Var slice_cols(Var a, std::size_t j0, std::size_t j1) {
        const Tensor<T>& x = value(a);
        detail::check_matrix(x, "slice_cols");
        require(j0 < j1 && j1 <= x.cols(), "slice_cols: bad column range");
        Tensor<T> out({x.rows(), j1 - j0});
        for (std::size_t i = 0; i < x.rows(); ++i)
            std::copy(x.row(i) + j0, x.row(i) + j1, out.row(i));
        Node n = make(Op::SliceCols, {a.id}, std::move(out));
        n.iaux = {static_cast<int>(j0), static_cast<int>(j1)};
        return {push(std::move(n))};
    }

    Var concat_cols(const std::vector<Var>& parts) {
        require(!parts.empty(), "concat_cols: empty part list");
        std::size_t cols = 0;
        const std::size_t rows = value(parts[0]).rows();
        for (Var p : parts) {
            detail::check_matrix(value(p), "concat_cols");
            require(value(p).rows() == rows, "concat_cols: row count mismatch");
            cols += value(p).cols();
        }
        Tensor<T> out({rows, cols});
        std::size_t off = 0;
        std::vector<int> ids;
        for (Var p : parts) {
            const Tensor<T>& x = value(p);
            for (std::size_t i = 0; i < rows; ++i)
                std::copy(x.row(i), x.row(i) + x.cols(), out.row(i) + off);
            off += x.cols();
            ids.push_back(p.id);
        }
        return {push(make(Op::ConcatCols, std::move(ids), std::move(out)))};
    }

    Var sum(Var a) {
        return {push(make(Op::Sum, {a.id}, Tensor<T>::scalar(asds::sum(value(a)))))};
    }

    Var mean(Var a) {
        const T n = static_cast<T>(value(a).numel());
        return {push(make(Op::Mean, {a.id}, Tensor<T>::scalar(asds::sum(value(a)) / n)))};
    }

    Var sumsq(Var a) {
        return {push(make(Op::SumSq, {a.id}, Tensor<T>::scalar(asds::sumsq(value(a)))))};
    }

    /// Multi-head scaled dot-product self-attention over stacked
    /// sequences. q/k/v are [batch*seq, width]; heads must divide width.
    /// Attention never crosses sequence boundaries.
    Var attention(Var q, Var k, Var v, std::size_t batch, std::size_t seq, std::size_t heads) {
        const Tensor<T>& Q = value(q);
        const Tensor<T>& K = value(k);
        const Tensor<T>& V = value(v);
        require(Q.same_shape(K) && Q.same_shape(V), "attention: q/k/v shape mismatch");
        require(Q.rows() == batch * seq, "attention: rows != batch*seq");
        require(Q.cols() % heads == 0, "attention: heads do not divide width");
        const std::size_t dh = Q.cols() / heads;
        const T s = T(1) / std::sqrt(static_cast<T>(dh));

        Tensor<T> out({Q.rows(), Q.cols()});
        Tensor<T> probs({batch * heads * seq, seq});
        Tensor<T> qh({seq, dh}), kh({seq, dh}), vh({seq, dh});
        for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t h = 0; h < heads; ++h) {
                copy_head(Q, b, h, seq, dh, qh);
                copy_head(K, b, h, seq, dh, kh);
                copy_head(V, b, h, seq, dh, vh);
                Tensor<T> z = scale(asds::matmul_nt(qh, kh), s);
                Tensor<T> p = asds::softmax_rows(z);
                Tensor<T> o = asds::matmul(p, vh);
                for (std::size_t i = 0; i < seq; ++i) {
                    std::copy(p.row(i), p.row(i) + seq, probs.row((b * heads + h) * seq + i));
                    std::copy(o.row(i), o.row(i) + dh, out.row(b * seq + i) + h * dh);
                }
            }
        }
        Node n = make(Op::Attention, {q.id, k.id, v.id}, std::move(out));
        n.cache = std::move(probs);
        n.iaux = {static_cast<int>(batch), static_cast<int>(seq), static_cast<int>(heads)};
        return {push(std::move(n))};
    }

    /// Weighted binary cross-entropy on logits (stable form). targets in
    /// {0,1}; result is (1/n) * sum_i w_i * bce(z_i, y_i) when mean=true,
    /// else the plain weighted sum (per-sample gradients stay decoupled).
    Var bce_logits(Var z, std::vector<T> targets, std::vector<T> weights, bool mean = true) {
        const Tensor<T>& zv = value(z);
        require(zv.numel() == targets.size(), "bce_logits: target count mismatch");
        if (weights.empty()) weights.assign(targets.size(), T(1));
        require(weights.size() == targets.size(), "bce_logits: weight count mismatch");
        T total = 0;
        for (std::size_t i = 0; i < targets.size(); ++i) {
            const T zi = zv[i];
            // max(z,0) - z*y + log1p(exp(-|z|))
            total += weights[i] *
                     (std::max(zi, T(0)) - zi * targets[i] + std::log1p(std::exp(-std::abs(zi))));
        }
        const T norm = mean ? static_cast<T>(targets.size()) : T(1);
        Node n = make(Op::BceLogits, {z.id}, Tensor<T>::scalar(total / norm));
        n.taux = std::move(targets);
        n.waux = std::move(weights);
        n.saux = T(1) / norm;
        return {push(std::move(n))};
    }

    /// Softmax cross-entropy on logits [n,C] against integer labels.
    Var ce_logits(Var z, std::vector<int> labels, bool mean = true) {
        const Tensor<T>& zv = value(z);
        detail::check_matrix(zv, "ce_logits");
        require(zv.rows() == labels.size(), "ce_logits: label count mismatch");
        Tensor<T> probs = asds::softmax_rows(zv);
        T total = 0;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            const int y = labels[i];
            require(y >= 0 && static_cast<std::size_t>(y) < zv.cols(), "ce_logits: label out of range");
            total -= std::log(std::max(probs(i, y), std::numeric_limits<T>::min()));
        }
        const T norm = mean ? static_cast<T>(labels.size()) : T(1);
        Node n = make(Op::CeLogits, {z.id}, Tensor<T>::scalar(total / norm));
        n.cache = std::move(probs);
        n.iaux = std::move(labels);
        n.saux = T(1) / norm;
        return {push(std::move(n))};
    }

    const Tensor<T>& value(Var v) const { return nodes_[check(v)].value; }

    const Tensor<T>& grad(Var v) const {
        const Node& n = nodes_[check(v)];
        require(n.grad.numel() > 0, "tape: no gradient recorded for this node");
        return n.grad;
    }

    void zero_grad() {
        for (Node& n : nodes_) n.grad = Tensor<T>();
    }

    /// Reverse pass from a scalar loss. Accumulates dloss/dnode for every
    /// node on a path between a trainable leaf and the loss.
    void backward(Var loss) {
        Node& ln = nodes_[check(loss)];
        require(ln.value.is_scalar(), "backward: loss must be scalar, got shape " + ln.value.shape_str());
        ensure_grad(ln);
        ln.grad[0] += T(1);
        for (int i = loss.id; i >= 0; --i) {
            Node& n = nodes_[i];
            if (!n.needs_grad || n.op == Op::Leaf || n.grad.numel() == 0) continue;
            backprop(n);
        }
    }

    /// Gradient map for all named trainable leaves (call after backward).
    std::map<std::string, Tensor<T>> gradients() const {
        std::map<std::string, Tensor<T>> out;
        for (const auto& [name, id] : named_) {
            const Node& n = nodes_[id];
            out[name] = n.grad.numel() ? n.grad : Tensor<T>::zeros(n.value.shape());
        }
        return out;
    }

    std::size_t size() const { return nodes_.size(); }

    static T sigmoid_scalar(T z) {
        return z >= T(0) ? T(1) / (T(1) + std::exp(-z)) : std::exp(z) / (T(1) + std::exp(z));
    }

private:
    enum class Op {
        Leaf, Add, Sub, Mul, ScalarMul, AddBias, RowScale, MatMul, MatMulNT,
        GatherRows, Relu, Tanh, Sigmoid, SoftmaxRows, LayerNormRows, SliceCols,
        ConcatCols, Sum, Mean, SumSq, Attention, BceLogits, CeLogits,
    };

    struct Node {
        Op op = Op::Leaf;
        std::vector<int> parents;
        Tensor<T> value;
        Tensor<T> grad;
        Tensor<T> cache;         // op-specific forward state reused in backward
        std::vector<int> iaux;
        std::vector<T> taux;
        std::vector<T> waux;
        T saux = 0;
        bool needs_grad = false;
    };

    Node make(Op op, std::vector<int> parents, Tensor<T> value) {
        Node n;
        n.op = op;
        n.parents = std::move(parents);
        n.value = std::move(value);
        for (int p : n.parents) n.needs_grad = n.needs_grad || nodes_[p].needs_grad;
        return n;
    }

    Var unary2(Op op, Var a, Var b, Tensor<T> value) {
        return {push(make(op, {a.id, b.id}, std::move(value)))};
    }

    int push(Node n) {
        nodes_.push_back(std::move(n));
        return static_cast<int>(nodes_.size()) - 1;
    }

    int check(Var v) const {
        require(v.id >= 0 && static_cast<std::size_t>(v.id) < nodes_.size(), "tape: invalid var");
        return v.id;
    }

    void ensure_grad(Node& n) {
        if (n.grad.numel() == 0) n.grad = Tensor<T>::zeros(n.value.shape());
    }

    Tensor<T>* grad_of(int parent) {
        Node& p = nodes_[parent];
        if (!p.needs_grad) return nullptr;
        ensure_grad(p);
        return &p.grad;
    }

    static void copy_head(const Tensor<T>& m, std::size_t b, std::size_t h, std::size_t seq,
                          std::size_t dh, Tensor<T>& dst) {
        for (std::size_t i = 0; i < seq; ++i)
            std::copy(m.row(b * seq + i) + h * dh, m.row(b * seq + i) + (h + 1) * dh, dst.row(i));
    }

    void backprop(Node& n) {
        const Tensor<T>& g = n.grad;
        switch (n.op) {
        case Op::Leaf:
            break;
        case Op::Add: {
            for (int k = 0; k < 2; ++k)
                if (Tensor<T>* pg = grad_of(n.parents[k]))
                    for (std::size_t i = 0; i < g.numel(); ++i) (*pg)[i] += g[i];
            break;
        }
        case Op::Sub: {
            if (Tensor<T>* pg = grad_of(n.parents[0]))
                for (std::size_t i = 0; i < g.numel(); ++i) (*pg)[i] += g[i];
            if (Tensor<T>* pg = grad_of(n.parents[1]))
                for (std::size_t i = 0; i < g.numel(); ++i) (*pg)[i] -= g[i];
            break;
        }
        case Op::Mul: {
            const Tensor<T>& a = nodes_[n.parents[0]].value;
            const Tensor<T>& b = nodes_[n.parents[1]].value;
            if (Tensor<T>* pg = grad_of(n.parents[0]))
                for (std::size_t i = 0; i < g.numel(); ++i) (*pg)[i] += g[i] * b[i];
            if (Tensor<T>* pg = grad_of(n.parents[1]))
                for (std::size_t i = 0; i < g.numel(); ++i) (*pg)[i] += g[i] * a[i];
            break;
        }
        case Op::ScalarMul: {
            if (Tensor<T>* pg = grad_of(n.parents[0]))
                for (std::size_t i = 0; i < g.numel(); ++i) (*pg)[i] += g[i] * n.saux;
            break;
        }
        case Op::AddBias: {
            if (Tensor<T>* pg = grad_of(n.parents[0]))
                for (std::size_t i = 0; i < g.numel(); ++i) (*pg)[i] += g[i];
            if (Tensor<T>* pg = grad_of(n.parents[1])) {
                for (std::size_t i = 0; i < g.rows(); ++i)
                    for (std::size_t j = 0; j < g.cols(); ++j) (*pg)[j] += g(i, j);
            }
            break;
        }
        case Op::RowScale: {
            const Tensor<T>& m = nodes_[n.parents[0]].value;
            const Tensor<T>& s = nodes_[n.parents[1]].value;
            if (Tensor<T>* pg = grad_of(n.parents[0])) {
                for (std::size_t i = 0; i < g.rows(); ++i)
                    for (std::size_t j = 0; j < g.cols(); ++j) (*pg)(i, j) += g(i, j) * s[j];
            }
            if (Tensor<T>* pg = grad_of(n.parents[1])) {
                for (std::size_t i = 0; i < g.rows(); ++i)
                    for (std::size_t j = 0; j < g.cols(); ++j) (*pg)[j] += g(i, j) * m(i, j);
            }
            break;
        }
        case Op::MatMul: {
            const Tensor<T>& a = nodes_[n.parents[0]].value;
            const Tensor<T>& b = nodes_[n.parents[1]].value;
            if (Tensor<T>* pg = grad_of(n.parents[0])) accumulate(*pg, asds::matmul_nt(g, b));
            if (Tensor<T>* pg = grad_of(n.parents[1])) accumulate(*pg, asds::matmul_tn(a, g));
            break;
        }
        case Op::MatMulNT: {
            const Tensor<T>& a = nodes_[n.parents[0]].value;
            const Tensor<T>& b = nodes_[n.parents[1]].value;
            if (Tensor<T>* pg = grad_of(n.parents[0])) accumulate(*pg, asds::matmul(g, b));
            if (Tensor<T>* pg = grad_of(n.parents[1])) accumulate(*pg, asds::matmul_tn(g, a));
            break;
        }
        case Op::GatherRows: {
            if (Tensor<T>* pg = grad_of(n.parents[0])) {
                const std::size_t d = g.cols();
                for (std::size_t i = 0; i < n.iaux.size(); ++i) {
                    T* dst = pg->row(n.iaux[i]);
                    const T* src = g.row(i);
                    for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
                }
            }
            break;
        }
        case Op::Relu: {
            const Tensor<T>& x = nodes_[n.parents[0]].value;
            if (Tensor<T>* pg = grad_of(n.parents[0]))
                for (std::size_t i = 0; i < g.numel(); ++i)
                    if (x[i] > T(0)) (*pg)[i] += g[i];
            break;
        }
        case Op::Tanh: {
            const Tensor<T>& y = n.value;
            if (Tensor<T>* pg = grad_of(n.parents[0]))
                for (std::size_t i = 0; i < g.numel(); ++i) (*pg)[i] += g[i] * (T(1) - y[i] * y[i]);
            break;
        }
        case Op::Sigmoid: {
            const Tensor<T>& y = n.value;
            if (Tensor<T>* pg = grad_of(n.parents[0]))
                for (std::size_t i = 0; i < g.numel(); ++i) (*pg)[i] += g[i] * y[i] * (T(1) - y[i]);
            break;
        }
        case Op::SoftmaxRows: {
            const Tensor<T>& y = n.value;
            if (Tensor<T>* pg = grad_of(n.parents[0])) {
                for (std::size_t i = 0; i < y.rows(); ++i) {
                    T dot = 0;
                    for (std::size_t j = 0; j < y.cols(); ++j) dot += g(i, j) * y(i, j);
                    for (std::size_t j = 0; j < y.cols(); ++j)
                        (*pg)(i, j) += y(i, j) * (g(i, j) - dot);
                }
            }
            break;
        }
        case Op::LayerNormRows: {
            const Tensor<T>& y = n.value;
            const Tensor<T>& rstd = n.cache;
            if (Tensor<T>* pg = grad_of(n.parents[0])) {
                const std::size_t d = y.cols();
                for (std::size_t i = 0; i < y.rows(); ++i) {
                    T gmean = 0, gymean = 0;
                    for (std::size_t j = 0; j < d; ++j) {
                        gmean += g(i, j);
                        gymean += g(i, j) * y(i, j);
                    }
                    gmean /= static_cast<T>(d);
                    gymean /= static_cast<T>(d);
                    for (std::size_t j = 0; j < d; ++j)
                        (*pg)(i, j) += rstd[i] * (g(i, j) - gmean - y(i, j) * gymean);
                }
            }
            break;
        }
        case Op::SliceCols: {
            if (Tensor<T>* pg = grad_of(n.parents[0])) {
                const std::size_t j0 = static_cast<std::size_t>(n.iaux[0]);
                for (std::size_t i = 0; i < g.rows(); ++i)
                    for (std::size_t j = 0; j < g.cols(); ++j) (*pg)(i, j0 + j) += g(i, j);
            }
            break;
        }
        case Op::ConcatCols: {
            std::size_t off = 0;
            for (int pid : n.parents) {
                const std::size_t w = nodes_[pid].value.cols();
                if (Tensor<T>* pg = grad_of(pid)) {
                    for (std::size_t i = 0; i < g.rows(); ++i)
                        for (std::size_t j = 0; j < w; ++j) (*pg)(i, j) += g(i, off + j);
                }
                off += w;
            }
            break;
        }
        case Op::Sum: {
            if (Tensor<T>* pg = grad_of(n.parents[0]))
                for (std::size_t i = 0; i < pg->numel(); ++i) (*pg)[i] += g[0];
            break;
        }
        case Op::Mean: {
            if (Tensor<T>* pg = grad_of(n.parents[0])) {
                const T inv = T(1) / static_cast<T>(pg->numel());
                for (std::size_t i = 0; i < pg->numel(); ++i) (*pg)[i] += g[0] * inv;
            }
            break;
        }
        case Op::SumSq: {
            const Tensor<T>& x = nodes_[n.parents[0]].value;
            if (Tensor<T>* pg = grad_of(n.parents[0]))
                for (std::size_t i = 0; i < pg->numel(); ++i) (*pg)[i] += g[0] * T(2) * x[i];
            break;
        }
        case Op::Attention: {
            backprop_attention(n);
            break;
        }
        case Op::BceLogits: {
            const Tensor<T>& z = nodes_[n.parents[0]].value;
            if (Tensor<T>* pg = grad_of(n.parents[0])) {
                for (std::size_t i = 0; i < z.numel(); ++i)
                    (*pg)[i] += g[0] * n.saux * n.waux[i] * (sigmoid_scalar(z[i]) - n.taux[i]);
            }
            break;
        }
        case Op::CeLogits: {
            const Tensor<T>& probs = n.cache;
            if (Tensor<T>* pg = grad_of(n.parents[0])) {
                for (std::size_t i = 0; i < probs.rows(); ++i) {
                    for (std::size_t j = 0; j < probs.cols(); ++j) {
                        T d = probs(i, j);
                        if (static_cast<std::size_t>(n.iaux[i]) == j) d -= T(1);
                        (*pg)(i, j) += g[0] * n.saux * d;
                    }
                }
            }
            break;
        }
        }
    }

    void backprop_attention(Node& n) {
        const std::size_t batch = static_cast<std::size_t>(n.iaux[0]);
        const std::size_t seq = static_cast<std::size_t>(n.iaux[1]);
        const std::size_t heads = static_cast<std::size_t>(n.iaux[2]);
        const Tensor<T>& Q = nodes_[n.parents[0]].value;
        const Tensor<T>& K = nodes_[n.parents[1]].value;
        const Tensor<T>& V = nodes_[n.parents[2]].value;
        const std::size_t dh = Q.cols() / heads;
        const T s = T(1) / std::sqrt(static_cast<T>(dh));

        Tensor<T>* gq = grad_of(n.parents[0]);
        Tensor<T>* gk = grad_of(n.parents[1]);
        Tensor<T>* gv = grad_of(n.parents[2]);
        if (!gq && !gk && !gv) return;

        Tensor<T> qh({seq, dh}), kh({seq, dh}), vh({seq, dh}), goh({seq, dh});
        Tensor<T> p({seq, seq});
        for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t h = 0; h < heads; ++h) {
                copy_head(Q, b, h, seq, dh, qh);
                copy_head(K, b, h, seq, dh, kh);
                copy_head(V, b, h, seq, dh, vh);
                copy_head(n.grad, b, h, seq, dh, goh);
                for (std::size_t i = 0; i < seq; ++i)
                    std::copy(n.cache.row((b * heads + h) * seq + i),
                              n.cache.row((b * heads + h) * seq + i) + seq, p.row(i));

                Tensor<T> dv = asds::matmul_tn(p, goh);
                Tensor<T> dp = asds::matmul_nt(goh, vh);
                // dZ = P o (dP - rowsum(dP o P)), Z = s*Q*K^T
                Tensor<T> dz({seq, seq});
                for (std::size_t i = 0; i < seq; ++i) {
                    T dot = 0;
                    for (std::size_t j = 0; j < seq; ++j) dot += dp(i, j) * p(i, j);
                    for (std::size_t j = 0; j < seq; ++j)
                        dz(i, j) = p(i, j) * (dp(i, j) - dot);
                }
                Tensor<T> dq = scale(asds::matmul(dz, kh), s);
                Tensor<T> dk = scale(asds::matmul_tn(dz, qh), s);
                for (std::size_t i = 0; i < seq; ++i) {
                    if (gq)
                        for (std::size_t j = 0; j < dh; ++j)
                            (*gq)(b * seq + i, h * dh + j) += dq(i, j);
                    if (gk)
                        for (std::size_t j = 0; j < dh; ++j)
                            (*gk)(b * seq + i, h * dh + j) += dk(i, j);
                    if (gv)
                        for (std::size_t j = 0; j < dh; ++j)
                            (*gv)(b * seq + i, h * dh + j) += dv(i, j);
                }
            }
        }
    }

    static void accumulate(Tensor<T>& dst, const Tensor<T>& src) {
        for (std::size_t i = 0; i < dst.numel(); ++i) dst[i] += src[i];
    }

    std::vector<Node> nodes_;
    std::map<std::string, int> named_;
};

using TapeF = Tape<float>;
using TapeD = Tape<double>;

/// One line of a finite-difference check: the worst relative error seen
/// across the elements of one parameter.
template <typename T>
struct GradCheckEntry {
    std::string name;
    T max_err = 0;
};

template <typename T>
struct GradCheckReport {
    std::vector<GradCheckEntry<T>> entries;
    T max_err = 0;

    bool passed(T tolerance) const { return max_err < tolerance; }
};

/// Central finite-difference check of a scalar graph against the tape's
/// analytic gradients. `build` reconstructs the graph from a parameter
/// map: build(tape, vars) -> loss Var. Error metric per element:
/// |analytic - numeric| / max(1, |numeric|).
template <typename T, typename Build>
GradCheckReport<T> grad_check(std::map<std::string, Tensor<T>> params, Build build, T epsilon,
                              T tolerance) {
    require(epsilon > T(0) && epsilon <= T(1e-2), "grad_check: epsilon out of (0, 1e-2]");
    (void)tolerance;

    auto eval = [&](const std::map<std::string, Tensor<T>>& p) {
        Tape<T> tape;
        std::map<std::string, typename Tape<T>::Var> vars;
        for (const auto& [name, tensor] : p) vars[name] = tape.leaf(tensor, true, name);
        return tape.value(build(tape, vars)).item();
    };

    // Analytic pass.
    Tape<T> tape;
    std::map<std::string, typename Tape<T>::Var> vars;
    for (const auto& [name, tensor] : params) vars[name] = tape.leaf(tensor, true, name);
    tape.backward(build(tape, vars));
    const auto analytic = tape.gradients();

    GradCheckReport<T> report;
    for (auto& [name, tensor] : params) {
        GradCheckEntry<T> entry{name, T(0)};
        for (std::size_t i = 0; i < tensor.numel(); ++i) {
            const T saved = tensor[i];
            tensor[i] = saved + epsilon;
            const T up = eval(params);
            tensor[i] = saved - epsilon;
            const T down = eval(params);
            tensor[i] = saved;
            const T numeric = (up - down) / (T(2) * epsilon);
            const T a = analytic.at(name)[i];
            const T err = std::abs(a - numeric) / std::max(T(1), std::abs(numeric));
            entry.max_err = std::max(entry.max_err, err);
        }
        report.max_err = std::max(report.max_err, entry.max_err);
        report.entries.push_back(std::move(entry));
    }
    return report;
}

} // namespace asds
