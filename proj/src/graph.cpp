#include <cmath>

#include "sce/kernels.hpp"
#include "sce/tensor.hpp"

namespace sce {

long Graph::intern(const Tensor& t) {
    if (t.node >= 0) {
        SCE_CHECK(t.node < static_cast<long>(nodes_.size()), "tensor tracked by a different graph");
        return t.node;
    }
    Tensor v = t;
    nodes_.push_back(Node{Op::Leaf, -1, -1, -1, false, std::move(v), {}, false, {}, {}});
    return static_cast<long>(nodes_.size()) - 1;
}

Tensor Graph::push(Op op, long a, long b, long c, Tensor value, std::vector<double> aux,
                   std::vector<long> iaux) {
    bool req = false;
    for (long p : {a, b, c})
        if (p >= 0 && nodes_[static_cast<size_t>(p)].requires_grad) req = true;
    nodes_.push_back(Node{op, a, b, c, req, std::move(value), {}, false, std::move(aux), std::move(iaux)});
    Tensor out = nodes_.back().value;
    out.node = static_cast<long>(nodes_.size()) - 1;
    return out;
}

Tensor Graph::leaf(const Tensor& value, bool requires_grad) {
    Tensor v = value;
    v.node = -1;
    nodes_.push_back(Node{Op::Leaf, -1, -1, -1, requires_grad, std::move(v), {}, false, {}, {}});
    Tensor out = nodes_.back().value;
    out.node = static_cast<long>(nodes_.size()) - 1;
    return out;
}

Tensor Graph::matmul(const Tensor& a, const Tensor& b) {
    long ia = intern(a), ib = intern(b);
    return push(Op::MatMul, ia, ib, -1, ops::matmul(a, b));
}

Tensor Graph::matmul_nt(const Tensor& a, const Tensor& b) {
    long ia = intern(a), ib = intern(b);
    return push(Op::MatMulNT, ia, ib, -1, ops::matmul_nt(a, b));
}

Tensor Graph::rows_dot(const Tensor& a, const Tensor& b) {
    long ia = intern(a), ib = intern(b);
    return push(Op::RowsDot, ia, ib, -1, ops::rows_dot(a, b));
}

Tensor Graph::add(const Tensor& a, const Tensor& b) {
    long ia = intern(a), ib = intern(b);
    return push(Op::Add, ia, ib, -1, ops::add(a, b));
}

Tensor Graph::add_bias(const Tensor& a, const Tensor& bias) {
    long ia = intern(a), ib = intern(bias);
    return push(Op::AddBias, ia, ib, -1, ops::add_bias(a, bias));
}

Tensor Graph::mul(const Tensor& a, const Tensor& b) {
    long ia = intern(a), ib = intern(b);
    return push(Op::Mul, ia, ib, -1, ops::mul(a, b));
}

Tensor Graph::scale(const Tensor& a, double s) {
    long ia = intern(a);
    return push(Op::Scale, ia, -1, -1, ops::scale(a, s), {s});
}

Tensor Graph::relu(const Tensor& a) {
    long ia = intern(a);
    return push(Op::Relu, ia, -1, -1, ops::relu(a));
}

Tensor Graph::log(const Tensor& a) {
    long ia = intern(a);
    return push(Op::Log, ia, -1, -1, ops::log(a));
}

Tensor Graph::clamp_min(const Tensor& a, double lo) {
    long ia = intern(a);
    return push(Op::ClampMin, ia, -1, -1, ops::clamp_min(a, lo, &clamp_events_), {lo});
}

Tensor Graph::reshape(const Tensor& a, std::vector<long> shape) {
    long ia = intern(a);
    return push(Op::Reshape, ia, -1, -1, ops::reshape(a, std::move(shape)));
}

Tensor Graph::concat_columns(const Tensor& a, const Tensor& b) {
    long ia = intern(a), ib = intern(b);
    return push(Op::ConcatCols, ia, ib, -1, ops::concat_columns(a, b), {}, {a.cols(), b.cols()});
}

Tensor Graph::sum_all(const Tensor& a) {
    long ia = intern(a);
    return push(Op::SumAll, ia, -1, -1, ops::sum_all(a));
}

Tensor Graph::mean_all(const Tensor& a) {
    long ia = intern(a);
    return push(Op::MeanAll, ia, -1, -1, ops::mean_all(a));
}

Tensor Graph::l2_normalize_rows(const Tensor& a) {
    long ia = intern(a);
    std::vector<double> norms(static_cast<size_t>(a.rows()));
    kernels::row_norms(a.data.data(), norms.data(), static_cast<size_t>(a.rows()),
                       static_cast<size_t>(a.cols()));
    return push(Op::L2NormRows, ia, -1, -1, ops::l2_normalize_rows(a), std::move(norms));
}

Tensor Graph::softmax_rows(const Tensor& a) {
    long ia = intern(a);
    return push(Op::SoftmaxRows, ia, -1, -1, ops::softmax_rows(a));
}

Tensor Graph::batchnorm_cols(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps,
                             Tensor* batch_mean, Tensor* batch_var) {
    long ix = intern(x), ig = intern(gamma), ib = intern(beta);
    ops::BatchNormStats st = ops::batchnorm_cols_train(x, gamma, beta, eps);
    if (batch_mean) *batch_mean = st.mean;
    if (batch_var) *batch_var = st.var;
    std::vector<double> aux;
    aux.reserve(static_cast<size_t>(2 * x.cols() + 1));
    for (double m : st.mean.data) aux.push_back(m);
    for (double v : st.var.data) aux.push_back(1.0 / std::sqrt(v + eps));
    aux.push_back(eps);
    return push(Op::BatchNorm, ix, ig, ib, std::move(st.y), std::move(aux));
}

Tensor Graph::conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, long stride, long pad) {
    long ix = intern(x), iw = intern(w), ib = intern(bias);
    return push(Op::Conv2d, ix, iw, ib, ops::conv2d(x, w, bias, stride, pad), {}, {stride, pad});
}

Tensor Graph::global_avg_pool(const Tensor& x) {
    long ix = intern(x);
    return push(Op::GlobalAvgPool, ix, -1, -1, ops::global_avg_pool(x));
}

Tensor& Graph::grad_buf(long idx) {
    Node& n = nodes_[static_cast<size_t>(idx)];
    if (!n.grad_init) {
        n.grad = Tensor::zeros(n.value.shape);
        n.grad_init = true;
    }
    return n.grad;
}

void Graph::accumulate(long idx, const Tensor& g) {
    if (idx < 0 || !nodes_[static_cast<size_t>(idx)].requires_grad) return;
    Tensor& buf = grad_buf(idx);
    kernels::add(buf.data.data(), g.data.data(), buf.data.data(), buf.data.size());
}

void Graph::backward(const Tensor& loss) {
    SCE_CHECK(!backward_done_, "backward already ran on this graph; build a fresh graph per step");
    SCE_CHECK(loss.node >= 0 && loss.node < static_cast<long>(nodes_.size()),
              "backward: loss is detached from this graph");
    SCE_CHECK(loss.numel() == 1, "backward: loss must be scalar, numel ", loss.numel());
    backward_done_ = true;
    grad_buf(loss.node).data[0] = 1.0;
    for (long idx = loss.node; idx >= 0; --idx) {
        const Node& n = nodes_[static_cast<size_t>(idx)];
        if (!n.grad_init || !n.requires_grad || n.op == Op::Leaf) continue;
        backward_node(idx);
    }
}

void Graph::backward_node(long idx) {
    Node& n = nodes_[static_cast<size_t>(idx)];
    const Tensor& g = n.grad;
    auto val = [&](long p) -> const Tensor& { return nodes_[static_cast<size_t>(p)].value; };
    auto wants = [&](long p) { return p >= 0 && nodes_[static_cast<size_t>(p)].requires_grad; };

    switch (n.op) {
        case Op::Leaf:
            break;
        case Op::MatMul: {
            if (wants(n.a)) accumulate(n.a, ops::matmul_nt(g, val(n.b)));
            if (wants(n.b)) {
                Tensor& db = grad_buf(n.b);
                kernels::matmul_tn_acc(val(n.a).data.data(), g.data.data(), db.data.data(),
                                       static_cast<size_t>(val(n.a).rows()),
                                       static_cast<size_t>(val(n.a).cols()),
                                       static_cast<size_t>(g.cols()));
            }
            break;
        }
        case Op::MatMulNT: {
            if (wants(n.a)) accumulate(n.a, ops::matmul(g, val(n.b)));
            if (wants(n.b)) {
                // dB += g^T * A, via the transposed-accumulate kernel on g.
                Tensor& db = grad_buf(n.b);
                kernels::matmul_tn_acc(g.data.data(), val(n.a).data.data(), db.data.data(),
                                       static_cast<size_t>(g.rows()), static_cast<size_t>(g.cols()),
                                       static_cast<size_t>(val(n.a).cols()));
            }
            break;
        }
        case Op::RowsDot: {
            const Tensor& a = val(n.a);
            const Tensor& b = val(n.b);
            const long r = a.rows(), c = a.cols();
            if (wants(n.a)) {
                Tensor da = Tensor::zeros(a.shape);
                for (long i = 0; i < r; ++i)
                    for (long j = 0; j < c; ++j) da.at(i, j) = g.data[static_cast<size_t>(i)] * b.at(i, j);
                accumulate(n.a, da);
            }
            if (wants(n.b)) {
                Tensor db = Tensor::zeros(b.shape);
                for (long i = 0; i < r; ++i)
                    for (long j = 0; j < c; ++j) db.at(i, j) = g.data[static_cast<size_t>(i)] * a.at(i, j);
                accumulate(n.b, db);
            }
            break;
        }
        case Op::Add:
            accumulate(n.a, g);
            accumulate(n.b, g);
            break;
        case Op::AddBias: {
            accumulate(n.a, g);
            if (wants(n.b)) {
                Tensor db = Tensor::zeros({1, g.cols()});
                for (long i = 0; i < g.rows(); ++i)
                    for (long j = 0; j < g.cols(); ++j) db.data[static_cast<size_t>(j)] += g.at(i, j);
                accumulate(n.b, db);
            }
            break;
        }
        case Op::Mul:
            if (wants(n.a)) accumulate(n.a, ops::mul(g, val(n.b)));
            if (wants(n.b)) accumulate(n.b, ops::mul(g, val(n.a)));
            break;
        case Op::Scale:
            accumulate(n.a, ops::scale(g, n.aux[0]));
            break;
        case Op::Relu: {
            Tensor da = Tensor::zeros(g.shape);
            kernels::relu_backward(val(n.a).data.data(), g.data.data(), da.data.data(), g.data.size());
            accumulate(n.a, da);
            break;
        }
        case Op::Log: {
            const Tensor& x = val(n.a);
            Tensor da = Tensor::zeros(g.shape);
            for (size_t i = 0; i < g.data.size(); ++i) da.data[i] = g.data[i] / x.data[i];
            accumulate(n.a, da);
            break;
        }
        case Op::ClampMin: {
            const Tensor& x = val(n.a);
            const double lo = n.aux[0];
            Tensor da = Tensor::zeros(g.shape);
            for (size_t i = 0; i < g.data.size(); ++i) da.data[i] = x.data[i] >= lo ? g.data[i] : 0.0;
            accumulate(n.a, da);
            break;
        }
        case Op::Reshape: {
            Tensor da = g;
            da.node = -1;
            da.shape = val(n.a).shape;
            accumulate(n.a, da);
            break;
        }
        case Op::ConcatCols: {
            const long ca = n.iaux[0], cb = n.iaux[1];
            const long r = g.rows();
            if (wants(n.a)) {
                Tensor da = Tensor::zeros({r, ca});
                for (long i = 0; i < r; ++i)
                    for (long j = 0; j < ca; ++j) da.at(i, j) = g.at(i, j);
                accumulate(n.a, da);
            }
            if (wants(n.b)) {
                Tensor db = Tensor::zeros({r, cb});
                for (long i = 0; i < r; ++i)
                    for (long j = 0; j < cb; ++j) db.at(i, j) = g.at(i, ca + j);
                accumulate(n.b, db);
            }
            break;
        }
        case Op::SumAll:
            accumulate(n.a, Tensor::full(val(n.a).shape, g.item()));
            break;
        case Op::MeanAll:
            accumulate(n.a, Tensor::full(val(n.a).shape, g.item() / static_cast<double>(val(n.a).numel())));
            break;
        case Op::L2NormRows: {
            const Tensor& y = n.value;
            const long r = y.rows(), c = y.cols();
            Tensor da = Tensor::zeros(y.shape);
            for (long i = 0; i < r; ++i) {
                double gy = 0.0;
                for (long j = 0; j < c; ++j) gy += g.at(i, j) * y.at(i, j);
                const double inv = 1.0 / n.aux[static_cast<size_t>(i)];
                for (long j = 0; j < c; ++j) da.at(i, j) = (g.at(i, j) - gy * y.at(i, j)) * inv;
            }
            accumulate(n.a, da);
            break;
        }
        case Op::SoftmaxRows: {
            const Tensor& p = n.value;
            const long r = p.rows(), c = p.cols();
            Tensor da = Tensor::zeros(p.shape);
            for (long i = 0; i < r; ++i) {
                double gp = 0.0;
                for (long j = 0; j < c; ++j) gp += g.at(i, j) * p.at(i, j);
                for (long j = 0; j < c; ++j) da.at(i, j) = p.at(i, j) * (g.at(i, j) - gp);
            }
            accumulate(n.a, da);
            break;
        }
        case Op::BatchNorm: {
            const Tensor& x = val(n.a);
            const Tensor& gamma = val(n.b);
            const long r = x.rows(), c = x.cols();
            const double* mean = n.aux.data();
            const double* invstd = n.aux.data() + c;
            const double invr = 1.0 / static_cast<double>(r);
            if (wants(n.c)) {
                Tensor dbeta = Tensor::zeros({1, c});
                for (long i = 0; i < r; ++i)
                    for (long j = 0; j < c; ++j) dbeta.data[static_cast<size_t>(j)] += g.at(i, j);
                accumulate(n.c, dbeta);
            }
            std::vector<double> sum_g(static_cast<size_t>(c), 0.0);
            std::vector<double> sum_gx(static_cast<size_t>(c), 0.0);
            for (long i = 0; i < r; ++i)
                for (long j = 0; j < c; ++j) {
                    const double xhat = (x.at(i, j) - mean[j]) * invstd[j];
                    sum_g[static_cast<size_t>(j)] += g.at(i, j);
                    sum_gx[static_cast<size_t>(j)] += g.at(i, j) * xhat;
                }
            if (wants(n.b)) {
                Tensor dgamma = Tensor::zeros({1, c});
                for (long j = 0; j < c; ++j) dgamma.data[static_cast<size_t>(j)] = sum_gx[static_cast<size_t>(j)];
                accumulate(n.b, dgamma);
            }
            if (wants(n.a)) {
                Tensor dx = Tensor::zeros(x.shape);
                for (long i = 0; i < r; ++i)
                    for (long j = 0; j < c; ++j) {
                        const double xhat = (x.at(i, j) - mean[j]) * invstd[j];
                        dx.at(i, j) = gamma.data[static_cast<size_t>(j)] * invstd[j] *
                                      (g.at(i, j) - invr * sum_g[static_cast<size_t>(j)] -
                                       xhat * invr * sum_gx[static_cast<size_t>(j)]);
                    }
                accumulate(n.a, dx);
            }
            break;
        }
        case Op::Conv2d: {
            const Tensor& x = val(n.a);
            const Tensor& w = val(n.b);
            const long stride = n.iaux[0], pad = n.iaux[1];
            const long B = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3];
            const long OC = w.shape[0], KH = w.shape[2], KW = w.shape[3];
            const long OH = g.shape[2], OW = g.shape[3];
            auto gidx = [&](long b, long oc, long i, long j) {
                return static_cast<size_t>(((b * OC + oc) * OH + i) * OW + j);
            };
            auto xidx = [&](long b, long c, long i, long j) {
                return static_cast<size_t>(((b * C + c) * H + i) * W + j);
            };
            auto widx = [&](long oc, long c, long ki, long kj) {
                return static_cast<size_t>(((oc * C + c) * KH + ki) * KW + kj);
            };
            if (wants(n.c)) {
                Tensor db = Tensor::zeros({OC});
                for (long b = 0; b < B; ++b)
                    for (long oc = 0; oc < OC; ++oc)
                        for (long i = 0; i < OH; ++i)
                            for (long j = 0; j < OW; ++j)
                                db.data[static_cast<size_t>(oc)] += g.data[gidx(b, oc, i, j)];
                accumulate(n.c, db);
            }
            if (wants(n.b)) {
                Tensor dw = Tensor::zeros(w.shape);
                for (long b = 0; b < B; ++b)
                    for (long oc = 0; oc < OC; ++oc)
                        for (long i = 0; i < OH; ++i)
                            for (long j = 0; j < OW; ++j) {
                                const double gv = g.data[gidx(b, oc, i, j)];
                                for (long c = 0; c < C; ++c)
                                    for (long ki = 0; ki < KH; ++ki)
                                        for (long kj = 0; kj < KW; ++kj) {
                                            const long xi = i * stride - pad + ki;
                                            const long xj = j * stride - pad + kj;
                                            if (xi < 0 || xj < 0 || xi >= H || xj >= W) continue;
                                            dw.data[widx(oc, c, ki, kj)] += gv * x.data[xidx(b, c, xi, xj)];
                                        }
                            }
                accumulate(n.b, dw);
            }
            if (wants(n.a)) {
                Tensor dx = Tensor::zeros(x.shape);
                for (long b = 0; b < B; ++b)
                    for (long oc = 0; oc < OC; ++oc)
                        for (long i = 0; i < OH; ++i)
                            for (long j = 0; j < OW; ++j) {
                                const double gv = g.data[gidx(b, oc, i, j)];
                                for (long c = 0; c < C; ++c)
                                    for (long ki = 0; ki < KH; ++ki)
                                        for (long kj = 0; kj < KW; ++kj) {
                                            const long xi = i * stride - pad + ki;
                                            const long xj = j * stride - pad + kj;
                                            if (xi < 0 || xj < 0 || xi >= H || xj >= W) continue;
                                            dx.data[xidx(b, c, xi, xj)] += gv * w.data[widx(oc, c, ki, kj)];
                                        }
                            }
                accumulate(n.a, dx);
            }
            break;
        }
        case Op::GlobalAvgPool: {
            const Tensor& x = val(n.a);
            const long B = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3];
            const double inv = 1.0 / static_cast<double>(H * W);
            Tensor dx = Tensor::zeros(x.shape);
            for (long b = 0; b < B; ++b)
                for (long c = 0; c < C; ++c) {
                    const double gv = g.at(b, c) * inv;
                    for (long i = 0; i < H; ++i)
                        for (long j = 0; j < W; ++j)
                            dx.data[static_cast<size_t>(((b * C + c) * H + i) * W + j)] = gv;
                }
            accumulate(n.a, dx);
            break;
        }
    }
}

const Tensor& Graph::grad(const Tensor& t) const {
    SCE_CHECK(t.node >= 0 && t.node < static_cast<long>(nodes_.size()), "grad: tensor not in graph");
    const Node& n = nodes_[static_cast<size_t>(t.node)];
    SCE_CHECK(n.grad_init, "grad: no gradient reached this node");
    return n.grad;
}

bool Graph::has_grad(const Tensor& t) const {
    if (t.node < 0 || t.node >= static_cast<long>(nodes_.size())) return false;
    return nodes_[static_cast<size_t>(t.node)].grad_init;
}

}  // namespace sce
