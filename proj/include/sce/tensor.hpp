#pragma once

#include <cstdint>
#include <vector>

#include "sce/common.hpp"

namespace sce {

// Dense row-major tensor of 64-bit floats. `node` points into the Graph that
// produced this tensor (-1 when the tensor is a plain value).
struct Tensor {
    std::vector<long> shape;
    std::vector<double> data;
    long node = -1;

    Tensor() = default;
    Tensor(std::vector<long> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
        SCE_CHECK(numel_of(shape) == static_cast<long>(data.size()),
                  "tensor shape/data mismatch: shape product ", numel_of(shape), " vs ", data.size());
    }

    static long numel_of(const std::vector<long>& s) {
        long n = 1;
        for (long e : s) {
            SCE_CHECK(e > 0, "tensor extents must be positive, got ", e);
            n *= e;
        }
        return n;
    }

    static Tensor zeros(std::vector<long> s) {
        long n = numel_of(s);
        return Tensor(std::move(s), std::vector<double>(static_cast<size_t>(n), 0.0));
    }
    static Tensor full(std::vector<long> s, double v) {
        long n = numel_of(s);
        return Tensor(std::move(s), std::vector<double>(static_cast<size_t>(n), v));
    }
    static Tensor scalar(double v) { return Tensor({1}, {v}); }
    static Tensor matrix(long r, long c, std::vector<double> d) { return Tensor({r, c}, std::move(d)); }

    long numel() const { return static_cast<long>(data.size()); }
    long ndim() const { return static_cast<long>(shape.size()); }
    long rows() const {
        SCE_CHECK(ndim() == 2, "rows() requires a 2-d tensor, got ndim ", ndim());
        return shape[0];
    }
    long cols() const {
        SCE_CHECK(ndim() == 2, "cols() requires a 2-d tensor, got ndim ", ndim());
        return shape[1];
    }
    double& at(long i, long j) { return data[static_cast<size_t>(i * shape[1] + j)]; }
    double at(long i, long j) const { return data[static_cast<size_t>(i * shape[1] + j)]; }
    double item() const {
        SCE_CHECK(numel() == 1, "item() requires a scalar tensor, numel ", numel());
        return data[0];
    }
    bool same_shape(const Tensor& o) const { return shape == o.shape; }
    bool tracked() const { return node >= 0; }
};

// Plain value ops. The Graph methods below call these for their forward
// math, so tracked and untracked paths share one numeric implementation.
namespace ops {

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // a[R x D] * b[K x D]^T
Tensor rows_dot(const Tensor& a, const Tensor& b);   // R x 1
Tensor add(const Tensor& a, const Tensor& b);
Tensor add_bias(const Tensor& a, const Tensor& bias);  // bias 1 x C broadcast over rows
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor relu(const Tensor& a);
Tensor log(const Tensor& a);
Tensor clamp_min(const Tensor& a, double lo, long* clamped = nullptr);
Tensor reshape(const Tensor& a, std::vector<long> shape);
Tensor concat_columns(const Tensor& a, const Tensor& b);
Tensor sum_all(const Tensor& a);
Tensor mean_all(const Tensor& a);
Tensor l2_normalize_rows(const Tensor& a);
Tensor softmax_rows(const Tensor& a);

struct BatchNormStats {
    Tensor y;
    Tensor mean;  // 1 x C batch mean
    Tensor var;   // 1 x C batch variance (population)
};
BatchNormStats batchnorm_cols_train(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps);
Tensor batchnorm_cols_eval(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                           const Tensor& running_mean, const Tensor& running_var, double eps);

// x {B,C,H,W}, w {OC,C,KH,KW}, bias {OC}; zero padding.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, long stride, long pad);
Tensor global_avg_pool(const Tensor& x);  // {B,C,H,W} -> {B,C}

}  // namespace ops

// Reverse-mode differentiation tape. Nodes are appended in creation order,
// which is also a topological order; backward() walks it in reverse once.
class Graph {
public:
    Tensor leaf(const Tensor& value, bool requires_grad);
    Tensor constant(const Tensor& value) { return leaf(value, false); }

    Tensor matmul(const Tensor& a, const Tensor& b);
    Tensor matmul_nt(const Tensor& a, const Tensor& b);
    Tensor rows_dot(const Tensor& a, const Tensor& b);
    Tensor add(const Tensor& a, const Tensor& b);
    Tensor add_bias(const Tensor& a, const Tensor& bias);
    Tensor mul(const Tensor& a, const Tensor& b);
    Tensor scale(const Tensor& a, double s);
    Tensor relu(const Tensor& a);
    Tensor log(const Tensor& a);
    Tensor clamp_min(const Tensor& a, double lo);
    Tensor reshape(const Tensor& a, std::vector<long> shape);
    Tensor concat_columns(const Tensor& a, const Tensor& b);
    Tensor sum_all(const Tensor& a);
    Tensor mean_all(const Tensor& a);
    Tensor l2_normalize_rows(const Tensor& a);
    Tensor softmax_rows(const Tensor& a);
    Tensor batchnorm_cols(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps,
                          Tensor* batch_mean = nullptr, Tensor* batch_var = nullptr);
    Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, long stride, long pad);
    Tensor global_avg_pool(const Tensor& x);

    // Populates gradients for every node that requires grad. May be called
    // once per graph; the tape is rebuilt each training step.
    void backward(const Tensor& loss);

    const Tensor& grad(const Tensor& t) const;
    bool has_grad(const Tensor& t) const;
    long clamp_events() const { return clamp_events_; }
    size_t node_count() const { return nodes_.size(); }

private:
    enum class Op {
        Leaf, MatMul, MatMulNT, RowsDot, Add, AddBias, Mul, Scale, Relu, Log, ClampMin,
        Reshape, ConcatCols, SumAll, MeanAll, L2NormRows, SoftmaxRows, BatchNorm, Conv2d, GlobalAvgPool,
    };
    struct Node {
        Op op;
        long a = -1, b = -1, c = -1;
        bool requires_grad = false;
        Tensor value;
        Tensor grad;
        bool grad_init = false;
        std::vector<double> aux;
        std::vector<long> iaux;
    };

    long intern(const Tensor& t);
    Tensor push(Op op, long a, long b, long c, Tensor value, std::vector<double> aux = {},
                std::vector<long> iaux = {});
    Tensor& grad_buf(long idx);
    void accumulate(long idx, const Tensor& g);
    void backward_node(long idx);

    std::vector<Node> nodes_;
    bool backward_done_ = false;
    long clamp_events_ = 0;
};

}  // namespace sce
