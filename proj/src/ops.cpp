#include <algorithm>
#include <cmath>

#include "sce/kernels.hpp"
#include "sce/tensor.hpp"

namespace sce::ops {

namespace {
void check_finite_shape2(const Tensor& t, const char* who) {
    SCE_CHECK(t.ndim() == 2, who, ": expected 2-d tensor, got ndim ", t.ndim());
}
}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    check_finite_shape2(a, "matmul");
    check_finite_shape2(b, "matmul");
    SCE_CHECK(a.cols() == b.rows(), "matmul: inner extents differ, ", a.cols(), " vs ", b.rows());
    Tensor c = Tensor::zeros({a.rows(), b.cols()});
    kernels::matmul(a.data.data(), b.data.data(), c.data.data(),
                    static_cast<size_t>(a.rows()), static_cast<size_t>(a.cols()),
                    static_cast<size_t>(b.cols()));
    return c;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    check_finite_shape2(a, "matmul_nt");
    check_finite_shape2(b, "matmul_nt");
    SCE_CHECK(a.cols() == b.cols(), "matmul_nt: inner extents differ, ", a.cols(), " vs ", b.cols());
    Tensor c = Tensor::zeros({a.rows(), b.rows()});
    kernels::matmul_nt(a.data.data(), b.data.data(), c.data.data(),
                       static_cast<size_t>(a.rows()), static_cast<size_t>(a.cols()),
                       static_cast<size_t>(b.rows()));
    return c;
}

Tensor rows_dot(const Tensor& a, const Tensor& b) {
    check_finite_shape2(a, "rows_dot");
    SCE_CHECK(a.same_shape(b), "rows_dot: shapes differ");
    Tensor c = Tensor::zeros({a.rows(), 1});
    kernels::rows_dot(a.data.data(), b.data.data(), c.data.data(),
                      static_cast<size_t>(a.rows()), static_cast<size_t>(a.cols()));
    return c;
}

Tensor add(const Tensor& a, const Tensor& b) {
    SCE_CHECK(a.same_shape(b), "add: shapes differ");
    Tensor c = Tensor::zeros(a.shape);
    kernels::add(a.data.data(), b.data.data(), c.data.data(), a.data.size());
    return c;
}

Tensor add_bias(const Tensor& a, const Tensor& bias) {
    check_finite_shape2(a, "add_bias");
    SCE_CHECK(bias.ndim() == 2 && bias.rows() == 1 && bias.cols() == a.cols(),
              "add_bias: bias must be 1 x ", a.cols());
    Tensor c = a;
    c.node = -1;
    const long r = a.rows(), n = a.cols();
    for (long i = 0; i < r; ++i)
        for (long j = 0; j < n; ++j) c.at(i, j) += bias.data[static_cast<size_t>(j)];
    return c;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    SCE_CHECK(a.same_shape(b), "mul: shapes differ");
    Tensor c = Tensor::zeros(a.shape);
    kernels::mul(a.data.data(), b.data.data(), c.data.data(), a.data.size());
    return c;
}

Tensor scale(const Tensor& a, double s) {
    Tensor c = Tensor::zeros(a.shape);
    kernels::scale(a.data.data(), s, c.data.data(), a.data.size());
    return c;
}

Tensor relu(const Tensor& a) {
    Tensor c = Tensor::zeros(a.shape);
    kernels::relu(a.data.data(), c.data.data(), a.data.size());
    return c;
}

Tensor log(const Tensor& a) {
    Tensor c = Tensor::zeros(a.shape);
    for (size_t i = 0; i < a.data.size(); ++i) c.data[i] = std::log(a.data[i]);
    return c;
}

Tensor clamp_min(const Tensor& a, double lo, long* clamped) {
    Tensor c = a;
    c.node = -1;
    long hits = 0;
    for (double& v : c.data) {
        if (v < lo) {
            v = lo;
            ++hits;
        }
    }
    if (clamped) *clamped += hits;
    return c;
}

Tensor reshape(const Tensor& a, std::vector<long> shape) {
    SCE_CHECK(Tensor::numel_of(shape) == a.numel(), "reshape: element count mismatch");
    Tensor c = a;
    c.node = -1;
    c.shape = std::move(shape);
    return c;
}

Tensor concat_columns(const Tensor& a, const Tensor& b) {
    check_finite_shape2(a, "concat_columns");
    check_finite_shape2(b, "concat_columns");
    SCE_CHECK(a.rows() == b.rows(), "concat_columns: row counts differ, ", a.rows(), " vs ", b.rows());
    const long r = a.rows(), ca = a.cols(), cb = b.cols();
    Tensor c = Tensor::zeros({r, ca + cb});
    for (long i = 0; i < r; ++i) {
        for (long j = 0; j < ca; ++j) c.at(i, j) = a.at(i, j);
        for (long j = 0; j < cb; ++j) c.at(i, ca + j) = b.at(i, j);
    }
    return c;
}

Tensor sum_all(const Tensor& a) {
    double acc = 0.0;
    for (double v : a.data) acc += v;
    return Tensor::scalar(acc);
}

Tensor mean_all(const Tensor& a) {
    return Tensor::scalar(sum_all(a).item() / static_cast<double>(a.numel()));
}

Tensor l2_normalize_rows(const Tensor& a) {
    check_finite_shape2(a, "l2_normalize_rows");
    std::vector<double> norms(static_cast<size_t>(a.rows()));
    kernels::row_norms(a.data.data(), norms.data(), static_cast<size_t>(a.rows()),
                       static_cast<size_t>(a.cols()));
    for (long i = 0; i < a.rows(); ++i)
        SCE_CHECK(norms[static_cast<size_t>(i)] > 1e-12,
                  "l2_normalize_rows: degenerate near-zero row ", i);
    Tensor c = Tensor::zeros(a.shape);
    kernels::l2_normalize_rows(a.data.data(), c.data.data(), static_cast<size_t>(a.rows()),
                               static_cast<size_t>(a.cols()));
    return c;
}

Tensor softmax_rows(const Tensor& a) {
    check_finite_shape2(a, "softmax_rows");
    Tensor c = Tensor::zeros(a.shape);
    kernels::softmax_rows(a.data.data(), c.data.data(), static_cast<size_t>(a.rows()),
                          static_cast<size_t>(a.cols()));
    return c;
}

BatchNormStats batchnorm_cols_train(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                                    double eps) {
    check_finite_shape2(x, "batchnorm");
    const long r = x.rows(), n = x.cols();
    SCE_CHECK(gamma.numel() == n && beta.numel() == n, "batchnorm: gamma/beta size must equal cols");
    BatchNormStats out;
    out.mean = Tensor::zeros({1, n});
    out.var = Tensor::zeros({1, n});
    out.y = Tensor::zeros(x.shape);
    for (long j = 0; j < n; ++j) {
        double m = 0.0;
        for (long i = 0; i < r; ++i) m += x.at(i, j);
        m /= static_cast<double>(r);
        double v = 0.0;
        for (long i = 0; i < r; ++i) {
            const double d = x.at(i, j) - m;
            v += d * d;
        }
        v /= static_cast<double>(r);
        out.mean.data[static_cast<size_t>(j)] = m;
        out.var.data[static_cast<size_t>(j)] = v;
        const double inv = 1.0 / std::sqrt(v + eps);
        const double g = gamma.data[static_cast<size_t>(j)], b = beta.data[static_cast<size_t>(j)];
        for (long i = 0; i < r; ++i) out.y.at(i, j) = g * (x.at(i, j) - m) * inv + b;
    }
    return out;
}

Tensor batchnorm_cols_eval(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                           const Tensor& running_mean, const Tensor& running_var, double eps) {
    check_finite_shape2(x, "batchnorm");
    const long r = x.rows(), n = x.cols();
    Tensor y = Tensor::zeros(x.shape);
    for (long j = 0; j < n; ++j) {
        const double inv = 1.0 / std::sqrt(running_var.data[static_cast<size_t>(j)] + eps);
        const double m = running_mean.data[static_cast<size_t>(j)];
        const double g = gamma.data[static_cast<size_t>(j)], b = beta.data[static_cast<size_t>(j)];
        for (long i = 0; i < r; ++i) y.at(i, j) = g * (x.at(i, j) - m) * inv + b;
    }
    return y;
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, long stride, long pad) {
    SCE_CHECK(x.ndim() == 4 && w.ndim() == 4, "conv2d: expected {B,C,H,W} input and {OC,C,KH,KW} weight");
    const long B = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3];
    const long OC = w.shape[0], KH = w.shape[2], KW = w.shape[3];
    SCE_CHECK(w.shape[1] == C, "conv2d: channel mismatch, ", w.shape[1], " vs ", C);
    SCE_CHECK(bias.numel() == OC, "conv2d: bias size must equal out channels");
    const long OH = (H + 2 * pad - KH) / stride + 1;
    const long OW = (W + 2 * pad - KW) / stride + 1;
    SCE_CHECK(OH > 0 && OW > 0, "conv2d: output would be empty");
    Tensor y = Tensor::zeros({B, OC, OH, OW});
    auto xat = [&](long b, long c, long i, long j) -> double {
        if (i < 0 || j < 0 || i >= H || j >= W) return 0.0;
        return x.data[static_cast<size_t>(((b * C + c) * H + i) * W + j)];
    };
    for (long b = 0; b < B; ++b)
        for (long oc = 0; oc < OC; ++oc)
            for (long oi = 0; oi < OH; ++oi)
                for (long oj = 0; oj < OW; ++oj) {
                    double acc = bias.data[static_cast<size_t>(oc)];
                    for (long c = 0; c < C; ++c)
                        for (long ki = 0; ki < KH; ++ki)
                            for (long kj = 0; kj < KW; ++kj)
                                acc += w.data[static_cast<size_t>(((oc * C + c) * KH + ki) * KW + kj)] *
                                       xat(b, c, oi * stride - pad + ki, oj * stride - pad + kj);
                    y.data[static_cast<size_t>(((b * OC + oc) * OH + oi) * OW + oj)] = acc;
                }
    return y;
}

Tensor global_avg_pool(const Tensor& x) {
    SCE_CHECK(x.ndim() == 4, "global_avg_pool: expected {B,C,H,W}");
    const long B = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3];
    Tensor y = Tensor::zeros({B, C});
    const double inv = 1.0 / static_cast<double>(H * W);
    for (long b = 0; b < B; ++b)
        for (long c = 0; c < C; ++c) {
            double acc = 0.0;
            for (long i = 0; i < H; ++i)
                for (long j = 0; j < W; ++j)
                    acc += x.data[static_cast<size_t>(((b * C + c) * H + i) * W + j)];
            y.at(b, c) = acc * inv;
        }
    return y;
}

}  // namespace sce::ops
