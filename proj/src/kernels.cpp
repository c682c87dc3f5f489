#include "sce/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace sce::kernels {

namespace {
std::atomic<int> g_threads{1};

inline void matmul_row(const double* a, const double* b, double* c, size_t i, size_t k, size_t n) {
    double* ci = c + i * n;
    const double* ai = a + i * k;
    std::fill(ci, ci + n, 0.0);
    for (size_t p = 0; p < k; ++p) {
        const double av = ai[p];
        const double* bp = b + p * n;
        for (size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
}

inline void matmul_nt_row(const double* a, const double* b, double* c, size_t i, size_t k, size_t n) {
    const double* ai = a + i * k;
    double* ci = c + i * n;
    for (size_t j = 0; j < n; ++j) {
        const double* bj = b + j * k;
        double acc = 0.0;
        for (size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
        ci[j] = acc;
    }
}

// One output row of c[k x n] += a^T * b, i.e. c[p][:] += sum_r a[r][p] * b[r][:]
inline void matmul_tn_row(const double* a, const double* b, double* c, size_t p, size_t r, size_t k, size_t n) {
    double* cp = c + p * n;
    for (size_t row = 0; row < r; ++row) {
        const double av = a[row * k + p];
        const double* br = b + row * n;
        for (size_t j = 0; j < n; ++j) cp[j] += av * br[j];
    }
}

inline void softmax_row(const double* x, double* out, size_t i, size_t cols) {
    const double* xi = x + i * cols;
    double* oi = out + i * cols;
    double m = xi[0];
    for (size_t j = 1; j < cols; ++j) m = std::max(m, xi[j]);
    double sum = 0.0;
    for (size_t j = 0; j < cols; ++j) {
        oi[j] = std::exp(xi[j] - m);
        sum += oi[j];
    }
    const double inv = 1.0 / sum;
    for (size_t j = 0; j < cols; ++j) oi[j] *= inv;
}

inline void l2_row(const double* x, double* out, size_t i, size_t cols) {
    const double* xi = x + i * cols;
    double* oi = out + i * cols;
    double sq = 0.0;
    for (size_t j = 0; j < cols; ++j) sq += xi[j] * xi[j];
    const double inv = 1.0 / std::sqrt(sq);
    for (size_t j = 0; j < cols; ++j) oi[j] = xi[j] * inv;
}
}  // namespace

void set_threads(int n) { g_threads.store(n < 1 ? 1 : n); }
int threads() { return g_threads.load(); }

namespace serial {

void matmul(const double* a, const double* b, double* c, size_t r, size_t k, size_t n) {
    for (size_t i = 0; i < r; ++i) matmul_row(a, b, c, i, k, n);
}

void matmul_nt(const double* a, const double* b, double* c, size_t r, size_t k, size_t n) {
    for (size_t i = 0; i < r; ++i) matmul_nt_row(a, b, c, i, k, n);
}

void matmul_tn_acc(const double* a, const double* b, double* c, size_t r, size_t k, size_t n) {
    for (size_t p = 0; p < k; ++p) matmul_tn_row(a, b, c, p, r, k, n);
}

void rows_dot(const double* a, const double* b, double* out, size_t rows, size_t cols) {
    for (size_t i = 0; i < rows; ++i) {
        double acc = 0.0;
        for (size_t j = 0; j < cols; ++j) acc += a[i * cols + j] * b[i * cols + j];
        out[i] = acc;
    }
}

void add(const double* a, const double* b, double* out, size_t n) {
    for (size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void mul(const double* a, const double* b, double* out, size_t n) {
    for (size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void scale(const double* a, double s, double* out, size_t n) {
    for (size_t i = 0; i < n; ++i) out[i] = a[i] * s;
}

void relu(const double* a, double* out, size_t n) {
    for (size_t i = 0; i < n; ++i) out[i] = a[i] > 0.0 ? a[i] : 0.0;
}

void relu_backward(const double* x, const double* g, double* out, size_t n) {
    for (size_t i = 0; i < n; ++i) out[i] = x[i] > 0.0 ? g[i] : 0.0;
}

void axpy(const double* a, double s, double* out, size_t n) {
    for (size_t i = 0; i < n; ++i) out[i] += s * a[i];
}

void softmax_rows(const double* x, double* out, size_t rows, size_t cols) {
    for (size_t i = 0; i < rows; ++i) softmax_row(x, out, i, cols);
}

void l2_normalize_rows(const double* x, double* out, size_t rows, size_t cols) {
    for (size_t i = 0; i < rows; ++i) l2_row(x, out, i, cols);
}

void row_norms(const double* x, double* out, size_t rows, size_t cols) {
    for (size_t i = 0; i < rows; ++i) {
        double sq = 0.0;
        for (size_t j = 0; j < cols; ++j) sq += x[i * cols + j] * x[i * cols + j];
        out[i] = std::sqrt(sq);
    }
}

}  // namespace serial

namespace omp {

void matmul(const double* a, const double* b, double* c, size_t r, size_t k, size_t n) {
#pragma omp parallel for schedule(static) num_threads(threads())
    for (size_t i = 0; i < r; ++i) matmul_row(a, b, c, i, k, n);
}

void matmul_nt(const double* a, const double* b, double* c, size_t r, size_t k, size_t n) {
#pragma omp parallel for schedule(static) num_threads(threads())
    for (size_t i = 0; i < r; ++i) matmul_nt_row(a, b, c, i, k, n);
}

void matmul_tn_acc(const double* a, const double* b, double* c, size_t r, size_t k, size_t n) {
#pragma omp parallel for schedule(static) num_threads(threads())
    for (size_t p = 0; p < k; ++p) matmul_tn_row(a, b, c, p, r, k, n);
}

void rows_dot(const double* a, const double* b, double* out, size_t rows, size_t cols) {
#pragma omp parallel for schedule(static) num_threads(threads())
    for (size_t i = 0; i < rows; ++i) {
        double acc = 0.0;
        for (size_t j = 0; j < cols; ++j) acc += a[i * cols + j] * b[i * cols + j];
        out[i] = acc;
    }
}

void add(const double* a, const double* b, double* out, size_t n) {
#pragma omp parallel for schedule(static) num_threads(threads())
    for (size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void mul(const double* a, const double* b, double* out, size_t n) {
#pragma omp parallel for schedule(static) num_threads(threads())
    for (size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void scale(const double* a, double s, double* out, size_t n) {
#pragma omp parallel for schedule(static) num_threads(threads())
    for (size_t i = 0; i < n; ++i) out[i] = a[i] * s;
}

void relu(const double* a, double* out, size_t n) {
#pragma omp parallel for schedule(static) num_threads(threads())
    for (size_t i = 0; i < n; ++i) out[i] = a[i] > 0.0 ? a[i] : 0.0;
}

void relu_backward(const double* x, const double* g, double* out, size_t n) {
#pragma omp parallel for schedule(static) num_threads(threads())
    for (size_t i = 0; i < n; ++i) out[i] = x[i] > 0.0 ? g[i] : 0.0;
}

void axpy(const double* a, double s, double* out, size_t n) {
#pragma omp parallel for schedule(static) num_threads(threads())
    for (size_t i = 0; i < n; ++i) out[i] += s * a[i];
}

void softmax_rows(const double* x, double* out, size_t rows, size_t cols) {
#pragma omp parallel for schedule(static) num_threads(threads())
    for (size_t i = 0; i < rows; ++i) softmax_row(x, out, i, cols);
}

void l2_normalize_rows(const double* x, double* out, size_t rows, size_t cols) {
#pragma omp parallel for schedule(static) num_threads(threads())
    for (size_t i = 0; i < rows; ++i) l2_row(x, out, i, cols);
}

void row_norms(const double* x, double* out, size_t rows, size_t cols) {
#pragma omp parallel for schedule(static) num_threads(threads())
    for (size_t i = 0; i < rows; ++i) {
        double sq = 0.0;
        for (size_t j = 0; j < cols; ++j) sq += x[i * cols + j] * x[i * cols + j];
        out[i] = std::sqrt(sq);
    }
}

}  // namespace omp

#define SCE_DISPATCH(fn, ...)                  \
    if (threads() > 1) {                       \
        omp::fn(__VA_ARGS__);                  \
    } else {                                   \
        serial::fn(__VA_ARGS__);               \
    }

void matmul(const double* a, const double* b, double* c, size_t r, size_t k, size_t n) {
    SCE_DISPATCH(matmul, a, b, c, r, k, n)
}
void matmul_nt(const double* a, const double* b, double* c, size_t r, size_t k, size_t n) {
    SCE_DISPATCH(matmul_nt, a, b, c, r, k, n)
}
void matmul_tn_acc(const double* a, const double* b, double* c, size_t r, size_t k, size_t n) {
    SCE_DISPATCH(matmul_tn_acc, a, b, c, r, k, n)
}
void rows_dot(const double* a, const double* b, double* out, size_t rows, size_t cols) {
    SCE_DISPATCH(rows_dot, a, b, out, rows, cols)
}
void add(const double* a, const double* b, double* out, size_t n) { SCE_DISPATCH(add, a, b, out, n) }
void mul(const double* a, const double* b, double* out, size_t n) { SCE_DISPATCH(mul, a, b, out, n) }
void scale(const double* a, double s, double* out, size_t n) { SCE_DISPATCH(scale, a, s, out, n) }
void relu(const double* a, double* out, size_t n) { SCE_DISPATCH(relu, a, out, n) }
void relu_backward(const double* x, const double* g, double* out, size_t n) {
    SCE_DISPATCH(relu_backward, x, g, out, n)
}
void axpy(const double* a, double s, double* out, size_t n) { SCE_DISPATCH(axpy, a, s, out, n) }
void softmax_rows(const double* x, double* out, size_t rows, size_t cols) {
    SCE_DISPATCH(softmax_rows, x, out, rows, cols)
}
void l2_normalize_rows(const double* x, double* out, size_t rows, size_t cols) {
    SCE_DISPATCH(l2_normalize_rows, x, out, rows, cols)
}
void row_norms(const double* x, double* out, size_t rows, size_t cols) {
    SCE_DISPATCH(row_norms, x, out, rows, cols)
}

#undef SCE_DISPATCH

}  // namespace sce::kernels
