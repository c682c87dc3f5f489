#pragma once

#include <cstddef>

namespace sce::kernels {

// Worker threads used by the omp:: kernels. 1 selects the serial reference
// path. Every parallel kernel assigns whole output elements to threads and
// keeps the per-element accumulation order of the serial code, so results
// are bitwise identical for any fixed thread count.
void set_threads(int n);
int threads();

namespace serial {

// c[r x n] = a[r x k] * b[k x n]
void matmul(const double* a, const double* b, double* c, size_t r, size_t k, size_t n);
// c[r x n] = a[r x k] * b[n x k]^T
void matmul_nt(const double* a, const double* b, double* c, size_t r, size_t k, size_t n);
// c[k x n] += a[r x k]^T * b[r x n]
void matmul_tn_acc(const double* a, const double* b, double* c, size_t r, size_t k, size_t n);
// out[i] = dot(a row i, b row i)
void rows_dot(const double* a, const double* b, double* out, size_t rows, size_t cols);
void add(const double* a, const double* b, double* out, size_t n);
void mul(const double* a, const double* b, double* out, size_t n);
void scale(const double* a, double s, double* out, size_t n);
void relu(const double* a, double* out, size_t n);
void relu_backward(const double* x, const double* g, double* out, size_t n);
// axpy: out += s * a
void axpy(const double* a, double s, double* out, size_t n);
void softmax_rows(const double* x, double* out, size_t rows, size_t cols);
void l2_normalize_rows(const double* x, double* out, size_t rows, size_t cols);
void row_norms(const double* x, double* out, size_t rows, size_t cols);

}  // namespace serial

namespace omp {

void matmul(const double* a, const double* b, double* c, size_t r, size_t k, size_t n);
void matmul_nt(const double* a, const double* b, double* c, size_t r, size_t k, size_t n);
void matmul_tn_acc(const double* a, const double* b, double* c, size_t r, size_t k, size_t n);
void rows_dot(const double* a, const double* b, double* out, size_t rows, size_t cols);
void add(const double* a, const double* b, double* out, size_t n);
void mul(const double* a, const double* b, double* out, size_t n);
void scale(const double* a, double s, double* out, size_t n);
void relu(const double* a, double* out, size_t n);
void relu_backward(const double* x, const double* g, double* out, size_t n);
void axpy(const double* a, double s, double* out, size_t n);
void softmax_rows(const double* x, double* out, size_t rows, size_t cols);
void l2_normalize_rows(const double* x, double* out, size_t rows, size_t cols);
void row_norms(const double* x, double* out, size_t rows, size_t cols);

}  // namespace omp

// Dispatchers: omp:: when threads() > 1, serial:: otherwise.
void matmul(const double* a, const double* b, double* c, size_t r, size_t k, size_t n);
void matmul_nt(const double* a, const double* b, double* c, size_t r, size_t k, size_t n);
void matmul_tn_acc(const double* a, const double* b, double* c, size_t r, size_t k, size_t n);
void rows_dot(const double* a, const double* b, double* out, size_t rows, size_t cols);
void add(const double* a, const double* b, double* out, size_t n);
void mul(const double* a, const double* b, double* out, size_t n);
void scale(const double* a, double s, double* out, size_t n);
void relu(const double* a, double* out, size_t n);
void relu_backward(const double* x, const double* g, double* out, size_t n);
void axpy(const double* a, double s, double* out, size_t n);
void softmax_rows(const double* x, double* out, size_t rows, size_t cols);
void l2_normalize_rows(const double* x, double* out, size_t rows, size_t cols);
void row_norms(const double* x, double* out, size_t rows, size_t cols);

}  // namespace sce::kernels
