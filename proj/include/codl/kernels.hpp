#pragma once

#include <cstddef>

// Dense kernels behind the tensor ops. kern:: versions parallelize with
// OpenMP above a grain size; each output element is produced by exactly one
// thread with a fixed serial accumulation order, so results are bit-identical
// to the serial path for any thread count. ref:: versions are plain serial
// loops kept as an independent oracle for tests and as the benchmark baseline.

namespace codl::kern {

// out[m×n] = a[m×k] · b[k×n]
void matmul(const double* a, const double* b, double* out, int m, int k, int n);
// da[m×k] += g[m×n] · b[k×n]^T
void matmul_acc_nt(const double* g, const double* b, double* da, int m, int k, int n);
// db[k×n] += a[m×k]^T · g[m×n]
void matmul_acc_tn(const double* a, const double* g, double* db, int m, int k, int n);

void add(const double* a, const double* b, double* out, int n);
void sub(const double* a, const double* b, double* out, int n);
void mul(const double* a, const double* b, double* out, int n);
// out = a + c*b
void axpy(const double* a, const double* b, double c, double* out, int n);
void scale(const double* a, double c, double* out, int n);
void add_scalar(const double* a, double c, double* out, int n);

void tanh_map(const double* a, double* out, int n);
void elu_map(const double* a, double* out, int n);
void relu_pos_map(const double* a, double* out, int n);
void abs_map(const double* a, double* out, int n);
void square_map(const double* a, double* out, int n);

// Backward accumulators: grad_in[i] += g[i] * f'(x[i]). Subgradients at
// kinks ([z]+ and |z| at 0) are fixed to 0. tanh uses the forward output.
void acc(const double* g, double* grad, int n);
void acc_scaled(const double* g, double c, double* grad, int n);
void mul_acc(const double* g, const double* other, double* grad, int n);
void tanh_bwd(const double* g, const double* out, double* grad, int n);
void elu_bwd(const double* g, const double* x, double* grad, int n);
void relu_pos_bwd(const double* g, const double* x, double* grad, int n);
void abs_bwd(const double* g, const double* x, double* grad, int n);
void square_bwd(const double* g, const double* x, double* grad, int n);

} // namespace codl::kern

namespace codl::ref {

void matmul(const double* a, const double* b, double* out, int m, int k, int n);
void axpy(const double* a, const double* b, double c, double* out, int n);
void tanh_map(const double* a, double* out, int n);
void elu_map(const double* a, double* out, int n);
void relu_pos_map(const double* a, double* out, int n);
void abs_map(const double* a, double* out, int n);

} // namespace codl::ref
