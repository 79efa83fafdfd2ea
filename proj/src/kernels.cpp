#include "codl/kernels.hpp"

#include <cmath>

namespace codl::kern {

namespace {
// Grain sizes below which kernels run the plain serial loop. Entering an
// OpenMP region costs microseconds even when the if-clause disables
// threading, so the dispatch is an explicit branch: the small per-step
// matvecs of a training run must never touch the runtime.
constexpr long kMatmulGrain = 1L << 16; // m*k*n
constexpr long kMapGrain = 1L << 15;    // element count
} // namespace

namespace {

// Output buffers come from a fresh arena slot or a fresh allocation, so they
// never alias the inputs; the restrict qualifiers let row accumulators live
// in registers. n == 1 (the matvec case every training step hits) gets a
// plain dot-product loop.

inline void matmul_row(const double* arow, const double* b, double* __restrict orow, int k,
                       int n) {
    if (n == 1) {
        double s = 0.0;
        for (int p = 0; p < k; ++p) s += arow[p] * b[p];
        orow[0] = s;
        return;
    }
    for (int j = 0; j < n; ++j) orow[j] = 0.0;
    for (int p = 0; p < k; ++p) {
        const double av = arow[p];
        const double* brow = b + (size_t)p * n;
        for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
}

inline void matmul_acc_nt_row(const double* grow, const double* b, double* __restrict darow,
                              int k, int n) {
    if (n == 1) {
        const double gv = grow[0];
        for (int p = 0; p < k; ++p) darow[p] += gv * b[p];
        return;
    }
    for (int p = 0; p < k; ++p) {
        const double* brow = b + (size_t)p * n;
        double s = 0.0;
        for (int j = 0; j < n; ++j) s += grow[j] * brow[j];
        darow[p] += s;
    }
}

inline void matmul_acc_tn_row(const double* a, const double* g, double* __restrict dbrow, int p,
                              int m, int k, int n) {
    if (n == 1) {
        double s = 0.0;
        for (int i = 0; i < m; ++i) s += a[(size_t)i * k + p] * g[i];
        dbrow[0] += s;
        return;
    }
    for (int i = 0; i < m; ++i) {
        const double av = a[(size_t)i * k + p];
        const double* grow = g + (size_t)i * n;
        for (int j = 0; j < n; ++j) dbrow[j] += av * grow[j];
    }
}

} // namespace

void matmul(const double* a, const double* b, double* out, int m, int k, int n) {
    if ((long)m * k * n < kMatmulGrain) {
        for (int i = 0; i < m; ++i)
            matmul_row(a + (size_t)i * k, b, out + (size_t)i * n, k, n);
        return;
    }
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) matmul_row(a + (size_t)i * k, b, out + (size_t)i * n, k, n);
}

void matmul_acc_nt(const double* g, const double* b, double* da, int m, int k, int n) {
    if ((long)m * k * n < kMatmulGrain) {
        for (int i = 0; i < m; ++i)
            matmul_acc_nt_row(g + (size_t)i * n, b, da + (size_t)i * k, k, n);
        return;
    }
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i)
        matmul_acc_nt_row(g + (size_t)i * n, b, da + (size_t)i * k, k, n);
}

void matmul_acc_tn(const double* a, const double* g, double* db, int m, int k, int n) {
    if ((long)m * k * n < kMatmulGrain) {
        for (int p = 0; p < k; ++p)
            matmul_acc_tn_row(a, g, db + (size_t)p * n, p, m, k, n);
        return;
    }
#pragma omp parallel for schedule(static)
    for (int p = 0; p < k; ++p) matmul_acc_tn_row(a, g, db + (size_t)p * n, p, m, k, n);
}

#define CODL_MAP_KERNEL(expr)                                                                    \
    do {                                                                                         \
        if (n < kMapGrain) {                                                                     \
            for (int i = 0; i < n; ++i) expr;                                                    \
            return;                                                                              \
        }                                                                                        \
        _Pragma("omp parallel for schedule(static)") for (int i = 0; i < n; ++i) expr;           \
    } while (0)

void add(const double* a, const double* b, double* out, int n) {
    CODL_MAP_KERNEL(out[i] = a[i] + b[i]);
}

void sub(const double* a, const double* b, double* out, int n) {
    CODL_MAP_KERNEL(out[i] = a[i] - b[i]);
}

void mul(const double* a, const double* b, double* out, int n) {
    CODL_MAP_KERNEL(out[i] = a[i] * b[i]);
}

void axpy(const double* a, const double* b, double c, double* out, int n) {
    CODL_MAP_KERNEL(out[i] = a[i] + c * b[i]);
}

void scale(const double* a, double c, double* out, int n) {
    CODL_MAP_KERNEL(out[i] = c * a[i]);
}

void add_scalar(const double* a, double c, double* out, int n) {
    CODL_MAP_KERNEL(out[i] = a[i] + c);
}

void tanh_map(const double* a, double* out, int n) {
    CODL_MAP_KERNEL(out[i] = std::tanh(a[i]));
}

void elu_map(const double* a, double* out, int n) {
    CODL_MAP_KERNEL(out[i] = a[i] >= 0.0 ? a[i] : std::expm1(a[i]));
}

void relu_pos_map(const double* a, double* out, int n) {
    CODL_MAP_KERNEL(out[i] = a[i] > 0.0 ? a[i] : 0.0);
}

void abs_map(const double* a, double* out, int n) {
    CODL_MAP_KERNEL(out[i] = std::fabs(a[i]));
}

void square_map(const double* a, double* out, int n) {
    CODL_MAP_KERNEL(out[i] = a[i] * a[i]);
}

void acc(const double* g, double* grad, int n) { CODL_MAP_KERNEL(grad[i] += g[i]); }

void acc_scaled(const double* g, double c, double* grad, int n) {
    CODL_MAP_KERNEL(grad[i] += c * g[i]);
}

void mul_acc(const double* g, const double* other, double* grad, int n) {
    CODL_MAP_KERNEL(grad[i] += g[i] * other[i]);
}

void tanh_bwd(const double* g, const double* out, double* grad, int n) {
    CODL_MAP_KERNEL(grad[i] += g[i] * (1.0 - out[i] * out[i]));
}

void elu_bwd(const double* g, const double* x, double* grad, int n) {
    CODL_MAP_KERNEL(grad[i] += g[i] * (x[i] >= 0.0 ? 1.0 : std::exp(x[i])));
}

void relu_pos_bwd(const double* g, const double* x, double* grad, int n) {
    CODL_MAP_KERNEL(grad[i] += x[i] > 0.0 ? g[i] : 0.0);
}

void abs_bwd(const double* g, const double* x, double* grad, int n) {
    CODL_MAP_KERNEL(grad[i] += x[i] > 0.0 ? g[i] : (x[i] < 0.0 ? -g[i] : 0.0));
}

void square_bwd(const double* g, const double* x, double* grad, int n) {
    CODL_MAP_KERNEL(grad[i] += 2.0 * x[i] * g[i]);
}

#undef CODL_MAP_KERNEL

} // namespace codl::kern

namespace codl::ref {

void matmul(const double* a, const double* b, double* out, int m, int k, int n) {
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
            double s = 0.0;
            for (int p = 0; p < k; ++p) s += a[(size_t)i * k + p] * b[(size_t)p * n + j];
            out[(size_t)i * n + j] = s;
        }
}

void axpy(const double* a, const double* b, double c, double* out, int n) {
    for (int i = 0; i < n; ++i) out[i] = a[i] + c * b[i];
}

void tanh_map(const double* a, double* out, int n) {
    for (int i = 0; i < n; ++i) out[i] = std::tanh(a[i]);
}

void elu_map(const double* a, double* out, int n) {
    for (int i = 0; i < n; ++i) out[i] = a[i] >= 0.0 ? a[i] : std::exp(a[i]) - 1.0;
}

void relu_pos_map(const double* a, double* out, int n) {
    for (int i = 0; i < n; ++i) out[i] = a[i] > 0.0 ? a[i] : 0.0;
}

void abs_map(const double* a, double* out, int n) {
    for (int i = 0; i < n; ++i) out[i] = a[i] < 0.0 ? -a[i] : a[i];
}

} // namespace codl::ref
