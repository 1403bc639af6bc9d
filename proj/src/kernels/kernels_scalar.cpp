// Scalar reference kernels. The SIMD variants mirror the exact operation
// order used here; change one and you must change all of them.

#include "snowflake/kernels.hpp"

namespace snowflake::kernels {
namespace {

void add_scalar(const double* a, const double* b, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void sub_scalar(const double* a, const double* b, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

void mul_scalar(const double* a, const double* b, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void neg_scalar(const double* x, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = -x[i];
}

void relu_scalar(const double* x, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_bwd_scalar(const double* x, const double* g, double* acc, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        if (x[i] > 0.0) acc[i] += g[i];
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void madd_scalar(const double* a, const double* b, double* acc, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) acc[i] += a[i] * b[i];
}

// c[i][j] accumulates a[i][kk]*b[kk][j] in ascending kk order; every variant
// and the split-kernel oracle in the tests rely on that order.
void matmul_scalar(const double* a, const double* b, double* c,
                   std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        double* crow = c + i * n;
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double aik = a[i * k + kk];
            const double* brow = b + kk * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += aik * brow[j];
        }
    }
}

void sqdist3_scalar(double ax, double ay, double az,
                    const double* bx, const double* by, const double* bz,
                    std::size_t m, double* out) {
    for (std::size_t j = 0; j < m; ++j) {
        const double dx = ax - bx[j];
        const double dy = ay - by[j];
        const double dz = az - bz[j];
        out[j] = ((dx * dx) + (dy * dy)) + (dz * dz);
    }
}

}  // namespace

const KernelTable& scalar_table() {
    static const KernelTable table = {
        "scalar",
        add_scalar, sub_scalar, mul_scalar,
        neg_scalar, relu_scalar, relu_bwd_scalar,
        axpy_scalar, madd_scalar,
        matmul_scalar, sqdist3_scalar,
    };
    return table;
}

}  // namespace snowflake::kernels
