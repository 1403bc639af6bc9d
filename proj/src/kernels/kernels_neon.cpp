// NEON variants (aarch64). Same bit-identity contract as kernels_avx2.cpp:
// mirror the scalar reference operation order exactly.

#include "snowflake/kernels.hpp"

#if defined(__aarch64__)


#include <arm_neon.h>

namespace snowflake::kernels {
namespace {

void add_neon(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2)
        vst1q_f64(out + i, vaddq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
    for (; i < n; ++i) out[i] = a[i] + b[i];
}

void sub_neon(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2)
        vst1q_f64(out + i, vsubq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
    for (; i < n; ++i) out[i] = a[i] - b[i];
}

void mul_neon(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2)
        vst1q_f64(out + i, vmulq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
    for (; i < n; ++i) out[i] = a[i] * b[i];
}

void neg_neon(const double* x, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) vst1q_f64(out + i, vnegq_f64(vld1q_f64(x + i)));
    for (; i < n; ++i) out[i] = -x[i];
}

void relu_neon(const double* x, double* out, std::size_t n) {
    const float64x2_t zero = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const float64x2_t v = vld1q_f64(x + i);
        const uint64x2_t mask = vcgtq_f64(v, zero);
        vst1q_f64(out + i, vreinterpretq_f64_u64(vandq_u64(vreinterpretq_u64_f64(v), mask)));
    }
    for (; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_bwd_neon(const double* x, const double* g, double* acc, std::size_t n) {
    const float64x2_t zero = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const uint64x2_t mask = vcgtq_f64(vld1q_f64(x + i), zero);
        const float64x2_t gi =
            vreinterpretq_f64_u64(vandq_u64(vreinterpretq_u64_f64(vld1q_f64(g + i)), mask));
        vst1q_f64(acc + i, vaddq_f64(vld1q_f64(acc + i), gi));
    }
    for (; i < n; ++i)
        if (x[i] > 0.0) acc[i] += g[i];
}

void axpy_neon(double alpha, const double* x, double* y, std::size_t n) {
    const float64x2_t av = vdupq_n_f64(alpha);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const float64x2_t t = vmulq_f64(av, vld1q_f64(x + i));
        vst1q_f64(y + i, vaddq_f64(vld1q_f64(y + i), t));
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void madd_neon(const double* a, const double* b, double* acc, std::size_t n) {
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const float64x2_t t = vmulq_f64(vld1q_f64(a + i), vld1q_f64(b + i));
        vst1q_f64(acc + i, vaddq_f64(vld1q_f64(acc + i), t));
    }
    for (; i < n; ++i) acc[i] += a[i] * b[i];
}

void matmul_neon(const double* a, const double* b, double* c,
                 std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        double* crow = c + i * n;
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double aik = a[i * k + kk];
            const double* brow = b + kk * n;
            const float64x2_t av = vdupq_n_f64(aik);
            std::size_t j = 0;
            for (; j + 2 <= n; j += 2) {
                const float64x2_t t = vmulq_f64(av, vld1q_f64(brow + j));
                vst1q_f64(crow + j, vaddq_f64(vld1q_f64(crow + j), t));
            }
            for (; j < n; ++j) crow[j] += aik * brow[j];
        }
    }
}

void sqdist3_neon(double ax, double ay, double az,
                  const double* bx, const double* by, const double* bz,
                  std::size_t m, double* out) {
    const float64x2_t axv = vdupq_n_f64(ax);
    const float64x2_t ayv = vdupq_n_f64(ay);
    const float64x2_t azv = vdupq_n_f64(az);
    std::size_t j = 0;
    for (; j + 2 <= m; j += 2) {
        const float64x2_t dx = vsubq_f64(axv, vld1q_f64(bx + j));
        const float64x2_t dy = vsubq_f64(ayv, vld1q_f64(by + j));
        const float64x2_t dz = vsubq_f64(azv, vld1q_f64(bz + j));
        const float64x2_t s =
            vaddq_f64(vaddq_f64(vmulq_f64(dx, dx), vmulq_f64(dy, dy)), vmulq_f64(dz, dz));
        vst1q_f64(out + j, s);
    }
    for (; j < m; ++j) {
        const double dx = ax - bx[j];
        const double dy = ay - by[j];
        const double dz = az - bz[j];
        out[j] = ((dx * dx) + (dy * dy)) + (dz * dz);
    }
}

}  // namespace

const KernelTable* neon_table() {
    static const KernelTable table = {
        "neon",
        add_neon, sub_neon, mul_neon,
        neg_neon, relu_neon, relu_bwd_neon,
        axpy_neon, madd_neon,
        matmul_neon, sqdist3_neon,
    };
    return &table;
}

}  // namespace snowflake::kernels

#else

namespace snowflake::kernels {
const KernelTable* neon_table() { return nullptr; }
}  // namespace snowflake::kernels

#endif
