// AVX2 variants. Each output element sees the same mul/add sequence as the
// scalar reference (lanes are independent, loop tails fall back to the scalar
// expressions), so results are bit-identical to kernels_scalar.cpp.
//
// relu uses cmp+and instead of maxpd: max(+0.0, -0.0) would return -0.0 and
// diverge from the scalar `x > 0 ? x : 0`.

#include "snowflake/kernels.hpp"

#if defined(__x86_64__) || defined(__i386__)

#include <immintrin.h>

namespace snowflake::kernels {
namespace {

void add_avx2(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) out[i] = a[i] + b[i];
}

void sub_avx2(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) out[i] = a[i] - b[i];
}

void mul_avx2(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) out[i] = a[i] * b[i];
}

void neg_avx2(const double* x, double* out, std::size_t n) {
    const __m256d signbit = _mm256_set1_pd(-0.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_xor_pd(_mm256_loadu_pd(x + i), signbit));
    for (; i < n; ++i) out[i] = -x[i];
}

void relu_avx2(const double* x, double* out, std::size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d v = _mm256_loadu_pd(x + i);
        const __m256d mask = _mm256_cmp_pd(v, zero, _CMP_GT_OQ);
        _mm256_storeu_pd(out + i, _mm256_and_pd(v, mask));
    }
    for (; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_bwd_avx2(const double* x, const double* g, double* acc, std::size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(x + i), zero, _CMP_GT_OQ);
        const __m256d gi = _mm256_and_pd(_mm256_loadu_pd(g + i), mask);
        _mm256_storeu_pd(acc + i, _mm256_add_pd(_mm256_loadu_pd(acc + i), gi));
    }
    for (; i < n; ++i)
        if (x[i] > 0.0) acc[i] += g[i];
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
    const __m256d av = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d t = _mm256_mul_pd(av, _mm256_loadu_pd(x + i));
        _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), t));
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void madd_avx2(const double* a, const double* b, double* acc, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d t = _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
        _mm256_storeu_pd(acc + i, _mm256_add_pd(_mm256_loadu_pd(acc + i), t));
    }
    for (; i < n; ++i) acc[i] += a[i] * b[i];
}

void matmul_avx2(const double* a, const double* b, double* c,
                 std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        double* crow = c + i * n;
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double aik = a[i * k + kk];
            const double* brow = b + kk * n;
            const __m256d av = _mm256_set1_pd(aik);
            std::size_t j = 0;
            for (; j + 8 <= n; j += 8) {
                const __m256d t0 = _mm256_mul_pd(av, _mm256_loadu_pd(brow + j));
                const __m256d t1 = _mm256_mul_pd(av, _mm256_loadu_pd(brow + j + 4));
                _mm256_storeu_pd(crow + j, _mm256_add_pd(_mm256_loadu_pd(crow + j), t0));
                _mm256_storeu_pd(crow + j + 4, _mm256_add_pd(_mm256_loadu_pd(crow + j + 4), t1));
            }
            for (; j + 4 <= n; j += 4) {
                const __m256d t = _mm256_mul_pd(av, _mm256_loadu_pd(brow + j));
                _mm256_storeu_pd(crow + j, _mm256_add_pd(_mm256_loadu_pd(crow + j), t));
            }
            for (; j < n; ++j) crow[j] += aik * brow[j];
        }
    }
}

void sqdist3_avx2(double ax, double ay, double az,
                  const double* bx, const double* by, const double* bz,
                  std::size_t m, double* out) {
    const __m256d axv = _mm256_set1_pd(ax);
    const __m256d ayv = _mm256_set1_pd(ay);
    const __m256d azv = _mm256_set1_pd(az);
    std::size_t j = 0;
    for (; j + 4 <= m; j += 4) {
        const __m256d dx = _mm256_sub_pd(axv, _mm256_loadu_pd(bx + j));
        const __m256d dy = _mm256_sub_pd(ayv, _mm256_loadu_pd(by + j));
        const __m256d dz = _mm256_sub_pd(azv, _mm256_loadu_pd(bz + j));
        const __m256d s = _mm256_add_pd(_mm256_add_pd(_mm256_mul_pd(dx, dx), _mm256_mul_pd(dy, dy)),
                                        _mm256_mul_pd(dz, dz));
        _mm256_storeu_pd(out + j, s);
    }
    for (; j < m; ++j) {
        const double dx = ax - bx[j];
        const double dy = ay - by[j];
        const double dz = az - bz[j];
        out[j] = ((dx * dx) + (dy * dy)) + (dz * dz);
    }
}

}  // namespace

const KernelTable* avx2_table() {
    static const KernelTable table = {
        "avx2",
        add_avx2, sub_avx2, mul_avx2,
        neg_avx2, relu_avx2, relu_bwd_avx2,
        axpy_avx2, madd_avx2,
        matmul_avx2, sqdist3_avx2,
    };
    return &table;
}

}  // namespace snowflake::kernels

#else

namespace snowflake::kernels {
const KernelTable* avx2_table() { return nullptr; }
}  // namespace snowflake::kernels

#endif
