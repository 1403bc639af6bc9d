#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace snowflake::kernels {

// Hot float64 inner loops behind a dispatch table. Scalar is the reference
// implementation; AVX2/NEON variants are selected at runtime when the CPU
// supports them.
//
// Contract: every variant computes each output element with the same sequence
// of IEEE-754 operations in the same order as the scalar reference, so the
// results are bit-identical no matter which table is active (this is what
// tests/test_kernels.cpp checks). Keep it that way: no fma, no reassociation,
// no cross-lane reductions.
struct KernelTable {
    const char* name;

    // out[i] = a[i] (op) b[i]
    void (*add)(const double* a, const double* b, double* out, std::size_t n);
    void (*sub)(const double* a, const double* b, double* out, std::size_t n);
    void (*mul)(const double* a, const double* b, double* out, std::size_t n);

    void (*neg)(const double* x, double* out, std::size_t n);
    // out[i] = x[i] > 0 ? x[i] : 0
    void (*relu)(const double* x, double* out, std::size_t n);
    // acc[i] += x[i] > 0 ? g[i] : 0   (relu backward)
    void (*relu_bwd)(const double* x, const double* g, double* acc, std::size_t n);

    // y[i] += alpha * x[i]
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
    // acc[i] += a[i] * b[i]
    void (*madd)(const double* a, const double* b, double* acc, std::size_t n);

    // c += a * b, row-major, a: m x k, b: k x n, c: m x n. Accumulates into c.
    void (*matmul)(const double* a, const double* b, double* c,
                   std::size_t m, std::size_t k, std::size_t n);

    // out[j] = (ax-bx[j])^2 + (ay-by[j])^2 + (az-bz[j])^2
    void (*sqdist3)(double ax, double ay, double az,
                    const double* bx, const double* by, const double* bz,
                    std::size_t m, double* out);
};

const KernelTable& scalar_table();
const KernelTable* avx2_table();  // nullptr when not compiled in
const KernelTable* neon_table();  // nullptr when not compiled in

// true when the variant is compiled in and this CPU can run it
bool avx2_supported();
bool neon_supported();

// Active table. Chosen once: SNOWFLAKE_KERNELS=scalar|avx2|neon overrides,
// otherwise the widest supported variant wins.
const KernelTable& active();

// All tables runnable on this machine (scalar first). For equivalence tests.
std::vector<const KernelTable*> runnable_tables();

// Force a specific table (used by tests and the CLI); throws ContractError on
// unknown or unsupported names.
void force(const std::string& name);

}  // namespace snowflake::kernels
