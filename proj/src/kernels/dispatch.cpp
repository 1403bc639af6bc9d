#include "snowflake/kernels.hpp"

#include <atomic>
#include <cstdlib>

#include "snowflake/error.hpp"

namespace snowflake::kernels {

bool avx2_supported() {
#if defined(__x86_64__) || defined(__i386__)
    return avx2_table() != nullptr && __builtin_cpu_supports("avx2");
#else
    return false;
#endif
}

bool neon_supported() {
    // NEON is architectural baseline on aarch64; present iff compiled in.
    return neon_table() != nullptr;
}

namespace {

std::atomic<const KernelTable*> g_active{nullptr};

const KernelTable* lookup(const std::string& name, bool must_exist) {
    if (name == "scalar") return &scalar_table();
    if (name == "avx2" && avx2_supported()) return avx2_table();
    if (name == "neon" && neon_supported()) return neon_table();
    if (must_exist)
        throw ContractError("kernels: unknown or unsupported kernel table '" + name + "'");
    return nullptr;
}

const KernelTable* choose() {
    if (const char* env = std::getenv("SNOWFLAKE_KERNELS")) {
        if (const KernelTable* t = lookup(env, false)) return t;
        // Unknown/unsupported request falls through to auto-selection rather
        // than aborting startup.
    }
    if (avx2_supported()) return avx2_table();
    if (neon_supported()) return neon_table();
    return &scalar_table();
}

}  // namespace

const KernelTable& active() {
    const KernelTable* t = g_active.load(std::memory_order_acquire);
    if (!t) {
        t = choose();
        g_active.store(t, std::memory_order_release);
    }
    return *t;
}

void force(const std::string& name) {
    g_active.store(lookup(name, true), std::memory_order_release);
}

std::vector<const KernelTable*> runnable_tables() {
    std::vector<const KernelTable*> out{&scalar_table()};
    if (avx2_supported()) out.push_back(avx2_table());
    if (neon_supported()) out.push_back(neon_table());
    return out;
}

}  // namespace snowflake::kernels
