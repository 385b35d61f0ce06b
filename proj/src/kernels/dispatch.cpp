#include "drut/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>

namespace drut::kernels {

#ifndef DRUT_HAVE_AVX2
const KernelTable* avx2_table() { return nullptr; }
#endif

bool cpu_has_avx2()
{
#if defined(DRUT_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

namespace {

const KernelTable* detect()
{
    const char* force = std::getenv("DRUT_FORCE_SCALAR");
    if (force != nullptr && std::strcmp(force, "0") != 0) {
        return &scalar_table();
    }
    if (cpu_has_avx2() && avx2_table() != nullptr) {
        return avx2_table();
    }
    return &scalar_table();
}

std::atomic<const KernelTable*>& current()
{
    static std::atomic<const KernelTable*> table{detect()};
    return table;
}

} // namespace

const KernelTable& active() { return *current().load(std::memory_order_acquire); }

bool select(Isa isa)
{
    if (isa == Isa::scalar) {
        current().store(&scalar_table(), std::memory_order_release);
        return true;
    }
    if (!cpu_has_avx2() || avx2_table() == nullptr) {
        return false;
    }
    current().store(avx2_table(), std::memory_order_release);
    return true;
}

} // namespace drut::kernels
