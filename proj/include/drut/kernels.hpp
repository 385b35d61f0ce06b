#ifndef DRUT_KERNELS_HPP
#define DRUT_KERNELS_HPP

#include <cstddef>

#include "drut/types.hpp"

// Inner loops of the trajectory simulator. Every kernel has a portable
// scalar reference and, on x86-64, an AVX2/FMA variant picked at runtime.

namespace drut::kernels {

enum class Isa { scalar, avx2 };

struct KernelTable {
    Isa isa;
    const char* name;
    // y = A x for a dense row-major n x n matrix.
    void (*matvec)(const Complex* a, const Complex* x, Complex* y, std::size_t n);
    // y[i] *= d[i]
    void (*mul_inplace)(const Complex* d, Complex* y, std::size_t n);
    // sum_i conj(a[i]) * b[i]
    Complex (*dotc)(const Complex* a, const Complex* b, std::size_t n);
    // sum_i |a[i]|^2
    double (*norm_sq)(const Complex* a, std::size_t n);
};

const KernelTable& scalar_table();

/// nullptr when the AVX2 variant was not compiled in.
const KernelTable* avx2_table();

bool cpu_has_avx2();

/// Table used by the simulator. Defaults to the best ISA the CPU supports;
/// setting DRUT_FORCE_SCALAR=1 in the environment pins the scalar path.
const KernelTable& active();

/// Override the runtime choice. Returns false if the ISA is unavailable.
bool select(Isa isa);

} // namespace drut::kernels

#endif
