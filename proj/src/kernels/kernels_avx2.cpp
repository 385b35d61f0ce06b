#include "drut/kernels.hpp"

#include <immintrin.h>

namespace drut::kernels {
namespace {

// Two interleaved complex doubles per register: [re0 im0 re1 im1].
inline __m256d cmul(__m256d a, __m256d b)
{
    const __m256d b_re = _mm256_movedup_pd(b);
    const __m256d b_im = _mm256_permute_pd(b, 0xF);
    const __m256d a_sw = _mm256_permute_pd(a, 0x5);
    return _mm256_fmaddsub_pd(a, b_re, _mm256_mul_pd(a_sw, b_im));
}

inline Complex hsum(__m256d v)
{
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d s = _mm_add_pd(lo, hi);
    alignas(16) double out[2];
    _mm_store_pd(out, s);
    return {out[0], out[1]};
}

inline const double* as_doubles(const Complex* p) { return reinterpret_cast<const double*>(p); }
inline double* as_doubles(Complex* p) { return reinterpret_cast<double*>(p); }

void matvec(const Complex* a, const Complex* x, Complex* y, std::size_t n)
{
    const double* xd = as_doubles(x);
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = as_doubles(a + i * n);
        __m256d acc0 = _mm256_setzero_pd();
        __m256d acc1 = _mm256_setzero_pd();
        std::size_t j = 0;
        for (; j + 4 <= n; j += 4) {
            acc0 = _mm256_add_pd(acc0, cmul(_mm256_loadu_pd(row + 2 * j), _mm256_loadu_pd(xd + 2 * j)));
            acc1 = _mm256_add_pd(acc1, cmul(_mm256_loadu_pd(row + 2 * j + 4), _mm256_loadu_pd(xd + 2 * j + 4)));
        }
        for (; j + 2 <= n; j += 2) {
            acc0 = _mm256_add_pd(acc0, cmul(_mm256_loadu_pd(row + 2 * j), _mm256_loadu_pd(xd + 2 * j)));
        }
        Complex s = hsum(_mm256_add_pd(acc0, acc1));
        for (; j < n; ++j) {
            s += a[i * n + j] * x[j];
        }
        y[i] = s;
    }
}

void mul_inplace(const Complex* d, Complex* y, std::size_t n)
{
    const double* dd = as_doubles(d);
    double* yd = as_doubles(y);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        _mm256_storeu_pd(yd + 2 * i, cmul(_mm256_loadu_pd(dd + 2 * i), _mm256_loadu_pd(yd + 2 * i)));
    }
    for (; i < n; ++i) {
        y[i] *= d[i];
    }
}

Complex dotc(const Complex* a, const Complex* b, std::size_t n)
{
    const double* ad = as_doubles(a);
    const double* bd = as_doubles(b);
    // conj(a) flips the sign of the imaginary lanes.
    const __m256d conj_mask = _mm256_set_pd(-0.0, 0.0, -0.0, 0.0);
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const __m256d ac = _mm256_xor_pd(_mm256_loadu_pd(ad + 2 * i), conj_mask);
        acc = _mm256_add_pd(acc, cmul(ac, _mm256_loadu_pd(bd + 2 * i)));
    }
    Complex s = hsum(acc);
    for (; i < n; ++i) {
        s += std::conj(a[i]) * b[i];
    }
    return s;
}

double norm_sq(const Complex* a, std::size_t n)
{
    const double* ad = as_doubles(a);
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const __m256d v = _mm256_loadu_pd(ad + 2 * i);
        acc = _mm256_fmadd_pd(v, v, acc);
    }
    const Complex s = hsum(acc);
    double total = s.real() + s.imag();
    for (; i < n; ++i) {
        total += std::norm(a[i]);
    }
    return total;
}

} // namespace

const KernelTable* avx2_table()
{
    static const KernelTable table{Isa::avx2, "avx2", &matvec, &mul_inplace, &dotc, &norm_sq};
    return &table;
}

} // namespace drut::kernels
