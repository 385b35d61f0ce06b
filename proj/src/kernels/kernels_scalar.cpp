#include "drut/kernels.hpp"

namespace drut::kernels {
namespace {

void matvec(const Complex* a, const Complex* x, Complex* y, std::size_t n)
{
    for (std::size_t i = 0; i < n; ++i) {
        const Complex* row = a + i * n;
        double re = 0.0;
        double im = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            re += row[j].real() * x[j].real() - row[j].imag() * x[j].imag();
            im += row[j].real() * x[j].imag() + row[j].imag() * x[j].real();
        }
        y[i] = Complex(re, im);
    }
}

void mul_inplace(const Complex* d, Complex* y, std::size_t n)
{
    for (std::size_t i = 0; i < n; ++i) {
        y[i] *= d[i];
    }
}

Complex dotc(const Complex* a, const Complex* b, std::size_t n)
{
    double re = 0.0;
    double im = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        re += a[i].real() * b[i].real() + a[i].imag() * b[i].imag();
        im += a[i].real() * b[i].imag() - a[i].imag() * b[i].real();
    }
    return {re, im};
}

double norm_sq(const Complex* a, std::size_t n)
{
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        s += a[i].real() * a[i].real() + a[i].imag() * a[i].imag();
    }
    return s;
}

} // namespace

const KernelTable& scalar_table()
{
    static const KernelTable table{Isa::scalar, "scalar", &matvec, &mul_inplace, &dotc, &norm_sq};
    return table;
}

} // namespace drut::kernels
