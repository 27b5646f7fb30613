#include "linalg.hpp"

#include <cmath>
#include <limits>

namespace knobtune::detail {

bool cholesky(SquareMatrix& a)
{
    const std::size_t n = a.n;
    for (std::size_t j = 0; j < n; ++j) {
        const double diag = a(j, j);
        double d = diag;
        for (std::size_t k = 0; k < j; ++k) d -= a(j, k) * a(j, k);
        // Pivots at roundoff level mean a singular matrix, not a tiny eigenvalue.
        const double floor = 16.0 * static_cast<double>(n) * std::numeric_limits<double>::epsilon() * std::abs(diag);
        if (!(d > floor) || !std::isfinite(d)) return false;
        const double ljj = std::sqrt(d);
        a(j, j) = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = a(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= a(i, k) * a(j, k);
            a(i, j) = s / ljj;
        }
        for (std::size_t c = j + 1; c < n; ++c) a(j, c) = 0.0;
    }
    return true;
}

void forward_substitute(const SquareMatrix& l, std::span<double> b)
{
    for (std::size_t i = 0; i < l.n; ++i) {
        double s = b[i];
        for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * b[k];
        b[i] = s / l(i, i);
    }
}

void backward_substitute_transposed(const SquareMatrix& l, std::span<double> b)
{
    for (std::size_t i = l.n; i-- > 0;) {
        double s = b[i];
        for (std::size_t k = i + 1; k < l.n; ++k) s -= l(k, i) * b[k];
        b[i] = s / l(i, i);
    }
}

}  // namespace knobtune::detail
