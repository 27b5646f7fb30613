#pragma once

// Small dense helpers for the n <= a few dozen systems the surrogates solve.

#include <cstddef>
#include <span>
#include <vector>

namespace knobtune::detail {

/// Row-major square matrix.
struct SquareMatrix {
    std::size_t n = 0;
    std::vector<double> data;

    explicit SquareMatrix(std::size_t size = 0) : n(size), data(size * size, 0.0) {}
    double& operator()(std::size_t r, std::size_t c) { return data[r * n + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * n + c]; }
};

/// In-place lower Cholesky factor of a symmetric matrix. Returns false if a
/// pivot is not strictly positive; the matrix contents are then unspecified.
bool cholesky(SquareMatrix& a);

/// Solves L x = b for lower-triangular L.
void forward_substitute(const SquareMatrix& l, std::span<double> b);
/// Solves L^T x = b for lower-triangular L.
void backward_substitute_transposed(const SquareMatrix& l, std::span<double> b);

}  // namespace knobtune::detail
