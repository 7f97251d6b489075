#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace layersim {

// Dense row-major matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), values(r * c, fill) {}

  double& operator()(std::size_t i, std::size_t j) { return values[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return values[i * cols + j]; }

  std::span<const double> row(std::size_t i) const { return {values.data() + i * cols, cols}; }

  Matrix transposed() const {
    Matrix t(cols, rows);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  bool operator==(const Matrix&) const = default;
};

} // namespace layersim
