#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "seaget/tensor.hpp"

namespace seaget {

/// Compressed sparse row matrix. Used for the constant graph operators, where
/// the dense form would be mostly zeros.
struct CsrMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::size_t> row_ptr{0};
  std::vector<std::size_t> col_idx;
  std::vector<double> values;

  std::size_t nnz() const noexcept { return values.size(); }

  static CsrMatrix from_dense(const Tensor& dense);
  Tensor to_dense() const;
  /// Dense copy of the selected rows.
  Tensor dense_rows(std::span<const std::size_t> ids) const;
  double at(std::size_t r, std::size_t c) const noexcept;
  CsrMatrix transposed() const;
};

/// this · dense
Tensor spmm(const CsrMatrix& a, const Tensor& b);
/// Product of two sparse matrices, kept sparse.
CsrMatrix spgemm(const CsrMatrix& a, const CsrMatrix& b);

}  // namespace seaget
