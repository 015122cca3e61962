#include "seaget/sparse.hpp"

#include <algorithm>
#include <map>

#include "seaget/errors.hpp"

namespace seaget {

CsrMatrix CsrMatrix::from_dense(const Tensor& dense) {
  CsrMatrix m;
  m.rows = dense.rows();
  m.cols = dense.cols();
  m.row_ptr.assign(1, 0);
  for (std::size_t r = 0; r < m.rows; ++r) {
    for (std::size_t c = 0; c < m.cols; ++c) {
      if (dense(r, c) != 0.0) {
        m.col_idx.push_back(c);
        m.values.push_back(dense(r, c));
      }
    }
    m.row_ptr.push_back(m.values.size());
  }
  return m;
}

Tensor CsrMatrix::to_dense() const {
  Tensor t(rows, cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k) t(r, col_idx[k]) = values[k];
  return t;
}

Tensor CsrMatrix::dense_rows(std::span<const std::size_t> ids) const {
  Tensor t(ids.size(), cols);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const std::size_t r = ids[i];
    if (r >= rows) throw ContractError("csr: row " + std::to_string(r) + " out of range");
    for (std::size_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k) t(i, col_idx[k]) = values[k];
  }
  return t;
}

double CsrMatrix::at(std::size_t r, std::size_t c) const noexcept {
  const auto first = col_idx.begin() + static_cast<std::ptrdiff_t>(row_ptr[r]);
  const auto last = col_idx.begin() + static_cast<std::ptrdiff_t>(row_ptr[r + 1]);
  const auto it = std::lower_bound(first, last, c);
  return (it != last && *it == c) ? values[static_cast<std::size_t>(it - col_idx.begin())] : 0.0;
}

CsrMatrix CsrMatrix::transposed() const {
  CsrMatrix t;
  t.rows = cols;
  t.cols = rows;
  t.row_ptr.assign(cols + 1, 0);
  for (std::size_t c : col_idx) ++t.row_ptr[c + 1];
  for (std::size_t i = 0; i < cols; ++i) t.row_ptr[i + 1] += t.row_ptr[i];
  t.col_idx.resize(nnz());
  t.values.resize(nnz());
  std::vector<std::size_t> next(t.row_ptr.begin(), t.row_ptr.end() - 1);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k) {
      const std::size_t dst = next[col_idx[k]]++;
      t.col_idx[dst] = r;
      t.values[dst] = values[k];
    }
  }
  return t;
}

Tensor spmm(const CsrMatrix& a, const Tensor& b) {
  if (a.cols != b.rows()) {
    throw ShapeError("spmm: inner dimensions differ, [" + std::to_string(a.rows) + "x" +
                     std::to_string(a.cols) + "] x " + shape_string(b));
  }
  Tensor out(a.rows, b.cols());
  const std::size_t n = b.cols();
  for (std::size_t r = 0; r < a.rows; ++r) {
    double* dst = out.data() + r * n;
    for (std::size_t k = a.row_ptr[r]; k < a.row_ptr[r + 1]; ++k) {
      const double w = a.values[k];
      const double* src = b.data() + a.col_idx[k] * n;
      for (std::size_t j = 0; j < n; ++j) dst[j] += w * src[j];
    }
  }
  return out;
}

CsrMatrix spgemm(const CsrMatrix& a, const CsrMatrix& b) {
  if (a.cols != b.rows) throw ShapeError("spgemm: inner dimensions differ");
  CsrMatrix out;
  out.rows = a.rows;
  out.cols = b.cols;
  out.row_ptr.assign(1, 0);
  std::map<std::size_t, double> acc;
  for (std::size_t r = 0; r < a.rows; ++r) {
    acc.clear();
    for (std::size_t k = a.row_ptr[r]; k < a.row_ptr[r + 1]; ++k) {
      const std::size_t mid = a.col_idx[k];
      for (std::size_t q = b.row_ptr[mid]; q < b.row_ptr[mid + 1]; ++q)
        acc[b.col_idx[q]] += a.values[k] * b.values[q];
    }
    for (const auto& [c, v] : acc) {
      if (v == 0.0) continue;
      out.col_idx.push_back(c);
      out.values.push_back(v);
    }
    out.row_ptr.push_back(out.values.size());
  }
  return out;
}

}  // namespace seaget
