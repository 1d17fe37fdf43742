#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace qsat {

/// Dense row-major matrix of doubles. Rows are the unit of access for every
/// learner, so `row(i)` hands out a contiguous span.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return rows_ == 0; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::vector<double> column(std::size_t c) const;
  const std::vector<double>& data() const noexcept { return data_; }

  /// Rows at `indices` (duplicates allowed), in the given order.
  Matrix select_rows(std::span<const std::size_t> indices) const;

  void append_row(std::span<const double> values);

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

std::vector<double> select(std::span<const double> values,
                           std::span<const std::size_t> indices);

}  // namespace qsat
