#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace apnet2::dsp {

// Dense row-major matrix. Spectrogram-like data uses rows = frames.
template <typename T>
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<T> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, T fill = T{0}) : rows(r), cols(c), data(r * c, fill) {}

  T& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::span<T> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const T> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
  std::string shape_string() const { return std::to_string(rows) + "x" + std::to_string(cols); }
};

template <typename T>
void require_same_shape(const Matrix<T>& a, const Matrix<T>& b, const char* what) {
  if (!a.same_shape(b))
    throw std::invalid_argument(std::string(what) + ": shape mismatch " + a.shape_string() +
                                " vs " + b.shape_string());
}

}  // namespace apnet2::dsp
