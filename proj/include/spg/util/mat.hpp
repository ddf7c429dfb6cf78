#pragma once

#include <algorithm>
#include <cassert>
#include <cstddef>
#include <vector>

namespace spg {

// Dense row-major matrix. For audio feature data the convention is
// rows = channels/dims, cols = time frames unless noted otherwise.
template <typename T>
struct Mat {
  int rows = 0, cols = 0;
  std::vector<T> v;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), v(size_t(r) * c, T(0)) {}

  T* row(int r) { return v.data() + size_t(r) * cols; }
  const T* row(int r) const { return v.data() + size_t(r) * cols; }
  T& at(int r, int c) { return v[size_t(r) * cols + c]; }
  const T& at(int r, int c) const { return v[size_t(r) * cols + c]; }
  T* data() { return v.data(); }
  const T* data() const { return v.data(); }
  size_t size() const { return v.size(); }
  void fill(T x) { std::fill(v.begin(), v.end(), x); }
  void resize(int r, int c) {
    rows = r;
    cols = c;
    v.assign(size_t(r) * c, T(0));
  }
  bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }

  template <typename U>
  Mat<U> cast() const {
    Mat<U> out(rows, cols);
    for (size_t i = 0; i < v.size(); ++i) out.v[i] = U(v[i]);
    return out;
  }
};

}  // namespace spg
