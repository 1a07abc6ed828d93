#pragma once

#include <complex>
#include <vector>

namespace graphtomo {

using Complex = std::complex<double>;

// Dense rank-3 complex array, row-major.
struct Tensor3 {
  int d0 = 0, d1 = 0, d2 = 0;
  std::vector<Complex> data;

  Tensor3() = default;
  Tensor3(int a, int b, int c) : d0(a), d1(b), d2(c), data(static_cast<size_t>(a) * b * c) {}

  Complex& operator()(int i, int j, int k) { return data[(static_cast<size_t>(i) * d1 + j) * d2 + k]; }
  const Complex& operator()(int i, int j, int k) const {
    return data[(static_cast<size_t>(i) * d1 + j) * d2 + k];
  }
  size_t size() const { return data.size(); }
};

}  // namespace graphtomo
