#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>

#include "nhdnls/fields.hpp"
#include "nhdnls/su2.hpp"
#include "oracles.hpp"

namespace testing {

using nhdnls::cplx;
using nhdnls::GridField;
using nhdnls::kI;

inline GridField soliton(std::size_t n, double length, double a = 1.0, double k = 0.0) {
  return GridField::sample(n, length, [=](double x) {
    const double y = x - 0.5 * length;
    return a * oracle::sech(a * y) * std::exp(kI * (k * y));
  });
}

inline GridField tanh_profile(std::size_t n, double length, double amp = 0.1, double shift = 0.0) {
  return GridField::sample_real(n, length,
                                [=](double x) { return 1.0 + amp * std::tanh(x - 0.5 * length - shift); });
}

inline double diff(const GridField& a, const GridField& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
  return m;
}

inline nhdnls::Matrix2 random_matrix(std::mt19937_64& g) {
  std::normal_distribution<double> d;
  return {{d(g), d(g)}, {d(g), d(g)}, {d(g), d(g)}, {d(g), d(g)}};
}

/// Random Laurent field with orders in [lo, hi] on an n-node grid.
inline nhdnls::LaurentMatrixField random_laurent(std::size_t n, double dx, int lo, int hi, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  nhdnls::LaurentMatrixField out(n, dx);
  for (int order = lo; order <= hi; ++order) {
    std::vector<nhdnls::Matrix2> nodes(n);
    for (auto& m : nodes) m = random_matrix(g);
    out.set(order, nhdnls::MatrixGridField(nodes, nodes.front(), dx));
  }
  return out;
}

}  // namespace testing
