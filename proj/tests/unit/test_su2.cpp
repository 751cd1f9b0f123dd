#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "helpers.hpp"
#include "nhdnls/errors.hpp"
#include "nhdnls/solvers.hpp"
#include "nhdnls/su2.hpp"

using namespace nhdnls;
using testing::random_laurent;

namespace {

bool close(cplx a, cplx b, double tol = 1e-14) { return std::abs(a - b) <= tol; }

double max_over_orders(const LaurentMatrixField& r) {
  double m = 0.0;
  for (const auto& [n, v] : order_norms(r)) m = std::max(m, v);
  return m;
}

}  // namespace

TEST_CASE("pauli decomposition of basis elements") {
  const auto s3 = pauli_decompose(Matrix2::sigma3());
  CHECK(close(s3.c0, 0.0));
  CHECK(close(s3.c3, 1.0));
  CHECK(close(s3.cplus, 0.0));
  CHECK(close(s3.cminus, 0.0));
  const auto id = pauli_decompose(Matrix2::identity());
  CHECK(close(id.c0, 1.0));
  CHECK(close(id.c3, 0.0));
  const auto x = pauli_decompose(Matrix2{0.0, 1.0, 1.0, 0.0});
  CHECK(close(x.c0, 0.0));
  CHECK(close(x.c3, 0.0));
  CHECK(close(x.cplus, 1.0));
  CHECK(close(x.cminus, 1.0));
}

TEST_CASE("pauli round trip on random matrices") {
  std::mt19937_64 g(3);
  for (int i = 0; i < 100; ++i) {
    const Matrix2 m = testing::random_matrix(g);
    CHECK((recompose(pauli_decompose(m)) - m).max_abs() <= 1e-14);
  }
}

TEST_CASE("basis commutators") {
  CHECK(commutator(Matrix2::sigma3(), Matrix2::sigma_plus()) == 2.0 * Matrix2::sigma_plus());
  CHECK(commutator(Matrix2::sigma3(), Matrix2::sigma_minus()) == -2.0 * Matrix2::sigma_minus());
  CHECK(commutator(Matrix2::sigma_plus(), Matrix2::sigma_minus()) == Matrix2::sigma3());

  LaurentMatrixField a(8, 0.5), b(8, 0.5);
  a.set(1, MatrixGridField::constant(8, 0.5, Matrix2::sigma_plus()));
  b.set(-1, MatrixGridField::constant(8, 0.5, Matrix2::sigma_minus()));
  const auto c = commutator(a, b);
  CHECK(c.orders() == std::set<int>{0});
  CHECK((c.at(0)[2] - Matrix2::sigma3()).max_abs() == 0.0);
}

TEST_CASE("commutator is bilinear, antisymmetric and satisfies Jacobi") {
  const std::size_t n = 16;
  const double dx = 0.3;
  const auto a = random_laurent(n, dx, -1, 1, 1);
  const auto b = random_laurent(n, dx, 0, 2, 2);
  const auto c = random_laurent(n, dx, -2, 0, 3);
  CHECK(max_over_orders(commutator(a, a)) == 0.0);
  CHECK(max_over_orders(commutator(a, b) + commutator(b, a)) <= 1e-13);
  const cplx s{0.7, -1.3};
  CHECK(max_over_orders(commutator(a * s + c, b) - (commutator(a, b) * s + commutator(c, b))) <= 1e-12);
  const auto jacobi =
      commutator(a, commutator(b, c)) + commutator(b, commutator(c, a)) + commutator(c, commutator(a, b));
  CHECK(max_over_orders(jacobi) <= 1e-12);
}

TEST_CASE("vacuum Lax pair") {
  const std::size_t n = 32;
  const double length = 10.0;
  const GridField zero(n, length / n);
  const GridField one = GridField::constant(n, length / n, 1.0);
  const LaxPair lax = build_nls_lax(zero, one, -1.0 * one);
  CHECK(order_support(lax.spatial, 1e-300) == std::set<int>{1});
  CHECK((lax.spatial.at(1)[5] - (-kI) * Matrix2::sigma3()).max_abs() == 0.0);
  CHECK(order_support(lax.temporal, 1e-300) == std::set<int>{2});
  CHECK((lax.temporal.at(2)[7] - (2.0 * kI) * Matrix2::sigma3()).max_abs() == 0.0);
  const auto res = zcc_residual(lax.spatial, lax.temporal, nls_lax_time_derivative(zero, zero, one, zero));
  CHECK(max_over_orders(res) == 0.0);
}

TEST_CASE("NLS temporal matrix: x-independent top order and the order-0 sigma- entry") {
  const std::size_t n = 256;
  const double length = 40.0;
  const GridField q = testing::soliton(n, length);
  const GridField one = GridField::constant(n, length / n, 1.0);
  const LaxPair lax = build_nls_lax(q, one, one);
  const MatrixGridField top = lax.temporal.at(2);
  for (std::size_t k = 0; k < n; ++k) CHECK((top[k] - top[0]).max_abs() == 0.0);
  // i rho q_x with q_x = -sech tanh.
  double err = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double y = q.x(k) - 0.5 * length;
    const cplx expected = kI * (-oracle::sech(y) * std::tanh(y));
    err = std::max(err, std::abs(lax.temporal.at(0)[k].a21 - expected));
  }
  CHECK(err <= 1e-8);
}

TEST_CASE("Landau-Lifshitz Lax pair") {
  const std::size_t n = 64;
  const double length = 2.0 * std::numbers::pi;
  const MatrixGridField s3 = MatrixGridField::constant(n, length / n, Matrix2::sigma3());
  const LaxPair flat = build_ll_lax(s3);
  CHECK((flat.spatial.at(1)[3] - kI * Matrix2::sigma3()).max_abs() == 0.0);
  CHECK((flat.temporal.at(2)[3] - (2.0 * kI) * Matrix2::sigma3()).max_abs() == 0.0);
  CHECK(flat.temporal.at(1).max_norm() == 0.0);

  CHECK_NOTHROW(build_ll_lax(MatrixGridField::constant(n, length / n, Matrix2::sigma1())));
  CHECK_THROWS_AS(build_ll_lax(MatrixGridField::constant(n, length / n, 2.0 * Matrix2::sigma3())), InvalidInput);

  // S = (sin th, 0, cos th) . sigma with th = sin x: -S_x S = i th' sigma2.
  const GridField th = GridField::sample_real(n, length, [](double x) { return std::sin(x); });
  const MatrixGridField s = MatrixGridField::from_vector(th.map([](cplx v) { return std::sin(v); }, true),
                                                         GridField(n, length / n, true),
                                                         th.map([](cplx v) { return std::cos(v); }, true));
  const MatrixGridField v1 = build_ll_lax(s).temporal.at(1);
  double err = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double dth = std::cos(th.x(k));
    err = std::max(err, (v1[k] - (kI * dth) * Matrix2::sigma2()).max_abs());
  }
  CHECK(err <= 1e-10);
}

TEST_CASE("zero-curvature residual: linearity in A_t and the constant-coupling cancellation") {
  const std::size_t n = 128;
  const double length = 20.0;
  const GridField q = random_smooth_field(n, length, 5, 4, false, 0.3);
  const cplx r{0.6, 0.8};
  const GridField rho = GridField::constant(n, length / n, r);
  const GridField eta = GridField::constant(n, length / n, 0.7);
  const LaxPair lax = build_nls_lax(q, rho, eta);
  const auto a1 = random_laurent(n, length / n, 0, 0, 8);
  const auto a2 = random_laurent(n, length / n, 0, 0, 9);
  const cplx s{2.0, -0.5};
  auto shifted = [&](const LaurentMatrixField& a_t) {
    return zcc_residual(lax.spatial, lax.temporal, a_t) -
           zcc_residual(lax.spatial, lax.temporal, LaurentMatrixField(n, length / n));
  };
  CHECK(max_over_orders(shifted(a1 * s + a2) - (shifted(a1) * s + shifted(a2))) <= 1e-10);

  // Orders 1 and 2 cancel for any q_t when the coupling is constant.
  const GridField arbitrary_qt = random_smooth_field(n, length, 11, 3, false, 0.0);
  const auto res = zcc_residual(lax.spatial, lax.temporal, nls_lax_time_derivative(q, arbitrary_qt, rho, GridField(n, length / n)));
  const double scale = max_abs(q);
  CHECK(res.at(1).max_norm() <= 1e-10 * scale);
  CHECK(res.at(2).max_norm() <= 1e-10 * scale);
  CHECK(res.at(0).max_norm() > 1e-3);
}

TEST_CASE("non-constant coupling leaves an order-1 residual 2 rho_x q in the sigma- entry") {
  const std::size_t n = 256;
  const double length = 40.0;
  const GridField q = testing::soliton(n, length);
  const GridField rho = testing::tanh_profile(n, length);
  const GridField eta = -1.0 * rho.abs2();
  const GridField q_t = rhs_inhomogeneous(q, rho);
  const LaxPair lax = build_nls_lax(q, rho, eta);
  const auto res = zcc_residual(lax.spatial, lax.temporal, nls_lax_time_derivative(q, q_t, rho, GridField(n, length / n)));
  CHECK(order_support(res, 1e-6).count(1) == 1);
  const GridField expected = 2.0 * (deriv(rho) * q);
  double err = 0.0;
  for (std::size_t k = 0; k < n; ++k) err = std::max(err, std::abs(std::abs(res.at(1)[k].a21) - std::abs(expected[k])));
  CHECK(err <= 1e-8);
}

TEST_CASE("order support") {
  LaurentMatrixField r(8, 1.0);
  CHECK(order_support(r, 1e-12).empty());
  r.set(2, MatrixGridField::constant(8, 1.0, Matrix2::sigma3()));
  CHECK(order_support(r, 1e-12) == std::set<int>{2});
}
