#pragma once

// sl(2) matrix algebra over Laurent polynomials in the spectral parameter with
// grid-function coefficients, plus the NLS and Landau-Lifshitz Lax pairs.
//
// Basis: sigma3 = diag(1, -1), sigma+ = e12, sigma- = e21, so that
// [sigma3, sigma+-] = +-2 sigma+- and [sigma+, sigma-] = sigma3.
// The spectral parameter is never instantiated; every operation acts order by order.

#include <array>
#include <cstddef>
#include <map>
#include <set>
#include <vector>

#include "nhdnls/fields.hpp"

namespace nhdnls {

struct Matrix2 {
  cplx a11{}, a12{}, a21{}, a22{};

  static Matrix2 identity() { return {1.0, 0.0, 0.0, 1.0}; }
  static Matrix2 sigma3() { return {1.0, 0.0, 0.0, -1.0}; }
  static Matrix2 sigma_plus() { return {0.0, 1.0, 0.0, 0.0}; }
  static Matrix2 sigma_minus() { return {0.0, 0.0, 1.0, 0.0}; }
  static Matrix2 sigma1() { return {0.0, 1.0, 1.0, 0.0}; }
  static Matrix2 sigma2() { return {0.0, -kI, kI, 0.0}; }
  /// v . sigma for a (complex) 3-vector.
  static Matrix2 from_vector(cplx x, cplx y, cplx z) { return {z, x - kI * y, x + kI * y, -z}; }

  cplx trace() const { return a11 + a22; }
  Matrix2 adjoint() const { return {std::conj(a11), std::conj(a21), std::conj(a12), std::conj(a22)}; }
  double max_abs() const;

  Matrix2& operator+=(const Matrix2& o);
  Matrix2& operator-=(const Matrix2& o);
  Matrix2& operator*=(cplx s);

  friend Matrix2 operator+(Matrix2 a, const Matrix2& b) { return a += b; }
  friend Matrix2 operator-(Matrix2 a, const Matrix2& b) { return a -= b; }
  friend Matrix2 operator*(Matrix2 a, cplx s) { return a *= s; }
  friend Matrix2 operator*(cplx s, Matrix2 a) { return a *= s; }
  friend Matrix2 operator*(const Matrix2& a, const Matrix2& b);
  friend bool operator==(const Matrix2&, const Matrix2&) = default;
};

Matrix2 commutator(const Matrix2& a, const Matrix2& b);
bool is_traceless(const Matrix2& m, double tol);
bool is_anti_hermitian(const Matrix2& m, double tol);

/// m = c0 I + c3 sigma3 + cplus sigma+ + cminus sigma-.
struct PauliCoefficients {
  cplx c0{}, c3{}, cplus{}, cminus{};
};

PauliCoefficients pauli_decompose(const Matrix2& m);
Matrix2 recompose(const PauliCoefficients& c);

enum class Entry { a11, a12, a21, a22 };

/// Matrix2 per grid node (periodic, with seam value like GridField).
class MatrixGridField {
 public:
  MatrixGridField() = default;
  MatrixGridField(std::size_t n, double dx);
  MatrixGridField(std::vector<Matrix2> nodes, Matrix2 seam, double dx);

  static MatrixGridField constant(std::size_t n, double dx, const Matrix2& m);
  /// c3 sigma3 + cplus sigma+ + cminus sigma- (+ c0 I when given).
  static MatrixGridField from_pauli(const GridField& c3, const GridField& cplus, const GridField& cminus);
  static MatrixGridField from_pauli(const GridField& c0, const GridField& c3, const GridField& cplus,
                                    const GridField& cminus);
  /// t . sigma from three component fields.
  static MatrixGridField from_vector(const GridField& tx, const GridField& ty, const GridField& tz);
  /// Entry-wise assembly.
  static MatrixGridField from_entries(const GridField& a11, const GridField& a12, const GridField& a21,
                                      const GridField& a22);

  std::size_t size() const { return nodes_.size(); }
  double dx() const { return dx_; }
  const Matrix2& operator[](std::size_t k) const { return nodes_[k]; }
  Matrix2& operator[](std::size_t k) { return nodes_[k]; }
  const Matrix2& seam() const { return seam_; }
  const std::vector<Matrix2>& nodes() const { return nodes_; }

  GridField entry(Entry e) const;
  PauliCoefficients pauli_at(std::size_t k) const { return pauli_decompose(nodes_[k]); }
  /// Pauli component fields {c0, c3, cplus, cminus}.
  std::array<GridField, 4> pauli_fields() const;
  /// (x, y, z) such that the traceless part equals v . sigma.
  std::array<GridField, 3> vector_fields() const;

  bool same_grid(const MatrixGridField& o) const { return size() == o.size() && dx_ == o.dx_; }
  void require_same_grid(const MatrixGridField& o, const char* what) const;
  double max_norm() const;

  MatrixGridField& operator+=(const MatrixGridField& o);
  MatrixGridField& operator-=(const MatrixGridField& o);
  MatrixGridField& operator*=(cplx s);
  /// Pointwise left multiplication by a scalar field.
  MatrixGridField& operator*=(const GridField& s);

  friend MatrixGridField operator+(MatrixGridField a, const MatrixGridField& b) { return a += b; }
  friend MatrixGridField operator-(MatrixGridField a, const MatrixGridField& b) { return a -= b; }
  friend MatrixGridField operator*(MatrixGridField a, cplx s) { return a *= s; }
  friend MatrixGridField operator*(cplx s, MatrixGridField a) { return a *= s; }
  friend MatrixGridField operator*(const GridField& s, MatrixGridField a) { return a *= s; }
  /// Pointwise matrix product.
  friend MatrixGridField operator*(const MatrixGridField& a, const MatrixGridField& b);

 private:
  std::vector<Matrix2> nodes_;
  Matrix2 seam_{};
  double dx_ = 1.0;
};

MatrixGridField deriv(const MatrixGridField& m, int order = 1, DerivMethod method = DerivMethod::spectral);
MatrixGridField commutator(const MatrixGridField& a, const MatrixGridField& b);

/// Finite sum over lambda-orders of matrix fields on a shared grid. Absent orders are zero.
class LaurentMatrixField {
 public:
  LaurentMatrixField() = default;
  LaurentMatrixField(std::size_t n, double dx) : n_(n), dx_(dx) {}

  std::size_t size() const { return n_; }
  double dx() const { return dx_; }
  bool has(int order) const { return terms_.count(order) != 0; }
  /// Coefficient of lambda^order (zero field when absent).
  MatrixGridField at(int order) const;
  /// Adds to the coefficient of lambda^order.
  void add(int order, const MatrixGridField& m);
  void set(int order, MatrixGridField m);
  std::set<int> orders() const;
  const std::map<int, MatrixGridField>& terms() const { return terms_; }

  bool same_grid(const LaurentMatrixField& o) const { return n_ == o.n_ && dx_ == o.dx_; }
  void require_same_grid(const LaurentMatrixField& o, const char* what) const;
  /// max over orders of the max-norm.
  double max_norm() const;

  LaurentMatrixField& operator+=(const LaurentMatrixField& o);
  LaurentMatrixField& operator-=(const LaurentMatrixField& o);
  LaurentMatrixField& operator*=(cplx s);

  friend LaurentMatrixField operator+(LaurentMatrixField a, const LaurentMatrixField& b) { return a += b; }
  friend LaurentMatrixField operator-(LaurentMatrixField a, const LaurentMatrixField& b) { return a -= b; }
  friend LaurentMatrixField operator*(LaurentMatrixField a, cplx s) { return a *= s; }
  friend LaurentMatrixField operator*(cplx s, LaurentMatrixField a) { return a *= s; }

 private:
  void check_compatible(const MatrixGridField& m, const char* what) const;

  std::map<int, MatrixGridField> terms_;
  std::size_t n_ = 0;
  double dx_ = 1.0;
};

LaurentMatrixField commutator(const LaurentMatrixField& a, const LaurentMatrixField& b);
LaurentMatrixField deriv(const LaurentMatrixField& a, DerivMethod method = DerivMethod::spectral);

struct LaxPair {
  LaurentMatrixField spatial;   // A (or U)
  LaurentMatrixField temporal;  // B (or V)
};

/// A = -i lambda sigma3 + rho* q* sigma+ + rho q sigma-,
/// B = i(2 lambda^2 - eta|q|^2) sigma3 - (2 lambda rho* q* + i rho* q*_x) sigma+ - (2 lambda rho q - i rho q_x) sigma-.
LaxPair build_nls_lax(const GridField& q, const GridField& rho, const GridField& eta,
                      DerivMethod method = DerivMethod::spectral);

/// A_t by the chain rule: only the lambda^0 part of A moves.
LaurentMatrixField nls_lax_time_derivative(const GridField& q, const GridField& q_t, const GridField& rho,
                                           const GridField& rho_t);

/// U = i lambda S, V = 2i lambda^2 S - lambda S_x S; requires S^2 = I to 1e-10.
LaxPair build_ll_lax(const MatrixGridField& s, DerivMethod method = DerivMethod::spectral);

/// U_t = i lambda S_t.
LaurentMatrixField ll_lax_time_derivative(const MatrixGridField& s_t);

/// A_t - B_x + [A, B] per order.
LaurentMatrixField zcc_residual(const LaurentMatrixField& a, const LaurentMatrixField& b,
                                const LaurentMatrixField& a_t, DerivMethod method = DerivMethod::spectral);

/// Orders whose max-norm exceeds tol * scale.
std::set<int> order_support(const LaurentMatrixField& r, double tol, double scale = 1.0);

/// max-norm per order.
std::map<int, double> order_norms(const LaurentMatrixField& r);

}  // namespace nhdnls
