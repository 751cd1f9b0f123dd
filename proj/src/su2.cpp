#include "nhdnls/su2.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "nhdnls/errors.hpp"

namespace nhdnls {

double Matrix2::max_abs() const {
  return std::max({std::abs(a11), std::abs(a12), std::abs(a21), std::abs(a22)});
}

Matrix2& Matrix2::operator+=(const Matrix2& o) {
  a11 += o.a11;
  a12 += o.a12;
  a21 += o.a21;
  a22 += o.a22;
  return *this;
}

Matrix2& Matrix2::operator-=(const Matrix2& o) {
  a11 -= o.a11;
  a12 -= o.a12;
  a21 -= o.a21;
  a22 -= o.a22;
  return *this;
}

Matrix2& Matrix2::operator*=(cplx s) {
  a11 *= s;
  a12 *= s;
  a21 *= s;
  a22 *= s;
  return *this;
}

Matrix2 operator*(const Matrix2& a, const Matrix2& b) {
  return {a.a11 * b.a11 + a.a12 * b.a21, a.a11 * b.a12 + a.a12 * b.a22, a.a21 * b.a11 + a.a22 * b.a21,
          a.a21 * b.a12 + a.a22 * b.a22};
}

Matrix2 commutator(const Matrix2& a, const Matrix2& b) { return a * b - b * a; }

bool is_traceless(const Matrix2& m, double tol) { return std::abs(m.trace()) <= tol; }

bool is_anti_hermitian(const Matrix2& m, double tol) { return (m + m.adjoint()).max_abs() <= tol; }

PauliCoefficients pauli_decompose(const Matrix2& m) {
  return {0.5 * (m.a11 + m.a22), 0.5 * (m.a11 - m.a22), m.a12, m.a21};
}

Matrix2 recompose(const PauliCoefficients& c) { return {c.c0 + c.c3, c.cplus, c.cminus, c.c0 - c.c3}; }

// ---------------------------------------------------------------------------

namespace {

void validate_matrix_grid(std::size_t n, double dx) {
  if (n < 8 || !is_power_of_two(n)) {
    throw InvalidInput("MatrixGridField: node count must be a power of two >= 8, got " + std::to_string(n));
  }
  if (!(dx > 0.0) || !std::isfinite(dx)) throw InvalidInput("MatrixGridField: spacing must be positive");
}

void require_grid(const GridField& a, const GridField& b, const char* what) { a.require_same_grid(b, what); }

cplx& slot(Matrix2& m, Entry e) {
  switch (e) {
    case Entry::a11: return m.a11;
    case Entry::a12: return m.a12;
    case Entry::a21: return m.a21;
    default: return m.a22;
  }
}

cplx get(const Matrix2& m, Entry e) { return slot(const_cast<Matrix2&>(m), e); }

}  // namespace

MatrixGridField::MatrixGridField(std::size_t n, double dx) : nodes_(n), dx_(dx) { validate_matrix_grid(n, dx); }

MatrixGridField::MatrixGridField(std::vector<Matrix2> nodes, Matrix2 seam, double dx)
    : nodes_(std::move(nodes)), seam_(seam), dx_(dx) {
  validate_matrix_grid(nodes_.size(), dx);
}

MatrixGridField MatrixGridField::constant(std::size_t n, double dx, const Matrix2& m) {
  return MatrixGridField(std::vector<Matrix2>(n, m), m, dx);
}

MatrixGridField MatrixGridField::from_entries(const GridField& a11, const GridField& a12, const GridField& a21,
                                              const GridField& a22) {
  require_grid(a11, a12, "MatrixGridField::from_entries");
  require_grid(a11, a21, "MatrixGridField::from_entries");
  require_grid(a11, a22, "MatrixGridField::from_entries");
  const std::size_t n = a11.size();
  std::vector<Matrix2> nodes(n);
  for (std::size_t k = 0; k < n; ++k) nodes[k] = {a11[k], a12[k], a21[k], a22[k]};
  return MatrixGridField(std::move(nodes), Matrix2{a11.seam(), a12.seam(), a21.seam(), a22.seam()}, a11.dx());
}

MatrixGridField MatrixGridField::from_pauli(const GridField& c3, const GridField& cplus, const GridField& cminus) {
  return from_entries(c3, cplus, cminus, -c3);
}

MatrixGridField MatrixGridField::from_pauli(const GridField& c0, const GridField& c3, const GridField& cplus,
                                            const GridField& cminus) {
  return from_entries(c0 + c3, cplus, cminus, c0 - c3);
}

MatrixGridField MatrixGridField::from_vector(const GridField& tx, const GridField& ty, const GridField& tz) {
  return from_entries(tz, tx - kI * ty, tx + kI * ty, -tz);
}

GridField MatrixGridField::entry(Entry e) const {
  std::vector<cplx> v(nodes_.size());
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = get(nodes_[k], e);
  return GridField(std::move(v), get(seam_, e), dx_);
}

std::array<GridField, 4> MatrixGridField::pauli_fields() const {
  const GridField a11 = entry(Entry::a11);
  const GridField a22 = entry(Entry::a22);
  return {0.5 * (a11 + a22), 0.5 * (a11 - a22), entry(Entry::a12), entry(Entry::a21)};
}

std::array<GridField, 3> MatrixGridField::vector_fields() const {
  const auto p = pauli_fields();
  // cplus = x - i y, cminus = x + i y
  return {0.5 * (p[2] + p[3]), (0.5 * kI) * (p[2] - p[3]), p[1]};
}

void MatrixGridField::require_same_grid(const MatrixGridField& o, const char* what) const {
  if (!same_grid(o)) {
    throw InvalidInput(std::string(what) + ": grid mismatch (" + std::to_string(size()) + " vs " +
                       std::to_string(o.size()) + " nodes)");
  }
}

double MatrixGridField::max_norm() const {
  double m = 0.0;
  for (const auto& a : nodes_) m = std::max(m, a.max_abs());
  return m;
}

MatrixGridField& MatrixGridField::operator+=(const MatrixGridField& o) {
  require_same_grid(o, "MatrixGridField +");
  for (std::size_t k = 0; k < nodes_.size(); ++k) nodes_[k] += o.nodes_[k];
  seam_ += o.seam_;
  return *this;
}

MatrixGridField& MatrixGridField::operator-=(const MatrixGridField& o) {
  require_same_grid(o, "MatrixGridField -");
  for (std::size_t k = 0; k < nodes_.size(); ++k) nodes_[k] -= o.nodes_[k];
  seam_ -= o.seam_;
  return *this;
}

MatrixGridField& MatrixGridField::operator*=(cplx s) {
  for (auto& a : nodes_) a *= s;
  seam_ *= s;
  return *this;
}

MatrixGridField& MatrixGridField::operator*=(const GridField& s) {
  if (s.size() != size() || s.dx() != dx_) throw InvalidInput("MatrixGridField * scalar field: grid mismatch");
  for (std::size_t k = 0; k < nodes_.size(); ++k) nodes_[k] *= s[k];
  seam_ *= s.seam();
  return *this;
}

MatrixGridField operator*(const MatrixGridField& a, const MatrixGridField& b) {
  a.require_same_grid(b, "MatrixGridField *");
  std::vector<Matrix2> out(a.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = a[k] * b[k];
  return MatrixGridField(std::move(out), a.seam() * b.seam(), a.dx());
}

MatrixGridField deriv(const MatrixGridField& m, int order, DerivMethod method) {
  const GridField d11 = deriv(m.entry(Entry::a11), order, method);
  const GridField d12 = deriv(m.entry(Entry::a12), order, method);
  const GridField d21 = deriv(m.entry(Entry::a21), order, method);
  const GridField d22 = deriv(m.entry(Entry::a22), order, method);
  return MatrixGridField::from_entries(d11, d12, d21, d22);
}

MatrixGridField commutator(const MatrixGridField& a, const MatrixGridField& b) {
  a.require_same_grid(b, "commutator");
  std::vector<Matrix2> out(a.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = commutator(a[k], b[k]);
  return MatrixGridField(std::move(out), commutator(a.seam(), b.seam()), a.dx());
}

// ---------------------------------------------------------------------------

void LaurentMatrixField::check_compatible(const MatrixGridField& m, const char* what) const {
  if (m.size() != n_ || m.dx() != dx_) {
    throw InvalidInput(std::string(what) + ": grid mismatch (" + std::to_string(m.size()) + " vs " +
                       std::to_string(n_) + " nodes)");
  }
}

MatrixGridField LaurentMatrixField::at(int order) const {
  auto it = terms_.find(order);
  if (it != terms_.end()) return it->second;
  return MatrixGridField(n_, dx_);
}

void LaurentMatrixField::add(int order, const MatrixGridField& m) {
  check_compatible(m, "LaurentMatrixField::add");
  auto it = terms_.find(order);
  if (it == terms_.end()) {
    terms_.emplace(order, m);
  } else {
    it->second += m;
  }
}

void LaurentMatrixField::set(int order, MatrixGridField m) {
  check_compatible(m, "LaurentMatrixField::set");
  terms_.insert_or_assign(order, std::move(m));
}

std::set<int> LaurentMatrixField::orders() const {
  std::set<int> s;
  for (const auto& [n, m] : terms_) s.insert(n);
  return s;
}

void LaurentMatrixField::require_same_grid(const LaurentMatrixField& o, const char* what) const {
  if (!same_grid(o)) {
    throw InvalidInput(std::string(what) + ": grid mismatch (" + std::to_string(n_) + " vs " +
                       std::to_string(o.n_) + " nodes)");
  }
}

double LaurentMatrixField::max_norm() const {
  double m = 0.0;
  for (const auto& [n, f] : terms_) m = std::max(m, f.max_norm());
  return m;
}

LaurentMatrixField& LaurentMatrixField::operator+=(const LaurentMatrixField& o) {
  require_same_grid(o, "LaurentMatrixField +");
  for (const auto& [n, m] : o.terms_) add(n, m);
  return *this;
}

LaurentMatrixField& LaurentMatrixField::operator-=(const LaurentMatrixField& o) {
  require_same_grid(o, "LaurentMatrixField -");
  for (const auto& [n, m] : o.terms_) add(n, -1.0 * m);
  return *this;
}

LaurentMatrixField& LaurentMatrixField::operator*=(cplx s) {
  for (auto& [n, m] : terms_) m *= s;
  return *this;
}

LaurentMatrixField commutator(const LaurentMatrixField& a, const LaurentMatrixField& b) {
  a.require_same_grid(b, "commutator");
  LaurentMatrixField out(a.size(), a.dx());
  for (const auto& [p, ap] : a.terms()) {
    for (const auto& [q, bq] : b.terms()) out.add(p + q, commutator(ap, bq));
  }
  return out;
}

LaurentMatrixField deriv(const LaurentMatrixField& a, DerivMethod method) {
  LaurentMatrixField out(a.size(), a.dx());
  for (const auto& [n, m] : a.terms()) out.set(n, deriv(m, 1, method));
  return out;
}

// ---------------------------------------------------------------------------

LaxPair build_nls_lax(const GridField& q, const GridField& rho, const GridField& eta, DerivMethod method) {
  require_grid(q, rho, "build_nls_lax");
  require_grid(q, eta, "build_nls_lax");
  const std::size_t n = q.size();
  const double dx = q.dx();
  const GridField zero(n, dx);
  const GridField p = rho * q;
  const GridField pc = p.conj();
  const GridField qx = deriv(q, 1, method);

  LaxPair lax{LaurentMatrixField(n, dx), LaurentMatrixField(n, dx)};
  lax.spatial.set(1, MatrixGridField::constant(n, dx, -kI * Matrix2::sigma3()));
  lax.spatial.set(0, MatrixGridField::from_pauli(zero, pc, p));

  lax.temporal.set(2, MatrixGridField::constant(n, dx, 2.0 * kI * Matrix2::sigma3()));
  lax.temporal.set(1, MatrixGridField::from_pauli(zero, -2.0 * pc, -2.0 * p));
  const GridField b3 = -kI * (eta * q.abs2());
  const GridField bplus = -kI * (rho.conj() * qx.conj());
  const GridField bminus = kI * (rho * qx);
  lax.temporal.set(0, MatrixGridField::from_pauli(b3, bplus, bminus));
  return lax;
}

LaurentMatrixField nls_lax_time_derivative(const GridField& q, const GridField& q_t, const GridField& rho,
                                           const GridField& rho_t) {
  require_grid(q, q_t, "nls_lax_time_derivative");
  require_grid(q, rho, "nls_lax_time_derivative");
  require_grid(q, rho_t, "nls_lax_time_derivative");
  const GridField p_t = rho_t * q + rho * q_t;
  LaurentMatrixField out(q.size(), q.dx());
  out.set(0, MatrixGridField::from_pauli(GridField(q.size(), q.dx()), p_t.conj(), p_t));
  return out;
}

LaxPair build_ll_lax(const MatrixGridField& s, DerivMethod method) {
  for (std::size_t k = 0; k < s.size(); ++k) {
    const Matrix2 sq = s[k] * s[k] - Matrix2::identity();
    if (!(sq.max_abs() <= 1e-10)) {
      throw InvalidInput("build_ll_lax: S^2 != I at node " + std::to_string(k));
    }
  }
  const std::size_t n = s.size();
  const double dx = s.dx();
  LaxPair lax{LaurentMatrixField(n, dx), LaurentMatrixField(n, dx)};
  lax.spatial.set(1, kI * s);
  lax.temporal.set(2, (2.0 * kI) * s);
  lax.temporal.set(1, -1.0 * (deriv(s, 1, method) * s));
  return lax;
}

LaurentMatrixField ll_lax_time_derivative(const MatrixGridField& s_t) {
  LaurentMatrixField out(s_t.size(), s_t.dx());
  out.set(1, kI * s_t);
  return out;
}

LaurentMatrixField zcc_residual(const LaurentMatrixField& a, const LaurentMatrixField& b,
                                const LaurentMatrixField& a_t, DerivMethod method) {
  a.require_same_grid(b, "zcc_residual");
  a.require_same_grid(a_t, "zcc_residual");
  LaurentMatrixField r = a_t;
  r -= deriv(b, method);
  r += commutator(a, b);
  return r;
}

std::set<int> order_support(const LaurentMatrixField& r, double tol, double scale) {
  if (!(tol > 0.0)) throw InvalidInput("order_support: tol must be positive");
  std::set<int> s;
  for (const auto& [n, m] : r.terms()) {
    if (m.max_norm() > tol * scale) s.insert(n);
  }
  return s;
}

std::map<int, double> order_norms(const LaurentMatrixField& r) {
  std::map<int, double> out;
  for (const auto& [n, m] : r.terms()) out[n] = m.max_norm();
  return out;
}

}  // namespace nhdnls
