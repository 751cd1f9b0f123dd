#pragma once

// Periodic 1-D grid functions with spectral calculus.
//
// A GridField holds N samples f(x_k), x_k = k*dx on [0, L), L = N*dx, plus the
// value at the closing point x = L (the "seam"). For periodic data the seam
// equals f(x_0). Fields with distinct asymptotes (a tanh coupling profile, the
// cumulative integral of a localized density) carry a different seam value; the
// spectral derivative removes the linear trend through the seam jump first, so
// such fields differentiate to spectral accuracy as long as their derivatives
// are periodic.

#include <complex>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

namespace nhdnls {

using cplx = std::complex<double>;

inline constexpr cplx kI{0.0, 1.0};

enum class DerivMethod { spectral, fd4 };

/// Where cumulative integrals start: the left edge x_0 or the domain midpoint.
enum class LowerLimit { left_edge, domain_center };

bool is_power_of_two(std::size_t n);

class GridField {
 public:
  GridField() = default;
  /// Zero field.
  GridField(std::size_t n, double dx, bool real_valued = false);
  /// Periodic field (seam = samples[0]).
  GridField(std::vector<cplx> samples, double dx, bool real_valued = false);
  GridField(std::vector<cplx> samples, cplx seam, double dx, bool real_valued = false);

  /// Samples f on [0, L) and records f(L) as the seam value.
  static GridField sample(std::size_t n, double length, const std::function<cplx(double)>& f);
  static GridField sample_real(std::size_t n, double length, const std::function<double(double)>& f);
  static GridField constant(std::size_t n, double dx, cplx value);

  std::size_t size() const { return v_.size(); }
  bool empty() const { return v_.empty(); }
  double dx() const { return dx_; }
  double length() const { return dx_ * static_cast<double>(v_.size()); }
  double x(std::size_t k) const { return dx_ * static_cast<double>(k); }
  bool real_valued() const { return real_; }

  cplx seam() const { return seam_; }
  void set_seam(cplx value);
  /// seam - f(x_0).
  cplx seam_jump() const { return seam_ - v_.front(); }
  bool periodic() const { return seam_ == v_.front(); }
  GridField periodized() const;

  cplx operator[](std::size_t k) const { return v_[k]; }
  cplx& operator[](std::size_t k) { return v_[k]; }
  std::span<const cplx> samples() const { return v_; }
  std::span<cplx> samples() { return v_; }

  bool same_grid(const GridField& other) const;
  /// Throws InvalidInput when grids differ.
  void require_same_grid(const GridField& other, const char* what) const;
  bool all_finite() const;

  GridField conj() const;
  GridField abs2() const;
  GridField abs() const;
  GridField real() const;
  GridField imag() const;

  /// Pointwise transform of every sample and the seam.
  GridField map(const std::function<cplx(cplx)>& fn, bool real_valued = false) const;

  GridField& operator+=(const GridField& o);
  GridField& operator-=(const GridField& o);
  GridField& operator*=(const GridField& o);
  GridField& operator*=(cplx s);
  GridField& operator*=(double s);
  GridField& operator+=(cplx s);

  friend GridField operator+(GridField a, const GridField& b) { return a += b; }
  friend GridField operator-(GridField a, const GridField& b) { return a -= b; }
  friend GridField operator*(GridField a, const GridField& b) { return a *= b; }
  friend GridField operator*(GridField a, cplx s) { return a *= s; }
  friend GridField operator*(cplx s, GridField a) { return a *= s; }
  friend GridField operator*(GridField a, double s) { return a *= s; }
  friend GridField operator*(double s, GridField a) { return a *= s; }
  friend GridField operator+(GridField a, cplx s) { return a += s; }
  friend GridField operator-(GridField a) { return a *= -1.0; }
  friend GridField operator/(const GridField& a, const GridField& b);

 private:
  void check_finite(const char* where) const;
  void enforce_real();

  std::vector<cplx> v_;
  cplx seam_{};
  double dx_ = 1.0;
  bool real_ = false;
};

/// x-derivative of order 1 or 2.
GridField deriv(const GridField& f, int order = 1, DerivMethod method = DerivMethod::spectral);

/// Trapezoid cumulative integral with the dx^2 and dx^4 endpoint corrections (sixth order);
/// F(x_0) = 0 for LowerLimit::left_edge.
GridField cumint(const GridField& f, LowerLimit lower = LowerLimit::left_edge);

/// Band-limited antiderivative of the periodized samples, F(x_0) = 0, seam = F(L).
/// Exact for trigonometric polynomials resolved by the grid.
GridField spectral_cumint(const GridField& f);

struct Norms {
  double l2 = 0.0;
  double linf = 0.0;
  double mass = 0.0;
};

Norms norms(const GridField& f);
double max_abs(const GridField& f);
/// Deterministic sum(f) * dx.
cplx integrate(const GridField& f);

/// Im(q* q_x). Phase windings through the seam are handled exactly.
GridField momentum_density(const GridField& q);

/// Zeroes Fourier modes with |k| > N/3.
GridField dealias(const GridField& f);

/// Band-limited interpolation onto a grid `factor` times finer (periodic part only).
GridField refine(const GridField& f, std::size_t factor);

/// Trigonometric interpolant of periodic samples, evaluable at any point.
class TrigSeries {
 public:
  TrigSeries() = default;
  TrigSeries(std::span<const cplx> samples, double period);

  cplx operator()(double x) const;
  cplx derivative(double x) const;
  /// Antiderivative: mean * x + integral of the oscillating part (zero mean).
  cplx antiderivative(double x) const;
  cplx mean() const { return coeffs_.empty() ? cplx{} : coeffs_[0]; }
  double period() const { return period_; }

 private:
  std::vector<cplx> coeffs_;  // c_j, normalized, standard FFT ordering
  double period_ = 1.0;
};

/// Smooth periodic field: constant offset plus `modes` Fourier modes with seeded random
/// coefficients decaying like 1/m^2.
GridField random_smooth_field(std::size_t n, double length, std::uint64_t seed, int modes = 4,
                              bool real_valued = false, double offset = 0.0);

/// Writes x, Re(f), Im(f) with 17 significant digits; one row per node.
void write_csv(std::ostream& os, const GridField& f);
/// Reads back what write_csv produced (periodic seam).
GridField read_csv(std::istream& is, bool real_valued = false);

}  // namespace nhdnls
