#include "nhdnls/fields.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>
#include <string>

#include "nhdnls/errors.hpp"
#include "spectral.hpp"

namespace nhdnls {

using detail::mode_number;

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

namespace {

void validate_shape(std::size_t n, double dx) {
  if (n < 8 || !is_power_of_two(n)) {
    throw InvalidInput("GridField: node count must be a power of two >= 8, got " + std::to_string(n));
  }
  if (!(dx > 0.0) || !std::isfinite(dx)) throw InvalidInput("GridField: spacing must be positive");
}

bool finite(cplx z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); }

// Results of internal computations report non-finite values as a blow-up, not bad input.
GridField computed(std::vector<cplx> v, cplx seam, double dx, bool real_valued, const char* where) {
  if (!finite(seam) || !std::all_of(v.begin(), v.end(), finite)) {
    throw NumericalBlowup(std::string(where) + ": non-finite sample");
  }
  return GridField(std::move(v), seam, dx, real_valued);
}

GridField computed(std::vector<cplx> v, double dx, bool real_valued, const char* where) {
  const cplx seam = v.empty() ? cplx{} : v.front();
  return computed(std::move(v), seam, dx, real_valued, where);
}

}  // namespace

GridField::GridField(std::size_t n, double dx, bool real_valued)
    : v_(n), seam_{}, dx_(dx), real_(real_valued) {
  validate_shape(n, dx);
}

GridField::GridField(std::vector<cplx> samples, double dx, bool real_valued)
    : v_(std::move(samples)), dx_(dx), real_(real_valued) {
  validate_shape(v_.size(), dx);
  seam_ = v_.front();
  if (!all_finite()) throw InvalidInput("GridField: non-finite sample");
  enforce_real();
}

GridField::GridField(std::vector<cplx> samples, cplx seam, double dx, bool real_valued)
    : v_(std::move(samples)), seam_(seam), dx_(dx), real_(real_valued) {
  validate_shape(v_.size(), dx);
  if (!all_finite()) throw InvalidInput("GridField: non-finite sample");
  enforce_real();
}

GridField GridField::sample(std::size_t n, double length, const std::function<cplx(double)>& f) {
  if (n == 0) throw InvalidInput("GridField::sample: empty grid");
  const double dx = length / static_cast<double>(n);
  std::vector<cplx> v(n);
  for (std::size_t k = 0; k < n; ++k) v[k] = f(dx * static_cast<double>(k));
  return GridField(std::move(v), f(length), dx, false);
}

GridField GridField::sample_real(std::size_t n, double length, const std::function<double(double)>& f) {
  if (n == 0) throw InvalidInput("GridField::sample_real: empty grid");
  const double dx = length / static_cast<double>(n);
  std::vector<cplx> v(n);
  for (std::size_t k = 0; k < n; ++k) v[k] = f(dx * static_cast<double>(k));
  return GridField(std::move(v), cplx{f(length), 0.0}, dx, true);
}

GridField GridField::constant(std::size_t n, double dx, cplx value) {
  GridField g(std::vector<cplx>(n, value), dx, value.imag() == 0.0);
  return g;
}

void GridField::set_seam(cplx value) {
  seam_ = real_ ? cplx{value.real(), 0.0} : value;
}

GridField GridField::periodized() const {
  GridField g = *this;
  g.seam_ = g.v_.front();
  return g;
}

bool GridField::same_grid(const GridField& other) const {
  return v_.size() == other.v_.size() && dx_ == other.dx_;
}

void GridField::require_same_grid(const GridField& other, const char* what) const {
  if (!same_grid(other)) {
    throw InvalidInput(std::string(what) + ": grid mismatch (" + std::to_string(v_.size()) + " vs " +
                       std::to_string(other.v_.size()) + " nodes)");
  }
}

bool GridField::all_finite() const {
  return finite(seam_) && std::all_of(v_.begin(), v_.end(), finite);
}

void GridField::check_finite(const char* where) const {
  if (!all_finite()) throw NumericalBlowup(std::string(where) + ": non-finite sample");
}

void GridField::enforce_real() {
  if (!real_) return;
  for (auto& z : v_) z = {z.real(), 0.0};
  seam_ = {seam_.real(), 0.0};
}

GridField GridField::conj() const {
  GridField g = *this;
  for (auto& z : g.v_) z = std::conj(z);
  g.seam_ = std::conj(g.seam_);
  return g;
}

GridField GridField::abs2() const {
  return map([](cplx z) { return cplx{std::norm(z), 0.0}; }, true);
}

GridField GridField::abs() const {
  return map([](cplx z) { return cplx{std::abs(z), 0.0}; }, true);
}

GridField GridField::real() const {
  return map([](cplx z) { return cplx{z.real(), 0.0}; }, true);
}

GridField GridField::imag() const {
  return map([](cplx z) { return cplx{z.imag(), 0.0}; }, true);
}

GridField GridField::map(const std::function<cplx(cplx)>& fn, bool real_valued) const {
  GridField g = *this;
  for (auto& z : g.v_) z = fn(z);
  g.seam_ = fn(g.seam_);
  g.real_ = real_valued;
  g.enforce_real();
  g.check_finite("GridField::map");
  return g;
}

GridField& GridField::operator+=(const GridField& o) {
  require_same_grid(o, "GridField +");
  for (std::size_t k = 0; k < v_.size(); ++k) v_[k] += o.v_[k];
  seam_ += o.seam_;
  real_ = real_ && o.real_;
  check_finite("GridField +");
  return *this;
}

GridField& GridField::operator-=(const GridField& o) {
  require_same_grid(o, "GridField -");
  for (std::size_t k = 0; k < v_.size(); ++k) v_[k] -= o.v_[k];
  seam_ -= o.seam_;
  real_ = real_ && o.real_;
  check_finite("GridField -");
  return *this;
}

GridField& GridField::operator*=(const GridField& o) {
  require_same_grid(o, "GridField *");
  for (std::size_t k = 0; k < v_.size(); ++k) v_[k] *= o.v_[k];
  seam_ *= o.seam_;
  real_ = real_ && o.real_;
  check_finite("GridField *");
  return *this;
}

GridField& GridField::operator*=(cplx s) {
  for (auto& z : v_) z *= s;
  seam_ *= s;
  real_ = real_ && s.imag() == 0.0;
  check_finite("GridField scale");
  return *this;
}

GridField& GridField::operator*=(double s) {
  for (auto& z : v_) z *= s;
  seam_ *= s;
  check_finite("GridField scale");
  return *this;
}

GridField& GridField::operator+=(cplx s) {
  for (auto& z : v_) z += s;
  seam_ += s;
  real_ = real_ && s.imag() == 0.0;
  check_finite("GridField shift");
  return *this;
}

GridField operator/(const GridField& a, const GridField& b) {
  a.require_same_grid(b, "GridField /");
  GridField g = a;
  for (std::size_t k = 0; k < g.v_.size(); ++k) g.v_[k] /= b.v_[k];
  g.seam_ /= b.seam_;
  g.real_ = a.real_ && b.real_;
  g.check_finite("GridField /");
  return g;
}

namespace {

// f - J x / L, periodic continuous through the seam.
std::vector<cplx> detrended(const GridField& f, cplx& slope) {
  slope = f.seam_jump() / f.length();
  std::vector<cplx> g(f.samples().begin(), f.samples().end());
  for (std::size_t k = 0; k < g.size(); ++k) g[k] -= slope * f.x(k);
  return g;
}

std::vector<cplx> spectral_deriv(const std::vector<cplx>& g, int order, double length) {
  const std::size_t n = g.size();
  auto spec = detail::fft(g);
  const double base = 2.0 * std::numbers::pi / length;
  for (std::size_t j = 0; j < n; ++j) {
    const long m = mode_number(j, n);
    const double k = base * static_cast<double>(m);
    if (order == 1) {
      spec[j] *= (2 * static_cast<std::size_t>(std::labs(m)) == n) ? cplx{} : kI * k;
    } else {
      spec[j] *= -k * k;
    }
  }
  return detail::ifft(spec);
}

std::vector<cplx> fd4_deriv(const std::vector<cplx>& g, int order, double dx) {
  const std::size_t n = g.size();
  std::vector<cplx> out(n);
  auto at = [&](long k) { return g[static_cast<std::size_t>((k % static_cast<long>(n) + n) % n)]; };
  for (std::size_t k = 0; k < n; ++k) {
    const long i = static_cast<long>(k);
    if (order == 1) {
      out[k] = (at(i - 2) - 8.0 * at(i - 1) + 8.0 * at(i + 1) - at(i + 2)) / (12.0 * dx);
    } else {
      out[k] = (-at(i - 2) + 16.0 * at(i - 1) - 30.0 * at(i) + 16.0 * at(i + 1) - at(i + 2)) / (12.0 * dx * dx);
    }
  }
  return out;
}

}  // namespace

GridField deriv(const GridField& f, int order, DerivMethod method) {
  if (order != 1 && order != 2) throw InvalidInput("deriv: order must be 1 or 2");
  cplx slope;
  const auto g = detrended(f, slope);
  auto out = method == DerivMethod::spectral ? spectral_deriv(g, order, f.length()) : fd4_deriv(g, order, f.dx());
  if (order == 1) {
    for (auto& z : out) z += slope;
  }
  return computed(std::move(out), f.dx(), f.real_valued(), "deriv");
}

GridField cumint(const GridField& f, LowerLimit lower) {
  const std::size_t n = f.size();
  std::vector<cplx> out(n);
  const double h = 0.5 * f.dx();
  out[0] = 0.0;
  for (std::size_t k = 1; k < n; ++k) out[k] = out[k - 1] + h * (f[k - 1] + f[k]);
  cplx seam = out[n - 1] + h * (f[n - 1] + f.seam());
  // Euler-Maclaurin endpoint terms lift the trapezoid sums to sixth order.
  const GridField fx = deriv(f);
  const GridField fxxx = deriv(fx, 2);
  const double h2 = f.dx() * f.dx();
  const double w1 = h2 / 12.0, w3 = h2 * h2 / 720.0;
  for (std::size_t k = 1; k < n; ++k) out[k] += w3 * (fxxx[k] - fxxx[0]) - w1 * (fx[k] - fx[0]);
  seam += w3 * (fxxx.seam() - fxxx[0]) - w1 * (fx.seam() - fx[0]);
  if (lower == LowerLimit::domain_center) {
    const cplx shift = out[n / 2];
    for (auto& z : out) z -= shift;
    seam -= shift;
  }
  return computed(std::move(out), seam, f.dx(), f.real_valued(), "cumint");
}

GridField spectral_cumint(const GridField& f) {
  const GridField fp = f.periodized();
  const TrigSeries series(fp.samples(), fp.length());
  const cplx base = series.antiderivative(0.0);
  std::vector<cplx> out(f.size());
  for (std::size_t k = 0; k < f.size(); ++k) out[k] = series.antiderivative(f.x(k)) - base;
  const cplx seam = series.antiderivative(f.length()) - base;
  return computed(std::move(out), seam, f.dx(), f.real_valued(), "spectral_cumint");
}

Norms norms(const GridField& f) {
  Norms r;
  for (std::size_t k = 0; k < f.size(); ++k) {
    const double a2 = std::norm(f[k]);
    r.mass += a2;
    r.linf = std::max(r.linf, std::sqrt(a2));
  }
  r.mass *= f.dx();
  r.l2 = std::sqrt(r.mass);
  return r;
}

double max_abs(const GridField& f) {
  double m = 0.0;
  for (std::size_t k = 0; k < f.size(); ++k) m = std::max(m, std::abs(f[k]));
  return m;
}

cplx integrate(const GridField& f) {
  cplx s{};
  for (std::size_t k = 0; k < f.size(); ++k) s += f[k];
  return s * f.dx();
}

GridField momentum_density(const GridField& q) {
  const cplx q0 = q[0];
  const cplx qs = q.seam();
  const double a0 = std::abs(q0);
  const double as = std::abs(qs);
  const bool winding = q0 != qs && a0 > 1e-300 && as > 1e-300 && std::abs(as - a0) <= 1e-8 * a0;
  if (!winding) {
    return (q.conj() * deriv(q)).imag();
  }
  // q = qt * exp(i r x) with qt periodic; Im(q* q_x) = Im(qt* qt_x) + r |q|^2.
  const double rate = std::arg(qs / q0) / q.length();
  std::vector<cplx> v(q.size());
  for (std::size_t k = 0; k < q.size(); ++k) v[k] = q[k] * std::polar(1.0, -rate * q.x(k));
  GridField qt(std::move(v), q.dx());
  GridField out = (qt.conj() * deriv(qt)).imag() + (q.abs2() * rate).periodized();
  return out.periodized();
}

GridField dealias(const GridField& f) {
  const std::size_t n = f.size();
  std::vector<cplx> v(f.samples().begin(), f.samples().end());
  auto spec = detail::fft(v);
  for (std::size_t j = 0; j < n; ++j) {
    if (3 * static_cast<std::size_t>(std::labs(mode_number(j, n))) > n) spec[j] = 0.0;
  }
  return computed(detail::ifft(spec), f.dx(), f.real_valued(), "dealias");
}

GridField refine(const GridField& f, std::size_t factor) {
  if (factor == 0 || !is_power_of_two(factor)) throw InvalidInput("refine: factor must be a power of two");
  if (factor == 1) return f;
  const std::size_t n = f.size();
  const std::size_t m = n * factor;
  cplx slope;
  const auto g = detrended(f, slope);
  auto spec = detail::fft(g);
  std::vector<cplx> fine(m);
  const double scale = static_cast<double>(factor);
  for (std::size_t j = 0; j < n; ++j) {
    const long mode = mode_number(j, n);
    if (2 * static_cast<std::size_t>(std::labs(mode)) == n) {
      fine[n / 2] += 0.5 * scale * spec[j];
      fine[m - n / 2] += 0.5 * scale * spec[j];
    } else {
      const std::size_t slot = mode >= 0 ? static_cast<std::size_t>(mode) : m - static_cast<std::size_t>(-mode);
      fine[slot] = scale * spec[j];
    }
  }
  auto v = detail::ifft(fine);
  const double dx = f.dx() / scale;
  for (std::size_t k = 0; k < m; ++k) v[k] += slope * (dx * static_cast<double>(k));
  return computed(std::move(v), f.seam(), dx, f.real_valued(), "refine");
}

TrigSeries::TrigSeries(std::span<const cplx> samples, double period) : period_(period) {
  if (samples.empty()) throw InvalidInput("TrigSeries: no samples");
  coeffs_ = detail::fft(samples);
  const double inv = 1.0 / static_cast<double>(samples.size());
  for (auto& c : coeffs_) c *= inv;
}

namespace {

template <class Weight>
cplx trig_sum(const std::vector<cplx>& c, double period, double x, Weight weight) {
  const std::size_t n = c.size();
  const double theta = 2.0 * std::numbers::pi * x / period;
  cplx sum = weight(0L, cplx{1.0, 0.0}) * c[0];
  const std::size_t half = (n - 1) / 2;
  for (std::size_t m = 1; m <= half; ++m) {
    const double ph = theta * static_cast<double>(m);
    const cplx w = std::polar(1.0, ph);
    sum += weight(static_cast<long>(m), w) * c[m];
    sum += weight(-static_cast<long>(m), std::conj(w)) * c[n - m];
  }
  if (n % 2 == 0) {
    // Nyquist term as a cosine so that real samples interpolate to real values.
    const long m = static_cast<long>(n / 2);
    const double ph = theta * static_cast<double>(m);
    const cplx wp = std::polar(1.0, ph);
    sum += 0.5 * (weight(m, wp) + weight(-m, std::conj(wp))) * c[n / 2];
  }
  return sum;
}

}  // namespace

cplx TrigSeries::operator()(double x) const {
  return trig_sum(coeffs_, period_, x, [](long, cplx w) { return w; });
}

cplx TrigSeries::derivative(double x) const {
  const double base = 2.0 * std::numbers::pi / period_;
  return trig_sum(coeffs_, period_, x, [base](long m, cplx w) { return kI * (base * static_cast<double>(m)) * w; });
}

cplx TrigSeries::antiderivative(double x) const {
  const double base = 2.0 * std::numbers::pi / period_;
  return coeffs_[0] * x + trig_sum(coeffs_, period_, x, [base](long m, cplx w) {
           return m == 0 ? cplx{} : w / (kI * (base * static_cast<double>(m)));
         });
}

GridField random_smooth_field(std::size_t n, double length, std::uint64_t seed, int modes, bool real_valued,
                              double offset) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<cplx> a(static_cast<std::size_t>(modes)), b(static_cast<std::size_t>(modes));
  for (int m = 0; m < modes; ++m) {
    const double w = 1.0 / static_cast<double>((m + 1) * (m + 1));
    a[static_cast<std::size_t>(m)] = w * cplx{u(rng), real_valued ? 0.0 : u(rng)};
    b[static_cast<std::size_t>(m)] = w * cplx{u(rng), real_valued ? 0.0 : u(rng)};
  }
  const double base = 2.0 * std::numbers::pi / length;
  return GridField::sample(n, length, [&](double x) {
    cplx s = offset;
    for (int m = 0; m < modes; ++m) {
      const double th = base * static_cast<double>(m + 1) * x;
      s += a[static_cast<std::size_t>(m)] * std::cos(th) + b[static_cast<std::size_t>(m)] * std::sin(th);
    }
    return s;
  }).periodized().map([](cplx z) { return z; }, real_valued);
}

void write_csv(std::ostream& os, const GridField& f) {
  os << "x,re,im\n";
  char buf[128];
  for (std::size_t k = 0; k < f.size(); ++k) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g\n", f.x(k), f[k].real(), f[k].imag());
    os << buf;
  }
}

GridField read_csv(std::istream& is, bool real_valued) {
  std::string line;
  std::vector<cplx> v;
  std::vector<double> xs;
  bool header = true;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (header) {
      header = false;
      if (line.rfind("x,", 0) == 0) continue;
    }
    std::istringstream row(line);
    std::string a, b, c;
    if (!std::getline(row, a, ',') || !std::getline(row, b, ',') || !std::getline(row, c, ',')) {
      throw InvalidInput("read_csv: malformed row '" + line + "'");
    }
    xs.push_back(std::stod(a));
    v.emplace_back(std::stod(b), std::stod(c));
  }
  if (xs.size() < 2) throw InvalidInput("read_csv: need at least two rows");
  const double dx = xs[1] - xs[0];
  return GridField(std::move(v), dx, real_valued);
}

}  // namespace nhdnls
