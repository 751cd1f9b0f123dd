#include "nhdnls/spin_chain.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_spline.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <numbers>
#include <ostream>

#include "nhdnls/errors.hpp"

namespace nhdnls {

SpinLattice::SpinLattice(std::vector<Vec3> spins, std::vector<double> rho, double spacing)
    : spins_(std::move(spins)), rho_(std::move(rho)), a_(spacing) {
  if (spins_.size() < 2) throw InvalidInput("SpinLattice: need at least two sites");
  if (rho_.size() != spins_.size()) throw InvalidInput("SpinLattice: one coupling per bond required");
  if (!(a_ > 0.0) || !std::isfinite(a_)) throw InvalidInput("SpinLattice: spacing must be positive");
  for (double r : rho_) {
    if (!std::isfinite(r)) throw InvalidInput("SpinLattice: non-finite coupling");
  }
  for (auto& s : spins_) {
    const double r = norm(s);
    if (!std::isfinite(r) || std::abs(r - 1.0) > 1e-6) throw InvalidInput("SpinLattice: spins must be unit vectors");
    s = s / r;
  }
}

SpinLattice SpinLattice::homogeneous(std::vector<Vec3> spins, double coupling, double spacing) {
  const std::size_t n = spins.size();
  return SpinLattice(std::move(spins), std::vector<double>(n, coupling), spacing);
}

double SpinLattice::max_coupling() const {
  double m = 0.0;
  for (double r : rho_) m = std::max(m, std::abs(r));
  return m;
}

double SpinLattice::unit_defect() const {
  double worst = 0.0;
  for (const auto& s : spins_) worst = std::max(worst, std::abs(norm(s) - 1.0));
  return worst;
}

namespace {

std::vector<Vec3> chain_field(const std::vector<Vec3>& s, const std::vector<double>& rho) {
  const std::size_t n = s.size();
  std::vector<Vec3> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t prev = (i + n - 1) % n;
    const std::size_t next = (i + 1) % n;
    out[i] = cross(s[i], rho[prev] * s[prev] + rho[i] * s[next]);
  }
  return out;
}

std::vector<Vec3> axpy(const std::vector<Vec3>& a, double h, const std::vector<Vec3>& k) {
  std::vector<Vec3> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + h * k[i];
  return out;
}

}  // namespace

std::vector<Vec3> chain_rhs(const SpinLattice& lat) { return chain_field(lat.spins(), lat.couplings()); }

SpinLattice step_chain(const SpinLattice& lat, double dt) {
  if (!(dt > 0.0)) throw ConfigError("step_chain: dt must be positive");
  const double bound = 0.1 / std::max(lat.max_coupling(), 1e-300);
  if (dt > bound) {
    throw ConfigError("step_chain: dt = " + std::to_string(dt) + " exceeds 0.1/max|rho| = " + std::to_string(bound));
  }
  const auto& s = lat.spins();
  const auto& rho = lat.couplings();
  const auto k1 = chain_field(s, rho);
  const auto k2 = chain_field(axpy(s, 0.5 * dt, k1), rho);
  const auto k3 = chain_field(axpy(s, 0.5 * dt, k2), rho);
  const auto k4 = chain_field(axpy(s, dt, k3), rho);
  std::vector<Vec3> out(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    Vec3 v = s[i] + (dt / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    const double r = norm(v);
    if (!std::isfinite(r) || r == 0.0) throw NumericalBlowup("step_chain: non-finite spin at site " + std::to_string(i));
    out[i] = v / r;
  }
  return SpinLattice(std::move(out), rho, lat.spacing());
}

double chain_energy(const SpinLattice& lat) {
  const std::size_t n = lat.size();
  double e = 0.0;
  for (std::size_t i = 0; i < n; ++i) e -= lat.couplings()[i] * dot(lat[i], lat[(i + 1) % n]);
  return e;
}

Vec3 total_spin(const SpinLattice& lat) {
  Vec3 s;
  for (const auto& v : lat.spins()) s += v;
  return s;
}

SpinLattice spin_wave(std::size_t sites, double spacing, double coupling, double k, double amplitude) {
  if (!(amplitude >= 0.0 && amplitude < 1.0)) throw InvalidInput("spin_wave: amplitude must lie in [0, 1)");
  const double cz = std::sqrt(1.0 - amplitude * amplitude);
  std::vector<Vec3> s(sites);
  for (std::size_t i = 0; i < sites; ++i) {
    const double ph = k * spacing * static_cast<double>(i);
    s[i] = {amplitude * std::cos(ph), amplitude * std::sin(ph), cz};
  }
  return SpinLattice::homogeneous(std::move(s), coupling, spacing);
}

MagnonMeasurement magnon_dispersion(std::size_t sites, double spacing, double coupling, double k, double amplitude) {
  if (amplitude > 0.1) throw InvalidInput("magnon_dispersion: amplitude outside the linear regime");
  if (!(amplitude > 0.0)) throw InvalidInput("magnon_dispersion: amplitude must be positive");
  if (!(coupling > 0.0)) throw InvalidInput("magnon_dispersion: needs a positive homogeneous coupling");
  const double length = spacing * static_cast<double>(sites);
  const double m = k * length / (2.0 * std::numbers::pi);
  if (std::abs(m - std::round(m)) > 1e-9) throw InvalidInput("magnon_dispersion: k is not a lattice mode");

  MagnonMeasurement out;
  out.predicted = 2.0 * coupling * (1.0 - std::cos(k * spacing));
  out.continuum = coupling * spacing * spacing * k * k;
  if (std::round(m) == 0.0) return out;

  SpinLattice lat = spin_wave(sites, spacing, coupling, k, amplitude);
  const double dt = 0.05 / coupling;
  auto projection = [&](const SpinLattice& l) {
    cplx c{};
    for (std::size_t i = 0; i < sites; ++i) {
      const double ph = k * spacing * static_cast<double>(i);
      c += cplx{l[i].x, l[i].y} * std::polar(1.0, -ph);
    }
    return c;
  };
  // Accumulate about one radian of phase (or a step cap), then least-squares fit phase(t).
  const double target = 1.0;
  const std::size_t cap = 200000;
  const std::size_t stride = 10;
  std::vector<double> ts{0.0}, phases{0.0};
  cplx prev = projection(lat);
  double unwrapped = 0.0;
  std::size_t s = 0;
  while (s < cap) {
    lat = step_chain(lat, dt);
    ++s;
    if (s % stride != 0) continue;
    const cplx cur = projection(lat);
    unwrapped += std::arg(cur / prev);
    prev = cur;
    ts.push_back(static_cast<double>(s) * dt);
    phases.push_back(unwrapped);
    if (std::abs(unwrapped) >= target && ts.size() >= 8) break;
  }
  double st = 0.0, sp = 0.0, stt = 0.0, stp = 0.0;
  const double cnt = static_cast<double>(ts.size());
  for (std::size_t i = 0; i < ts.size(); ++i) {
    st += ts[i];
    sp += phases[i];
    stt += ts[i] * ts[i];
    stp += ts[i] * phases[i];
  }
  const double slope = (cnt * stp - st * sp) / (cnt * stt - st * st);
  out.omega = -slope;
  out.duration = ts.back();
  out.steps = s;
  return out;
}

TangentField coarse_grain(const SpinLattice& lat) {
  const std::size_t n = lat.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (norm(lat[(i + 1) % n] - lat[i]) > 0.2) {
      throw InvalidInput("coarse_grain: spins vary too quickly between sites " + std::to_string(i) + " and " +
                         std::to_string((i + 1) % n));
    }
  }
  std::size_t m = 8;
  while (m < n) m *= 2;
  const double length = lat.length();
  const double dx = length / static_cast<double>(m);

  gsl_set_error_handler_off();
  std::vector<double> xs(n + 1);
  for (std::size_t i = 0; i <= n; ++i) xs[i] = lat.spacing() * static_cast<double>(i);
  std::array<std::vector<cplx>, 3> comp;
  for (int c = 0; c < 3; ++c) {
    std::vector<double> ys(n + 1);
    for (std::size_t i = 0; i <= n; ++i) {
      const Vec3& v = lat[i % n];
      ys[i] = c == 0 ? v.x : (c == 1 ? v.y : v.z);
    }
    std::unique_ptr<gsl_spline, decltype(&gsl_spline_free)> spline(
        gsl_spline_alloc(gsl_interp_cspline_periodic, n + 1), &gsl_spline_free);
    std::unique_ptr<gsl_interp_accel, decltype(&gsl_interp_accel_free)> acc(gsl_interp_accel_alloc(),
                                                                               &gsl_interp_accel_free);
    if (!spline || !acc || gsl_spline_init(spline.get(), xs.data(), ys.data(), n + 1) != GSL_SUCCESS) {
      throw InvalidInput("coarse_grain: spline construction failed");
    }
    comp[c].resize(m);
    for (std::size_t k = 0; k < m; ++k) {
      const double x = std::min(dx * static_cast<double>(k), xs.back());
      comp[c][k] = gsl_spline_eval(spline.get(), x, acc.get());
    }
  }
  TangentField t{GridField(std::move(comp[0]), dx, true), GridField(std::move(comp[1]), dx, true),
                 GridField(std::move(comp[2]), dx, true)};
  return t.normalized();
}

SpinLattice lattice_from_field(const TangentField& t, double coupling) {
  std::vector<Vec3> s(t.size());
  for (std::size_t k = 0; k < t.size(); ++k) s[k] = {t.x[k].real(), t.y[k].real(), t.z[k].real()};
  return SpinLattice::homogeneous(std::move(s), coupling, t.dx());
}

GridField embedded_coupling(const SpinLattice& lat) {
  std::vector<cplx> v(lat.size());
  const double a2 = lat.spacing() * lat.spacing();
  for (std::size_t i = 0; i < lat.size(); ++i) v[i] = lat.couplings()[i] * a2;
  return GridField(std::move(v), lat.spacing(), true);
}

void write_lattice_csv(std::ostream& os, const SpinLattice& lat) {
  os << "i,Sx,Sy,Sz,rho_bond\n";
  char buf[160];
  for (std::size_t i = 0; i < lat.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%.17g\n", i, lat[i].x, lat[i].y, lat[i].z,
                  lat.couplings()[i]);
    os << buf;
  }
}

// ---------------------------------------------------------------------------

MatrixGridField DiscreteDeformation::lambda(int n, std::size_t size, double dx) const {
  auto it = alpha.find(n);
  if (it == alpha.end()) return MatrixGridField(size, dx);
  const auto& a = it->second;
  return MatrixGridField::from_vector(a[0], a[1], a[2]);
}

MatrixGridField spin_matrix(const TangentField& t) { return MatrixGridField::from_vector(t.x, t.y, t.z); }

MatrixGridField deformed_ll_rhs(const MatrixGridField& s, const DiscreteDeformation& d) {
  for (std::size_t k = 0; k < s.size(); ++k) {
    if ((s[k] * s[k] - Matrix2::identity()).max_abs() > 1e-8) {
      throw InvalidInput("deformed_ll_rhs: S^2 != I at node " + std::to_string(k));
    }
  }
  MatrixGridField out = (-0.5 * kI) * commutator(s, deriv(s, 2));
  if (d.has(1)) out += 0.5 * deriv(d.lambda(1, s.size(), s.dx()));
  if (d.has(0)) out += (-0.5 * kI) * commutator(s, d.lambda(0, s.size(), s.dx()));
  return out;
}

MatrixGridField recursive_constraint_residual(const MatrixGridField& s, const DiscreteDeformation& d, int n) {
  const MatrixGridField top = d.lambda(n, s.size(), s.dx());
  const MatrixGridField below = d.lambda(n - 1, s.size(), s.dx());
  return deriv(top) - kI * commutator(s, below);
}

std::vector<int> DiscreteScanReport::eom_entering() const {
  std::vector<int> out;
  for (const auto& e : entries) {
    if (e.enters_eom) out.push_back(e.order);
  }
  return out;
}

namespace {

std::array<GridField, 3> random_vector_field(std::size_t n, double length, std::uint64_t seed) {
  return {random_smooth_field(n, length, seed * 3 + 1), random_smooth_field(n, length, seed * 3 + 2),
          random_smooth_field(n, length, seed * 3 + 3)};
}

// ZCC contribution of delta V = (i/2) sum lambda^n Lambda^(n): -delta V_x + [U, delta V].
LaurentMatrixField deformation_contribution(const LaurentMatrixField& u, const DiscreteDeformation& d) {
  LaurentMatrixField dv(u.size(), u.dx());
  for (const auto& [n, a] : d.alpha) dv.set(n, (0.5 * kI) * d.lambda(n, u.size(), u.dx()));
  LaurentMatrixField c = commutator(u, dv);
  c -= deriv(dv);
  return c;
}

}  // namespace

DiscreteScanReport discrete_spectral_scan(const MatrixGridField& s, int lo, int hi, std::uint64_t seed) {
  DiscreteScanReport report;
  if (lo > hi) return report;
  const std::size_t n = s.size();
  const double dx = s.dx();
  const double length = dx * static_cast<double>(n);
  const LaxPair lax = build_ll_lax(s);

  // Orders of the ZCC where S_t appears: those carried by U_t for a generic S_t.
  const auto generic_st = random_vector_field(n, length, seed + 1000);
  const LaurentMatrixField u_t =
      ll_lax_time_derivative(MatrixGridField::from_vector(generic_st[0], generic_st[1], generic_st[2]));
  const std::set<int> eom = order_support(u_t, 1e-12, 1.0);
  report.eom_orders.assign(eom.begin(), eom.end());

  for (int order = lo; order <= hi; ++order) {
    DiscreteScanEntry entry;
    entry.order = order;
    DiscreteDeformation d;
    d.alpha[order] = random_vector_field(n, length, seed + 17 * static_cast<std::uint64_t>(order + 100));
    const double scale = d.lambda(order, n, dx).max_norm();
    const LaurentMatrixField c = deformation_contribution(lax.spatial, d);
    const std::set<int> fp = order_support(c, 1e-10, scale);
    entry.footprint.assign(fp.begin(), fp.end());
    entry.residual_norms = order_norms(c);
    for (int m : fp) entry.enters_eom = entry.enters_eom || eom.count(m) != 0;

    if (!entry.enters_eom) {
      for (int m : fp) {
        // Order m pairs Lambda^(m) with Lambda^(m-1); check the assembled ZCC order against the pattern.
        DiscreteDeformation pair;
        pair.alpha[m] = random_vector_field(n, length, seed + 31 * static_cast<std::uint64_t>(m + 100));
        pair.alpha[m - 1] = random_vector_field(n, length, seed + 37 * static_cast<std::uint64_t>(m + 100));
        const MatrixGridField assembled = deformation_contribution(lax.spatial, pair).at(m);
        const MatrixGridField pattern = (-0.5 * kI) * recursive_constraint_residual(s, pair, m);
        const double ref = std::max(pattern.max_norm(), 1.0);
        RecursiveConstraint rc;
        rc.order = m;
        rc.derivative_of = m;
        rc.commutator_with = m - 1;
        rc.verified = (assembled - pattern).max_norm() <= 1e-10 * ref;
        entry.constraints.push_back(rc);
      }
    }
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace nhdnls
