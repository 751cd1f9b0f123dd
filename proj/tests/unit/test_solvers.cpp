#include <doctest.h>

#include <cmath>
#include <numbers>

#include "helpers.hpp"
#include "nhdnls/errors.hpp"
#include "nhdnls/solvers.hpp"
#include "nhdnls/su2.hpp"

using namespace nhdnls;
using testing::diff;

namespace {

constexpr double kPi = std::numbers::pi;

GridField constant(const GridField& like, cplx v) { return GridField::constant(like.size(), like.dx(), v); }

TimeFn const_fn(double v) {
  return [v](double) { return v; };
}

double integral(const GridField& f) {
  double s = 0.0;
  for (std::size_t k = 0; k < f.size(); ++k) s += f[k].real();
  return s * f.dx();
}

}  // namespace

TEST_CASE("standard right-hand side") {
  const std::size_t n = 32;
  const double length = 2.0 * kPi;
  const GridField zero(n, length / n);
  CHECK(max_abs(rhs_standard(zero, constant(zero, 1.0))) == 0.0);

  const double a = 0.7, k = 3.0, eta = -0.4;
  const GridField pw = GridField::sample(n, length, [=](double x) { return a * std::exp(kI * (k * x)); });
  const GridField expected = (kI * (-k * k + 2.0 * eta * a * a)) * pw;
  CHECK(diff(rhs_standard(pw, constant(pw, eta)), expected) <= 1e-11);
}

TEST_CASE("stationary soliton: q_xx + 2|q|^2 q = a^2 q") {
  const double a = 1.0;
  const GridField q = testing::soliton(256, 50.0, a);
  CHECK(diff(rhs_standard(q, constant(q, 1.0)), (kI * a * a) * q) <= 1e-8);
}

TEST_CASE("inhomogeneous right-hand side") {
  const std::size_t n = 256;
  const double length = 40.0;
  const GridField q = testing::soliton(n, length, 1.0, 0.5);
  CHECK(diff(rhs_inhomogeneous(q, constant(q, 1.0)), rhs_standard(q, constant(q, 1.0))) <= 1e-14);

  const double c = 1.7;
  const GridField linear = kI * deriv(q, 2);
  const GridField cubic = (2.0 * kI) * (q * q.abs2());
  CHECK(diff(rhs_inhomogeneous(q, constant(q, c)), c * linear + c * cubic) <= 1e-12);

  // The integral term alone, against the quadrature oracle.
  const GridField rho = testing::tanh_profile(n, length);
  const GridField local = kI * deriv(rho * q, 2) + (2.0 * kI) * (rho * q * q.abs2());
  const GridField term = rhs_inhomogeneous(q, rho) - local;
  const auto ref = oracle::cumulative(
      [&](double x) -> cplx {
        const double s = oracle::sech(x - 0.5 * length);
        return 0.1 * s * s * s * s;
      },
      0.0, length / n, n);
  double err = 0.0;
  for (std::size_t k = 0; k < n; ++k) err = std::max(err, std::abs(term[k] - 2.0 * kI * q[k] * ref[k]));
  CHECK(err <= 1e-6);
}

TEST_CASE("vortex right-hand side") {
  const std::size_t n = 128;
  const double length = 30.0;
  const GridField q = testing::soliton(n, length, 0.8, 0.6);

  // No friction, no drag: focusing NLS with cubic coefficient 1/2.
  VortexParams plain;
  CHECK(diff(rhs_vortex(q, plain, 0.0), rhs_standard(q, constant(q, 0.25))) <= 1e-12);

  // Uniform state: only the drag and the local cubic term survive.
  const double a = 0.9, phi = 0.3;
  const GridField u = GridField::constant(16, 2.0 * kPi / 16, a * std::exp(kI * phi));
  VortexParams p{0.2, 0.35, const_fn(0.6)};
  const cplx factor = kI * 0.6 + (0.5 * kI * (1.0 - 0.35) - 0.2) * (a * a);
  CHECK(diff(rhs_vortex(u, p, 1.0), factor * u) <= 1e-14);

  // Real q: q q*_x - q* q_x vanishes, so the integral drops out.
  const GridField r = testing::soliton(n, length);
  const cplx c{0.2, 1.0 - 0.35};
  const GridField local = (kI * 0.6) * r + c * deriv(r, 2) + (0.5 * kI * (1.0 - 0.35) - 0.2) * (r * r.abs2());
  CHECK(diff(rhs_vortex(r, p, 0.0), local) <= 1e-12);
}

TEST_CASE("problem validation") {
  const GridField q = testing::soliton(64, 20.0);
  CHECK_NOTHROW(NlsProblem::standard(constant(q, 1.0)).validate(q));
  NlsProblem bad = NlsProblem::standard(constant(q, 1.0));
  bad.rho = constant(q, 1.0);
  CHECK_THROWS_AS(bad.validate(q), ConfigError);
  CHECK_THROWS_AS(NlsProblem::vortex_filament({1.0, 0.0, zero_time_fn()}).validate(q), ConfigError);
  CHECK_THROWS_AS(NlsProblem::vortex_filament({0.1, -0.1, zero_time_fn()}).validate(q), ConfigError);
  CHECK_THROWS_AS(NlsProblem::standard(GridField::constant(32, 20.0 / 32, 1.0)).validate(q), ConfigError);
  CHECK_THROWS_AS(parse_variant("kdv"), ConfigError);
  CHECK(parse_variant(to_string(NlsVariant::shifted_drift)) == NlsVariant::shifted_drift);
}

TEST_CASE("stability bound is a hard error") {
  const GridField q = testing::soliton(128, 20.0);
  const NlsProblem p = NlsProblem::standard(constant(q, 1.0));
  const double limit = stability_limit(p, q);
  CHECK(limit == doctest::Approx(0.4 * q.dx() * q.dx()));
  CHECK_NOTHROW(step(p, q, 0.0, limit));
  CHECK_THROWS_AS(step(p, q, 0.0, 1.01 * limit), ConfigError);
  CHECK_THROWS_AS(step(p, q, 0.0, -1e-3), ConfigError);
  CHECK_THROWS_AS(step(NlsProblem::inhomogeneous(constant(q, 1.0)), q, 0.0, 1e-3, Scheme::splitstep), ConfigError);
}

TEST_CASE("standard soliton conserves mass over 1000 RK4 steps") {
  const GridField q = testing::soliton(256, 50.0);
  const NlsProblem p = NlsProblem::standard(constant(q, 1.0));
  const Evolution ev = evolve(p, q, 0.0, 0.005, 1000, Scheme::rk4, 100);
  CHECK(ev.log.relative_mass_drift() <= 1e-10);
  CHECK(ev.t == doctest::Approx(5.0));
  // |q| is stationary for the soliton.
  CHECK(diff(ev.q.abs(), q.abs()) <= 1e-6);
}

TEST_CASE("inhomogeneous with unit coupling steps like the standard equation") {
  const GridField q = testing::soliton(128, 30.0, 1.0, 0.7);
  const NlsProblem inh = NlsProblem::inhomogeneous(constant(q, 1.0));
  const NlsProblem std_p = NlsProblem::standard(constant(q, 1.0));
  GridField a = q, b = q;
  for (int i = 0; i < 20; ++i) {
    a = step(inh, a, 0.01 * i, 0.01);
    b = step(std_p, b, 0.01 * i, 0.01);
    CHECK(diff(a, b) <= 1e-12);
  }
}

TEST_CASE("split-step and RK4 agree for the standard equation") {
  const GridField q = testing::soliton(128, 30.0);
  const NlsProblem p = NlsProblem::standard(constant(q, 1.0));
  const Evolution rk = evolve(p, q, 0.0, 0.005, 200);
  const Evolution ss = evolve(p, q, 0.0, 0.005, 200, Scheme::splitstep);
  CHECK(diff(rk.q, ss.q) <= 1e-4);
  CHECK(ss.log.relative_mass_drift() <= 1e-12);
}

TEST_CASE("inhomogeneous mass balance") {
  const std::size_t n = 256;
  const double length = 40.0;
  const GridField q = testing::soliton(n, length, 1.0, 1.0);
  const GridField rho = testing::tanh_profile(n, length, 0.1);
  const GridField qt = rhs_inhomogeneous(q, rho);
  const double rate = 2.0 * integral((q.conj() * qt).real());
  const double flux = -2.0 * integral(deriv(rho) * (q.conj() * deriv(q)).imag());
  CHECK(std::abs(flux) > 1e-2);
  CHECK(std::abs(rate - flux) <= 1e-8);

  // With the coupling gradient far from the packet the mass is conserved.
  const GridField far = testing::tanh_profile(512, 60.0, 0.1, 12.0);
  const GridField q0 = testing::soliton(512, 60.0);
  const NlsProblem p = NlsProblem::inhomogeneous(far);
  const double dt = 0.9 * stability_limit(p, q0);
  const Evolution ev = evolve(p, q0, 0.0, dt, 1000, Scheme::rk4, 50);
  CHECK(ev.log.relative_mass_drift() <= 1e-8);
}

TEST_CASE("uniform vortex state decays like the amplitude ODE") {
  const double alpha = 0.1;
  const GridField u = GridField::constant(16, 2.0 * kPi / 16, 1.0);
  const NlsProblem p = NlsProblem::vortex_filament({alpha, 0.0, zero_time_fn()});
  const Evolution ev = evolve(p, u, 0.0, 0.01, 1000, Scheme::rk4, 10);
  const double ode = oracle::scalar_rk4([=](double, double y) { return -2.0 * alpha * y * y; }, 1.0, 10.0, 10000);
  CHECK(std::abs(ode - 1.0 / 3.0) <= 1e-10);
  CHECK(std::abs(std::norm(ev.q[5]) - 1.0 / 3.0) <= 1e-4);
  CHECK(std::abs(std::norm(ev.q[5]) - ode) <= 1e-4);
  const auto& log = ev.log.entries();
  for (std::size_t i = 1; i < log.size(); ++i) CHECK(log[i].mass < log[i - 1].mass);
}

TEST_CASE("RK4 converges at fourth order") {
  const std::size_t n = 32;
  const double length = 2.0 * kPi;
  const double a = 1.0, k = 4.0, eta = 1.0;
  const GridField q0 = GridField::sample(n, length, [=](double x) { return a * std::exp(kI * (k * x)); });
  const NlsProblem p = NlsProblem::standard(constant(q0, eta));
  const double omega = -k * k + 2.0 * eta * a * a;
  const double period = 2.0 * kPi / std::abs(omega);
  auto error = [&](std::size_t steps) {
    const Evolution ev = evolve(p, q0, 0.0, period / static_cast<double>(steps), steps);
    return diff(ev.q, q0 * std::exp(kI * (omega * period)));
  };
  const double ratio = error(40) / error(80);
  CHECK(ratio >= 12.0);
  CHECK(ratio <= 20.0);
}

TEST_CASE("a constant phase commutes with a step for every variant") {
  const std::size_t n = 128;
  const double length = 30.0;
  const GridField q = testing::soliton(n, length, 0.9, 0.4);
  const cplx phase = std::exp(kI * 1.1);
  const std::vector<NlsProblem> problems = {
      NlsProblem::standard(constant(q, 1.0)),
      NlsProblem::inhomogeneous(testing::tanh_profile(n, length, 0.2)),
      NlsProblem::vortex_filament({0.1, 0.2, const_fn(0.3)}),
      NlsProblem::shifted(const_fn(0.5)),
      NlsProblem::shifted_drift(const_fn(0.5), const_fn(0.2)),
  };
  for (const auto& p : problems) {
    CAPTURE(to_string(p.variant));
    const double dt = 0.5 * stability_limit(p, q);
    CHECK(diff(step(p, phase * q, 0.0, dt), phase * step(p, q, 0.0, dt)) <= 1e-13);
  }
}

TEST_CASE("deformed right-hand side") {
  // i p_t + p_xx - 2p|p|^2 = T p - (i/2) G p_x.
  const GridField p = testing::soliton(128, 30.0, 0.8, 0.3);
  const double source = 0.4, free = 0.7;
  const GridField residual = kI * rhs_deformed(p, source, free) + deriv(p, 2) - 2.0 * (p * p.abs2()) -
                             source * p + (0.5 * kI * free) * deriv(p);
  CHECK(max_abs(residual) <= 1e-12);
}

TEST_CASE("Landau-Lifshitz right-hand side") {
  const std::size_t n = 32;
  const double length = 2.0 * kPi;
  const GridField zero(n, length / n, true);
  const GridField one = GridField::constant(n, length / n, 1.0);
  const TangentField flat = make_tangent_field(zero, zero, one);
  const TangentField f = rhs_ll(flat);
  CHECK(max_abs(f.x) + max_abs(f.y) + max_abs(f.z) == 0.0);
  const TangentField same = step_ll(flat, 0.01);
  CHECK(diff(same.z, one) == 0.0);

  const TangentField wave = make_tangent_field(GridField::sample_real(n, length, [](double x) { return std::sin(3 * x); }),
                                               zero, GridField::sample_real(n, length, [](double x) { return std::cos(3 * x); }));
  const TangentField w = rhs_ll(wave);
  CHECK(max_abs(w.x) + max_abs(w.y) + max_abs(w.z) <= 1e-11);

  CHECK_THROWS_AS(rhs_ll(make_tangent_field(zero, zero, 2.0 * one)), InvalidInput);
}

TEST_CASE("matrix form of the Landau-Lifshitz flow matches t x t_ss") {
  const std::size_t n = 64;
  const double length = 2.0 * kPi;
  const GridField th = GridField::sample_real(n, length, [](double x) { return 0.5 + 0.3 * std::sin(x); });
  const GridField ph = GridField::sample_real(n, length, [](double x) { return 2.0 * x + 0.2 * std::cos(x); });
  auto real_map = [](const GridField& g, auto fn) { return g.map([fn](cplx v) { return cplx{fn(v.real()), 0.0}; }, true); };
  auto sin_f = [](double v) { return std::sin(v); };
  auto cos_f = [](double v) { return std::cos(v); };
  const TangentField t = make_tangent_field(real_map(th, sin_f) * real_map(ph, cos_f), real_map(th, sin_f) * real_map(ph, sin_f),
                                            real_map(th, cos_f));
  const TangentField v = rhs_ll(t);
  const GridField xx = deriv(t.x, 2), yy = deriv(t.y, 2), zz = deriv(t.z, 2);
  double err = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const Matrix2 s = Matrix2::from_vector(t.x[k], t.y[k], t.z[k]);
    const Matrix2 sxx = Matrix2::from_vector(xx[k], yy[k], zz[k]);
    const PauliCoefficients c = pauli_decompose(commutator(s, sxx) * (1.0 / (2.0 * kI)));
    const cplx cx = 0.5 * (c.cplus + c.cminus);
    const cplx cy = 0.5 * kI * (c.cplus - c.cminus);
    err = std::max({err, std::abs(cx - v.x[k]), std::abs(cy - v.y[k]), std::abs(c.c3 - v.z[k]), std::abs(c.c0)});
  }
  CHECK(err <= 1e-10);
}

TEST_CASE("Landau-Lifshitz energy, norm and precession") {
  const std::size_t n = 32;
  const double length = 2.0 * kPi;
  const double eps = 0.1, k = 1.0;
  const double zc = std::sqrt(1.0 - eps * eps);
  const TangentField t0 = make_tangent_field(GridField::sample_real(n, length, [=](double x) { return eps * std::cos(k * x); }),
                                             GridField::sample_real(n, length, [=](double x) { return eps * std::sin(k * x); }),
                                             GridField::constant(n, length / n, zc));

  // Precession of the transverse part at x = 0.
  const double dt = 0.005;
  TangentField t = t0;
  const std::size_t steps = 200;
  for (std::size_t i = 0; i < steps; ++i) t = step_ll(t, dt);
  const double angle = -std::atan2(t.y[0].real(), t.x[0].real());
  const double omega = angle / (dt * static_cast<double>(steps));
  CHECK(std::abs(omega - k * k) <= 0.02 * k * k);

  // Energy over T = 10 and the pointwise norm.
  const std::size_t m = 64;
  const TangentField bumpy = make_tangent_field(
      GridField::sample_real(m, length, [](double x) { return 0.3 * std::cos(x) + 0.1 * std::sin(2 * x); }),
      GridField::sample_real(m, length, [](double x) { return 0.3 * std::sin(x); }),
      GridField::constant(m, length / m, 1.0)).normalized();
  TangentField b = bumpy;
  const double e0 = ll_energy(b);
  double worst = 0.0, defect = 0.0;
  for (int i = 0; i < 4000; ++i) {
    b = step_ll(b, 0.0025);
    worst = std::max(worst, std::abs(ll_energy(b) - e0));
    defect = std::max(defect, b.unit_defect());
  }
  CHECK(worst <= 1e-6);
  CHECK(defect <= 1e-14);
  CHECK_THROWS_AS(step_ll(b, 1.0), ConfigError);
}
