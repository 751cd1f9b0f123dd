#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "helpers.hpp"
#include "nhdnls/errors.hpp"
#include "nhdnls/geometry.hpp"

using namespace nhdnls;
using testing::diff;

namespace {

constexpr double kPi = std::numbers::pi;

std::vector<Vec3> circle(std::size_t n, double r) {
  std::vector<Vec3> p(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = 2 * kPi * static_cast<double>(i) / static_cast<double>(n);
    p[i] = {r * std::cos(u), r * std::sin(u), 0.0};
  }
  return p;
}

std::vector<Vec3> wobbly_loop(std::size_t n) {
  std::vector<Vec3> p(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = 2 * kPi * static_cast<double>(i) / static_cast<double>(n);
    p[i] = {std::cos(u), std::sin(u), 0.2 * std::sin(2 * u)};
  }
  return p;
}

double max_real_diff(const GridField& f, double v) {
  double m = 0.0;
  for (std::size_t k = 0; k < f.size(); ++k) m = std::max(m, std::abs(f[k].real() - v));
  return m;
}

double frame_defect(const CurveFrame& f) { return f.orthonormality_defect(); }

}  // namespace

TEST_CASE("circle frame") {
  const double r = 2.5;
  const CurveFrame f = frenet_from_curve(circle(256, r));
  CHECK(max_real_diff(f.kappa, 1.0 / r) <= 1e-6);
  CHECK(max_real_diff(f.tau, 0.0) <= 1e-6);
  CHECK(f.ds == doctest::Approx(2 * kPi * r / 256).epsilon(1e-10));
  CHECK(frame_defect(f) <= 1e-8);
  CHECK_FALSE(f.parallel_transport);
}

TEST_CASE("helix curvature and torsion") {
  const std::size_t n = 128;
  const double r = 1.2, h = 0.4;
  std::vector<Vec3> p(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = 2 * kPi * static_cast<double>(i) / static_cast<double>(n);
    p[i] = {r * std::cos(u), r * std::sin(u), h * u};
  }
  const CurveFrame f = frenet_from_curve(p, {0.0, 0.0, 2 * kPi * h});
  CHECK(max_real_diff(f.kappa, oracle::helix_curvature(r, h)) <= 1e-5);
  CHECK(max_real_diff(f.tau, oracle::helix_torsion(r, h)) <= 1e-5);
  CHECK(frame_defect(f) <= 1e-8);
}

TEST_CASE("degenerate curvature falls back to parallel transport") {
  const std::size_t n = 32;
  std::vector<Vec3> line(n);
  for (std::size_t i = 0; i < n; ++i) line[i] = {0.1 * static_cast<double>(i), 0.0, 0.0};
  const CurveFrame straight = frenet_from_curve(line, {0.1 * n, 0.0, 0.0});
  CHECK(straight.parallel_transport);
  CHECK(max_real_diff(straight.kappa, 0.0) <= 1e-12);
  CHECK(frame_defect(straight) <= 1e-8);

  // A planar loop with inflection points: only the nodes near the inflections are transported.
  std::vector<Vec3> bean(128);
  for (std::size_t i = 0; i < bean.size(); ++i) {
    const double u = 2 * kPi * static_cast<double>(i) / 128.0;
    const double rr = 1.0 + 0.6 * std::cos(2 * u);
    bean[i] = {rr * std::cos(u), rr * std::sin(u), 0.0};
  }
  FrenetOptions opts;
  opts.kappa_min_rel = 0.05;
  const CurveFrame f = frenet_from_curve(bean, {}, opts);
  CHECK(f.parallel_transport);
  std::size_t count = 0;
  for (bool t : f.transported) count += t;
  CHECK(count > 0);
  CHECK(count < 64);
  CHECK(frame_defect(f) <= 1e-8);

  CHECK_THROWS_AS(frenet_from_curve(std::vector<Vec3>(12)), InvalidInput);
}

TEST_CASE("forward Hasimoto map") {
  const std::size_t n = 64;
  const double length = 10.0;
  const GridField circ = hasimoto_forward(GridField::constant(n, length / n, 0.5), GridField(n, length / n, true));
  CHECK(diff(circ, GridField::constant(n, length / n, 0.5)) <= 1e-15);

  const double k0 = 0.7, t0 = 2 * kPi * 3 / length;
  const GridField pw = hasimoto_forward(GridField::constant(n, length / n, k0), GridField::constant(n, length / n, t0));
  const GridField ref = GridField::sample(n, length, [=](double x) { return k0 * std::exp(kI * (t0 * x)); });
  CHECK(diff(pw, ref) <= 1e-12);

  // The phase integral from x_0 is even about the midpoint for odd torsion and odd (about its
  // midpoint value) for even torsion.
  const GridField kappa = GridField::sample_real(n, length, [=](double x) { return 1.0 + 0.2 * std::cos(2 * kPi * x / length); });
  const GridField odd = GridField::sample_real(n, length, [=](double x) { return std::sin(2 * kPi * (x - 0.5 * length) / length); });
  const GridField even = GridField::sample_real(n, length, [=](double x) { return 0.3 + std::cos(2 * kPi * (x - 0.5 * length) / length); });
  const GridField qo = hasimoto_forward(kappa, odd);
  const GridField qe = hasimoto_forward(kappa, even);
  CHECK(diff(qo.abs(), kappa) <= 1e-14);
  double sym = 0.0, anti = 0.0;
  for (std::size_t k = 1; k < n / 2; ++k) {
    sym = std::max(sym, std::abs(std::arg(qo[k] / qo[n - k])));
    anti = std::max(anti, std::abs(std::arg(qe[k] * qe[n - k] / (qe[n / 2] * qe[n / 2]))));
  }
  CHECK(sym <= 1e-12);
  CHECK(anti <= 1e-12);

  CHECK_THROWS_AS(hasimoto_forward(GridField::constant(n, length / n, -1.0), odd), InvalidInput);
}

TEST_CASE("inverse Hasimoto map and masking") {
  const std::size_t n = 64;
  const double length = 2 * kPi;
  const double k0 = 0.9, t0 = 4.0;
  const GridField pw = GridField::sample(n, length, [=](double x) { return k0 * std::exp(kI * (t0 * x)); });
  const HasimotoInverse inv = hasimoto_inverse(pw, 1e-6);
  CHECK(max_real_diff(inv.kappa, k0) <= 1e-14);
  CHECK(max_real_diff(inv.tau, t0) <= 1e-12);
  CHECK(inv.masked_count == 0);

  // Helix data round trip.
  const double hk = oracle::helix_curvature(1.0, 0.5), ht = oracle::helix_torsion(1.0, 0.5);
  const GridField kappa = GridField::constant(n, length / n, hk);
  const GridField tau = GridField::constant(n, length / n, ht);
  const HasimotoInverse back = hasimoto_inverse(hasimoto_forward(kappa, tau), 1e-6);
  CHECK(max_real_diff(back.kappa, hk) <= 1e-8);
  CHECK(max_real_diff(back.tau, ht) <= 1e-8);

  // A zero crossing: the mask is exactly the set |q| < floor.
  const GridField q = GridField::sample(n, length, [](double x) { return std::cos(x) * std::exp(kI * (2.0 * x)); });
  const double floor = 0.1;
  const HasimotoInverse m = hasimoto_inverse(q, floor);
  std::size_t expected = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const bool below = std::abs(q[k]) < floor;
    expected += below;
    CHECK(m.masked[k] == below);
    if (below) {
      CHECK(m.tau[k] == cplx{});
    } else {
      CHECK(std::abs(m.tau[k].real() - 2.0) <= 1e-10);
    }
  }
  CHECK(expected > 0);
  CHECK(m.masked_count == expected);
}

TEST_CASE("frame reconstruction") {
  const std::size_t n = 128;
  const double r = 1.5, length = 2 * kPi * r;
  const CurveFrame c = frame_reconstruct(GridField::constant(n, length / n, 1.0 / r), GridField(n, length / n, true));
  CHECK(norm(c.closure) <= 1e-6 * r);
  CHECK(mean_radius(c.points) == doctest::Approx(r).epsilon(1e-8));
  CHECK(frame_defect(c) <= 1e-8);

  const CurveFrame line = frame_reconstruct(GridField(n, 0.1, true), GridField(n, 0.1, true));
  for (std::size_t k = 0; k < n; ++k) CHECK(norm(line.points[k] - Vec3{0.1 * static_cast<double>(k), 0, 0}) <= 1e-12);

  // One full helix turn: radius and pitch.
  const double hr = 0.8, hh = 0.3;
  const double turn = 2 * kPi * std::sqrt(hr * hr + hh * hh);
  const CurveFrame helix = frame_reconstruct(GridField::constant(n, turn / n, oracle::helix_curvature(hr, hh)),
                                             GridField::constant(n, turn / n, oracle::helix_torsion(hr, hh)));
  CHECK(std::abs(norm(helix.closure) - 2 * kPi * hh) <= 1e-5);
  const Vec3 axis = normalized(helix.closure);
  const Vec3 c0 = centroid(helix.points);
  double worst = 0.0;
  for (const auto& p : helix.points) {
    const Vec3 d = p - c0;
    worst = std::max(worst, std::abs(norm(d - dot(d, axis) * axis) - hr));
  }
  // The centroid of one turn sits on the axis up to the linear drift along it.
  CHECK(worst <= 1e-5);
  const CurveFrame again = frenet_from_curve(helix.points, helix.closure);
  CHECK(max_real_diff(again.kappa, oracle::helix_curvature(hr, hh)) <= 1e-6);
  CHECK(max_real_diff(again.tau, oracle::helix_torsion(hr, hh)) <= 1e-6);
}

TEST_CASE("curvature and torsion of a tangent field") {
  const std::size_t n = 64;
  const double r = 1.0, h = 0.5, c = std::sqrt(r * r + h * h);
  const double length = 2 * kPi * c;
  const TangentField t = make_tangent_field(GridField::sample_real(n, length, [=](double s) { return -r * std::sin(s / c) / c; }),
                                            GridField::sample_real(n, length, [=](double s) { return r * std::cos(s / c) / c; }),
                                            GridField::constant(n, length / n, h / c));
  const CurvatureTorsion ct = curvature_torsion_from_tangent(t, 1e-6);
  CHECK(max_real_diff(ct.kappa, oracle::helix_curvature(r, h)) <= 1e-10);
  CHECK(max_real_diff(ct.tau, oracle::helix_torsion(r, h)) <= 1e-10);
}

TEST_CASE("filament velocity") {
  const CurveFrame f = frenet_from_curve(wobbly_loop(128));
  const double a = 0.3, ap = 0.2;
  const auto lia = filament_velocity(f, {});
  const auto fr = filament_velocity(f, {a, ap, {}});
  double e0 = 0.0, e1 = 0.0;
  for (std::size_t k = 0; k < f.size(); ++k) {
    const double kap = f.kappa[k].real();
    e0 = std::max(e0, norm(lia[k] - kap * f.b[k]));
    e1 = std::max(e1, norm(fr[k] - ((1 - ap) * kap * f.b[k] + a * kap * f.n[k])));
  }
  CHECK(e0 <= 1e-12);
  CHECK(e1 <= 1e-12);

  // v(U) - v(0) is linear in U.
  const Vec3 u1{0.3, -0.2, 0.5}, u2{-1.0, 0.4, 0.1};
  const auto v0 = filament_velocity(f, {a, ap, {}});
  const auto v1 = filament_velocity(f, {a, ap, u1});
  const auto v2 = filament_velocity(f, {a, ap, u2});
  const auto v12 = filament_velocity(f, {a, ap, 2.0 * u1 - 0.5 * u2});
  double lin = 0.0;
  for (std::size_t k = 0; k < f.size(); ++k) {
    lin = std::max(lin, norm((v12[k] - v0[k]) - (2.0 * (v1[k] - v0[k]) - 0.5 * (v2[k] - v0[k]))));
  }
  CHECK(lin <= 1e-14);

  std::vector<Vec3> line(16);
  for (std::size_t i = 0; i < 16; ++i) line[i] = {0.0, 0.0, static_cast<double>(i)};
  for (const auto& v : filament_velocity(frenet_from_curve(line, {0, 0, 16}), {a, ap, {}})) CHECK(norm(v) <= 1e-12);

  CHECK_THROWS_AS(filament_velocity(f, {1.0, 0.0, {}}), ConfigError);
  CHECK_THROWS_AS(FilamentParams({0.1, -0.2, {}}).validate(), ConfigError);
  CHECK_THROWS_AS(FilamentParams({0.1, 0.2, {std::nan(""), 0, 0}}).validate(), ConfigError);
}

TEST_CASE("filament stepping") {
  // Local induction moves a ring along its axis at speed 1/R.
  const double r = 1.0;
  CurveFrame f = frenet_from_curve(circle(64, r));
  const double dt = 0.4 * f.ds * f.ds;
  const std::size_t steps = static_cast<std::size_t>(std::ceil(0.5 / dt));
  const double h = 0.5 / static_cast<double>(steps);
  double drift = 0.0;
  for (std::size_t i = 0; i < steps; ++i) {
    f = step_filament(f, {}, h);
    drift = std::max(drift, std::abs(mean_radius(f.points) - r));
  }
  CHECK(drift <= 1e-5);
  CHECK(std::abs(centroid(f.points).z - 0.5 / r) <= 1e-5);

  CurveFrame g = frenet_from_curve(circle(64, r));
  double prev = mean_radius(g.points);
  bool shrinking = true;
  for (int i = 0; i < 50; ++i) {
    g = step_filament(g, {0.2, 0.0, {}}, 0.5 * h);
    const double now = mean_radius(g.points);
    shrinking = shrinking && now < prev;
    prev = now;
  }
  CHECK(shrinking);

  std::vector<Vec3> line(16);
  for (std::size_t i = 0; i < 16; ++i) line[i] = {static_cast<double>(i), 0.0, 0.0};
  const CurveFrame s = frenet_from_curve(line, {16, 0, 0});
  const CurveFrame s2 = step_filament(s, {0.1, 0.1, {}}, 0.1);
  for (std::size_t k = 0; k < 16; ++k) CHECK(norm(s2.points[k] - s.points[k]) <= 1e-12);

  CHECK_THROWS_AS(step_filament(frenet_from_curve(circle(64, r)), {}, 10 * dt), ConfigError);

  // A loop pinched until opposite sides almost touch.
  std::vector<Vec3> pinch(64);
  for (std::size_t i = 0; i < 64; ++i) {
    const double u = 2 * kPi * static_cast<double>(i) / 64.0;
    pinch[i] = {std::cos(u), std::sin(u) * (0.002 + std::cos(u) * std::cos(u)), 0.0};
  }
  const CurveFrame p = frenet_from_curve(pinch);
  double kmax = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) kmax = std::max(kmax, p.kappa[k].real());
  CHECK_THROWS_AS(step_filament(p, {}, 0.4 * p.ds * p.ds / std::max(1.0, kmax)), SelfIntersection);
}

TEST_CASE("curve CSV") {
  const CurveFrame f = frenet_from_curve(circle(16, 1.0));
  std::ostringstream os;
  write_curve_csv(os, f);
  CHECK(os.str().rfind("s,x,y,z,kappa,tau\n", 0) == 0);
}
