#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "helpers.hpp"
#include "nhdnls/errors.hpp"
#include "nhdnls/spin_chain.hpp"

using namespace nhdnls;

namespace {

constexpr double kPi = std::numbers::pi;

double vec_diff(const Vec3& a, const Vec3& b) { return norm(a - b); }

SpinLattice smooth_state(std::size_t n, double spacing, std::uint64_t seed) {
  const double length = spacing * static_cast<double>(n);
  const GridField th = random_smooth_field(n, length, seed, 3, true, 0.4);
  const GridField ph = random_smooth_field(n, length, seed + 1, 3, true, 1.0);
  std::vector<Vec3> s(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = 0.6 + th[i].real(), p = ph[i].real();
    s[i] = {std::sin(t) * std::cos(p), std::sin(t) * std::sin(p), std::cos(t)};
  }
  return SpinLattice::homogeneous(std::move(s), 1.0, spacing);
}

TangentField twisted_field(std::size_t n, double length, double tilt, double k) {
  return make_tangent_field(
      GridField::sample_real(n, length, [=](double x) { return std::sin(tilt) * std::cos(k * x); }),
      GridField::sample_real(n, length, [=](double x) { return std::sin(tilt) * std::sin(k * x); }),
      GridField::constant(n, length / n, std::cos(tilt)));
}

}  // namespace

TEST_CASE("chain right-hand side") {
  const std::vector<Vec3> up(6, Vec3{0, 0, 1});
  for (const auto& v : chain_rhs(SpinLattice::homogeneous(up, 1.0, 1.0))) CHECK(norm(v) == 0.0);

  // Site 0 sees site 1 through bond 0 and, periodically, through bond 1.
  const SpinLattice two({{0, 0, 1}, {1, 0, 0}}, {1.0, 0.0}, 1.0);
  const auto r = chain_rhs(two);
  CHECK(vec_diff(r[0], Vec3{0, 1, 0}) <= 1e-15);
  CHECK(vec_diff(r[1], cross(Vec3{1, 0, 0}, Vec3{0, 0, 1})) <= 1e-15);

  const SpinLattice idle = smooth_state(16, 1.0, 3);
  const SpinLattice zero(idle.spins(), std::vector<double>(16, 0.0), 1.0);
  for (const auto& v : chain_rhs(zero)) CHECK(norm(v) == 0.0);
}

TEST_CASE("lattice construction") {
  const Vec3 up{0, 0, 1};
  CHECK(SpinLattice({{0, 0, 1 + 1e-7}, up}, {1.0, 1.0}, 1.0).unit_defect() <= 1e-15);
  CHECK_THROWS_AS(SpinLattice({{0, 0, 1.1}, up}, {1.0, 1.0}, 1.0), InvalidInput);
  CHECK_THROWS_AS(SpinLattice({up, up}, {1.0}, 1.0), InvalidInput);
  CHECK_THROWS_AS(SpinLattice({up, up}, {1.0, 1.0}, 0.0), InvalidInput);
  CHECK_THROWS_AS(SpinLattice({up}, {1.0}, 1.0), InvalidInput);
}

TEST_CASE("stepping the chain") {
  const std::vector<Vec3> up(8, Vec3{0, 0, 1});
  const SpinLattice aligned = SpinLattice::homogeneous(up, 1.0, 1.0);
  CHECK(step_chain(aligned, 0.05).spins() == aligned.spins());
  CHECK_THROWS_AS(step_chain(aligned, 0.2), ConfigError);

  // A tilted spin precesses about the field 2z of its aligned neighbours.
  std::vector<Vec3> s = up;
  const double eps = 1e-3;
  s[4] = {eps, 0.0, std::sqrt(1 - eps * eps)};
  SpinLattice lat = SpinLattice::homogeneous(s, 1.0, 1.0);
  const double dt = 1e-3;
  for (int i = 0; i < 10; ++i) lat = step_chain(lat, dt);
  const double omega = -std::atan2(lat[4].y, lat[4].x) / (10 * dt);
  CHECK(std::abs(omega - 2.0) <= 0.02 * 2.0);
}

TEST_CASE("energy and total spin are conserved") {
  SpinLattice lat = smooth_state(64, 1.0, 11);
  const double e0 = chain_energy(lat);
  const Vec3 s0 = total_spin(lat);
  double de = 0.0, ds = 0.0, defect = 0.0;
  for (int i = 0; i < 10000; ++i) {
    lat = step_chain(lat, 1e-3);
    de = std::max(de, std::abs(chain_energy(lat) - e0));
    ds = std::max(ds, vec_diff(total_spin(lat), s0));
    defect = std::max(defect, lat.unit_defect());
  }
  CHECK(de <= 1e-6);
  CHECK(ds <= 1e-8);
  CHECK(defect <= 1e-12);
}

TEST_CASE("magnon dispersion") {
  const auto quarter = magnon_dispersion(64, 1.0, 1.0, kPi / 4);
  CHECK(quarter.predicted == doctest::Approx(oracle::magnon_frequency(1.0, kPi / 4, 1.0)));
  CHECK(quarter.predicted == doctest::Approx(0.58579).epsilon(1e-5));
  CHECK(std::abs(quarter.omega - quarter.predicted) <= 0.02 * quarter.predicted);

  // Long waves approach the continuum J a^2 k^2.
  const double a = 0.5;
  const double k = 2 * kPi / (64 * a);
  const auto longwave = magnon_dispersion(64, a, 1.0, k);
  CHECK(std::abs(longwave.omega - a * a * k * k) <= 0.01 * a * a * k * k);

  CHECK(magnon_dispersion(64, 1.0, 1.0, 0.0).omega == 0.0);
  CHECK_THROWS_AS(magnon_dispersion(64, 1.0, 1.0, kPi / 4, 0.2), InvalidInput);
  CHECK_THROWS_AS(magnon_dispersion(64, 1.0, 1.0, 0.3), InvalidInput);
}

TEST_CASE("coarse graining") {
  const std::vector<Vec3> up(12, Vec3{0, 0, 1});
  const TangentField flat = coarse_grain(SpinLattice::homogeneous(up, 1.0, 0.5));
  CHECK(flat.size() == 16);
  CHECK(max_abs(flat.x) + max_abs(flat.y) <= 1e-15);

  // 48 sites onto a 64-node grid: a genuine interpolation.
  const std::size_t sites = 48;
  const double tilt = 0.8, length = 48.0, k = 2 * kPi / length;
  std::vector<Vec3> s(sites);
  for (std::size_t i = 0; i < sites; ++i) {
    const double x = static_cast<double>(i);
    s[i] = {std::sin(tilt) * std::cos(k * x), std::sin(tilt) * std::sin(k * x), std::cos(tilt)};
  }
  const TangentField t = coarse_grain(SpinLattice::homogeneous(s, 1.0, 1.0));
  REQUIRE(t.size() == 64);
  const TangentField ref = twisted_field(64, length, tilt, k);
  CHECK(testing::diff(t.x, ref.x) <= 1e-4);
  CHECK(testing::diff(t.y, ref.y) <= 1e-4);
  CHECK(testing::diff(t.z, ref.z) <= 1e-4);
  CHECK(t.unit_defect() <= 1e-14);
  // Grid node 4j sits on site 3j.
  double back = 0.0;
  for (std::size_t j = 0; j < 16; ++j) {
    const Vec3 v{t.x[4 * j].real(), t.y[4 * j].real(), t.z[4 * j].real()};
    back = std::max(back, vec_diff(v, s[3 * j]));
  }
  CHECK(back <= 1e-6);

  std::vector<Vec3> rough(8, Vec3{0, 0, 1});
  rough[3] = {1, 0, 0};
  CHECK_THROWS_AS(coarse_grain(SpinLattice::homogeneous(rough, 1.0, 1.0)), InvalidInput);
}

TEST_CASE("embedded couplings and lattice CSV") {
  const SpinLattice lat(std::vector<Vec3>(8, Vec3{0, 0, 1}), {1, 2, 3, 4, 5, 6, 7, 8}, 0.5);
  const GridField rho = embedded_coupling(lat);
  for (std::size_t i = 0; i < 8; ++i) CHECK(rho[i].real() == doctest::Approx(0.25 * static_cast<double>(i + 1)));
  std::ostringstream os;
  write_lattice_csv(os, lat);
  CHECK(os.str().rfind("i,Sx,Sy,Sz,rho_bond\n", 0) == 0);
  std::size_t lines = 0;
  for (char c : os.str()) lines += c == '\n';
  CHECK(lines == 9);
}

TEST_CASE("deformed Landau-Lifshitz right-hand side") {
  const std::size_t n = 64;
  const double length = 2 * kPi;
  const TangentField t = twisted_field(n, length, 0.7, 2.0);
  const MatrixGridField s = spin_matrix(t);

  // No deformation: the vector form t x t_ss.
  const MatrixGridField plain = deformed_ll_rhs(s, {});
  CHECK((plain - spin_matrix(rhs_ll(t))).max_norm() <= 1e-10);

  DiscreteDeformation self;
  self.alpha[0] = {t.x, t.y, t.z};
  CHECK((deformed_ll_rhs(s, self) - plain).max_norm() <= 1e-14);

  DiscreteDeformation flat;
  const GridField zero(n, length / n);
  flat.alpha[1] = {zero, zero, GridField::constant(n, length / n, 1.0)};
  CHECK((deformed_ll_rhs(s, flat) - plain).max_norm() <= 1e-14);

  // S_t from the deformed equation cancels the EOM order of the deformed zero-curvature condition.
  DiscreteDeformation d;
  d.alpha[0] = {random_smooth_field(n, length, 1), random_smooth_field(n, length, 2), random_smooth_field(n, length, 3)};
  d.alpha[1] = {random_smooth_field(n, length, 4), random_smooth_field(n, length, 5), random_smooth_field(n, length, 6)};
  const MatrixGridField s_t = deformed_ll_rhs(s, d);
  LaxPair lax = build_ll_lax(s);
  lax.temporal.add(0, (0.5 * kI) * d.lambda(0, n, length / n));
  lax.temporal.add(1, (0.5 * kI) * d.lambda(1, n, length / n));
  const auto res = zcc_residual(lax.spatial, lax.temporal, ll_lax_time_derivative(s_t));
  CHECK(res.at(1).max_norm() <= 1e-10);

  CHECK_THROWS_AS(deformed_ll_rhs(2.0 * s, {}), InvalidInput);
}

TEST_CASE("recursive constraint residual") {
  const std::size_t n = 64;
  const double length = 2 * kPi;
  const GridField zero(n, length / n);
  const TangentField t = twisted_field(n, length, 0.5, 1.0);
  const MatrixGridField s = spin_matrix(t);

  DiscreteDeformation none;
  none.alpha[2] = {zero, zero, zero};
  none.alpha[1] = {zero, zero, zero};
  CHECK(recursive_constraint_residual(s, none, 2).max_norm() == 0.0);

  DiscreteDeformation top;
  top.alpha[3] = {GridField::constant(n, length / n, 0.3), zero, GridField::constant(n, length / n, -1.2)};
  CHECK(recursive_constraint_residual(s, top, 3).max_norm() <= 1e-14);

  // Lambda^(n) = integral of i[S, Lambda^(n-1)]; i[a.sigma, b.sigma] = -2 (a x b).sigma.
  const std::array<GridField, 3> below = {random_smooth_field(n, length, 9), random_smooth_field(n, length, 10),
                                          random_smooth_field(n, length, 11)};
  const GridField cx = -2.0 * (t.y * below[2] - t.z * below[1]);
  const GridField cy = -2.0 * (t.z * below[0] - t.x * below[2]);
  const GridField cz = -2.0 * (t.x * below[1] - t.y * below[0]);
  DiscreteDeformation built;
  built.alpha[1] = below;
  built.alpha[2] = {spectral_cumint(cx), spectral_cumint(cy), spectral_cumint(cz)};
  CHECK(recursive_constraint_residual(s, built, 2).max_norm() <= 1e-8);
}

TEST_CASE("discrete spectral scan") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    CAPTURE(seed);
    const TangentField t = twisted_field(32, 2 * kPi, 0.3 + 0.2 * static_cast<double>(seed), static_cast<double>(seed));
    const DiscreteScanReport r = discrete_spectral_scan(spin_matrix(t), -2, 3, seed);
    CHECK(r.eom_entering() == std::vector<int>{0, 1});
    CHECK(r.entries.size() == 6);
    for (const auto& e : r.entries) {
      if (e.enters_eom) {
        CHECK(e.constraints.empty());
        continue;
      }
      REQUIRE_FALSE(e.constraints.empty());
      for (const auto& c : e.constraints) {
        CHECK(c.commutator_with == c.order - 1);
        CHECK(c.verified);
      }
    }
  }
  const TangentField t = twisted_field(32, 2 * kPi, 0.5, 1.0);
  const DiscreteScanReport r = discrete_spectral_scan(spin_matrix(t), -2, 3);
  const auto& two = r.entries[4];
  REQUIRE(two.order == 2);
  bool pattern = false;
  for (const auto& c : two.constraints) pattern = pattern || (c.derivative_of == 2 && c.commutator_with == 1);
  CHECK(pattern);
  CHECK(discrete_spectral_scan(spin_matrix(t), 2, 1).entries.empty());
}
