#pragma once

// Classical XXX chain with per-bond couplings, its coarse-graining to a
// continuum tangent field, and the deformed Landau-Lifshitz machinery.

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "nhdnls/fields.hpp"
#include "nhdnls/solvers.hpp"
#include "nhdnls/su2.hpp"
#include "nhdnls/vec3.hpp"

namespace nhdnls {

/// Periodic chain. Bond i couples site i to site i+1 with strength rho[i].
class SpinLattice {
 public:
  SpinLattice() = default;
  /// Spins within 1e-6 of unit length are accepted and renormalized.
  SpinLattice(std::vector<Vec3> spins, std::vector<double> rho, double spacing);

  static SpinLattice homogeneous(std::vector<Vec3> spins, double coupling, double spacing);

  std::size_t size() const { return spins_.size(); }
  double spacing() const { return a_; }
  double length() const { return a_ * static_cast<double>(spins_.size()); }
  const std::vector<Vec3>& spins() const { return spins_; }
  const std::vector<double>& couplings() const { return rho_; }
  const Vec3& operator[](std::size_t i) const { return spins_[i]; }
  double max_coupling() const;
  /// max ||S_i| - 1|.
  double unit_defect() const;

 private:
  std::vector<Vec3> spins_;
  std::vector<double> rho_;
  double a_ = 1.0;
};

/// dS_i/dt = S_i x (rho_{i-1} S_{i-1} + rho_i S_{i+1}).
std::vector<Vec3> chain_rhs(const SpinLattice& lat);

/// RK4 step then per-site renormalization; requires dt <= 0.1 / max|rho|.
SpinLattice step_chain(const SpinLattice& lat, double dt);

/// -sum rho_i S_i . S_{i+1}.
double chain_energy(const SpinLattice& lat);
Vec3 total_spin(const SpinLattice& lat);

/// Small-amplitude spin wave about z with wavenumber k (a multiple of 2 pi / (N a)).
SpinLattice spin_wave(std::size_t sites, double spacing, double coupling, double k, double amplitude);

struct MagnonMeasurement {
  double omega = 0.0;      // measured
  double predicted = 0.0;  // 2J(1 - cos ka)
  double continuum = 0.0;  // J a^2 k^2
  double duration = 0.0;
  std::size_t steps = 0;
};

/// Evolves a spin wave and fits the precession rate of its Fourier projection.
/// Amplitudes above 0.1 leave the linear regime and are rejected.
MagnonMeasurement magnon_dispersion(std::size_t sites, double spacing, double coupling, double k,
                                    double amplitude = 1e-3);

/// Periodic cubic spline through the sites onto the next power-of-two grid, renormalized.
/// Requires |S_{i+1} - S_i| <= 0.2 everywhere.
TangentField coarse_grain(const SpinLattice& lat);

/// Lattice from a tangent field sampled at its nodes (one site per node).
SpinLattice lattice_from_field(const TangentField& t, double coupling);

/// Couplings of the continuum embedding, rho(x_i) = rho_i a^2.
GridField embedded_coupling(const SpinLattice& lat);

/// Lattice snapshot CSV: i, Sx, Sy, Sz, rho_bond.
void write_lattice_csv(std::ostream& os, const SpinLattice& lat);

// --- deformed continuum chain ----------------------------------------------------

/// Deformation coefficients Lambda^(n) = alpha^(n) . sigma per spectral order.
struct DiscreteDeformation {
  std::map<int, std::array<GridField, 3>> alpha;

  bool has(int n) const { return alpha.count(n) != 0; }
  /// Lambda^(n) (zero when absent).
  MatrixGridField lambda(int n, std::size_t size, double dx) const;
};

/// S = t . sigma.
MatrixGridField spin_matrix(const TangentField& t);

/// (1/2i)[S, S_xx] + (1/2) Lambda^(1)_x - (i/2)[S, Lambda^(0)].
MatrixGridField deformed_ll_rhs(const MatrixGridField& s, const DiscreteDeformation& d);

/// Lambda^(n)_x - i [S, Lambda^(n-1)].
MatrixGridField recursive_constraint_residual(const MatrixGridField& s, const DiscreteDeformation& d, int n);

struct RecursiveConstraint {
  int order = 0;         // n
  int derivative_of = 0; // Lambda^(n) differentiated in x
  int commutator_with = 0;  // Lambda^(n-1) inside -i[S, .]
  bool verified = false;    // assembled ZCC order equals -(i/2) times the residual
};

struct DiscreteScanEntry {
  int order = 0;
  bool enters_eom = false;
  std::vector<int> footprint;  // ZCC orders touched by Lambda^(n)
  std::map<int, double> residual_norms;
  std::vector<RecursiveConstraint> constraints;
};

struct DiscreteScanReport {
  std::vector<int> eom_orders;  // ZCC orders that contain S_t
  std::vector<DiscreteScanEntry> entries;

  std::vector<int> eom_entering() const;
};

/// Inserts a generic Lambda^(n) for every n in [lo, hi] into the Landau-Lifshitz ZCC.
/// An empty range (lo > hi) gives an empty report.
DiscreteScanReport discrete_spectral_scan(const MatrixGridField& s, int lo, int hi, std::uint64_t seed = 7);

}  // namespace nhdnls
