#pragma once

// Space curves with Frenet frames, the Hasimoto map between (curvature, torsion)
// and a complex field, and local-induction filament motion with mutual friction.

#include <cstddef>
#include <iosfwd>
#include <vector>

#include "nhdnls/fields.hpp"
#include "nhdnls/solvers.hpp"
#include "nhdnls/vec3.hpp"

namespace nhdnls {

struct FrenetOptions {
  DerivMethod method = DerivMethod::spectral;
  /// Redistribute the samples to uniform arc length before computing the frame.
  bool resample = true;
  /// Nodes with curvature below kappa_min_rel * max curvature get a parallel-transported frame.
  double kappa_min_rel = 1e-6;
};

/// Arc-length sampled curve. Periodic up to the translation `closure` = r(L) - r(0),
/// which is zero for closed loops and the pitch vector for helices.
struct CurveFrame {
  std::vector<Vec3> points, t, n, b;
  GridField kappa, tau;
  double ds = 0.0;
  Vec3 closure;
  /// Set when at least one node needed a parallel-transported normal.
  bool parallel_transport = false;
  std::vector<bool> transported;

  std::size_t size() const { return points.size(); }
  double length() const { return ds * static_cast<double>(points.size()); }
  /// Largest deviation from an orthonormal right-handed frame.
  double orthonormality_defect() const;
};

CurveFrame frenet_from_curve(const std::vector<Vec3>& points, const Vec3& closure = {},
                             const FrenetOptions& opts = {});

/// q = kappa exp(i integral of tau), the integral taken band-limited from x_0.
GridField hasimoto_forward(const GridField& kappa, const GridField& tau);

struct HasimotoInverse {
  GridField kappa, tau;
  std::vector<bool> masked;  // tau undefined where |q| < floor (set to zero there)
  std::size_t masked_count = 0;
};

/// kappa = |q|, tau = Im(q* q_s) / |q|^2 where |q| >= kappa_floor.
HasimotoInverse hasimoto_inverse(const GridField& q, double kappa_floor);

/// Integrates the Frenet-Serret equations from the identity frame at the origin.
CurveFrame frame_reconstruct(const GridField& kappa, const GridField& tau);

struct FilamentParams {
  double alpha = 0.0;
  double alpha_prime = 0.0;
  Vec3 normal_velocity;  // U

  void validate() const;
};

/// v = kappa t x n + alpha t x (U - kappa t x n) - alpha' t x [t x (U - kappa t x n)].
std::vector<Vec3> filament_velocity(const CurveFrame& frame, const FilamentParams& p);

/// RK4 on r_t = v (velocity passed through the 2/3 mask), then arc-length resampling. Requires dt <= 0.4 ds^2 / max(1, max kappa).
CurveFrame step_filament(const CurveFrame& frame, const FilamentParams& p, double dt);

struct CurvatureTorsion {
  GridField kappa, tau;
  std::vector<bool> masked;
};

/// kappa = |t_s|, tau = (t x t_s) . t_ss / kappa^2 (masked below kappa_floor).
CurvatureTorsion curvature_torsion_from_tangent(const TangentField& t, double kappa_floor);

/// Tangent field of a frame.
TangentField tangent_of(const CurveFrame& frame);

Vec3 centroid(const std::vector<Vec3>& points);
/// Mean distance to the centroid.
double mean_radius(const std::vector<Vec3>& points);

/// Curve snapshot CSV: s, x, y, z, kappa, tau.
void write_curve_csv(std::ostream& os, const CurveFrame& frame);

}  // namespace nhdnls
