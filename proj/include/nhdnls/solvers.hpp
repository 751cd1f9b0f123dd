#pragma once

// Method-of-lines integrators for the NLS family and the continuum
// Landau-Lifshitz equation, with conserved-quantity monitors.

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "nhdnls/fields.hpp"

namespace nhdnls {

/// Scalar function of time (source, drag and free deformation terms).
using TimeFn = std::function<double(double)>;

TimeFn zero_time_fn();

enum class NlsVariant { standard, inhomogeneous, vortex, shifted, shifted_drift };
enum class Scheme { rk4, splitstep };

std::string to_string(NlsVariant v);
NlsVariant parse_variant(const std::string& s);
std::string to_string(Scheme s);
Scheme parse_scheme(const std::string& s);

struct VortexParams {
  double alpha = 0.0;
  double alpha_prime = 0.0;
  TimeFn drag = zero_time_fn();  // A(t)
};

struct NlsProblem {
  NlsVariant variant = NlsVariant::standard;
  std::optional<GridField> eta;  // standard
  std::optional<GridField> rho;  // inhomogeneous
  std::optional<VortexParams> vortex;
  TimeFn source;  // T(t), deformed variants
  TimeFn free_term;  // G(t), shifted_drift
  LowerLimit lower = LowerLimit::left_edge;
  double stability_factor = 0.4;  // dt <= factor * dx^2 for rk4

  static NlsProblem standard(GridField eta);
  static NlsProblem inhomogeneous(GridField rho, LowerLimit lower = LowerLimit::left_edge);
  static NlsProblem vortex_filament(VortexParams p, LowerLimit lower = LowerLimit::left_edge);
  static NlsProblem shifted(TimeFn source);
  static NlsProblem shifted_drift(TimeFn source, TimeFn free_term);

  /// Throws ConfigError unless exactly the variant's parameters are populated and sane.
  void validate(const GridField& q) const;
};

/// q_t = i q_xx + 2i eta |q|^2 q.
GridField rhs_standard(const GridField& q, const GridField& eta);
/// q_t = i (rho q)_xx + 2i rho q |q|^2 + 2i q cumint(rho_x |q|^2).
GridField rhs_inhomogeneous(const GridField& q, const GridField& rho, LowerLimit lower = LowerLimit::left_edge);
/// q_t = iA q + {i(1-a') + a} q_xx + {(i/2)(1-a') - a} q|q|^2 - (a/2) q cumint(q q*_x - q* q_x).
GridField rhs_vortex(const GridField& q, const VortexParams& p, double t, LowerLimit lower = LowerLimit::left_edge);
/// i p_t + p_xx - 2 p|p|^2 = T p - (i/2) G p_x, solved for p_t.
GridField rhs_deformed(const GridField& p, double source, double free_term);

GridField evaluate_rhs(const NlsProblem& problem, const GridField& q, double t);

/// Largest RK4 step accepted for this grid.
double stability_limit(const NlsProblem& problem, const GridField& q);

/// One step from time t. The right-hand side is passed through the 2/3 mask.
GridField step(const NlsProblem& problem, const GridField& q, double t, double dt, Scheme scheme = Scheme::rk4);

struct LogEntry {
  double t = 0.0;
  double mass = 0.0;
  double energy_proxy = 0.0;  // integral of |q_x|^2
  double linf = 0.0;
  double tail_mass = 0.0;  // mass in the outer eighth at each end
};

class EvolutionLog {
 public:
  explicit EvolutionLog(std::size_t cadence = 1) : cadence_(cadence == 0 ? 1 : cadence) {}

  void record(double t, const GridField& q);
  const std::vector<LogEntry>& entries() const { return entries_; }
  std::size_t cadence() const { return cadence_; }
  double relative_mass_drift() const;

 private:
  std::size_t cadence_;
  std::vector<LogEntry> entries_;
};

LogEntry monitor(double t, const GridField& q);

struct Evolution {
  GridField q;
  double t = 0.0;
  EvolutionLog log;
};

/// Advances `steps` steps, recording every log.cadence() steps (and the endpoints).
Evolution evolve(const NlsProblem& problem, GridField q0, double t0, double dt, std::size_t steps,
                 Scheme scheme = Scheme::rk4, std::size_t cadence = 1);

// --- continuum Landau-Lifshitz -------------------------------------------------

struct TangentField {
  GridField x, y, z;

  std::size_t size() const { return x.size(); }
  double dx() const { return x.dx(); }
  /// max ||t| - 1| over nodes.
  double unit_defect() const;
  TangentField normalized() const;
};

TangentField make_tangent_field(GridField x, GridField y, GridField z);

/// t x t_ss; rejects fields that are not unit to 1e-8.
TangentField rhs_ll(const TangentField& t);

/// RK4 step followed by pointwise renormalization.
TangentField step_ll(const TangentField& t, double dt, double stability_factor = 0.4);

/// Integral of |t_s|^2.
double ll_energy(const TangentField& t);

}  // namespace nhdnls
