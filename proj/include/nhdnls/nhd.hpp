#pragma once

// Non-holonomic deformations of the NLS Lax pair: deformation coefficients,
// deformed zero-curvature residuals, the constraint calculus of the order -1
// coefficients, and the per-order scan of which deformations reach the dynamics.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nhdnls/fields.hpp"
#include "nhdnls/solvers.hpp"
#include "nhdnls/su2.hpp"

namespace nhdnls {

/// Coefficients of sigma3, sigma+, sigma- in (i/2)(c3 sigma3 + cplus sigma+ + cminus sigma-).
struct SigmaCoefficients {
  GridField c3, cplus, cminus;

  /// The matrix field (i/2)(c3 sigma3 + cplus sigma+ + cminus sigma-).
  MatrixGridField matrix() const;
};

enum class CoefficientMode { closed_form_hsc, closed_form_vortex, user_field, constraint_integrated };

std::string to_string(CoefficientMode m);
CoefficientMode parse_coefficient_mode(const std::string& s);

struct DeformationEntry {
  CoefficientMode mode = CoefficientMode::user_field;
  std::optional<SigmaCoefficients> field;  // required for user_field
};

struct DeformationSpec {
  std::map<int, DeformationEntry> orders;
  TimeFn source = zero_time_fn();     // T(t)
  TimeFn free_term = zero_time_fn();  // G(t)
  double mask_rel = 1e-8;

  static constexpr int kMinOrder = -3;
  static constexpr int kMaxOrder = 3;

  /// Throws ConfigError for orders outside [-3, 3], a non-positive mask or a user_field entry without data.
  void validate() const;
};

// --- coefficient formulas ------------------------------------------------------

struct FCoefficients {
  GridField f3, fplus, fminus;
};

/// fminus = 2 rho_x q, fplus = -2 rho*_x q*, f3 = 2(eta + |rho|^2)|q|^2 + T.
FCoefficients f_coeffs(const GridField& q, const GridField& rho, const GridField& eta, double source);

struct HCoefficients {
  GridField hplus, hminus;
};

/// hminus = {(rho-1)q}_t + 2i(1+|rho|^2) rho q|q|^2 + i rho q T + 2i q cumint(rho_x |q|^2), hplus = -hminus*.
HCoefficients h_coeffs_hsc(const GridField& q, const GridField& q_t, const GridField& rho, const GridField& rho_t,
                           double source, LowerLimit lower = LowerLimit::left_edge);

struct MaskedField {
  GridField value;
  std::vector<bool> masked;
  std::size_t masked_count = 0;
  double threshold = 0.0;

  double masked_fraction() const;
};

/// Right side of the hminus_x relation, assembled term by term, divided by 2 rho q where
/// |rho q| >= mask_rel * max|rho q| (zero and masked elsewhere).
MaskedField h3_hsc(const GridField& q, const GridField& q_t, const GridField& rho, const GridField& rho_t,
                   double source, double mask_rel = 1e-8, LowerLimit lower = LowerLimit::left_edge);

/// hminus = rho[2i|rho|^2 + (i/2)(1-a') - a] q|q|^2 - (a/2) rho q cumint(q q*_x - q* q_x), hplus = -hminus*.
HCoefficients h_coeffs_vortex(const GridField& q, cplx rho, double alpha, double alpha_prime,
                              LowerLimit lower = LowerLimit::left_edge);

/// Local-coupling vortex closure:
/// hminus = (p-q)_t - [ip - c q]_xx + 2i p|p|^2 + [(i/2)(1-a') - a] q|q|^2 + i p T + i q A
///          - (a/2) q cumint(q q*_x - q* q_x), with c = a + i(1-a').
HCoefficients h_coeffs_vortex_local(const GridField& p, const GridField& p_t, const GridField& q,
                                    const GridField& q_t, double alpha, double alpha_prime, double drag,
                                    double source, LowerLimit lower = LowerLimit::left_edge);

// --- assembly ------------------------------------------------------------------

/// B + sum_n lambda^n (i/2)(coefficients . sigma). Orders outside [-3, 3] are rejected.
LaurentMatrixField build_deformed_B(const LaurentMatrixField& b, const std::map<int, SigmaCoefficients>& coeffs);

/// Coefficients of the order 0 / order -1 deformation built from f and h.
std::map<int, SigmaCoefficients> hsc_coefficients(const FCoefficients& f, const GridField& h3, const HCoefficients& h);

/// A_t - B'_x + [A, B'] per order for the NLS pair deformed by `coeffs`.
LaurentMatrixField deformed_zcc_orders(const GridField& q, const GridField& rho, const GridField& eta,
                                       const std::map<int, SigmaCoefficients>& coeffs, const GridField& q_t,
                                       const GridField& rho_t);

// --- constraint calculus ---------------------------------------------------------

struct LinkedRelationResiduals {
  GridField h3_relation;      // h3_x - (p* hminus - p hplus)
  GridField hplus_relation;   // hplus_x + 2 p* h3
  GridField hminus_relation;  // hminus_x - 2 p h3
};

LinkedRelationResiduals linked_relation_residuals(const GridField& p, const GridField& h3, const GridField& hplus,
                                                  const GridField& hminus);

/// h3_xx - 4|p|^2 h3 - p*_x hminus + p_x hplus.
GridField second_order_constraint_residual(const GridField& p, const GridField& h3, const GridField& hplus,
                                           const GridField& hminus);

/// h3^2 + hplus hminus.
GridField casimir(const GridField& h3, const GridField& hplus, const GridField& hminus);
/// max over nodes of |C(x) - C(x_0)|.
double casimir_variation(const GridField& h3, const GridField& hplus, const GridField& hminus);

struct ConstraintSolution {
  GridField h3, hplus, hminus;
};

/// Integrates the three linked relations in x from the given values at x_0 (adaptive Dormand-Prince).
ConstraintSolution integrate_constraints(const GridField& p, cplx h3_0, cplx hplus_0, cplx hminus_0,
                                         double tol = 1e-13);

/// h3 = h3_0 + integral of (p* hminus - p hplus), via the band-limited antiderivative.
GridField integrate_h3(const GridField& p, const GridField& hplus, const GridField& hminus, cplx h3_0);

// --- spectral scan ---------------------------------------------------------------

enum class OrderClass { eom_modifying, pure_constraint, inert };
std::string to_string(OrderClass c);

/// Order-m pattern: -(i/2) L(m)_x + (i/2)[A_0, L(m)] + (i/2)[A_1, L(m-1)] = 0.
struct ConstraintEquation {
  int zcc_order = 0;
  int derivative_of = 0;
  int commutator_with_a0 = 0;
  int commutator_with_a1 = 0;
  bool verified = false;
};

struct ScanEntry {
  int order = 0;
  OrderClass classification = OrderClass::inert;
  bool direct = false;  // footprint meets an order containing q_t
  bool target_reachable = false;
  std::vector<int> footprint;
  std::map<int, double> residual_norms;
  int recursion_depth = 0;  // pure constraints: distance of the footprint from the parameter orders
  std::vector<ConstraintEquation> constraints;
};

/// Analysis of the order-1 deformation once its top order is forced to vanish.
struct EdgeAnalysis {
  bool top_order_parameter_free = false;  // order-2 contribution independent of (q, rho, eta)
  bool forces_offdiagonal_zero = false;   // order-2 contribution is g+ sigma+ - g- sigma-
  cplx free_term_coefficient{};           // fitted S = c G p_x, expected -i/2
  double free_term_fit_residual = 0.0;
  cplx source_coefficient{};              // fitted S = c T p from the x-independent part of f3
  bool matches_pattern = false;
};

struct ScanReport {
  std::vector<int> eom_orders;        // ZCC orders containing q_t
  std::vector<int> parameter_orders;  // ZCC orders with (q, rho, eta) content
  std::vector<ScanEntry> entries;
  std::optional<EdgeAnalysis> edge;

  std::vector<int> eom_modifying() const;
  std::vector<int> target_reachable() const;
  std::vector<int> pure_constraint() const;
  const ScanEntry* find(int order) const;
};

struct ScanSample {
  GridField q, rho, eta;
};

/// Random smooth (q, rho, eta) on an n-node grid of length L.
ScanSample random_scan_sample(std::size_t n, double length, std::uint64_t seed);

/// Inserts a generic coefficient at every order in [lo, hi] and classifies its effect.
ScanReport continuum_spectral_scan(const GridField& q, const GridField& rho, const GridField& eta, int lo, int hi,
                                   std::uint64_t seed = 11);

/// Serialized report: {"eom_orders", "parameter_orders", "orders": [{order, classification, ...}], ...}.
std::string scan_report_json(const ScanReport& r);

// --- deformed dynamics -------------------------------------------------------------

enum class Closure { none, f_only, hsc, vortex, vortex_local };
std::string to_string(Closure c);
Closure parse_closure(const std::string& s);

struct ClosureParams {
  Closure closure = Closure::none;
  TimeFn source = zero_time_fn();  // T(t); the vortex closure uses T = -A
  double alpha = 0.0;
  double alpha_prime = 0.0;
  TimeFn drag = zero_time_fn();  // A(t)
  LowerLimit lower = LowerLimit::left_edge;
  double mask_rel = 1e-8;
  double support_rel = 1e-6;  // masked nodes with |q| above this fraction of max|q| are flagged
};

struct DeformedEom {
  GridField q_t;
  cplx dispersion{0.0, 1.0};  // coefficient of rho q_xx in the row (i, or a + i(1-a') after rescaling)
  std::string integrability;  // undeformed, rescaled_nls, semiholonomic, non_integrable
  std::optional<MaskedField> h3;
  bool mask_hits_support = false;
};

/// Solves the sigma- row of the order-0 deformed ZCC for q_t under the chosen closure.
DeformedEom deformed_eom_rhs(const GridField& q, const GridField& rho, const GridField& rho_t, const GridField& eta,
                             const ClosureParams& params, double t);

}  // namespace nhdnls
