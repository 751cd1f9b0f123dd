#include "nhdnls/nhd.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <set>

#include <boost/numeric/odeint.hpp>
#include <json.hpp>

#include "nhdnls/errors.hpp"

namespace nhdnls {

namespace {

void require_grid(const GridField& a, const GridField& b, const char* what) { a.require_same_grid(b, what); }

GridField zeros_like(const GridField& f) { return GridField(f.size(), f.dx()); }

std::vector<int> to_vector(const std::set<int>& s) { return {s.begin(), s.end()}; }

}  // namespace

MatrixGridField SigmaCoefficients::matrix() const {
  return MatrixGridField::from_pauli(c3, cplus, cminus) * cplx{0.0, 0.5};
}

std::string to_string(CoefficientMode m) {
  switch (m) {
    case CoefficientMode::closed_form_hsc: return "closed_form_hsc";
    case CoefficientMode::closed_form_vortex: return "closed_form_vortex";
    case CoefficientMode::user_field: return "user_field";
    case CoefficientMode::constraint_integrated: return "constraint_integrated";
  }
  return "unknown";
}

CoefficientMode parse_coefficient_mode(const std::string& s) {
  for (auto m : {CoefficientMode::closed_form_hsc, CoefficientMode::closed_form_vortex, CoefficientMode::user_field,
                 CoefficientMode::constraint_integrated}) {
    if (to_string(m) == s) return m;
  }
  throw ConfigError("unknown coefficient mode: " + s);
}

void DeformationSpec::validate() const {
  if (!(mask_rel > 0.0)) throw ConfigError("deformation: mask_rel must be positive");
  for (const auto& [n, e] : orders) {
    if (n < kMinOrder || n > kMaxOrder) {
      throw ConfigError("deformation order " + std::to_string(n) + " outside [-3, 3]");
    }
    if (e.mode == CoefficientMode::user_field && !e.field) {
      throw ConfigError("deformation order " + std::to_string(n) + ": user_field without coefficients");
    }
  }
}

FCoefficients f_coeffs(const GridField& q, const GridField& rho, const GridField& eta, double source) {
  require_grid(q, rho, "f_coeffs");
  require_grid(q, eta, "f_coeffs");
  const GridField rho_x = deriv(rho);
  FCoefficients f;
  f.fminus = 2.0 * (rho_x * q);
  f.fplus = -2.0 * (rho_x.conj() * q.conj());
  f.f3 = 2.0 * ((eta + rho.abs2()) * q.abs2()) + cplx{source, 0.0};
  return f;
}

HCoefficients h_coeffs_hsc(const GridField& q, const GridField& q_t, const GridField& rho, const GridField& rho_t,
                           double source, LowerLimit lower) {
  require_grid(q, q_t, "h_coeffs_hsc");
  require_grid(q, rho, "h_coeffs_hsc");
  require_grid(q, rho_t, "h_coeffs_hsc");
  const GridField q2 = q.abs2();
  const GridField p = rho * q;
  GridField hm = rho_t * q + (rho + cplx{-1.0, 0.0}) * q_t;
  hm += (2.0 * kI) * ((rho.abs2() + cplx{1.0, 0.0}) * p * q2);
  hm += (kI * source) * p;
  hm += (2.0 * kI) * (q * cumint(deriv(rho) * q2, lower));
  return {-hm.conj(), hm};
}

double MaskedField::masked_fraction() const {
  return masked.empty() ? 0.0 : static_cast<double>(masked_count) / static_cast<double>(masked.size());
}

MaskedField h3_hsc(const GridField& q, const GridField& q_t, const GridField& rho, const GridField& rho_t,
                   double source, double mask_rel, LowerLimit lower) {
  require_grid(q, q_t, "h3_hsc");
  require_grid(q, rho, "h3_hsc");
  require_grid(q, rho_t, "h3_hsc");
  if (!(mask_rel > 0.0)) throw InvalidInput("h3_hsc: mask_rel must be positive");
  const GridField q2 = q.abs2();
  const GridField p = rho * q;
  const GridField rho_x = deriv(rho);

  GridField rhs = deriv(rho_t * q + (rho + cplx{-1.0, 0.0}) * q_t);
  rhs += (2.0 * kI) * deriv((rho.abs2() + cplx{1.0, 0.0}) * p * q2);
  rhs += (kI * source) * deriv(p);
  rhs += (2.0 * kI) * (q * rho_x * q2);
  rhs += (2.0 * kI) * (deriv(q) * cumint(rho_x * q2, lower));

  MaskedField out;
  out.threshold = mask_rel * max_abs(p);
  out.masked.assign(q.size(), false);
  std::vector<cplx> v(q.size());
  for (std::size_t k = 0; k < q.size(); ++k) {
    if (std::abs(p[k]) < out.threshold || out.threshold == 0.0) {
      out.masked[k] = true;
      ++out.masked_count;
    } else {
      v[k] = rhs[k] / (2.0 * p[k]);
    }
  }
  out.value = GridField(std::move(v), q.dx());
  return out;
}

HCoefficients h_coeffs_vortex(const GridField& q, cplx rho, double alpha, double alpha_prime, LowerLimit lower) {
  const GridField qx = deriv(q);
  const cplx cubic = rho * cplx{-alpha, 2.0 * std::norm(rho) + 0.5 * (1.0 - alpha_prime)};
  GridField hm = cubic * (q * q.abs2());
  if (alpha != 0.0) hm -= (0.5 * alpha * rho) * (q * cumint(q * qx.conj() - q.conj() * qx, lower));
  return {-hm.conj(), hm};
}

HCoefficients h_coeffs_vortex_local(const GridField& p, const GridField& p_t, const GridField& q,
                                    const GridField& q_t, double alpha, double alpha_prime, double drag,
                                    double source, LowerLimit lower) {
  require_grid(p, p_t, "h_coeffs_vortex_local");
  require_grid(p, q, "h_coeffs_vortex_local");
  require_grid(p, q_t, "h_coeffs_vortex_local");
  const cplx c{alpha, 1.0 - alpha_prime};
  const cplx d{-alpha, 0.5 * (1.0 - alpha_prime)};
  const GridField qx = deriv(q);
  GridField hm = p_t - q_t;
  hm -= deriv(kI * p - c * q, 2);
  hm += (2.0 * kI) * (p * p.abs2());
  hm += d * (q * q.abs2());
  hm += (kI * source) * p + (kI * drag) * q;
  if (alpha != 0.0) hm -= (0.5 * alpha) * (q * cumint(q * qx.conj() - q.conj() * qx, lower));
  return {-hm.conj(), hm};
}

LaurentMatrixField build_deformed_B(const LaurentMatrixField& b, const std::map<int, SigmaCoefficients>& coeffs) {
  LaurentMatrixField out = b;
  for (const auto& [n, c] : coeffs) {
    if (n < DeformationSpec::kMinOrder || n > DeformationSpec::kMaxOrder) {
      throw ConfigError("build_deformed_B: order " + std::to_string(n) + " outside [-3, 3]");
    }
    out.add(n, c.matrix());
  }
  return out;
}

std::map<int, SigmaCoefficients> hsc_coefficients(const FCoefficients& f, const GridField& h3,
                                                  const HCoefficients& h) {
  return {{0, {f.f3, f.fplus, f.fminus}}, {-1, {h3, h.hplus, h.hminus}}};
}

LaurentMatrixField deformed_zcc_orders(const GridField& q, const GridField& rho, const GridField& eta,
                                       const std::map<int, SigmaCoefficients>& coeffs, const GridField& q_t,
                                       const GridField& rho_t) {
  const LaxPair lax = build_nls_lax(q, rho, eta);
  const LaurentMatrixField b = build_deformed_B(lax.temporal, coeffs);
  return zcc_residual(lax.spatial, b, nls_lax_time_derivative(q, q_t, rho, rho_t));
}

// --- constraint calculus ---------------------------------------------------------

LinkedRelationResiduals linked_relation_residuals(const GridField& p, const GridField& h3, const GridField& hplus,
                                                  const GridField& hminus) {
  require_grid(p, h3, "linked_relation_residuals");
  require_grid(p, hplus, "linked_relation_residuals");
  require_grid(p, hminus, "linked_relation_residuals");
  const GridField pc = p.conj();
  LinkedRelationResiduals r;
  r.h3_relation = deriv(h3) - (pc * hminus - p * hplus);
  r.hplus_relation = deriv(hplus) + 2.0 * (pc * h3);
  r.hminus_relation = deriv(hminus) - 2.0 * (p * h3);
  return r;
}

GridField second_order_constraint_residual(const GridField& p, const GridField& h3, const GridField& hplus,
                                           const GridField& hminus) {
  require_grid(p, h3, "second_order_constraint_residual");
  require_grid(p, hplus, "second_order_constraint_residual");
  require_grid(p, hminus, "second_order_constraint_residual");
  const GridField px = deriv(p);
  return deriv(h3, 2) - 4.0 * (p.abs2() * h3) - px.conj() * hminus + px * hplus;
}

GridField casimir(const GridField& h3, const GridField& hplus, const GridField& hminus) {
  require_grid(h3, hplus, "casimir");
  require_grid(h3, hminus, "casimir");
  return h3 * h3 + hplus * hminus;
}

double casimir_variation(const GridField& h3, const GridField& hplus, const GridField& hminus) {
  const GridField c = casimir(h3, hplus, hminus);
  double worst = 0.0;
  for (std::size_t k = 0; k < c.size(); ++k) worst = std::max(worst, std::abs(c[k] - c[0]));
  return std::max(worst, std::abs(c.seam() - c[0]));
}

ConstraintSolution integrate_constraints(const GridField& p, cplx h3_0, cplx hplus_0, cplx hminus_0, double tol) {
  namespace odeint = boost::numeric::odeint;
  using State = std::array<double, 6>;
  if (!(tol > 0.0)) throw InvalidInput("integrate_constraints: tol must be positive");
  const GridField pp = p.periodized();
  const TrigSeries series(pp.samples(), pp.length());

  auto system = [&series](const State& y, State& dy, double x) {
    const cplx pv = series(x);
    const cplx h3{y[0], y[1]}, hp{y[2], y[3]}, hm{y[4], y[5]};
    const cplx d3 = std::conj(pv) * hm - pv * hp;
    const cplx dp = -2.0 * std::conj(pv) * h3;
    const cplx dm = 2.0 * pv * h3;
    dy = {d3.real(), d3.imag(), dp.real(), dp.imag(), dm.real(), dm.imag()};
  };

  const std::size_t n = p.size();
  std::vector<double> xs(n + 1);
  for (std::size_t k = 0; k <= n; ++k) xs[k] = p.dx() * static_cast<double>(k);
  std::vector<State> ys;
  ys.reserve(n + 1);
  State y0{h3_0.real(), h3_0.imag(), hplus_0.real(), hplus_0.imag(), hminus_0.real(), hminus_0.imag()};
  auto stepper = odeint::make_controlled(tol, tol, odeint::runge_kutta_dopri5<State>());
  odeint::integrate_times(stepper, system, y0, xs.begin(), xs.end(), 0.1 * p.dx(),
                          [&ys](const State& y, double) { ys.push_back(y); });

  auto field = [&](int idx) {
    std::vector<cplx> v(n);
    for (std::size_t k = 0; k < n; ++k) v[k] = {ys[k][idx], ys[k][idx + 1]};
    const cplx seam{ys[n][idx], ys[n][idx + 1]};
    GridField f(std::move(v), seam, p.dx());
    if (!f.all_finite()) throw NumericalBlowup("integrate_constraints: non-finite solution");
    return f;
  };
  return {field(0), field(2), field(4)};
}

GridField integrate_h3(const GridField& p, const GridField& hplus, const GridField& hminus, cplx h3_0) {
  require_grid(p, hplus, "integrate_h3");
  require_grid(p, hminus, "integrate_h3");
  return spectral_cumint(p.conj() * hminus - p * hplus) + h3_0;
}

// --- spectral scan ---------------------------------------------------------------

std::string to_string(OrderClass c) {
  switch (c) {
    case OrderClass::eom_modifying: return "eom_modifying";
    case OrderClass::pure_constraint: return "pure_constraint";
    case OrderClass::inert: return "inert";
  }
  return "unknown";
}

namespace {

std::vector<int> collect(const std::vector<ScanEntry>& entries, const std::function<bool(const ScanEntry&)>& pred) {
  std::vector<int> out;
  for (const auto& e : entries) {
    if (pred(e)) out.push_back(e.order);
  }
  return out;
}

}  // namespace

std::vector<int> ScanReport::eom_modifying() const {
  return collect(entries, [](const ScanEntry& e) { return e.classification == OrderClass::eom_modifying; });
}

std::vector<int> ScanReport::target_reachable() const {
  return collect(entries, [](const ScanEntry& e) { return e.target_reachable; });
}

std::vector<int> ScanReport::pure_constraint() const {
  return collect(entries, [](const ScanEntry& e) { return e.classification == OrderClass::pure_constraint; });
}

const ScanEntry* ScanReport::find(int order) const {
  for (const auto& e : entries) {
    if (e.order == order) return &e;
  }
  return nullptr;
}

ScanSample random_scan_sample(std::size_t n, double length, std::uint64_t seed) {
  ScanSample s;
  s.q = random_smooth_field(n, length, seed, 4, false, 0.0);
  s.rho = random_smooth_field(n, length, seed + 1, 4, false, 1.5);
  s.eta = random_smooth_field(n, length, seed + 2, 2, true, 0.7);
  return s;
}

namespace {

constexpr double kSupportTol = 1e-10;

SigmaCoefficients random_coefficients(std::size_t n, double length, std::uint64_t seed) {
  return {random_smooth_field(n, length, seed, 4, false, 0.3), random_smooth_field(n, length, seed + 1, 4, false, 0.2),
          random_smooth_field(n, length, seed + 2, 4, false, -0.4)};
}

/// Contribution of a deformation to the ZCC: -dB_x + [A, dB].
LaurentMatrixField deformation_footprint(const LaurentMatrixField& a, const std::map<int, SigmaCoefficients>& coeffs) {
  LaurentMatrixField db(a.size(), a.dx());
  for (const auto& [n, c] : coeffs) db.add(n, c.matrix());
  return commutator(a, db) - deriv(db);
}

double scale_of(const LaurentMatrixField& m) { return std::max(1.0, m.max_norm()); }

int distance(const std::set<int>& a, const std::set<int>& b) {
  int best = 1 << 20;
  for (int x : a) {
    for (int y : b) best = std::min(best, std::abs(x - y));
  }
  return best;
}

/// S = c * basis fitted in the least-squares sense; returns (c, relative residual).
std::pair<cplx, double> fit_coefficient(const GridField& target, const GridField& basis) {
  cplx num{};
  double den = 0.0;
  for (std::size_t k = 0; k < basis.size(); ++k) {
    num += std::conj(basis[k]) * target[k];
    den += std::norm(basis[k]);
  }
  if (den == 0.0) return {cplx{}, 1.0};
  const cplx c = num / den;
  double res = 0.0, ref = 0.0;
  for (std::size_t k = 0; k < basis.size(); ++k) {
    res = std::max(res, std::abs(target[k] - c * basis[k]));
    ref = std::max(ref, std::abs(target[k]));
  }
  return {c, ref > 0.0 ? res / ref : res};
}

EdgeAnalysis analyse_edge(const GridField& q, const GridField& rho, const GridField& eta, std::uint64_t seed) {
  EdgeAnalysis e;
  const std::size_t n = q.size();
  const double dx = q.dx();
  const double length = q.length();
  const LaxPair lax = build_nls_lax(q, rho, eta);
  const ScanSample other = random_scan_sample(n, length, seed + 1000);
  const LaxPair lax2 = build_nls_lax(other.q, other.rho, other.eta);

  const SigmaCoefficients g = random_coefficients(n, length, seed + 500);
  const MatrixGridField top1 = deformation_footprint(lax.spatial, {{1, g}}).at(2);
  const MatrixGridField top2 = deformation_footprint(lax2.spatial, {{1, g}}).at(2);
  const double scale = std::max(1.0, top1.max_norm());
  e.top_order_parameter_free = (top1 - top2).max_norm() <= 1e-12 * scale;
  const auto pf = top1.pauli_fields();
  e.forces_offdiagonal_zero = max_abs(pf[1]) <= 1e-12 * scale && max_abs(pf[0]) <= 1e-12 * scale &&
                              max_abs(pf[2] - g.cplus) <= 1e-12 * scale &&
                              max_abs(pf[3] + g.cminus) <= 1e-12 * scale;

  // Top order gone: the order-1 coefficient reduces to G sigma3 with G independent of x.
  const double big_g = 0.7;
  const GridField zero(n, dx);
  const SigmaCoefficients g1{GridField::constant(n, dx, big_g), zero, zero};
  const auto order1 = deformation_footprint(lax.spatial, {{1, g1}}).at(1).pauli_fields();
  // [A_1, (i/2)(df+ s+ + df- s-)] = df+ s+ - df- s- cancels the order-1 part.
  const SigmaCoefficients shift{zero, -order1[2], order1[3]};
  const LaurentMatrixField total = deformation_footprint(lax.spatial, {{1, g1}, {0, shift}});
  const double tscale = std::max(1.0, total.max_norm());
  const bool order1_cancels = total.at(1).max_norm() <= 1e-10 * tscale && total.at(2).max_norm() <= 1e-10 * tscale;
  const auto order0 = total.at(0).pauli_fields();
  const bool diagonal_clean = max_abs(order0[1]) <= 1e-10 * tscale;

  const GridField p = rho * q;
  // Row: i p_t + p_xx - 2p|p|^2 = T p + S with S = -i * (sigma- part of the extra residual).
  const GridField source_g = -kI * order0[3];
  const auto [cg, rg] = fit_coefficient(source_g, big_g * deriv(p));
  e.free_term_coefficient = cg;
  e.free_term_fit_residual = rg;

  const double big_t = 0.3;
  const SigmaCoefficients t0{GridField::constant(n, dx, big_t), zero, zero};
  const auto t_part = deformation_footprint(lax.spatial, {{0, t0}});
  const auto t0f = t_part.at(0).pauli_fields();
  const auto [ct, rt] = fit_coefficient(-kI * t0f[3], big_t * p);
  e.source_coefficient = ct;

  e.matches_pattern = e.top_order_parameter_free && e.forces_offdiagonal_zero && order1_cancels && diagonal_clean &&
                      std::abs(cg - cplx{0.0, -0.5}) <= 1e-8 && rg <= 1e-8 && std::abs(ct - 1.0) <= 1e-8 &&
                      rt <= 1e-8 && max_abs(t0f[1]) <= 1e-12;
  return e;
}

}  // namespace

ScanReport continuum_spectral_scan(const GridField& q, const GridField& rho, const GridField& eta, int lo, int hi,
                                   std::uint64_t seed) {
  require_grid(q, rho, "continuum_spectral_scan");
  require_grid(q, eta, "continuum_spectral_scan");
  ScanReport report;
  const std::size_t n = q.size();
  const double length = q.length();
  const LaxPair lax = build_nls_lax(q, rho, eta);

  // Orders containing q_t: A_t for a generic q_t.
  const GridField q_t = random_smooth_field(n, length, seed + 100, 4, false, 0.1);
  const LaurentMatrixField a_t = nls_lax_time_derivative(q, q_t, rho, zeros_like(q));
  const std::set<int> eom = order_support(a_t, kSupportTol, scale_of(a_t));

  // Orders carrying (q, rho, eta) content in the undeformed ZCC, with q_t switched off.
  const LaurentMatrixField bare =
      zcc_residual(lax.spatial, lax.temporal, LaurentMatrixField(n, q.dx()));
  std::set<int> params = order_support(bare, kSupportTol, scale_of(lax.temporal));
  params.insert(eom.begin(), eom.end());
  std::set<int> indirect;
  std::set_difference(params.begin(), params.end(), eom.begin(), eom.end(), std::inserter(indirect, indirect.end()));

  report.eom_orders = to_vector(eom);
  report.parameter_orders = to_vector(params);

  for (int order = lo; order <= hi; ++order) {
    if (order < DeformationSpec::kMinOrder || order > DeformationSpec::kMaxOrder) {
      throw ConfigError("continuum_spectral_scan: order " + std::to_string(order) + " outside [-3, 3]");
    }
    const SigmaCoefficients c =
        random_coefficients(n, length, seed + 10 * static_cast<std::uint64_t>(order - DeformationSpec::kMinOrder));
    const LaurentMatrixField fp = deformation_footprint(lax.spatial, {{order, c}});
    const std::set<int> support = order_support(fp, kSupportTol, scale_of(fp));

    ScanEntry entry;
    entry.order = order;
    entry.footprint = to_vector(support);
    entry.residual_norms = order_norms(fp);
    const bool direct = std::any_of(support.begin(), support.end(), [&](int m) { return eom.count(m) != 0; });
    const bool via_params =
        std::any_of(support.begin(), support.end(), [&](int m) { return indirect.count(m) != 0; });
    entry.direct = direct;
    entry.target_reachable = direct;
    if (support.empty()) {
      entry.classification = OrderClass::inert;
    } else if (direct || via_params) {
      entry.classification = OrderClass::eom_modifying;
    } else {
      entry.classification = OrderClass::pure_constraint;
      entry.recursion_depth = distance(support, params);
      const MatrixGridField lam = MatrixGridField::from_pauli(c.c3, c.cplus, c.cminus);
      for (int m : support) {
        ConstraintEquation eq{m, m, m, m - 1, false};
        MatrixGridField pattern(n, q.dx());
        if (m == order) pattern += deriv(lam) * cplx{-1.0, 0.0} + commutator(lax.spatial.at(0), lam);
        if (m - 1 == order) pattern += commutator(lax.spatial.at(1), lam);
        pattern *= cplx{0.0, 0.5};
        eq.verified = (pattern - fp.at(m)).max_norm() <= 1e-10 * scale_of(fp);
        entry.constraints.push_back(eq);
      }
    }
    report.entries.push_back(std::move(entry));
  }
  if (lo <= 1 && 1 <= hi) report.edge = analyse_edge(q, rho, eta, seed);
  return report;
}

std::string scan_report_json(const ScanReport& r) {
  using nlohmann::json;
  json j;
  j["eom_orders"] = r.eom_orders;
  j["parameter_orders"] = r.parameter_orders;
  j["eom_modifying"] = r.eom_modifying();
  j["target_reachable"] = r.target_reachable();
  j["pure_constraint"] = r.pure_constraint();
  json orders = json::array();
  for (const auto& e : r.entries) {
    json o;
    o["order"] = e.order;
    o["classification"] = to_string(e.classification);
    o["direct"] = e.direct;
    o["target_reachable"] = e.target_reachable;
    o["footprint"] = e.footprint;
    json norms = json::object();
    for (const auto& [m, v] : e.residual_norms) norms[std::to_string(m)] = v;
    o["residual_norms"] = norms;
    if (e.classification == OrderClass::pure_constraint) {
      o["recursion_depth"] = e.recursion_depth;
      json cs = json::array();
      for (const auto& c : e.constraints) {
        cs.push_back({{"zcc_order", c.zcc_order},
                      {"derivative_of", c.derivative_of},
                      {"commutator_with_a0", c.commutator_with_a0},
                      {"commutator_with_a1", c.commutator_with_a1},
                      {"verified", c.verified}});
      }
      o["constraints"] = cs;
    }
    orders.push_back(o);
  }
  j["orders"] = orders;
  if (r.edge) {
    const auto& e = *r.edge;
    j["edge_order_1"] = {{"top_order_parameter_free", e.top_order_parameter_free},
                         {"forces_offdiagonal_zero", e.forces_offdiagonal_zero},
                         {"free_term_coefficient", {e.free_term_coefficient.real(), e.free_term_coefficient.imag()}},
                         {"free_term_fit_residual", e.free_term_fit_residual},
                         {"source_coefficient", {e.source_coefficient.real(), e.source_coefficient.imag()}},
                         {"matches_pattern", e.matches_pattern}};
  }
  return j.dump(2);
}

// --- deformed dynamics -------------------------------------------------------------

std::string to_string(Closure c) {
  switch (c) {
    case Closure::none: return "none";
    case Closure::f_only: return "f_only";
    case Closure::hsc: return "hsc";
    case Closure::vortex: return "vortex";
    case Closure::vortex_local: return "vortex_local";
  }
  return "unknown";
}

Closure parse_closure(const std::string& s) {
  for (auto c : {Closure::none, Closure::f_only, Closure::hsc, Closure::vortex, Closure::vortex_local}) {
    if (to_string(c) == s) return c;
  }
  throw ConfigError("unknown closure: " + s);
}

DeformedEom deformed_eom_rhs(const GridField& q, const GridField& rho, const GridField& rho_t, const GridField& eta,
                             const ClosureParams& params, double t) {
  require_grid(q, rho, "deformed_eom_rhs");
  require_grid(q, rho_t, "deformed_eom_rhs");
  require_grid(q, eta, "deformed_eom_rhs");
  const Closure closure = params.closure;
  const double alpha = params.alpha;
  const double alpha_prime = params.alpha_prime;
  const cplx rescaled{alpha, 1.0 - alpha_prime};

  if (closure == Closure::vortex) {
    const double tol = 1e-12 * std::max(1.0, std::abs(rho[0]));
    for (std::size_t k = 0; k < rho.size(); ++k) {
      if (std::abs(rho[k] - rho[0]) > tol || std::abs(rho_t[k]) > tol) {
        throw InvalidInput("vortex closure requires a constant coupling");
      }
    }
  }

  DeformedEom out;
  out.dispersion = closure == Closure::vortex ? rescaled : kI;
  const double source = closure == Closure::vortex ? -params.drag(t) : params.source(t);

  const GridField q2 = q.abs2();
  const GridField p = rho * q;
  GridField row = rho_t * q - (out.dispersion * rho) * deriv(q, 2) - kI * (deriv(rho) * deriv(q)) -
                  (2.0 * kI) * (eta * p * q2);
  if (closure != Closure::none) {
    const FCoefficients f = f_coeffs(q, rho, eta, source);
    row -= cplx{0.0, 0.5} * (deriv(f.fminus) - 2.0 * (p * f.f3));
  }

  // hminus = c_h q_t + d_h; the row reads rho q_t + row = hminus.
  GridField c_h = zeros_like(q);
  GridField d_h = zeros_like(q);
  const GridField qx = deriv(q);
  const GridField vortex_integral = cumint(q * qx.conj() - q.conj() * qx, params.lower);
  switch (closure) {
    case Closure::none:
      out.integrability = "undeformed";
      break;
    case Closure::f_only:
      out.integrability = "rescaled_nls";
      break;
    case Closure::hsc: {
      out.integrability = "semiholonomic";
      c_h = rho + cplx{-1.0, 0.0};
      d_h = rho_t * q + (2.0 * kI) * ((rho.abs2() + cplx{1.0, 0.0}) * p * q2) + (kI * source) * p +
            (2.0 * kI) * (q * cumint(deriv(rho) * q2, params.lower));
      break;
    }
    case Closure::vortex: {
      out.integrability = "non_integrable";
      d_h = h_coeffs_vortex(q, rho[0], alpha, alpha_prime, params.lower).hminus;
      break;
    }
    case Closure::vortex_local: {
      out.integrability = "non_integrable";
      c_h = rho + cplx{-1.0, 0.0};
      const cplx d{-alpha, 0.5 * (1.0 - alpha_prime)};
      d_h = rho_t * q - deriv(kI * p - rescaled * q, 2) + (2.0 * kI) * (p * p.abs2()) + d * (q * q2) +
            (kI * source) * p + (kI * params.drag(t)) * q;
      if (alpha != 0.0) d_h -= (0.5 * alpha) * (q * vortex_integral);
      break;
    }
  }

  const GridField denom = rho - c_h;
  for (std::size_t k = 0; k < denom.size(); ++k) {
    if (!(std::abs(denom[k]) > 1e-14)) throw InvalidInput("deformed_eom_rhs: coupling vanishes at a node");
  }
  out.q_t = (d_h - row) / denom;
  if (!out.q_t.all_finite()) throw NumericalBlowup("deformed_eom_rhs: non-finite q_t");

  if (closure == Closure::hsc) {
    out.h3 = h3_hsc(q, out.q_t, rho, rho_t, source, params.mask_rel, params.lower);
    const double support = params.support_rel * max_abs(q);
    for (std::size_t k = 0; k < q.size(); ++k) {
      if (out.h3->masked[k] && std::abs(q[k]) > support) out.mask_hits_support = true;
    }
  }
  return out;
}

}  // namespace nhdnls
