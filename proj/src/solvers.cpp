#include "nhdnls/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "nhdnls/errors.hpp"
#include "spectral.hpp"

namespace nhdnls {

TimeFn zero_time_fn() {
  return [](double) { return 0.0; };
}

std::string to_string(NlsVariant v) {
  switch (v) {
    case NlsVariant::standard: return "standard";
    case NlsVariant::inhomogeneous: return "inhomogeneous";
    case NlsVariant::vortex: return "vortex";
    case NlsVariant::shifted: return "shifted";
    case NlsVariant::shifted_drift: return "shifted_drift";
  }
  return "unknown";
}

NlsVariant parse_variant(const std::string& s) {
  if (s == "standard" || s == "nls") return NlsVariant::standard;
  if (s == "inhomogeneous" || s == "inls") return NlsVariant::inhomogeneous;
  if (s == "vortex") return NlsVariant::vortex;
  if (s == "shifted") return NlsVariant::shifted;
  if (s == "shifted_drift") return NlsVariant::shifted_drift;
  throw ConfigError("unknown NLS variant '" + s + "'");
}

std::string to_string(Scheme s) { return s == Scheme::rk4 ? "rk4" : "splitstep"; }

Scheme parse_scheme(const std::string& s) {
  if (s == "rk4") return Scheme::rk4;
  if (s == "splitstep") return Scheme::splitstep;
  throw ConfigError("unknown scheme '" + s + "'");
}

NlsProblem NlsProblem::standard(GridField eta) {
  NlsProblem p;
  p.variant = NlsVariant::standard;
  p.eta = std::move(eta);
  return p;
}

NlsProblem NlsProblem::inhomogeneous(GridField rho, LowerLimit lower) {
  NlsProblem p;
  p.variant = NlsVariant::inhomogeneous;
  p.rho = std::move(rho);
  p.lower = lower;
  return p;
}

NlsProblem NlsProblem::vortex_filament(VortexParams v, LowerLimit lower) {
  NlsProblem p;
  p.variant = NlsVariant::vortex;
  p.vortex = std::move(v);
  p.lower = lower;
  return p;
}

NlsProblem NlsProblem::shifted(TimeFn source) {
  NlsProblem p;
  p.variant = NlsVariant::shifted;
  p.source = std::move(source);
  return p;
}

NlsProblem NlsProblem::shifted_drift(TimeFn source, TimeFn free_term) {
  NlsProblem p;
  p.variant = NlsVariant::shifted_drift;
  p.source = std::move(source);
  p.free_term = std::move(free_term);
  return p;
}

void NlsProblem::validate(const GridField& q) const {
  const bool has_eta = eta.has_value();
  const bool has_rho = rho.has_value();
  const bool has_vortex = vortex.has_value();
  const bool has_source = static_cast<bool>(source);
  const bool has_free = static_cast<bool>(free_term);
  bool ok = false;
  switch (variant) {
    case NlsVariant::standard: ok = has_eta && !has_rho && !has_vortex && !has_source && !has_free; break;
    case NlsVariant::inhomogeneous: ok = has_rho && !has_eta && !has_vortex && !has_source && !has_free; break;
    case NlsVariant::vortex: ok = has_vortex && !has_eta && !has_rho && !has_source && !has_free; break;
    case NlsVariant::shifted: ok = has_source && !has_eta && !has_rho && !has_vortex && !has_free; break;
    case NlsVariant::shifted_drift: ok = has_source && has_free && !has_eta && !has_rho && !has_vortex; break;
  }
  if (!ok) throw ConfigError("NlsProblem: parameters do not match variant " + to_string(variant));
  if (has_eta && !eta->same_grid(q)) throw ConfigError("NlsProblem: eta grid differs from q");
  if (has_rho) {
    if (!rho->same_grid(q)) throw ConfigError("NlsProblem: rho grid differs from q");
  }
  if (has_vortex) {
    const auto& v = *vortex;
    if (!(v.alpha >= 0.0 && v.alpha < 1.0) || !(v.alpha_prime >= 0.0 && v.alpha_prime < 1.0)) {
      throw ConfigError("NlsProblem: friction coefficients must lie in [0, 1)");
    }
    if (!v.drag) throw ConfigError("NlsProblem: drag callback missing");
  }
  if (!(stability_factor > 0.0)) throw ConfigError("NlsProblem: stability factor must be positive");
}

// ---------------------------------------------------------------------------

GridField rhs_standard(const GridField& q, const GridField& eta) {
  q.require_same_grid(eta, "rhs_standard");
  return kI * deriv(q, 2) + (2.0 * kI) * (eta * q.abs2() * q);
}

GridField rhs_inhomogeneous(const GridField& q, const GridField& rho, LowerLimit lower) {
  q.require_same_grid(rho, "rhs_inhomogeneous");
  const GridField p = rho * q;
  const GridField integral = cumint(deriv(rho) * q.abs2(), lower);
  return kI * deriv(p, 2) + (2.0 * kI) * (p * q.abs2()) + (2.0 * kI) * (q * integral);
}

GridField rhs_vortex(const GridField& q, const VortexParams& p, double t, LowerLimit lower) {
  const double a = p.alpha;
  const double ap = p.alpha_prime;
  const cplx dispersion{a, 1.0 - ap};
  const cplx cubic{-a, 0.5 * (1.0 - ap)};
  const GridField qx = deriv(q);
  const GridField integrand = q * qx.conj() - q.conj() * qx;
  GridField out = (kI * p.drag(t)) * q + dispersion * deriv(q, 2) + cubic * (q * q.abs2());
  if (a != 0.0) out -= (0.5 * a) * (q * cumint(integrand, lower));
  return out;
}

GridField rhs_deformed(const GridField& p, double source, double free_term) {
  GridField out = kI * deriv(p, 2) - (2.0 * kI) * (p.abs2() * p) - (kI * source) * p;
  if (free_term != 0.0) out -= (0.5 * free_term) * deriv(p);
  return out;
}

GridField evaluate_rhs(const NlsProblem& problem, const GridField& q, double t) {
  switch (problem.variant) {
    case NlsVariant::standard: return rhs_standard(q, *problem.eta);
    case NlsVariant::inhomogeneous: return rhs_inhomogeneous(q, *problem.rho, problem.lower);
    case NlsVariant::vortex: return rhs_vortex(q, *problem.vortex, t, problem.lower);
    case NlsVariant::shifted: return rhs_deformed(q, problem.source(t), 0.0);
    case NlsVariant::shifted_drift: return rhs_deformed(q, problem.source(t), problem.free_term(t));
  }
  throw ConfigError("evaluate_rhs: unknown variant");
}

double stability_limit(const NlsProblem& problem, const GridField& q) {
  double stiffness = 1.0;
  if (problem.variant == NlsVariant::inhomogeneous) stiffness = std::max(1.0, max_abs(*problem.rho));
  if (problem.variant == NlsVariant::vortex) {
    const auto& v = *problem.vortex;
    stiffness = std::max(1.0, std::hypot(v.alpha, 1.0 - v.alpha_prime));
  }
  return problem.stability_factor * q.dx() * q.dx() / stiffness;
}

namespace {

GridField masked_rhs(const NlsProblem& problem, const GridField& q, double t) {
  return dealias(evaluate_rhs(problem, q, t));
}

GridField rk4(const NlsProblem& problem, const GridField& q, double t, double dt) {
  const GridField k1 = masked_rhs(problem, q, t);
  const GridField k2 = masked_rhs(problem, q + (0.5 * dt) * k1, t + 0.5 * dt);
  const GridField k3 = masked_rhs(problem, q + (0.5 * dt) * k2, t + 0.5 * dt);
  const GridField k4 = masked_rhs(problem, q + dt * k3, t + dt);
  return q + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

// Strang splitting: half nonlinear phase, exact linear propagator, half nonlinear phase.
GridField splitstep(const GridField& q, const GridField& eta, double dt) {
  const std::size_t n = q.size();
  std::vector<cplx> v(q.samples().begin(), q.samples().end());
  auto nonlinear = [&](double h) {
    for (std::size_t k = 0; k < n; ++k) v[k] *= std::exp(2.0 * kI * eta[k] * std::norm(v[k]) * h);
  };
  nonlinear(0.5 * dt);
  auto spec = detail::fft(v);
  const double base = 2.0 * std::numbers::pi / q.length();
  for (std::size_t j = 0; j < n; ++j) {
    const double k = base * static_cast<double>(detail::mode_number(j, n));
    spec[j] *= std::exp(-kI * k * k * dt);
  }
  v = detail::ifft(spec);
  nonlinear(0.5 * dt);
  for (const auto& z : v) {
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) throw NumericalBlowup("splitstep: non-finite state");
  }
  return GridField(std::move(v), q.dx(), false);
}

}  // namespace

GridField step(const NlsProblem& problem, const GridField& q, double t, double dt, Scheme scheme) {
  problem.validate(q);
  if (!(dt > 0.0)) throw ConfigError("step: dt must be positive");
  GridField out;
  if (scheme == Scheme::splitstep) {
    if (problem.variant != NlsVariant::standard) {
      throw ConfigError("step: split-step is only available for the standard variant");
    }
    for (std::size_t k = 0; k < q.size(); ++k) {
      if (std::abs((*problem.eta)[k].imag()) > 0.0) throw ConfigError("step: split-step needs real eta");
    }
    out = splitstep(q.periodized(), *problem.eta, dt);
  } else {
    const double limit = stability_limit(problem, q);
    if (dt > limit) {
      throw ConfigError("step: dt = " + std::to_string(dt) + " exceeds the stability bound " +
                        std::to_string(limit));
    }
    out = rk4(problem, q.periodized(), t, dt);
  }
  if (!out.all_finite()) throw NumericalBlowup("step: non-finite state at t = " + std::to_string(t + dt));
  return out.periodized();
}

// ---------------------------------------------------------------------------

LogEntry monitor(double t, const GridField& q) {
  LogEntry e;
  e.t = t;
  const Norms nq = norms(q);
  e.mass = nq.mass;
  e.linf = nq.linf;
  e.energy_proxy = norms(deriv(q.periodized())).mass;
  const std::size_t n = q.size();
  const std::size_t edge = n / 8;
  double tail = 0.0;
  for (std::size_t k = 0; k < edge; ++k) tail += std::norm(q[k]) + std::norm(q[n - 1 - k]);
  e.tail_mass = tail * q.dx();
  return e;
}

void EvolutionLog::record(double t, const GridField& q) {
  if (!entries_.empty() && !(t > entries_.back().t)) throw InvalidInput("EvolutionLog: time must increase");
  LogEntry e = monitor(t, q);
  if (!std::isfinite(e.mass) || !std::isfinite(e.energy_proxy)) throw NumericalBlowup("EvolutionLog: non-finite");
  entries_.push_back(e);
}

double EvolutionLog::relative_mass_drift() const {
  if (entries_.empty()) return 0.0;
  const double m0 = entries_.front().mass;
  double worst = 0.0;
  for (const auto& e : entries_) worst = std::max(worst, std::abs(e.mass - m0));
  return m0 > 0.0 ? worst / m0 : worst;
}

Evolution evolve(const NlsProblem& problem, GridField q0, double t0, double dt, std::size_t steps, Scheme scheme,
                 std::size_t cadence) {
  Evolution ev{std::move(q0), t0, EvolutionLog(cadence)};
  ev.log.record(ev.t, ev.q);
  for (std::size_t s = 1; s <= steps; ++s) {
    ev.q = step(problem, ev.q, ev.t, dt, scheme);
    ev.t = t0 + static_cast<double>(s) * dt;
    if (s % ev.log.cadence() == 0 || s == steps) ev.log.record(ev.t, ev.q);
  }
  return ev;
}

// ---------------------------------------------------------------------------

double TangentField::unit_defect() const {
  double worst = 0.0;
  for (std::size_t k = 0; k < size(); ++k) {
    const double r = std::sqrt(std::norm(x[k]) + std::norm(y[k]) + std::norm(z[k]));
    worst = std::max(worst, std::abs(r - 1.0));
  }
  return worst;
}

TangentField TangentField::normalized() const {
  const std::size_t n = size();
  std::vector<cplx> a(n), b(n), c(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double r = std::sqrt(std::norm(x[k]) + std::norm(y[k]) + std::norm(z[k]));
    if (!(r > 0.0) || !std::isfinite(r)) throw NumericalBlowup("TangentField: degenerate vector");
    a[k] = x[k].real() / r;
    b[k] = y[k].real() / r;
    c[k] = z[k].real() / r;
  }
  return {GridField(std::move(a), dx(), true), GridField(std::move(b), dx(), true), GridField(std::move(c), dx(), true)};
}

TangentField make_tangent_field(GridField x, GridField y, GridField z) {
  x.require_same_grid(y, "make_tangent_field");
  x.require_same_grid(z, "make_tangent_field");
  return {x.real().periodized(), y.real().periodized(), z.real().periodized()};
}

namespace {

TangentField ll_vector_field(const TangentField& t) {
  const GridField xs = deriv(t.x, 2);
  const GridField ys = deriv(t.y, 2);
  const GridField zs = deriv(t.z, 2);
  return {t.y * zs - t.z * ys, t.z * xs - t.x * zs, t.x * ys - t.y * xs};
}

TangentField masked(const TangentField& f) { return {dealias(f.x), dealias(f.y), dealias(f.z)}; }

TangentField axpy(const TangentField& a, double h, const TangentField& k) {
  return {a.x + h * k.x, a.y + h * k.y, a.z + h * k.z};
}

}  // namespace

TangentField rhs_ll(const TangentField& t) {
  if (t.unit_defect() > 1e-8) throw InvalidInput("rhs_ll: tangent field is not unit");
  return ll_vector_field(t);
}

TangentField step_ll(const TangentField& t, double dt, double stability_factor) {
  if (!(dt > 0.0)) throw ConfigError("step_ll: dt must be positive");
  const double limit = stability_factor * t.dx() * t.dx();
  if (dt > limit) {
    throw ConfigError("step_ll: dt = " + std::to_string(dt) + " exceeds the stability bound " + std::to_string(limit));
  }
  const TangentField k1 = masked(ll_vector_field(t));
  const TangentField k2 = masked(ll_vector_field(axpy(t, 0.5 * dt, k1)));
  const TangentField k3 = masked(ll_vector_field(axpy(t, 0.5 * dt, k2)));
  const TangentField k4 = masked(ll_vector_field(axpy(t, dt, k3)));
  TangentField out = t;
  out = axpy(out, dt / 6.0, k1);
  out = axpy(out, dt / 3.0, k2);
  out = axpy(out, dt / 3.0, k3);
  out = axpy(out, dt / 6.0, k4);
  return out.normalized();
}

double ll_energy(const TangentField& t) {
  return norms(deriv(t.x)).mass + norms(deriv(t.y)).mass + norms(deriv(t.z)).mass;
}

}  // namespace nhdnls
