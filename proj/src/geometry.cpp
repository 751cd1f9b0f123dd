#include "nhdnls/geometry.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>

#include "nhdnls/errors.hpp"

namespace nhdnls {

double CurveFrame::orthonormality_defect() const {
  double worst = 0.0;
  for (std::size_t k = 0; k < size(); ++k) {
    worst = std::max({worst, std::abs(norm(t[k]) - 1.0), std::abs(norm(n[k]) - 1.0), std::abs(norm(b[k]) - 1.0)});
    worst = std::max({worst, std::abs(dot(t[k], n[k])), std::abs(dot(t[k], b[k])), std::abs(dot(n[k], b[k]))});
    worst = std::max(worst, norm(cross(t[k], n[k]) - b[k]));
  }
  return worst;
}

namespace {

struct Coordinates {
  GridField x, y, z;
};

Coordinates coordinates(const std::vector<Vec3>& pts, const Vec3& closure, double h) {
  const std::size_t n = pts.size();
  std::vector<cplx> x(n), y(n), z(n);
  for (std::size_t k = 0; k < n; ++k) {
    x[k] = pts[k].x;
    y[k] = pts[k].y;
    z[k] = pts[k].z;
  }
  const Vec3 end = pts.front() + closure;
  return {GridField(std::move(x), end.x, h, true), GridField(std::move(y), end.y, h, true),
          GridField(std::move(z), end.z, h, true)};
}

std::vector<Vec3> to_vectors(const GridField& x, const GridField& y, const GridField& z) {
  std::vector<Vec3> out(x.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = {x[k].real(), y[k].real(), z[k].real()};
  return out;
}

struct CurveDerivatives {
  std::vector<Vec3> d1, d2, d3;
};

CurveDerivatives curve_derivatives(const std::vector<Vec3>& pts, const Vec3& closure, double h, DerivMethod m,
                                   bool third) {
  const Coordinates c = coordinates(pts, closure, h);
  CurveDerivatives d;
  const GridField x1 = deriv(c.x, 1, m), y1 = deriv(c.y, 1, m), z1 = deriv(c.z, 1, m);
  const GridField x2 = deriv(c.x, 2, m), y2 = deriv(c.y, 2, m), z2 = deriv(c.z, 2, m);
  d.d1 = to_vectors(x1, y1, z1);
  d.d2 = to_vectors(x2, y2, z2);
  if (third) d.d3 = to_vectors(deriv(x2, 1, m), deriv(y2, 1, m), deriv(z2, 1, m));
  return d;
}

void check_points(const std::vector<Vec3>& pts) {
  if (pts.size() < 8 || !is_power_of_two(pts.size())) {
    throw InvalidInput("curve: sample count must be a power of two >= 8");
  }
  for (const auto& p : pts) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z)) throw InvalidInput("curve: non-finite point");
  }
}

// Redistributes samples to uniform arc length using the band-limited interpolant.
std::vector<Vec3> resample_arclength(const std::vector<Vec3>& pts, const Vec3& closure, double& ds) {
  const std::size_t n = pts.size();
  const double period = static_cast<double>(n);
  const CurveDerivatives d = curve_derivatives(pts, closure, 1.0, DerivMethod::spectral, false);
  std::vector<cplx> speed(n);
  for (std::size_t k = 0; k < n; ++k) {
    speed[k] = norm(d.d1[k]);
    if (!(speed[k].real() > 0.0)) throw InvalidInput("curve: coincident samples");
  }
  const TrigSeries sp(speed, period);
  const double length = sp.mean().real() * period;
  const double s0 = sp.antiderivative(0.0).real();

  std::array<std::vector<cplx>, 3> detrended;
  for (auto& v : detrended) v.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double u = static_cast<double>(k) / period;
    detrended[0][k] = pts[k].x - closure.x * u;
    detrended[1][k] = pts[k].y - closure.y * u;
    detrended[2][k] = pts[k].z - closure.z * u;
  }
  const TrigSeries sx(detrended[0], period), sy(detrended[1], period), sz(detrended[2], period);

  ds = length / period;
  std::vector<Vec3> out(n);
  double u = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double target = ds * static_cast<double>(j);
    if (j > 0) u = std::max(u, target / sp.mean().real());
    for (int it = 0; it < 60; ++it) {
      const double f = sp.antiderivative(u).real() - s0 - target;
      const double du = f / sp(u).real();
      u -= du;
      if (std::abs(du) < 1e-14 * period) break;
    }
    const double frac = u / period;
    out[j] = {sx(u).real() + closure.x * frac, sy(u).real() + closure.y * frac, sz(u).real() + closure.z * frac};
  }
  return out;
}

Vec3 any_perpendicular(const Vec3& t) {
  const Vec3 axis = std::abs(t.x) < 0.9 ? Vec3{1.0, 0.0, 0.0} : Vec3{0.0, 1.0, 0.0};
  return normalized(axis - dot(axis, t) * t);
}

}  // namespace

CurveFrame frenet_from_curve(const std::vector<Vec3>& points, const Vec3& closure, const FrenetOptions& opts) {
  check_points(points);
  const std::size_t n = points.size();
  CurveFrame f;
  f.closure = closure;
  double h = 1.0;
  if (opts.resample) {
    f.points = resample_arclength(points, closure, f.ds);
    h = f.ds;
  } else {
    f.points = points;
    double total = 0.0;
    for (std::size_t k = 0; k < n; ++k) total += norm((k + 1 < n ? points[k + 1] : points[0] + closure) - points[k]);
    f.ds = total / static_cast<double>(n);
  }
  const CurveDerivatives d = curve_derivatives(f.points, closure, h, opts.method, true);

  std::vector<cplx> kappa(n), tau(n);
  f.t.resize(n);
  f.n.resize(n);
  f.b.resize(n);
  f.transported.assign(n, false);
  double kmax = 0.0;
  std::vector<double> kv(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double sp = norm(d.d1[k]);
    if (!(sp > 0.0)) throw InvalidInput("frenet_from_curve: zero tangent");
    const Vec3 c = cross(d.d1[k], d.d2[k]);
    kv[k] = norm(c) / (sp * sp * sp);
    kmax = std::max(kmax, kv[k]);
    f.t[k] = d.d1[k] / sp;
  }
  const double threshold = opts.kappa_min_rel * kmax;
  for (std::size_t k = 0; k < n; ++k) {
    kappa[k] = kv[k];
    if (kmax > 0.0 && kv[k] >= threshold && kv[k] > 0.0) {
      const Vec3 c = cross(d.d1[k], d.d2[k]);
      const double c2 = dot(c, c);
      f.b[k] = c / std::sqrt(c2);
      f.n[k] = cross(f.b[k], f.t[k]);
      tau[k] = dot(c, d.d3[k]) / c2;
    } else {
      f.transported[k] = true;
      f.parallel_transport = true;
    }
  }
  if (f.parallel_transport) {
    std::size_t start = n;
    for (std::size_t k = 0; k < n; ++k) {
      if (!f.transported[k]) {
        start = k;
        break;
      }
    }
    if (start == n) {
      start = 0;
      f.n[0] = any_perpendicular(f.t[0]);
      f.b[0] = cross(f.t[0], f.n[0]);
    }
    for (std::size_t i = 1; i < n; ++i) {
      const std::size_t k = (start + i) % n;
      if (!f.transported[k]) continue;
      const std::size_t prev = (k + n - 1) % n;
      Vec3 v = f.n[prev] - dot(f.n[prev], f.t[k]) * f.t[k];
      if (!(norm(v) > 1e-12)) v = any_perpendicular(f.t[k]);
      f.n[k] = normalized(v);
      f.b[k] = cross(f.t[k], f.n[k]);
      tau[k] = 0.0;
    }
  }
  f.kappa = GridField(std::move(kappa), f.ds, true);
  f.tau = GridField(std::move(tau), f.ds, true);
  return f;
}

GridField hasimoto_forward(const GridField& kappa, const GridField& tau) {
  kappa.require_same_grid(tau, "hasimoto_forward");
  for (std::size_t k = 0; k < kappa.size(); ++k) {
    if (kappa[k].real() < 0.0) throw InvalidInput("hasimoto_forward: negative curvature");
  }
  const GridField phase = spectral_cumint(tau.real());
  return kappa.real() * phase.map([](cplx z) { return std::exp(kI * z.real()); });
}

HasimotoInverse hasimoto_inverse(const GridField& q, double kappa_floor) {
  HasimotoInverse out;
  out.kappa = q.abs();
  const GridField j = momentum_density(q);
  const std::size_t n = q.size();
  std::vector<cplx> tau(n);
  out.masked.assign(n, false);
  for (std::size_t k = 0; k < n; ++k) {
    const double a2 = std::norm(q[k]);
    if (std::sqrt(a2) < kappa_floor || a2 == 0.0) {
      out.masked[k] = true;
      ++out.masked_count;
    } else {
      tau[k] = j[k].real() / a2;
    }
  }
  out.tau = GridField(std::move(tau), q.dx(), true);
  return out;
}

CurveFrame frame_reconstruct(const GridField& kappa, const GridField& tau) {
  kappa.require_same_grid(tau, "frame_reconstruct");
  const std::size_t n = kappa.size();
  constexpr std::size_t sub = 16;
  const GridField kf = refine(kappa.real().periodized(), 2 * sub);
  const GridField tf = refine(tau.real().periodized(), 2 * sub);
  const std::size_t fine = kf.size();
  auto kat = [&](std::size_t i) { return kf[i % fine].real(); };
  auto tat = [&](std::size_t i) { return tf[i % fine].real(); };

  struct State {
    Vec3 r, t, n, b;
  };
  auto rate = [](const State& s, double k, double w) {
    return State{s.t, k * s.n, -k * s.t + w * s.b, -w * s.n};
  };
  auto add = [](const State& s, double h, const State& d) {
    return State{s.r + h * d.r, s.t + h * d.t, s.n + h * d.n, s.b + h * d.b};
  };

  const double ds = kappa.dx();
  const double h = ds / static_cast<double>(sub);
  State s{{0.0, 0.0, 0.0}, {1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}};
  CurveFrame f;
  f.ds = ds;
  f.points.resize(n);
  f.t.resize(n);
  f.n.resize(n);
  f.b.resize(n);
  f.transported.assign(n, false);
  for (std::size_t node = 0; node < n; ++node) {
    f.points[node] = s.r;
    f.t[node] = s.t;
    f.n[node] = s.n;
    f.b[node] = s.b;
    for (std::size_t j = 0; j < sub; ++j) {
      const std::size_t i = 2 * (node * sub + j);
      const State k1 = rate(s, kat(i), tat(i));
      const State k2 = rate(add(s, 0.5 * h, k1), kat(i + 1), tat(i + 1));
      const State k3 = rate(add(s, 0.5 * h, k2), kat(i + 1), tat(i + 1));
      const State k4 = rate(add(s, h, k3), kat(i + 2), tat(i + 2));
      s.r += (h / 6.0) * (k1.r + 2.0 * k2.r + 2.0 * k3.r + k4.r);
      s.t += (h / 6.0) * (k1.t + 2.0 * k2.t + 2.0 * k3.t + k4.t);
      s.n += (h / 6.0) * (k1.n + 2.0 * k2.n + 2.0 * k3.n + k4.n);
      s.b += (h / 6.0) * (k1.b + 2.0 * k2.b + 2.0 * k3.b + k4.b);
    }
    // Modified Gram-Schmidt once per node, i.e. every 16 integration steps.
    s.t = normalized(s.t);
    s.n = normalized(s.n - dot(s.n, s.t) * s.t);
    s.b = s.b - dot(s.b, s.t) * s.t;
    s.b = normalized(s.b - dot(s.b, s.n) * s.n);
  }
  f.closure = s.r - f.points.front();
  f.kappa = kappa.real();
  f.tau = tau.real();
  return f;
}

void FilamentParams::validate() const {
  if (!(alpha >= 0.0 && alpha < 1.0) || !(alpha_prime >= 0.0 && alpha_prime < 1.0)) {
    throw ConfigError("FilamentParams: friction coefficients must lie in [0, 1)");
  }
  const Vec3& u = normal_velocity;
  if (!std::isfinite(u.x) || !std::isfinite(u.y) || !std::isfinite(u.z)) {
    throw ConfigError("FilamentParams: non-finite normal-fluid velocity");
  }
}

namespace {

Vec3 hvbk_velocity(const Vec3& t, const Vec3& kb, const FilamentParams& p) {
  const Vec3 w = p.normal_velocity - kb;
  return kb + p.alpha * cross(t, w) - p.alpha_prime * cross(t, cross(t, w));
}

std::vector<Vec3> velocity_from_points(const std::vector<Vec3>& pts, const Vec3& closure, const FilamentParams& p) {
  const CurveDerivatives d = curve_derivatives(pts, closure, 1.0, DerivMethod::spectral, false);
  std::vector<Vec3> v(pts.size());
  for (std::size_t k = 0; k < pts.size(); ++k) {
    const double sp = norm(d.d1[k]);
    const Vec3 t = d.d1[k] / sp;
    const Vec3 kb = cross(d.d1[k], d.d2[k]) / (sp * sp * sp);
    v[k] = hvbk_velocity(t, kb, p);
  }
  // 2/3 mask: the binormal flow is dispersive and the unmasked top modes exceed the RK4 limit.
  const std::size_t n = pts.size();
  std::vector<cplx> vx(n), vy(n), vz(n);
  for (std::size_t k = 0; k < n; ++k) vx[k] = v[k].x, vy[k] = v[k].y, vz[k] = v[k].z;
  const GridField mx = dealias(GridField(std::move(vx), 1.0, true));
  const GridField my = dealias(GridField(std::move(vy), 1.0, true));
  const GridField mz = dealias(GridField(std::move(vz), 1.0, true));
  for (std::size_t k = 0; k < n; ++k) v[k] = {mx[k].real(), my[k].real(), mz[k].real()};
  return v;
}

void check_self_intersection(const std::vector<Vec3>& pts, double ds) {
  const std::size_t n = pts.size();
  const double limit = 0.5 * ds;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 3; j < n; ++j) {
      if (i + n - j < 3) continue;
      if (norm(pts[i] - pts[j]) < limit) {
        throw SelfIntersection("filament: nodes " + std::to_string(i) + " and " + std::to_string(j) + " collide");
      }
    }
  }
}

}  // namespace

std::vector<Vec3> filament_velocity(const CurveFrame& frame, const FilamentParams& p) {
  p.validate();
  std::vector<Vec3> v(frame.size());
  for (std::size_t k = 0; k < frame.size(); ++k) {
    const Vec3 ktn = frame.kappa[k].real() * cross(frame.t[k], frame.n[k]);
    const Vec3 w = p.normal_velocity - ktn;
    v[k] = ktn + p.alpha * cross(frame.t[k], w) - p.alpha_prime * cross(frame.t[k], cross(frame.t[k], w));
  }
  return v;
}

CurveFrame step_filament(const CurveFrame& frame, const FilamentParams& p, double dt) {
  p.validate();
  double kmax = 0.0;
  for (std::size_t k = 0; k < frame.size(); ++k) kmax = std::max(kmax, frame.kappa[k].real());
  const double bound = 0.4 * frame.ds * frame.ds / std::max(1.0, kmax);
  if (!(dt > 0.0) || dt > bound) {
    throw ConfigError("step_filament: dt = " + std::to_string(dt) + " outside (0, " + std::to_string(bound) + "]");
  }
  const auto& r = frame.points;
  auto shifted = [&](double h, const std::vector<Vec3>& k) {
    std::vector<Vec3> out(r.size());
    for (std::size_t i = 0; i < r.size(); ++i) out[i] = r[i] + h * k[i];
    return out;
  };
  const auto k1 = velocity_from_points(r, frame.closure, p);
  const auto k2 = velocity_from_points(shifted(0.5 * dt, k1), frame.closure, p);
  const auto k3 = velocity_from_points(shifted(0.5 * dt, k2), frame.closure, p);
  const auto k4 = velocity_from_points(shifted(dt, k3), frame.closure, p);
  std::vector<Vec3> next(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) {
    next[i] = r[i] + (dt / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    if (!std::isfinite(next[i].x) || !std::isfinite(next[i].y) || !std::isfinite(next[i].z)) {
      throw NumericalBlowup("step_filament: non-finite position at node " + std::to_string(i));
    }
  }
  check_self_intersection(next, frame.ds);
  return frenet_from_curve(next, frame.closure);
}

CurvatureTorsion curvature_torsion_from_tangent(const TangentField& t, double kappa_floor) {
  const GridField xs = deriv(t.x), ys = deriv(t.y), zs = deriv(t.z);
  const GridField xss = deriv(t.x, 2), yss = deriv(t.y, 2), zss = deriv(t.z, 2);
  const std::size_t n = t.size();
  CurvatureTorsion out;
  std::vector<cplx> kappa(n), tau(n);
  out.masked.assign(n, false);
  for (std::size_t k = 0; k < n; ++k) {
    const Vec3 tv{t.x[k].real(), t.y[k].real(), t.z[k].real()};
    const Vec3 d1{xs[k].real(), ys[k].real(), zs[k].real()};
    const Vec3 d2{xss[k].real(), yss[k].real(), zss[k].real()};
    const double kap = norm(d1);
    kappa[k] = kap;
    if (kap < kappa_floor || kap == 0.0) {
      out.masked[k] = true;
    } else {
      tau[k] = dot(cross(tv, d1), d2) / (kap * kap);
    }
  }
  out.kappa = GridField(std::move(kappa), t.dx(), true);
  out.tau = GridField(std::move(tau), t.dx(), true);
  return out;
}

TangentField tangent_of(const CurveFrame& frame) {
  const std::size_t n = frame.size();
  std::vector<cplx> x(n), y(n), z(n);
  for (std::size_t k = 0; k < n; ++k) {
    x[k] = frame.t[k].x;
    y[k] = frame.t[k].y;
    z[k] = frame.t[k].z;
  }
  return {GridField(std::move(x), frame.ds, true), GridField(std::move(y), frame.ds, true),
          GridField(std::move(z), frame.ds, true)};
}

Vec3 centroid(const std::vector<Vec3>& points) {
  Vec3 c;
  for (const auto& p : points) c += p;
  return c / static_cast<double>(points.size());
}

double mean_radius(const std::vector<Vec3>& points) {
  const Vec3 c = centroid(points);
  double r = 0.0;
  for (const auto& p : points) r += norm(p - c);
  return r / static_cast<double>(points.size());
}

void write_curve_csv(std::ostream& os, const CurveFrame& frame) {
  os << "s,x,y,z,kappa,tau\n";
  char buf[200];
  for (std::size_t k = 0; k < frame.size(); ++k) {
    const Vec3& p = frame.points[k];
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", frame.ds * static_cast<double>(k), p.x,
                  p.y, p.z, frame.kappa[k].real(), frame.tau[k].real());
    os << buf;
  }
}

}  // namespace nhdnls
