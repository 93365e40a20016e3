// Hamiltonian geodesic flow in the (x, xi) chart of the covering torus,
// together with the linearized (variational) flow for Jacobi fields, the
// parallel frame V_i, and event extraction: turning times of each f_i, the
// total-variation clocks sigma_i with their half-period times t_i, the
// crossing sets S_i, and the Jacobi-field zeros r_i^k.
//
// State layout of the augmented ODE:
//   [ x (n) | xi (n) | per variation v: dx (n), dxi (n) | per frame vector: V (n) ]
// Variations evolve under the linearization of Hamilton's equations for
// E = 1/2 sum xi_m^2 / g_m; frame vectors are parallel transported.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "liouville/integrals.hpp"
#include "liouville/manifold.hpp"
#include "liouville/ode.hpp"
#include "liouville/quadrature.hpp"

namespace liouville {

class ConservationBreach : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class BranchLocusHit : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class NotReached : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class FrameDegenerate : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class NoCommonZero : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class NotApplicable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct IntegrationOptions {
  double rtol = 1e-12;
  double atol = 1e-13;
  double energy_drift_tol = 1e-10;
  double integral_drift_tol = 1e-8;
  double branch_tol_rel = 1e-9;  // pairwise |f_l - f_m| guard, relative to spread
  bool throw_on_breach = false;
};

// ---------------------------------------------------------------------------

class GeodesicTrace {
 public:
  GeodesicTrace(const Manifold& M, int n_var, int n_frame)
      : M_(&M), n_(M.n()), n_var_(n_var), n_frame_(n_frame), sol_(dim()) {}

  int n() const { return n_; }
  int n_var() const { return n_var_; }
  int n_frame() const { return n_frame_; }
  std::size_t dim() const {
    return static_cast<std::size_t>(2 * n_ + n_var_ * 2 * n_ + n_frame_ * n_);
  }
  const Manifold& manifold() const { return *M_; }
  const DenseSolution& solution() const { return sol_; }
  DenseSolution& solution() { return sol_; }
  double t_end() const { return sol_.t_end(); }

  // --- component accessors ------------------------------------------------
  double x(int i, double t) const { return sol_.eval_component(t, i); }
  double xi(int i, double t) const { return sol_.eval_component(t, n_ + i); }
  std::vector<double> x_at(double t) const {
    std::vector<double> v(n_);
    for (int i = 0; i < n_; ++i) v[i] = x(i, t);
    return v;
  }
  std::vector<double> xi_at(double t) const {
    std::vector<double> v(n_);
    for (int i = 0; i < n_; ++i) v[i] = xi(i, t);
    return v;
  }
  double f(int i, double t) const { return M_->f(i + 1, x(i, t)); }  // 0-based i
  double df_dt(int i, double t) const {
    return M_->f_prime(i + 1, x(i, t)) * sol_.eval_derivative_component(t, i);
  }
  std::size_t var_offset(int v) const { return 2 * n_ + v * 2 * n_; }
  std::size_t frame_offset(int w) const { return 2 * n_ + n_var_ * 2 * n_ + w * n_; }
  double var_dx(int v, int m, double t) const { return sol_.eval_component(t, var_offset(v) + m); }
  double var_dxi(int v, int m, double t) const {
    return sol_.eval_component(t, var_offset(v) + n_ + m);
  }
  double frame(int w, int m, double t) const {
    return sol_.eval_component(t, frame_offset(w) + m);
  }

  // Scalarized Jacobi field: y_v(t) = < Y_v(t), V_w(t) >_g.
  double y_scalar(int v, int w, double t) const {
    const std::vector<double> xx = x_at(t);
    const PointEval ev = M_->eval_point(xx, 0);
    double s = 0.0;
    for (int m = 0; m < n_; ++m) s += ev.g[m] * var_dx(v, m, t) * frame(w, m, t);
    return s;
  }

  // |Y_v(t)|_g and the norm of its component orthogonal to V_w(t).
  std::pair<double, double> var_norm_and_residual(int v, int w, double t) const {
    const std::vector<double> xx = x_at(t);
    const PointEval ev = M_->eval_point(xx, 0);
    double n2 = 0.0, proj = 0.0;
    for (int m = 0; m < n_; ++m) {
      n2 += ev.g[m] * var_dx(v, m, t) * var_dx(v, m, t);
      proj += ev.g[m] * var_dx(v, m, t) * frame(w, m, t);
    }
    const double orth2 = std::max(0.0, n2 - proj * proj);
    return {std::sqrt(n2), std::sqrt(orth2)};
  }

  double var_norm(int v, double t) const {
    const std::vector<double> xx = x_at(t);
    const PointEval ev = M_->eval_point(xx, 0);
    double n2 = 0.0;
    for (int m = 0; m < n_; ++m) n2 += ev.g[m] * var_dx(v, m, t) * var_dx(v, m, t);
    return std::sqrt(n2);
  }

  // --- bookkeeping ---------------------------------------------------------
  SpectralData spectral;
  std::vector<double> F0;          // first integrals at t = 0
  double max_drift_F = 0.0;        // max_j |F_j(t) - F_j(0)|
  double max_drift_E = 0.0;        // |2E(t) - 2E(0)|
  bool conservation_ok = true;
  bool branch_hit = false;
  std::string issue;

  // Sample times for scanning (step ends plus interior points).
  std::vector<double> sample_times(int per_step = 4) const {
    std::vector<double> ts;
    const std::vector<double>& t0s = sol_.step_times();
    ts.reserve(t0s.size() * per_step + 1);
    for (std::size_t s = 0; s < t0s.size(); ++s) {
      const double t1 = sol_.step_end(s);
      const double t0 = t0s[s];
      for (int k = 0; k < per_step; ++k) ts.push_back(t0 + (t1 - t0) * k / per_step);
    }
    ts.push_back(sol_.t_end());
    return ts;
  }

 private:
  const Manifold* M_;
  int n_, n_var_, n_frame_;
  DenseSolution sol_;
};

// ---------------------------------------------------------------------------
// Right-hand side of the augmented system.

namespace detail {

inline void flow_rhs(const Manifold& M, int n_var, int n_frame, const double* y, double* dy) {
  const int n = M.n();
  const int order = (n_var > 0 || n_frame > 0) ? 2 : 1;
  std::vector<double> xv(y, y + n);
  const PointEval ev = M.eval_point(xv, order);
  const double* xi = y + n;

  // base flow
  for (int m = 0; m < n; ++m) dy[m] = xi[m] / ev.g[m];
  for (int m = 0; m < n; ++m) {
    double s = 0.0;
    for (int k = 0; k < n; ++k) {
      const double gk = ev.g[k];
      s += xi[k] * xi[k] * ev.dg[k * n + m] / (gk * gk);
    }
    dy[n + m] = 0.5 * s;
  }

  // variations
  for (int v = 0; v < n_var; ++v) {
    const double* dx = y + 2 * n + v * 2 * n;
    const double* dxi = dx + n;
    double* ddx = dy + 2 * n + v * 2 * n;
    double* ddxi = ddx + n;
    for (int m = 0; m < n; ++m) {
      const double gm = ev.g[m];
      double s = dxi[m] / gm;
      for (int k = 0; k < n; ++k) s -= xi[m] / (gm * gm) * ev.dg[m * n + k] * dx[k];
      ddx[m] = s;
    }
    for (int m = 0; m < n; ++m) {
      double s = 0.0;
      for (int k = 0; k < n; ++k) {
        const double gk = ev.g[k];
        s += xi[k] * ev.dg[k * n + m] / (gk * gk) * dxi[k];
      }
      for (int l = 0; l < n; ++l) {
        double c = 0.0;
        for (int k = 0; k < n; ++k) {
          const double gk = ev.g[k];
          c += xi[k] * xi[k] *
               (ev.ddg[(k * n + m) * n + l] / (gk * gk) -
                2.0 * ev.dg[k * n + m] * ev.dg[k * n + l] / (gk * gk * gk));
        }
        s += 0.5 * c * dx[l];
      }
      ddxi[m] = s;
    }
  }

  // parallel transport of frame vectors
  for (int w = 0; w < n_frame; ++w) {
    const double* V = y + 2 * n + n_var * 2 * n + w * n;
    double* dV = dy + 2 * n + n_var * 2 * n + w * n;
    for (int m = 0; m < n; ++m) {
      const double gm = ev.g[m];
      double s = ev.dg[m * n + m] * dy[m] * V[m];
      for (int j = 0; j < n; ++j) {
        if (j == m) continue;
        s += ev.dg[m * n + j] * (dy[j] * V[m] + dy[m] * V[j]);
        s -= ev.dg[j * n + m] * dy[j] * V[j];
      }
      dV[m] = -s / (2.0 * gm);
    }
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Integration drivers

struct FlowSetup {
  PhaseState state;
  std::vector<std::vector<double>> var_dxi0;   // initial dxi of each variation (dx(0) = 0)
  std::vector<std::vector<double>> frame0;     // initial frame vectors
};

inline GeodesicTrace integrate_flow(const Manifold& M, const FlowSetup& setup, double T,
                                    const IntegrationOptions& opts = {}) {
  const int n = M.n();
  const int n_var = static_cast<int>(setup.var_dxi0.size());
  const int n_frame = static_cast<int>(setup.frame0.size());
  GeodesicTrace trace(M, n_var, n_frame);
  trace.spectral = spectral_from_phase(M, setup.state);
  trace.F0 = first_integrals(M, setup.state);

  std::vector<double> y0(trace.dim(), 0.0);
  for (int i = 0; i < n; ++i) y0[i] = setup.state.x[i];
  for (int i = 0; i < n; ++i) y0[n + i] = setup.state.xi[i];
  for (int v = 0; v < n_var; ++v)
    for (int i = 0; i < n; ++i) y0[trace.var_offset(v) + n + i] = setup.var_dxi0[v][i];
  for (int w = 0; w < n_frame; ++w)
    for (int i = 0; i < n; ++i) y0[trace.frame_offset(w) + i] = setup.frame0[w][i];

  auto rhs = [&M, n_var, n_frame](double, const double* y, double* dy) {
    detail::flow_rhs(M, n_var, n_frame, y, dy);
  };
  const double branch_tol = opts.branch_tol_rel * M.spec().spread();
  auto guard = [&](double, const double* y) {
    std::vector<double> xv(y, y + n);
    std::vector<double> xiv(y + n, y + 2 * n);
    const PointEval ev = M.eval_point(xv, 0);
    for (int l = 0; l < n; ++l)
      for (int m = l + 1; m < n; ++m)
        if (std::abs(ev.f[l] - ev.f[m]) < branch_tol) {
          trace.branch_hit = true;
          trace.issue = "branch locus approach";
          return false;
        }
    const std::vector<double> F = first_integrals(M, {xv, xiv});
    for (int j = 0; j + 1 < n; ++j)
      trace.max_drift_F = std::max(trace.max_drift_F, std::abs(F[j] - trace.F0[j]));
    trace.max_drift_E = std::max(trace.max_drift_E, std::abs(F[n - 1] - trace.F0[n - 1]));
    if (trace.max_drift_F > opts.integral_drift_tol ||
        trace.max_drift_E > opts.energy_drift_tol) {
      trace.conservation_ok = false;
      trace.issue = "conservation drift exceeded tolerance";
      return false;
    }
    return true;
  };

  OdeOptions oo;
  oo.rtol = opts.rtol;
  oo.atol = opts.atol;
  DormandPrince5 stepper(oo);
  trace.solution() = stepper.integrate(rhs, y0, 0.0, T, guard);
  if (!trace.conservation_ok && opts.throw_on_breach)
    throw ConservationBreach("integrate_flow: " + trace.issue);
  if (trace.branch_hit && opts.throw_on_breach)
    throw BranchLocusHit("integrate_flow: " + trace.issue);
  return trace;
}

inline void extend_flow(GeodesicTrace& trace, double T_new, const IntegrationOptions& opts = {}) {
  const Manifold& M = trace.manifold();
  const int n_var = trace.n_var(), n_frame = trace.n_frame();
  auto rhs = [&M, n_var, n_frame](double, const double* y, double* dy) {
    detail::flow_rhs(M, n_var, n_frame, y, dy);
  };
  const int n = M.n();
  const double branch_tol = opts.branch_tol_rel * M.spec().spread();
  auto guard = [&](double, const double* y) {
    std::vector<double> xv(y, y + n), xiv(y + n, y + 2 * n);
    const PointEval ev = M.eval_point(xv, 0);
    for (int l = 0; l < n; ++l)
      for (int m = l + 1; m < n; ++m)
        if (std::abs(ev.f[l] - ev.f[m]) < branch_tol) {
          trace.branch_hit = true;
          return false;
        }
    const std::vector<double> F = first_integrals(M, {xv, xiv});
    for (int j = 0; j + 1 < n; ++j)
      trace.max_drift_F = std::max(trace.max_drift_F, std::abs(F[j] - trace.F0[j]));
    trace.max_drift_E = std::max(trace.max_drift_E, std::abs(F[n - 1] - trace.F0[n - 1]));
    if (trace.max_drift_F > opts.integral_drift_tol || trace.max_drift_E > opts.energy_drift_tol) {
      trace.conservation_ok = false;
      return false;
    }
    return true;
  };
  OdeOptions oo;
  oo.rtol = opts.rtol;
  oo.atol = opts.atol;
  DormandPrince5 stepper(oo);
  stepper.extend(rhs, trace.solution(), T_new, guard);
}

inline GeodesicTrace integrate_geodesic(const Manifold& M, const PhaseState& s0, double T,
                                        const IntegrationOptions& opts = {}) {
  FlowSetup setup;
  setup.state = s0;
  return integrate_flow(M, setup, T, opts);
}

// ---------------------------------------------------------------------------
// Jacobi setup from the u-chart.  Initial data: Y_i(0) = 0, Y_i'(0) = V_i(0)
// with V_i(0) the normalized sharp of d xi / d u_i; the same frame vectors
// seed the parallel transport.

struct JacobiSetup {
  FlowSetup flow;
  std::vector<int> scalar_index;  // math index i of each variation/frame slot
};

inline JacobiSetup setup_from_direction(const Manifold& M, const BasePoint& p0,
                                        const DirectionU& dir, double degenerate_tol = 1e-12) {
  const int n = M.n();
  const CovectorU cv = covector_from_u(p0, dir);
  const PointEval ev = M.eval_point(p0.x, 0);
  JacobiSetup out;
  out.flow.state = PhaseState{p0.x, cv.xi};
  for (int i = 1; i <= n - 1; ++i) {
    // sharp and norm of d xi / d u_i
    double norm2 = 0.0;
    for (int m = 0; m < n; ++m) {
      const double d = cv.dxi_du[m * (n - 1) + (i - 1)];
      norm2 += d * d / ev.g[m];
    }
    const double norm = std::sqrt(norm2);
    if (norm < degenerate_tol)
      throw FrameDegenerate("setup_from_direction: direction lies on a boundary cell dC_i^+-");
    std::vector<double> dxi0(n), V0(n);
    for (int m = 0; m < n; ++m) {
      dxi0[m] = cv.dxi_du[m * (n - 1) + (i - 1)] / norm;
      V0[m] = dxi0[m] / ev.g[m];
    }
    out.flow.var_dxi0.push_back(dxi0);
    out.flow.frame0.push_back(V0);
    out.scalar_index.push_back(i);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Event extraction

struct TurningEvent {
  double t;
  double f_value;
  bool lower;   // hit of the lower range end a_i^+ (else upper a_{i-1}^-)
  bool b_type;  // endpoint equals a b-constant (xi_i vanishes there)
};

struct EventData {
  // Per coordinate (0-based): turning times, ordered.
  std::vector<std::vector<TurningEvent>> turnings;
  // t_i (math index i = 1..n at slot i-1); NaN when not reached/undefined.
  std::vector<double> t_half;
  // S_i crossing times (math i = 1..n-1 at slot i-1); flag for 0 in S_i.
  std::vector<std::vector<double>> s_times;
  std::vector<bool> zero_in_S;
};

namespace detail {

// Scan a scalar function of t over the trace samples and refine sign changes.
inline std::vector<double> scan_zeros(const std::function<double(double)>& fn,
                                      const std::vector<double>& ts, double xtol) {
  std::vector<double> zs;
  double prev_t = ts.front(), prev_v = fn(prev_t);
  for (std::size_t k = 1; k < ts.size(); ++k) {
    const double t = ts[k], v = fn(t);
    if (prev_v == 0.0) {
      zs.push_back(prev_t);
    } else if ((prev_v > 0.0) != (v > 0.0)) {
      zs.push_back(bisect_root(fn, prev_t, t, xtol));
    }
    prev_t = t;
    prev_v = v;
  }
  return zs;
}

}  // namespace detail

inline EventData compute_events(const GeodesicTrace& trace) {
  const Manifold& M = trace.manifold();
  const int n = M.n();
  const SpectralData& sd = trace.spectral;
  EventData ev;
  ev.turnings.resize(n);
  ev.t_half.assign(n, std::numeric_limits<double>::quiet_NaN());
  ev.s_times.resize(std::max(0, n - 1));
  ev.zero_in_S.assign(std::max(0, n - 1), false);

  const std::vector<double> ts = trace.sample_times();
  const double T = trace.t_end();
  const double xtol = 1e-12 * std::max(1.0, T);

  for (int i = 0; i < n; ++i) {
    const int mi = i + 1;  // math index
    const double lo = sd.range_lo(mi), hi = sd.range_hi(mi);
    const double width = hi - lo;
    if (!(width > 1e-12 * M.spec().spread())) continue;  // frozen coordinate
    auto w_fn = [&](double t) {
      return M.f_prime(mi, trace.x(i, t)) * trace.xi(i, t);
    };
    std::vector<double> zs = detail::scan_zeros(w_fn, ts, xtol);
    // de-duplicate and classify
    for (double z : zs) {
      if (!ev.turnings[i].empty() && z - ev.turnings[i].back().t < 1e-9 * std::max(1.0, T))
        continue;
      TurningEvent te;
      te.t = z;
      te.f_value = trace.f(i, z);
      te.lower = std::abs(te.f_value - lo) < std::abs(te.f_value - hi);
      if (te.lower) {
        te.b_type = (mi <= n - 1) && sd.b_upper(mi);  // a_i^+ == b_i
      } else {
        te.b_type = (mi >= 2) && !sd.b_upper(mi - 1);  // a_{i-1}^- == b_{i-1}
      }
      ev.turnings[i].push_back(te);
    }

    // sigma_i legs and t_i: sigma(t_i) = 2 * width.
    std::vector<double> leg_bounds{0.0};
    for (const TurningEvent& te : ev.turnings[i])
      if (te.t > 1e-12) leg_bounds.push_back(te.t);
    leg_bounds.push_back(T);
    double cum = 0.0;
    const double target = 2.0 * width;
    for (std::size_t k = 0; k + 1 < leg_bounds.size() && std::isnan(ev.t_half[i]); ++k) {
      const double ta = leg_bounds[k], tb = leg_bounds[k + 1];
      const double fa = trace.f(i, ta), fb = trace.f(i, tb);
      const double var = std::abs(fb - fa);
      if (cum + var >= target) {
        const double remaining = target - cum;
        const double f_target = fa + (fb > fa ? remaining : -remaining);
        auto fn = [&](double t) { return trace.f(i, t) - f_target; };
        ev.t_half[i] = (std::abs(fn(ta)) < 1e-15) ? ta : bisect_root(fn, ta, tb, xtol);
      }
      cum += var;
    }
  }

  // S_i: crossings of f_i = b_i (b_i = a_i^+) or f_{i+1} = b_i (b_i = a_i^-).
  for (int i = 1; i <= n - 1; ++i) {
    if (sd.b_degenerate(i)) continue;
    const bool upper = sd.b_upper(i);
    const int coord = upper ? (i - 1) : i;  // 0-based coordinate to watch
    const bool want_lower_hits = upper;     // f_i meets b_i at its lower end
    for (const TurningEvent& te : ev.turnings[coord]) {
      if (te.b_type && te.lower == want_lower_hits) ev.s_times[i - 1].push_back(te.t);
    }
    // 0 in S_i when the start sits at the crossing value.
    const double f_start = trace.f(coord, 0.0);
    const double bv = sd.b[i - 1];
    if (std::abs(f_start - bv) < 1e-9 * M.spec().spread()) {
      ev.zero_in_S[i - 1] = true;
      // drop a duplicated event at t ~ 0
      while (!ev.s_times[i - 1].empty() && ev.s_times[i - 1].front() < 1e-9)
        ev.s_times[i - 1].erase(ev.s_times[i - 1].begin());
    }
  }
  return ev;
}

// ---------------------------------------------------------------------------
// Jacobi-field zeros

struct ZeroList {
  std::vector<double> zeros;
  std::vector<double> slopes;  // dy/dt at each zero
};

// Zeros of the scalarized field y_v (projected on frame slot w), with slope
// diagnostics; a zero with |slope| below slope_tol signals proximity to a
// boundary cell (DoubleZeroSuspected upstream).
inline ZeroList find_zeros(const GeodesicTrace& trace, int v, int w, double t_from, double t_to,
                           std::size_t max_count = 1000) {
  auto fn = [&](double t) { return trace.y_scalar(v, w, t); };
  std::vector<double> ts = trace.sample_times();
  ts.erase(std::remove_if(ts.begin(), ts.end(),
                          [&](double t) { return t < t_from || t > t_to; }),
           ts.end());
  if (ts.empty() || ts.front() > t_from) ts.insert(ts.begin(), t_from);
  if (ts.back() < t_to) ts.push_back(t_to);
  ZeroList out;
  double prev_t = ts.front(), prev_v = fn(prev_t);
  for (std::size_t k = 1; k < ts.size() && out.zeros.size() < max_count; ++k) {
    const double t = ts[k], vv = fn(t);
    if ((prev_v > 0.0) != (vv > 0.0) && prev_v != 0.0) {
      const double z = bisect_root(fn, prev_t, t, 1e-11 * std::max(1.0, t_to));
      const double h = 1e-6 * std::max(1.0, z);
      out.zeros.push_back(z);
      out.slopes.push_back((fn(std::min(z + h, t_to)) - fn(std::max(z - h, t_from))) /
                           (std::min(z + h, t_to) - std::max(z - h, t_from)));
    }
    prev_t = t;
    prev_v = vv;
  }
  return out;
}

// First zero of y_v after t0 (skipping the trivial zero at t = 0).
inline std::optional<double> first_zero(const GeodesicTrace& trace, int v, int w,
                                        double t_skip = 1e-6) {
  const ZeroList zl = find_zeros(trace, v, w, t_skip, trace.t_end(), 1);
  if (zl.zeros.empty()) return std::nullopt;
  return zl.zeros.front();
}

// ---------------------------------------------------------------------------
// Frame diagnostics: agreement of the transported frame with the normalized
// projection of the Hamiltonian fields X_{H_i}, where defined.

// Components of pi_* X_{H_i} at a phase point, for all i (rows i = 1..n-1).
inline std::vector<double> xh_projections(const Manifold& M, const PhaseState& s,
                                          const SpectralData& sd) {
  const int n = M.n();
  const std::vector<double>& a = M.spec().a;
  const PointEval ev = M.eval_point(s.x, 0);
  const std::vector<double> B = b_coefficient_matrix(M, s.x);
  const std::vector<double> Binv = invert_matrix(B, n);
  // dF_j / dxi_m = 2 Binv[j][m] xi_m ; d(2E)/dxi_m = 2 xi_m / g_m.
  std::vector<double> out((n - 1) * n, 0.0);
  const double e2 = 1.0;  // unit bundle
  for (int i = 1; i <= n - 1; ++i) {
    double dtheta = -e2;
    for (int l = 1; l <= n - 1; ++l)
      if (l != i) dtheta *= (sd.b[i - 1] - sd.b[l - 1]);
    for (int m = 0; m < n; ++m) {
      // dTheta/dxi_m at lambda = b_i
      double s_acc = 0.0;
      for (int j = 1; j <= n - 1; ++j) {
        double Pj = 1.0;
        for (int k = 1; k <= n - 1; ++k)
          if (k != j) Pj *= (sd.b[i - 1] - a[k]);
        s_acc += Pj * 2.0 * Binv[(j - 1) * n + m] * s.xi[m];
      }
      double P = 1.0;
      for (int k = 1; k <= n - 1; ++k) P *= (sd.b[i - 1] - a[k]);
      s_acc -= P * 2.0 * s.xi[m] / ev.g[m];
      out[(i - 1) * n + m] = -s_acc / dtheta;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Asymptotic accumulation of conjugate points toward the Lagrange-torus
// boundary: the sequence |x_i(r_i^k) - x_i(s_i^k)|, k = 1..K.

inline std::vector<double> accumulation_sequence(const GeodesicTrace& trace, const EventData& ev,
                                                 const ZeroList& zeros, int i_math, int K) {
  const SpectralData& sd = trace.spectral;
  if (sd.b_degenerate(i_math) || sd.any_degenerate())
    throw NotApplicable("accumulation_sequence: b degenerate with the spectrum");
  // Coordinate whose crossings define S_i: x_i when b_i = a_i^+, else x_{i+1}.
  const int coord = sd.b_upper(i_math) ? (i_math - 1) : i_math;
  const std::vector<double>& s_list = ev.s_times[i_math - 1];
  if (static_cast<int>(zeros.zeros.size()) < K || static_cast<int>(s_list.size()) < K)
    throw NotReached("accumulation_sequence: horizon too short for requested K");
  std::vector<double> seq;
  for (int k = 0; k < K; ++k) {
    // s_i^k < r_i^k by the interleaving; measure the chart gap.
    const double xr = trace.x(coord, zeros.zeros[k]);
    const double xs = trace.x(coord, s_list[k]);
    seq.push_back(std::abs(xr - xs));
  }
  return seq;
}

// ---------------------------------------------------------------------------
// Quadrature form of the orbit equations along a trace: for G of degree
// <= n-2 the signed sum of leg integrals vanishes; for monic G of degree n-1
// (arclength form) it equals t - s.  Legs are the monotone pieces of each
// f_i, converted to lambda integrals with the endpoint substitutions.

struct OrbitCheckResult {
  double value = 0.0;
  double expected = 0.0;
  double residual() const { return value - expected; }
};

inline OrbitCheckResult orbit_quadrature_check(const GeodesicTrace& trace, const EventData& ev,
                                               double t_from, double t_to,
                                               const std::vector<double>& G_coeffs, bool monic_form,
                                               double quad_tol = 1e-10) {
  const Manifold& M = trace.manifold();
  const int n = M.n();
  const SpectralData& sd = trace.spectral;
  const AProfile& A = M.spec().profile;

  auto G = [&G_coeffs](double l) {
    double s = 0.0;
    for (std::size_t k = G_coeffs.size(); k-- > 0;) s = s * l + G_coeffs[k];
    return s;
  };

  double total = 0.0;
  for (int i = 1; i <= n; ++i) {
    // Monotone legs of f_i within [t_from, t_to].
    std::vector<double> bounds{t_from};
    for (const TurningEvent& te : ev.turnings[i - 1])
      if (te.t > t_from + 1e-12 && te.t < t_to - 1e-12) bounds.push_back(te.t);
    bounds.push_back(t_to);

    // sign factor: (-1)^i for the closed form, (-1)^{i+1} for arclength.
    double sgn = (i % 2 == 0) ? 1.0 : -1.0;
    if (monic_form) sgn = -sgn;

    for (std::size_t k = 0; k + 1 < bounds.size(); ++k) {
      const double fa = trace.f(i - 1, bounds[k]);
      const double fb = trace.f(i - 1, bounds[k + 1]);
      double lo = std::min(fa, fb), hi = std::max(fa, fb);
      if (!(hi - lo > 0.0)) continue;
      // Snap to the exact range endpoints so root anchoring cancels exactly.
      const double rl = sd.range_lo(i), rh = sd.range_hi(i);
      if (std::abs(lo - rl) < 1e-9 * M.spec().spread()) lo = rl;
      if (std::abs(hi - rh) < 1e-9 * M.spec().spread()) hi = rh;

      SqrtRatioIntegrand ig;
      for (double r : M.spec().a) ig.den_roots.push_back(r);
      for (double r : sd.b) ig.den_roots.push_back(r);
      ig.smooth = [&](double l) { return 0.5 * G(l) * A.value(l); };
      total += sgn * sqrt_ratio_integral(ig, lo, hi, quad_tol);
    }
  }
  OrbitCheckResult out;
  out.value = total;
  out.expected = monic_form ? (t_to - t_from) : 0.0;
  return out;
}

}  // namespace liouville
