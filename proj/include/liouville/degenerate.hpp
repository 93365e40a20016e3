// Directions with double Jacobi degeneracy: at a covector where
// b_j = b_{j-1} = f_j(x_{j,0}) the u-chart of the cotangent sphere breaks
// down and the pair of Jacobi fields Z_{j-1}, Z_j seeded by the nu-chart
//   2 nu_1 = b_j + b_{j-1} - 2 f_{j,0},
//   nu_2^2 = (b_{j-1} - f_{j,0})(f_{j,0} - b_j)
// takes over.  This header builds the nu-chart covectors, integrates the
// pair, locates their first common zero tau_1, and evaluates the phase
// function theta with theta(tau_1, 0) = 2 pi.
#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "liouville/geodesic.hpp"

namespace liouville {

struct PairChart {
  int j = 2;                      // math index, 2 <= j <= n-1
  BasePoint p0;
  std::vector<double> b_rest;     // b_k for k != j, j-1 (math order, slot k-1 unused entries skipped)
  std::vector<double> eps;        // section-6 sign of each xi_i at the base direction (i != j)
  double f_j0 = 0.0;

  // b_{j-1} and b_j displaced by nu.
  std::pair<double, double> pair_values(double nu1, double nu2) const {
    const double rho = std::hypot(nu1, nu2);
    return {f_j0 + nu1 + rho, f_j0 + nu1 - rho};  // (b_{j-1}, b_j)
  }
};

// Builds the chart from a boundary direction u0 (u0_j = +-pi/2 and
// u0_{j-1} in {0, pi} puts [u0] on dC_j^+ = dC_{j-1}^-); the remaining b_k
// and the eps signs are frozen at u0.
inline PairChart make_pair_chart(const Manifold& M, const BasePoint& p0, int j,
                                 const DirectionU& u0) {
  const int n = M.n();
  if (j < 2 || j > n - 1)
    throw NotApplicable("make_pair_chart: need 2 <= j <= n-1 (no boundary cells for n = 2)");
  PairChart ch;
  ch.j = j;
  ch.p0 = p0;
  ch.f_j0 = p0.f_values[j - 1];
  ch.b_rest.assign(n - 1, 0.0);
  for (int k = 1; k <= n - 1; ++k)
    ch.b_rest[k - 1] = b_of_u(p0, k, u0.u[k - 1]);
  ch.b_rest[j - 1] = ch.f_j0;
  ch.b_rest[j - 2] = ch.f_j0;
  ch.eps.assign(n + 1, 1.0);
  for (int i = 1; i <= n; ++i) {
    if (i == j) continue;
    double C;
    if (i == 1) C = std::cos(u0.u[0]);
    else if (i == n) C = std::sin(u0.u[n - 2]);
    else C = std::cos(u0.u[i - 1]) * std::sin(u0.u[i - 2]);
    ch.eps[i] = (C >= 0.0) ? 1.0 : -1.0;
  }
  return ch;
}

// xi(nu) in the chart; smooth in nu on a neighborhood of 0.
inline std::vector<double> pair_covector(const PairChart& ch, double nu1, double nu2) {
  const int n = static_cast<int>(ch.p0.x.size());
  const int j = ch.j;
  std::vector<double> xi(n, 0.0);
  for (int i = 1; i <= n; ++i) {
    const double fi0 = ch.p0.f_values[i - 1];
    double rest = 1.0;
    for (int k = 1; k <= n - 1; ++k) {
      if (k == j || k == j - 1) continue;
      rest *= std::abs(fi0 - ch.b_rest[k - 1]);
    }
    if (i == j) {
      xi[i - 1] = nu2 * std::sqrt(rest);
    } else {
      const double d = fi0 - ch.f_j0;
      const double D = d * d - 2.0 * d * nu1 - nu2 * nu2;
      xi[i - 1] = ch.eps[i] * std::sqrt(rest * std::max(0.0, D));
    }
  }
  return xi;
}

// d xi / d nu_k at nu = 0 (k = 1, 2).
inline std::vector<double> pair_covector_derivative(const PairChart& ch, int k) {
  const int n = static_cast<int>(ch.p0.x.size());
  const int j = ch.j;
  std::vector<double> d(n, 0.0);
  for (int i = 1; i <= n; ++i) {
    const double fi0 = ch.p0.f_values[i - 1];
    double rest = 1.0;
    for (int m = 1; m <= n - 1; ++m) {
      if (m == j || m == j - 1) continue;
      rest *= std::abs(fi0 - ch.b_rest[m - 1]);
    }
    if (i == j) {
      if (k == 2) d[i - 1] = std::sqrt(rest);
    } else if (k == 1) {
      const double s = (fi0 > ch.f_j0) ? 1.0 : -1.0;
      d[i - 1] = -ch.eps[i] * s * std::sqrt(rest);
    }
  }
  return d;
}

// Flow setup carrying the two pair variations (slots 0: Z_{j-1}, 1: Z_j)
// followed by the far-field scalar variations, plus parallel frames: slots
// 0,1 span the degenerate plane, the rest carry V_i for i != j, j-1.
struct PairSetup {
  FlowSetup flow;
  std::vector<int> far_index;  // math indices of trailing scalar slots
};

inline PairSetup setup_pair(const Manifold& M, const PairChart& ch, double nu1, double nu2) {
  const int n = M.n();
  PairSetup out;
  out.flow.state = PhaseState{ch.p0.x, pair_covector(ch, nu1, nu2)};
  const PointEval ev = M.eval_point(ch.p0.x, 0);
  auto normalized = [&](const std::vector<double>& dxi) {
    double n2 = 0.0;
    for (int m = 0; m < n; ++m) n2 += dxi[m] * dxi[m] / ev.g[m];
    const double nr = std::sqrt(n2);
    std::vector<double> v(n), V(n);
    for (int m = 0; m < n; ++m) {
      v[m] = dxi[m] / nr;
      V[m] = v[m] / ev.g[m];
    }
    return std::pair<std::vector<double>, std::vector<double>>{v, V};
  };
  const auto [d1, V1] = normalized(pair_covector_derivative(ch, 1));
  const auto [d2, V2] = normalized(pair_covector_derivative(ch, 2));
  out.flow.var_dxi0 = {d1, d2};
  out.flow.frame0 = {V1, V2};
  return out;
}

// ---------------------------------------------------------------------------
// Analysis of the pair fields at nu = 0.

struct DegeneratePairState {
  int j = 2;
  double nu1 = 0.0, nu2 = 0.0;
  double tau1 = 0.0;            // first common zero
  double z_jm1_norm = 0.0;      // |Z_{j-1}(tau1)|
  double z_j_norm = 0.0;        // |Z_j(tau1)|
  double gram_min = 0.0;        // min normalized Gram determinant on [0.1, 0.9] tau1
  double theta_tau1 = 0.0;      // theta(tau1, 0); 2 pi expected
};

// Normalized Gram determinant (sin^2 of the angle between the two fields).
inline double pair_gram(const GeodesicTrace& trace, double t) {
  const std::vector<double> xx = trace.x_at(t);
  const PointEval ev = trace.manifold().eval_point(xx, 0);
  double g11 = 0.0, g22 = 0.0, g12 = 0.0;
  for (int m = 0; m < trace.n(); ++m) {
    const double a = trace.var_dx(0, m, t), b = trace.var_dx(1, m, t);
    g11 += ev.g[m] * a * a;
    g22 += ev.g[m] * b * b;
    g12 += ev.g[m] * a * b;
  }
  const double denom = g11 * g22;
  return denom > 0.0 ? (g11 * g22 - g12 * g12) / denom : 0.0;
}

// theta(t, 0) for the nu = 0 geodesic: theta = -(1/A_1(f_j0)) sum_{i != j} U_i^0,
// each U_i^0 accumulated leg-by-leg in the lambda variable.
inline double pair_theta_at(const Manifold& M, const PairChart& ch, const GeodesicTrace& trace,
                            const EventData& ev, double t, double quad_tol = 1e-11) {
  const int n = M.n();
  const int j = ch.j;
  const AProfile& A = M.spec().profile;
  const std::vector<double>& a = M.spec().a;

  // A_1(f_j0) = sqrt((-1)^j prod_{k != j,j-1}(f_j0 - b_k)) A(f_j0)
  //             / (2 sqrt((-1)^j prod_l (f_j0 - a_l))).
  double rest = 1.0;
  for (int k = 1; k <= n - 1; ++k) {
    if (k == j || k == j - 1) continue;
    rest *= std::abs(ch.f_j0 - ch.b_rest[k - 1]);
  }
  double prod_a = 1.0;
  for (double av : a) prod_a *= std::abs(ch.f_j0 - av);
  const double A1 = std::sqrt(rest) * A.value(ch.f_j0) / (2.0 * std::sqrt(prod_a));

  double theta = 0.0;
  for (int i = 1; i <= n; ++i) {
    if (i == j) continue;
    std::vector<double> bounds{0.0};
    for (const TurningEvent& te : ev.turnings[i - 1])
      if (te.t > 1e-12 && te.t < t - 1e-12) bounds.push_back(te.t);
    bounds.push_back(t);
    for (std::size_t k = 0; k + 1 < bounds.size(); ++k) {
      const double fa = trace.f(i - 1, bounds[k]);
      const double fb = trace.f(i - 1, bounds[k + 1]);
      double lo = std::min(fa, fb), hi = std::max(fa, fb);
      if (!(hi - lo > 0.0)) continue;
      const double rl = trace.spectral.range_lo(i), rh = trace.spectral.range_hi(i);
      if (std::abs(lo - rl) < 1e-9 * M.spec().spread()) lo = rl;
      if (std::abs(hi - rh) < 1e-9 * M.spec().spread()) hi = rh;
      SqrtRatioIntegrand ig;
      for (int k2 = 1; k2 <= n - 1; ++k2) {
        if (k2 == j || k2 == j - 1) continue;
        ig.num_roots.push_back(ch.b_rest[k2 - 1]);
      }
      for (double av : a) ig.den_roots.push_back(av);
      ig.smooth = [&](double l) { return A.value(l) / (2.0 * std::abs(l - ch.f_j0)); };
      theta += sqrt_ratio_integral(ig, lo, hi, quad_tol);
    }
  }
  return theta / A1;
}

// Integrates the nu = 0 pair, finds tau_1, and assembles the signature data.
// Both Z fields are normalized to unit initial covariant derivative, so the
// criterion |Z(tau_1)| < tol is scale-free.
inline std::pair<DegeneratePairState, GeodesicTrace> degenerate_pair(
    const Manifold& M, const PairChart& ch, double horizon,
    const IntegrationOptions& opts = {}) {
  PairSetup setup = setup_pair(M, ch, 0.0, 0.0);
  GeodesicTrace trace = integrate_flow(M, setup.flow, horizon, opts);

  // tau_1: first zero of the projection of Z_j on its own transported seed
  // direction (a simple zero when the common-zero structure holds).
  std::optional<double> tau = first_zero(trace, 1, 1);
  int guard = 0;
  while (!tau && guard++ < 3) {
    extend_flow(trace, trace.t_end() * 1.7, opts);
    tau = first_zero(trace, 1, 1);
  }
  if (!tau) throw NotReached("degenerate_pair: no zero of Z_j within horizon");

  DegeneratePairState st;
  st.j = ch.j;
  st.tau1 = *tau;
  st.z_j_norm = trace.var_norm(1, st.tau1);
  st.z_jm1_norm = trace.var_norm(0, st.tau1);

  double gmin = std::numeric_limits<double>::infinity();
  for (int k = 0; k <= 64; ++k) {
    const double t = st.tau1 * (0.1 + 0.8 * k / 64.0);
    gmin = std::min(gmin, pair_gram(trace, t));
  }
  st.gram_min = gmin;

  const EventData ev = compute_events(trace);
  st.theta_tau1 = pair_theta_at(M, ch, trace, ev, st.tau1);
  return {std::move(st), std::move(trace)};
}

}  // namespace liouville
