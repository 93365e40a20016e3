// The commuting first integrals F_1, ..., F_{n-1}, F_n = 2E, the spectral
// constants b_1 >= ... >= b_{n-1} (roots of Theta), and the torus chart
// u in (R/2piZ)^{n-1} of the unit cotangent sphere at a base point.
//
// Conventions (math indices i = 1..n, j/k = 1..n-1):
//   sum_j b_ij(x_i) F_j = xi_i^2,   b_ij = (-1)^i prod_{k != j} (f_i - a_k),
//                                   b_in = (-1)^{i+1} prod_k (f_i - a_k)
//   Theta(l) = sum_j c_j prod_{k != j} (l - a_k) - 2E prod_k (l - a_k)
//            = -2E prod_i (l - b_i)
//   xi_i = eps_i sqrt((-1)^{i-1} prod_k (f_{i,0} - b_k(u_k))),
//   b_k(u_k) = f_{k+1,0} cos^2 u_k + f_{k,0} sin^2 u_k.
// The products over k in b_ij and Theta range over the inner spectrum
// a_1..a_{n-1} only.
#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "liouville/manifold.hpp"

namespace liouville {

class ComplexRoots : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PhaseState {
  std::vector<double> x;
  std::vector<double> xi;
};

// --------------------------------------------------------------------------
// First integrals

// Row-major n x n matrix B with B[i][j] = b_{i+1, j+1}(x_i).
inline std::vector<double> b_coefficient_matrix(const Manifold& M, const std::vector<double>& x) {
  const int n = M.n();
  const std::vector<double>& a = M.spec().a;
  std::vector<double> B(n * n, 0.0);
  for (int i = 1; i <= n; ++i) {
    const double fi = M.f(i, x[i - 1]);
    const double sgn = (i % 2 == 0) ? 1.0 : -1.0;  // (-1)^i
    for (int j = 1; j <= n - 1; ++j) {
      double p = sgn;
      for (int k = 1; k <= n - 1; ++k)
        if (k != j) p *= (fi - a[k]);
      B[(i - 1) * n + (j - 1)] = p;
    }
    double p = -sgn;  // (-1)^{i+1}
    for (int k = 1; k <= n - 1; ++k) p *= (fi - a[k]);
    B[(i - 1) * n + (n - 1)] = p;
  }
  return B;
}

// (F_1, ..., F_{n-1}, 2E) by the explicit inverse-matrix formula.
inline std::vector<double> first_integrals(const Manifold& M, const PhaseState& s) {
  const int n = M.n();
  const std::vector<double>& a = M.spec().a;
  const PointEval ev = M.eval_point(s.x, 0);
  std::vector<double> F(n, 0.0);
  for (int j = 1; j <= n - 1; ++j) {
    double denom = 1.0;
    for (int k = 1; k <= n - 1; ++k)
      if (k != j) denom *= (a[k] - a[j]);
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      double num = 1.0;
      for (int l = 0; l < n; ++l)
        if (l != i) num *= (ev.f[l] - a[j]);
      acc += num * s.xi[i] * s.xi[i] / ev.g[i];
    }
    F[j - 1] = acc / denom;
  }
  double e2 = 0.0;
  for (int i = 0; i < n; ++i) e2 += s.xi[i] * s.xi[i] / ev.g[i];
  F[n - 1] = e2;
  return F;
}

// --------------------------------------------------------------------------
// Spectral data

struct SpectralData {
  std::vector<double> b;  // descending, length n-1
  std::vector<double> c;  // corresponding c_j values (2E normalized to 1)
  std::vector<double> a;  // copy of the spectrum for range queries
  double degenerate_tol = 0.0;

  int n() const { return static_cast<int>(a.size()) - 1; }

  // a_i^+ = max(a_i, b_i) for 1 <= i <= n-1, a_n^+ = a_n.
  double a_plus(int i) const {
    if (i == n()) return a[n()];
    return std::max(a[i], b[i - 1]);
  }
  // a_i^- = min(a_i, b_i) for 1 <= i <= n-1, a_0^- = a_0.
  double a_minus(int i) const {
    if (i == 0) return a[0];
    return std::min(a[i], b[i - 1]);
  }
  // Oscillation range of f_i along the orbit.
  double range_lo(int i) const { return a_plus(i); }
  double range_hi(int i) const { return a_minus(i - 1); }

  // b_i == a_i within tolerance: geodesic tangent to N_i (excluded upstream).
  bool b_degenerate(int i) const { return std::abs(b[i - 1] - a[i]) < degenerate_tol; }
  bool any_degenerate() const {
    for (int i = 1; i <= n() - 1; ++i)
      if (b_degenerate(i)) return true;
    return false;
  }
  bool b_upper(int i) const { return b[i - 1] > a[i]; }  // b_i = a_i^+
};

inline double theta_eval(const std::vector<double>& a, const std::vector<double>& c, double l) {
  const int n = static_cast<int>(a.size()) - 1;
  double s = 0.0;
  for (int j = 1; j <= n - 1; ++j) {
    double p = c[j - 1];
    for (int k = 1; k <= n - 1; ++k)
      if (k != j) p *= (l - a[k]);
    s += p;
  }
  double p = 1.0;
  for (int k = 1; k <= n - 1; ++k) p *= (l - a[k]);
  return s - p;
}

inline std::vector<double> c_from_b(const std::vector<double>& a, const std::vector<double>& b) {
  const int n = static_cast<int>(a.size()) - 1;
  std::vector<double> c(n - 1);
  for (int i = 1; i <= n - 1; ++i) {
    double num = -1.0, den = 1.0;
    for (int l = 1; l <= n - 1; ++l) num *= (a[i] - b[l - 1]);
    for (int k = 1; k <= n - 1; ++k)
      if (k != i) den *= (a[i] - a[k]);
    c[i - 1] = num / den;
  }
  return c;
}

// Roots of Theta from c, using the interlacing brackets f_{i+1} <= b_i <= f_i
// when a phase point is available, else monomial expansion + the all-real
// root recursion over [a_n, a_0].
inline std::vector<double> theta_roots(const std::vector<double>& a, const std::vector<double>& c,
                                       const std::vector<double>* f_brackets = nullptr) {
  const int n = static_cast<int>(a.size()) - 1;
  std::vector<double> roots;
  if (f_brackets) {
    const std::vector<double>& f = *f_brackets;  // f_1 >= ... >= f_n
    for (int i = 1; i <= n - 1; ++i) {
      const double lo = f[i], hi = f[i - 1];
      const double tlo = theta_eval(a, c, lo), thi = theta_eval(a, c, hi);
      const double scale = std::max({std::abs(tlo), std::abs(thi), 1e-300});
      if (std::abs(tlo) < 1e-11 * scale && std::abs(thi) >= 1e-11 * scale) {
        roots.push_back(lo);
      } else if (std::abs(thi) < 1e-11 * scale && std::abs(tlo) >= 1e-11 * scale) {
        roots.push_back(hi);
      } else if ((tlo > 0) != (thi > 0)) {
        roots.push_back(bisect_root([&](double l) { return theta_eval(a, c, l); }, lo, hi,
                                    1e-14 * (a.front() - a.back())));
      } else if (std::abs(tlo) < 1e-11 * scale && std::abs(thi) < 1e-11 * scale) {
        roots.push_back(0.5 * (lo + hi));  // doubly tangent cell corner
      } else {
        throw ComplexRoots("theta_roots: no bracketed root; F outside the unit-bundle image");
      }
    }
    std::sort(roots.begin(), roots.end(), std::greater<double>());
    return roots;
  }
  // Monomial expansion of Theta (degree n-1).
  std::vector<double> poly(n, 0.0);
  auto mul_linear = [](std::vector<double> p, double root) {
    std::vector<double> q(p.size() + 1, 0.0);
    for (std::size_t k = 0; k < p.size(); ++k) {
      q[k] -= root * p[k];
      q[k + 1] += p[k];
    }
    return q;  // multiply by (l - root)
  };
  for (int j = 1; j <= n - 1; ++j) {
    std::vector<double> part{c[j - 1]};
    for (int k = 1; k <= n - 1; ++k)
      if (k != j) part = mul_linear(std::move(part), a[k]);
    part.resize(n, 0.0);
    for (int k = 0; k < n; ++k) poly[k] += part[k];
  }
  std::vector<double> full{1.0};
  for (int k = 1; k <= n - 1; ++k) full = mul_linear(std::move(full), a[k]);
  for (int k = 0; k < n; ++k) poly[k] -= full[k];
  const double margin = 1e-9 * (a.front() - a.back());
  roots = real_roots_all_real(poly, a.back() - margin, a.front() + margin);
  if (static_cast<int>(roots.size()) != n - 1)
    throw ComplexRoots("theta_roots: expected n-1 real roots in [a_n, a_0]");
  std::sort(roots.begin(), roots.end(), std::greater<double>());
  return roots;
}

inline SpectralData spectral_from_phase(const Manifold& M, const PhaseState& s,
                                        double degenerate_tol_rel = 1e-9) {
  std::vector<double> F = first_integrals(M, s);
  const double e2 = F.back();
  SpectralData sd;
  sd.a = M.spec().a;
  sd.degenerate_tol = degenerate_tol_rel * M.spec().spread();
  sd.c.assign(F.begin(), F.end() - 1);
  for (double& v : sd.c) v /= e2;
  std::vector<double> f(M.n());
  for (int i = 0; i < M.n(); ++i) f[i] = M.f(i + 1, s.x[i]);
  sd.b = theta_roots(sd.a, sd.c, &f);
  return sd;
}

inline SpectralData spectral_from_b(const Manifold& M, std::vector<double> b,
                                    double degenerate_tol_rel = 1e-9) {
  SpectralData sd;
  sd.a = M.spec().a;
  sd.degenerate_tol = degenerate_tol_rel * M.spec().spread();
  sd.b = std::move(b);
  sd.c = c_from_b(sd.a, sd.b);
  return sd;
}

// --------------------------------------------------------------------------
// The u-chart of the unit cotangent sphere at a general base point.

struct DirectionU {
  std::vector<double> u;  // n-1 angles
};

// b_k(u_k), math k = 1..n-1.
inline double b_of_u(const BasePoint& p0, int k, double uk) {
  const double cu = std::cos(uk), su = std::sin(uk);
  return p0.f_values[k] * cu * cu + p0.f_values[k - 1] * su * su;
}

inline std::vector<double> b_values_of_u(const BasePoint& p0, const DirectionU& dir) {
  const int n = static_cast<int>(p0.x.size());
  std::vector<double> b(n - 1);
  for (int k = 1; k <= n - 1; ++k) b[k - 1] = b_of_u(p0, k, dir.u[k - 1]);
  return b;
}

// The covector xi(u) at p0 in the smooth factored form
//   xi_i = C_i(u) sqrt(P_i(u)),
// where C_1 = cos u_1, C_i = cos u_i sin u_{i-1}, C_n = sin u_{n-1}, and P_i
// collects the non-vanishing factors.  This reproduces the paper's
// eps_i-sign convention and is smooth across the cells C_k^+-.
struct CovectorU {
  std::vector<double> xi;       // length n
  std::vector<double> dxi_du;   // row-major: dxi_du[m*(n-1) + j] = d xi_{m+1} / d u_{j+1}
};

inline CovectorU covector_from_u(const BasePoint& p0, const DirectionU& dir) {
  const int n = static_cast<int>(p0.x.size());
  const std::vector<double>& f0 = p0.f_values;
  std::vector<double> b(n - 1);
  for (int k = 1; k <= n - 1; ++k) b[k - 1] = b_of_u(p0, k, dir.u[k - 1]);

  CovectorU out;
  out.xi.assign(n, 0.0);
  out.dxi_du.assign(n * (n - 1), 0.0);

  for (int i = 1; i <= n; ++i) {
    double P = 1.0;
    if (i <= n - 1) P *= (f0[i - 1] - f0[i]);          // |f_{i,0} - b_i| / cos^2 u_i
    if (i >= 2) P *= (f0[i - 2] - f0[i - 1]);          // |f_{i,0} - b_{i-1}| / sin^2 u_{i-1}
    for (int k = 1; k <= n - 1; ++k) {
      if (k == i || k == i - 1) continue;
      P *= std::abs(f0[i - 1] - b[k - 1]);
    }
    const double sqP = std::sqrt(P);
    double C = 1.0, dC_dui = 0.0, dC_duim1 = 0.0;
    if (i == 1) {
      C = std::cos(dir.u[0]);
      dC_dui = -std::sin(dir.u[0]);
    } else if (i == n) {
      C = std::sin(dir.u[n - 2]);
      dC_duim1 = std::cos(dir.u[n - 2]);
    } else {
      const double cu = std::cos(dir.u[i - 1]), sp = std::sin(dir.u[i - 2]);
      C = cu * sp;
      dC_dui = -std::sin(dir.u[i - 1]) * sp;
      dC_duim1 = cu * std::cos(dir.u[i - 2]);
    }
    out.xi[i - 1] = C * sqP;
    for (int j = 1; j <= n - 1; ++j) {
      double d = 0.0;
      if (j == i && i <= n - 1) d = dC_dui * sqP;
      else if (j == i - 1 && i >= 2) d = dC_duim1 * sqP;
      else {
        const double dbj = std::sin(2.0 * dir.u[j - 1]) * (f0[j - 1] - f0[j]);
        d = out.xi[i - 1] * (-dbj) / (2.0 * (f0[i - 1] - b[j - 1]));
      }
      out.dxi_du[(i - 1) * (n - 1) + (j - 1)] = d;
    }
  }
  return out;
}

inline PhaseState phase_from_u(const BasePoint& p0, const DirectionU& dir) {
  return PhaseState{p0.x, covector_from_u(p0, dir).xi};
}

// --------------------------------------------------------------------------
// Cell classification on the unit cotangent sphere

struct CellClassification {
  std::vector<int> minus_cells;                 // k with [u] in C_k^-
  std::vector<int> plus_cells;                  // k with [u] in C_k^+
  std::vector<int> boundary_pairs;              // k with b_k = b_{k-1}  (dC_k^+ = dC_{k-1}^-)
  bool interior() const {
    return minus_cells.empty() && plus_cells.empty() && boundary_pairs.empty();
  }
};

inline CellClassification classify_cell(const BasePoint& p0, const DirectionU& dir,
                                        double tol = 1e-9) {
  const int n = static_cast<int>(p0.x.size());
  CellClassification out;
  std::vector<double> b = b_values_of_u(p0, dir);
  for (int k = 1; k <= n - 1; ++k) {
    const double width = p0.f_values[k - 1] - p0.f_values[k];
    if (std::abs(b[k - 1] - p0.f_values[k]) < tol * width) out.minus_cells.push_back(k);
    if (std::abs(b[k - 1] - p0.f_values[k - 1]) < tol * width) out.plus_cells.push_back(k);
  }
  for (int k = 2; k <= n - 1; ++k) {
    const double scale = p0.f_values[0] - p0.f_values[n - 1];
    if (std::abs(b[k - 1] - b[k - 2]) < tol * scale) out.boundary_pairs.push_back(k);
  }
  return out;
}

// Euclidean coordinates on T_{p0}M of the unit tangent vector sharp(xi):
// v~_m = xi_m / sqrt(g_mm); on the unit bundle |v~| = 1.
inline std::vector<double> tangent_euclidean(const Manifold& M, const std::vector<double>& x,
                                             const std::vector<double>& xi) {
  const PointEval ev = M.eval_point(x, 0);
  std::vector<double> v(M.n());
  for (int m = 0; m < M.n(); ++m) v[m] = xi[m] / std::sqrt(ev.g[m]);
  return v;
}

}  // namespace liouville
