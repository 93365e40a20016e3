// Ambient realization for the sqrt profile: M is isometric to the ellipsoid
// sum_i u_i^2 / a_i = 1, with f_1(x_1), ..., f_n(x_n) the classical elliptic
// coordinates.  Signs of the ambient coordinates are fixed by the quadrant of
// each x_i on the covering torus so that the assignment is invariant under
// the deck group and flips exactly across the reflection hypersurfaces N_i.
#pragma once

#include <cmath>
#include <vector>

#include "liouville/manifold.hpp"

namespace liouville {

inline std::vector<double> embed_ellipsoid(const Manifold& M, const std::vector<double>& x) {
  if (!M.spec().profile.is_sqrt())
    throw WrongProfile("embed_ellipsoid: profile must be sqrt(lambda)");
  const int n = M.n();
  const std::vector<double>& a = M.spec().a;
  std::vector<double> lam(n);
  for (int k = 0; k < n; ++k) lam[k] = M.f(k + 1, x[k]);

  std::vector<double> u(n + 1);
  for (int i = 0; i <= n; ++i) {
    double num = a[i], den = 1.0;
    for (int k = 0; k < n; ++k) num *= (lam[k] - a[i]);
    for (int j = 0; j <= n; ++j)
      if (j != i) den *= (a[j] - a[i]);
    const double mag = std::sqrt(std::max(0.0, num / den));
    double sgn = 1.0;
    if (i >= 1) sgn *= std::sin(2.0 * kPi * x[i - 1] / M.alpha(i));
    if (i <= n - 1) sgn *= std::cos(2.0 * kPi * x[i] / M.alpha(i + 1));
    u[i] = (sgn >= 0.0 ? 1.0 : -1.0) * mag;
  }
  return u;
}

inline double ellipsoid_residual(const ManifoldSpec& spec, const std::vector<double>& u) {
  double s = -1.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * u[i] / spec.a[i];
  return s;
}

// Recovers the elliptic coordinates lambda_1 >= ... >= lambda_n of an ambient
// point from the defining identity: they are the nonzero roots of
//   p(l) = sum_i u_i^2 prod_{j != i} (a_j - l)  -  prod_j (a_j - l).
inline std::vector<double> elliptic_coordinates(const ManifoldSpec& spec,
                                                const std::vector<double>& u) {
  const int n = spec.n;
  const std::vector<double>& a = spec.a;
  // Assemble monomial coefficients of p by convolving linear factors.
  auto mul_linear = [](std::vector<double> p, double root) {
    // multiply by (root - l)
    std::vector<double> q(p.size() + 1, 0.0);
    for (std::size_t k = 0; k < p.size(); ++k) {
      q[k] += root * p[k];
      q[k + 1] -= p[k];
    }
    return q;
  };
  std::vector<double> poly(1, 0.0);
  {
    std::vector<double> full{1.0};
    for (int j = 0; j <= n; ++j) full = mul_linear(std::move(full), a[j]);
    poly.assign(full.size(), 0.0);
    for (std::size_t k = 0; k < full.size(); ++k) poly[k] -= full[k];
  }
  for (int i = 0; i <= n; ++i) {
    std::vector<double> part{u[i] * u[i]};
    for (int j = 0; j <= n; ++j)
      if (j != i) part = mul_linear(std::move(part), a[j]);
    for (std::size_t k = 0; k < part.size(); ++k) poly[k] += part[k];
  }
  // p(0) = 0 on the ellipsoid; divide by l.
  std::vector<double> reduced(poly.begin() + 1, poly.end());
  std::vector<double> roots =
      real_roots_all_real(reduced, a.back() - 1e-9 * spec.spread(), a.front() + 1e-9 * spec.spread());
  std::sort(roots.begin(), roots.end(), std::greater<double>());
  // Clamp into nominal ranges [a_k, a_{k-1}].
  std::vector<double> lam(n, 0.0);
  for (int k = 0; k < n && k < static_cast<int>(roots.size()); ++k)
    lam[k] = std::clamp(roots[k], a[k + 1], a[k]);
  return lam;
}

}  // namespace liouville
