// Shared numerical kernels: dense linear solves, cubic splines, bracketed
// root finding, Gauss-Legendre rules, adaptive quadrature for integrands with
// inverse-square-root endpoint behavior, and a small symmetric eigensolver.
#pragma once

#include <algorithm>
#include <array>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

namespace liouville {

inline constexpr double kPi = 3.14159265358979323846264338327950288;

// ---------------------------------------------------------------------------
// Dense linear algebra (tiny systems, n <= ~12)

// Solves A x = b in place by Gaussian elimination with partial pivoting.
inline std::vector<double> solve_linear(std::vector<double> A, std::vector<double> b) {
  const std::size_t n = b.size();
  if (A.size() != n * n) throw std::invalid_argument("solve_linear: shape mismatch");
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    double best = std::abs(A[col * n + col]);
    for (std::size_t r = col + 1; r < n; ++r) {
      const double v = std::abs(A[r * n + col]);
      if (v > best) { best = v; piv = r; }
    }
    if (best == 0.0) throw std::runtime_error("solve_linear: singular matrix");
    if (piv != col) {
      for (std::size_t c = col; c < n; ++c) std::swap(A[piv * n + c], A[col * n + c]);
      std::swap(b[piv], b[col]);
    }
    const double d = A[col * n + col];
    for (std::size_t r = col + 1; r < n; ++r) {
      const double m = A[r * n + col] / d;
      if (m == 0.0) continue;
      for (std::size_t c = col; c < n; ++c) A[r * n + c] -= m * A[col * n + c];
      b[r] -= m * b[col];
    }
  }
  std::vector<double> x(n);
  for (std::size_t ri = n; ri-- > 0;) {
    double s = b[ri];
    for (std::size_t c = ri + 1; c < n; ++c) s -= A[ri * n + c] * x[c];
    x[ri] = s / A[ri * n + ri];
  }
  return x;
}

// Inverse of a small dense matrix (row-major).
inline std::vector<double> invert_matrix(const std::vector<double>& A, std::size_t n) {
  std::vector<double> inv(n * n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<double> e(n, 0.0);
    e[j] = 1.0;
    const std::vector<double> col = solve_linear(A, std::move(e));
    for (std::size_t i = 0; i < n; ++i) inv[i * n + j] = col[i];
  }
  return inv;
}

// ---------------------------------------------------------------------------
// Cubic spline on a strictly increasing grid with clamped end slopes.

class CubicSpline {
 public:
  CubicSpline() = default;

  // If d0/d1 are NaN the corresponding end uses the natural condition.
  CubicSpline(std::vector<double> x, std::vector<double> y,
              double d0 = std::numeric_limits<double>::quiet_NaN(),
              double d1 = std::numeric_limits<double>::quiet_NaN())
      : x_(std::move(x)), y_(std::move(y)) {
    const std::size_t n = x_.size();
    if (n < 3 || y_.size() != n) throw std::invalid_argument("CubicSpline: bad input");
    // Solve for node second derivatives (tridiagonal system).
    std::vector<double> a(n, 0.0), b(n, 0.0), c(n, 0.0), r(n, 0.0);
    for (std::size_t i = 1; i + 1 < n; ++i) {
      const double hl = x_[i] - x_[i - 1], hr = x_[i + 1] - x_[i];
      a[i] = hl / 6.0;
      b[i] = (hl + hr) / 3.0;
      c[i] = hr / 6.0;
      r[i] = (y_[i + 1] - y_[i]) / hr - (y_[i] - y_[i - 1]) / hl;
    }
    if (std::isnan(d0)) {
      b[0] = 1.0; c[0] = 0.0; r[0] = 0.0;
    } else {
      const double h = x_[1] - x_[0];
      b[0] = h / 3.0; c[0] = h / 6.0;
      r[0] = (y_[1] - y_[0]) / h - d0;
    }
    if (std::isnan(d1)) {
      a[n - 1] = 0.0; b[n - 1] = 1.0; r[n - 1] = 0.0;
    } else {
      const double h = x_[n - 1] - x_[n - 2];
      a[n - 1] = h / 6.0; b[n - 1] = h / 3.0;
      r[n - 1] = d1 - (y_[n - 1] - y_[n - 2]) / h;
    }
    m_.assign(n, 0.0);
    for (std::size_t i = 1; i < n; ++i) {  // Thomas algorithm
      const double w = a[i] / b[i - 1];
      b[i] -= w * c[i - 1];
      r[i] -= w * r[i - 1];
    }
    m_[n - 1] = r[n - 1] / b[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) m_[i] = (r[i] - c[i] * m_[i + 1]) / b[i];
  }

  double operator()(double t) const {
    const auto [i, h, u] = locate(t);
    const double A = 1.0 - u, B = u;
    return A * y_[i] + B * y_[i + 1] +
           ((A * A * A - A) * m_[i] + (B * B * B - B) * m_[i + 1]) * h * h / 6.0;
  }

  double derivative(double t) const {
    const auto [i, h, u] = locate(t);
    const double A = 1.0 - u, B = u;
    return (y_[i + 1] - y_[i]) / h +
           ((3.0 * B * B - 1.0) * m_[i + 1] - (3.0 * A * A - 1.0) * m_[i]) * h / 6.0;
  }

  double front() const { return x_.front(); }
  double back() const { return x_.back(); }

 private:
  std::tuple<std::size_t, double, double> locate(double t) const {
    std::size_t i;
    if (t <= x_.front()) {
      i = 0;
    } else if (t >= x_.back()) {
      i = x_.size() - 2;
    } else {
      i = static_cast<std::size_t>(std::upper_bound(x_.begin(), x_.end(), t) - x_.begin()) - 1;
      i = std::min(i, x_.size() - 2);
    }
    const double h = x_[i + 1] - x_[i];
    return {i, h, (t - x_[i]) / h};
  }

  std::vector<double> x_, y_, m_;
};

// ---------------------------------------------------------------------------
// Root finding

// Bisection with a final secant polish; f(lo) and f(hi) must have opposite
// signs (or one endpoint may be an exact zero).
inline double bisect_root(const std::function<double(double)>& f, double lo, double hi,
                          double xtol, int max_iter = 200) {
  double flo = f(lo), fhi = f(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if ((flo > 0.0) == (fhi > 0.0)) throw std::runtime_error("bisect_root: no sign change");
  for (int it = 0; it < max_iter && (hi - lo) > xtol; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if (fm == 0.0) return mid;
    if ((fm > 0.0) == (flo > 0.0)) { lo = mid; flo = fm; }
    else { hi = mid; fhi = fm; }
  }
  const double denom = fhi - flo;
  return denom != 0.0 ? lo - flo * (hi - lo) / denom : 0.5 * (lo + hi);
}

// Real roots of a polynomial all of whose roots are real (ascending coeffs).
// Uses the classical derivative-bracketing recursion: the roots of p' split
// the line into intervals each containing at most one root of p.
inline std::vector<double> real_roots_all_real(const std::vector<double>& coeffs,
                                               double lo, double hi) {
  // Trim trailing (near-)zero leading coefficients.
  std::vector<double> c(coeffs);
  double scale = 0.0;
  for (double v : c) scale = std::max(scale, std::abs(v));
  if (scale == 0.0) return {};
  while (c.size() > 1 && std::abs(c.back()) < 1e-14 * scale) c.pop_back();
  const int deg = static_cast<int>(c.size()) - 1;
  auto eval = [&c](double t) {
    double s = 0.0;
    for (std::size_t k = c.size(); k-- > 0;) s = s * t + c[k];
    return s;
  };
  if (deg <= 0) return {};
  if (deg == 1) {
    const double r = -c[0] / c[1];
    return (r >= lo && r <= hi) ? std::vector<double>{r} : std::vector<double>{};
  }
  std::vector<double> dc(deg);
  for (int k = 1; k <= deg; ++k) dc[k - 1] = c[k] * k;
  std::vector<double> crit = real_roots_all_real(dc, lo, hi);
  std::sort(crit.begin(), crit.end());
  std::vector<double> pts{lo};
  for (double t : crit)
    if (t > pts.back() + 1e-15 * (hi - lo)) pts.push_back(t);
  if (hi > pts.back()) pts.push_back(hi);
  std::vector<double> roots;
  const double ztol = 1e-13 * scale * std::max(1.0, std::pow(std::max(std::abs(lo), std::abs(hi)), deg));
  for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
    const double va = eval(pts[k]), vb = eval(pts[k + 1]);
    if (std::abs(va) <= ztol && (roots.empty() || pts[k] > roots.back() + 1e-13)) {
      roots.push_back(pts[k]);
      continue;
    }
    if ((va > 0.0) != (vb > 0.0)) {
      roots.push_back(bisect_root(eval, pts[k], pts[k + 1], 1e-15 * std::max(1.0, hi - lo)));
    } else if (std::abs(vb) <= ztol && k + 2 == pts.size()) {
      roots.push_back(pts[k + 1]);
    }
  }
  return roots;
}

// ---------------------------------------------------------------------------
// Gauss-Legendre rules (nodes on [-1,1]), generated once per order by Newton
// iteration on the Legendre recurrence.

struct QuadRule {
  std::vector<double> nodes, weights;
};

inline const QuadRule& gauss_legendre(int n) {
  static std::array<QuadRule, 64> cache;
  static std::array<bool, 64> ready{};
  if (n < 1 || n >= 64) throw std::invalid_argument("gauss_legendre: order out of range");
  if (!ready[n]) {
    QuadRule r;
    r.nodes.resize(n);
    r.weights.resize(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
      double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
      double pp = 0.0;
      for (int it = 0; it < 100; ++it) {
        double p0 = 1.0, p1 = 0.0;
        for (int j = 0; j < n; ++j) {
          const double p2 = p1;
          p1 = p0;
          p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
        }
        pp = n * (x * p0 - p1) / (x * x - 1.0);
        const double dx = p0 / pp;
        x -= dx;
        if (std::abs(dx) < 1e-16) break;
      }
      r.nodes[i] = -x;
      r.nodes[n - 1 - i] = x;
      r.weights[i] = r.weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * pp * pp);
    }
    cache[n] = std::move(r);
    ready[n] = true;
  }
  return cache[n];
}

template <typename F>
inline double gl_integrate(F&& f, double a, double b, int order) {
  const QuadRule& r = gauss_legendre(order);
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  double s = 0.0;
  for (std::size_t i = 0; i < r.nodes.size(); ++i) s += r.weights[i] * f(mid + half * r.nodes[i]);
  return s * half;
}

// Adaptive quadrature with a GL15/GL7 error estimate.
template <typename F>
inline double adaptive_integrate(F&& f, double a, double b, double abs_tol,
                                 double rel_tol = 1e-13, int max_depth = 60,
                                 double* err_out = nullptr) {
  struct Seg { double a, b, val, err; int depth; };
  auto estimate = [&f](double lo, double hi, double& err) {
    const double v15 = gl_integrate(f, lo, hi, 15);
    const double v7 = gl_integrate(f, lo, hi, 7);
    err = std::abs(v15 - v7);
    return v15;
  };
  double err0;
  std::vector<Seg> stack{{a, b, estimate(a, b, err0), err0, 0}};
  stack[0].err = err0;
  double total = 0.0, total_err = 0.0;
  while (!stack.empty()) {
    Seg s = stack.back();
    stack.pop_back();
    const double tol_here = std::max(abs_tol, rel_tol * std::abs(s.val)) *
                            std::max(1e-3, (s.b - s.a) / (b - a));
    if (s.err <= tol_here || s.depth >= max_depth) {
      total += s.val;
      total_err += s.err;
      continue;
    }
    const double mid = 0.5 * (s.a + s.b);
    double e1, e2;
    const double v1 = estimate(s.a, mid, e1);
    const double v2 = estimate(mid, s.b, e2);
    stack.push_back({s.a, mid, v1, e1, s.depth + 1});
    stack.push_back({mid, s.b, v2, e2, s.depth + 1});
  }
  if (err_out) *err_out = total_err;
  return total;
}

// ---------------------------------------------------------------------------
// Integrals of the form
//     int_p^q  smooth(l) * sqrt(prod_j |l - nr_j|) / sqrt(prod_k |l - dr_k|) dl
// where roots of the denominator product may coincide with the endpoints
// (inverse-square-root singularities) and roots of the numerator product may
// vanish at the endpoints (half-power zeros).  Both are removed exactly by
// the substitutions l = p + s^2 / l = q - s^2 applied on the two halves.
//
// The caller is responsible for the overall sign; the products are taken in
// absolute value.

struct SqrtRatioIntegrand {
  std::vector<double> num_roots;            // under sqrt in the numerator
  std::vector<double> den_roots;            // under sqrt in the denominator
  std::function<double(double)> smooth;     // smooth cofactor (may be null -> 1)
};

inline double sqrt_ratio_integral(const SqrtRatioIntegrand& ig, double p, double q,
                                  double tol, double* err_out = nullptr) {
  if (!(q > p)) {
    if (err_out) *err_out = 0.0;
    return 0.0;
  }
  const double mid = 0.5 * (p + q);
  // Substitute l = p + s^2 on the left half and l = q - s^2 on the right half
  // (dl = +-2 s ds).  A root factor anchored at the substitution endpoint
  // contributes |s| exactly, cancelling the 1/|s| of a denominator root and
  // smoothing a numerator root.
  auto half_integral = [&](bool left_side) {
    const double anchor = left_side ? p : q;
    const double smax = std::sqrt(left_side ? (mid - p) : (q - mid));
    auto f = [&](double s) {
      const double l = left_side ? (p + s * s) : (q - s * s);
      double v = ig.smooth ? ig.smooth(l) : 1.0;
      v *= 2.0 * std::abs(s);
      for (double r : ig.num_roots) {
        if (r == anchor) v *= std::abs(s);
        else v *= std::sqrt(std::abs(l - r));
      }
      for (double r : ig.den_roots) {
        if (r == anchor) v /= std::abs(s);
        else v /= std::sqrt(std::abs(l - r));
      }
      return v;
    };
    double e = 0.0;
    const double v = adaptive_integrate(f, 0.0, smax, tol * 0.5, 1e-13, 60, &e);
    return std::pair<double, double>{v, e};
  };
  const auto [vl, el] = half_integral(true);
  const auto [vr, er] = half_integral(false);
  if (err_out) *err_out = el + er;
  return vl + vr;
}

// ---------------------------------------------------------------------------
// Symmetric eigenproblems for small matrices (cyclic Jacobi).

inline void symmetric_eigen(std::vector<double> A, std::size_t n,
                            std::vector<double>& values, std::vector<double>& vectors) {
  vectors.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) vectors[i * n + i] = 1.0;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off += A[i * n + j] * A[i * n + j];
    if (off < 1e-30) break;
    for (std::size_t pI = 0; pI < n; ++pI)
      for (std::size_t qI = pI + 1; qI < n; ++qI) {
        const double apq = A[pI * n + qI];
        if (std::abs(apq) < 1e-300) continue;
        const double theta = (A[qI * n + qI] - A[pI * n + pI]) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double cth = 1.0 / std::sqrt(t * t + 1.0), sth = t * cth;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = A[k * n + pI], akq = A[k * n + qI];
          A[k * n + pI] = cth * akp - sth * akq;
          A[k * n + qI] = sth * akp + cth * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = A[pI * n + k], aqk = A[qI * n + k];
          A[pI * n + k] = cth * apk - sth * aqk;
          A[qI * n + k] = sth * apk + cth * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = vectors[k * n + pI], vkq = vectors[k * n + qI];
          vectors[k * n + pI] = cth * vkp - sth * vkq;
          vectors[k * n + qI] = sth * vkp + cth * vkq;
        }
      }
  }
  values.resize(n);
  for (std::size_t i = 0; i < n; ++i) values[i] = A[i * n + i];
}

}  // namespace liouville
