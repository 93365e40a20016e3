// Construction of the rank-one Liouville manifolds: spectrum validation with
// the monotonicity condition on Atilde(l) = (l - a_n) A(l), the coordinate
// functions f_i obtained by quadrature-inversion on a quarter period, the
// diagonal metric and its derivatives, and the torus/involution bookkeeping
// for the branched covering R -> M.
//
// Sign conventions used throughout (i = 1..n, spectrum a_0 > ... > a_n > 0):
//   (f_i')^2 = (-1)^i 4 prod_j (f_i - a_j) / A(f_i)^2,  f_i in [a_i, a_{i-1}]
//   g_mm     = (-1)^{n-m} prod_{l != m} (f_l - f_m)
// On (a_i, a_{i-1}) the polynomial (-1)^i prod_j (l - a_j) factors as
// (l - a_i)(a_{i-1} - l) * Qhat_i(l) with Qhat_i > 0, which is what makes the
// half-angle substitution l = m - w cos(phi) remove both endpoint
// singularities at once.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "liouville/numerics.hpp"
#include "liouville/profile.hpp"

namespace liouville {

class NonMonotoneSpectrum : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class NonPositiveProfile : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class DegenerateMetric : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class QuadratureFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------

struct ConditionReport {
  bool passes = false;
  bool round_sphere_mode = false;  // constant profile accepted with a warning
  // min over sampled lambda of (-1)^k Atilde^(k), k = 2..n
  std::vector<double> tilde_minima;
  // min over sampled lambda of -(-1)^k A^(k), k = 1..n-1
  std::vector<double> profile_minima;
  std::string message;
};

struct ManifoldSpec {
  int n = 0;                 // dimension
  std::vector<double> a;     // a_0 > ... > a_n > 0
  AProfile profile;
  ConditionReport condition;

  double a_front() const { return a.front(); }
  double a_back() const { return a.back(); }
  double spread() const { return a.front() - a.back(); }
};

inline ManifoldSpec validate_spec(const std::vector<double>& a, const AProfile& profile,
                                  int samples = 801) {
  if (a.size() < 3) throw NonMonotoneSpectrum("spectrum needs at least 3 entries (n >= 2)");
  for (std::size_t i = 0; i + 1 < a.size(); ++i)
    if (!(a[i] > a[i + 1])) throw NonMonotoneSpectrum("spectrum must be strictly decreasing");
  if (!(a.back() > 0.0)) throw NonMonotoneSpectrum("spectrum must be positive");

  ManifoldSpec spec;
  spec.n = static_cast<int>(a.size()) - 1;
  spec.a = a;
  spec.profile = profile;

  const double lo = a.back(), hi = a.front();
  for (int s = 0; s < samples; ++s) {
    const double l = lo + (hi - lo) * s / (samples - 1);
    if (!(profile.value(l) > 0.0)) throw NonPositiveProfile("A(lambda) must be positive on [a_n, a_0]");
  }

  ConditionReport& rep = spec.condition;
  rep.round_sphere_mode = profile.is_constant();
  for (int k = 2; k <= spec.n; ++k) {
    double mn = std::numeric_limits<double>::infinity();
    for (int s = 0; s < samples; ++s) {
      const double l = lo + (hi - lo) * s / (samples - 1);
      const double v = ((k % 2 == 0) ? 1.0 : -1.0) * profile.tilde_derivative(k, l, lo);
      mn = std::min(mn, v);
    }
    rep.tilde_minima.push_back(mn);
  }
  for (int k = 1; k <= spec.n - 1; ++k) {
    double mn = std::numeric_limits<double>::infinity();
    for (int s = 0; s < samples; ++s) {
      const double l = lo + (hi - lo) * s / (samples - 1);
      const double v = -((k % 2 == 0) ? 1.0 : -1.0) * profile.derivative(k, l);
      mn = std::min(mn, v);
    }
    rep.profile_minima.push_back(mn);
  }
  if (rep.round_sphere_mode) {
    // Atilde is affine, so the k >= 2 inequalities hold only weakly; this is
    // the constant-curvature reference case and is accepted with a flag.
    rep.passes = true;
    rep.message = "constant profile: round-sphere mode (condition holds non-strictly)";
  } else {
    bool ok = true;
    for (double v : rep.tilde_minima) ok = ok && v > 0.0;
    for (double v : rep.profile_minima) ok = ok && v > 0.0;
    rep.passes = ok;
    rep.message = ok ? "condition satisfied" : "condition violated at sampled points";
  }
  return spec;
}

// ---------------------------------------------------------------------------
// Coordinate profile: f_i on the circle R/alpha_i Z, built by inverting
//   x(f) = int_{a_i}^f A(l) dl / sqrt((-1)^i 4 prod_j (l - a_j))
// on the quarter period [0, alpha_i/4] and extending by the even/quarter
// symmetry f(-x) = f(x) = f(alpha_i/2 - x).

class CoordinateProfile {
 public:
  CoordinateProfile() = default;

  CoordinateProfile(const ManifoldSpec& spec, int index, int grid = 2048)
      : index_(index), a_(spec.a) {
    const int n = spec.n;
    if (index < 1 || index > n) throw std::invalid_argument("CoordinateProfile: index");
    lo_ = spec.a[index];       // a_i
    hi_ = spec.a[index - 1];   // a_{i-1}
    mid_ = 0.5 * (lo_ + hi_);
    halfw_ = 0.5 * (hi_ - lo_);
    profile_ = spec.profile;

    // x(phi) on [0, pi] by composite Gauss-Legendre of the smooth integrand
    // h(phi) = A(l)/(2 sqrt(Qhat(l))), l = mid - halfw*cos(phi).
    const int M = grid;
    std::vector<double> phis(M + 1), xs(M + 1);
    xs[0] = 0.0;
    phis[0] = 0.0;
    const QuadRule& rule = gauss_legendre(6);
    for (int k = 0; k < M; ++k) {
      const double pa = kPi * k / M, pb = kPi * (k + 1) / M;
      const double c = 0.5 * (pa + pb), hw = 0.5 * (pb - pa);
      double s = 0.0;
      for (std::size_t j = 0; j < rule.nodes.size(); ++j)
        s += rule.weights[j] * speed(c + hw * rule.nodes[j]);
      phis[k + 1] = pb;
      xs[k + 1] = xs[k] + s * hw;
    }
    quarter_ = xs.back();
    alpha_ = 4.0 * quarter_;
    if (!std::isfinite(alpha_) || !(alpha_ > 0.0))
      throw QuadratureFailure("CoordinateProfile: period integral failed");
    x_of_phi_ = CubicSpline(phis, xs, speed(0.0), speed(kPi));

    // Inverse table phi(x) on a uniform x grid, each node refined by Newton.
    std::vector<double> xg(M + 1), pg(M + 1);
    for (int k = 0; k <= M; ++k) {
      const double x = quarter_ * k / M;
      xg[k] = x;
      double p = (k == 0) ? 0.0 : (k == M ? kPi : pg[k - 1]);
      if (k > 0 && k < M) {
        double plo = pg[k - 1], phi_hi = kPi;
        for (int it = 0; it < 100; ++it) {
          const double pm = 0.5 * (plo + phi_hi);
          if (x_of_phi_(pm) < x) plo = pm;
          else phi_hi = pm;
          if (phi_hi - plo < 1e-12) break;
        }
        p = 0.5 * (plo + phi_hi);
        for (int it = 0; it < 8; ++it) {
          const double resid = x_of_phi_(p) - x;
          const double d = speed(p);
          const double step = resid / d;
          p -= step;
          if (std::abs(step) < 1e-16) break;
        }
        p = std::clamp(p, 0.0, kPi);
      }
      pg[k] = p;
    }
    phi_of_x_ = CubicSpline(xg, pg, 1.0 / speed(0.0), 1.0 / speed(kPi));
  }

  int index() const { return index_; }
  double alpha() const { return alpha_; }
  double quarter() const { return quarter_; }
  double range_lo() const { return lo_; }
  double range_hi() const { return hi_; }

  // Reduce x to the quarter period; sign is the sign of f' there.
  struct Folded {
    double q;
    double sign;
  };
  Folded fold(double x) const {
    const double half = 0.5 * alpha_;
    double t = std::fmod(x, half);
    if (t < 0.0) t += half;
    if (t <= quarter_) return {t, 1.0};
    return {half - t, -1.0};
  }

  double f(double x) const {
    const Folded fd = fold(x);
    return mid_ - halfw_ * std::cos(phi_of_x_(fd.q));
  }

  double f_prime(double x) const {
    const Folded fd = fold(x);
    const double phi = phi_of_x_(fd.q);
    const double l = mid_ - halfw_ * std::cos(phi);
    return fd.sign * 2.0 * halfw_ * std::sin(phi) * std::sqrt(qhat(l)) / profile_.value(l);
  }

  // f'' from differentiating (f')^2 = (-1)^i 4 prod (f - a_j) / A(f)^2:
  // f'' = (1/2) d/df RHS, smooth through the turning points.
  double f_second(double x) const {
    const double l = f(x);
    const double A = profile_.value(l), Ap = profile_.derivative(1, l);
    double prod = 1.0, dprod = 0.0;
    for (double aj : a_) {
      dprod = dprod * (l - aj) + prod;
      prod *= (l - aj);
    }
    const double sgn = (index_ % 2 == 0) ? 1.0 : -1.0;
    return sgn * 2.0 * (dprod - 2.0 * prod * Ap / A) / (A * A);
  }

  // Inverse on the quarter period: x in [0, alpha/4] with f(x) = value.
  double x_of_f(double value) const {
    const double c = std::clamp((mid_ - value) / halfw_, -1.0, 1.0);
    return x_of_phi_(std::acos(c));
  }

  // Integrand speed dx/dphi (exposed for oracles/tests).
  double speed(double phi) const {
    const double l = mid_ - halfw_ * std::cos(phi);
    return profile_.value(l) / (2.0 * std::sqrt(qhat(l)));
  }

  // Qhat_i(l) = (-1)^{i+1} prod_{j != i, i-1} (l - a_j), positive on the range.
  double qhat(double l) const {
    double q = (index_ % 2 == 0) ? -1.0 : 1.0;
    for (std::size_t j = 0; j < a_.size(); ++j) {
      if (static_cast<int>(j) == index_ || static_cast<int>(j) == index_ - 1) continue;
      q *= (l - a_[j]);
    }
    return q;
  }

 private:
  int index_ = 0;
  std::vector<double> a_;
  AProfile profile_;
  double lo_ = 0.0, hi_ = 0.0, mid_ = 0.0, halfw_ = 0.0;
  double alpha_ = 0.0, quarter_ = 0.0;
  CubicSpline x_of_phi_, phi_of_x_;
};

inline std::vector<CoordinateProfile> solve_profiles(const ManifoldSpec& spec, int grid = 2048) {
  std::vector<CoordinateProfile> out;
  out.reserve(spec.n);
  for (int i = 1; i <= spec.n; ++i) out.emplace_back(spec, i, grid);
  return out;
}

// ---------------------------------------------------------------------------
// Manifold aggregate: spec + coordinate profiles + metric evaluation.

struct PointEval {
  std::vector<double> f, fp, fpp;  // per coordinate
  std::vector<double> g;           // diagonal metric coefficients
  std::vector<double> dg;          // dg[m*n + k] = d g_m / d x_k
  std::vector<double> ddg;         // ddg[(m*n + k)*n + l], filled at order 2
};

struct BasePoint {
  std::vector<double> x;
  std::vector<double> f_values;
  bool general = false;
};

class Manifold {
 public:
  Manifold() = default;
  Manifold(ManifoldSpec spec, int grid = 2048)
      : spec_(std::move(spec)), prof_(solve_profiles(spec_, grid)) {}

  const ManifoldSpec& spec() const { return spec_; }
  const std::vector<CoordinateProfile>& profiles() const { return prof_; }
  const CoordinateProfile& profile(int i) const { return prof_[i - 1]; }  // 1-based
  int n() const { return spec_.n; }
  double alpha(int i) const { return prof_[i - 1].alpha(); }

  double f(int i, double xi) const { return prof_[i - 1].f(xi); }
  double f_prime(int i, double xi) const { return prof_[i - 1].f_prime(xi); }

  PointEval eval_point(const std::vector<double>& x, int order) const {
    const int n = spec_.n;
    PointEval ev;
    ev.f.resize(n);
    ev.fp.resize(n);
    if (order >= 2) ev.fpp.resize(n);
    for (int l = 0; l < n; ++l) {
      ev.f[l] = prof_[l].f(x[l]);
      ev.fp[l] = prof_[l].f_prime(x[l]);
      if (order >= 2) ev.fpp[l] = prof_[l].f_second(x[l]);
    }
    ev.g.resize(n);
    for (int m = 0; m < n; ++m) {
      double p = ((n - 1 - m) % 2 == 0) ? 1.0 : -1.0;  // (-1)^{n-i} with i = m+1
      for (int l = 0; l < n; ++l)
        if (l != m) p *= (ev.f[l] - ev.f[m]);
      ev.g[m] = p;
    }
    if (order >= 1) {
      ev.dg.assign(n * n, 0.0);
      for (int m = 0; m < n; ++m) {
        double S = 0.0;
        for (int l = 0; l < n; ++l)
          if (l != m) S += 1.0 / (ev.f[l] - ev.f[m]);
        for (int k = 0; k < n; ++k) {
          if (k == m) ev.dg[m * n + m] = -ev.fp[m] * ev.g[m] * S;
          else ev.dg[m * n + k] = ev.g[m] * ev.fp[k] / (ev.f[k] - ev.f[m]);
        }
      }
    }
    if (order >= 2) {
      ev.ddg.assign(n * n * n, 0.0);
      for (int m = 0; m < n; ++m) {
        double S = 0.0, T = 0.0;
        for (int l = 0; l < n; ++l)
          if (l != m) {
            const double d = ev.f[l] - ev.f[m];
            S += 1.0 / d;
            T += 1.0 / (d * d);
          }
        for (int k = 0; k < n; ++k)
          for (int l = 0; l < n; ++l) {
            double v;
            if (k != m && l != m && k != l) {
              v = ev.g[m] * ev.fp[k] * ev.fp[l] / ((ev.f[k] - ev.f[m]) * (ev.f[l] - ev.f[m]));
            } else if (k == l && k != m) {
              v = ev.g[m] * ev.fpp[k] / (ev.f[k] - ev.f[m]);
            } else if (k != m && l == m) {
              const double d = ev.f[k] - ev.f[m];
              v = ev.fp[k] * (ev.dg[m * n + m] / d + ev.g[m] * ev.fp[m] / (d * d));
            } else if (k == m && l != m) {
              const double d = ev.f[l] - ev.f[m];
              v = ev.fp[l] * (ev.dg[m * n + m] / d + ev.g[m] * ev.fp[m] / (d * d));
            } else {  // k == l == m
              v = -ev.fpp[m] * ev.g[m] * S + ev.fp[m] * ev.fp[m] * ev.g[m] * (S * S - T);
            }
            ev.ddg[(m * n + k) * n + l] = v;
          }
      }
    }
    return ev;
  }

  // Metric diagonal at a point; throws on the branch locus.
  std::vector<double> metric_at(const std::vector<double>& x, double tol_rel = 1e-12) const {
    PointEval ev = eval_point(x, 0);
    const double scale = spec_.spread();
    for (int m = 0; m < n(); ++m)
      for (int l = m + 1; l < n(); ++l)
        if (std::abs(ev.f[l] - ev.f[m]) < tol_rel * scale)
          throw DegenerateMetric("metric degenerates: coinciding coordinate values");
    return ev.g;
  }

  double energy(const std::vector<double>& x, const std::vector<double>& xi) const {
    PointEval ev = eval_point(x, 0);
    double e = 0.0;
    for (int m = 0; m < n(); ++m) e += xi[m] * xi[m] / ev.g[m];
    return 0.5 * e;
  }

  BasePoint base_point(const std::vector<double>& x, double tol = 1e-6) const {
    BasePoint p;
    p.x = x;
    p.f_values.resize(n());
    for (int l = 0; l < n(); ++l) p.f_values[l] = prof_[l].f(x[l]);
    const double eps = tol * spec_.spread();
    p.general = true;
    // N_k = { f_k = a_k or f_{k+1} = a_k }, k = 0..n (with only the factors
    // that exist at the ends of the index range).
    for (int k = 0; k <= n(); ++k) {
      if (k >= 1 && std::abs(p.f_values[k - 1] - spec_.a[k]) < eps) p.general = false;
      if (k < n() && std::abs(p.f_values[k] - spec_.a[k]) < eps) p.general = false;
    }
    return p;
  }

  // Fundamental-domain base point from fractions of the quarter periods.
  BasePoint base_point_from_fractions(const std::vector<double>& frac, double tol = 1e-6) const {
    std::vector<double> x(n());
    for (int i = 0; i < n(); ++i) x[i] = frac[i] * prof_[i].quarter();
    return base_point(x, tol);
  }

  // --- torus / deck-transformation helpers -------------------------------

  double wrap(int i, double xi) const {
    const double al = prof_[i].alpha();
    double t = std::fmod(xi, al);
    if (t < 0.0) t += al;
    return t;
  }

  // tau_i for i = 1..n-1: x_i -> -x_i, x_{i+1} -> alpha_{i+1}/2 - x_{i+1};
  // an element of the deck group G is a subset mask of generators.
  std::vector<double> apply_deck(unsigned mask, std::vector<double> x) const {
    for (int i = 1; i <= n() - 1; ++i) {
      if (!(mask & (1u << (i - 1)))) continue;
      x[i - 1] = -x[i - 1];
      x[i] = 0.5 * prof_[i].alpha() - x[i];
    }
    for (int i = 0; i < n(); ++i) x[i] = wrap(i, x[i]);
    return x;
  }

  // Same deck element acting on momenta (each flipped coordinate flips xi).
  std::vector<double> apply_deck_momentum(unsigned mask, std::vector<double> xi) const {
    for (int i = 1; i <= n() - 1; ++i) {
      if (!(mask & (1u << (i - 1)))) continue;
      xi[i - 1] = -xi[i - 1];
      xi[i] = -xi[i];
    }
    return xi;
  }

  double circle_distance(int i, double x1, double x2) const {
    const double al = prof_[i].alpha();
    double d = std::abs(wrap(i, x1) - wrap(i, x2));
    return std::min(d, al - d);
  }

  // Coordinate distance between points of M = R/G, minimized over the deck
  // group and weighted by the local metric (adequate for nearby points).
  double quotient_distance(const std::vector<double>& x1, const std::vector<double>& x2) const {
    PointEval ev = eval_point(x1, 0);
    double best = std::numeric_limits<double>::infinity();
    const unsigned count = 1u << (n() - 1);
    for (unsigned mask = 0; mask < count; ++mask) {
      const std::vector<double> gx = apply_deck(mask, x2);
      double s = 0.0;
      for (int i = 0; i < n(); ++i) {
        const double d = circle_distance(i, x1[i], gx[i]);
        s += std::abs(ev.g[i]) * d * d;
      }
      best = std::min(best, std::sqrt(s));
    }
    return best;
  }

 private:
  ManifoldSpec spec_;
  std::vector<CoordinateProfile> prof_;
};

}  // namespace liouville
