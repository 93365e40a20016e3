// Hyperelliptic interval integrals
//     int_{a_l^+}^{a_{l-1}^-} numer(l) / sqrt(R(l)) dl,
//     R(l) = -prod_k (l - b_k) * prod_k (l - a_k),
// their Abel-type combinations (which vanish for polynomial numerators of
// degree <= n-2), and the signed quantities of the monotonicity
// inequalities, with b-derivatives realized by central differences on the
// integral sum.
//
// On (a_l^+, a_{l-1}^-) the radicand factors as (l-lo)(hi-l)*S(l) with
// S = prod of the remaining root factors, positive there; both endpoint
// singularities are removed by the s^2 substitutions in sqrt_ratio_integral.
#pragma once

#include <cmath>
#include <functional>
#include <set>
#include <stdexcept>
#include <vector>

#include "liouville/numerics.hpp"
#include "liouville/profile.hpp"

namespace liouville {

class SingularInterior : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class FDUnstable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// [a_l^+, a_{l-1}^-] for l = 1..n, given spectrum a (size n+1) and b (size n-1).
inline std::pair<double, double> hyperelliptic_interval(const std::vector<double>& a,
                                                        const std::vector<double>& b, int l) {
  const int n = static_cast<int>(a.size()) - 1;
  const double lo = (l <= n - 1) ? std::max(a[l], b[l - 1]) : a[n];
  const double hi = (l >= 2) ? std::min(a[l - 1], b[l - 2]) : a[0];
  return {lo, hi};
}

// One interval integral; returns 0 for a degenerate (zero-length) interval.
inline double singular_integral(const std::vector<double>& a, const std::vector<double>& b, int l,
                                const std::function<double(double)>& numer, double tol = 1e-12,
                                double* err_out = nullptr) {
  const auto [lo, hi] = hyperelliptic_interval(a, b, l);
  if (err_out) *err_out = 0.0;
  if (!(hi > lo)) return 0.0;

  std::vector<double> rem;
  rem.reserve(a.size() + b.size());
  bool lo_taken = false, hi_taken = false;
  for (double r : a) {
    if (!lo_taken && r == lo) { lo_taken = true; continue; }
    if (!hi_taken && r == hi) { hi_taken = true; continue; }
    rem.push_back(r);
  }
  for (double r : b) {
    if (!lo_taken && r == lo) { lo_taken = true; continue; }
    if (!hi_taken && r == hi) { hi_taken = true; continue; }
    rem.push_back(r);
  }
  if (!lo_taken || !hi_taken)
    throw SingularInterior("singular_integral: interval endpoints are not radicand roots");
  // S(l) = prod_rem (l - r) must stay positive strictly inside.
  for (int s = 1; s < 8; ++s) {
    const double l_probe = lo + (hi - lo) * s / 8.0;
    double S = 1.0;
    for (double r : rem) S *= (l_probe - r);
    if (!(S > 0.0))
      throw SingularInterior("singular_integral: radicand root strictly inside the interval");
  }
  SqrtRatioIntegrand ig;
  ig.den_roots = rem;
  ig.smooth = numer;
  // The (l-lo)(hi-l) pair is handled by the substitution itself:
  ig.den_roots.push_back(lo);
  ig.den_roots.push_back(hi);
  return sqrt_ratio_integral(ig, lo, hi, tol, err_out);
}

inline std::function<double(double)> monomial(int m) {
  return [m](double l) { return std::pow(l, m); };
}

// Abel relations: for each monomial degree m = 0..n-2 returns
//   sum_l (-1)^l * int_{a_l^+}^{a_{l-1}^-} l^m / sqrt(R) dl   (== 0 in theory).
inline std::vector<double> abel_residuals(const std::vector<double>& a,
                                          const std::vector<double>& b, double tol = 1e-12) {
  const int n = static_cast<int>(a.size()) - 1;
  std::vector<double> res;
  for (int m = 0; m <= n - 2; ++m) {
    double s = 0.0;
    for (int l = 1; l <= n; ++l) {
      const double sign = (l % 2 == 0) ? 1.0 : -1.0;
      s += sign * singular_integral(a, b, l, monomial(m), tol);
    }
    res.push_back(s);
  }
  return res;
}

// --------------------------------------------------------------------------
// Monotonicity inequalities.  All cases share the weighted sum
//   Phi(b) = sum_l sign_l * int A(l)(l - a_n) G(l) / sqrt(R) dl .

enum class InequalityCase {
  P1,      // G = prod_{j in I} (l - b_j), weight (-1)^{n-l+#I}; value > 0
  P2Full,  // d/db_i with G = prod_{k != i} (l - b_k), weight (-1)^l; value < 0
  P2Pair,  // d/db_i with G = prod_{k != i,j} (l - b_k); value > 0
  P3,      // d^2/db_i^2 with G = prod_{k != i} (l - b_k); value > 0
};

struct InequalityRequest {
  InequalityCase which = InequalityCase::P1;
  std::vector<int> subset_I;  // P1: subset of {1..n-1}, #I <= n-3
  int i = 1;                  // P2/P3: differentiated b index (1-based)
  int j = 2;                  // P2Pair: second removed index
  double fd_step_rel = 1e-5;  // h = fd_step_rel * (a_0 - a_n)
  double quad_tol = 1e-13;
};

namespace detail {

inline double inequality_sum(const std::vector<double>& a, const std::vector<double>& bvals,
                             const AProfile& A, const InequalityRequest& req) {
  const int n = static_cast<int>(a.size()) - 1;
  auto G = [&](double l) {
    double g = 1.0;
    switch (req.which) {
      case InequalityCase::P1:
        for (int j : req.subset_I) g *= (l - bvals[j - 1]);
        break;
      case InequalityCase::P2Full:
      case InequalityCase::P3:
        for (int k = 1; k <= n - 1; ++k)
          if (k != req.i) g *= (l - bvals[k - 1]);
        break;
      case InequalityCase::P2Pair:
        for (int k = 1; k <= n - 1; ++k)
          if (k != req.i && k != req.j) g *= (l - bvals[k - 1]);
        break;
    }
    return g * A.value(l) * (l - a[n]);
  };
  double s = 0.0;
  for (int l = 1; l <= n; ++l) {
    double sign;
    if (req.which == InequalityCase::P1) {
      const int e = n - l + static_cast<int>(req.subset_I.size());
      sign = (e % 2 == 0) ? 1.0 : -1.0;
    } else {
      sign = (l % 2 == 0) ? 1.0 : -1.0;
    }
    s += sign * singular_integral(a, bvals, l, G, req.quad_tol);
  }
  return s;
}

}  // namespace detail

// Evaluates the requested signed quantity.  For P2/P3 the derivative is a
// central difference of Phi in b_i; a half-step Richardson run estimates the
// combined truncation + quadrature error and FDUnstable is thrown when it
// exceeds |value| / 10.
inline double inequality_value(const std::vector<double>& a, const std::vector<double>& b,
                               const AProfile& A, const InequalityRequest& req,
                               double* err_out = nullptr) {
  if (req.which == InequalityCase::P1) {
    if (err_out) *err_out = 0.0;
    return detail::inequality_sum(a, b, A, req);
  }
  const double h0 = req.fd_step_rel * (a.front() - a.back());
  auto fd = [&](double h) {
    std::vector<double> bp = b, bm = b;
    bp[req.i - 1] += h;
    bm[req.i - 1] -= h;
    const double fp = detail::inequality_sum(a, bp, A, req);
    const double fm = detail::inequality_sum(a, bm, A, req);
    if (req.which == InequalityCase::P3) {
      const double f0 = detail::inequality_sum(a, b, A, req);
      return (fp - 2.0 * f0 + fm) / (h * h);
    }
    return (fp - fm) / (2.0 * h);
  };
  const double v1 = fd(h0);
  const double v2 = fd(0.5 * h0);
  const double est_err = std::abs(v2 - v1) / 3.0;  // leading-order Richardson
  if (err_out) *err_out = est_err;
  if (!(est_err <= std::abs(v2) / 10.0))
    throw FDUnstable("inequality_value: finite-difference error estimate too large");
  return v2;
}

}  // namespace liouville
