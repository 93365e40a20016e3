// Adaptive Dormand-Prince 5(4) integrator with the standard quartic dense
// output.  Solutions are stored segment-by-segment so that event refinement
// can evaluate the interpolant (and its time derivative) anywhere on the
// integrated span, and integration can be resumed to extend the horizon.
#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

namespace liouville {

struct OdeOptions {
  double rtol = 1e-12;
  double atol = 1e-13;
  double h_init = 1e-4;
  double h_max = std::numeric_limits<double>::infinity();
  long max_steps = 50000000;
};

class DenseSolution {
 public:
  explicit DenseSolution(std::size_t dim) : dim_(dim) {}

  std::size_t dim() const { return dim_; }
  double t_begin() const { return t0_; }
  double t_end() const { return t1_; }
  std::size_t steps() const { return seg_t0_.size(); }
  const std::vector<double>& y_end() const { return y_end_; }

  void eval(double t, double* out) const {
    const auto [s, th] = locate(t);
    const double u = 1.0 - th;
    const double* r = coef_.data() + 5 * dim_ * s;
    for (std::size_t i = 0; i < dim_; ++i) {
      const double r1 = r[i], r2 = r[dim_ + i], r3 = r[2 * dim_ + i], r4 = r[3 * dim_ + i],
                   r5 = r[4 * dim_ + i];
      out[i] = r1 + th * (r2 + u * (r3 + th * (r4 + u * r5)));
    }
  }

  double eval_component(double t, std::size_t i) const {
    const auto [s, th] = locate(t);
    const double u = 1.0 - th;
    const double* r = coef_.data() + 5 * dim_ * s;
    return r[i] + th * (r[dim_ + i] + u * (r[2 * dim_ + i] + th * (r[3 * dim_ + i] + u * r[4 * dim_ + i])));
  }

  double eval_derivative_component(double t, std::size_t i) const {
    const auto [s, th] = locate(t);
    const double* r = coef_.data() + 5 * dim_ * s;
    const double d = r[dim_ + i] + (1.0 - 2.0 * th) * r[2 * dim_ + i] +
                     th * (2.0 - 3.0 * th) * r[3 * dim_ + i] +
                     th * (2.0 + th * (-6.0 + 4.0 * th)) * r[4 * dim_ + i];
    return d / seg_h_[s];
  }

  // Step boundaries, used by event scanners to pick sample points.
  const std::vector<double>& step_times() const { return seg_t0_; }
  double step_end(std::size_t s) const { return seg_t0_[s] + seg_h_[s]; }

 private:
  friend class DormandPrince5;

  std::pair<std::size_t, double> locate(double t) const {
    if (seg_t0_.empty()) throw std::runtime_error("DenseSolution: empty");
    std::size_t lo = 0, hi = seg_t0_.size() - 1;
    if (t <= seg_t0_.front()) { return {0, (t - seg_t0_[0]) / seg_h_[0]}; }
    while (lo < hi) {
      const std::size_t mid = (lo + hi + 1) / 2;
      if (seg_t0_[mid] <= t) lo = mid;
      else hi = mid - 1;
    }
    return {lo, (t - seg_t0_[lo]) / seg_h_[lo]};
  }

  std::size_t dim_;
  double t0_ = 0.0, t1_ = 0.0;
  std::vector<double> seg_t0_, seg_h_;
  std::vector<double> coef_;  // 5 * dim per segment: rcont1..rcont5
  std::vector<double> y_end_;
};

// Right-hand side: f(t, y, dydt).  The optional guard is called after every
// accepted step with (t, y) and aborts integration when it returns false.
class DormandPrince5 {
 public:
  using Rhs = std::function<void(double, const double*, double*)>;
  using Guard = std::function<bool(double, const double*)>;

  explicit DormandPrince5(OdeOptions opts = {}) : opts_(opts) {}

  DenseSolution integrate(const Rhs& rhs, std::vector<double> y0, double t0, double t1,
                          const Guard& guard = nullptr) const {
    DenseSolution sol(y0.size());
    sol.t0_ = t0;
    sol.t1_ = t0;
    sol.y_end_ = std::move(y0);
    extend(rhs, sol, t1, guard);
    return sol;
  }

  // Continues an existing solution up to t1.
  void extend(const Rhs& rhs, DenseSolution& sol, double t1, const Guard& guard = nullptr) const {
    const std::size_t n = sol.dim();
    double t = sol.t1_;
    if (t1 <= t) return;
    std::vector<double> y = sol.y_end_;
    std::vector<double> k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), ytmp(n), ynew(n);
    rhs(t, y.data(), k1.data());
    double h = std::min(opts_.h_init, t1 - t);
    long steps = 0;
    while (t < t1) {
      if (++steps > opts_.max_steps) throw std::runtime_error("DormandPrince5: step limit");
      h = std::min({h, opts_.h_max, t1 - t});

      auto stage = [&](const double* coefs, int m, std::vector<double>& out) {
        for (std::size_t i = 0; i < n; ++i) {
          double acc = 0.0;
          const double* ks[6] = {k1.data(), k2.data(), k3.data(), k4.data(), k5.data(), k6.data()};
          for (int j = 0; j < m; ++j) acc += coefs[j] * ks[j][i];
          out[i] = y[i] + h * acc;
        }
      };
      static constexpr double a2[] = {0.2};
      static constexpr double a3[] = {3.0 / 40.0, 9.0 / 40.0};
      static constexpr double a4[] = {44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0};
      static constexpr double a5[] = {19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0,
                                      -212.0 / 729.0};
      static constexpr double a6[] = {9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0,
                                      49.0 / 176.0, -5103.0 / 18656.0};
      static constexpr double a7[] = {35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0,
                                      -2187.0 / 6784.0, 11.0 / 84.0};
      static constexpr double er[] = {71.0 / 57600.0, 0.0, -71.0 / 16695.0, 71.0 / 1920.0,
                                      -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0};

      stage(a2, 1, ytmp); rhs(t + 0.2 * h, ytmp.data(), k2.data());
      stage(a3, 2, ytmp); rhs(t + 0.3 * h, ytmp.data(), k3.data());
      stage(a4, 3, ytmp); rhs(t + 0.8 * h, ytmp.data(), k4.data());
      stage(a5, 4, ytmp); rhs(t + 8.0 / 9.0 * h, ytmp.data(), k5.data());
      stage(a6, 5, ytmp); rhs(t + h, ytmp.data(), k6.data());
      stage(a7, 6, ynew); rhs(t + h, ynew.data(), k7.data());

      double err = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double e = h * (er[0] * k1[i] + er[2] * k3[i] + er[3] * k4[i] + er[4] * k5[i] +
                              er[5] * k6[i] + er[6] * k7[i]);
        const double sc = opts_.atol + opts_.rtol * std::max(std::abs(y[i]), std::abs(ynew[i]));
        err += (e / sc) * (e / sc);
      }
      err = std::sqrt(err / n);

      if (err <= 1.0) {
        // Accept: store dense coefficients (Hairer's contd5).
        static constexpr double d1 = -12715105075.0 / 11282082432.0;
        static constexpr double d3 = 87487479700.0 / 32700410799.0;
        static constexpr double d4 = -10690763975.0 / 1880347072.0;
        static constexpr double d5 = 701980252875.0 / 199316789632.0;
        static constexpr double d6 = -1453857185.0 / 822651844.0;
        static constexpr double d7 = 69997945.0 / 29380423.0;
        sol.seg_t0_.push_back(t);
        sol.seg_h_.push_back(h);
        const std::size_t base = sol.coef_.size();
        sol.coef_.resize(base + 5 * n);
        double* r = sol.coef_.data() + base;
        for (std::size_t i = 0; i < n; ++i) {
          const double dy = ynew[i] - y[i];
          r[i] = y[i];
          r[n + i] = dy;
          r[2 * n + i] = h * k1[i] - dy;
          r[3 * n + i] = dy - h * k7[i] - r[2 * n + i];
          r[4 * n + i] = h * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] + d6 * k6[i] +
                              d7 * k7[i]);
        }
        t += h;
        y.swap(ynew);
        k1.swap(k7);  // FSAL
        sol.t1_ = t;
        sol.y_end_ = y;
        if (guard && !guard(t, y.data())) break;
        const double fac = std::clamp(0.9 * std::pow(std::max(err, 1e-10), -0.2), 0.2, 5.0);
        h *= fac;
      } else {
        h *= std::clamp(0.9 * std::pow(err, -0.2), 0.1, 1.0);
        if (h < 1e-14 * std::max(1.0, std::abs(t)))
          throw std::runtime_error("DormandPrince5: step underflow");
      }
    }
  }

 private:
  OdeOptions opts_;
};

}  // namespace liouville
