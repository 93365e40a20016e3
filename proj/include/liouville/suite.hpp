// Aggregated property suites behind the `suite` CLI command: Abel residuals,
// monotonicity-inequality signs, conservation along traces, the ordering
// theorems, and the accumulation of Jacobi zeros.  Every suite reports a JSON
// verdict; runs are deterministic for a fixed seed.
#pragma once

#include <json.hpp>
#include <string>
#include <vector>

#include "liouville/conjugate.hpp"
#include "liouville/degenerate.hpp"
#include "liouville/geodesic.hpp"
#include "liouville/quadrature.hpp"
#include "liouville/rng.hpp"

namespace liouville {

struct SuiteConfig {
  std::vector<double> a{3.0, 2.0, 1.0};
  AProfile profile = AProfile::sqrt_profile();
  std::vector<double> x0_frac;  // base-point fractions of the quarter periods
  std::uint64_t seed = 1;
  int abel_samples = 25;
  int sign_samples = 12;
  int conservation_samples = 20;
  double conservation_horizon = 20.0;
  int ordering_samples = 60;
  int accumulation_zeros = 10;
  double quad_tol = 1e-12;
};

inline std::vector<double> default_fractions(int n) {
  // fixed generic fractions inside (0, 1), mapped to (0, alpha_i/4)
  static const double table[] = {0.44, 0.68, 0.37, 0.59, 0.23, 0.71};
  std::vector<double> f(n);
  for (int i = 0; i < n; ++i) f[i] = table[i % 6];
  return f;
}

// Random interior direction avoiding cell and degeneracy bands.
inline DirectionU random_generic_direction(SplitMix64& rng, const Manifold& M,
                                           const BasePoint& p0, double band = 0.05) {
  const int n = M.n();
  for (int attempt = 0; attempt < 1000; ++attempt) {
    DirectionU dir;
    dir.u.resize(n - 1);
    for (int k = 0; k < n - 1; ++k) dir.u[k] = rng.uniform(0.0, 2.0 * kPi);
    bool ok = true;
    const std::vector<double> b = b_values_of_u(p0, dir);
    for (int k = 1; k <= n - 1 && ok; ++k) {
      const double width = p0.f_values[k - 1] - p0.f_values[k];
      ok = std::abs(b[k - 1] - p0.f_values[k]) > band * width &&
           std::abs(b[k - 1] - p0.f_values[k - 1]) > band * width &&
           std::abs(b[k - 1] - M.spec().a[k]) > band * 0.1 * M.spec().spread();
      if (k >= 2) ok = ok && std::abs(b[k - 1] - b[k - 2]) > band * 0.1 * M.spec().spread();
    }
    if (ok) return dir;
  }
  throw std::runtime_error("random_generic_direction: sampling failed");
}

// ---------------------------------------------------------------------------

inline nlohmann::json suite_abel(const SuiteConfig& cfg) {
  SplitMix64 rng(cfg.seed ^ 0xA11Cull);
  double worst = 0.0;
  int count = 0;
  for (int s = 0; s < cfg.abel_samples; ++s) {
    const std::vector<double> b = random_admissible_b(rng, cfg.a);
    const std::vector<double> res = abel_residuals(cfg.a, b, cfg.quad_tol);
    for (double r : res) worst = std::max(worst, std::abs(r));
    ++count;
  }
  nlohmann::json j;
  j["samples"] = count;
  j["max_residual"] = worst;
  j["pass"] = worst < 1e-8;
  return j;
}

inline nlohmann::json suite_signs(const SuiteConfig& cfg) {
  SplitMix64 rng(cfg.seed ^ 0x516E5ull);
  const int n = static_cast<int>(cfg.a.size()) - 1;
  int violations = 0, fd_unstable = 0, cases = 0;
  for (int s = 0; s < cfg.sign_samples; ++s) {
    const std::vector<double> b = random_admissible_b(rng, cfg.a);
    // P1 over all admissible subsets
    if (n >= 3) {
      std::vector<std::vector<int>> subsets{{}};
      for (int j = 1; j <= n - 1; ++j) {
        const std::size_t sz = subsets.size();
        for (std::size_t q = 0; q < sz; ++q) {
          std::vector<int> ext = subsets[q];
          ext.push_back(j);
          if (static_cast<int>(ext.size()) <= n - 3) subsets.push_back(ext);
        }
      }
      for (const auto& I : subsets) {
        if (static_cast<int>(I.size()) > n - 3) continue;
        InequalityRequest rq;
        rq.which = InequalityCase::P1;
        rq.subset_I = I;
        rq.quad_tol = cfg.quad_tol;
        const double v = inequality_value(cfg.a, b, cfg.profile, rq);
        ++cases;
        if (!(v > 0.0)) ++violations;
      }
    }
    for (int i = 1; i <= n - 1; ++i) {
      InequalityRequest rq;
      rq.i = i;
      rq.quad_tol = cfg.quad_tol;
      try {
        rq.which = InequalityCase::P2Full;
        ++cases;
        if (!(inequality_value(cfg.a, b, cfg.profile, rq) < 0.0)) ++violations;
        rq.which = InequalityCase::P3;
        ++cases;
        if (!(inequality_value(cfg.a, b, cfg.profile, rq) > 0.0)) ++violations;
        for (int j = 1; j <= n - 1; ++j) {
          if (j == i) continue;
          rq.which = InequalityCase::P2Pair;
          rq.j = j;
          ++cases;
          if (!(inequality_value(cfg.a, b, cfg.profile, rq) > 0.0)) ++violations;
        }
      } catch (const FDUnstable&) {
        ++fd_unstable;
      }
    }
  }
  nlohmann::json j;
  j["cases"] = cases;
  j["violations"] = violations;
  j["fd_unstable"] = fd_unstable;
  j["pass"] = violations == 0 && fd_unstable == 0;
  return j;
}

inline nlohmann::json suite_conservation(const SuiteConfig& cfg, const Manifold& M) {
  SplitMix64 rng(cfg.seed ^ 0xC0475ull);
  double worstF = 0.0, worstE = 0.0;
  int failures = 0;
  const std::vector<double> frac =
      cfg.x0_frac.empty() ? default_fractions(M.n()) : cfg.x0_frac;
  for (int s = 0; s < cfg.conservation_samples; ++s) {
    std::vector<double> fr(M.n());
    for (int i = 0; i < M.n(); ++i) fr[i] = rng.uniform(0.08, 0.92);
    const BasePoint p0 = M.base_point_from_fractions(fr);
    if (!p0.general) { --s; continue; }
    const DirectionU dir = random_generic_direction(rng, M, p0);
    const PhaseState st = phase_from_u(p0, dir);
    GeodesicTrace tr = integrate_geodesic(M, st, cfg.conservation_horizon);
    if (!tr.conservation_ok || tr.branch_hit) ++failures;
    worstF = std::max(worstF, tr.max_drift_F);
    worstE = std::max(worstE, tr.max_drift_E);
  }
  nlohmann::json j;
  j["traces"] = cfg.conservation_samples;
  j["horizon"] = cfg.conservation_horizon;
  j["max_drift_F"] = worstF;
  j["max_drift_E"] = worstE;
  j["failures"] = failures;
  j["pass"] = failures == 0 && worstF < 1e-8 && worstE < 1e-10;
  return j;
}

inline nlohmann::json suite_ordering(const SuiteConfig& cfg, const Manifold& M) {
  SplitMix64 rng(cfg.seed ^ 0x02De2ull);
  const int n = M.n();
  int checked = 0, t_violations = 0, r_violations = 0, skipped = 0;
  for (int s = 0; s < cfg.ordering_samples; ++s) {
    std::vector<double> fr(n);
    for (int i = 0; i < n; ++i) fr[i] = rng.uniform(0.08, 0.92);
    const BasePoint p0 = M.base_point_from_fractions(fr);
    if (!p0.general) { ++skipped; continue; }
    DirectionU dir;
    try {
      dir = random_generic_direction(rng, M, p0);
    } catch (const std::runtime_error&) { ++skipped; continue; }
    JacobiSetup setup;
    try {
      setup = setup_from_direction(M, p0, dir);
    } catch (const FrameDegenerate&) { ++skipped; continue; }
    const double T0 = detail::horizon_estimate(M, 1.6);
    GeodesicTrace tr = integrate_flow(M, setup.flow, T0);
    if (!tr.conservation_ok || tr.branch_hit) { ++skipped; continue; }
    EventData ev = compute_events(tr);
    bool have_all = true;
    for (int i = 0; i < n; ++i) have_all = have_all && std::isfinite(ev.t_half[i]);
    if (!have_all) {
      extend_flow(tr, T0 * 2.2);
      ev = compute_events(tr);
      for (int i = 0; i < n; ++i) have_all = have_all && std::isfinite(ev.t_half[i]);
      if (!have_all) { ++skipped; continue; }
    }
    ++checked;
    for (int i = 0; i + 1 < n; ++i)
      if (!(ev.t_half[i + 1] < ev.t_half[i])) ++t_violations;
    for (int i = 1; i <= n - 1; ++i) {
      if (ev.zero_in_S[i - 1]) continue;
      const std::optional<double> r = first_zero(tr, i - 1, i - 1);
      if (!r) continue;
      if (!(ev.t_half[i] < *r && *r < ev.t_half[i - 1])) ++r_violations;
    }
  }
  nlohmann::json j;
  j["checked"] = checked;
  j["skipped"] = skipped;
  j["t_order_violations"] = t_violations;
  j["r_bracket_violations"] = r_violations;
  j["pass"] = checked > 0 && t_violations == 0 && r_violations == 0;
  return j;
}

inline nlohmann::json suite_accumulation(const SuiteConfig& cfg, const Manifold& M) {
  SplitMix64 rng(cfg.seed ^ 0xACC5ull);
  const int n = M.n();
  nlohmann::json j;
  const std::vector<double> frac =
      cfg.x0_frac.empty() ? default_fractions(n) : cfg.x0_frac;
  const BasePoint p0 = M.base_point_from_fractions(frac);
  const DirectionU dir = random_generic_direction(rng, M, p0, 0.15);
  const int i_math = n - 1;
  JacobiSetup setup = setup_from_direction(M, p0, dir);
  const int K = cfg.accumulation_zeros;
  GeodesicTrace tr = integrate_flow(M, setup.flow, detail::horizon_estimate(M, 2.0 * K / 3.0));
  ZeroList zl = find_zeros(tr, i_math - 1, i_math - 1, 1e-6, tr.t_end());
  EventData ev = compute_events(tr);
  int guard = 0;
  while ((static_cast<int>(zl.zeros.size()) < K ||
          static_cast<int>(ev.s_times[i_math - 1].size()) < K) &&
         guard++ < 4) {
    extend_flow(tr, tr.t_end() * 1.5);
    zl = find_zeros(tr, i_math - 1, i_math - 1, 1e-6, tr.t_end());
    ev = compute_events(tr);
  }
  const std::vector<double> seq = accumulation_sequence(tr, ev, zl, i_math, K);
  bool strict = true;
  for (std::size_t k = 0; k + 1 < seq.size(); ++k) strict = strict && seq[k] > seq[k + 1];
  j["index"] = i_math;
  j["K"] = K;
  j["sequence"] = seq;
  j["strictly_decreasing"] = strict;
  j["pass"] = strict;
  return j;
}

// ---------------------------------------------------------------------------

inline nlohmann::json run_suite(const SuiteConfig& cfg) {
  nlohmann::json report;
  report["seed"] = cfg.seed;
  report["spectrum"] = cfg.a;
  report["profile"] = cfg.profile.kind_name();

  const ManifoldSpec spec = validate_spec(cfg.a, cfg.profile);
  report["condition"] = {{"passes", spec.condition.passes},
                         {"round_sphere_mode", spec.condition.round_sphere_mode}};
  Manifold M(spec);

  report["suites"]["abel"] = suite_abel(cfg);
  report["suites"]["signs"] = suite_signs(cfg);
  report["suites"]["conservation"] = suite_conservation(cfg, M);
  report["suites"]["ordering"] = suite_ordering(cfg, M);
  report["suites"]["accumulation"] = suite_accumulation(cfg, M);

  bool all = true;
  for (const auto& [name, sub] : report["suites"].items()) all = all && sub["pass"].get<bool>();
  report["pass"] = all;
  return report;
}

}  // namespace liouville
