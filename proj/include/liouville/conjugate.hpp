// Conjugate-locus assembly over a grid on the unit cotangent sphere: the
// radius fields r_i(u), the first conjugate locus K_{n-1}(p0) and its
// tangential counterpart, ordering and continuity reports, cuspidal-edge
// classification on the cells C_i^+-, the D_4^+ signature test at boundary
// cells, the four-cusp count for n = 2, and geometry export.
#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "liouville/degenerate.hpp"
#include "liouville/embedding.hpp"
#include "liouville/geodesic.hpp"

namespace liouville {

// ---------------------------------------------------------------------------

enum class SampleStatus { Ok, Hole, Excluded };

struct FieldSample {
  std::vector<double> u;
  std::vector<double> r;                    // r_i at slot i-1; NaN if not found
  double r2_last = std::numeric_limits<double>::quiet_NaN();  // second zero of y_{n-1}
  SampleStatus status = SampleStatus::Hole;
  bool pair_path = false;
  CellClassification cells;
  std::vector<std::vector<double>> x_at_r;  // base coords at each r_i
};

struct GridSpec {
  std::vector<int> counts;   // per u-dimension
  bool second_zero = false;  // also locate r^2_{n-1}
  double cell_tol = 1e-7;          // cell membership tolerance (relative)
  double pair_band_rel = 1e-5;     // |b_j - b_{j-1}| below this * spread -> pair path
  double exclusion_rel = 1e-9;     // |b_i - a_i| below this * spread -> excluded
  int refine_boundary = 0;         // extra samples per boundary point (0 = off)
};

struct FieldOptions {
  IntegrationOptions integ;
  double horizon_factor = 1.4;  // initial horizon = factor * pi * sqrt(a_0)
  double horizon_max_factor = 8.0;
  FieldOptions() {
    integ.rtol = 1e-10;
    integ.atol = 1e-12;
  }
};

struct ConjugateField {
  const Manifold* M = nullptr;
  BasePoint p0;
  GridSpec grid;
  std::vector<FieldSample> samples;  // row-major over grid counts, refinements appended
  std::size_t grid_samples = 0;      // samples belonging to the regular lattice

  int n() const { return M->n(); }
  std::size_t lattice_index(const std::vector<int>& idx) const {
    std::size_t s = 0;
    for (std::size_t d = 0; d < idx.size(); ++d) s = s * grid.counts[d] + idx[d];
    return s;
  }
};

// ---------------------------------------------------------------------------
// Per-sample solve

namespace detail {

inline double horizon_estimate(const Manifold& M, double factor) {
  return factor * kPi * std::sqrt(M.spec().a.front());
}

// Zeros of the 2x2 determinant of the pair fields projected on their seed
// frames; returns the first two (r_j <= r_{j-1}).
inline std::vector<double> pair_det_zeros(const GeodesicTrace& trace, double t_skip,
                                          int want = 2) {
  auto det = [&](double t) {
    const double y00 = trace.y_scalar(0, 0, t), y01 = trace.y_scalar(0, 1, t);
    const double y10 = trace.y_scalar(1, 0, t), y11 = trace.y_scalar(1, 1, t);
    return y00 * y11 - y01 * y10;
  };
  std::vector<double> ts = trace.sample_times();
  std::vector<double> zs;
  double prev_t = t_skip, prev_v = det(t_skip);
  double min_abs = std::numeric_limits<double>::infinity(), min_t = 0.0, ref_scale = 0.0;
  for (double t : ts) {
    if (t <= t_skip) continue;
    const double v = det(t);
    ref_scale = std::max(ref_scale, std::abs(v));
    if ((prev_v > 0.0) != (v > 0.0)) {
      zs.push_back(bisect_root(det, prev_t, t, 1e-11 * std::max(1.0, trace.t_end())));
      if (static_cast<int>(zs.size()) >= want) return zs;
    }
    if (std::abs(v) < min_abs) { min_abs = std::abs(v); min_t = t; }
    prev_t = t;
    prev_v = v;
  }
  // No (or one) sign change: a grazing double zero.  Use the minimum of |det|
  // as a coincident pair when it dips far below the field scale.
  if (zs.empty() && ref_scale > 0.0 && min_abs < 1e-10 * ref_scale) {
    zs.push_back(min_t);
    zs.push_back(min_t);
  } else if (zs.size() == 1 && ref_scale > 0.0 && min_abs < 1e-10 * ref_scale && min_t > zs[0]) {
    zs.push_back(min_t);
  }
  return zs;
}

}  // namespace detail

// Solves one direction sample; fills r_i, optional second zero, endpoint
// coordinates.  Near a boundary cell the degenerate-pair determinant
// supplies the colliding pair of radii.
inline FieldSample solve_direction(const Manifold& M, const BasePoint& p0,
                                   const std::vector<double>& u, const GridSpec& grid,
                                   const FieldOptions& opts = {}) {
  const int n = M.n();
  FieldSample out;
  out.u = u;
  out.r.assign(n - 1, std::numeric_limits<double>::quiet_NaN());
  out.x_at_r.assign(n - 1, {});
  DirectionU dir{u};
  out.cells = classify_cell(p0, dir, grid.cell_tol);

  const std::vector<double> b = b_values_of_u(p0, dir);
  const double spread = M.spec().spread();
  for (int k = 1; k <= n - 1; ++k) {
    if (std::abs(b[k - 1] - M.spec().a[k]) < grid.exclusion_rel * spread) {
      out.status = SampleStatus::Excluded;  // tangent to N_k, excluded upstream
      return out;
    }
  }

  int pair_j = 0;
  for (int k = 2; k <= n - 1; ++k)
    if (std::abs(b[k - 1] - b[k - 2]) < grid.pair_band_rel * spread) pair_j = k;

  const double T0 = detail::horizon_estimate(M, opts.horizon_factor);
  const double Tmax = detail::horizon_estimate(M, opts.horizon_max_factor);

  try {
    if (pair_j == 0) {
      JacobiSetup setup = setup_from_direction(M, p0, dir);
      GeodesicTrace trace = integrate_flow(M, setup.flow, T0, opts.integ);
      for (int i = 1; i <= n - 1; ++i) {
        std::optional<double> z = first_zero(trace, i - 1, i - 1);
        while (!z && trace.t_end() < Tmax && trace.conservation_ok && !trace.branch_hit) {
          extend_flow(trace, trace.t_end() * 1.6, opts.integ);
          z = first_zero(trace, i - 1, i - 1);
        }
        if (!z) { out.status = SampleStatus::Hole; return out; }
        out.r[i - 1] = *z;
        out.x_at_r[i - 1] = trace.x_at(*z);
      }
      if (grid.second_zero) {
        const int v = n - 2;  // y_{n-1}
        ZeroList zl = find_zeros(trace, v, v, 1e-6, trace.t_end(), 2);
        while (zl.zeros.size() < 2 && trace.t_end() < 2.0 * Tmax && trace.conservation_ok) {
          extend_flow(trace, trace.t_end() * 1.6, opts.integ);
          zl = find_zeros(trace, v, v, 1e-6, trace.t_end(), 2);
        }
        if (zl.zeros.size() >= 2) out.r2_last = zl.zeros[1];
      }
    } else {
      out.pair_path = true;
      PairChart ch = make_pair_chart(M, p0, pair_j, dir);
      // nu coordinates of this direction
      const double bj = b[pair_j - 1], bjm1 = b[pair_j - 2];
      const double f0 = p0.f_values[pair_j - 1];
      const double nu1 = 0.5 * (bj + bjm1) - f0;
      const double prod = (bjm1 - f0) * (f0 - bj);
      double nu2 = prod > 0.0 ? std::sqrt(prod) : 0.0;
      // sign of nu2 = sign of xi_j at the direction
      const CovectorU cv = covector_from_u(p0, dir);
      if (cv.xi[pair_j - 1] < 0.0) nu2 = -nu2;
      PairSetup ps = setup_pair(M, ch, nu1, nu2);

      // far-field scalar variations for the remaining indices
      JacobiSetup far;
      bool have_far = false;
      if (n >= 4) {
        try {
          far = setup_from_direction(M, p0, dir);
          have_far = true;
        } catch (const FrameDegenerate&) {
          have_far = false;  // another simultaneous degeneracy: give up below
        }
      }
      FlowSetup flow = ps.flow;
      std::vector<int> far_slots;
      if (have_far) {
        for (int i = 1; i <= n - 1; ++i) {
          if (i == pair_j || i == pair_j - 1) continue;
          flow.var_dxi0.push_back(far.flow.var_dxi0[i - 1]);
          flow.frame0.push_back(far.flow.frame0[i - 1]);
          far_slots.push_back(i);
        }
      } else if (n >= 4) {
        out.status = SampleStatus::Hole;
        return out;
      }

      GeodesicTrace trace = integrate_flow(M, flow, T0, opts.integ);
      std::vector<double> dz = detail::pair_det_zeros(trace, 1e-6);
      while (dz.size() < 2 && trace.t_end() < Tmax && trace.conservation_ok) {
        extend_flow(trace, trace.t_end() * 1.6, opts.integ);
        dz = detail::pair_det_zeros(trace, 1e-6);
      }
      if (dz.size() < 2) { out.status = SampleStatus::Hole; return out; }
      out.r[pair_j - 1] = dz[0];      // r_j <= r_{j-1}
      out.r[pair_j - 2] = dz[1];
      out.x_at_r[pair_j - 1] = trace.x_at(dz[0]);
      out.x_at_r[pair_j - 2] = trace.x_at(dz[1]);
      for (std::size_t s = 0; s < far_slots.size(); ++s) {
        const int slot = 2 + static_cast<int>(s);
        std::optional<double> z = first_zero(trace, slot, slot);
        while (!z && trace.t_end() < Tmax && trace.conservation_ok) {
          extend_flow(trace, trace.t_end() * 1.6, opts.integ);
          z = first_zero(trace, slot, slot);
        }
        if (!z) { out.status = SampleStatus::Hole; return out; }
        out.r[far_slots[s] - 1] = *z;
        out.x_at_r[far_slots[s] - 1] = trace.x_at(*z);
      }
      if (grid.second_zero) {
        // second det zero after r_{j-1} approximates r^2 of the colliding pair;
        // only the generic-path value is used by the k-th locus check, so the
        // pair path leaves it unset.
      }
    }
    out.status = SampleStatus::Ok;
  } catch (const FrameDegenerate&) {
    out.status = SampleStatus::Hole;
  } catch (const ComplexRoots&) {
    out.status = SampleStatus::Hole;
  } catch (const NotReached&) {
    out.status = SampleStatus::Hole;
  } catch (const std::runtime_error&) {
    out.status = SampleStatus::Hole;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Field assembly over the torus lattice

inline ConjugateField r_field(const Manifold& M, const BasePoint& p0, const GridSpec& grid,
                              const FieldOptions& opts = {}) {
  const int n = M.n();
  if (static_cast<int>(grid.counts.size()) != n - 1)
    throw std::invalid_argument("r_field: grid dimension must be n-1");
  ConjugateField field;
  field.M = &M;
  field.p0 = p0;
  field.grid = grid;

  std::size_t total = 1;
  for (int c : grid.counts) total *= c;
  field.samples.reserve(total);
  std::vector<int> idx(n - 1, 0);
  for (std::size_t s = 0; s < total; ++s) {
    std::vector<double> u(n - 1);
    for (int d = 0; d < n - 1; ++d) u[d] = 2.0 * kPi * idx[d] / grid.counts[d];
    field.samples.push_back(solve_direction(M, p0, u, grid, opts));
    for (int d = n - 2; d >= 0; --d) {
      if (++idx[d] < grid.counts[d]) break;
      idx[d] = 0;
    }
  }
  field.grid_samples = field.samples.size();

  // Optional refinement near the boundary points dC_k^+ (u_k = +-pi/2 and
  // u_{k-1} in {0, pi}) at 4x density in a small box.
  if (grid.refine_boundary > 0 && n >= 3) {
    const int R = grid.refine_boundary;
    for (int k = 2; k <= n - 1; ++k) {
      for (double uk : {kPi / 2, 3 * kPi / 2}) {
        for (double ukm1 : {0.0, kPi}) {
          const double box = 2.0 * kPi / grid.counts[k - 1];
          for (int aI = -R; aI <= R; ++aI)
            for (int bI = -R; bI <= R; ++bI) {
              std::vector<double> u(n - 1, 0.3);  // generic value in other slots
              u[k - 1] = uk + box * aI / (2.0 * R + 1.0);
              u[k - 2] = ukm1 + box * bI / (2.0 * R + 1.0);
              field.samples.push_back(solve_direction(M, p0, u, grid, opts));
            }
        }
      }
    }
  }
  return field;
}

// ---------------------------------------------------------------------------
// Reports over a field

struct OrderingReport {
  bool ok = true;
  std::size_t violations = 0;
  std::size_t equalities_off_boundary = 0;
  std::size_t holes = 0, excluded = 0;
  double hole_rate = 0.0;
  double max_violation = 0.0;
};

// r_i <= r_{i-1} with equality only at boundary-labeled samples.
inline OrderingReport check_ordering(const ConjugateField& field, double eq_tol = 1e-7) {
  OrderingReport rep;
  std::size_t usable = 0;
  for (const FieldSample& s : field.samples) {
    if (s.status == SampleStatus::Excluded) { ++rep.excluded; continue; }
    if (s.status == SampleStatus::Hole) { ++rep.holes; continue; }
    ++usable;
    for (int i = 2; i <= field.n() - 1; ++i) {
      const double gap = s.r[i - 2] - s.r[i - 1];  // r_{i-1} - r_i >= 0
      if (gap < -eq_tol) {
        ++rep.violations;
        rep.max_violation = std::max(rep.max_violation, -gap);
      } else if (gap < eq_tol) {
        const bool on_boundary =
            std::find(s.cells.boundary_pairs.begin(), s.cells.boundary_pairs.end(), i) !=
            s.cells.boundary_pairs.end();
        if (!on_boundary) ++rep.equalities_off_boundary;
      }
    }
  }
  rep.hole_rate = field.samples.empty() ? 0.0
                                        : static_cast<double>(rep.holes) / field.samples.size();
  rep.ok = rep.violations == 0 && rep.equalities_off_boundary == 0;
  return rep;
}

// min_u r2_{n-1}(u) > max_u r_1(u): the hypothesis under which K_{n-i} is the
// i-th conjugate locus.
struct KthConjugateReport {
  bool hypothesis_holds = false;
  double min_second_zero = 0.0;
  double max_r1 = 0.0;
  std::size_t samples_with_second = 0;
};

inline KthConjugateReport kth_conjugate_check(const ConjugateField& field) {
  KthConjugateReport rep;
  rep.min_second_zero = std::numeric_limits<double>::infinity();
  rep.max_r1 = 0.0;
  for (const FieldSample& s : field.samples) {
    if (s.status != SampleStatus::Ok) continue;
    rep.max_r1 = std::max(rep.max_r1, s.r[0]);
    if (std::isfinite(s.r2_last)) {
      rep.min_second_zero = std::min(rep.min_second_zero, s.r2_last);
      ++rep.samples_with_second;
    }
  }
  rep.hypothesis_holds =
      rep.samples_with_second > 0 && rep.min_second_zero > rep.max_r1;
  return rep;
}

// ---------------------------------------------------------------------------
// Cuspidal-edge classification at a point of C_i^+- (interior)

enum class SingularityTag { Regular, CuspidalEdge, D4PlusCandidate, Excluded, Inconclusive };

struct CuspClassification {
  SingularityTag tag = SingularityTag::Inconclusive;
  double dr_du = 0.0;        // first derivative along u_i (should vanish on the cell)
  double d2r_du2 = 0.0;      // second derivative (should not vanish)
  double cubic_coeff = 0.0;  // c of the transverse-coordinate expansion
  double quad_over_cubic = 0.0;
  std::string note;
};

struct CuspParams {
  double h = 0.04;            // u_i offset of the fit stencil
  double eps1 = 1e-5;         // |dr/du_i| bound
  double eps2 = 1e-4;         // |d2r/du_i^2| lower bound
  double ratio_tol = 0.10;    // quadratic term vs cubic term at scale h
  double eps4 = 1e-6;         // |c| lower bound
  FieldOptions field;
};

inline CuspClassification cusp_classify(const Manifold& M, const BasePoint& p0, int i_math,
                                        const std::vector<double>& u0, const CuspParams& params,
                                        const GridSpec& grid_for_solve) {
  const int n = M.n();
  CuspClassification out;
  DirectionU d0{u0};
  CellClassification cells = classify_cell(p0, d0, 1e-6);
  const bool on_minus = std::find(cells.minus_cells.begin(), cells.minus_cells.end(), i_math) !=
                        cells.minus_cells.end();
  const bool on_plus = std::find(cells.plus_cells.begin(), cells.plus_cells.end(), i_math) !=
                       cells.plus_cells.end();
  if (!on_minus && !on_plus) {
    out.tag = SingularityTag::Regular;
    out.note = "direction not on C_i^-+; immersion regime";
    return out;
  }
  if (!cells.boundary_pairs.empty()) {
    out.tag = SingularityTag::Excluded;
    out.note = "on a boundary cell; use the D4+ test";
    return out;
  }
  // Transverse base coordinate: x_{i+1} on C_i^- (b_i = a_i^-), x_i on C_i^+.
  const int coord = on_minus ? i_math : (i_math - 1);  // 0-based

  const double h = params.h;
  double rr[5];
  double xx[5];
  std::vector<std::vector<double>> endpoints(5);
  for (int s = -2; s <= 2; ++s) {
    std::vector<double> u = u0;
    u[i_math - 1] += s * h;
    FieldSample fs = solve_direction(M, p0, u, grid_for_solve, params.field);
    if (fs.status != SampleStatus::Ok) {
      out.tag = SingularityTag::Inconclusive;
      out.note = "stencil sample failed";
      return out;
    }
    rr[s + 2] = fs.r[i_math - 1];
    endpoints[s + 2] = fs.x_at_r[i_math - 1];
  }
  // The stencil endpoints may sit on different lifts of the branched cover;
  // move each to the deck image closest to the center endpoint before taking
  // coordinate differences.
  const double alpha = M.alpha(coord + 1);
  const unsigned deck_count = 1u << (n - 1);
  for (int k = 0; k < 5; ++k) {
    double best = std::numeric_limits<double>::infinity();
    double best_coord = 0.0;
    for (unsigned mask = 0; mask < deck_count; ++mask) {
      const std::vector<double> gx = M.apply_deck(mask, endpoints[k]);
      double d2 = 0.0;
      for (int m = 0; m < n; ++m) {
        const double dm = M.circle_distance(m, gx[m], endpoints[2][m]);
        d2 += dm * dm;
      }
      if (d2 < best) {
        best = d2;
        best_coord = gx[coord];
      }
    }
    double d = best_coord - M.wrap(coord, endpoints[2][coord]);
    d -= alpha * std::round(d / alpha);
    xx[k] = d;
  }
  // One Richardson level on the r-stencil (the raw central difference keeps
  // an O(h^2) cubic-term contamination that eps1 would reject).
  out.dr_du = (8.0 * (rr[3] - rr[1]) - (rr[4] - rr[0])) / (12.0 * h);
  out.d2r_du2 = (-rr[4] + 16.0 * rr[3] - 30.0 * rr[2] + 16.0 * rr[1] - rr[0]) / (12.0 * h * h);
  const double O1 = 0.5 * (xx[3] - xx[1]), O2 = 0.5 * (xx[4] - xx[0]);
  const double E1 = 0.5 * (xx[3] + xx[1]), E2 = 0.5 * (xx[4] + xx[0]);
  const double c = (32.0 * O1 - O2) / (24.0 * h * h * h);
  const double q = (16.0 * E1 - E2) / (12.0 * h * h);
  out.cubic_coeff = c;
  out.quad_over_cubic = std::abs(q * h * h) / std::max(std::abs(c * h * h * h), 1e-300);

  const bool ok = std::abs(out.dr_du) < params.eps1 && std::abs(out.d2r_du2) > params.eps2 &&
                  out.quad_over_cubic < params.ratio_tol && std::abs(c) > params.eps4;
  out.tag = ok ? SingularityTag::CuspidalEdge : SingularityTag::Inconclusive;
  if (!ok) out.note = "cubic fit outside tolerances";
  return out;
}

// ---------------------------------------------------------------------------
// D4+ signature at a boundary cell

struct D4Params {
  double nu_radius_rel = 0.01;  // nu circle radius, relative to the local f-gaps
  int nu_samples = 16;
  double z_tol = 1e-7;
  double theta_tol = 1e-5;
  double cone_residual_tol = 0.05;
  double horizon_factor = 1.6;
  IntegrationOptions integ;
};

struct D4Report {
  SingularityTag tag = SingularityTag::Inconclusive;
  DegeneratePairState state;
  double cone_residual = 1.0;
  int cone_signature_plus = 0, cone_signature_minus = 0;
  bool sheets_split = false;
  std::string failed;
};

inline D4Report d4_classify(const Manifold& M, const BasePoint& p0, int j,
                            const DirectionU& u0, const D4Params& params = {}) {
  const int n = M.n();
  D4Report rep;
  if (n < 3 || j < 2 || j > n - 1) {
    rep.failed = "no boundary cells exist for these (n, j)";
    throw NotApplicable("d4_classify: " + rep.failed);
  }
  PairChart ch = make_pair_chart(M, p0, j, u0);
  const double horizon = detail::horizon_estimate(M, params.horizon_factor);
  auto [st, trace0] = degenerate_pair(M, ch, horizon, params.integ);
  rep.state = st;

  bool ok = st.z_j_norm < params.z_tol && st.z_jm1_norm < params.z_tol;
  if (!ok) rep.failed = "double degeneracy |Z(tau1)| too large";
  if (ok && std::abs(st.theta_tau1 - 2.0 * kPi) > params.theta_tol) {
    ok = false;
    rep.failed = "theta(tau1, 0) != 2 pi";
  }

  // Cone fit in Euclidean coordinates of T_{p0}M: sample the two sheets on a
  // small nu-circle and fit a homogeneous quadric through the vertex.
  if (ok) {
    const double gap = std::min(p0.f_values[j - 2] - p0.f_values[j - 1],
                                p0.f_values[j - 1] - (j < n ? p0.f_values[j] : M.spec().a.back()));
    const double delta = params.nu_radius_rel * gap;
    const std::vector<double> xi0 = pair_covector(ch, 0.0, 0.0);
    const std::vector<double> v0 = tangent_euclidean(M, p0.x, xi0);
    std::vector<double> vertex(n);
    for (int m = 0; m < n; ++m) vertex[m] = st.tau1 * v0[m];

    std::vector<std::vector<double>> cloud;
    std::vector<int> sheet;  // +1 for r_{j-1}, -1 for r_j
    for (int s = 0; s < params.nu_samples; ++s) {
      const double psi = 2.0 * kPi * s / params.nu_samples;
      const double nu1 = delta * std::cos(psi), nu2 = delta * std::sin(psi);
      PairSetup ps = setup_pair(M, ch, nu1, nu2);
      GeodesicTrace tr = integrate_flow(M, ps.flow, horizon, params.integ);
      std::vector<double> dz = detail::pair_det_zeros(tr, 1e-6);
      if (dz.size() < 2) continue;
      const std::vector<double> vdir = tangent_euclidean(M, p0.x, ps.flow.state.xi);
      for (int which = 0; which < 2; ++which) {
        std::vector<double> pnt(n);
        for (int m = 0; m < n; ++m) pnt[m] = dz[which] * vdir[m] - vertex[m];
        cloud.push_back(pnt);
        sheet.push_back(which == 0 ? -1 : +1);
      }
    }
    if (cloud.size() < 8) {
      ok = false;
      rep.failed = "too few cone samples";
    } else {
      // Least-squares homogeneous quadric d^T Q d = 0, |Q|_F = 1 via the
      // smallest eigenvector of the 6x6 normal matrix (n = 3 case).
      const int nq = 6;
      std::vector<double> AtA(nq * nq, 0.0);
      auto rowv = [](const std::vector<double>& d) {
        const double s2 = std::sqrt(2.0);
        return std::vector<double>{d[0] * d[0], d[1] * d[1], d[2] * d[2],
                                   s2 * d[0] * d[1], s2 * d[0] * d[2], s2 * d[1] * d[2]};
      };
      for (const auto& d : cloud) {
        const std::vector<double> row = rowv(d);
        for (int r = 0; r < nq; ++r)
          for (int c = 0; c < nq; ++c) AtA[r * nq + c] += row[r] * row[c];
      }
      std::vector<double> evals, evecs;
      symmetric_eigen(AtA, nq, evals, evecs);
      int best = 0;
      for (int k = 1; k < nq; ++k)
        if (evals[k] < evals[best]) best = k;
      std::vector<double> qv(nq);
      for (int k = 0; k < nq; ++k) qv[k] = evecs[k * nq + best];
      const double s2 = std::sqrt(2.0);
      std::vector<double> Q{qv[0],      qv[3] / s2, qv[4] / s2,
                            qv[3] / s2, qv[1],      qv[5] / s2,
                            qv[4] / s2, qv[5] / s2, qv[2]};
      // Relative residual
      double num = 0.0, den = 0.0;
      for (const auto& d : cloud) {
        double qd = 0.0;
        for (int r = 0; r < 3; ++r)
          for (int c = 0; c < 3; ++c) qd += d[r] * Q[r * 3 + c] * d[c];
        double d2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
        num += qd * qd;
        den += d2 * d2;
      }
      rep.cone_residual = std::sqrt(num / den);
      std::vector<double> qe, qvcs;
      symmetric_eigen(Q, 3, qe, qvcs);
      for (double ev2 : qe) (ev2 > 0 ? rep.cone_signature_plus : rep.cone_signature_minus)++;
      // axis = eigenvector of the minority-sign eigenvalue; the two sheets
      // must lie on opposite sides.
      int axis_idx = 0;
      const bool plus_minority = rep.cone_signature_plus < rep.cone_signature_minus;
      double extreme = plus_minority ? -std::numeric_limits<double>::infinity()
                                     : std::numeric_limits<double>::infinity();
      for (int k = 0; k < 3; ++k) {
        if (plus_minority ? (qe[k] > extreme) : (qe[k] < extreme)) {
          extreme = qe[k];
          axis_idx = k;
        }
      }
      bool split_ok = true;
      double sign_ref_minus = 0.0, sign_ref_plus = 0.0;
      for (std::size_t s3 = 0; s3 < cloud.size(); ++s3) {
        double proj = 0.0;
        for (int m = 0; m < 3; ++m) proj += cloud[s3][m] * qvcs[m * 3 + axis_idx];
        double& ref = (sheet[s3] < 0) ? sign_ref_minus : sign_ref_plus;
        if (ref == 0.0) ref = proj;
        else if (ref * proj < 0.0) split_ok = false;
      }
      if (sign_ref_minus * sign_ref_plus > 0.0) split_ok = false;
      rep.sheets_split = split_ok;
      const bool sig_ok = (rep.cone_signature_plus == 2 && rep.cone_signature_minus == 1) ||
                          (rep.cone_signature_plus == 1 && rep.cone_signature_minus == 2);
      if (rep.cone_residual > params.cone_residual_tol || !sig_ok || !split_ok) {
        ok = false;
        rep.failed = "cone-edge fit failed";
      }
    }
  }
  rep.tag = ok ? SingularityTag::D4PlusCandidate : SingularityTag::Inconclusive;
  return rep;
}

// ---------------------------------------------------------------------------
// Four-cusp count for surfaces (n = 2)

struct CuspCountResult {
  int count = 0;
  bool degenerate_point_locus = false;  // round sphere: locus is a point
};

inline CuspCountResult count_cusps_2d(const ConjugateField& field) {
  if (field.n() != 2) throw NotApplicable("count_cusps_2d: requires n = 2");
  CuspCountResult out;
  std::vector<double> r;
  for (std::size_t s = 0; s < field.grid_samples; ++s)
    if (field.samples[s].status == SampleStatus::Ok) r.push_back(field.samples[s].r[0]);
  if (r.size() < 8) throw NotReached("count_cusps_2d: too few usable samples");
  double rmin = r[0], rmax = r[0], mean = 0.0;
  for (double v : r) {
    rmin = std::min(rmin, v);
    rmax = std::max(rmax, v);
    mean += v;
  }
  mean /= r.size();
  if (rmax - rmin < 1e-6 * mean) {
    out.degenerate_point_locus = true;  // constant radius: point conjugate locus
    return out;
  }
  // Cusps of u -> gamma(r(u), u) occur where dr/du reverses sign (the locus
  // velocity is r'(u) gamma-dot).
  const std::size_t N = r.size();
  int count = 0;
  for (std::size_t k = 0; k < N; ++k) {
    const double d1 = r[(k + 1) % N] - r[k];
    const double d2 = r[(k + 2) % N] - r[(k + 1) % N];
    if (d1 != 0.0 && d2 != 0.0 && (d1 > 0.0) != (d2 > 0.0)) ++count;
  }
  out.count = count;
  return out;
}

// ---------------------------------------------------------------------------
// Locus assembly and export

struct ConjugateSample {
  std::vector<double> u;
  double r = 0.0;
  std::vector<double> base_x;      // coordinates of gamma(r(u), u), wrapped
  std::vector<double> tangential;  // r * unit vector in Euclidean T_{p0}M coords
  std::vector<double> ambient;     // ellipsoid embedding when available
  std::string label;
};

inline std::vector<ConjugateSample> first_conjugate_locus(const ConjugateField& field) {
  const Manifold& M = *field.M;
  const int n = M.n();
  std::vector<ConjugateSample> out;
  const bool can_embed = M.spec().profile.is_sqrt();
  for (std::size_t s = 0; s < field.grid_samples; ++s) {
    const FieldSample& fs = field.samples[s];
    if (fs.status != SampleStatus::Ok) continue;
    ConjugateSample cs;
    cs.u = fs.u;
    cs.r = fs.r[n - 2];  // r_{n-1}
    cs.base_x = fs.x_at_r[n - 2];
    for (int i = 0; i < n; ++i) cs.base_x[i] = M.wrap(i, cs.base_x[i]);
    const CovectorU cv = covector_from_u(field.p0, DirectionU{fs.u});
    const std::vector<double> vdir = tangent_euclidean(M, field.p0.x, cv.xi);
    cs.tangential.resize(n);
    for (int m = 0; m < n; ++m) cs.tangential[m] = cs.r * vdir[m];
    if (can_embed) cs.ambient = embed_ellipsoid(M, fs.x_at_r[n - 2]);
    if (!fs.cells.boundary_pairs.empty()) cs.label = "d4plus-candidate";
    else if (!fs.cells.minus_cells.empty() || !fs.cells.plus_cells.empty()) cs.label = "cusp-cell";
    else cs.label = "regular";
    out.push_back(std::move(cs));
  }
  return out;
}

inline void export_field_csv(const ConjugateField& field, std::ostream& os) {
  const int n = field.n();
  os << "status,pair_path";
  for (int d = 0; d < n - 1; ++d) os << ",u" << (d + 1);
  for (int i = 1; i <= n - 1; ++i) os << ",r" << i;
  os << ",r2_last,label\n";
  for (const FieldSample& s : field.samples) {
    os << static_cast<int>(s.status) << ',' << (s.pair_path ? 1 : 0);
    char buf[32];
    for (double v : s.u) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      os << ',' << buf;
    }
    for (double v : s.r) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      os << ',' << buf;
    }
    std::snprintf(buf, sizeof buf, "%.17g", s.r2_last);
    os << ',' << buf;
    std::string label = "interior";
    if (!s.cells.boundary_pairs.empty()) label = "boundary";
    else if (!s.cells.plus_cells.empty()) label = "plus-cell";
    else if (!s.cells.minus_cells.empty()) label = "minus-cell";
    os << ',' << label << '\n';
  }
}

// OBJ: for n = 2 an ambient closed polyline; for n = 3 the tangential torus
// mesh with per-vertex label colors.
inline void export_locus_obj(const ConjugateField& field,
                             const std::vector<ConjugateSample>& locus, std::ostream& os) {
  const int n = field.n();
  if (n == 2) {
    for (const ConjugateSample& cs : locus) {
      if (cs.ambient.size() == 3)
        os << "v " << cs.ambient[0] << ' ' << cs.ambient[1] << ' ' << cs.ambient[2] << '\n';
      else
        os << "v " << cs.tangential[0] << ' ' << cs.tangential[1] << " 0\n";
    }
    os << "l";
    for (std::size_t k = 1; k <= locus.size(); ++k) os << ' ' << k;
    os << " 1\n";
    return;
  }
  if (n != 3) throw std::runtime_error("export_locus_obj: OBJ supported for n = 2, 3 targets");
  const int N1 = field.grid.counts[0], N2 = field.grid.counts[1];
  std::vector<int> vert_id(field.grid_samples, 0);
  int next = 1;
  for (std::size_t s = 0; s < field.grid_samples; ++s) {
    const FieldSample& fs = field.samples[s];
    if (fs.status != SampleStatus::Ok) continue;
    const CovectorU cv = covector_from_u(field.p0, DirectionU{fs.u});
    const std::vector<double> vdir = tangent_euclidean(*field.M, field.p0.x, cv.xi);
    const double r = fs.r[field.n() - 2];
    double col[3] = {0.7, 0.7, 0.7};
    if (!fs.cells.boundary_pairs.empty()) { col[0] = 1; col[1] = 0; col[2] = 0; }
    else if (!fs.cells.plus_cells.empty()) { col[0] = 1; col[1] = 0.6; col[2] = 0; }
    else if (!fs.cells.minus_cells.empty()) { col[0] = 0; col[1] = 0.4; col[2] = 1; }
    os << "v " << r * vdir[0] << ' ' << r * vdir[1] << ' ' << r * vdir[2] << ' ' << col[0] << ' '
       << col[1] << ' ' << col[2] << '\n';
    vert_id[s] = next++;
  }
  for (int i = 0; i < N1; ++i)
    for (int j = 0; j < N2; ++j) {
      const int a = vert_id[i * N2 + j], b = vert_id[((i + 1) % N1) * N2 + j],
                c = vert_id[((i + 1) % N1) * N2 + (j + 1) % N2],
                d = vert_id[i * N2 + (j + 1) % N2];
      if (a && b && c) os << "f " << a << ' ' << b << ' ' << c << '\n';
      if (a && c && d) os << "f " << a << ' ' << c << ' ' << d << '\n';
    }
}

}  // namespace liouville
