#pragma once

// Bound evaluators (Gronwall envelope, flow-map bounds) and the numerical
// studies built on them: empirical convergence in N and stability under
// perturbed initial data.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "delaykinetic/dde.hpp"
#include "delaykinetic/error.hpp"
#include "delaykinetic/kernels.hpp"
#include "delaykinetic/meanfield.hpp"
#include "delaykinetic/measures.hpp"
#include "delaykinetic/parallel.hpp"
#include "delaykinetic/paths.hpp"

namespace delaykinetic {

namespace detail {

/// int_0^dt a(s) e^{x (1 - s/dt)} ds for a linear from a0 to a1 on the cell.
inline double exp_cell(double a0, double a1, double x, double dt) {
  double phi, psi;  // phi = int_0^1 e^{xv} dv, psi = int_0^1 v e^{xv} dv
  if (std::abs(x) < 0.1) {
    phi = 0.0;
    psi = 0.0;
    double term = 1.0;  // x^k / k!
    for (int k = 0; k < 14; ++k) {
      phi += term / (k + 1);
      psi += term / (k + 2);
      term *= x / (k + 1);
    }
  } else {
    const double em1 = std::expm1(x);
    phi = em1 / x;
    psi = (x * (em1 + 1.0) - em1) / (x * x);
  }
  return dt * (a0 * psi + a1 * (phi - psi));
}

}  // namespace detail

/// u(t) = a(t) + b(t) int_0^t a(h) exp(int_h^t b) dh on a uniform grid with
/// spacing dt. Per cell, a is linear and b is replaced by its trapezoid mean,
/// and the cell integral is taken in closed form (exact for constant data).
inline std::vector<double> groenwall_envelope(std::span<const double> a, std::span<const double> b, double dt) {
  if (a.size() != b.size() || a.empty()) throw ShapeError("envelope inputs need equal, nonzero length");
  if (!(dt > 0.0)) throw DomainError("envelope grid spacing must be positive");
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!(a[i] >= 0.0) || !(b[i] >= 0.0)) throw DomainError("envelope inputs must be nonnegative");
  std::vector<double> u(a.size());
  double J = 0.0;  // int_0^t a(h) exp(int_h^t b) dh
  u[0] = a[0];
  for (std::size_t i = 1; i < a.size(); ++i) {
    const double x = 0.5 * dt * (b[i - 1] + b[i]);
    J = J * std::exp(x) + detail::exp_cell(a[i - 1], a[i], x, dt);
    u[i] = a[i] + b[i] * J;
  }
  return u;
}

/// r(t) = envelope of a = e^{Lt}, b = L e^{Lt} at t = 0, dt, ..., steps*dt.
inline std::vector<double> stability_envelope(double lipschitz, double dt, std::size_t steps) {
  if (!(lipschitz >= 0.0)) throw DomainError("Lipschitz constant must be nonnegative");
  std::vector<double> a(steps + 1), b(steps + 1);
  for (std::size_t i = 0; i <= steps; ++i) {
    a[i] = std::exp(lipschitz * dt * static_cast<double>(i));
    b[i] = lipschitz * a[i];
  }
  return groenwall_envelope(a, b, dt);
}

/// r(t) at a single time, on a grid fine enough for the trapezoid error to be
/// negligible next to r itself.
inline double stability_envelope_at(double lipschitz, double t, std::size_t steps = 20000) {
  if (t <= 0.0) return 1.0;
  return stability_envelope(lipschitz, t / static_cast<double>(steps), steps).back();
}

struct BoundParams {
  double L = 1.0;
  double C = 1.0;
  double R0 = 1.0;
  double tau = 1.0;
};

inline BoundParams bound_params(const DelayKernel& kernel, double radius) {
  return {kernel.lipschitz(), growth_constant(kernel), radius, kernel.tau()};
}

struct FlowBounds {
  double support;      // bound on |flow(0,t,x)|
  double lip;          // bound on |flow(0,t,x) - flow(0,t,y)| / |x - y|
  double sensitivity;  // bound on |flow(0,t,x;mu) - flow(0,t,x;nu)| given W1(mu(h),nu(h))
};

/// The three flow-map bounds at time t. `w_times`/`w_values` sample
/// h -> W1(mu(h), nu(h)) on [0, t] (first time 0, last time t); when empty the
/// sensitivity is 0.
inline FlowBounds flow_bounds(const BoundParams& p, double t, double x_norm, std::span<const double> w_times = {},
                              std::span<const double> w_values = {}) {
  if (!(t >= 0.0)) throw DomainError("bound time must be nonnegative");
  const double eC = std::exp(p.C * t);
  FlowBounds fb{x_norm * eC + (eC - 1.0) * (1.0 + 2.0 * p.R0), std::exp(p.L * t), 0.0};
  if (w_times.empty()) return fb;
  if (w_times.size() != w_values.size() || w_times.size() < 2)
    throw ShapeError("sensitivity needs at least two W1 samples");
  // L int_0^t ( W(h) + L (int_0^h W) e^{L(t-h)} ) dh equals L int_0^t W(h) e^{L(t-h)} dh
  // after integrating the second term by parts; W is taken piecewise linear.
  double outer = 0.0;
  for (std::size_t i = 1; i < w_times.size(); ++i) {
    const double dh = w_times[i] - w_times[i - 1];
    if (!(dh >= 0.0)) throw ShapeError("sensitivity sample times must be nondecreasing");
    outer += std::exp(p.L * (t - w_times[i])) * detail::exp_cell(w_values[i - 1], w_values[i], p.L * dh, dh);
  }
  fb.sensitivity = p.L * outer;
  return fb;
}

// --- initial data -------------------------------------------------------------

enum class SamplerKind { constant, affine };

inline std::string to_string(SamplerKind k) { return k == SamplerKind::constant ? "constant" : "affine"; }

inline SamplerKind parse_sampler(const std::string& name) {
  if (name == "constant") return SamplerKind::constant;
  if (name == "affine") return SamplerKind::affine;
  throw ConfigError("unknown sampler '" + name + "' (expected constant or affine)");
}

struct SamplerSpec {
  SamplerKind kind = SamplerKind::affine;
  double radius = 1.0;
  std::uint64_t seed = 0;
};

/// Uniform on [0,1) from the top 53 bits of a 64-bit Mersenne Twister draw.
inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Uniform point in the closed ball of radius r (rejection from the cube).
inline Point sample_ball(std::mt19937_64& rng, std::size_t dim, double r) {
  Point p(dim);
  for (;;) {
    for (auto& v : p) v = r * (2.0 * uniform01(rng) - 1.0);
    if (norm(p) <= r) return p;
  }
}

/// `count` i.i.d. paths inside B(radius): constant paths, or affine paths
/// between two random endpoints (at -tau and 0). Draws happen in path order, so
/// a shorter request with the same seed is a prefix of a longer one.
inline std::vector<HistoryPath> sample_paths(const SamplerSpec& spec, std::size_t count, std::size_t dim,
                                             double tau) {
  if (!(spec.radius >= 0.0)) throw ConfigError("sampler radius must be nonnegative");
  std::mt19937_64 rng(spec.seed);
  std::vector<HistoryPath> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const Point end = sample_ball(rng, dim, spec.radius);
    if (spec.kind == SamplerKind::constant) {
      out.push_back(HistoryPath::constant(tau, end));
      continue;
    }
    const Point start = sample_ball(rng, dim, spec.radius);
    std::vector<double> values(start);
    values.insert(values.end(), end.begin(), end.end());
    out.emplace_back(tau, std::vector<double>{-tau, 0.0}, std::move(values), dim);
  }
  return out;
}

/// A model with everything needed to integrate it.
struct ModelSpec {
  DelayKernel kernel;
  std::optional<PointKernel> point;  // set for imperfect-memory models
  std::optional<DelayMeasure> rho;
  IntegratorConfig integrator;
};

inline ModelSpec model_spec(const Model& model, const DelayMeasure& rho, const IntegratorConfig& integrator) {
  ModelSpec s{model.path_kernel(rho), std::nullopt, std::nullopt, integrator};
  if (model.point) {
    s.point = model.point;
    s.rho = model.memory(rho);
  }
  return s;
}

// --- convergence in N -----------------------------------------------------------

struct ConvergenceSpec {
  ModelSpec model;
  SamplerSpec sampler;
  std::vector<std::size_t> counts;
  std::size_t reference_count = 400;
  std::vector<std::uint64_t> seeds;
  std::vector<double> times;
};

struct ConvergenceRow {
  std::size_t count;
  std::uint64_t seed;
  double t;
  double w1;
};

struct ConvergenceMedian {
  std::size_t count;
  double t;
  double median;
};

struct ConvergenceTable {
  std::vector<ConvergenceRow> rows;        // sorted by (count, t, seed)
  std::vector<ConvergenceMedian> medians;  // sorted by (count, t)
  /// max |sorted 1D W1 - network simplex W1| over all rows (d = 1 only, else 0).
  double cross_check = 0.0;
};

inline double median(std::vector<double> v) {
  if (v.empty()) throw ShapeError("median of an empty sample");
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

/// For every seed, simulates the reference system of `reference_count` sampled
/// paths and the systems made of its first N paths, and compares ev(0) laws at
/// the requested times.
inline ConvergenceTable convergence_study(const ConvergenceSpec& spec) {
  if (spec.counts.empty() || spec.seeds.empty() || spec.times.empty())
    throw ConfigError("convergence study needs counts, seeds and times");
  for (std::size_t i = 0; i < spec.counts.size(); ++i) {
    if (spec.counts[i] == 0 || (i && spec.counts[i] <= spec.counts[i - 1]))
      throw ConfigError("counts must be positive and increasing");
  }
  if (spec.reference_count < spec.counts.back()) throw ConfigError("reference_count must be at least the largest count");
  const std::size_t d = spec.model.kernel.dim();
  const double tau = spec.model.kernel.tau();
  const auto grid = make_grid(tau, spec.model.integrator);
  for (double t : spec.times) grid->step_index(t, "convergence output time");

  // job j = seed index * (counts + 1) + k, k = counts.size() is the reference
  const std::size_t per_seed = spec.counts.size() + 1;
  const std::size_t jobs = spec.seeds.size() * per_seed;
  std::vector<std::vector<PointMeasure>> laws(jobs);
  parallel_for(jobs, [&](std::size_t j0, std::size_t j1) {
    for (std::size_t j = j0; j < j1; ++j) {
      const std::size_t s = j / per_seed, k = j % per_seed;
      const std::size_t n = k < spec.counts.size() ? spec.counts[k] : spec.reference_count;
      SamplerSpec sampler = spec.sampler;
      sampler.seed = spec.seeds[s];
      auto paths = sample_paths(sampler, n, d, tau);
      const PathMeasureCurve curve = PathMeasureCurve::uniform(simulate_store(spec.model.kernel, paths, spec.model.integrator));
      for (double t : spec.times) laws[j].push_back(curve.positions(t));
    }
  });

  ConvergenceTable table;
  for (std::size_t k = 0; k < spec.counts.size(); ++k)
    for (std::size_t ti = 0; ti < spec.times.size(); ++ti) {
      std::vector<double> sample;
      for (std::size_t s = 0; s < spec.seeds.size(); ++s) {
        const PointMeasure& mu = laws[s * per_seed + k][ti];
        const PointMeasure& ref = laws[s * per_seed + spec.counts.size()][ti];
        const double w = wasserstein1(mu, ref);
        if (d == 1)
          table.cross_check =
              std::max(table.cross_check, std::abs(w - wasserstein1(mu, ref, W1Method::network_simplex)));
        table.rows.push_back({spec.counts[k], spec.seeds[s], spec.times[ti], w});
        sample.push_back(w);
      }
      table.medians.push_back({spec.counts[k], spec.times[ti], median(sample)});
    }
  std::stable_sort(table.rows.begin(), table.rows.end(), [](const ConvergenceRow& a, const ConvergenceRow& b) {
    return std::tie(a.count, a.t, a.seed) < std::tie(b.count, b.t, b.seed);
  });
  return table;
}

/// True when the medians at time t strictly decrease along the counts.
inline bool medians_decrease(const ConvergenceTable& table, double t) {
  double prev = std::numeric_limits<double>::infinity();
  bool any = false;
  for (const auto& m : table.medians) {
    if (m.t != t) continue;
    if (!(m.median < prev)) return false;
    prev = m.median;
    any = true;
  }
  return any;
}

// --- stability under perturbation ----------------------------------------------

struct StabilitySpec {
  ModelSpec model;
  PathMeasure base;
  std::vector<double> epsilons;
  FixedPointConfig picard;  // its integrator is taken from `model`
  long stride = 10;         // output every `stride` steps
  double slack = 1e-6;
};

struct StabilityRow {
  double epsilon;
  std::string kind;  // "path" or "transport"
  double t;
  double measured;
  double envelope;
  bool pass;
};

struct StabilityTable {
  std::vector<StabilityRow> rows;
  bool pass = true;
  double r0 = 0.0;  // r(0), 1 by construction
};

/// Translates a path measure by eps along the first axis.
inline PathMeasure translate(const PathMeasure& mu, double eps) {
  return push_forward(mu, [eps](const HistoryPath& p) {
    std::vector<double> v(p.values().begin(), p.values().end());
    for (std::size_t i = 0; i < p.size(); ++i) v[i * p.dim()] += eps;
    return HistoryPath(p.tau(), std::vector<double>(p.grid().begin(), p.grid().end()), std::move(v), p.dim());
  });
}

/// Solves the fixed point for the base and translated initial measures and
/// compares W1 of the path laws with r(t) W1_in. For imperfect-memory models
/// the transport solutions are compared too, with the distance taken as the
/// sup of W1 over [t - tau, t].
inline StabilityTable stability_study(const StabilitySpec& spec) {
  FixedPointConfig cfg = spec.picard;
  cfg.integrator = spec.model.integrator;
  const auto grid = make_grid(spec.model.kernel.tau(), cfg.integrator);
  const double L = spec.model.kernel.lipschitz();
  const std::vector<double> times = grid->output_times(spec.stride);
  StabilityTable table;
  table.r0 = stability_envelope(L, grid->dt(), 0).front();
  if (table.r0 != 1.0) table.pass = false;

  const FixedPointSolution base = solve_fixed_point(spec.base, spec.model.kernel, cfg);
  std::optional<TransportSolution> base_tr;
  if (spec.model.point)
    base_tr = solve_transport(evaluation_curve(spec.base, *grid), *spec.model.point, *spec.model.rho, cfg);

  auto envelope = [&](double t) { return stability_envelope_at(L, t); };
  for (double eps : spec.epsilons) {
    if (!(eps >= 0.0)) throw ConfigError("stability epsilons must be nonnegative");
    const PathMeasure moved = translate(spec.base, eps);
    const double w_in = wasserstein1_paths(spec.base, moved);
    const FixedPointSolution other = solve_fixed_point(moved, spec.model.kernel, cfg);
    for (double t : times) {
      const double m = wasserstein1_paths(base.curve.at(t), other.curve.at(t));
      const double e = envelope(t) * w_in;
      const bool ok = m <= e + spec.slack;
      table.pass = table.pass && ok;
      table.rows.push_back({eps, "path", t, m, e, ok});
    }
    if (!base_tr) continue;
    const MeasureCurve moved_in = evaluation_curve(moved, *grid);
    const TransportSolution tr = solve_transport(moved_in, *spec.model.point, *spec.model.rho, cfg);
    double w_in_tr = 0.0;
    for (double s : grid->history_grid())
      w_in_tr = std::max(w_in_tr, wasserstein1(base_tr->curve.at(s), tr.curve.at(s)));
    // per-node W1 on [-tau, T], then the sliding max over [t - tau, t]
    const auto& nodes = grid->nodes();
    std::vector<double> per_node(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i)
      per_node[i] = wasserstein1(base_tr->curve.at(nodes[i]), tr.curve.at(nodes[i]));
    for (double t : times) {
      const std::size_t i = static_cast<std::size_t>(grid->node_index(t));
      const double m = *std::max_element(per_node.begin() + static_cast<std::ptrdiff_t>(i - grid->window_nodes()),
                                         per_node.begin() + static_cast<std::ptrdiff_t>(i) + 1);
      const double e = envelope(t) * w_in_tr;
      const bool ok = m <= e + spec.slack;
      table.pass = table.pass && ok;
      table.rows.push_back({eps, "transport", t, m, e, ok});
    }
  }
  return table;
}

}  // namespace delaykinetic
