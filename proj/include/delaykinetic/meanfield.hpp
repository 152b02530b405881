#pragma once

// Measure-level solvers: Picard iteration of Gamma on path-measure curves,
// the push-forward solution of the imperfect-memory transport equation, and
// the comparison of the two.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "delaykinetic/dde.hpp"
#include "delaykinetic/error.hpp"
#include "delaykinetic/io.hpp"
#include "delaykinetic/kernels.hpp"
#include "delaykinetic/measures.hpp"
#include "delaykinetic/parallel.hpp"
#include "delaykinetic/paths.hpp"

namespace delaykinetic {

struct FixedPointConfig {
  double tol = 1e-10;
  int max_iters = 200;
  IntegratorConfig integrator;
  /// Window length is min(T, window_factor / L), rounded down to whole steps.
  double window_factor = 0.5;

  void validate() const {
    if (!(tol > 0.0)) throw ConfigError("Picard tolerance must be positive");
    if (max_iters < 1) throw ConfigError("max_iters must be at least 1");
    if (!(window_factor > 0.0)) throw ConfigError("window_factor must be positive");
  }
};

/// One Picard sweep: the residual bounds sup_t W1(mu^{k+1}(t), mu^k(t)) over
/// the window from above (identity coupling of the atoms).
struct PicardRecord {
  int iteration;
  double window_start;
  double residual;
};

class NonConvergenceError : public Error {
 public:
  NonConvergenceError(const std::string& what, std::vector<PicardRecord> trace)
      : Error(ErrorKind::convergence, what), trace_(std::move(trace)) {}
  const std::vector<PicardRecord>& trace() const noexcept { return trace_; }

 private:
  std::vector<PicardRecord> trace_;
};

inline void write_residuals_csv(std::ostream& os, const std::vector<PicardRecord>& trace) {
  io::CsvWriter w(os);
  const std::array<std::string, 3> header{"iter", "window_start", "residual"};
  w.header(header);
  for (const auto& r : trace) {
    w.field(r.iteration);
    w.field(r.window_start);
    w.field(r.residual);
    w.end_row();
  }
}

struct FixedPointSolution {
  PathMeasureCurve curve;
  std::vector<PicardRecord> trace;
  double radius;  // max sup-norm of the initial atoms
};

namespace detail {

inline long window_steps(const TimeGrid& grid, double lipschitz, double factor) {
  if (grid.steps() == 0) return 1;
  if (!(lipschitz > 0.0)) return grid.steps();
  const double len = std::min(grid.horizon(), factor / lipschitz);
  return std::clamp(static_cast<long>(std::floor(len / grid.dt() + 1e-9)), 1L, grid.steps());
}

inline double coupling_residual(const PathStore& a, const PathStore& b, const std::vector<double>& weights,
                                std::size_t from, std::size_t to) {
  double r = 0.0;
  for (std::size_t k = 0; k < a.count(); ++k) {
    double m = 0.0;
    for (std::size_t i = from; i <= to; ++i)
      m = std::max(m, distance({a.node(k, i), a.dim()}, {b.node(k, i), b.dim()}));
    r += weights[k] * m;
  }
  return r;
}

/// Windowed Picard loop shared by the path-space and the transport solvers.
/// sweep(cur, next, n0, n1) writes the next iterate on steps [n0, n1) into
/// `next`, reading only `cur`.
template <class Sweep>
std::vector<PicardRecord> picard(PathStore& cur, const std::vector<double>& weights, const FixedPointConfig& cfg,
                                 double lipschitz, Sweep&& sweep) {
  const TimeGrid& g = cur.grid();
  const long ws = window_steps(g, lipschitz, cfg.window_factor);
  std::vector<PicardRecord> trace;
  PathStore next = cur;
  for (long n0 = 0; n0 < g.steps(); n0 += ws) {
    const long n1 = std::min(g.steps(), n0 + ws);
    bool converged = false;
    for (int it = 1; it <= cfg.max_iters; ++it) {
      sweep(cur, next, n0, n1);
      const double r = coupling_residual(cur, next, weights, g.node_of_step(n0), g.node_of_step(n1));
      trace.push_back({it, g.step_time(n0), r});
      std::swap(cur, next);
      if (r <= cfg.tol) {
        converged = true;
        break;
      }
      if (!std::isfinite(r)) break;
    }
    if (!converged)
      throw NonConvergenceError("Picard iteration did not reach tol " + io::format_double(cfg.tol) + " within " +
                                    std::to_string(cfg.max_iters) + " iterations on the window starting at t=" +
                                    io::format_double(g.step_time(n0)),
                                std::move(trace));
    for (std::size_t a = 0; a < cur.count(); ++a) cur.hold(a, n1);
    next = cur;
  }
  return trace;
}

}  // namespace detail

/// The path-space fixed point mu(t) = (res[t] o ext[mu]) # mu_in.
inline FixedPointSolution solve_fixed_point(const PathMeasure& mu_in, const DelayKernel& kernel,
                                            const FixedPointConfig& cfg) {
  cfg.validate();
  const auto grid = make_grid(kernel.tau(), cfg.integrator);
  PathMeasureCurve curve = PathMeasureCurve::freeze(mu_in, grid);
  double radius = 0.0;
  for (const auto& a : mu_in.atoms()) radius = std::max(radius, a.max_norm());
  if (grid->steps() == 0) return {std::move(curve), {}, radius};

  const double growth = growth_constant(kernel);
  const auto& weights = curve.weights();
  auto sweep = [&](const PathStore& cur, PathStore& next, long n0, long n1) {
    auto field = [&](long n, int k, std::size_t, std::span<const double> X, std::span<double> out) {
      thread_local std::vector<double> tmp;
      tmp.resize(out.size());
      std::fill(out.begin(), out.end(), 0.0);
      for (std::size_t b = 0; b < cur.count(); ++b) {
        if (weights[b] == 0.0) continue;
        kernel(X, cur.view(b, n, k), tmp);
        for (std::size_t c = 0; c < out.size(); ++c) out[c] += weights[b] * tmp[c];
      }
    };
    const GrowthGuard guard{growth, std::max(radius, cur.max_norm())};
    parallel_for(cur.count(), [&](std::size_t b0, std::size_t b1) {
      for (std::size_t a = b0; a < b1; ++a) integrate(next, a, a + 1, n0, n1, field, guard);
    });
  };
  auto trace = detail::picard(curve.store(), weights, cfg, kernel.lipschitz(), sweep);
  return {std::move(curve), std::move(trace), radius};
}

/// Upper bound (identity coupling) on sup_t W1(Gamma(mu)(t), mu(t)) over [0, T].
inline double fixed_point_residual(const PathMeasureCurve& mu, const PathMeasure& mu_in, const DelayKernel& kernel) {
  const PathMeasureCurve image = gamma(mu, mu_in, kernel);
  const TimeGrid& g = mu.grid();
  return detail::coupling_residual(image.store(), mu.store(), mu.weights(), g.zero_node(), g.node_count() - 1);
}

struct TransportSolution {
  /// mu on [-tau, T]: the input curve on [-tau, 0), then the pushed atoms at every node.
  MeasureCurve curve;
  /// Trajectories of the atoms of mu_in(0) under the converged field.
  PathMeasureCurve atoms;
  std::vector<PicardRecord> trace;
};

namespace detail {

/// sum_k rho_k int K~(X, y) d mu(u + s_k)(y): times before 0 come from the
/// input curve, later times from the atom store at stage (n, k).
struct TransportField {
  const PointKernel& ktilde;
  const DelayMeasure& rho;
  const MeasureCurve& input;
  const std::vector<double>& weights;

  void operator()(const PathStore& store, long n, int k, std::span<const double> X, std::span<double> out) const {
    thread_local std::vector<double> y, tmp, inner, scratch;
    const std::size_t d = out.size();
    y.resize(d);
    tmp.resize(d);
    inner.resize(d);
    const double u = store.grid().stage_time(n, k);
    const double snap = detail::kNodeSnap * std::max(1.0, rho.tau());
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t m = 0; m < rho.size(); ++m) {
      const double s = rho.time(m);
      std::fill(inner.begin(), inner.end(), 0.0);
      if (u + s < -snap) {
        input.for_each_atom(
            u + s,
            [&](double w, std::span<const double> yb) {
              ktilde(X, yb, tmp);
              for (std::size_t c = 0; c < d; ++c) inner[c] += w * tmp[c];
            },
            scratch);
      } else {
        for (std::size_t b = 0; b < store.count(); ++b) {
          if (weights[b] == 0.0) continue;
          store.view(b, n, k).eval_into(s, y);
          ktilde(X, y, tmp);
          for (std::size_t c = 0; c < d; ++c) inner[c] += weights[b] * tmp[c];
        }
      }
      for (std::size_t c = 0; c < d; ++c) out[c] += rho.weight(m) * inner[c];
    }
  }
};

}  // namespace detail

/// Solution of the imperfect-memory transport equation with initial curve
/// `input` on [-tau, 0]: mu(t) = flow(0, t; mu) # input(0) for t >= 0.
inline TransportSolution solve_transport(const MeasureCurve& input, const PointKernel& ktilde, const DelayMeasure& rho,
                                         const FixedPointConfig& cfg) {
  cfg.validate();
  if (!detail::same_time(input.tau(), rho.tau(), rho.tau())) throw ShapeError("input curve and rho differ in tau");
  if (!detail::same_time(input.end(), 0.0, rho.tau())) throw ShapeError("input curve must span [-tau, 0]");
  if (input.dim() != ktilde.dim()) throw ShapeError("input curve and kernel differ in dimension");
  const auto grid = make_grid(rho.tau(), cfg.integrator);
  const PointMeasure start = input.at(0.0);
  const std::size_t d = input.dim();
  PathStore store(grid, start.size(), d);
  for (std::size_t b = 0; b < start.size(); ++b) {
    for (std::size_t i = 0; i <= grid->zero_node(); ++i) std::copy_n(start.atom(b).data(), d, store.node(b, i));
    store.hold(b, 0);
  }
  const std::vector<double>& weights = start.weights();
  double radius = 0.0;
  for (const auto& m : input.measures())
    for (const auto& a : m.atoms()) radius = std::max(radius, norm(a));
  const double growth = growth_constant(compose_imperfect(ktilde, rho));
  const detail::TransportField tf{ktilde, rho, input, weights};

  std::vector<PicardRecord> trace;
  if (grid->steps() > 0) {
    auto sweep = [&](const PathStore& cur, PathStore& next, long n0, long n1) {
      auto field = [&](long n, int k, std::size_t, std::span<const double> X, std::span<double> out) {
        tf(cur, n, k, X, out);
      };
      const GrowthGuard guard{growth, std::max(radius, cur.max_norm())};
      parallel_for(cur.count(), [&](std::size_t b0, std::size_t b1) {
        for (std::size_t a = b0; a < b1; ++a) integrate(next, a, a + 1, n0, n1, field, guard);
      });
    };
    trace = detail::picard(store, weights, cfg, ktilde.lipschitz(), sweep);
  }

  PathMeasureCurve atoms(weights, std::move(store));
  std::vector<double> times;
  std::vector<PointMeasure> measures;
  for (std::size_t i = 0; i < input.times().size(); ++i) {
    if (input.times()[i] >= -detail::kNodeSnap * rho.tau()) break;
    times.push_back(input.times()[i]);
    measures.push_back(input.measure(i));
  }
  const auto& nodes = grid->nodes();
  for (std::size_t i = grid->zero_node(); i < nodes.size(); ++i) {
    times.push_back(nodes[i]);
    measures.push_back(atoms.positions(nodes[i]));
  }
  return {MeasureCurve(rho.tau(), std::move(times), std::move(measures)), std::move(atoms), std::move(trace)};
}

/// ev(s) # mu_in sampled at the history nodes of `grid`.
inline MeasureCurve evaluation_curve(const PathMeasure& mu_in, const TimeGrid& grid) {
  const auto g = grid.history_grid();
  std::vector<PointMeasure> ms;
  ms.reserve(g.size());
  for (double s : g) ms.push_back(ev_pushforward(mu_in, s));
  return MeasureCurve(grid.tau(), g, std::move(ms));
}

/// Smooth test function with compact support and its gradient.
struct TestFunction {
  std::function<double(std::span<const double>)> value;
  std::function<void(std::span<const double>, std::span<double>)> gradient;
};

/// phi(x) = prod_c psi((x_c - center_c) / width), psi(u) = exp(-1 / (1 - u^2)) on |u| < 1.
inline TestFunction tensor_bump(Point center, double width) {
  if (!(width > 0.0)) throw DomainError("bump width must be positive");
  auto psi = [](double u, double& dpsi) {
    if (std::abs(u) >= 1.0) {
      dpsi = 0.0;
      return 0.0;
    }
    const double q = 1.0 - u * u;
    const double v = std::exp(-1.0 / q);
    dpsi = v * (-2.0 * u / (q * q));
    return v;
  };
  TestFunction f;
  f.value = [center, width, psi](std::span<const double> x) {
    double p = 1.0, dummy;
    for (std::size_t c = 0; c < center.size(); ++c) p *= psi((x[c] - center[c]) / width, dummy);
    return p;
  };
  f.gradient = [center, width, psi](std::span<const double> x, std::span<double> g) {
    const std::size_t d = center.size();
    std::vector<double> v(d), dv(d);
    for (std::size_t c = 0; c < d; ++c) v[c] = psi((x[c] - center[c]) / width, dv[c]);
    for (std::size_t c = 0; c < d; ++c) {
      double p = dv[c] / width;
      for (std::size_t e = 0; e < d; ++e)
        if (e != c) p *= v[e];
      g[c] = p;
    }
  };
  return f;
}

/// int phi dmu(t) - int phi dmu(0) - int_0^t int F~[mu](h, x) . grad phi(x) dmu(h) dh,
/// with the time integral by the trapezoid rule over the curve's times in [0, t].
inline double weak_form_residual(const MeasureCurve& mu, const PointKernel& ktilde, const DelayMeasure& rho,
                                 const TestFunction& phi, double t) {
  if (!detail::within(t, 0.0, mu.end(), std::max(mu.tau(), mu.end())))
    throw DomainError("weak-form time outside [0, T]");
  const std::size_t d = mu.dim();
  std::vector<double> hs;
  for (double h : mu.times())
    if (h >= -detail::kNodeSnap && h < t && !detail::same_time(h, t, mu.tau())) hs.push_back(std::max(h, 0.0));
  if (hs.empty() || hs.front() != 0.0) hs.insert(hs.begin(), 0.0);
  hs.push_back(t);
  std::vector<double> scratch, tmp(d), grad(d), field(d);
  auto integrand = [&](double h) {
    const PointMeasure m = mu.at(h);
    double total = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) {
      const Point& x = m.atom(i);
      std::fill(field.begin(), field.end(), 0.0);
      for (std::size_t k = 0; k < rho.size(); ++k)
        mu.for_each_atom(
            h + rho.time(k),
            [&](double w, std::span<const double> y) {
              ktilde(x, y, tmp);
              for (std::size_t c = 0; c < d; ++c) field[c] += rho.weight(k) * w * tmp[c];
            },
            scratch);
      phi.gradient(x, grad);
      double dot = 0.0;
      for (std::size_t c = 0; c < d; ++c) dot += field[c] * grad[c];
      total += m.weight(i) * dot;
    }
    return total;
  };
  double integral = 0.0;
  double prev = integrand(hs[0]);
  for (std::size_t i = 1; i < hs.size(); ++i) {
    const double cur = integrand(hs[i]);
    integral += 0.5 * (hs[i] - hs[i - 1]) * (prev + cur);
    prev = cur;
  }
  return mu.at(t).integrate([&](const Point& x) { return phi.value(x); }) -
         mu.at(0.0).integrate([&](const Point& x) { return phi.value(x); }) - integral;
}

struct CoherenceReport {
  std::vector<double> times;
  std::vector<double> gap;   // W1(ev(0) # mu(t), transport solution at t)
  double max_gap = 0.0;
  double compatibility = 0.0;  // max over sampled (t, s) of W1(ev(s) # mu(t), transport solution at t + s)
  std::vector<PicardRecord> fixed_point_trace;
  std::vector<PicardRecord> transport_trace;
};

/// Runs the path-space fixed point with K = compose_imperfect(ktilde, rho) and
/// the transport solver from ev(s) # mu_in, and compares them at the step times
/// (every `stride` steps).
inline CoherenceReport coherence_check(const PathMeasure& mu_in, const PointKernel& ktilde, const DelayMeasure& rho,
                                       const FixedPointConfig& cfg, long stride = 1) {
  const DelayKernel kernel = compose_imperfect(ktilde, rho);
  const FixedPointSolution fp = solve_fixed_point(mu_in, kernel, cfg);
  const TimeGrid& g = fp.curve.grid();
  const TransportSolution tr = solve_transport(evaluation_curve(mu_in, g), ktilde, rho, cfg);

  CoherenceReport rep;
  rep.fixed_point_trace = fp.trace;
  rep.transport_trace = tr.trace;
  rep.times = g.output_times(stride);
  for (double t : rep.times) {
    const double w = wasserstein1(fp.curve.positions(t), tr.curve.at(t));
    rep.gap.push_back(w);
    rep.max_gap = std::max(rep.max_gap, w);
  }
  const long hs = std::max<long>(1, g.history_steps() / 16);
  for (double t : rep.times)
    for (long m = 0; m <= g.history_steps(); m += hs) {
      const double s = -static_cast<double>(m) * g.dt();
      const PointMeasure lhs = ev_pushforward(fp.curve.at(t), std::max(s, -g.tau()));
      rep.compatibility = std::max(rep.compatibility, wasserstein1(lhs, tr.curve.at(std::max(t + s, -g.tau()))));
    }
  return rep;
}

}  // namespace delaykinetic
