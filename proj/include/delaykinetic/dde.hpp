#pragma once

// Fixed-step integration of delay equations x'(t) = F(t, x(t), history).
//
// Trajectories live on a uniform node grid over [-tau, T]. Euler stores one
// node per step; RK4 stores two (step ends plus the midpoint from the method's
// continuous extension) so that the delayed reads of the half-step stages land
// on stored nodes. Stage values of every step are kept next to the nodes: a
// path view at a stage time reads stored nodes up to the step start and the
// straight segment from the step start to the stage value after it.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "delaykinetic/error.hpp"
#include "delaykinetic/io.hpp"
#include "delaykinetic/kernels.hpp"
#include "delaykinetic/measures.hpp"
#include "delaykinetic/parallel.hpp"
#include "delaykinetic/paths.hpp"

namespace delaykinetic {

enum class Scheme { euler, rk4 };

inline std::string to_string(Scheme s) { return s == Scheme::euler ? "euler" : "rk4"; }

inline Scheme parse_scheme(const std::string& name) {
  if (name == "euler") return Scheme::euler;
  if (name == "rk4") return Scheme::rk4;
  throw ConfigError("unknown scheme '" + name + "' (expected euler or rk4)");
}

struct IntegratorConfig {
  double dt = 1e-2;
  double horizon = 1.0;
  Scheme scheme = Scheme::rk4;

  /// dt = tau / round(tau / dt_target), so that tau is a whole number of steps.
  static IntegratorConfig aligned(double tau, double dt_target, double horizon, Scheme scheme = Scheme::rk4) {
    if (!(dt_target > 0.0) || !(tau > 0.0)) throw ConfigError("dt and tau must be positive");
    const double n = std::max(1.0, std::round(tau / dt_target));
    return {tau / n, horizon, scheme};
  }
};

namespace detail {

/// num / den as a whole number, accepting a relative mismatch up to 1e-9.
inline long whole_steps(double num, double den, const std::string& what, bool allow_zero) {
  const double r = num / den;
  const double n = std::round(r);
  if (!std::isfinite(r) || std::abs(r - n) > 1e-9 * std::max(1.0, std::abs(r)) || n < (allow_zero ? 0.0 : 1.0))
    throw ConfigError(what + " = " + io::format_double(num) + " is not a whole number of steps dt = " +
                      io::format_double(den));
  return static_cast<long>(n);
}

}  // namespace detail

/// Node grid shared by every trajectory of one integration.
class TimeGrid {
 public:
  TimeGrid(double tau, const IntegratorConfig& cfg) : tau_(tau), dt_(cfg.dt), scheme_(cfg.scheme) {
    if (!(tau > 0.0) || !std::isfinite(tau)) throw ConfigError("tau must be positive");
    if (!(cfg.dt > 0.0) || !std::isfinite(cfg.dt)) throw ConfigError("dt must be positive");
    if (!(cfg.horizon >= 0.0) || !std::isfinite(cfg.horizon)) throw ConfigError("horizon T must be nonnegative");
    history_steps_ = detail::whole_steps(tau, dt_, "tau", false);
    steps_ = detail::whole_steps(cfg.horizon, dt_, "T", true);
    sub_ = scheme_ == Scheme::rk4 ? 2 : 1;
    const double ds = dt_ / sub_;
    zero_ = static_cast<std::size_t>(history_steps_ * sub_);
    nodes_.resize(zero_ + static_cast<std::size_t>(steps_ * sub_) + 1);
    for (std::size_t i = 0; i < nodes_.size(); ++i)
      nodes_[i] = (static_cast<double>(i) - static_cast<double>(zero_)) * ds;
    nodes_.front() = -tau;
  }

  double tau() const { return tau_; }
  double dt() const { return dt_; }
  Scheme scheme() const { return scheme_; }
  double horizon() const { return nodes_.back(); }
  long steps() const { return steps_; }
  long history_steps() const { return history_steps_; }
  /// Nodes per step (2 for RK4, 1 for Euler).
  int substeps() const { return sub_; }
  int stages() const { return scheme_ == Scheme::rk4 ? 4 : 1; }

  const std::vector<double>& nodes() const { return nodes_; }
  std::size_t node_count() const { return nodes_.size(); }
  std::size_t zero_node() const { return zero_; }
  /// Nodes per window of length tau.
  std::size_t window_nodes() const { return zero_; }
  std::size_t node_of_step(long n) const { return zero_ + static_cast<std::size_t>(n * sub_); }
  double step_time(long n) const { return nodes_[node_of_step(n)]; }

  /// Time of stage k of step n: 0 -> t_n, 1,2 -> t_n + dt/2, 3 -> t_n + dt.
  double stage_time(long n, int k) const {
    const std::size_t i = node_of_step(n);
    if (k == 0) return nodes_[i];
    if (k == 3) return nodes_[i + 2];
    return nodes_[i + 1];
  }

  /// Grid of one history window, shifted to [-tau, 0].
  std::vector<double> history_grid() const {
    std::vector<double> g(nodes_.begin(), nodes_.begin() + static_cast<std::ptrdiff_t>(zero_) + 1);
    g.back() = 0.0;
    return g;
  }

  /// Node index of time t if t is (within 1e-9 dt) a node, otherwise -1.
  long node_index(double t) const {
    const double r = (t - nodes_[zero_]) / (dt_ / sub_) + static_cast<double>(zero_);
    const double n = std::round(r);
    if (n < 0 || n >= static_cast<double>(nodes_.size()) || std::abs(r - n) > 1e-9) return -1;
    return static_cast<long>(n);
  }

  /// Step index of time t; throws unless t is a step time in [0, T].
  long step_index(double t, const char* what) const {
    const double r = t / dt_;
    const double n = std::round(r);
    if (std::abs(r - n) > 1e-9 * std::max(1.0, std::abs(r)) || n < 0 || n > static_cast<double>(steps_))
      throw DomainError(std::string(what) + " = " + io::format_double(t) +
                        " is not a step time of the grid on [0, T]");
    return static_cast<long>(n);
  }

  /// Step times 0, stride*dt, ... up to T (T always included).
  std::vector<double> output_times(long stride) const {
    if (stride < 1) throw ConfigError("output stride must be at least 1");
    std::vector<double> t;
    for (long n = 0; n <= steps_; n += stride) t.push_back(step_time(n));
    if ((steps_ % stride) != 0) t.push_back(step_time(steps_));
    return t;
  }

 private:
  double tau_;
  double dt_;
  Scheme scheme_;
  long history_steps_ = 0;
  long steps_ = 0;
  int sub_ = 1;
  std::size_t zero_ = 0;
  std::vector<double> nodes_;
};

using GridPtr = std::shared_ptr<const TimeGrid>;

inline GridPtr make_grid(double tau, const IntegratorConfig& cfg) { return std::make_shared<const TimeGrid>(tau, cfg); }

/// Node values and per-step stage values for a set of trajectories on one grid.
class PathStore {
 public:
  PathStore() = default;
  PathStore(GridPtr grid, std::size_t count, std::size_t dim)
      : grid_(std::move(grid)), count_(count), dim_(dim) {
    if (dim_ == 0) throw ShapeError("dimension must be positive");
    node_stride_ = grid_->node_count() * dim_;
    stage_stride_ = static_cast<std::size_t>(grid_->steps()) * static_cast<std::size_t>(grid_->stages() - 1) * dim_;
    nodes_.assign(count_ * node_stride_, 0.0);
    stages_.assign(count_ * stage_stride_, 0.0);
  }

  const GridPtr& grid_ptr() const { return grid_; }
  const TimeGrid& grid() const { return *grid_; }
  std::size_t count() const { return count_; }
  std::size_t dim() const { return dim_; }

  double* node(std::size_t a, std::size_t i) { return nodes_.data() + a * node_stride_ + i * dim_; }
  const double* node(std::size_t a, std::size_t i) const { return nodes_.data() + a * node_stride_ + i * dim_; }
  std::span<const double> nodes(std::size_t a) const { return {nodes_.data() + a * node_stride_, node_stride_}; }

  /// Slot of stage k (1 <= k < stages) of step n.
  double* stage(std::size_t a, long n, int k) {
    return stages_.data() + a * stage_stride_ + stage_offset(n, k);
  }
  const double* stage(std::size_t a, long n, int k) const {
    return stages_.data() + a * stage_stride_ + stage_offset(n, k);
  }

  /// Window of atom a seen from stage k of step n.
  PathView view(std::size_t a, long n, int k) const {
    const std::size_t i = grid_->node_of_step(n);
    PathView v(grid_->nodes(), node(a, 0), dim_, grid_->tau(), grid_->stage_time(n, k), i);
    if (k == 0) return v;
    return v.with_tail(grid_->nodes()[i], node(a, i), stage(a, n, k));
  }

  /// Window of atom a at node time i (i >= zero node).
  PathView node_view(std::size_t a, std::size_t i) const {
    return PathView(grid_->nodes(), node(a, 0), dim_, grid_->tau(), grid_->nodes()[i], i);
  }

  /// Window at node i as an owning path on the shifted grid.
  HistoryPath window(std::size_t a, std::size_t i) const {
    const std::size_t h = grid_->window_nodes();
    const auto& t = grid_->nodes();
    std::vector<double> g(h + 1);
    for (std::size_t j = 0; j <= h; ++j) g[j] = t[i - h + j] - t[i];
    g.front() = -grid_->tau();
    g.back() = 0.0;
    std::vector<double> v(node(a, i - h), node(a, i) + dim_);
    return HistoryPath(grid_->tau(), std::move(g), std::move(v), dim_);
  }

  /// Resamples an initial history onto the nodes of [-tau, 0].
  void set_history(std::size_t a, const HistoryPath& initial) {
    if (initial.dim() != dim_) throw ShapeError("initial history has the wrong dimension");
    if (!detail::same_time(initial.tau(), grid_->tau(), grid_->tau()))
      throw ShapeError("initial history has a different tau than the grid");
    const auto& t = grid_->nodes();
    for (std::size_t i = 0; i <= grid_->zero_node(); ++i)
      initial.eval_into(std::min(t[i], 0.0), {node(a, i), dim_});
  }

  /// Constant continuation of atom a after step n (nodes and stage slots).
  void hold(std::size_t a, long n) {
    const std::size_t i0 = grid_->node_of_step(n);
    const double* x = node(a, i0);
    for (std::size_t i = i0 + 1; i < grid_->node_count(); ++i) std::copy_n(x, dim_, node(a, i));
    for (long m = n; m < grid_->steps(); ++m)
      for (int k = 1; k < grid_->stages(); ++k) std::copy_n(x, dim_, stage(a, m, k));
  }

  /// Fills the stage slots of atom a by linear interpolation of its nodes.
  void interpolate_stages(std::size_t a) {
    if (grid_->stages() == 1) return;
    for (long n = 0; n < grid_->steps(); ++n) {
      const std::size_t i = grid_->node_of_step(n);
      std::copy_n(node(a, i + 1), dim_, stage(a, n, 1));
      std::copy_n(node(a, i + 1), dim_, stage(a, n, 2));
      std::copy_n(node(a, i + 2), dim_, stage(a, n, 3));
    }
  }

  Trajectory trajectory(std::size_t a) const {
    auto s = nodes(a);
    return Trajectory(grid_->tau(), grid_->horizon(), grid_->nodes(), std::vector<double>(s.begin(), s.end()),
                      dim_);
  }

  /// max over nodes of |x|.
  double max_norm() const {
    double m = 0.0;
    for (std::size_t k = 0; k < nodes_.size(); k += dim_) m = std::max(m, norm({nodes_.data() + k, dim_}));
    return m;
  }

  /// max over atoms and nodes in [from, to] of |x - other|.
  double max_gap(const PathStore& other, std::size_t from, std::size_t to) const {
    double m = 0.0;
    for (std::size_t a = 0; a < count_; ++a)
      for (std::size_t i = from; i <= to; ++i) m = std::max(m, distance({node(a, i), dim_}, {other.node(a, i), dim_}));
    return m;
  }

 private:
  std::size_t stage_offset(long n, int k) const {
    return (static_cast<std::size_t>(n) * static_cast<std::size_t>(grid_->stages() - 1) +
            static_cast<std::size_t>(k - 1)) *
           dim_;
  }

  GridPtr grid_;
  std::size_t count_ = 0;
  std::size_t dim_ = 0;
  std::size_t node_stride_ = 0;
  std::size_t stage_stride_ = 0;
  std::vector<double> nodes_;
  std::vector<double> stages_;
};

/// A-priori growth bound used to stop runaway integrations: with
/// |F| <= C (1 + |x| + sup|history|) and initial data in the ball of radius R0,
/// every solution stays below (R0 + 1/2) e^{2Ct} - 1/2. The guard trips at
/// `factor` times that bound or on non-finite values.
struct GrowthGuard {
  double growth = 0.0;
  double radius = 0.0;
  double factor = 10.0;

  double bound(double t) const { return factor * ((radius + 0.5) * std::exp(2.0 * growth * t) - 0.5); }
};

namespace detail {

inline void check_state(const PathStore& store, std::size_t a, std::size_t i, long step, const GrowthGuard& guard) {
  const double* x = store.node(a, i);
  const double t = store.grid().nodes()[i];
  for (std::size_t c = 0; c < store.dim(); ++c)
    if (!std::isfinite(x[c]))
      throw DivergenceError("non-finite state at step " + std::to_string(step) + " (t=" + io::format_double(t) + ")",
                            step);
  const double r = norm({x, store.dim()});
  const double b = guard.bound(t);
  if (r > b)
    throw DivergenceError("state norm " + io::format_double(r) + " exceeds the growth bound " + io::format_double(b) +
                              " at step " + std::to_string(step) + " (t=" + io::format_double(t) + ")",
                          step);
}

}  // namespace detail

/// Advances atoms [a0, a1) over steps [n0, n1). field(n, k, a, X, out) writes
/// the velocity of atom a at stage k of step n, where X is its stage value;
/// the field may read any view the store exposes at (n, k). With
/// `parallel_atoms` each stage is evaluated for all atoms in parallel.
template <class Field>
void integrate(PathStore& store, std::size_t a0, std::size_t a1, long n0, long n1, const Field& field,
               const GrowthGuard& guard, bool parallel_atoms = false) {
  const TimeGrid& g = store.grid();
  const std::size_t d = store.dim();
  const int stages = g.stages();
  const double dt = g.dt();
  const std::size_t count = a1 - a0;
  std::vector<double> slopes(count * static_cast<std::size_t>(stages) * d);
  auto slope = [&](std::size_t a, int k) {
    return std::span<double>(slopes.data() + ((a - a0) * static_cast<std::size_t>(stages) + k) * d, d);
  };
  static constexpr double kStageStep[4] = {0.5, 0.5, 1.0, 0.0};

  for (long n = n0; n < n1; ++n) {
    const std::size_t i = g.node_of_step(n);
    for (int k = 0; k < stages; ++k) {
      auto body = [&](std::size_t b0, std::size_t b1) {
        for (std::size_t a = a0 + b0; a < a0 + b1; ++a) {
          const double* x = store.node(a, i);
          std::span<const double> X = k == 0 ? std::span<const double>(x, d)
                                             : std::span<const double>(store.stage(a, n, k), d);
          auto out = slope(a, k);
          field(n, k, a, X, out);
          if (k + 1 < stages) {
            double* next = store.stage(a, n, k + 1);
            for (std::size_t c = 0; c < d; ++c) next[c] = x[c] + kStageStep[k] * dt * out[c];
            continue;
          }
          if (stages == 1) {
            double* y = store.node(a, i + 1);
            for (std::size_t c = 0; c < d; ++c) y[c] = x[c] + dt * out[c];
            detail::check_state(store, a, i + 1, n, guard);
            continue;
          }
          auto k1 = slope(a, 0), k2 = slope(a, 1), k3 = slope(a, 2), k4 = slope(a, 3);
          double* mid = store.node(a, i + 1);
          double* y = store.node(a, i + 2);
          for (std::size_t c = 0; c < d; ++c) {
            mid[c] = x[c] + dt * (5.0 / 24.0 * k1[c] + (k2[c] + k3[c]) / 6.0 - k4[c] / 24.0);
            y[c] = x[c] + dt / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
          }
          detail::check_state(store, a, i + 1, n, guard);
          detail::check_state(store, a, i + 2, n, guard);
        }
      };
      if (parallel_atoms)
        parallel_for(count, body);
      else
        body(0, count);
    }
  }
}

namespace detail {

inline void check_initial(std::span<const HistoryPath> initial, std::size_t dim, double tau) {
  if (initial.empty()) throw ShapeError("need at least one particle");
  for (const auto& h : initial) {
    if (h.dim() != dim) throw ShapeError("initial history dimension differs from the kernel dimension");
    if (!detail::same_time(h.tau(), tau, tau)) throw ShapeError("initial history tau differs from the kernel tau");
  }
}

inline double max_sup_norm(std::span<const HistoryPath> paths) {
  double r = 0.0;
  for (const auto& p : paths) r = std::max(r, p.max_norm());
  return r;
}

}  // namespace detail

/// Interacting particle system x_i' = (1/N) sum_j K(x_i(t), (x_j)_t).
inline PathStore simulate_store(const DelayKernel& kernel, std::span<const HistoryPath> initial,
                                const IntegratorConfig& cfg) {
  detail::check_initial(initial, kernel.dim(), kernel.tau());
  const auto grid = make_grid(kernel.tau(), cfg);
  const std::size_t n = initial.size(), d = kernel.dim();
  PathStore store(grid, n, d);
  for (std::size_t a = 0; a < n; ++a) store.set_history(a, initial[a]);
  const double w = 1.0 / static_cast<double>(n);
  const GrowthGuard guard{growth_constant(kernel), detail::max_sup_norm(initial)};
  auto field = [&](long step, int k, std::size_t, std::span<const double> X, std::span<double> out) {
    thread_local std::vector<double> tmp;
    tmp.resize(d);
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      kernel(X, store.view(j, step, k), tmp);
      for (std::size_t c = 0; c < d; ++c) out[c] += w * tmp[c];
    }
  };
  integrate(store, 0, n, 0, grid->steps(), field, guard, true);
  return store;
}

inline std::vector<Trajectory> simulate_particles(const DelayKernel& kernel, std::span<const HistoryPath> initial,
                                                  const IntegratorConfig& cfg) {
  const PathStore store = simulate_store(kernel, initial, cfg);
  std::vector<Trajectory> out;
  out.reserve(store.count());
  for (std::size_t a = 0; a < store.count(); ++a) out.push_back(store.trajectory(a));
  return out;
}

/// Imperfect-memory system x_i' = sum_k rho_k (1/N) sum_j K~(x_i(t), x_j(t + s_k)),
/// evaluated directly from the point kernel and the delay atoms.
inline PathStore simulate_imperfect_store(const PointKernel& ktilde, const DelayMeasure& rho,
                                          std::span<const HistoryPath> initial, const IntegratorConfig& cfg) {
  detail::check_initial(initial, ktilde.dim(), rho.tau());
  const auto grid = make_grid(rho.tau(), cfg);
  const std::size_t n = initial.size(), d = ktilde.dim();
  PathStore store(grid, n, d);
  for (std::size_t a = 0; a < n; ++a) store.set_history(a, initial[a]);
  const double w = 1.0 / static_cast<double>(n);
  const GrowthGuard guard{growth_constant(compose_imperfect(ktilde, rho)), detail::max_sup_norm(initial)};
  auto field = [&](long step, int k, std::size_t, std::span<const double> X, std::span<double> out) {
    thread_local std::vector<double> y, tmp, inner;
    y.resize(d);
    tmp.resize(d);
    inner.resize(d);
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t m = 0; m < rho.size(); ++m) {
      std::fill(inner.begin(), inner.end(), 0.0);
      for (std::size_t j = 0; j < n; ++j) {
        store.view(j, step, k).eval_into(rho.time(m), y);
        ktilde(X, y, tmp);
        for (std::size_t c = 0; c < d; ++c) inner[c] += w * tmp[c];
      }
      for (std::size_t c = 0; c < d; ++c) out[c] += rho.weight(m) * inner[c];
    }
  };
  integrate(store, 0, n, 0, grid->steps(), field, guard, true);
  return store;
}

inline std::vector<Trajectory> simulate_imperfect(const PointKernel& ktilde, const DelayMeasure& rho,
                                                  std::span<const HistoryPath> initial, const IntegratorConfig& cfg) {
  const PathStore store = simulate_imperfect_store(ktilde, rho, initial, cfg);
  std::vector<Trajectory> out;
  out.reserve(store.count());
  for (std::size_t a = 0; a < store.count(); ++a) out.push_back(store.trajectory(a));
  return out;
}

/// t -> mu(t) in P(C([-tau,0],R^d)) for t in [0, T], represented by weighted
/// trajectories on [-tau, T]: mu(t) is the law of the windows x_t.
class PathMeasureCurve {
 public:
  PathMeasureCurve(std::vector<double> weights, PathStore store) : weights_(std::move(weights)), store_(std::move(store)) {
    if (weights_.size() != store_.count()) throw ShapeError("one weight per trajectory required");
    double total = 0.0;
    for (double w : weights_) {
      if (!(w >= 0.0)) throw NormalizationError("trajectory weights must be nonnegative");
      total += w;
    }
    if (std::abs(total - 1.0) > 1e-12) throw NormalizationError("trajectory weights sum to " + io::format_double(total));
  }

  /// Uniform weights on the stored trajectories.
  static PathMeasureCurve uniform(PathStore store) {
    std::vector<double> w(store.count(), 1.0 / static_cast<double>(store.count()));
    return PathMeasureCurve(std::move(w), std::move(store));
  }

  /// The constant-in-time continuation of mu_in: each atom frozen at sigma(0).
  static PathMeasureCurve freeze(const PathMeasure& mu_in, GridPtr grid) {
    PathStore store(grid, mu_in.size(), mu_in.atom(0).dim());
    for (std::size_t a = 0; a < mu_in.size(); ++a) {
      store.set_history(a, mu_in.atom(a));
      store.hold(a, 0);
    }
    return PathMeasureCurve(mu_in.weights(), std::move(store));
  }

  /// Weighted trajectories resampled onto `grid`.
  static PathMeasureCurve from_trajectories(std::span<const Trajectory> paths, std::vector<double> weights,
                                            GridPtr grid) {
    if (paths.empty()) throw ShapeError("need at least one trajectory");
    PathStore store(grid, paths.size(), paths[0].dim());
    const auto& t = grid->nodes();
    for (std::size_t a = 0; a < paths.size(); ++a) {
      if (paths[a].dim() != store.dim()) throw ShapeError("trajectories differ in dimension");
      for (std::size_t i = 0; i < t.size(); ++i) paths[a].eval_into(t[i], {store.node(a, i), store.dim()});
      store.interpolate_stages(a);
    }
    return PathMeasureCurve(std::move(weights), std::move(store));
  }

  const TimeGrid& grid() const { return store_.grid(); }
  const GridPtr& grid_ptr() const { return store_.grid_ptr(); }
  const std::vector<double>& weights() const { return weights_; }
  std::size_t size() const { return weights_.size(); }
  std::size_t dim() const { return store_.dim(); }
  double tau() const { return grid().tau(); }
  double horizon() const { return grid().horizon(); }
  const PathStore& store() const { return store_; }
  PathStore& store() { return store_; }

  /// mu(t) for t in [0, T].
  PathMeasure at(double t) const {
    if (!detail::within(t, 0.0, horizon(), std::max(tau(), horizon())))
      throw DomainError("measure curve evaluated at t=" + io::format_double(t) + " outside [0,T]");
    const long i = grid().node_index(t);
    std::vector<HistoryPath> atoms;
    atoms.reserve(size());
    for (std::size_t a = 0; a < size(); ++a) {
      if (i >= static_cast<long>(grid().zero_node()))
        atoms.push_back(store_.window(a, static_cast<std::size_t>(i)));
      else
        atoms.push_back(delaykinetic::window(store_.trajectory(a), std::clamp(t, 0.0, horizon())));
    }
    return PathMeasure(std::move(atoms), weights_);
  }

  /// Law of x(t) for t in [-tau, T].
  PointMeasure positions(double t) const {
    std::vector<Point> atoms;
    atoms.reserve(size());
    const auto& g = grid().nodes();
    if (!detail::within(t, -tau(), horizon(), std::max(tau(), horizon())))
      throw DomainError("positions requested at t=" + io::format_double(t) + " outside [-tau,T]");
    const detail::Bracket b = detail::bracket(g, std::clamp(t, -tau(), horizon()));
    for (std::size_t a = 0; a < size(); ++a) {
      Point p(dim());
      if (b.theta == 0.0)
        std::copy_n(store_.node(a, b.lo), dim(), p.begin());
      else
        detail::lerp_into({store_.node(a, b.lo), dim()}, {store_.node(a, b.lo + 1), dim()}, b.theta, p);
      atoms.push_back(std::move(p));
    }
    return PointMeasure(std::move(atoms), weights_);
  }

  Trajectory trajectory(std::size_t a) const { return store_.trajectory(a); }

  double support_radius() const { return store_.max_norm(); }

 private:
  std::vector<double> weights_;
  PathStore store_;
};

/// Non-owning view of the frozen vector field F[mu](t, x) = int K(x, sigma) dmu(t)(sigma).
/// The curve and kernel must outlive it.
class FlowMap {
 public:
  FlowMap(const PathMeasureCurve& curve, const DelayKernel& kernel)
      : curve_(&curve), kernel_(&kernel), growth_(growth_constant(kernel)), radius_(curve.support_radius()) {
    if (kernel.dim() != curve.dim()) throw ShapeError("kernel and measure curve differ in dimension");
    if (!detail::same_time(kernel.tau(), curve.tau(), curve.tau()))
      throw ShapeError("kernel and measure curve differ in tau");
  }

  const PathMeasureCurve& curve() const { return *curve_; }
  const DelayKernel& kernel() const { return *kernel_; }
  const TimeGrid& grid() const { return curve_->grid(); }

  /// F[mu] at stage k of step n, accumulated in ascending atom order.
  void field(long n, int k, std::span<const double> X, std::span<double> out) const {
    thread_local std::vector<double> tmp;
    const std::size_t d = out.size();
    tmp.resize(d);
    std::fill(out.begin(), out.end(), 0.0);
    const PathStore& s = curve_->store();
    for (std::size_t b = 0; b < curve_->size(); ++b) {
      const double w = curve_->weights()[b];
      if (w == 0.0) continue;
      (*kernel_)(X, s.view(b, n, k), tmp);
      for (std::size_t c = 0; c < d; ++c) out[c] += w * tmp[c];
    }
  }

  GrowthGuard guard(double extra_radius) const { return {growth_, std::max(radius_, extra_radius)}; }

 private:
  const PathMeasureCurve* curve_;
  const DelayKernel* kernel_;
  double growth_;
  double radius_;
};

/// Phi_{s,t}[mu](x): solution at t of y' = F[mu](r, y), y(s) = x. s and t must be
/// step times with 0 <= s <= t <= T.
inline Point flow(const FlowMap& fm, double s, double t, const Point& x) {
  const TimeGrid& g = fm.grid();
  if (x.size() != fm.curve().dim()) throw ShapeError("flow start point has the wrong dimension");
  const long ns = g.step_index(s, "flow start time");
  const long nt = g.step_index(t, "flow end time");
  if (nt < ns) throw DomainError("flow needs s <= t");
  PathStore store(fm.curve().grid_ptr(), 1, x.size());
  std::copy(x.begin(), x.end(), store.node(0, g.node_of_step(ns)));
  auto field = [&](long n, int k, std::size_t, std::span<const double> X, std::span<double> out) {
    fm.field(n, k, X, out);
  };
  integrate(store, 0, 1, ns, nt, field, fm.guard(norm(x)));
  const double* y = store.node(0, g.node_of_step(nt));
  return Point(y, y + x.size());
}

/// Solution on [-tau, T] of x' = F[mu](t, x) with x_0 = initial.
inline Trajectory extend(const HistoryPath& initial, const FlowMap& fm, double horizon) {
  const TimeGrid& g = fm.grid();
  const long steps = g.step_index(horizon, "extension horizon");
  PathStore store(fm.curve().grid_ptr(), 1, initial.dim());
  store.set_history(0, initial);
  auto field = [&](long n, int k, std::size_t, std::span<const double> X, std::span<double> out) {
    fm.field(n, k, X, out);
  };
  integrate(store, 0, 1, 0, steps, field, fm.guard(initial.max_norm()));
  const std::size_t last = g.node_of_step(steps);
  auto v = store.nodes(0);
  std::vector<double> grid(g.nodes().begin(), g.nodes().begin() + static_cast<std::ptrdiff_t>(last) + 1);
  const double end = grid.back();
  return Trajectory(g.tau(), end, std::move(grid),
                    std::vector<double>(v.begin(), v.begin() + static_cast<std::ptrdiff_t>((last + 1) * initial.dim())),
                    initial.dim());
}

/// Gamma[mu]: push mu_in through the flow of the frozen field of mu, on the grid of mu.
inline PathMeasureCurve gamma(const PathMeasureCurve& mu, const PathMeasure& mu_in, const DelayKernel& kernel) {
  const FlowMap fm(mu, kernel);
  PathStore store(mu.grid_ptr(), mu_in.size(), mu.dim());
  double r = 0.0;
  for (std::size_t a = 0; a < mu_in.size(); ++a) {
    store.set_history(a, mu_in.atom(a));
    r = std::max(r, mu_in.atom(a).max_norm());
  }
  auto field = [&](long n, int k, std::size_t, std::span<const double> X, std::span<double> out) {
    fm.field(n, k, X, out);
  };
  const GrowthGuard guard = fm.guard(r);
  parallel_for(mu_in.size(), [&](std::size_t b0, std::size_t b1) {
    for (std::size_t a = b0; a < b1; ++a) integrate(store, a, a + 1, 0, mu.grid().steps(), field, guard);
  });
  return PathMeasureCurve(mu_in.weights(), std::move(store));
}

}  // namespace delaykinetic
