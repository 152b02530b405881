#pragma once

// Sampled continuous paths on [-tau, 0] (histories) and on [-tau, T]
// (trajectories). Values between grid nodes are piecewise linear.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "delaykinetic/error.hpp"
#include "delaykinetic/io.hpp"

namespace delaykinetic {

using Point = std::vector<double>;

inline double norm(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

inline double distance(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    acc += d * d;
  }
  return std::sqrt(acc);
}

namespace detail {

// Relative position below which a query time is treated as sitting on a node.
inline constexpr double kNodeSnap = 1e-12;

inline double lerp(double a, double b, double theta) { return a + theta * (b - a); }

inline void lerp_into(std::span<const double> a, std::span<const double> b, double theta,
                      std::span<double> out) {
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = lerp(a[k], b[k], theta);
}

// Index `lo` and weight `theta` such that t = grid[lo] + theta*(grid[lo+1]-grid[lo]).
// theta == 0 means t is the node grid[lo]. Times outside the grid clamp to an end.
struct Bracket {
  std::size_t lo;
  double theta;
};

inline Bracket bracket(std::span<const double> grid, double t) {
  const std::size_t n = grid.size();
  if (t <= grid[0]) return {0, 0.0};
  if (t >= grid[n - 1]) return {n - 1, 0.0};
  const auto it = std::upper_bound(grid.begin(), grid.end(), t);
  const std::size_t lo = static_cast<std::size_t>(it - grid.begin()) - 1;
  const double theta = (t - grid[lo]) / (grid[lo + 1] - grid[lo]);
  if (theta < kNodeSnap) return {lo, 0.0};
  if (theta > 1.0 - kNodeSnap) return {lo + 1, 0.0};
  return {lo, theta};
}

inline bool within(double t, double lo, double hi, double scale) {
  const double slack = 1e-12 * std::max(1.0, scale);
  return t >= lo - slack && t <= hi + slack;
}

inline bool same_time(double a, double b, double scale) {
  return std::abs(a - b) <= 1e-12 * std::max(1.0, scale);
}

// Grid + flat row-major values; shared by histories and trajectories.
class SampledCurve {
 public:
  SampledCurve() = default;
  SampledCurve(std::vector<double> grid, std::vector<double> values, std::size_t dim)
      : grid_(std::move(grid)), values_(std::move(values)), dim_(dim) {
    if (dim_ == 0) throw ShapeError("path dimension must be positive");
    if (grid_.size() < 2) throw ShapeError("path grid needs at least two nodes");
    if (values_.size() != grid_.size() * dim_)
      throw ShapeError("path has " + std::to_string(values_.size()) + " values for " +
                       std::to_string(grid_.size()) + " nodes of dimension " + std::to_string(dim_));
    for (std::size_t i = 1; i < grid_.size(); ++i)
      if (!(grid_[i] > grid_[i - 1])) throw ShapeError("path grid must be strictly increasing");
    for (double v : values_)
      if (!std::isfinite(v)) throw DomainError("path values must be finite");
  }

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return grid_.size(); }
  std::span<const double> grid() const { return grid_; }
  std::span<const double> values() const { return values_; }
  std::span<const double> node(std::size_t i) const { return {values_.data() + i * dim_, dim_}; }

  void eval_into(double t, std::span<double> out) const {
    const Bracket b = bracket(grid_, t);
    if (b.theta == 0.0) {
      std::copy_n(values_.data() + b.lo * dim_, dim_, out.begin());
    } else {
      lerp_into(node(b.lo), node(b.lo + 1), b.theta, out);
    }
  }

  double max_norm() const {
    double m = 0.0;
    for (std::size_t i = 0; i < size(); ++i) m = std::max(m, norm(node(i)));
    return m;
  }

 private:
  std::vector<double> grid_;
  std::vector<double> values_;
  std::size_t dim_ = 0;
};

}  // namespace detail

// Non-owning window of a sampled curve: value(s) = curve(origin + s) for
// s in [-tau, 0]. Optionally the part of the window after `tail_start` is the
// straight segment from the node value at tail_start to `tail_to` at origin;
// the integrators use this to expose in-step stage values.
class PathView {
 public:
  PathView(std::span<const double> grid, const double* values, std::size_t dim, double tau,
           double origin, std::size_t last_node)
      : grid_(grid.first(last_node + 1)), values_(values), dim_(dim), tau_(tau), origin_(origin) {}

  PathView with_tail(double tail_start, const double* tail_from, const double* tail_to) const {
    PathView v = *this;
    v.has_tail_ = true;
    v.tail_start_ = tail_start;
    v.tail_from_ = tail_from;
    v.tail_to_ = tail_to;
    return v;
  }

  double tau() const { return tau_; }
  std::size_t dim() const { return dim_; }
  double origin() const { return origin_; }

  void eval_into(double s, std::span<double> out) const {
    if (!detail::within(s, -tau_, 0.0, tau_))
      throw DomainError("path evaluation at s=" + io::format_double(s) + " outside [-tau,0]");
    const double t = origin_ + s;
    if (has_tail_ && t > tail_start_) {
      if (s >= 0.0) {
        std::copy_n(tail_to_, dim_, out.begin());
        return;
      }
      double theta = (t - tail_start_) / (origin_ - tail_start_);
      if (theta > 1.0 - detail::kNodeSnap) {
        std::copy_n(tail_to_, dim_, out.begin());
        return;
      }
      detail::lerp_into({tail_from_, dim_}, {tail_to_, dim_}, theta, out);
      return;
    }
    const detail::Bracket b = detail::bracket(grid_, t);
    if (b.theta == 0.0) {
      std::copy_n(values_ + b.lo * dim_, dim_, out.begin());
    } else {
      detail::lerp_into({values_ + b.lo * dim_, dim_}, {values_ + (b.lo + 1) * dim_, dim_}, b.theta,
                        out);
    }
  }

  Point operator()(double s) const {
    Point p(dim_);
    eval_into(s, p);
    return p;
  }

 private:
  std::span<const double> grid_;
  const double* values_;
  std::size_t dim_;
  double tau_;
  double origin_;
  bool has_tail_ = false;
  double tail_start_ = 0.0;
  const double* tail_from_ = nullptr;
  const double* tail_to_ = nullptr;
};

/// An element of C([-tau,0], R^d), sampled on a strictly increasing grid with
/// grid.front() = -tau and grid.back() = 0. Immutable.
class HistoryPath {
 public:
  HistoryPath(double tau, std::vector<double> grid, std::vector<double> values, std::size_t dim)
      : tau_(tau) {
    if (!(tau > 0.0) || !std::isfinite(tau)) throw DomainError("history length tau must be positive");
    if (grid.size() < 2) throw ShapeError("path grid needs at least two nodes");
    if (!detail::same_time(grid.front(), -tau, tau) || !detail::same_time(grid.back(), 0.0, tau))
      throw ShapeError("history grid must start at -tau and end at 0");
    grid.front() = -tau;
    grid.back() = 0.0;
    curve_ = detail::SampledCurve(std::move(grid), std::move(values), dim);
  }

  /// Uniform sampling of f on `intervals` equal steps.
  template <class F>
  static HistoryPath sample(double tau, std::size_t intervals, std::size_t dim, F&& f) {
    if (intervals == 0) throw DomainError("need at least one interval");
    std::vector<double> grid(intervals + 1);
    std::vector<double> values;
    values.reserve((intervals + 1) * dim);
    const double ds = tau / static_cast<double>(intervals);
    for (std::size_t i = 0; i <= intervals; ++i) {
      grid[i] = i == 0 ? -tau : (static_cast<double>(i) - static_cast<double>(intervals)) * ds;
      const Point v = f(grid[i]);
      if (v.size() != dim) throw ShapeError("sampler returned a point of the wrong dimension");
      values.insert(values.end(), v.begin(), v.end());
    }
    return HistoryPath(tau, std::move(grid), std::move(values), dim);
  }

  static HistoryPath constant(double tau, const Point& value, std::size_t intervals = 1) {
    return sample(tau, intervals, value.size(), [&](double) { return value; });
  }

  double tau() const { return tau_; }
  std::size_t dim() const { return curve_.dim(); }
  std::size_t size() const { return curve_.size(); }
  std::span<const double> grid() const { return curve_.grid(); }
  std::span<const double> values() const { return curve_.values(); }
  std::span<const double> node(std::size_t i) const { return curve_.node(i); }

  void eval_into(double s, std::span<double> out) const {
    if (!detail::within(s, -tau_, 0.0, tau_))
      throw DomainError("history evaluation at s=" + io::format_double(s) + " outside [-tau,0]");
    curve_.eval_into(s, out);
  }

  Point operator()(double s) const {
    Point p(dim());
    eval_into(s, p);
    return p;
  }

  PathView view() const {
    return PathView(grid(), values().data(), dim(), tau_, 0.0, size() - 1);
  }

  /// Piecewise-linear resampling onto another grid over [-tau, 0].
  HistoryPath resample(std::vector<double> grid) const {
    std::vector<double> values(grid.size() * dim());
    for (std::size_t i = 0; i < grid.size(); ++i)
      curve_.eval_into(grid[i], {values.data() + i * dim(), dim()});
    return HistoryPath(tau_, std::move(grid), std::move(values), dim());
  }

  double max_norm() const { return curve_.max_norm(); }

 private:
  double tau_;
  detail::SampledCurve curve_;
};

inline Point eval(const HistoryPath& path, double s) { return path(s); }

/// max over grid nodes of |sigma(s)|. For piecewise-linear paths in R^d the
/// norm inside a segment can exceed the node maximum only through the chord
/// sag of that segment, which vanishes with the grid step.
inline double sup_norm(const HistoryPath& path) { return path.max_norm(); }

namespace detail {

// Merge of two grids, identifying times closer than the node tolerance.
inline std::vector<double> union_grid(std::span<const double> a, std::span<const double> b,
                                      double scale) {
  std::vector<double> merged;
  merged.reserve(a.size() + b.size());
  std::merge(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(merged));
  std::vector<double> out;
  out.reserve(merged.size());
  for (double t : merged)
    if (out.empty() || !same_time(out.back(), t, scale)) out.push_back(t);
  return out;
}

inline void check_compatible(const HistoryPath& a, const HistoryPath& b) {
  if (a.dim() != b.dim())
    throw ShapeError("paths have dimensions " + std::to_string(a.dim()) + " and " +
                     std::to_string(b.dim()));
  if (!same_time(a.tau(), b.tau(), a.tau()))
    throw ShapeError("paths have different delays tau");
}

}  // namespace detail

/// Sup-norm distance, evaluated on the union of both grids.
inline double path_distance(const HistoryPath& a, const HistoryPath& b) {
  detail::check_compatible(a, b);
  const std::size_t d = a.dim();
  double best = 0.0;
  const auto ga = a.grid();
  const auto gb = b.grid();
  if (ga.size() == gb.size() && std::equal(ga.begin(), ga.end(), gb.begin())) {
    const auto va = a.values();
    const auto vb = b.values();
    for (std::size_t i = 0; i < ga.size(); ++i)
      best = std::max(best, distance(va.subspan(i * d, d), vb.subspan(i * d, d)));
    return best;
  }
  Point pa(d), pb(d);
  for (double t : detail::union_grid(ga, gb, a.tau())) {
    a.eval_into(t, pa);
    b.eval_into(t, pb);
    best = std::max(best, distance(pa, pb));
  }
  return best;
}

/// A sampled element of C([-tau, T], R^d).
class Trajectory {
 public:
  Trajectory(double tau, double horizon, std::vector<double> grid, std::vector<double> values,
             std::size_t dim)
      : tau_(tau), horizon_(horizon) {
    if (!(tau > 0.0)) throw DomainError("tau must be positive");
    if (!(horizon >= 0.0)) throw DomainError("trajectory horizon must be nonnegative");
    if (grid.size() < 2 || !detail::same_time(grid.front(), -tau, tau) ||
        !detail::same_time(grid.back(), horizon, std::max(tau, horizon)))
      throw ShapeError("trajectory grid must span [-tau, T]");
    grid.front() = -tau;
    grid.back() = horizon;
    curve_ = detail::SampledCurve(std::move(grid), std::move(values), dim);
  }

  double tau() const { return tau_; }
  double horizon() const { return horizon_; }
  std::size_t dim() const { return curve_.dim(); }
  std::size_t size() const { return curve_.size(); }
  std::span<const double> grid() const { return curve_.grid(); }
  std::span<const double> values() const { return curve_.values(); }
  std::span<const double> node(std::size_t i) const { return curve_.node(i); }

  void eval_into(double t, std::span<double> out) const {
    if (!detail::within(t, -tau_, horizon_, std::max(tau_, horizon_)))
      throw DomainError("trajectory evaluation at t=" + io::format_double(t) + " outside [-tau,T]");
    curve_.eval_into(t, out);
  }

  Point operator()(double t) const {
    Point p(dim());
    eval_into(t, p);
    return p;
  }

  double max_norm() const { return curve_.max_norm(); }

 private:
  double tau_;
  double horizon_;
  detail::SampledCurve curve_;
};

/// Restriction x -> x_t, x_t(s) = x(t+s). Grid nodes of the trajectory inside
/// [t-tau, t] are kept; off-grid window ends are interpolated.
inline HistoryPath window(const Trajectory& traj, double t) {
  const double tau = traj.tau();
  if (!detail::within(t, 0.0, traj.horizon(), std::max(tau, traj.horizon())))
    throw DomainError("window time t=" + io::format_double(t) + " outside [0,T]");
  const auto grid = traj.grid();
  const std::size_t d = traj.dim();
  const double lo = t - tau;
  std::vector<double> g;
  std::vector<double> v;
  const detail::Bracket first = detail::bracket(grid, lo);
  const detail::Bracket last = detail::bracket(grid, t);
  Point buf(d);
  g.push_back(-tau);
  traj.eval_into(std::max(lo, -tau), buf);
  v.insert(v.end(), buf.begin(), buf.end());
  const std::size_t i0 = first.lo + 1;
  const std::size_t i1 = last.theta == 0.0 ? last.lo : last.lo + 1;  // exclusive
  for (std::size_t i = i0; i < i1; ++i) {
    g.push_back(grid[i] - t);
    const auto node = traj.node(i);
    v.insert(v.end(), node.begin(), node.end());
  }
  g.push_back(0.0);
  traj.eval_into(t, buf);
  v.insert(v.end(), buf.begin(), buf.end());
  return HistoryPath(tau, std::move(g), std::move(v), d);
}

/// prefix on [-tau, h] followed by suffix on [h, 0]. The two must agree at h
/// within `tol` (default 1e-9 * (1 + max sup norm of the operands)).
inline HistoryPath splice(const HistoryPath& prefix, const HistoryPath& suffix, double h,
                          std::optional<double> tol = std::nullopt) {
  detail::check_compatible(prefix, suffix);
  const double tau = prefix.tau();
  if (!detail::within(h, -tau, 0.0, tau))
    throw DomainError("splice time h=" + io::format_double(h) + " outside [-tau,0]");
  h = std::clamp(h, -tau, 0.0);
  const double tolerance =
      tol.value_or(1e-9 * (1.0 + std::max(prefix.max_norm(), suffix.max_norm())));
  const Point at_h = prefix(h);
  const Point other = suffix(h);
  if (distance(at_h, other) > tolerance)
    throw DiscontinuityError("spliced paths differ by " + io::format_double(distance(at_h, other)) +
                             " at h=" + io::format_double(h));
  const std::size_t d = prefix.dim();
  std::vector<double> g;
  std::vector<double> v;
  const auto pg = prefix.grid();
  for (std::size_t i = 0; i < pg.size() && pg[i] < h && !detail::same_time(pg[i], h, tau); ++i) {
    g.push_back(pg[i]);
    const auto node = prefix.node(i);
    v.insert(v.end(), node.begin(), node.end());
  }
  g.push_back(h);
  v.insert(v.end(), at_h.begin(), at_h.end());
  const auto sg = suffix.grid();
  for (std::size_t i = 0; i < sg.size(); ++i) {
    if (sg[i] <= h || detail::same_time(sg[i], h, tau)) continue;
    g.push_back(sg[i]);
    const auto node = suffix.node(i);
    v.insert(v.end(), node.begin(), node.end());
  }
  return HistoryPath(tau, std::move(g), std::move(v), d);
}

// CSV: header "t,x_1,...,x_d", one row per grid node.
inline void write_path_csv(std::ostream& os, const HistoryPath& path) {
  io::CsvWriter w(os);
  std::vector<std::string> header{"t"};
  for (auto& n : io::coordinate_names(path.dim())) header.push_back(n);
  w.header(header);
  for (std::size_t i = 0; i < path.size(); ++i) {
    w.field(path.grid()[i]).fields(path.node(i));
    w.end_row();
  }
}

inline HistoryPath read_path_csv(std::istream& is) {
  const io::CsvTable table = io::read_numeric_csv(is);
  if (table.header.size() < 2 || table.header[0] != "t")
    throw IoError("path CSV must have header t,x_1,...");
  const std::size_t d = table.header.size() - 1;
  if (table.rows.size() < 2) throw IoError("path CSV needs at least two rows");
  std::vector<double> grid;
  std::vector<double> values;
  for (const auto& row : table.rows) {
    grid.push_back(row[0]);
    values.insert(values.end(), row.begin() + 1, row.end());
  }
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1])) throw IoError("path CSV grid is not strictly increasing");
  const double tau = -grid.front();
  return HistoryPath(tau, std::move(grid), std::move(values), d);
}

}  // namespace delaykinetic
