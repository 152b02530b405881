#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include <json.hpp>

#include "delaykinetic/error.hpp"
#include "delaykinetic/io.hpp"
#include "delaykinetic/optimal_transport.hpp"
#include "delaykinetic/paths.hpp"

namespace delaykinetic {

/// Finitely supported probability measure on a ground space.
template <class Ground>
class DiscreteMeasure {
 public:
  DiscreteMeasure(std::vector<Ground> atoms, std::vector<double> weights)
      : atoms_(std::move(atoms)), weights_(std::move(weights)) {
    if (atoms_.empty()) throw ShapeError("a measure needs at least one atom");
    if (atoms_.size() != weights_.size())
      throw ShapeError("measure has " + std::to_string(atoms_.size()) + " atoms and " +
                       std::to_string(weights_.size()) + " weights");
    double total = 0.0;
    for (double w : weights_) {
      if (!(w >= 0.0) || !std::isfinite(w)) throw NormalizationError("measure weights must be nonnegative");
      total += w;
    }
    if (std::abs(total - 1.0) > 1e-12)
      throw NormalizationError("measure weights sum to " + io::format_double(total) + ", not 1");
  }

  static DiscreteMeasure dirac(Ground atom) { return DiscreteMeasure({std::move(atom)}, {1.0}); }

  static DiscreteMeasure uniform(std::vector<Ground> atoms) {
    const std::size_t n = atoms.size();
    if (n == 0) throw ShapeError("a measure needs at least one atom");
    return DiscreteMeasure(std::move(atoms), std::vector<double>(n, 1.0 / static_cast<double>(n)));
  }

  std::size_t size() const { return atoms_.size(); }
  const std::vector<Ground>& atoms() const { return atoms_; }
  const std::vector<double>& weights() const { return weights_; }
  const Ground& atom(std::size_t i) const { return atoms_[i]; }
  double weight(std::size_t i) const { return weights_[i]; }

  /// integral of phi against the measure
  template <class F>
  double integrate(F&& phi) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < size(); ++i) acc += weights_[i] * phi(atoms_[i]);
    return acc;
  }

 private:
  std::vector<Ground> atoms_;
  std::vector<double> weights_;
};

using PointMeasure = DiscreteMeasure<Point>;
using PathMeasure = DiscreteMeasure<HistoryPath>;

/// f#mu: atoms mapped, weights unchanged.
template <class Ground, class F>
auto push_forward(const DiscreteMeasure<Ground>& mu, F&& f) {
  using Image = std::decay_t<decltype(f(mu.atom(0)))>;
  std::vector<Image> atoms;
  atoms.reserve(mu.size());
  for (const auto& a : mu.atoms()) atoms.push_back(f(a));
  return DiscreteMeasure<Image>(std::move(atoms), mu.weights());
}

/// ev(s)#mu for a measure on paths.
inline PointMeasure ev_pushforward(const PathMeasure& mu, double s) {
  const double tau = mu.atom(0).tau();
  if (!detail::within(s, -tau, 0.0, tau))
    throw DomainError("evaluation time s=" + io::format_double(s) + " outside [-tau,0]");
  return push_forward(mu, [s](const HistoryPath& p) { return p(s); });
}

inline std::size_t common_dim(const PointMeasure& mu, const PointMeasure& nu) {
  const std::size_t d = mu.atom(0).size();
  for (const auto& a : mu.atoms())
    if (a.size() != d) throw ShapeError("measure atoms have inconsistent dimension");
  for (const auto& a : nu.atoms())
    if (a.size() != d) throw ShapeError("measures live in different dimensions");
  return d;
}

enum class W1Method { automatic, network_simplex, assignment, sorted_1d };

namespace detail {

// Drops atoms whose weight is below 1e-15 before handing marginals to a solver.
inline std::vector<std::size_t> support_indices(const std::vector<double>& w) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < w.size(); ++i)
    if (w[i] >= 1e-15) idx.push_back(i);
  return idx;
}

inline bool equal_uniform(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return false;
  const double w = 1.0 / static_cast<double>(a.size());
  auto uniform = [w](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [w](double x) { return std::abs(x - w) <= 1e-15; });
  };
  return uniform(a) && uniform(b);
}

}  // namespace detail

/// Exact W1 with the given ground metric. Automatic dispatch uses the
/// assignment specialization for equal-count uniform measures and network
/// simplex otherwise.
template <class Ground, class Metric>
double wasserstein1(const DiscreteMeasure<Ground>& mu, const DiscreteMeasure<Ground>& nu, Metric&& metric,
                    W1Method method = W1Method::automatic) {
  const auto ia = detail::support_indices(mu.weights());
  const auto ib = detail::support_indices(nu.weights());
  ot::CostMatrix cost(ia.size(), ib.size());
  for (std::size_t i = 0; i < ia.size(); ++i)
    for (std::size_t j = 0; j < ib.size(); ++j) cost(i, j) = metric(mu.atom(ia[i]), nu.atom(ib[j]));
  std::vector<double> a, b;
  for (auto i : ia) a.push_back(mu.weight(i));
  for (auto j : ib) b.push_back(nu.weight(j));
  if (method == W1Method::automatic)
    method = detail::equal_uniform(a, b) ? W1Method::assignment : W1Method::network_simplex;
  switch (method) {
    case W1Method::assignment:
      if (!detail::equal_uniform(a, b))
        throw ShapeError("assignment specialization needs equal-count uniform measures");
      return ot::assignment_cost(cost) / static_cast<double>(a.size());
    case W1Method::sorted_1d:
      throw ShapeError("the sorted 1-D method applies to measures on the real line only");
    default:
      return ot::network_simplex(a, b, cost).cost;
  }
}

/// W1 on R^d with the Euclidean ground metric; d = 1 uses the sorted closed form.
inline double wasserstein1(const PointMeasure& mu, const PointMeasure& nu,
                           W1Method method = W1Method::automatic) {
  const std::size_t d = common_dim(mu, nu);
  if (method == W1Method::sorted_1d || (method == W1Method::automatic && d == 1)) {
    if (d != 1) throw ShapeError("the sorted 1-D method applies to measures on the real line only");
    std::vector<double> xa, xb;
    for (const auto& p : mu.atoms()) xa.push_back(p[0]);
    for (const auto& p : nu.atoms()) xb.push_back(p[0]);
    return ot::sorted_1d(xa, mu.weights(), xb, nu.weights());
  }
  return wasserstein1(
      mu, nu, [](const Point& x, const Point& y) { return distance(x, y); }, method);
}

/// W1 on path space with the sup-norm ground metric.
inline double wasserstein1_paths(const PathMeasure& mu, const PathMeasure& nu,
                                 W1Method method = W1Method::automatic) {
  detail::check_compatible(mu.atom(0), nu.atom(0));
  return wasserstein1(
      mu, nu, [](const HistoryPath& x, const HistoryPath& y) { return path_distance(x, y); }, method);
}

/// A curve t -> mu(t) of measures on R^d sampled on an increasing time grid
/// starting at -tau. Between grid times the curve is the atom-wise linear
/// interpolation when both neighbours share atom count and weights, and the
/// mixture of the neighbours otherwise.
class MeasureCurve {
 public:
  MeasureCurve(double tau, std::vector<double> times, std::vector<PointMeasure> measures)
      : tau_(tau), times_(std::move(times)), measures_(std::move(measures)) {
    if (!(tau > 0.0)) throw DomainError("tau must be positive");
    if (times_.empty() || times_.size() != measures_.size())
      throw ShapeError("measure curve needs one measure per time");
    if (!detail::same_time(times_.front(), -tau, tau))
      throw ShapeError("measure curve must start at -tau");
    times_.front() = -tau;
    for (std::size_t i = 1; i < times_.size(); ++i)
      if (!(times_[i] > times_[i - 1])) throw ShapeError("measure curve times must increase");
    dim_ = measures_.front().atom(0).size();
    for (const auto& m : measures_)
      for (const auto& a : m.atoms())
        if (a.size() != dim_) throw ShapeError("measure curve atoms have inconsistent dimension");
  }

  double tau() const { return tau_; }
  std::size_t dim() const { return dim_; }
  double start() const { return times_.front(); }
  double end() const { return times_.back(); }
  const std::vector<double>& times() const { return times_; }
  const std::vector<PointMeasure>& measures() const { return measures_; }
  const PointMeasure& measure(std::size_t i) const { return measures_[i]; }

  /// Calls visit(weight, span<const double> position) for every atom of mu(t).
  template <class Visit>
  void for_each_atom(double t, Visit&& visit, std::vector<double>& scratch) const {
    if (!detail::within(t, start(), end(), std::max(tau_, std::abs(end()))))
      throw DomainError("measure curve queried at t=" + io::format_double(t) + " outside its span");
    const detail::Bracket b = detail::bracket(times_, t);
    const PointMeasure& lo = measures_[b.lo];
    if (b.theta == 0.0) {
      for (std::size_t i = 0; i < lo.size(); ++i) visit(lo.weight(i), std::span<const double>(lo.atom(i)));
      return;
    }
    const PointMeasure& hi = measures_[b.lo + 1];
    scratch.resize(dim_);
    if (lo.size() == hi.size() && lo.weights() == hi.weights()) {
      for (std::size_t i = 0; i < lo.size(); ++i) {
        detail::lerp_into(lo.atom(i), hi.atom(i), b.theta, scratch);
        visit(lo.weight(i), std::span<const double>(scratch));
      }
      return;
    }
    for (std::size_t i = 0; i < lo.size(); ++i)
      visit((1.0 - b.theta) * lo.weight(i), std::span<const double>(lo.atom(i)));
    for (std::size_t i = 0; i < hi.size(); ++i)
      visit(b.theta * hi.weight(i), std::span<const double>(hi.atom(i)));
  }

  PointMeasure at(double t) const {
    std::vector<Point> atoms;
    std::vector<double> weights;
    std::vector<double> scratch;
    for_each_atom(
        t,
        [&](double w, std::span<const double> x) {
          atoms.emplace_back(x.begin(), x.end());
          weights.push_back(w);
        },
        scratch);
    // Mixture weights are products of normalized weights; renormalize the sum.
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    for (double& w : weights) w /= total;
    return PointMeasure(std::move(atoms), std::move(weights));
  }

  /// Sub-curve on [t - tau, t], re-based so that it starts at -tau.
  MeasureCurve window(double t) const {
    if (!detail::within(t, 0.0, end(), std::max(tau_, end())))
      throw DomainError("window time t=" + io::format_double(t) + " outside [0,T]");
    std::vector<double> times{-tau_};
    std::vector<PointMeasure> ms{at(t - tau_)};
    for (std::size_t i = 0; i < times_.size(); ++i) {
      const double rel = times_[i] - t;
      if (rel <= -tau_ || detail::same_time(rel, -tau_, tau_)) continue;
      if (rel >= 0.0 || detail::same_time(rel, 0.0, tau_)) break;
      times.push_back(rel);
      ms.push_back(measures_[i]);
    }
    times.push_back(0.0);
    ms.push_back(at(t));
    return MeasureCurve(tau_, std::move(times), std::move(ms));
  }

 private:
  double tau_;
  std::vector<double> times_;
  std::vector<PointMeasure> measures_;
  std::size_t dim_ = 0;
};

/// max over shared grid times in [a, b] of W1(mu(t), nu(t)).
inline double sup_wasserstein(const MeasureCurve& mu, const MeasureCurve& nu, double a, double b) {
  std::vector<std::size_t> ia, ib;
  const double scale = std::max({mu.tau(), std::abs(a), std::abs(b)});
  for (std::size_t i = 0; i < mu.times().size(); ++i)
    if (detail::within(mu.times()[i], a, b, scale)) ia.push_back(i);
  for (std::size_t i = 0; i < nu.times().size(); ++i)
    if (detail::within(nu.times()[i], a, b, scale)) ib.push_back(i);
  if (ia.size() != ib.size() || ia.empty()) throw ShapeError("measure curves do not share a time grid on the window");
  double best = 0.0;
  for (std::size_t k = 0; k < ia.size(); ++k) {
    if (!detail::same_time(mu.times()[ia[k]], nu.times()[ib[k]], scale))
      throw ShapeError("measure curves do not share a time grid on the window");
    best = std::max(best, wasserstein1(mu.measure(ia[k]), nu.measure(ib[k])));
  }
  return best;
}

// --- serialization ---------------------------------------------------------

/// CSV "weight,x_1,...,x_d", one row per atom.
inline void write_measure_csv(std::ostream& os, const PointMeasure& mu) {
  io::CsvWriter w(os);
  std::vector<std::string> header{"weight"};
  for (auto& n : io::coordinate_names(mu.atom(0).size())) header.push_back(n);
  w.header(header);
  for (std::size_t i = 0; i < mu.size(); ++i) {
    w.field(mu.weight(i)).fields(mu.atom(i));
    w.end_row();
  }
}

inline PointMeasure read_measure_csv(std::istream& is) {
  const io::CsvTable table = io::read_numeric_csv(is);
  if (table.header.size() < 2 || table.header[0] != "weight")
    throw IoError("measure CSV must have header weight,x_1,...");
  std::vector<Point> atoms;
  std::vector<double> weights;
  for (const auto& row : table.rows) {
    weights.push_back(row[0]);
    atoms.emplace_back(row.begin() + 1, row.end());
  }
  return PointMeasure(std::move(atoms), std::move(weights));
}

/// Directory layout: manifest.json with tau, dim and per-atom {file, weight},
/// plus one path CSV per atom. Returns the files written, relative to dir.
inline std::vector<std::string> write_path_measure(const std::filesystem::path& dir, const PathMeasure& mu) {
  std::filesystem::create_directories(dir);
  nlohmann::ordered_json manifest;
  manifest["tau"] = mu.atom(0).tau();
  manifest["dim"] = mu.atom(0).dim();
  manifest["atoms"] = nlohmann::ordered_json::array();
  std::vector<std::string> files;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "atom_%05zu.csv", i);
    auto os = io::open_output((dir / name).string());
    write_path_csv(os, mu.atom(i));
    manifest["atoms"].push_back({{"file", name}, {"weight", mu.weight(i)}});
    files.emplace_back(name);
  }
  auto os = io::open_output((dir / "manifest.json").string());
  os << manifest.dump(2) << '\n';
  files.emplace_back("manifest.json");
  return files;
}

inline PathMeasure read_path_measure(const std::filesystem::path& dir) {
  auto is = io::open_input((dir / "manifest.json").string());
  nlohmann::json manifest;
  try {
    is >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("bad path-measure manifest: ") + e.what());
  }
  std::vector<HistoryPath> atoms;
  std::vector<double> weights;
  for (const auto& entry : manifest.at("atoms")) {
    auto ps = io::open_input((dir / entry.at("file").get<std::string>()).string());
    atoms.push_back(read_path_csv(ps));
    weights.push_back(entry.at("weight").get<double>());
  }
  return PathMeasure(std::move(atoms), std::move(weights));
}

}  // namespace delaykinetic
