#pragma once

// Exact discrete optimal transport with a user-supplied cost matrix.
//
//   network_simplex   primal network simplex on the complete bipartite
//                     transportation graph (strongly feasible trees,
//                     block-search pricing)
//   assignment_cost   shortest-augmenting-path Hungarian method for the
//                     equal-count, equal-weight case
//   sorted_1d         closed form on the real line, integral of |F - G|

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "delaykinetic/error.hpp"

namespace delaykinetic::ot {

/// Row-major rows x cols cost matrix.
struct CostMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  CostMatrix() = default;
  CostMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  double max_abs() const {
    double m = 0.0;
    for (double v : data) m = std::max(m, std::abs(v));
    return m;
  }
};

struct TransportResult {
  double cost = 0.0;
  std::vector<double> plan;  // rows x cols, row-major
  long pivots = 0;
};

namespace detail {

class NetworkSimplex {
 public:
  NetworkSimplex(std::span<const double> supply, std::span<const double> demand, const CostMatrix& c)
      : m_(supply.size()),
        n_(demand.size()),
        real_arcs_(m_ * n_),
        nodes_(m_ + n_ + 1),
        root_(m_ + n_),
        cost_(c) {
    const double cmax = c.max_abs();
    // Any unit routed source -> root -> sink costs 2M > max real cost.
    art_cost_ = cmax + 1.0;
    eps_ = 1e-12 * (1.0 + cmax);
    flow_.assign(real_arcs_ + m_ + n_, 0.0);
    adj_.assign(nodes_, {});
    for (std::size_t v = 0; v < m_ + n_; ++v) {
      const std::size_t arc = real_arcs_ + v;
      flow_[arc] = v < m_ ? supply[v] : demand[v - m_];
      adj_[v].push_back(arc);
      adj_[root_].push_back(arc);
    }
    parent_.assign(nodes_, kNone);
    parent_arc_.assign(nodes_, kNone);
    depth_.assign(nodes_, 0);
    pot_.assign(nodes_, 0.0);
    order_.reserve(nodes_);
  }

  TransportResult solve() {
    const std::size_t total_arcs = flow_.size();
    const std::size_t block =
        std::max<std::size_t>(10, static_cast<std::size_t>(std::sqrt(static_cast<double>(total_arcs))));
    const long max_pivots = 50L * static_cast<long>(total_arcs + nodes_) + 1000;
    std::size_t next = 0;
    long pivots = 0;
    rebuild_tree();
    while (true) {
      // Block search: scan `block` arcs at a time, take the most negative one.
      std::size_t entering = kNone;
      double best = -eps_;
      std::size_t scanned = 0;
      std::size_t in_block = 0;
      while (scanned < total_arcs) {
        const std::size_t e = next;
        next = next + 1 == total_arcs ? 0 : next + 1;
        ++scanned;
        ++in_block;
        const double rc = reduced_cost(e);
        if (rc < best) {
          best = rc;
          entering = e;
        }
        if (in_block == block) {
          if (entering != kNone) break;
          in_block = 0;
        }
      }
      if (entering == kNone) break;
      pivot(entering);
      if (++pivots > max_pivots)
        throw Error(ErrorKind::convergence, "network simplex exceeded its pivot budget");
    }
    TransportResult result;
    result.pivots = pivots;
    result.plan.assign(flow_.begin(), flow_.begin() + static_cast<std::ptrdiff_t>(real_arcs_));
    double total = 0.0;
    for (std::size_t e = 0; e < real_arcs_; ++e) total += cost_.data[e] * flow_[e];
    result.cost = total;
    return result;
  }

 private:
  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

  std::size_t tail(std::size_t e) const {
    if (e < real_arcs_) return e / n_;
    const std::size_t v = e - real_arcs_;
    return v < m_ ? v : root_;
  }
  std::size_t head(std::size_t e) const {
    if (e < real_arcs_) return m_ + e % n_;
    const std::size_t v = e - real_arcs_;
    return v < m_ ? root_ : v;
  }
  double arc_cost(std::size_t e) const { return e < real_arcs_ ? cost_.data[e] : art_cost_; }
  double reduced_cost(std::size_t e) const { return arc_cost(e) + pot_[tail(e)] - pot_[head(e)]; }

  void rebuild_tree() {
    order_.clear();
    order_.push_back(root_);
    parent_[root_] = kNone;
    parent_arc_[root_] = kNone;
    depth_[root_] = 0;
    pot_[root_] = 0.0;
    for (std::size_t k = 0; k < order_.size(); ++k) {
      const std::size_t v = order_[k];
      for (std::size_t arc : adj_[v]) {
        if (arc == parent_arc_[v]) continue;
        const bool out = tail(arc) == v;
        const std::size_t w = out ? head(arc) : tail(arc);
        parent_[w] = v;
        parent_arc_[w] = arc;
        depth_[w] = depth_[v] + 1;
        pot_[w] = out ? pot_[v] + arc_cost(arc) : pot_[v] - arc_cost(arc);
        order_.push_back(w);
      }
    }
  }

  void pivot(std::size_t entering) {
    const std::size_t k = tail(entering);
    const std::size_t l = head(entering);
    std::size_t a = k, b = l;
    while (a != b) {
      if (depth_[a] >= depth_[b])
        a = parent_[a];
      else
        b = parent_[b];
    }
    const std::size_t join = a;

    // The cycle is oriented along the entering arc: join ~> k -> l ~> join.
    // The leaving arc is the last blocking arc in that order (strongly
    // feasible trees): strict comparison on the k side, non-strict on l's.
    double delta = std::numeric_limits<double>::infinity();
    std::size_t leaving = kNone;
    for (std::size_t u = k; u != join; u = parent_[u]) {
      const std::size_t arc = parent_arc_[u];
      if (tail(arc) == u && flow_[arc] < delta) {
        delta = flow_[arc];
        leaving = arc;
      }
    }
    for (std::size_t u = l; u != join; u = parent_[u]) {
      const std::size_t arc = parent_arc_[u];
      if (head(arc) == u && flow_[arc] <= delta) {
        delta = flow_[arc];
        leaving = arc;
      }
    }
    if (leaving == kNone) throw Error(ErrorKind::convergence, "transport problem is unbounded");
    delta = std::max(delta, 0.0);

    if (delta > 0.0) {
      for (std::size_t u = k; u != join; u = parent_[u]) {
        const std::size_t arc = parent_arc_[u];
        flow_[arc] += tail(arc) == u ? -delta : delta;
        if (flow_[arc] < 0.0) flow_[arc] = 0.0;
      }
      for (std::size_t u = l; u != join; u = parent_[u]) {
        const std::size_t arc = parent_arc_[u];
        flow_[arc] += head(arc) == u ? -delta : delta;
        if (flow_[arc] < 0.0) flow_[arc] = 0.0;
      }
      flow_[entering] += delta;
    }
    flow_[leaving] = 0.0;

    auto detach = [&](std::size_t v) {
      auto& list = adj_[v];
      list.erase(std::find(list.begin(), list.end(), leaving));
    };
    detach(tail(leaving));
    detach(head(leaving));
    adj_[k].push_back(entering);
    adj_[l].push_back(entering);
    rebuild_tree();
  }

  std::size_t m_, n_, real_arcs_, nodes_, root_;
  const CostMatrix& cost_;
  double art_cost_ = 0.0;
  double eps_ = 0.0;
  std::vector<double> flow_;
  std::vector<std::vector<std::size_t>> adj_;
  std::vector<std::size_t> parent_, parent_arc_, depth_, order_;
  std::vector<double> pot_;
};

inline void check_marginals(std::span<const double> a, std::span<const double> b, const CostMatrix& c) {
  if (a.empty() || b.empty()) throw ShapeError("transport marginals must be nonempty");
  if (c.rows != a.size() || c.cols != b.size())
    throw ShapeError("cost matrix is " + std::to_string(c.rows) + "x" + std::to_string(c.cols) +
                     " for marginals of size " + std::to_string(a.size()) + " and " +
                     std::to_string(b.size()));
  for (double w : a)
    if (!(w > 0.0)) throw NormalizationError("transport marginals must be positive");
  for (double w : b)
    if (!(w > 0.0)) throw NormalizationError("transport marginals must be positive");
  const double sa = std::accumulate(a.begin(), a.end(), 0.0);
  const double sb = std::accumulate(b.begin(), b.end(), 0.0);
  if (std::abs(sa - sb) > 1e-12 * std::max(1.0, sa))
    throw NormalizationError("transport marginals have different total mass");
}

}  // namespace detail

/// Exact transport cost between strictly positive marginals of equal mass.
inline TransportResult network_simplex(std::span<const double> supply, std::span<const double> demand,
                                       const CostMatrix& cost) {
  detail::check_marginals(supply, demand, cost);
  return detail::NetworkSimplex(supply, demand, cost).solve();
}

/// Minimum of sum_i cost(i, perm(i)) over permutations; square matrix.
inline double assignment_cost(const CostMatrix& cost, std::vector<std::size_t>* perm = nullptr) {
  if (cost.rows != cost.cols || cost.rows == 0) throw ShapeError("assignment needs a square cost matrix");
  const std::size_t n = cost.rows;
  const double inf = std::numeric_limits<double>::infinity();
  // 1-based potentials u (rows), v (cols); p[j] = row matched to column j.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> assign(n);
  for (std::size_t j = 1; j <= n; ++j) assign[p[j] - 1] = j - 1;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += cost(i, assign[i]);
  if (perm) *perm = std::move(assign);
  return total;
}

/// W1 on the real line: integral of |F_mu - F_nu|.
inline double sorted_1d(std::span<const double> xa, std::span<const double> wa, std::span<const double> xb,
                        std::span<const double> wb) {
  if (xa.size() != wa.size() || xb.size() != wb.size() || xa.empty() || xb.empty())
    throw ShapeError("1-D transport needs matching, nonempty atom and weight lists");
  struct Event {
    double x;
    double dw;  // signed mass change of F_mu - F_nu
  };
  std::vector<Event> events;
  events.reserve(xa.size() + xb.size());
  for (std::size_t i = 0; i < xa.size(); ++i) events.push_back({xa[i], wa[i]});
  for (std::size_t i = 0; i < xb.size(); ++i) events.push_back({xb[i], -wb[i]});
  std::sort(events.begin(), events.end(), [](const Event& p, const Event& q) { return p.x < q.x; });
  double cdf_gap = 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < events.size(); ++i) {
    cdf_gap += events[i].dw;
    total += std::abs(cdf_gap) * (events[i + 1].x - events[i].x);
  }
  return total;
}

}  // namespace delaykinetic::ot
