#pragma once

// Interaction laws. A DelayKernel maps (x, sigma) in R^d x C([-tau,0],R^d) to
// R^d; a PointKernel maps (x, y) in R^d x R^d to R^d. Every kernel carries the
// global Lipschitz constant it was built with; nothing here estimates it.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "delaykinetic/error.hpp"
#include "delaykinetic/paths.hpp"

namespace delaykinetic {

/// Atomic probability measure rho on [-tau, 0].
class DelayMeasure {
 public:
  DelayMeasure(double tau, std::vector<double> times, std::vector<double> weights)
      : tau_(tau), times_(std::move(times)), weights_(std::move(weights)) {
    if (!(tau > 0.0)) throw DomainError("delay measure needs tau > 0");
    if (times_.empty() || times_.size() != weights_.size())
      throw ShapeError("delay measure needs one weight per atom");
    double total = 0.0;
    for (std::size_t k = 0; k < times_.size(); ++k) {
      if (!detail::within(times_[k], -tau, 0.0, tau))
        throw DomainError("delay atom s=" + io::format_double(times_[k]) + " outside [-tau,0]");
      times_[k] = std::clamp(times_[k], -tau, 0.0);
      if (!(weights_[k] >= 0.0)) throw NormalizationError("delay weights must be nonnegative");
      total += weights_[k];
    }
    if (std::abs(total - 1.0) > 1e-12)
      throw NormalizationError("delay weights sum to " + io::format_double(total) + ", not 1");
  }

  static DelayMeasure dirac(double tau, double s = 0.0) { return DelayMeasure(tau, {s}, {1.0}); }

  /// Weights proportional to exp(decay*s/tau) - exp(-decay) on `intervals`
  /// equally spaced atoms: largest at s = 0, vanishing at s = -tau.
  static DelayMeasure fading_memory(double tau, double decay, std::size_t intervals) {
    if (!(decay > 0.0)) throw DomainError("memory decay must be positive");
    if (intervals == 0) throw DomainError("fading memory needs at least one interval");
    std::vector<double> times, weights;
    const double floor = std::exp(-decay);
    double total = 0.0;
    for (std::size_t k = 0; k < intervals; ++k) {  // k = intervals is s = -tau, weight 0
      const double s = -tau * static_cast<double>(k) / static_cast<double>(intervals);
      const double w = std::exp(decay * s / tau) - floor;
      times.push_back(s);
      weights.push_back(w);
      total += w;
    }
    for (double& w : weights) w /= total;
    return DelayMeasure(tau, std::move(times), std::move(weights));
  }

  double tau() const { return tau_; }
  std::size_t size() const { return times_.size(); }
  double time(std::size_t k) const { return times_[k]; }
  double weight(std::size_t k) const { return weights_[k]; }
  const std::vector<double>& times() const { return times_; }
  const std::vector<double>& weights() const { return weights_; }

 private:
  double tau_;
  std::vector<double> times_;
  std::vector<double> weights_;
};

/// K~ : R^d x R^d -> R^d.
class PointKernel {
 public:
  using Fn = std::function<void(std::span<const double> x, std::span<const double> y, std::span<double> out)>;

  PointKernel(std::string name, std::size_t dim, double lipschitz, Fn fn)
      : name_(std::move(name)), dim_(dim), lipschitz_(lipschitz), fn_(std::move(fn)) {
    if (dim_ == 0) throw DomainError("kernel dimension must be positive");
    if (!(lipschitz_ >= 0.0)) throw DomainError("Lipschitz constant must be nonnegative");
  }

  const std::string& name() const { return name_; }
  std::size_t dim() const { return dim_; }
  double lipschitz() const { return lipschitz_; }

  void operator()(std::span<const double> x, std::span<const double> y, std::span<double> out) const {
    fn_(x, y, out);
  }
  Point operator()(const Point& x, const Point& y) const {
    Point out(dim_);
    fn_(x, y, out);
    return out;
  }

 private:
  std::string name_;
  std::size_t dim_;
  double lipschitz_;
  Fn fn_;
};

/// K : R^d x C([-tau,0],R^d) -> R^d.
class DelayKernel {
 public:
  using Fn = std::function<void(std::span<const double> x, const PathView& sigma, std::span<double> out)>;

  DelayKernel(std::string name, std::size_t dim, double tau, double lipschitz, Fn fn)
      : name_(std::move(name)), dim_(dim), tau_(tau), lipschitz_(lipschitz), fn_(std::move(fn)) {
    if (dim_ == 0) throw DomainError("kernel dimension must be positive");
    if (!(tau_ > 0.0)) throw DomainError("kernel delay tau must be positive");
    if (!(lipschitz_ >= 0.0)) throw DomainError("Lipschitz constant must be nonnegative");
  }

  const std::string& name() const { return name_; }
  std::size_t dim() const { return dim_; }
  double tau() const { return tau_; }
  double lipschitz() const { return lipschitz_; }

  void operator()(std::span<const double> x, const PathView& sigma, std::span<double> out) const {
    fn_(x, sigma, out);
  }
  Point operator()(const Point& x, const HistoryPath& sigma) const {
    Point out(dim_);
    fn_(x, sigma.view(), out);
    return out;
  }

 private:
  std::string name_;
  std::size_t dim_;
  double tau_;
  double lipschitz_;
  Fn fn_;
};

/// K(x, sigma) = sum_k rho_k K~(x, sigma(s_k)); inherits the Lipschitz
/// constant of K~ because rho is a probability measure.
inline DelayKernel compose_imperfect(const PointKernel& ktilde, const DelayMeasure& rho) {
  const std::size_t d = ktilde.dim();
  auto fn = [ktilde, rho, d](std::span<const double> x, const PathView& sigma, std::span<double> out) {
    thread_local std::vector<double> y, term;
    y.resize(d);
    term.resize(d);
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t k = 0; k < rho.size(); ++k) {
      sigma.eval_into(rho.time(k), y);
      ktilde(x, y, term);
      const double w = rho.weight(k);
      for (std::size_t c = 0; c < d; ++c) out[c] += w * term[c];
    }
  };
  return DelayKernel(ktilde.name() + "+rho", d, rho.tau(), ktilde.lipschitz(), std::move(fn));
}

/// |K(0, 0)| on the zero history; with L this bounds the linear growth
/// |K(x, sigma)| <= C (1 + |x| + |sigma|), C = max(L, |K(0,0)|).
inline double growth_constant(const DelayKernel& kernel) {
  const HistoryPath zero = HistoryPath::constant(kernel.tau(), Point(kernel.dim(), 0.0));
  return std::max(kernel.lipschitz(), norm(kernel(Point(kernel.dim(), 0.0), zero)));
}

// --- model library ---------------------------------------------------------

namespace kernels {

inline PointKernel linear_attraction(std::size_t dim, double strength = 1.0) {
  if (!(strength > 0.0)) throw DomainError("attraction strength must be positive");
  return PointKernel("linear_attraction", dim, strength,
                     [strength](std::span<const double> x, std::span<const double> y, std::span<double> out) {
                       for (std::size_t k = 0; k < out.size(); ++k) out[k] = strength * (y[k] - x[k]);
                     });
}

/// C^1 cutoff: 1 on [0, R/2], cubic ramp 1 - 3u^2 + 2u^3 with u = (r - R/2)/(R/2),
/// 0 beyond R.
inline double confidence_cutoff(double r, double radius) {
  const double half = 0.5 * radius;
  if (r <= half) return 1.0;
  if (r >= radius) return 0.0;
  const double u = (r - half) / half;
  return 1.0 - 3.0 * u * u + 2.0 * u * u * u;
}

/// Lipschitz constant of z -> phi_R(|z|) z. Its Jacobian has eigenvalues
/// phi(r) and phi(r) + r phi'(r) = 1 - 6u - 3u^2 + 8u^3 on the ramp, whose
/// extreme on [0,1] sits at u = (1 + sqrt 17)/8.
inline double confidence_lipschitz() {
  const double u = (1.0 + std::sqrt(17.0)) / 8.0;
  const double radial = 1.0 - 6.0 * u - 3.0 * u * u + 8.0 * u * u * u;
  return std::max(1.0, std::abs(radial));
}

inline PointKernel bounded_confidence(std::size_t dim, double radius, double strength = 1.0) {
  if (!(radius > 0.0)) throw DomainError("confidence radius must be positive");
  if (!(strength > 0.0)) throw DomainError("attraction strength must be positive");
  return PointKernel(
      "bounded_confidence", dim, strength * confidence_lipschitz(),
      [radius, strength](std::span<const double> x, std::span<const double> y, std::span<double> out) {
        double r2 = 0.0;
        for (std::size_t k = 0; k < out.size(); ++k) r2 += (y[k] - x[k]) * (y[k] - x[k]);
        const double g = strength * confidence_cutoff(std::sqrt(r2), radius);
        for (std::size_t k = 0; k < out.size(); ++k) out[k] = g * (y[k] - x[k]);
      });
}

/// kappa * sin(y - x), componentwise.
inline PointKernel kuramoto(std::size_t dim, double coupling) {
  if (!(coupling > 0.0)) throw DomainError("Kuramoto coupling must be positive");
  return PointKernel("kuramoto", dim, coupling,
                     [coupling](std::span<const double> x, std::span<const double> y, std::span<double> out) {
                       for (std::size_t k = 0; k < out.size(); ++k) out[k] = coupling * std::sin(y[k] - x[k]);
                     });
}

inline PointKernel zero(std::size_t dim) {
  return PointKernel("zero", dim, 0.0, [](std::span<const double>, std::span<const double>, std::span<double> out) {
    std::fill(out.begin(), out.end(), 0.0);
  });
}

inline PointKernel constant(const Point& velocity) {
  return PointKernel("constant", velocity.size(), 0.0,
                     [velocity](std::span<const double>, std::span<const double>, std::span<double> out) {
                       std::copy(velocity.begin(), velocity.end(), out.begin());
                     });
}

/// K(x, sigma) = -gain * sigma(-tau).
inline DelayKernel pure_delay(std::size_t dim, double tau, double gain = 1.0) {
  if (!(gain > 0.0)) throw DomainError("delay gain must be positive");
  return DelayKernel("pure_delay", dim, tau, gain,
                     [gain, tau](std::span<const double>, const PathView& sigma, std::span<double> out) {
                       sigma.eval_into(-tau, out);
                       for (double& v : out) v *= -gain;
                     });
}

}  // namespace kernels

/// A catalog model: either a point kernel (combined with a delay measure into a
/// path kernel), a point kernel with its own delay measure, or a path kernel.
struct Model {
  std::string name;
  std::optional<PointKernel> point;
  std::optional<DelayMeasure> rho;  // set when the model fixes its own memory
  std::optional<DelayKernel> delay;

  bool has_point_kernel() const { return point.has_value(); }

  const DelayMeasure& memory(const DelayMeasure& fallback) const { return rho ? *rho : fallback; }

  DelayKernel path_kernel(const DelayMeasure& fallback) const {
    if (delay) return *delay;
    return compose_imperfect(*point, memory(fallback));
  }
};

using ModelParams = std::map<std::string, double>;

struct ParamDoc {
  std::string name;
  double default_value;
  std::string doc;
  bool positive = true;
};

struct ModelEntry {
  std::string name;
  std::string kind;  // "point", "point+memory" or "path"
  std::string summary;
  std::string lipschitz;
  std::vector<ParamDoc> params;
  std::function<Model(const ModelParams&, std::size_t dim, double tau)> make;
};

namespace detail {

inline double param(const ModelParams& p, const std::string& key, double fallback) {
  auto it = p.find(key);
  return it == p.end() ? fallback : it->second;
}

}  // namespace detail

/// Builtin models, sorted by name.
inline const std::vector<ModelEntry>& builtin_kernels() {
  static const std::vector<ModelEntry> catalog = [] {
    using detail::param;
    std::vector<ModelEntry> c;
    c.push_back({"bounded_confidence", "point",
                 "K~(x,y) = k * phi_R(|y-x|) (y-x); phi_R is 1 on [0,R/2] with a C^1 cubic ramp to 0 at R",
                 "k * 1.97165 (sup of the radial Jacobian eigenvalue)",
                 {{"radius", 1.0, "interaction radius R"}, {"strength", 1.0, "attraction gain k"}},
                 [](const ModelParams& p, std::size_t d, double) {
                   Model m{"bounded_confidence", kernels::bounded_confidence(d, param(p, "radius", 1.0),
                                                                            param(p, "strength", 1.0)),
                           std::nullopt, std::nullopt};
                   return m;
                 }});
    c.push_back({"constant", "point", "K~(x,y) = v (every component equal to `value`)", "0",
                 {{"value", 0.0, "velocity component", false}},
                 [](const ModelParams& p, std::size_t d, double) {
                   return Model{"constant", kernels::constant(Point(d, param(p, "value", 0.0))), std::nullopt,
                                std::nullopt};
                 }});
    c.push_back({"kuramoto", "point", "K~(x,y) = kappa * sin(y - x) componentwise (delayed Kuramoto phases)",
                 "kappa",
                 {{"coupling", 1.0, "coupling strength kappa"}},
                 [](const ModelParams& p, std::size_t d, double) {
                   return Model{"kuramoto", kernels::kuramoto(d, param(p, "coupling", 1.0)), std::nullopt,
                                std::nullopt};
                 }});
    c.push_back({"linear_attraction", "point", "K~(x,y) = k * (y - x); linear consensus", "k",
                 {{"strength", 1.0, "attraction gain k"}},
                 [](const ModelParams& p, std::size_t d, double) {
                   return Model{"linear_attraction", kernels::linear_attraction(d, param(p, "strength", 1.0)),
                                std::nullopt, std::nullopt};
                 }});
    c.push_back({"pheromone", "point+memory",
                 "bounded_confidence attraction toward past positions weighted by a fading memory rho: "
                 "rho(s) ~ exp(decay*s/tau) - exp(-decay) on `intervals` atoms, so older marks count less "
                 "and rho -> 0 as s -> -tau (trail-following agents such as ants)",
                 "k * 1.97165",
                 {{"radius", 1.0, "interaction radius R"},
                  {"strength", 1.0, "attraction gain k"},
                  {"decay", 3.0, "memory decay rate; larger forgets faster"},
                  {"intervals", 10.0, "number of memory quadrature intervals on [-tau,0]"}},
                 [](const ModelParams& p, std::size_t d, double tau) {
                   const double intervals = param(p, "intervals", 10.0);
                   if (intervals != std::floor(intervals)) throw DomainError("pheromone intervals must be an integer");
                   return Model{"pheromone",
                                kernels::bounded_confidence(d, param(p, "radius", 1.0), param(p, "strength", 1.0)),
                                DelayMeasure::fading_memory(tau, param(p, "decay", 3.0),
                                                            static_cast<std::size_t>(intervals)),
                                std::nullopt};
                 }});
    c.push_back({"pure_delay", "path", "K(x,sigma) = -g * sigma(-tau); with N = 1 this is x'(t) = -g x(t - tau)",
                 "g",
                 {{"gain", 1.0, "feedback gain g"}},
                 [](const ModelParams& p, std::size_t d, double tau) {
                   return Model{"pure_delay", std::nullopt, std::nullopt,
                                kernels::pure_delay(d, tau, param(p, "gain", 1.0))};
                 }});
    c.push_back({"zero", "point", "K~ = 0 (frozen dynamics)", "0", {},
                 [](const ModelParams&, std::size_t d, double) {
                   return Model{"zero", kernels::zero(d), std::nullopt, std::nullopt};
                 }});
    std::sort(c.begin(), c.end(), [](const ModelEntry& a, const ModelEntry& b) { return a.name < b.name; });
    return c;
  }();
  return catalog;
}

inline const ModelEntry& find_model(const std::string& name) {
  for (const auto& e : builtin_kernels())
    if (e.name == name) return e;
  throw ConfigError("unknown model '" + name + "'");
}

/// Builds a catalog model; unknown parameter names and nonpositive values of
/// positive parameters are rejected.
inline Model make_model(const std::string& name, const ModelParams& params, std::size_t dim, double tau) {
  const ModelEntry& entry = find_model(name);
  for (const auto& [key, value] : params) {
    auto it = std::find_if(entry.params.begin(), entry.params.end(), [&](const ParamDoc& d) { return d.name == key; });
    if (it == entry.params.end()) throw ConfigError("model '" + name + "' has no parameter '" + key + "'");
    if (!std::isfinite(value)) throw ConfigError("parameter '" + key + "' must be finite");
    if (it->positive && !(value > 0.0)) throw ConfigError("parameter '" + key + "' must be positive");
  }
  try {
    return entry.make(params, dim, tau);
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace delaykinetic
