// Prints one PASS/FAIL line per acceptance criterion; exits nonzero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "delaykinetic/analysis.hpp"
#include "delaykinetic/meanfield.hpp"
#include "support/lp_oracle.hpp"

using namespace delaykinetic;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

template <class F>
HistoryPath on_grid(const TimeGrid& g, std::size_t dim, F&& f) {
  const auto grid = g.history_grid();
  std::vector<double> v;
  for (double s : grid) {
    const Point p = f(s);
    v.insert(v.end(), p.begin(), p.end());
  }
  return HistoryPath(g.tau(), grid, std::move(v), dim);
}

PathMeasure random_input(std::uint64_t seed, std::size_t n, std::size_t d, double tau, const TimeGrid& g) {
  auto raw = sample_paths({SamplerKind::affine, 1.0, seed}, n, d, tau);
  std::vector<HistoryPath> atoms;
  for (const auto& p : raw) atoms.push_back(p.resample(g.history_grid()));
  return PathMeasure::uniform(std::move(atoms));
}

FixedPointConfig picard(double dt, double T, double tol) {
  FixedPointConfig c;
  c.tol = tol;
  c.integrator = {dt, T, Scheme::rk4};
  return c;
}

// x' = -x(t - pi/2) with history cos: the solution is cos t
double cos_dde_error(long n_per_tau, Scheme scheme) {
  constexpr double tau = std::numbers::pi / 2;
  const IntegratorConfig cfg{tau / static_cast<double>(n_per_tau), 2.0 * std::numbers::pi, scheme};
  const TimeGrid g(tau, cfg);
  const std::vector<HistoryPath> init{on_grid(g, 1, [](double s) { return Point{std::cos(s)}; })};
  const auto traj = simulate_particles(kernels::pure_delay(1, tau), init, cfg);
  double err = 0.0;
  for (long n = 0; n <= g.steps(); ++n) {
    const double t = g.step_time(n);
    err = std::max(err, std::abs(traj[0](t)[0] - std::cos(t)));
  }
  return err;
}

Outcome ac1() {
  const auto t0 = std::chrono::steady_clock::now();
  // 1571 steps per delay: the step closest to 1e-3 that divides pi/2
  const double err = cos_dde_error(1571, Scheme::rk4);
  const double wall = seconds_since(t0);
  return {err < 1e-6 && wall < 1.0, "max|x-cos| = " + fmt(err) + ", " + fmt(wall) + " s"};
}

// classical RK4 on the undelayed mean-field ODE
std::vector<Point> ode_rk4(const PointKernel& k, std::vector<Point> x, double dt, long steps) {
  const std::size_t n = x.size(), d = x[0].size();
  auto rhs = [&](const std::vector<Point>& s) {
    std::vector<Point> out(n, Point(d, 0.0));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const Point v = k(s[i], s[j]);
        for (std::size_t c = 0; c < d; ++c) out[i][c] += v[c] / static_cast<double>(n);
      }
    return out;
  };
  auto axpy = [&](const std::vector<Point>& s, const std::vector<Point>& v, double h) {
    auto r = s;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < d; ++c) r[i][c] += h * v[i][c];
    return r;
  };
  for (long m = 0; m < steps; ++m) {
    const auto k1 = rhs(x);
    const auto k2 = rhs(axpy(x, k1, dt / 2));
    const auto k3 = rhs(axpy(x, k2, dt / 2));
    const auto k4 = rhs(axpy(x, k3, dt));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < d; ++c) x[i][c] += dt / 6 * (k1[i][c] + 2 * k2[i][c] + 2 * k3[i][c] + k4[i][c]);
  }
  return x;
}

Outcome ac2() {
  const auto t0 = std::chrono::steady_clock::now();
  const double dt = 0.01, T = 2.0;
  const auto kt = kernels::bounded_confidence(2, 1.5);
  const auto init = sample_paths({SamplerKind::affine, 1.0, 2024}, 10, 2, 1.0);
  const auto traj = simulate_imperfect(kt, DelayMeasure::dirac(1.0), init, {dt, T, Scheme::rk4});
  std::vector<Point> x0;
  for (const auto& h : init) x0.push_back(h(0.0));
  double err = 0.0;
  for (long m = 1; m <= 200; ++m) {
    if (m % 20) continue;
    const auto ref = ode_rk4(kt, x0, dt, m);
    for (std::size_t i = 0; i < init.size(); ++i) err = std::max(err, distance(traj[i](m * dt), ref[i]));
  }
  const double wall = seconds_since(t0);
  return {err <= 1e-10 && wall < 1.0, "max deviation " + fmt(err) + ", " + fmt(wall) + " s"};
}

Outcome ac3() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  for (const char* name : {"linear_attraction", "pheromone"})
    for (std::size_t n : {5u, 20u}) {
      const auto cfg = picard(0.02, 2.0, 1e-10);
      const auto grid = make_grid(1.0, cfg.integrator);
      const PathMeasure mu_in = random_input(40 + n, n, 2, 1.0, *grid);
      const auto kernel = make_model(name, {}, 2, 1.0).path_kernel(DelayMeasure(1.0, {-0.5, 0.0}, {0.5, 0.5}));
      const auto sol = solve_fixed_point(mu_in, kernel, cfg);
      const auto particles = PathMeasureCurve::uniform(simulate_store(kernel, mu_in.atoms(), cfg.integrator));
      for (double t : grid->output_times(1))
        worst = std::max(worst, wasserstein1_paths(sol.curve.at(t), particles.at(t)));
    }
  const double wall = seconds_since(t0);
  return {worst <= 1e-8 && wall < 30.0, "max W1 " + fmt(worst) + ", " + fmt(wall) + " s"};
}

Outcome ac4() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto lin_cfg = picard(0.01, 2.0, 1e-10);
  const PathMeasure pair =
      PathMeasure::uniform({HistoryPath::constant(1.0, {-1.0}), HistoryPath::constant(1.0, {1.0})});
  const auto lin = coherence_check(pair, kernels::linear_attraction(1), DelayMeasure::dirac(1.0), lin_cfg);
  // the transport curve itself against the closed form +-e^{-t}
  double closed = 0.0;
  const auto tr = solve_transport(evaluation_curve(pair, *make_grid(1.0, lin_cfg.integrator)),
                                  kernels::linear_attraction(1), DelayMeasure::dirac(1.0), lin_cfg);
  for (double t : make_grid(1.0, lin_cfg.integrator)->output_times(10)) {
    const PointMeasure m = tr.curve.at(t);
    for (std::size_t i = 0; i < m.size(); ++i) closed = std::max(closed, std::abs(std::abs(m.atom(i)[0]) - std::exp(-t)));
  }
  const bool span = lin.times.front() == 0.0 && std::abs(lin.times.back() - 2.0) < 1e-12;

  const auto ph_cfg = picard(0.02, 2.0, 1e-10);
  const auto grid = make_grid(1.0, ph_cfg.integrator);
  const auto model = make_model("pheromone", {}, 2, 1.0);
  const auto ph = coherence_check(random_input(12, 20, 2, 1.0, *grid), *model.point, *model.rho, ph_cfg);
  const double wall = seconds_since(t0);
  const bool pass = span && lin.max_gap <= 1e-8 && closed <= 1e-6 && ph.max_gap <= 10.0 * ph_cfg.tol && wall < 60.0;
  return {pass, "linear gap " + fmt(lin.max_gap) + " (closed form " + fmt(closed) + "), pheromone gap " +
                    fmt(ph.max_gap) + ", " + fmt(wall) + " s"};
}

Outcome ac5() {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const auto k = compose_imperfect(kernels::bounded_confidence(1, 2.0), DelayMeasure::fading_memory(1.0, 2.0, 9));
  double worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    // crossing time on a history node so both splices stay continuous
    const double h = -static_cast<double>(1 + rng() % 19) / 20.0;
    const double c = u(rng), k1 = u(rng), k2 = u(rng), q1 = u(rng), q2 = u(rng);
    auto s1 = HistoryPath::sample(1.0, 20, 1, [&](double s) { return Point{c + k1 * (s - h) + q1 * (s - h) * (s - h)}; });
    auto s2 = HistoryPath::sample(1.0, 20, 1, [&](double s) { return Point{c + k2 * (s - h) + q2 * (s - h) * (s - h)}; });
    const auto t1 = splice(s1, s2, h), t2 = splice(s2, s1, h);
    const Point x{u(rng)};
    const double before = k(x, s1)[0] + k(x, s2)[0];
    const double after = k(x, t1)[0] + k(x, t2)[0];
    worst = std::max(worst, std::abs(before - after) / std::max(1.0, std::abs(before)));
  }
  return {worst <= 1e-12, "max relative defect " + fmt(worst) + " over 100 cases"};
}

Outcome ac6() {
  int violations = 0, checks = 0;
  std::string per_model;
  for (const char* name : {"linear_attraction", "pheromone"}) {
    const Model model = make_model(name, {}, 2, 1.0);
    const DelayKernel kernel = model.path_kernel(DelayMeasure::dirac(1.0));
    const auto init = sample_paths({SamplerKind::affine, 1.0, 77}, 8, 2, 1.0);
    const auto curve = PathMeasureCurve::uniform(simulate_store(kernel, init, {0.02, 2.0, Scheme::rk4}));
    const FlowMap fm(curve, kernel);
    auto p = bound_params(kernel, 1.0);
    p.R0 = std::max(p.R0, 0.5 * curve.support_radius());
    std::mt19937_64 rng(5);
    int v = 0;
    for (int rep = 0; rep < 1000; ++rep) {
      const double t = 0.02 * static_cast<double>(rng() % 101);
      const Point x = sample_ball(rng, 2, 2.0), y = sample_ball(rng, 2, 2.0);
      const Point fx = flow(fm, 0.0, t, x), fy = flow(fm, 0.0, t, y);
      const FlowBounds b = flow_bounds(p, t, std::max(norm(x), norm(y)));
      if (!(norm(fx) <= b.support) || !(norm(fy) <= b.support)) ++v;
      if (!(distance(fx, fy) <= b.lip * distance(x, y) + 1e-12)) ++v;
      checks += 3;
    }
    violations += v;
    per_model += std::string(per_model.empty() ? "" : ", ") + name + " " + std::to_string(v);
  }
  return {violations == 0, std::to_string(violations) + " violations in " + std::to_string(checks) + " checks (" +
                               per_model + ")"};
}

Outcome ac7() {
  bool pass = stability_envelope_at(2.0, 0.0) == 1.0;
  double worst_ratio = 0.0;
  std::string r0s;
  for (const char* name : {"linear_attraction", "pheromone"}) {
    const auto model = model_spec(make_model(name, {}, 1, 1.0), DelayMeasure::dirac(1.0), {0.02, 2.0, Scheme::rk4});
    StabilitySpec spec{model, PathMeasure::uniform(sample_paths({SamplerKind::affine, 1.0, 11}, 6, 1, 1.0)),
                       {0.01, 0.1}, {}, 10, 1e-6};
    spec.picard.tol = 1e-10;
    const auto table = stability_study(spec);
    pass = pass && table.pass && table.r0 == 1.0;
    for (const auto& r : table.rows) {
      pass = pass && r.pass;
      if (r.envelope > 0.0) worst_ratio = std::max(worst_ratio, r.measured / r.envelope);
    }
  }
  return {pass, "r(0) = 1, max measured/envelope " + fmt(worst_ratio)};
}

std::vector<double> random_weights(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  std::vector<double> w(n);
  double s = 0.0;
  for (double& x : w) s += (x = u(rng));
  for (double& x : w) x /= s;
  double t = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) t += w[i];
  w.back() = 1.0 - t;
  return w;
}

PointMeasure random_measure(std::mt19937_64& rng, std::size_t n, std::size_t d) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<Point> atoms(n, Point(d));
  for (auto& a : atoms)
    for (double& x : a) x = g(rng);
  return PointMeasure(atoms, random_weights(rng, n));
}

Outcome ac8() {
  std::mt19937_64 rng(808);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double point_err = 0.0, path_err = 0.0, sorted_err = 0.0;
  for (int rep = 0; rep < 150; ++rep) {
    const std::size_t d = 1 + rep % 3, n = 1 + rng() % 50, m = 1 + rng() % 50;
    const auto mu = random_measure(rng, n, d), nu = random_measure(rng, m, d);
    std::vector<std::vector<double>> cost(n, std::vector<double>(m));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) {
        double s = 0.0;
        for (std::size_t c = 0; c < d; ++c) s += std::pow(mu.atom(i)[c] - nu.atom(j)[c], 2);
        cost[i][j] = std::sqrt(s);
      }
    const double exact = lp_oracle::transport(mu.weights(), nu.weights(), cost);
    point_err = std::max(point_err, std::abs(wasserstein1(mu, nu) - exact));
    if (d == 1)
      sorted_err = std::max(sorted_err, std::abs(wasserstein1(mu, nu, W1Method::sorted_1d) -
                                                 wasserstein1(mu, nu, W1Method::network_simplex)));
  }
  auto random_path = [&] {
    const std::size_t nodes = 2 + rng() % 6;
    return HistoryPath::sample(1.0, nodes, 2, [&](double) { return Point{u(rng), u(rng)}; });
  };
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t n = 1 + rng() % 20, m = 1 + rng() % 20;
    std::vector<HistoryPath> a, b;
    for (std::size_t i = 0; i < n; ++i) a.push_back(random_path());
    for (std::size_t j = 0; j < m; ++j) b.push_back(random_path());
    const PathMeasure mu(a, random_weights(rng, n)), nu(b, random_weights(rng, m));
    // every node grid k/(nodes-1) with nodes <= 7 is contained in k/420, and the
    // difference of two piecewise-linear paths peaks on the union of their nodes
    std::vector<std::vector<double>> cost(n, std::vector<double>(m, 0.0));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j)
        for (int k = 0; k <= 420; ++k) {
          const double s = -1.0 + k / 420.0;
          const Point p = a[i](s), q = b[j](s);
          cost[i][j] = std::max(cost[i][j], std::hypot(p[0] - q[0], p[1] - q[1]));
        }
    path_err = std::max(path_err, std::abs(wasserstein1_paths(mu, nu) - lp_oracle::transport(mu.weights(), nu.weights(), cost)));
  }
  for (int rep = 0; rep < 50; ++rep) {
    const auto mu = random_measure(rng, 1 + rng() % 50, 1), nu = random_measure(rng, 1 + rng() % 50, 1);
    sorted_err = std::max(sorted_err, std::abs(wasserstein1(mu, nu, W1Method::sorted_1d) -
                                               wasserstein1(mu, nu, W1Method::network_simplex)));
  }
  const bool pass = point_err <= 1e-8 && path_err <= 1e-8 && sorted_err <= 1e-9;
  return {pass, "points " + fmt(point_err) + ", paths " + fmt(path_err) + " (200 LP instances), 1D " + fmt(sorted_err)};
}

Outcome ac9() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto model =
      model_spec(make_model("linear_attraction", {}, 2, 1.0), DelayMeasure::dirac(1.0), {0.02, 1.0, Scheme::rk4});
  const ConvergenceSpec spec{model, {SamplerKind::affine, 1.0, 0}, {25, 50, 100, 200}, 400, {0, 1, 2, 3, 4}, {1.0}};
  const auto table = convergence_study(spec);
  std::string medians;
  for (const auto& m : table.medians) medians += (medians.empty() ? "" : " > ") + fmt(m.median);
  const double wall = seconds_since(t0);
  return {medians_decrease(table, 1.0) && wall < 300.0, "medians " + medians + ", " + fmt(wall) + " s"};
}

Outcome ac10() {
  const double r4 = cos_dde_error(16, Scheme::rk4) / cos_dde_error(32, Scheme::rk4);
  const double r1 = cos_dde_error(128, Scheme::euler) / cos_dde_error(256, Scheme::euler);
  const bool pass = r4 >= 12.0 && r4 <= 20.0 && r1 >= 1.8 && r1 <= 2.2;
  return {pass, "rk4 ratio " + fmt(r4) + ", euler ratio " + fmt(r1)};
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::set<std::string> data_files(const fs::path& dir) {
  std::set<std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) {
      const auto rel = fs::relative(e.path(), dir).generic_string();
      if (rel != "manifest.json") out.insert(rel);
    }
  return out;
}

Outcome ac11() {
  const fs::path root = fs::temp_directory_path() / "delaykinetic_acceptance";
  fs::remove_all(root);
  std::vector<fs::path> configs;
  for (const auto& e : fs::directory_iterator(DELAYKINETIC_CONFIGS))
    if (e.path().extension() == ".json") configs.push_back(e.path());
  std::sort(configs.begin(), configs.end());
  if (configs.empty()) return {false, "no configs found"};
  std::size_t compared = 0;
  std::vector<std::string> bad;
  for (const auto& cfg : configs) {
    const std::string stem = cfg.stem().string();
    for (const char* run : {"a", "b"}) {
      const fs::path out = root / stem / run;
      const std::string cmd = std::string(DELAYKINETIC_CLI) + " run --config " + cfg.string() + " --out " +
                              out.string() + " > /dev/null 2>&1";
      if (std::system(cmd.c_str()) != 0) bad.push_back(stem + " (exit status)");
    }
    const auto fa = data_files(root / stem / "a"), fb = data_files(root / stem / "b");
    if (fa != fb || fa.empty()) bad.push_back(stem + " (file sets)");
    for (const auto& f : fa) {
      ++compared;
      if (fb.count(f) && slurp(root / stem / "a" / f) != slurp(root / stem / "b" / f)) bad.push_back(stem + "/" + f);
    }
  }
  fs::remove_all(root);
  std::string detail = std::to_string(configs.size()) + " configs, " + std::to_string(compared) + " files compared";
  for (const auto& b : bad) detail += "; differs: " + b;
  return {bad.empty(), detail};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"AC-1", ac1}, {"AC-2", ac2}, {"AC-3", ac3}, {"AC-4", ac4},   {"AC-5", ac5},  {"AC-6", ac6},
      {"AC-7", ac7}, {"AC-8", ac8}, {"AC-9", ac9}, {"AC-10", ac10}, {"AC-11", ac11}};
  int failures = 0;
  for (const auto& [id, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::cout << id << ' ' << (o.pass ? "PASS" : "FAIL") << "  " << o.detail << std::endl;
  }
  return failures == 0 ? EXIT_SUCCESS : EXIT_FAILURE;
}
