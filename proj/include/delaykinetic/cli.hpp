#pragma once

// JSON experiment configs and the runner behind `delaykinetic run`.

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "delaykinetic/analysis.hpp"
#include "delaykinetic/dde.hpp"
#include "delaykinetic/error.hpp"
#include "delaykinetic/io.hpp"
#include "delaykinetic/kernels.hpp"
#include "delaykinetic/meanfield.hpp"
#include "delaykinetic/measures.hpp"
#include "delaykinetic/version.hpp"

namespace delaykinetic::cli {

using Json = nlohmann::ordered_json;

enum class Mode { simulate, meanfield, transport, coherence, converge, stability };

inline const std::vector<std::pair<std::string, Mode>>& mode_names() {
  static const std::vector<std::pair<std::string, Mode>> names{
      {"simulate", Mode::simulate},   {"meanfield", Mode::meanfield}, {"transport", Mode::transport},
      {"coherence", Mode::coherence}, {"converge", Mode::converge},   {"stability", Mode::stability}};
  return names;
}

inline std::string to_string(Mode m) {
  for (const auto& [name, mode] : mode_names())
    if (mode == m) return name;
  return "unknown";
}

struct ExperimentConfig {
  Mode mode = Mode::simulate;
  std::string model;
  ModelParams params;
  std::optional<std::vector<std::pair<double, double>>> rho;  // (s, w) atoms
  double tau = 1.0;
  double dt = 0.01;
  double T = 1.0;
  Scheme scheme = Scheme::rk4;
  std::size_t dim = 1;
  SamplerSpec sampler;
  std::size_t count = 10;
  FixedPointConfig picard;
  long output_stride = 1;
  std::vector<std::size_t> counts{25, 50, 100, 200};
  std::size_t reference_count = 400;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::vector<double> times;  // empty: T
  std::vector<double> epsilons{0.01, 0.1};
  std::string output = "out";

  IntegratorConfig integrator() const { return {dt, T, scheme}; }
};

namespace detail {

inline void check_keys(const nlohmann::json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw ConfigError("unknown key '" + it.key() + "' in " + where);
  }
}

inline double number(const nlohmann::json& j, const std::string& key) {
  if (!j.is_number()) throw ConfigError("'" + key + "' must be a number");
  return j.get<double>();
}

inline std::uint64_t whole(const nlohmann::json& j, const std::string& key) {
  if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<long long>() >= 0))
    throw ConfigError("'" + key + "' must be a nonnegative integer");
  return j.get<std::uint64_t>();
}

inline std::string text(const nlohmann::json& j, const std::string& key) {
  if (!j.is_string()) throw ConfigError("'" + key + "' must be a string");
  return j.get<std::string>();
}

template <class F>
auto list(const nlohmann::json& j, const std::string& key, F&& item) {
  if (!j.is_array() || j.empty()) throw ConfigError("'" + key + "' must be a nonempty array");
  std::vector<decltype(item(j[0]))> out;
  for (const auto& e : j) out.push_back(item(e));
  return out;
}

}  // namespace detail

/// Parses and validates a config document. Unknown keys are rejected.
inline ExperimentConfig parse_config(const nlohmann::json& j) {
  using namespace detail;
  check_keys(j, "config",
             {"mode", "model", "rho", "tau", "dt", "T", "scheme", "dim", "initial", "picard", "output_stride",
              "converge", "stability", "output"});
  ExperimentConfig c;
  if (!j.contains("mode")) throw ConfigError("missing 'mode'");
  const std::string mode = text(j["mode"], "mode");
  auto m = std::find_if(mode_names().begin(), mode_names().end(), [&](const auto& p) { return p.first == mode; });
  if (m == mode_names().end()) throw ConfigError("unknown mode '" + mode + "'");
  c.mode = m->second;

  if (!j.contains("model")) throw ConfigError("missing 'model'");
  const auto& model = j["model"];
  check_keys(model, "model", {"name", "params"});
  if (!model.contains("name")) throw ConfigError("missing 'model.name'");
  c.model = text(model["name"], "model.name");
  find_model(c.model);
  if (model.contains("params")) {
    const auto& p = model["params"];
    if (!p.is_object()) throw ConfigError("'model.params' must be an object");
    for (auto it = p.begin(); it != p.end(); ++it) c.params[it.key()] = number(it.value(), "model.params." + it.key());
  }

  if (j.contains("tau")) c.tau = number(j["tau"], "tau");
  if (j.contains("dt")) c.dt = number(j["dt"], "dt");
  if (j.contains("T")) c.T = number(j["T"], "T");
  if (j.contains("scheme")) c.scheme = parse_scheme(text(j["scheme"], "scheme"));
  if (j.contains("dim")) c.dim = static_cast<std::size_t>(whole(j["dim"], "dim"));
  if (c.dim == 0) throw ConfigError("'dim' must be positive");
  if (j.contains("output_stride")) c.output_stride = static_cast<long>(whole(j["output_stride"], "output_stride"));
  if (c.output_stride < 1) throw ConfigError("'output_stride' must be at least 1");
  if (j.contains("output")) c.output = text(j["output"], "output");

  if (j.contains("rho")) {
    c.rho = list(j["rho"], "rho", [](const nlohmann::json& e) {
      if (!e.is_array() || e.size() != 2) throw ConfigError("each 'rho' entry must be [s, w]");
      return std::pair<double, double>(number(e[0], "rho.s"), number(e[1], "rho.w"));
    });
  }

  if (j.contains("initial")) {
    const auto& in = j["initial"];
    check_keys(in, "initial", {"sampler", "count", "radius", "seed"});
    if (in.contains("sampler")) c.sampler.kind = parse_sampler(text(in["sampler"], "initial.sampler"));
    if (in.contains("count")) c.count = static_cast<std::size_t>(whole(in["count"], "initial.count"));
    if (in.contains("radius")) c.sampler.radius = number(in["radius"], "initial.radius");
    if (in.contains("seed")) c.sampler.seed = whole(in["seed"], "initial.seed");
  }
  if (c.count == 0) throw ConfigError("'initial.count' must be positive");
  if (!(c.sampler.radius >= 0.0)) throw ConfigError("'initial.radius' must be nonnegative");

  if (j.contains("picard")) {
    const auto& p = j["picard"];
    check_keys(p, "picard", {"tol", "max_iters", "window_factor"});
    if (p.contains("tol")) c.picard.tol = number(p["tol"], "picard.tol");
    if (p.contains("max_iters")) c.picard.max_iters = static_cast<int>(whole(p["max_iters"], "picard.max_iters"));
    if (p.contains("window_factor")) c.picard.window_factor = number(p["window_factor"], "picard.window_factor");
  }
  c.picard.validate();

  if (j.contains("converge")) {
    const auto& p = j["converge"];
    check_keys(p, "converge", {"counts", "reference_count", "seeds", "times"});
    if (p.contains("counts"))
      c.counts = list(p["counts"], "converge.counts",
                      [](const nlohmann::json& e) { return static_cast<std::size_t>(whole(e, "converge.counts")); });
    if (p.contains("reference_count"))
      c.reference_count = static_cast<std::size_t>(whole(p["reference_count"], "converge.reference_count"));
    if (p.contains("seeds"))
      c.seeds = list(p["seeds"], "converge.seeds", [](const nlohmann::json& e) { return whole(e, "converge.seeds"); });
    if (p.contains("times"))
      c.times = list(p["times"], "converge.times", [](const nlohmann::json& e) { return number(e, "converge.times"); });
  } else if (c.mode == Mode::converge) {
    throw ConfigError("mode 'converge' requires a 'converge' section");
  }
  if (j.contains("stability")) {
    const auto& p = j["stability"];
    check_keys(p, "stability", {"epsilons"});
    if (p.contains("epsilons"))
      c.epsilons = list(p["epsilons"], "stability.epsilons",
                        [](const nlohmann::json& e) { return number(e, "stability.epsilons"); });
  } else if (c.mode == Mode::stability) {
    throw ConfigError("mode 'stability' requires a 'stability' section");
  }

  // grid constraints surface here as config errors
  TimeGrid grid(c.tau, c.integrator());
  (void)grid;
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open config file '" + path.string() + "'");
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(j);
}

/// The config with every default filled in.
inline Json resolved(const ExperimentConfig& c) {
  Json j;
  j["mode"] = to_string(c.mode);
  Json params = Json::object();
  for (const auto& p : find_model(c.model).params) {
    auto it = c.params.find(p.name);
    params[p.name] = it == c.params.end() ? p.default_value : it->second;
  }
  j["model"] = {{"name", c.model}, {"params", params}};
  if (c.rho) {
    Json r = Json::array();
    for (const auto& [s, w] : *c.rho) r.push_back({s, w});
    j["rho"] = r;
  }
  j["tau"] = c.tau;
  j["dt"] = c.dt;
  j["T"] = c.T;
  j["scheme"] = to_string(c.scheme);
  j["dim"] = c.dim;
  j["initial"] = {{"sampler", to_string(c.sampler.kind)},
                  {"count", c.count},
                  {"radius", c.sampler.radius},
                  {"seed", c.sampler.seed}};
  j["picard"] = {{"tol", c.picard.tol}, {"max_iters", c.picard.max_iters}, {"window_factor", c.picard.window_factor}};
  j["output_stride"] = c.output_stride;
  if (c.mode == Mode::converge)
    j["converge"] = {{"counts", c.counts}, {"reference_count", c.reference_count}, {"seeds", c.seeds}, {"times", c.times}};
  if (c.mode == Mode::stability) j["stability"] = {{"epsilons", c.epsilons}};
  j["output"] = c.output;
  return j;
}

struct Built {
  Model model;
  DelayMeasure rho;
  ModelSpec spec;
};

inline Built build_model(const ExperimentConfig& c) {
  Model model = make_model(c.model, c.params, c.dim, c.tau);
  if (c.rho && model.rho) throw ConfigError("model '" + c.model + "' defines its own memory; remove 'rho'");
  if (c.rho && model.delay) throw ConfigError("model '" + c.model + "' is a path kernel and takes no 'rho'");
  std::vector<double> s, w;
  if (c.rho)
    for (const auto& [a, b] : *c.rho) {
      s.push_back(a);
      w.push_back(b);
    }
  DelayMeasure rho = c.rho ? DelayMeasure(c.tau, s, w) : DelayMeasure::dirac(c.tau);
  ModelSpec spec = model_spec(model, rho, c.integrator());
  return {std::move(model), std::move(rho), std::move(spec)};
}

/// Collects the files a run writes, relative to the output directory.
class Artifacts {
 public:
  explicit Artifacts(std::filesystem::path dir) : dir_(std::move(dir)) { std::filesystem::create_directories(dir_); }

  std::ofstream open(const std::string& name) {
    files_.insert(name);
    return io::open_output((dir_ / name).string());
  }
  void add(const std::string& name) { files_.insert(name); }
  void json(const std::string& name, const Json& j) {
    auto os = open(name);
    os << j.dump(2) << '\n';
  }
  const std::filesystem::path& dir() const { return dir_; }
  std::vector<std::string> files() const { return {files_.begin(), files_.end()}; }

 private:
  std::filesystem::path dir_;
  std::set<std::string> files_;
};

namespace detail {

inline std::vector<std::string> with_coords(std::vector<std::string> head, std::size_t dim) {
  for (auto& n : io::coordinate_names(dim)) head.push_back(n);
  return head;
}

inline void write_curve(std::ostream& os, const std::vector<double>& times,
                        const std::function<PointMeasure(double)>& at) {
  io::CsvWriter w(os);
  bool header = false;
  for (double t : times) {
    const PointMeasure m = at(t);
    if (!header) {
      w.header(with_coords({"t", "atom_id", "weight"}, m.atom(0).size()));
      header = true;
    }
    for (std::size_t i = 0; i < m.size(); ++i) {
      w.field(t).field(i).field(m.weight(i));
      for (double x : m.atom(i)) w.field(x);
      w.end_row();
    }
  }
}

/// Step times from -tau to T every `stride` steps (T included).
inline std::vector<double> full_times(const TimeGrid& g, long stride) {
  std::vector<double> t;
  const auto& nodes = g.nodes();
  const long total = g.history_steps() + g.steps();
  for (long n = 0; n <= total; n += stride) t.push_back(nodes[static_cast<std::size_t>(n * g.substeps())]);
  if (total % stride) t.push_back(nodes.back());
  return t;
}

inline Json trace_json(const std::vector<PicardRecord>& trace) {
  Json j;
  j["sweeps"] = trace.size();
  j["final_residual"] = trace.empty() ? 0.0 : trace.back().residual;
  return j;
}

inline void require_point(const Built& b, const std::string& mode) {
  if (!b.spec.point) throw ConfigError("mode '" + mode + "' needs a point-kernel model (K~ with rho)");
}

}  // namespace detail

inline void run_simulate(const ExperimentConfig& c, const Built& b, Artifacts& out, std::ostream& log) {
  const auto paths = sample_paths(c.sampler, c.count, c.dim, c.tau);
  const PathStore store = b.spec.point ? simulate_imperfect_store(*b.spec.point, *b.spec.rho, paths, c.integrator())
                                       : simulate_store(b.spec.kernel, paths, c.integrator());
  const auto times = detail::full_times(store.grid(), c.output_stride);
  {
    auto os = out.open("trajectories.csv");
    io::CsvWriter w(os);
    w.header(detail::with_coords({"t", "particle_id"}, c.dim));
    Point x(c.dim);
    for (double t : times)
      for (std::size_t a = 0; a < store.count(); ++a) {
        const long i = store.grid().node_index(t);
        const double* v = store.node(a, static_cast<std::size_t>(i));
        w.field(t).field(a);
        for (std::size_t k = 0; k < c.dim; ++k) w.field(v[k]);
        w.end_row();
      }
  }
  double r0 = 0.0;
  for (const auto& p : paths) r0 = std::max(r0, p.max_norm());
  const BoundParams bp = bound_params(b.spec.kernel, r0);
  Json s;
  s["particles"] = c.count;
  s["initial_radius"] = r0;
  s["max_norm"] = store.max_norm();
  s["support_bound"] = flow_bounds(bp, store.grid().horizon(), r0).support;
  out.json("summary.json", s);
  log << "simulated " << c.count << " particles to T=" << io::format_double(store.grid().horizon()) << '\n';
}

inline void run_meanfield(const ExperimentConfig& c, const Built& b, Artifacts& out, std::ostream& log) {
  const PathMeasure mu_in = PathMeasure::uniform(sample_paths(c.sampler, c.count, c.dim, c.tau));
  FixedPointConfig cfg = c.picard;
  cfg.integrator = c.integrator();
  const FixedPointSolution sol = solve_fixed_point(mu_in, b.spec.kernel, cfg);
  {
    auto os = out.open("residuals.csv");
    write_residuals_csv(os, sol.trace);
  }
  {
    auto os = out.open("curve.csv");
    detail::write_curve(os, detail::full_times(sol.curve.grid(), c.output_stride),
                        [&](double t) { return sol.curve.positions(t); });
  }
  for (const auto& f : write_path_measure(out.dir() / "final_measure", sol.curve.at(sol.curve.horizon())))
    out.add("final_measure/" + f);
  Json s = detail::trace_json(sol.trace);
  s["initial_radius"] = sol.radius;
  s["max_norm"] = sol.curve.support_radius();
  s["fixed_point_residual"] = fixed_point_residual(sol.curve, mu_in, b.spec.kernel);
  out.json("summary.json", s);
  log << "fixed point: " << sol.trace.size() << " Picard sweeps\n";
}

inline void run_transport(const ExperimentConfig& c, const Built& b, Artifacts& out, std::ostream& log) {
  detail::require_point(b, "transport");
  const PathMeasure mu_in = PathMeasure::uniform(sample_paths(c.sampler, c.count, c.dim, c.tau));
  FixedPointConfig cfg = c.picard;
  cfg.integrator = c.integrator();
  const auto grid = make_grid(c.tau, cfg.integrator);
  const TransportSolution sol = solve_transport(evaluation_curve(mu_in, *grid), *b.spec.point, *b.spec.rho, cfg);
  {
    auto os = out.open("residuals.csv");
    write_residuals_csv(os, sol.trace);
  }
  {
    auto os = out.open("curve.csv");
    detail::write_curve(os, detail::full_times(*grid, c.output_stride), [&](double t) { return sol.curve.at(t); });
  }
  Json s = detail::trace_json(sol.trace);
  Json weak = Json::array();
  const PointMeasure end = sol.curve.at(grid->horizon());
  const TestFunction phi = tensor_bump(Point(c.dim, 0.0), 2.0 * std::max(1.0, c.sampler.radius));
  for (double t : grid->output_times(std::max<long>(1, grid->steps() / 4)))
    weak.push_back({{"t", t}, {"residual", weak_form_residual(sol.curve, *b.spec.point, *b.spec.rho, phi, t)}});
  s["weak_form"] = weak;
  s["atoms"] = end.size();
  out.json("summary.json", s);
  log << "transport: " << sol.trace.size() << " Picard sweeps\n";
}

inline void run_coherence(const ExperimentConfig& c, const Built& b, Artifacts& out, std::ostream& log) {
  detail::require_point(b, "coherence");
  const PathMeasure mu_in = PathMeasure::uniform(sample_paths(c.sampler, c.count, c.dim, c.tau));
  FixedPointConfig cfg = c.picard;
  cfg.integrator = c.integrator();
  const CoherenceReport rep = coherence_check(mu_in, *b.spec.point, *b.spec.rho, cfg, c.output_stride);
  {
    auto os = out.open("gap.csv");
    io::CsvWriter w(os);
    const std::array<std::string, 2> h{"t", "gap"};
    w.header(h);
    for (std::size_t i = 0; i < rep.times.size(); ++i) {
      w.field(rep.times[i]).field(rep.gap[i]);
      w.end_row();
    }
  }
  {
    auto os = out.open("residuals_fixed_point.csv");
    write_residuals_csv(os, rep.fixed_point_trace);
  }
  {
    auto os = out.open("residuals_transport.csv");
    write_residuals_csv(os, rep.transport_trace);
  }
  Json s;
  s["max_gap"] = rep.max_gap;
  s["compatibility"] = rep.compatibility;
  s["fixed_point"] = detail::trace_json(rep.fixed_point_trace);
  s["transport"] = detail::trace_json(rep.transport_trace);
  out.json("summary.json", s);
  log << "coherence: max gap " << io::format_double(rep.max_gap) << '\n';
}

inline void run_converge(const ExperimentConfig& c, const Built& b, Artifacts& out, std::ostream& log) {
  ConvergenceSpec spec{b.spec, c.sampler, c.counts, c.reference_count, c.seeds, c.times};
  if (spec.times.empty()) spec.times = {c.T};
  const ConvergenceTable table = convergence_study(spec);
  {
    auto os = out.open("table.csv");
    io::CsvWriter w(os);
    const std::array<std::string, 4> h{"N", "seed", "t", "w1"};
    w.header(h);
    for (const auto& r : table.rows) {
      w.field(r.count).field(static_cast<std::size_t>(r.seed)).field(r.t).field(r.w1);
      w.end_row();
    }
  }
  {
    auto os = out.open("medians.csv");
    io::CsvWriter w(os);
    const std::array<std::string, 3> h{"N", "t", "median_w1"};
    w.header(h);
    for (const auto& m : table.medians) {
      w.field(m.count).field(m.t).field(m.median);
      w.end_row();
    }
  }
  Json s;
  s["seeds"] = c.seeds;
  s["cross_check_1d"] = table.cross_check;
  Json dec = Json::array();
  for (double t : spec.times) dec.push_back({{"t", t}, {"medians_decrease", medians_decrease(table, t)}});
  s["trend"] = dec;
  out.json("summary.json", s);
  log << "convergence study: " << table.rows.size() << " rows\n";
}

inline void run_stability(const ExperimentConfig& c, const Built& b, Artifacts& out, std::ostream& log) {
  StabilitySpec spec{b.spec, PathMeasure::uniform(sample_paths(c.sampler, c.count, c.dim, c.tau)), c.epsilons,
                     c.picard, c.output_stride};
  const StabilityTable table = stability_study(spec);
  {
    auto os = out.open("table.csv");
    io::CsvWriter w(os);
    const std::array<std::string, 6> h{"epsilon", "kind", "t", "measured", "envelope", "pass"};
    w.header(h);
    for (const auto& r : table.rows) {
      w.field(r.epsilon);
      os << ',' << r.kind;
      w.field(r.t).field(r.measured).field(r.envelope).field(static_cast<int>(r.pass));
      w.end_row();
    }
  }
  Json s;
  s["pass"] = table.pass;
  s["r0"] = table.r0;
  out.json("summary.json", s);
  log << "stability: " << (table.pass ? "within" : "OUTSIDE") << " envelope\n";
}

inline int exit_code(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::divergence:
      return 3;
    case ErrorKind::convergence:
      return 4;
    case ErrorKind::io:
      return 1;
    default:
      return 2;
  }
}

/// Runs one experiment, writing artifacts and manifest.json under `out_dir`.
/// Returns the process exit status.
inline int run(const ExperimentConfig& c, const std::filesystem::path& out_dir, bool verbose, std::ostream& err) {
  const auto start = std::chrono::steady_clock::now();
  Artifacts out(out_dir);
  std::ostream null_stream(nullptr);
  std::ostream& log = verbose ? err : null_stream;
  int status = 0;
  Json error_record;
  try {
    const Built b = build_model(c);
    switch (c.mode) {
      case Mode::simulate:
        run_simulate(c, b, out, log);
        break;
      case Mode::meanfield:
        run_meanfield(c, b, out, log);
        break;
      case Mode::transport:
        run_transport(c, b, out, log);
        break;
      case Mode::coherence:
        run_coherence(c, b, out, log);
        break;
      case Mode::converge:
        run_converge(c, b, out, log);
        break;
      case Mode::stability:
        run_stability(c, b, out, log);
        break;
    }
  } catch (const NonConvergenceError& e) {
    status = exit_code(e);
    error_record = {{"kind", to_string(e.kind())}, {"message", e.what()}, {"exit_code", status}};
    auto os = out.open("residuals.csv");
    write_residuals_csv(os, e.trace());
  } catch (const DivergenceError& e) {
    status = exit_code(e);
    error_record = {{"kind", to_string(e.kind())}, {"message", e.what()}, {"step", e.step()}, {"exit_code", status}};
  } catch (const Error& e) {
    status = exit_code(e);
    error_record = {{"kind", to_string(e.kind())}, {"message", e.what()}, {"exit_code", status}};
  }
  if (status != 0) {
    out.json("error.json", error_record);
    err << "error: " << error_record["message"].get<std::string>() << '\n';
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  Json manifest;
  manifest["version"] = version();
  manifest["config"] = resolved(c);
  manifest["status"] = status;
  manifest["wall_time_seconds"] = wall;
  manifest["files"] = out.files();
  auto os = io::open_output((out.dir() / "manifest.json").string());
  os << manifest.dump(2) << '\n';
  return status;
}

/// Writes an error record for failures that happen before a config is available.
inline int fail_early(const Error& e, const std::filesystem::path& out_dir, std::ostream& err) {
  const int status = exit_code(e);
  err << "error: " << e.what() << '\n';
  try {
    Artifacts out(out_dir);
    out.json("error.json", {{"kind", to_string(e.kind())}, {"message", e.what()}, {"exit_code", status}});
    Json manifest;
    manifest["version"] = version();
    manifest["status"] = status;
    manifest["files"] = out.files();
    auto os = io::open_output((out.dir() / "manifest.json").string());
    os << manifest.dump(2) << '\n';
  } catch (const std::exception&) {
  }
  return status;
}

inline void describe_models(std::ostream& os) {
  for (const auto& e : builtin_kernels()) {
    os << e.name << " [" << e.kind << "]\n";
    os << "  " << e.summary << '\n';
    os << "  Lipschitz constant: " << e.lipschitz << '\n';
    if (e.params.empty()) os << "  parameters: none\n";
    for (const auto& p : e.params)
      os << "  - " << p.name << " (default " << io::format_double(p.default_value) << "): " << p.doc << '\n';
    os << '\n';
  }
}

}  // namespace delaykinetic::cli
