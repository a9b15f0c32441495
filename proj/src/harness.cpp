#include "conebs/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <numbers>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "conebs/knot_energy.hpp"
#include "conebs/quadrature.hpp"
#include "conebs/solver.hpp"

namespace conebs {

namespace {

constexpr const char* kUnits =
    "energies in units with hbar = 2m = 1 (E = -kappa^2); lengths dimensionless; angles in radians";

[[noreturn]] void config_error(const std::string& msg) { throw Error(ErrorKind::config, msg); }

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  double v = 0.0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size() || !std::isfinite(v)) {
    config_error(key + ": expected a finite number, got '" + text + "'");
  }
  return v;
}

int parse_int(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  int v = 0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size()) {
    config_error(key + ": expected an integer, got '" + text + "'");
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  config_error(key + ": expected true or false, got '" + text + "'");
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  const std::string t = trim(text);
  if (t.empty()) return out;
  std::stringstream ss(t);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

std::vector<double> parse_double_list(const std::string& key, const std::string& text) {
  std::vector<double> out;
  for (const auto& item : split_list(text)) out.push_back(parse_double(key, item));
  return out;
}

std::vector<int> parse_int_list(const std::string& key, const std::string& text) {
  std::vector<int> out;
  for (const auto& item : split_list(text)) out.push_back(parse_int(key, item));
  return out;
}

template <class T>
std::string join(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    if constexpr (std::is_same_v<T, double>) {
      out += format_double(v[i]);
    } else {
      out += std::to_string(v[i]);
    }
  }
  return out;
}

// Geometry of one sweep point.
struct Shape {
  double L = 0.0;
  std::string loop = "circle";
  double eps = 0.0;
  int k = 0;
};

Loop build_loop(const Shape& g, const std::string& loop_file) {
  if (g.loop == "file") return read_loop_file(loop_file);
  if (g.loop == "circle" || g.eps == 0.0) return make_circle(g.L);
  return make_perturbed_loop(g.L, g.eps, g.k);
}

std::vector<int> radial_levels(const RunConfig& cfg) {
  if (!cfg.levels.empty()) return cfg.levels;
  const int lo = (3 * cfg.n_r + 2) / 4;
  if (lo < cfg.n_r) return {lo, cfg.n_r};
  return {cfg.n_r};
}

int angular_nodes(const RunConfig& cfg, int n_r, double L) {
  if (cfg.n_s <= 0) return default_angular_nodes(n_r, L);
  const double scaled = static_cast<double>(cfg.n_s) * n_r / cfg.n_r;
  return std::max(4, 4 * static_cast<int>(std::lround(scaled / 4.0)));
}

std::vector<Grid> level_grids(const RunConfig& cfg, double R, double L) {
  std::vector<Grid> grids;
  for (int n : radial_levels(cfg)) grids.push_back(build_grid(R, L, n, angular_nodes(cfg, n, L), cfg.grading));
  return grids;
}

std::vector<double> radii(const RunConfig& cfg) {
  if (!cfg.R.empty()) return cfg.R;
  if (cfg.matrix) return default_matrix().R;
  return {1.0};
}

// Sweep geometries: the configured one, or the matrix (non-circular only when
// the command compares against the circle).
std::vector<Shape> shapes(const RunConfig& cfg, bool perturbed_only) {
  if (!cfg.matrix) return {Shape{cfg.L, cfg.loop, cfg.eps, cfg.loop == "circle" ? 0 : cfg.k}};
  const ExperimentMatrix m = default_matrix();
  std::vector<Shape> out;
  for (double L : m.L) {
    for (double eps : m.eps) {
      if (eps == 0.0) {
        if (!perturbed_only) out.push_back(Shape{L, "circle", 0.0, 0});
        continue;
      }
      for (int k : m.k) out.push_back(Shape{L, "perturbed", eps, k});
    }
  }
  return out;
}

struct Coupling {
  double alpha = 0.0;
  double mult = std::numeric_limits<double>::quiet_NaN();
};

std::vector<Coupling> couplings(const RunConfig& cfg, double alpha_cr) {
  std::vector<Coupling> out;
  if (!cfg.alpha.empty()) {
    for (double a : cfg.alpha) out.push_back({a, a / alpha_cr});
    return out;
  }
  const std::vector<double> mults = cfg.alpha_mult.empty() ? default_matrix().alpha_mult : cfg.alpha_mult;
  for (double m : mults) out.push_back({m * alpha_cr, m});
  return out;
}

std::vector<Cell> shape_cells(const Shape& g, const Loop* loop) {
  const double L = loop && g.loop == "file" ? loop->length() : g.L;
  return {L, g.loop, g.eps, static_cast<long long>(g.k)};
}

const std::vector<std::string> kShapeColumns = {"L", "loop", "eps", "k"};

std::vector<std::string> with_shape(std::vector<std::string> rest) {
  std::vector<std::string> out = kShapeColumns;
  out.insert(out.end(), rest.begin(), rest.end());
  return out;
}

struct TaskOutput {
  std::vector<std::vector<Cell>> rows;
  std::vector<std::string> notes;
  bool inconclusive = false;
};

std::string describe(const Shape& g) {
  std::ostringstream os;
  os << "L = " << g.L << ", eps = " << g.eps << ", k = " << g.k;
  return os.str();
}

// Runs the sweep and concatenates rows in task order, independent of scheduling.
void collect(RunRecord& rec, bool single_thread, int n, const std::function<TaskOutput(int)>& task) {
  std::vector<TaskOutput> out(n);
  parallel_for(n, single_thread, [&](int i) { out[i] = task(i); });
  for (auto& t : out) {
    for (auto& r : t.rows) rec.rows.push_back(std::move(r));
    for (auto& s : t.notes) rec.notes.push_back(std::move(s));
    if (t.inconclusive) rec.status = RunStatus::inconclusive;
  }
}

void run_critical_alpha(const RunConfig& cfg, RunRecord& rec) {
  rec.columns = with_shape({"R", "alpha_cr", "alpha_cr_error", "mu0", "n_r", "n_s"});
  const std::vector<Shape> gs = shapes(cfg, false);
  const std::vector<double> Rs = radii(cfg);
  const int n = static_cast<int>(gs.size() * Rs.size());
  collect(rec, cfg.single_thread, n, [&](int i) {
    TaskOutput t;
    const Shape& g = gs[i / Rs.size()];
    const double R = Rs[i % Rs.size()];
    Loop loop;
    try {
      loop = build_loop(g, cfg.loop_file);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::infeasible_shape) throw;
      t.notes.push_back("skipped infeasible loop (" + describe(g) + "): " + e.what());
      return t;
    }
    const Cone cone(R, loop);
    std::vector<double> values;
    double mu0 = 0.0;
    for (const Grid& grid : level_grids(cfg, R, loop.length())) {
      MuFunction mu(cone, grid);
      mu0 = mu(0.0);
      values.push_back(1.0 / mu0);
    }
    const double err = values.size() > 1 ? std::abs(values.back() - values[values.size() - 2]) : 0.0;
    const int nr = radial_levels(cfg).back();
    auto row = shape_cells(g, &loop);
    row.insert(row.end(), {R, values.back(), err, mu0, static_cast<long long>(nr),
                           static_cast<long long>(angular_nodes(cfg, nr, loop.length()))});
    t.rows.push_back(std::move(row));
    return t;
  });
}

double circle_alpha_cr(const RunConfig& cfg, double R, double L) {
  const int nr = radial_levels(cfg).back();
  const Grid grid = build_grid(R, L, nr, angular_nodes(cfg, nr, L), cfg.grading);
  return critical_alpha(Cone(R, make_circle(L)), grid);
}

void run_ground_state(const RunConfig& cfg, RunRecord& rec) {
  rec.columns = with_shape({"R", "alpha", "alpha_over_alpha_cr", "energy", "energy_error", "bound", "kappa",
                            "alpha_cr_cone", "n_r", "n_s"});
  const std::vector<Shape> gs = shapes(cfg, false);
  const std::vector<double> Rs = radii(cfg);
  const int n = static_cast<int>(gs.size() * Rs.size());
  collect(rec, cfg.single_thread, n, [&](int i) {
    TaskOutput t;
    const Shape& g = gs[i / Rs.size()];
    const double R = Rs[i % Rs.size()];
    Loop loop;
    try {
      loop = build_loop(g, cfg.loop_file);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::infeasible_shape) throw;
      t.notes.push_back("skipped infeasible loop (" + describe(g) + "): " + e.what());
      return t;
    }
    const double L = loop.length();
    const Cone cone(R, loop);
    const std::vector<Grid> grids = level_grids(cfg, R, L);
    for (const Coupling& c : couplings(cfg, circle_alpha_cr(cfg, R, L))) {
      const EnergyEstimate e = ground_state_levels(c.alpha, cone, grids);
      const GroundState& gs_f = e.states.back();
      auto row = shape_cells(g, &loop);
      row.insert(row.end(), {R, c.alpha, c.mult, e.value, e.error, e.bound, gs_f.kappa, 1.0 / gs_f.mu0,
                             static_cast<long long>(grids.back().n_r), static_cast<long long>(grids.back().n_s)});
      t.rows.push_back(std::move(row));
    }
    return t;
  });
}

void run_isoperimetric(const RunConfig& cfg, RunRecord& rec) {
  rec.columns = with_shape({"R", "alpha", "alpha_over_alpha_cr", "E_circle", "E_circle_error", "E_loop",
                            "E_loop_error", "margin", "margin_error", "outcome", "n_r", "n_s"});
  const std::vector<Shape> gs = shapes(cfg, true);
  const std::vector<double> Rs = radii(cfg);
  struct Point {
    Shape g;
    double R;
    Coupling c;
  };
  // Expand couplings up front so every (shape, R, alpha) point is its own task.
  std::vector<Point> points;
  std::vector<std::string> infeasible;
  std::vector<Loop> loops;
  std::vector<int> loop_index;
  for (const Shape& g : gs) {
    try {
      loops.push_back(build_loop(g, cfg.loop_file));
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::infeasible_shape) throw;
      rec.notes.push_back("skipped infeasible loop (" + describe(g) + "): " + e.what());
      continue;
    }
    for (double R : Rs) {
      for (const Coupling& c : couplings(cfg, circle_alpha_cr(cfg, R, loops.back().length()))) {
        points.push_back({g, R, c});
        loop_index.push_back(static_cast<int>(loops.size()) - 1);
      }
    }
  }
  collect(rec, cfg.single_thread, static_cast<int>(points.size()), [&](int i) {
    TaskOutput t;
    const Point& p = points[i];
    const Loop& loop = loops[loop_index[i]];
    std::vector<GridLevel> lv;
    for (int nr : radial_levels(cfg)) lv.push_back({nr, angular_nodes(cfg, nr, loop.length())});
    const IsoperimetricResult r = isoperimetric_adaptive(p.c.alpha, p.R, loop, lv, cfg.max_n_r, cfg.grading);
    std::string outcome;
    if (r.e_circle == 0.0 && r.e_loop == 0.0) {
      outcome = "unbound";
    } else if (r.conclusive) {
      outcome = "conclusive";
    } else {
      outcome = "inconclusive";
      t.inconclusive = true;
    }
    auto row = shape_cells(p.g, &loop);
    row.insert(row.end(), {p.R, p.c.alpha, p.c.mult, r.e_circle, r.e_circle_error, r.e_loop, r.e_loop_error,
                           r.margin, r.error, outcome, static_cast<long long>(r.levels.back().n_r),
                           static_cast<long long>(r.levels.back().n_s)});
    t.rows.push_back(std::move(row));
    return t;
  });
}

void run_limit_study(const RunConfig& cfg, RunRecord& rec) {
  rec.columns = with_shape({"R", "energy", "energy_error", "bound", "n_r", "n_s"});
  const double alpha = cfg.alpha.front();
  const Shape g{cfg.L, cfg.loop, cfg.eps, cfg.loop == "circle" ? 0 : cfg.k};
  const Loop loop = build_loop(g, cfg.loop_file);
  std::vector<DensityLevel> levels;
  const std::vector<int> dens = cfg.levels.empty() ? std::vector<int>{4, 6} : cfg.levels;
  for (int d : dens) levels.push_back({d, 0.75 * d, cfg.grading});

  std::vector<std::pair<Shape, Loop>> runs;
  if (!loop.is_circular()) runs.push_back({Shape{loop.length(), "circle", 0.0, 0}, make_circle(loop.length())});
  runs.push_back({g, loop});
  std::vector<LimitStudyResult> results(runs.size());
  parallel_for(static_cast<int>(runs.size()), cfg.single_thread,
               [&](int i) { results[i] = limit_study(alpha, runs[i].second, radii(cfg), levels); });

  rec.summary.push_back({"alpha", alpha});
  rec.summary.push_back({"reference", results.back().reference});
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const LimitStudyResult& r = results[i];
    for (const LimitPoint& p : r.points) {
      auto row = shape_cells(runs[i].first, &runs[i].second);
      row.insert(row.end(), {p.R, p.energy, p.error, p.bound, static_cast<long long>(p.n_r),
                             static_cast<long long>(p.n_s)});
      rec.rows.push_back(std::move(row));
    }
    const std::string prefix = runs[i].first.loop == "circle" ? "circle_" : "loop_";
    rec.summary.push_back({prefix + "extrapolated", r.extrapolated});
    rec.summary.push_back({prefix + "extrapolation_error", r.extrapolation_error});
    rec.summary.push_back({prefix + "monotone", r.monotone});
    if (!r.monotone) {
      rec.notes.push_back(prefix + "study: " + r.flag);
      rec.status = RunStatus::inconclusive;
    }
  }
  if (runs.size() == 2) {
    const double diff = results[1].extrapolated - results[0].extrapolated;
    const double err = results[0].extrapolation_error + results[1].extrapolation_error;
    rec.summary.push_back({"loop_minus_circle", diff});
    rec.summary.push_back({"loop_below_circle_within_error", diff <= err});
  }
}

void run_knot_energy(const RunConfig& cfg, RunRecord& rec) {
  rec.columns = with_shape({"a", "b", "c", "phi_circle", "phi_loop", "gap", "gap_error", "n_quad", "outcome"});
  const std::vector<Shape> gs = shapes(cfg, true);
  std::vector<FParams> params;
  for (double a : cfg.a) {
    for (double b : cfg.b) {
      for (double c : cfg.c) params.push_back({a, b, c});
    }
  }
  collect(rec, cfg.single_thread, static_cast<int>(gs.size()), [&](int i) {
    TaskOutput t;
    const Shape& g = gs[i];
    Loop loop;
    try {
      loop = build_loop(g, cfg.loop_file);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::infeasible_shape) throw;
      t.notes.push_back("skipped infeasible loop (" + describe(g) + "): " + e.what());
      return t;
    }
    const Loop circle = make_circle(loop.length());
    for (const FParams& p : params) {
      const PhiEstimate gap = phi_f_gap(loop, circle, p, cfg.n_quad);
      Cell phi_c;
      Cell phi_l;
      if (p.c > 0.0) {
        phi_c = phi_f(circle, p, cfg.n_quad).fine;
        phi_l = phi_f(loop, p, cfg.n_quad).fine;
      }
      std::string outcome = "conclusive";
      if (!(gap.fine > 3.0 * gap.error)) {
        outcome = "inconclusive";
        t.inconclusive = true;
      }
      auto row = shape_cells(g, &loop);
      row.insert(row.end(), {p.a, p.b, p.c, phi_c, phi_l, gap.fine, gap.error, static_cast<long long>(gap.n), outcome});
      t.rows.push_back(std::move(row));
    }
    return t;
  });
}

}  // namespace

const char* to_string(Command c) {
  switch (c) {
    case Command::none: return "none";
    case Command::critical_alpha: return "critical-alpha";
    case Command::ground_state: return "ground-state";
    case Command::isoperimetric: return "isoperimetric";
    case Command::limit_study: return "limit-study";
    case Command::knot_energy: return "knot-energy";
    case Command::convergence: return "convergence";
  }
  return "none";
}

Command parse_command(const std::string& name) {
  for (Command c : {Command::critical_alpha, Command::ground_state, Command::isoperimetric, Command::limit_study,
                    Command::knot_energy, Command::convergence}) {
    if (name == to_string(c)) return c;
  }
  if (name.empty() || name == "none") return Command::none;
  config_error("unknown command '" + name +
               "'; expected critical-alpha, ground-state, isoperimetric, limit-study, knot-energy or convergence");
}

ExperimentMatrix default_matrix() {
  const double pi = std::numbers::pi;
  return {{0.5 * pi, pi, 1.5 * pi}, {0.0, 0.05, 0.1, 0.2}, {2, 3}, {0.5, 1.0, 2.0, 4.0}, {0.5, 1.0, 2.0, 4.0, 8.0}};
}

void apply_setting(RunConfig& cfg, const std::string& key_in, const std::string& value_in) {
  const std::string key = trim(key_in);
  const std::string value = trim(value_in);
  if (key == "command") {
    cfg.command = parse_command(value);
  } else if (key == "L") {
    cfg.L = parse_double(key, value);
    // A rounded 2 pi (e.g. 6.2832) means the disk.
    const double two_pi = 2.0 * std::numbers::pi;
    if (cfg.L > two_pi && cfg.L <= two_pi * (1.0 + 1e-4)) cfg.L = two_pi;
  } else if (key == "R") {
    cfg.R = parse_double_list(key, value);
  } else if (key == "loop") {
    if (value != "circle" && value != "perturbed" && value != "file") {
      config_error("loop: expected circle, perturbed or file, got '" + value + "'");
    }
    cfg.loop = value;
  } else if (key == "eps") {
    cfg.eps = parse_double(key, value);
  } else if (key == "k") {
    cfg.k = parse_int(key, value);
  } else if (key == "loop_file") {
    cfg.loop_file = value;
  } else if (key == "n_r") {
    cfg.n_r = parse_int(key, value);
  } else if (key == "n_s") {
    cfg.n_s = parse_int(key, value);
  } else if (key == "grading") {
    cfg.grading = parse_double(key, value);
  } else if (key == "levels") {
    cfg.levels = parse_int_list(key, value);
  } else if (key == "max_n_r") {
    cfg.max_n_r = parse_int(key, value);
  } else if (key == "alpha") {
    cfg.alpha = parse_double_list(key, value);
  } else if (key == "alpha_mult") {
    cfg.alpha_mult = parse_double_list(key, value);
  } else if (key == "a") {
    cfg.a = parse_double_list(key, value);
  } else if (key == "b") {
    cfg.b = parse_double_list(key, value);
  } else if (key == "c") {
    cfg.c = parse_double_list(key, value);
  } else if (key == "n_quad") {
    cfg.n_quad = parse_int(key, value);
  } else if (key == "quantity") {
    if (value != "mu0" && value != "energy") config_error("quantity: expected mu0 or energy, got '" + value + "'");
    cfg.quantity = value;
  } else if (key == "matrix") {
    cfg.matrix = parse_bool(key, value);
  } else if (key == "output") {
    cfg.output = value;
  } else if (key == "format") {
    if (value == "csv") {
      cfg.format = OutputFormat::csv;
    } else if (value == "json") {
      cfg.format = OutputFormat::json;
    } else {
      config_error("format: expected csv or json, got '" + value + "'");
    }
  } else if (key == "single_thread") {
    cfg.single_thread = parse_bool(key, value);
  } else {
    config_error("unknown configuration key '" + key + "'");
  }
}

void parse_config_into(std::istream& in, RunConfig& cfg) {
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      config_error("line " + std::to_string(lineno) + ": expected 'key = value', got '" + t + "'");
    }
    apply_setting(cfg, t.substr(0, eq), t.substr(eq + 1));
  }
}

RunConfig parse_config(std::istream& in) {
  RunConfig cfg;
  parse_config_into(in, cfg);
  return cfg;
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) config_error("cannot open config file '" + path + "'");
  return parse_config(in);
}

std::string echo_config(const RunConfig& cfg) {
  std::ostringstream os;
  os << "command = " << to_string(cfg.command) << "\n";
  os << "L = " << format_double(cfg.L) << "\n";
  os << "R = " << join(cfg.R) << "\n";
  os << "loop = " << cfg.loop << "\n";
  os << "eps = " << format_double(cfg.eps) << "\n";
  os << "k = " << cfg.k << "\n";
  os << "loop_file = " << cfg.loop_file << "\n";
  os << "n_r = " << cfg.n_r << "\n";
  os << "n_s = " << cfg.n_s << "\n";
  os << "grading = " << format_double(cfg.grading) << "\n";
  os << "levels = " << join(cfg.levels) << "\n";
  os << "max_n_r = " << cfg.max_n_r << "\n";
  os << "alpha = " << join(cfg.alpha) << "\n";
  os << "alpha_mult = " << join(cfg.alpha_mult) << "\n";
  os << "a = " << join(cfg.a) << "\n";
  os << "b = " << join(cfg.b) << "\n";
  os << "c = " << join(cfg.c) << "\n";
  os << "n_quad = " << cfg.n_quad << "\n";
  os << "quantity = " << cfg.quantity << "\n";
  os << "matrix = " << (cfg.matrix ? "true" : "false") << "\n";
  os << "output = " << cfg.output << "\n";
  os << "format = " << (cfg.format == OutputFormat::csv ? "csv" : "json") << "\n";
  os << "single_thread = " << (cfg.single_thread ? "true" : "false") << "\n";
  return os.str();
}

void validate(const RunConfig& cfg) {
  const double two_pi = 2.0 * std::numbers::pi;
  const Command cmd = cfg.command;
  if (cmd == Command::none) config_error("no command given");

  if (cfg.matrix && (cmd == Command::limit_study || cmd == Command::convergence)) {
    config_error(std::string("matrix sweeps are not available for ") + to_string(cmd));
  }
  if (!cfg.matrix) {
    if (cfg.loop == "file") {
      if (cfg.loop_file.empty()) config_error("loop = file needs loop_file");
    } else {
      if (!cfg.loop_file.empty()) config_error("loop_file is set but loop is '" + cfg.loop + "'; use loop = file");
      if (!(cfg.L > 0.0 && cfg.L <= two_pi)) config_error("L must lie in (0, 2 pi], got " + format_double(cfg.L));
    }
    if (cfg.loop == "circle" && cfg.eps != 0.0) config_error("eps is nonzero but loop is circle; use loop = perturbed");
    if (cfg.loop == "perturbed") {
      if (cfg.k < 2) config_error("k must be an integer >= 2");
      if (!(cfg.eps > 0.0)) config_error("loop = perturbed needs eps > 0");
    }
    try {
      (void)build_loop(Shape{cfg.L, cfg.loop, cfg.eps, cfg.k}, cfg.loop_file);
    } catch (const Error& e) {
      config_error(std::string("loop: ") + e.what());
    }
  }

  for (double R : cfg.R) {
    if (!(R > 0.0)) config_error("R values must be positive");
  }
  if (cfg.n_r < 4) config_error("n_r must be at least 4");
  if (cfg.n_s != 0 && cfg.n_s < 4) config_error("n_s must be 0 (automatic) or at least 4");
  if (!(cfg.grading >= 1.0)) config_error("grading must be at least 1");
  for (std::size_t i = 0; i < cfg.levels.size(); ++i) {
    if (cfg.levels[i] < 4) config_error("refinement levels must be at least 4");
    if (i > 0 && cfg.levels[i] <= cfg.levels[i - 1]) config_error("refinement levels must increase");
  }
  for (double a : cfg.alpha) {
    if (!(a > 0.0)) config_error("alpha values must be positive");
  }
  for (double m : cfg.alpha_mult) {
    if (!(m > 0.0)) config_error("alpha_mult values must be positive");
  }
  if (!cfg.alpha.empty() && !cfg.alpha_mult.empty()) config_error("give either alpha or alpha_mult, not both");

  switch (cmd) {
    case Command::ground_state:
    case Command::isoperimetric:
      if (cfg.alpha.empty() && cfg.alpha_mult.empty() && !cfg.matrix) config_error("alpha or alpha_mult is required");
      if (cmd == Command::isoperimetric) {
        if (radial_levels(cfg).size() < 2) config_error("isoperimetric needs at least two refinement levels");
        if (cfg.max_n_r < radial_levels(cfg).back()) config_error("max_n_r must not be below the finest level");
      }
      break;
    case Command::limit_study: {
      if (cfg.alpha.size() != 1 || !cfg.alpha_mult.empty()) {
        config_error("limit-study needs exactly one alpha (alpha_mult depends on R and is not accepted)");
      }
      if (cfg.R.size() < 3) config_error("limit-study needs at least three R values");
      for (std::size_t i = 1; i < cfg.R.size(); ++i) {
        if (!(cfg.R[i] > cfg.R[i - 1])) config_error("limit-study R values must increase");
      }
      if (!(cfg.L < two_pi) && cfg.loop != "file") config_error("limit-study needs L < 2 pi (the plane has no tip)");
      break;
    }
    case Command::knot_energy:
      if (cfg.a.empty() || cfg.b.empty() || cfg.c.empty()) config_error("knot-energy needs a, b and c");
      for (double a : cfg.a) {
        if (!(a >= 0.0)) config_error("a must be nonnegative");
      }
      for (double b : cfg.b) {
        if (!(b >= 0.0)) config_error("b must be nonnegative");
      }
      for (double c : cfg.c) {
        if (!(c >= 0.0)) config_error("c must be nonnegative");
      }
      for (double b : cfg.b) {
        for (double c : cfg.c) {
          if (b == 0.0 && c == 0.0) config_error("b and c must not both vanish");
        }
      }
      if (cfg.n_quad < 16) config_error("n_quad must be at least 16");
      break;
    case Command::convergence: {
      const std::vector<int>& lv = cfg.levels;
      if (lv.size() < 3) config_error("convergence needs at least three refinement levels");
      for (std::size_t i = 1; i < lv.size(); ++i) {
        if (lv[i] != 2 * lv[i - 1]) config_error("convergence levels must double, e.g. 16,32,64");
      }
      if (cfg.quantity == "energy" && (cfg.alpha.size() != 1 || !cfg.alpha_mult.empty())) {
        config_error("quantity = energy needs exactly one alpha");
      }
      if (cfg.quantity == "mu0" && (!cfg.alpha.empty() || !cfg.alpha_mult.empty())) {
        config_error("quantity = mu0 does not take alpha");
      }
      if (cfg.R.size() > 1) config_error("convergence takes a single R");
      break;
    }
    default:
      break;
  }
}

RunRecord run(const RunConfig& cfg) {
  validate(cfg);
  if (cfg.command == Command::convergence) return convergence_report(cfg);
  const auto t0 = std::chrono::steady_clock::now();
  RunRecord rec;
  rec.config = cfg;
  rec.deterministic = cfg.single_thread;
  switch (cfg.command) {
    case Command::critical_alpha: run_critical_alpha(cfg, rec); break;
    case Command::ground_state: run_ground_state(cfg, rec); break;
    case Command::isoperimetric: run_isoperimetric(cfg, rec); break;
    case Command::limit_study: run_limit_study(cfg, rec); break;
    case Command::knot_energy: run_knot_energy(cfg, rec); break;
    default: break;
  }
  rec.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

RunRecord convergence_report(const RunConfig& cfg) {
  validate(cfg);
  if (cfg.command != Command::convergence) throw Error(ErrorKind::misuse, "convergence_report needs command = convergence");
  const auto t0 = std::chrono::steady_clock::now();
  RunRecord rec;
  rec.config = cfg;
  rec.deterministic = cfg.single_thread;
  rec.columns = {"n_r", "n_s", "value", "change"};

  const Loop loop = build_loop(Shape{cfg.L, cfg.loop, cfg.eps, cfg.k}, cfg.loop_file);
  const double R = radii(cfg).front();
  const Cone cone(R, loop);
  const std::vector<Grid> grids = level_grids(cfg, R, loop.length());
  std::vector<double> values(grids.size());
  parallel_for(static_cast<int>(grids.size()), cfg.single_thread, [&](int i) {
    MuFunction mu(cone, grids[i]);
    values[i] = cfg.quantity == "mu0" ? mu(0.0) : ground_state_or_none(mu, cfg.alpha.front()).bottom();
  });
  for (std::size_t i = 0; i < grids.size(); ++i) {
    const Cell change = i == 0 ? Cell{} : Cell{values[i] - values[i - 1]};
    rec.rows.push_back({static_cast<long long>(grids[i].n_r), static_cast<long long>(grids[i].n_s), values[i], change});
  }
  const std::size_t n = values.size();
  const double order = empirical_order(values[n - 3], values[n - 2], values[n - 1]);
  rec.summary.push_back({"quantity", cfg.quantity});
  if (std::isnan(order)) {
    rec.summary.push_back({"order", Cell{}});
    rec.summary.push_back({"extrapolated", Cell{}});
    rec.summary.push_back({"band", Cell{}});
    rec.summary.push_back({"monotone", false});
    rec.notes.push_back("non-monotone convergence: successive changes do not shrink");
    rec.status = RunStatus::inconclusive;
  } else {
    const double extrapolated = richardson(values[n - 2], values[n - 1], order);
    rec.summary.push_back({"order", order});
    rec.summary.push_back({"extrapolated", extrapolated});
    rec.summary.push_back({"band", std::abs(values[n - 1] - extrapolated)});
    rec.summary.push_back({"monotone", true});
  }
  rec.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

namespace {

std::string cell_text(const Cell& c) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, std::monostate>) {
          return "";
        } else if constexpr (std::is_same_v<T, double>) {
          return format_double(v);
        } else if constexpr (std::is_same_v<T, long long>) {
          return std::to_string(v);
        } else if constexpr (std::is_same_v<T, bool>) {
          return v ? "true" : "false";
        } else {
          return v;
        }
      },
      c);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

nlohmann::ordered_json cell_json(const Cell& c) {
  return std::visit(
      [](const auto& v) -> nlohmann::ordered_json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, std::monostate>) {
          return nullptr;
        } else if constexpr (std::is_same_v<T, double>) {
          if (!std::isfinite(v)) return nullptr;
          return v;
        } else {
          return v;
        }
      },
      c);
}

const char* status_text(RunStatus s) { return s == RunStatus::ok ? "ok" : "inconclusive"; }

}  // namespace

std::string to_csv(const RunRecord& rec) {
  std::ostringstream os;
  os << "# conebs " << rec.version << " " << to_string(rec.config.command) << "\n";
  os << "# units: " << kUnits << "\n";
  os << "# status: " << status_text(rec.status) << "\n";
  os << "# single_thread: " << (rec.deterministic ? "true" : "false") << "\n";
  os << "# deterministic_seed: true\n";
  os << "# wall_clock_seconds: " << format_double(rec.wall_clock_seconds) << "\n";
  std::istringstream echo(echo_config(rec.config));
  for (std::string line; std::getline(echo, line);) os << "# config: " << line << "\n";
  for (const auto& [key, value] : rec.summary) os << "# summary: " << key << " = " << cell_text(value) << "\n";
  for (const auto& note : rec.notes) os << "# note: " << note << "\n";
  for (std::size_t i = 0; i < rec.columns.size(); ++i) os << (i ? "," : "") << csv_field(rec.columns[i]);
  os << "\r\n";
  for (const auto& row : rec.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << csv_field(cell_text(row[i]));
    os << "\r\n";
  }
  return os.str();
}

std::string to_json(const RunRecord& rec) {
  nlohmann::ordered_json j;
  j["tool"] = "conebs";
  j["version"] = rec.version;
  j["command"] = to_string(rec.config.command);
  j["units"] = kUnits;
  j["status"] = status_text(rec.status);
  j["single_thread"] = rec.deterministic;
  j["deterministic_seed"] = true;
  j["wall_clock_seconds"] = rec.wall_clock_seconds;
  j["config"] = echo_config(rec.config);
  j["columns"] = rec.columns;
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& row : rec.rows) {
    nlohmann::ordered_json r = nlohmann::ordered_json::array();
    for (const auto& c : row) r.push_back(cell_json(c));
    rows.push_back(std::move(r));
  }
  j["rows"] = std::move(rows);
  nlohmann::ordered_json summary = nlohmann::ordered_json::object();
  for (const auto& [key, value] : rec.summary) summary[key] = cell_json(value);
  j["summary"] = std::move(summary);
  j["notes"] = rec.notes;
  return j.dump(2) + "\n";
}

std::string resolve_output_path(const RunConfig& cfg) {
  std::filesystem::path p = cfg.output.empty()
                                ? std::filesystem::path(std::string(to_string(cfg.command)) +
                                                        (cfg.format == OutputFormat::csv ? ".csv" : ".json"))
                                : std::filesystem::path(cfg.output);
  if (p.is_relative()) {
    if (const char* dir = std::getenv("CONEBS_OUTPUT_DIR"); dir && *dir) p = std::filesystem::path(dir) / p;
  }
  return p.string();
}

void write_record(const RunRecord& rec, const std::string& path) {
  static std::mutex emit;
  const std::lock_guard<std::mutex> lock(emit);
  const std::filesystem::path p(path);
  if (p.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(p.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot write output file '" + path + "'");
  out << (rec.config.format == OutputFormat::csv ? to_csv(rec) : to_json(rec));
  if (!out) throw Error(ErrorKind::io, "failed writing output file '" + path + "'");
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config:
    case ErrorKind::domain:
    case ErrorKind::infeasible_shape:
    case ErrorKind::invalid_shape:
    case ErrorKind::io:
    case ErrorKind::misuse:
      return kExitConfig;
    default:
      return kExitNumeric;
  }
}

int exit_code(const RunRecord& rec) { return rec.status == RunStatus::ok ? kExitOk : kExitInconclusive; }

void parallel_for(int n, bool single_thread, const std::function<void(int)>& fn) {
  if (n <= 0) return;
  const int workers =
      single_thread ? 1 : std::min(n, static_cast<int>(std::max(1u, std::thread::hardware_concurrency())));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr first;
  std::mutex guard;
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          const std::lock_guard<std::mutex> lock(guard);
          if (!first) first = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first) std::rethrow_exception(first);
}

}  // namespace conebs
