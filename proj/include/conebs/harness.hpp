#pragma once

#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "conebs/errors.hpp"

namespace conebs {

inline constexpr const char* kToolVersion = "1.0.0";

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumeric = 3;
inline constexpr int kExitInconclusive = 4;

enum class Command { none, critical_alpha, ground_state, isoperimetric, limit_study, knot_energy, convergence };
enum class OutputFormat { csv, json };

const char* to_string(Command c);
Command parse_command(const std::string& name);

/// Everything a run needs. Lists drive sweeps; empty lists fall back to
/// command-specific defaults described in the README.
struct RunConfig {
  Command command = Command::none;

  // geometry
  double L = 3.141592653589793;
  std::vector<double> R;  // empty: 1, or the matrix radii when sweeping the matrix
  std::string loop = "circle";  // circle | perturbed | file
  double eps = 0.0;
  int k = 2;
  std::string loop_file;

  // numerics
  int n_r = 16;
  int n_s = 0;  // 0: derived from n_r and L
  double grading = 2.0;
  std::vector<int> levels;  // radial counts (or nodes per unit length for limit-study)
  int max_n_r = 48;         // adaptive refinement cap for isoperimetric comparisons

  // physics
  std::vector<double> alpha;
  std::vector<double> alpha_mult;  // multiples of the circular cone's critical coupling

  // knot energy
  std::vector<double> a = {1.0};
  std::vector<double> b = {1.0};
  std::vector<double> c = {0.25};
  int n_quad = 256;

  // convergence
  std::string quantity = "mu0";  // mu0 | energy

  // sweep over the default experiment matrix instead of the single geometry
  bool matrix = false;

  // output
  std::string output;
  OutputFormat format = OutputFormat::csv;
  bool single_thread = false;

  bool operator==(const RunConfig&) const = default;
};

/// Applies one "key = value" setting; unknown keys and malformed values throw
/// a config error naming the key.
void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value);

/// Key-value text: one "key = value" per line, '#' starts a comment, lists are
/// comma separated.
RunConfig parse_config(std::istream& in);
RunConfig parse_config_file(const std::string& path);
void parse_config_into(std::istream& in, RunConfig& cfg);

/// Reparseable echo of every field.
std::string echo_config(const RunConfig& cfg);

/// Checks all parameter constraints up front; throws ErrorKind::config.
void validate(const RunConfig& cfg);

struct ExperimentMatrix {
  std::vector<double> L;
  std::vector<double> eps;
  std::vector<int> k;
  std::vector<double> alpha_mult;
  std::vector<double> R;
};

ExperimentMatrix default_matrix();

/// One output value; monostate is written as an empty CSV field or JSON null.
using Cell = std::variant<std::monostate, double, long long, std::string, bool>;

enum class RunStatus { ok, inconclusive };

struct RunRecord {
  RunConfig config;
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
  std::vector<std::pair<std::string, Cell>> summary;
  std::vector<std::string> notes;
  RunStatus status = RunStatus::ok;
  double wall_clock_seconds = 0.0;
  std::string version = kToolVersion;
  bool deterministic = false;  // single-threaded run
};

/// Runs the configured command. Throws Error on invalid input or numerical failure.
RunRecord run(const RunConfig& cfg);

/// Runs the configured quantity on >= 3 refinement levels, each twice the
/// previous, and reports the empirical order and the extrapolated value.
RunRecord convergence_report(const RunConfig& cfg);

std::string to_csv(const RunRecord& rec);
std::string to_json(const RunRecord& rec);

/// Output path: cfg.output, or "<command>.<ext>"; relative paths are placed
/// under $CONEBS_OUTPUT_DIR when that variable is set.
std::string resolve_output_path(const RunConfig& cfg);

void write_record(const RunRecord& rec, const std::string& path);

int exit_code(ErrorKind kind);
int exit_code(const RunRecord& rec);

/// Runs fn(0..n-1), concurrently unless single_thread; the first exception is rethrown.
void parallel_for(int n, bool single_thread, const std::function<void(int)>& fn);

}  // namespace conebs
