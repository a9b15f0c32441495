// conebs: command-line front end for the cone spectral toolkit.

#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "conebs/harness.hpp"

namespace {

struct Flag {
  const char* name;
  const char* key;
  const char* help;
};

// Every value flag maps onto one config key and goes through the same parser
// as config files.
const Flag kFlags[] = {
    {"--L", "L", "cross-section length in (0, 2 pi]"},
    {"--R", "R", "cone radius (or comma-separated radii)"},
    {"--R-list", "R", "comma-separated radii"},
    {"--loop", "loop", "circle | perturbed | file"},
    {"--eps", "eps", "perturbation amplitude"},
    {"--k", "k", "perturbation wave number"},
    {"--loop-file", "loop_file", "loop record to read (implies --loop file)"},
    {"--n-r", "n_r", "radial nodes on the finest level"},
    {"--n-s", "n_s", "angular nodes on the n-r level, 0 for automatic"},
    {"--grading", "grading", "radial grading exponent towards the tip"},
    {"--levels", "levels", "comma-separated refinement levels"},
    {"--max-n-r", "max_n_r", "cap for adaptive refinement"},
    {"--alpha", "alpha", "coupling strength (or comma-separated list)"},
    {"--alpha-list", "alpha", "comma-separated couplings"},
    {"--alpha-mult", "alpha_mult", "couplings as multiples of the circular critical coupling"},
    {"--a", "a", "knot energy parameter a (list)"},
    {"--b", "b", "knot energy parameter b (list)"},
    {"--c", "c", "knot energy parameter c (list)"},
    {"--n-quad", "n_quad", "arc-length quadrature nodes"},
    {"--quantity", "quantity", "mu0 | energy (convergence)"},
    {"--output", "output", "output file"},
    {"--format", "format", "csv | json"},
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Birman-Schwinger spectral toolkit for delta interactions on cones"};
  app.set_version_flag("--version", std::string("conebs ") + conebs::kToolVersion);
  app.require_subcommand(0, 1);
  app.fallthrough();

  std::string config_path;
  bool single_thread = false;
  bool matrix = false;
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;
  app.add_option("--config", config_path, "key = value configuration file");
  app.add_flag("--single-thread", single_thread, "run sweep points sequentially (bit-reproducible)");
  app.add_flag("--matrix", matrix, "sweep the default experiment matrix");
  for (const Flag& f : kFlags) options[f.name] = app.add_option(f.name, values[f.name], f.help);

  const char* names[] = {"critical-alpha", "ground-state", "isoperimetric", "limit-study", "knot-energy",
                         "convergence"};
  for (const char* n : names) app.add_subcommand(n, std::string("run ") + n);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : conebs::kExitConfig;
  }

  try {
    conebs::RunConfig cfg;
    if (!config_path.empty()) cfg = conebs::parse_config_file(config_path);
    if (!app.get_subcommands().empty()) {
      conebs::apply_setting(cfg, "command", app.get_subcommands().front()->get_name());
    }
    for (const Flag& f : kFlags) {
      if (options[f.name]->count() > 0) conebs::apply_setting(cfg, f.key, values[f.name]);
    }
    if (options["--loop-file"]->count() > 0 && options["--loop"]->count() == 0) cfg.loop = "file";
    if (options["--eps"]->count() > 0 && options["--loop"]->count() == 0 && cfg.eps != 0.0 && cfg.loop == "circle") {
      cfg.loop = "perturbed";
    }
    if (single_thread) cfg.single_thread = true;
    if (matrix) cfg.matrix = true;

    const conebs::RunRecord rec = conebs::run(cfg);
    const std::string path = conebs::resolve_output_path(cfg);
    conebs::write_record(rec, path);
    std::cerr << "wrote " << path << " (" << rec.rows.size() << " rows, "
              << (rec.status == conebs::RunStatus::ok ? "ok" : "inconclusive") << ")\n";
    for (const auto& note : rec.notes) std::cerr << "note: " << note << "\n";
    return conebs::exit_code(rec);
  } catch (const conebs::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return conebs::exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return conebs::kExitNumeric;
  }
}
