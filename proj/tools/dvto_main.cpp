#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "dvto/cli.hpp"

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitFailure = 3;

struct Flags {
  dvto::RunConfig config;
  std::string resolution;
  std::string mode;
  std::optional<double> vt, mmax, filter_radius, eps, d0, theta1, theta2, dv;
  std::optional<int> max_iters;
  std::string scheme;
  std::vector<std::string> sets;
  std::vector<std::string> designs;
  bool quiet = false;
  bool verbose = false;
};

void add_common(CLI::App& cmd, Flags& f) {
  cmd.add_option("--preset", f.config.preset, "mbb, cantilever, mechanism, mbb2mat, cantilever5mat, mechanism5mat")
      ->capture_default_str();
  cmd.add_option("--config", f.config.config_path, "key = value file applied on top of the preset");
  cmd.add_option("--resolution", f.resolution, "mesh as NXxNY, e.g. 240x80");
  cmd.add_option("--vt", f.vt, "target volume fraction");
  cmd.add_option("--mmax", f.mmax, "target mass fraction");
  cmd.add_option("--filter-radius", f.filter_radius, "filter radius in elements");
  cmd.add_option("--eps", f.eps, "relative gap tolerance");
  cmd.add_option("--d0", f.d0, "initial trust-region radius");
  cmd.add_option("--theta1", f.theta1, "radius shrink factor");
  cmd.add_option("--theta2", f.theta2, "radius growth factor");
  cmd.add_option("--mode", f.mode, "adaptive, fixed, gbd-e0 or gbd-vt");
  cmd.add_option("--scheme", f.scheme, "scheme1, scheme2 or target-step");
  cmd.add_option("--dv", f.dv, "target decrement for target-step stages");
  cmd.add_option("--max-iters", f.max_iters, "iteration cap per stage");
  cmd.add_option("--set", f.sets, "extra key=value override (repeatable)");
  cmd.add_flag("-q,--quiet", f.quiet, "only warnings and errors");
  cmd.add_flag("-v,--verbose", f.verbose, "log every master subproblem");
}

dvto::RunConfig resolve(Flags& f) {
  dvto::RunConfig c = f.config;
  if (!f.resolution.empty()) c.resolution = dvto::parse_resolution(f.resolution);
  if (!f.mode.empty()) c.mode = f.mode;
  auto put = [&](const char* key, const auto& v) {
    if (!v) return;
    std::ostringstream os;
    os << std::setprecision(17) << *v;
    c.overrides.emplace_back(key, os.str());
  };
  put("target", f.vt);
  put("target", f.mmax);
  put("filter_radius", f.filter_radius);
  put("tolerance", f.eps);
  put("d0", f.d0);
  put("theta1", f.theta1);
  put("theta2", f.theta2);
  put("target_step", f.dv);
  put("max_iterations", f.max_iters);
  if (!f.scheme.empty()) c.overrides.emplace_back("scheme", f.scheme);
  for (const auto& s : f.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got " + s);
    c.overrides.emplace_back(s.substr(0, eq), s.substr(eq + 1));
  }
  return c;
}

int cmd_run(Flags& f) {
  dvto::ProblemSpec spec;
  dvto::RunConfig cfg;
  try {
    cfg = resolve(f);
    spec = dvto::build_spec(cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  }
  spdlog::info("{} {}x{} target {} scheme {} radius {}", spec.preset, spec.nx, spec.ny,
               spec.constraint.target, dvto::to_string(spec.scheme),
               dvto::to_string(spec.radius_mode));
  dvto::RunResult res;
  try {
    res = dvto::run(spec, [](const dvto::IterationRecord& r) {
      spdlog::info("stage {} E0 {:.0e} k {:3d}  f {:.6g}  eta {:.6g}  U {:.6g}  d {:.4g}  subproblems {}",
                   r.stage, r.e0, r.k, r.f, r.eta, r.upper, r.d, r.subproblems);
    });
  } catch (const std::exception& e) {
    std::cerr << "error: optimization failed: " << e.what() << '\n';
    return kExitFailure;
  }
  try {
    dvto::write_artifacts(cfg.out_dir, spec, res);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  std::cout << "f = " << res.objective << "  N_FEM = " << res.fem_solves << "  time = "
            << res.seconds << " s  -> " << cfg.out_dir.string() << '\n';
  if (!res.ok) {
    std::cerr << "error: " << res.failure << '\n';
    return kExitFailure;
  }
  return 0;
}

int cmd_diagnose(Flags& f) {
  dvto::ProblemSpec spec;
  std::vector<std::pair<std::string, dvto::DesignField>> extra;
  try {
    spec = dvto::build_spec(resolve(f));
    for (const auto& path : f.designs) {
      std::ifstream in(path);
      if (!in) throw std::invalid_argument("cannot read " + path);
      extra.emplace_back(path, dvto::design_from_map(spec, dvto::read_design_csv(in)));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  }
  try {
    dvto::write_conditioning_table(std::cout, dvto::diagnose_conditioning(spec, extra));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  if (const char* t = std::getenv("DVTO_NUM_THREADS")) dvto::set_thread_count(std::atoi(t));

  CLI::App app{"Discrete topology optimization with trust-region multi-cut decomposition"};
  app.require_subcommand(1);
  Flags f;

  auto* run = app.add_subcommand("run", "optimize and write design_final.*, history.csv, summary.json");
  add_common(*run, f);
  run->add_option("--out", f.config.out_dir, "output directory")->capture_default_str();

  auto* diag = app.add_subcommand("diagnose", "objective at void modulus 1e-9 vs 1e-2 for early designs");
  add_common(*diag, f);
  diag->add_option("--design", f.designs, "extra design_final.csv to evaluate (unmirrored mesh)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitValidation;
  }
  spdlog::set_level(f.verbose ? spdlog::level::debug
                    : f.quiet ? spdlog::level::warn
                              : spdlog::level::info);
  spdlog::set_pattern("%H:%M:%S %^%l%$ %v");

  if (*run) return cmd_run(f);
  return cmd_diagnose(f);
}
