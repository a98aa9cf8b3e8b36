#include "dvto/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>
#include <spdlog/spdlog.h>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace dvto {

namespace {

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw std::invalid_argument("cannot read config file " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::ofstream open_out(const std::filesystem::path& p, bool binary = false) {
  std::ofstream out(p, binary ? std::ios::binary : std::ios::out);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  return out;
}

nlohmann::json finite_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

}  // namespace

std::pair<int, int> parse_resolution(std::string_view text) {
  const auto x = text.find_first_of("xX");
  if (x == std::string_view::npos) {
    throw std::invalid_argument("resolution must look like 240x80");
  }
  try {
    std::size_t used = 0;
    const std::string w(text.substr(0, x)), h(text.substr(x + 1));
    const int nx = std::stoi(w, &used);
    if (used != w.size()) throw std::invalid_argument("");
    const int ny = std::stoi(h, &used);
    if (used != h.size()) throw std::invalid_argument("");
    if (nx < 1 || ny < 1) throw std::invalid_argument("");
    return {nx, ny};
  } catch (const std::exception&) {
    throw std::invalid_argument("resolution must look like 240x80, got '" + std::string(text) + "'");
  }
}

void apply_mode(ProblemSpec& spec, std::string_view mode) {
  if (mode == "adaptive") {
    spec.radius_mode = RadiusMode::Adaptive;
  } else if (mode == "fixed") {
    spec.radius_mode = RadiusMode::Fixed;
  } else if (mode == "gbd-e0") {
    spec.radius_mode = RadiusMode::Fixed;
    spec.scheme = SchemeKind::E0Only;
    spec.d0 = 1.0;
  } else if (mode == "gbd-vt") {
    spec.radius_mode = RadiusMode::Fixed;
    spec.scheme = SchemeKind::TargetStep;
    spec.d0 = 1.0;
  } else {
    throw std::invalid_argument("unknown mode '" + std::string(mode) +
                                "' (adaptive, fixed, gbd-e0, gbd-vt)");
  }
}

ProblemSpec build_spec(const RunConfig& config) {
  ProblemSpec spec = make_preset(config.preset);
  const int preset_nx = spec.nx;
  const double preset_radius = spec.filter_radius;
  bool radius_given = false;

  if (!config.config_path.empty()) {
    const std::string text = read_file(config.config_path);
    const ProblemSpec before = spec;
    apply_spec_text(spec, text);
    radius_given = spec.filter_radius != before.filter_radius;
  }
  if (config.resolution) {
    std::tie(spec.nx, spec.ny) = *config.resolution;
  }
  for (const auto& [key, value] : config.overrides) {
    if (key == "filter_radius") radius_given = true;
  }
  if (!radius_given && spec.nx != preset_nx) {
    spec.filter_radius = std::max(1.0, preset_radius * spec.nx / preset_nx);
  }
  if (config.mode) apply_mode(spec, *config.mode);
  for (const auto& [key, value] : config.overrides) apply_spec_value(spec, key, value);

  if (auto issues = validate(spec); !issues.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& s : issues) msg += "\n  " + s;
    throw std::invalid_argument(msg);
  }
  return spec;
}

MaterialMap material_map(const ProblemSpec& spec, const DesignField& design, bool mirror) {
  if (design.n_elements() != spec.nx * spec.ny) {
    throw std::invalid_argument("design does not match the mesh");
  }
  const bool twice = mirror && spec.support == Support::Mechanism;
  MaterialMap map;
  map.cols = spec.nx;
  map.rows = twice ? 2 * spec.ny : spec.ny;
  map.cells.assign(static_cast<std::size_t>(map.rows) * map.cols, 0);
  const int offset = twice ? spec.ny : 0;
  for (int col = 0; col < spec.nx; ++col) {
    for (int row = 0; row < spec.ny; ++row) {
      const int v = design.material_index(col * spec.ny + row);
      map.cells[static_cast<std::size_t>(offset + row) * map.cols + col] = v;
      // the half domain's top edge is the symmetry line
      if (twice) map.cells[static_cast<std::size_t>(spec.ny - 1 - row) * map.cols + col] = v;
    }
  }
  return map;
}

DesignField design_from_map(const ProblemSpec& spec, const MaterialMap& map) {
  if (map.cols != spec.nx || map.rows != spec.ny) {
    throw std::invalid_argument("map is " + std::to_string(map.cols) + "x" +
                                std::to_string(map.rows) + ", mesh is " +
                                std::to_string(spec.nx) + "x" + std::to_string(spec.ny));
  }
  DesignField d(spec.n_elements(), spec.n_materials());
  for (int col = 0; col < spec.nx; ++col) {
    for (int row = 0; row < spec.ny; ++row) {
      const int v = map(row, col);
      if (v < 0 || v > spec.n_materials()) {
        throw std::invalid_argument("material index out of range: " + std::to_string(v));
      }
      if (v > 0) d(col * spec.ny + row, v - 1) = 1.0;
    }
  }
  d.mark_binary();
  return d;
}

void write_design_csv(std::ostream& out, const MaterialMap& map) {
  for (int r = 0; r < map.rows; ++r) {
    for (int c = 0; c < map.cols; ++c) {
      if (c) out << ',';
      out << map(r, c);
    }
    out << '\n';
  }
}

MaterialMap read_design_csv(std::istream& in) {
  MaterialMap map;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    int cols = 0;
    while (std::getline(ss, cell, ',')) {
      map.cells.push_back(std::stoi(cell));
      ++cols;
    }
    if (map.rows == 0) map.cols = cols;
    if (cols != map.cols) throw std::invalid_argument("ragged design csv");
    ++map.rows;
  }
  return map;
}

void write_pgm(std::ostream& out, const MaterialMap& map, int n_materials) {
  out << "P5\n" << map.cols << ' ' << map.rows << "\n255\n";
  for (int v : map.cells) {
    out.put(static_cast<char>(std::lround(255.0 * v / std::max(1, n_materials))));
  }
}

void write_material_pgm(std::ostream& out, const MaterialMap& map, int material) {
  out << "P5\n" << map.cols << ' ' << map.rows << "\n255\n";
  for (int v : map.cells) out.put(static_cast<char>(v == material ? 255 : 0));
}

void write_summary_json(std::ostream& out, const ProblemSpec& spec, const RunResult& result) {
  nlohmann::json j;
  j["preset"] = spec.preset;
  j["nx"] = spec.nx;
  j["ny"] = spec.ny;
  j["f"] = finite_or_null(result.objective);
  j["N_FEM"] = result.fem_solves;
  j["iterations"] = result.iterations;
  j["stages"] = result.stages.size();
  j["wall_seconds"] = result.seconds;
  j["ok"] = result.ok;
  j["iteration_cap_hit"] = result.cap_hit;
  j["stalled"] = result.stalled;
  if (!result.failure.empty()) j["failure"] = result.failure;
  if (result.design.size() > 0) {
    const Measure m = measure(result.design, spec.constraint, spec.materials);
    j["measure"] = m.value;
    j["feasible"] = m.feasible;
    std::set<int> used;
    for (int e = 0; e < result.design.n_elements(); ++e) {
      if (int v = result.design.material_index(e)) used.insert(v);
    }
    j["materials_used"] = used;
  }
  out << j.dump(2) << '\n';
}

void write_artifacts(const std::filesystem::path& dir, const ProblemSpec& spec,
                     const RunResult& result) {
  std::filesystem::create_directories(dir);
  const MaterialMap map = material_map(spec, result.design);
  {
    auto out = open_out(dir / "design_final.csv");
    write_design_csv(out, map);
  }
  {
    auto out = open_out(dir / "design_final.pgm", true);
    write_pgm(out, map, spec.n_materials());
  }
  if (spec.n_materials() > 1) {
    for (int m = 1; m <= spec.n_materials(); ++m) {
      auto out = open_out(dir / ("design_material_" + std::to_string(m) + ".pgm"), true);
      write_material_pgm(out, map, m);
    }
  }
  {
    auto out = open_out(dir / "history.csv");
    write_history_csv(out, result.history);
  }
  {
    auto out = open_out(dir / "summary.json");
    write_summary_json(out, spec, result);
  }
  {
    auto out = open_out(dir / "config_used.txt");
    out << format_spec(spec);
  }
}

std::vector<ConditioningRow> diagnose_conditioning(
    const ProblemSpec& spec_in, const std::vector<std::pair<std::string, DesignField>>& extra) {
  ProblemSpec spec = spec_in;
  spec.max_iterations = 2;
  const FemModel model = make_model(spec);
  const ConicFilter filter(spec.nx, spec.ny, spec.filter_radius);
  StateSolver solver(model);

  std::vector<std::pair<std::string, DesignField>> designs;
  StageContext ctx{spec, model, filter, solver, {}, [&](int k, const DesignField& d) {
                     if (k > 0) designs.emplace_back("iteration " + std::to_string(k), d);
                   }};
  run_stage(ctx, initial_design(spec), {1, spec.materials.e_min, first_stage_target(spec)});

  // all-solid in the stiffest candidate
  int stiffest = 0;
  for (int m = 1; m < spec.n_materials(); ++m) {
    if (spec.materials.materials[m].young > spec.materials.materials[stiffest].young) stiffest = m;
  }
  DesignField solid(spec.n_elements(), spec.n_materials());
  for (int e = 0; e < spec.n_elements(); ++e) solid(e, stiffest) = 1.0;
  solid.mark_binary();
  designs.emplace_back("all solid", solid);
  designs.insert(designs.end(), extra.begin(), extra.end());

  std::vector<ConditioningRow> rows;
  for (const auto& [label, d] : designs) {
    MaterialSet lo = spec.materials, hi = spec.materials;
    lo.e_min = 1e-9;
    hi.e_min = 1e-2;
    ConditioningRow r;
    r.label = label;
    r.f_final = solver.analyze(d, lo).objective;
    r.f_relaxed = solver.analyze(d, hi).objective;
    rows.push_back(r);
  }
  return rows;
}

void write_conditioning_table(std::ostream& out, const std::vector<ConditioningRow>& rows) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-14s %20s %20s %14s\n", "design", "f(E0=1e-9)", "f(E0=1e-2)",
                "ratio");
  out << buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-14s %20.8g %20.8g %14.6g\n", r.label.c_str(), r.f_final,
                  r.f_relaxed, r.ratio());
    out << buf;
  }
}

void set_thread_count(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
  Eigen::setNbThreads(std::max(1, n));
}

}  // namespace dvto
