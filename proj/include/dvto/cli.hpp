#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dvto/model.hpp"
#include "dvto/relaxation.hpp"

namespace dvto {

/// Everything the command line can say about a run. Overrides use config-file keys.
struct RunConfig {
  std::string preset = "mbb";
  std::string config_path;
  std::optional<std::pair<int, int>> resolution;
  std::optional<std::string> mode;  // adaptive | fixed | gbd-e0 | gbd-vt
  std::vector<std::pair<std::string, std::string>> overrides;
  std::filesystem::path out_dir = "out";
};

/// "240x80" -> {240, 80}.
std::pair<int, int> parse_resolution(std::string_view text);

/// adaptive / fixed only touch the radius mode; the two baselines also fix d = 1 and the scheme.
void apply_mode(ProblemSpec& spec, std::string_view mode);

/// Preset, then config file, then resolution, mode and flag overrides.
///
/// Changing the resolution rescales the preset filter radius with nx unless a radius is given
/// explicitly. Throws std::invalid_argument when the result does not validate.
ProblemSpec build_spec(const RunConfig& config);

/// Row-major material map (rows top to bottom): 0 = void, m = material m (1-based).
/// The mechanism half domain is mirrored about its symmetry edge, doubling the rows.
struct MaterialMap {
  int cols = 0;
  int rows = 0;
  std::vector<int> cells;

  int operator()(int row, int col) const { return cells[static_cast<std::size_t>(row) * cols + col]; }
};

MaterialMap material_map(const ProblemSpec& spec, const DesignField& design, bool mirror = true);

void write_design_csv(std::ostream& out, const MaterialMap& map);
MaterialMap read_design_csv(std::istream& in);
/// Binary PGM, material index scaled to 255.
void write_pgm(std::ostream& out, const MaterialMap& map, int n_materials);
/// Binary PGM with 255 where the cell holds `material` (1-based).
void write_material_pgm(std::ostream& out, const MaterialMap& map, int material);
void write_summary_json(std::ostream& out, const ProblemSpec& spec, const RunResult& result);

/// Writes design_final.{csv,pgm}, per-material maps, history.csv, summary.json and the
/// resolved config (config_used.txt) into dir.
void write_artifacts(const std::filesystem::path& dir, const ProblemSpec& spec,
                     const RunResult& result);

/// Inverse of material_map for an unmirrored map.
DesignField design_from_map(const ProblemSpec& spec, const MaterialMap& map);

struct ConditioningRow {
  std::string label;
  double f_final = 0.0;    // void modulus 1e-9
  double f_relaxed = 0.0;  // void modulus 1e-2
  double ratio() const { return f_final / f_relaxed; }
};

/// Objective of a few designs at both void moduli: the first two master iterates of a
/// final-modulus stage, the all-solid design, and any extra designs supplied.
std::vector<ConditioningRow> diagnose_conditioning(
    const ProblemSpec& spec, const std::vector<std::pair<std::string, DesignField>>& extra = {});

void write_conditioning_table(std::ostream& out, const std::vector<ConditioningRow>& rows);

/// Applies a thread count to the parallel sections (no-op without OpenMP).
void set_thread_count(int n);

}  // namespace dvto
