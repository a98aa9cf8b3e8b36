#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dvto {

/// Candidate material: Young's modulus and normalized density (both dimensionless).
struct Material {
  double young = 1.0;
  double density = 1.0;
};

/// Ordered list of candidate materials plus the modulus assigned to void.
///
/// Material order carries no meaning; selection is driven by sensitivities.
struct MaterialSet {
  std::vector<Material> materials{Material{}};
  double e_min = 1e-9;

  int count() const { return static_cast<int>(materials.size()); }
};

enum class ConstraintKind { Volume, Mass };

struct ConstraintSpec {
  ConstraintKind kind = ConstraintKind::Volume;
  double target = 0.4;
  int n_materials = 1;

  /// Per-element at-most-one-material rows are present only for n_M > 1.
  bool exclusive() const { return n_materials > 1; }
};

enum class Support { Mbb, Cantilever, Mechanism };
enum class Objective { Compliance, Mechanism };

/// How the trust-region radius evolves inside a stage.
enum class RadiusMode { Adaptive, Fixed };

/// Stage schedule used by the relaxation driver.
enum class SchemeKind {
  E0Only,       // two stages, only the void modulus is relaxed
  Exponential,  // N_P exponential target stages followed by a final E0 stage
  TargetStep,   // target stepped down from 1.0 by a fixed increment (GBD-V_T baseline)
};

/// Full description of one optimization run.
struct ProblemSpec {
  std::string preset = "mbb";
  Support support = Support::Mbb;
  int nx = 240;
  int ny = 80;
  double poisson = 0.3;
  double load = 1.0;
  double spring_in = 0.1;
  double spring_out = 0.1;

  MaterialSet materials;
  ConstraintSpec constraint;

  double filter_radius = 4.0;
  double tolerance = 5e-3;

  double d0 = 0.4;
  double theta1 = 0.7;
  double theta2 = 1.5;
  double d_min = 1e-3;
  double d_max = 0.6;
  RadiusMode radius_mode = RadiusMode::Adaptive;

  SchemeKind scheme = SchemeKind::E0Only;
  double relax_start = 0.6;  // P_0 for the exponential scheme
  int relax_stages = 8;      // N_P for the exponential scheme
  double target_step = 1.0 / 24.0;
  double e0_relaxed = 1e-2;

  int max_iterations = 100;
  int master_budget = 32;
  int max_selection_size = 0;  // 0 = unlimited
  long milp_node_limit = 20000;
  double milp_gap = 1e-4;  // relative optimality gap of each master subproblem
  bool bound_crossing = false;  // also stop when eta exceeds the incumbent

  Objective objective() const {
    return support == Support::Mechanism ? Objective::Mechanism : Objective::Compliance;
  }
  int n_elements() const { return nx * ny; }
  int n_materials() const { return materials.count(); }
};

/// Per-element material occupancy, stored element-major (value(e, m) = values[e * n_M + m]).
///
/// Gray fields (entries strictly inside (0,1)) only appear as the initial design.
class DesignField {
 public:
  DesignField() = default;
  DesignField(int n_elements, int n_materials, double fill = 0.0);

  int n_elements() const { return n_elements_; }
  int n_materials() const { return n_materials_; }
  std::size_t size() const { return values_.size(); }

  double operator()(int e, int m) const { return values_[index(e, m)]; }
  double& operator()(int e, int m) { return values_[index(e, m)]; }
  std::size_t index(int e, int m) const {
    return static_cast<std::size_t>(e) * n_materials_ + m;
  }

  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  bool binary() const { return binary_; }
  /// Marks the field binary; throws if any entry is not 0/1 or an element holds two materials.
  void mark_binary();

  /// Sum over channels of element e.
  double occupancy(int e) const;
  /// 0 for void, m + 1 for material m (binary fields only).
  int material_index(int e) const;

  /// Builds a binary field from a 0/1 assignment vector of length n_e * n_M.
  static DesignField from_assignment(std::span<const std::uint8_t> x, int n_elements,
                                     int n_materials);

  friend bool operator==(const DesignField&, const DesignField&) = default;

 private:
  int n_elements_ = 0;
  int n_materials_ = 1;
  std::vector<double> values_;
  bool binary_ = false;
};

struct Measure {
  double value = 0.0;
  bool feasible = true;
};

/// Returns every violated invariant of the spec as a readable message; empty when valid.
std::vector<std::string> validate(const ProblemSpec& spec);

/// Gray start: every channel holds the first-stage target.
DesignField initial_design(const ProblemSpec& spec);

/// First-stage target implied by the spec's relaxation scheme.
double first_stage_target(const ProblemSpec& spec);

/// Volume or mass fraction of a design and whether it satisfies the constraint.
///
/// Feasibility is judged with a 1e-9 absolute slack; the per-element exclusivity check only
/// applies to binary multi-material designs.
Measure measure(const DesignField& design, const ConstraintSpec& constraint,
                const MaterialSet& materials);

/// Named presets: mbb, cantilever, mechanism, mbb2mat, cantilever5mat, mechanism5mat.
ProblemSpec make_preset(std::string_view name);
std::vector<std::string> preset_names();

/// The two five-material candidate sets (1 or 2).
MaterialSet five_material_set(int which);

/// Flat `key = value` text, one key per line; parse_spec(format_spec(s)) == s.
std::string format_spec(const ProblemSpec& spec);
ProblemSpec parse_spec(std::string_view text);
/// Applies `key = value` lines on top of an existing spec.
void apply_spec_text(ProblemSpec& spec, std::string_view text);
/// Applies one key/value pair; throws std::invalid_argument on unknown keys or bad values.
void apply_spec_value(ProblemSpec& spec, std::string_view key, std::string_view value);

bool operator==(const Material& a, const Material& b);
bool operator==(const MaterialSet& a, const MaterialSet& b);
bool operator==(const ConstraintSpec& a, const ConstraintSpec& b);
bool operator==(const ProblemSpec& a, const ProblemSpec& b);

std::string_view to_string(Support s);
std::string_view to_string(SchemeKind s);
std::string_view to_string(RadiusMode m);
std::string_view to_string(ConstraintKind k);

}  // namespace dvto
