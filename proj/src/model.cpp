#include "dvto/model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace dvto {

namespace {

constexpr double kFeasibilitySlack = 1e-9;

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

double parse_double(std::string_view key, std::string_view v) {
  std::string buf(v);
  char* end = nullptr;
  const double d = std::strtod(buf.c_str(), &end);
  if (buf.empty() || end != buf.c_str() + buf.size()) {
    throw std::invalid_argument("invalid number for '" + std::string(key) + "': " + buf);
  }
  return d;
}

long parse_long(std::string_view key, std::string_view v) {
  long out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw std::invalid_argument("invalid integer for '" + std::string(key) + "': " +
                                std::string(v));
  }
  return out;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Support parse_support(std::string_view v) {
  if (v == "mbb") return Support::Mbb;
  if (v == "cantilever") return Support::Cantilever;
  if (v == "mechanism") return Support::Mechanism;
  throw std::invalid_argument("unknown support: " + std::string(v));
}

SchemeKind parse_scheme(std::string_view v) {
  if (v == "scheme1" || v == "e0") return SchemeKind::E0Only;
  if (v == "scheme2" || v == "exponential") return SchemeKind::Exponential;
  if (v == "target-step" || v == "gbd-vt") return SchemeKind::TargetStep;
  throw std::invalid_argument("unknown scheme: " + std::string(v));
}

MaterialSet parse_materials(std::string_view v, double e_min) {
  MaterialSet set;
  set.e_min = e_min;
  set.materials.clear();
  while (!v.empty()) {
    auto comma = v.find(',');
    auto item = trim(v.substr(0, comma));
    v = comma == std::string_view::npos ? std::string_view{} : v.substr(comma + 1);
    if (item.empty()) continue;
    auto colon = item.find(':');
    if (colon == std::string_view::npos) {
      throw std::invalid_argument("material must be E:density, got " + std::string(item));
    }
    set.materials.push_back({parse_double("materials", trim(item.substr(0, colon))),
                             parse_double("materials", trim(item.substr(colon + 1)))});
  }
  return set;
}

}  // namespace

// ---------------------------------------------------------------------------
// DesignField

DesignField::DesignField(int n_elements, int n_materials, double fill)
    : n_elements_(n_elements),
      n_materials_(n_materials),
      values_(static_cast<std::size_t>(n_elements) * n_materials, fill),
      binary_(false) {
  if (n_elements < 0 || n_materials < 1) {
    throw std::invalid_argument("design field needs n_e >= 0 and n_M >= 1");
  }
}

void DesignField::mark_binary() {
  for (int e = 0; e < n_elements_; ++e) {
    double occ = 0.0;
    for (int m = 0; m < n_materials_; ++m) {
      const double v = (*this)(e, m);
      if (v != 0.0 && v != 1.0) {
        throw std::invalid_argument("binary design holds a non-binary entry at element " +
                                    std::to_string(e));
      }
      occ += v;
    }
    if (occ > 1.0) {
      throw std::invalid_argument("element " + std::to_string(e) + " holds two materials");
    }
  }
  binary_ = true;
}

double DesignField::occupancy(int e) const {
  double occ = 0.0;
  for (int m = 0; m < n_materials_; ++m) occ += (*this)(e, m);
  return occ;
}

int DesignField::material_index(int e) const {
  for (int m = 0; m < n_materials_; ++m) {
    if ((*this)(e, m) > 0.5) return m + 1;
  }
  return 0;
}

DesignField DesignField::from_assignment(std::span<const std::uint8_t> x, int n_elements,
                                         int n_materials) {
  DesignField d(n_elements, n_materials);
  if (x.size() != d.size()) {
    throw std::invalid_argument("assignment length does not match design shape");
  }
  for (std::size_t i = 0; i < x.size(); ++i) d.values_[i] = x[i] ? 1.0 : 0.0;
  d.mark_binary();
  return d;
}

// ---------------------------------------------------------------------------
// Validation and measures

std::vector<std::string> validate(const ProblemSpec& spec) {
  std::vector<std::string> out;
  if (spec.nx < 1 || spec.ny < 1) out.emplace_back("resolution must be at least 1x1");
  if (spec.materials.count() < 1) out.emplace_back("at least one material is required");
  if (!(spec.materials.e_min > 0.0)) out.emplace_back("E0 must be > 0");
  for (int m = 0; m < spec.materials.count(); ++m) {
    const auto& mat = spec.materials.materials[m];
    if (!(mat.young > spec.materials.e_min)) {
      out.push_back("material " + std::to_string(m + 1) + ": E must exceed E0");
    }
    if (!(mat.density > 0.0)) {
      out.push_back("material " + std::to_string(m + 1) + ": density must be > 0");
    }
  }
  if (!(spec.e0_relaxed > 0.0)) out.emplace_back("relaxed E0 must be > 0");
  if (spec.constraint.n_materials != spec.materials.count()) {
    out.emplace_back("constraint material count does not match material set");
  }
  if (spec.constraint.kind == ConstraintKind::Volume && spec.materials.count() != 1) {
    out.emplace_back("volume kind requires single material");
  }
  if (!(spec.constraint.target > 0.0 && spec.constraint.target <= 1.0)) {
    out.emplace_back("target must lie in (0, 1]");
  }
  if (!(spec.filter_radius >= 1.0)) out.emplace_back("filter radius must be >= 1");
  if (!(spec.tolerance > 0.0)) out.emplace_back("tolerance must be > 0");
  if (!(spec.theta1 > 0.0 && spec.theta1 < 1.0)) out.emplace_back("θ₁ must be < 1 and > 0");
  if (!(spec.theta2 > 1.0)) out.emplace_back("θ₂ must be > 1");
  if (!(spec.d_min > 0.0 && spec.d_min < spec.d_max && spec.d_max <= 1.0)) {
    out.emplace_back("radius bounds must satisfy 0 < d_min < d_max <= 1");
  }
  if (!(spec.d0 > 0.0)) out.emplace_back("initial radius must be > 0");
  if (!(spec.poisson > 0.0 && spec.poisson < 0.5)) {
    out.emplace_back("Poisson ratio must lie in (0, 0.5)");
  }
  if (spec.scheme == SchemeKind::Exponential) {
    if (spec.relax_stages < 2) out.emplace_back("exponential scheme needs N_P >= 2");
    if (!(spec.relax_start >= spec.constraint.target)) {
      out.emplace_back("exponential scheme needs P0 >= target");
    }
  }
  if (spec.scheme == SchemeKind::TargetStep && !(spec.target_step > 0.0)) {
    out.emplace_back("target step must be > 0");
  }
  if (spec.max_iterations < 1) out.emplace_back("iteration cap must be >= 1");
  if (spec.master_budget < 1) out.emplace_back("master budget must be >= 1");
  if (spec.max_selection_size < 0) out.emplace_back("selection size cap must be >= 0");
  if (spec.milp_node_limit < 1) out.emplace_back("node limit must be >= 1");
  if (!(spec.milp_gap >= 0.0 && spec.milp_gap < 1.0)) out.emplace_back("MILP gap must be in [0, 1)");
  if (spec.load == 0.0) out.emplace_back("load must be nonzero");
  if (spec.support == Support::Mechanism && (spec.spring_in < 0.0 || spec.spring_out < 0.0)) {
    out.emplace_back("spring stiffness must be >= 0");
  }
  return out;
}

double first_stage_target(const ProblemSpec& spec) {
  switch (spec.scheme) {
    case SchemeKind::E0Only:
      return spec.constraint.target;
    case SchemeKind::Exponential:
      return spec.relax_start;
    case SchemeKind::TargetStep:
      return 1.0;
  }
  return spec.constraint.target;
}

DesignField initial_design(const ProblemSpec& spec) {
  return DesignField(spec.n_elements(), spec.n_materials(), first_stage_target(spec));
}

Measure measure(const DesignField& design, const ConstraintSpec& constraint,
                const MaterialSet& materials) {
  if (design.n_materials() != constraint.n_materials ||
      design.n_materials() != materials.count()) {
    throw std::invalid_argument("design shape does not match the constraint");
  }
  const int ne = design.n_elements();
  if (ne == 0) return {0.0, true};
  double total = 0.0;
  bool exclusive_ok = true;
  for (int e = 0; e < ne; ++e) {
    double occ = 0.0;
    for (int m = 0; m < design.n_materials(); ++m) {
      const double v = design(e, m);
      occ += v;
      total += constraint.kind == ConstraintKind::Mass ? materials.materials[m].density * v : v;
    }
    if (design.binary() && occ > 1.0 + kFeasibilitySlack) exclusive_ok = false;
  }
  Measure out;
  out.value = total / ne;
  out.feasible = out.value <= constraint.target + kFeasibilitySlack;
  if (constraint.kind == ConstraintKind::Mass) out.feasible = out.feasible && exclusive_ok;
  return out;
}

// ---------------------------------------------------------------------------
// Presets

MaterialSet five_material_set(int which) {
  MaterialSet set;
  if (which == 1) {
    set.materials = {{0.4, 0.3}, {0.7, 0.5}, {0.85, 0.65}, {0.9, 0.8}, {1.0, 1.0}};
  } else if (which == 2) {
    set.materials = {{0.43, 0.3}, {0.7, 0.5}, {0.85, 0.65}, {0.94, 0.8}, {1.0, 1.0}};
  } else {
    throw std::invalid_argument("material set must be 1 or 2");
  }
  return set;
}

std::vector<std::string> preset_names() {
  return {"mbb", "cantilever", "mechanism", "mbb2mat", "cantilever5mat", "mechanism5mat"};
}

ProblemSpec make_preset(std::string_view name) {
  ProblemSpec s;
  s.preset = std::string(name);
  if (name == "mbb") {
    s.support = Support::Mbb;
    s.nx = 240, s.ny = 80, s.filter_radius = 4.0;
    s.constraint = {ConstraintKind::Volume, 0.4, 1};
    s.d0 = 0.4;
    s.scheme = SchemeKind::E0Only;
  } else if (name == "cantilever") {
    s.support = Support::Cantilever;
    s.nx = 240, s.ny = 120, s.filter_radius = 4.0;
    s.constraint = {ConstraintKind::Volume, 0.3, 1};
    s.d0 = 0.5;
    s.scheme = SchemeKind::E0Only;
  } else if (name == "mechanism") {
    s.support = Support::Mechanism;
    s.nx = 200, s.ny = 100, s.filter_radius = 2.0;
    s.constraint = {ConstraintKind::Volume, 0.3, 1};
    s.d0 = 0.3;
    s.scheme = SchemeKind::E0Only;
  } else if (name == "mbb2mat") {
    s.support = Support::Mbb;
    s.nx = 120, s.ny = 60, s.filter_radius = 2.0;
    s.materials.materials = {{0.55, 0.5}, {1.0, 1.0}};
    s.constraint = {ConstraintKind::Mass, 0.4, 2};
    s.d0 = 0.4;
    s.scheme = SchemeKind::Exponential;
    s.relax_start = 0.6, s.relax_stages = 7;
  } else if (name == "cantilever5mat") {
    s.support = Support::Cantilever;
    s.nx = 120, s.ny = 80, s.filter_radius = 3.0;
    s.materials = five_material_set(1);
    s.constraint = {ConstraintKind::Mass, 0.3, 5};
    s.d0 = 0.5;
    s.scheme = SchemeKind::Exponential;
    s.relax_start = 0.5, s.relax_stages = 7;
  } else if (name == "mechanism5mat") {
    s.support = Support::Mechanism;
    s.nx = 200, s.ny = 100, s.filter_radius = 2.0;
    s.materials = five_material_set(1);
    s.constraint = {ConstraintKind::Mass, 0.3, 5};
    s.d0 = 0.3;
    s.scheme = SchemeKind::E0Only;
  } else {
    throw std::invalid_argument("unknown preset: " + std::string(name));
  }
  return s;
}

// ---------------------------------------------------------------------------
// Text format

std::string_view to_string(Support s) {
  switch (s) {
    case Support::Mbb: return "mbb";
    case Support::Cantilever: return "cantilever";
    case Support::Mechanism: return "mechanism";
  }
  return "?";
}

std::string_view to_string(SchemeKind s) {
  switch (s) {
    case SchemeKind::E0Only: return "scheme1";
    case SchemeKind::Exponential: return "scheme2";
    case SchemeKind::TargetStep: return "target-step";
  }
  return "?";
}

std::string_view to_string(RadiusMode m) {
  return m == RadiusMode::Adaptive ? "adaptive" : "fixed";
}

std::string_view to_string(ConstraintKind k) {
  return k == ConstraintKind::Volume ? "volume" : "mass";
}

std::string format_spec(const ProblemSpec& s) {
  std::ostringstream os;
  os << "preset = " << s.preset << '\n';
  os << "support = " << to_string(s.support) << '\n';
  os << "nx = " << s.nx << '\n';
  os << "ny = " << s.ny << '\n';
  os << "poisson = " << fmt(s.poisson) << '\n';
  os << "load = " << fmt(s.load) << '\n';
  os << "spring_in = " << fmt(s.spring_in) << '\n';
  os << "spring_out = " << fmt(s.spring_out) << '\n';
  os << "e_min = " << fmt(s.materials.e_min) << '\n';
  os << "materials = ";
  for (std::size_t m = 0; m < s.materials.materials.size(); ++m) {
    if (m) os << ", ";
    os << fmt(s.materials.materials[m].young) << ':' << fmt(s.materials.materials[m].density);
  }
  os << '\n';
  os << "constraint = " << to_string(s.constraint.kind) << '\n';
  os << "target = " << fmt(s.constraint.target) << '\n';
  os << "filter_radius = " << fmt(s.filter_radius) << '\n';
  os << "tolerance = " << fmt(s.tolerance) << '\n';
  os << "d0 = " << fmt(s.d0) << '\n';
  os << "theta1 = " << fmt(s.theta1) << '\n';
  os << "theta2 = " << fmt(s.theta2) << '\n';
  os << "d_min = " << fmt(s.d_min) << '\n';
  os << "d_max = " << fmt(s.d_max) << '\n';
  os << "radius_mode = " << to_string(s.radius_mode) << '\n';
  os << "scheme = " << to_string(s.scheme) << '\n';
  os << "relax_start = " << fmt(s.relax_start) << '\n';
  os << "relax_stages = " << s.relax_stages << '\n';
  os << "target_step = " << fmt(s.target_step) << '\n';
  os << "e0_relaxed = " << fmt(s.e0_relaxed) << '\n';
  os << "max_iterations = " << s.max_iterations << '\n';
  os << "master_budget = " << s.master_budget << '\n';
  os << "max_selection_size = " << s.max_selection_size << '\n';
  os << "milp_node_limit = " << s.milp_node_limit << '\n';
  os << "milp_gap = " << fmt(s.milp_gap) << '\n';
  os << "bound_crossing = " << (s.bound_crossing ? "true" : "false") << '\n';
  return os.str();
}

void apply_spec_value(ProblemSpec& s, std::string_view key, std::string_view value) {
  value = trim(value);
  if (key == "preset") {
    s.preset = std::string(value);
  } else if (key == "support") {
    s.support = parse_support(value);
  } else if (key == "nx") {
    s.nx = static_cast<int>(parse_long(key, value));
  } else if (key == "ny") {
    s.ny = static_cast<int>(parse_long(key, value));
  } else if (key == "poisson") {
    s.poisson = parse_double(key, value);
  } else if (key == "load") {
    s.load = parse_double(key, value);
  } else if (key == "spring_in") {
    s.spring_in = parse_double(key, value);
  } else if (key == "spring_out") {
    s.spring_out = parse_double(key, value);
  } else if (key == "e_min") {
    s.materials.e_min = parse_double(key, value);
  } else if (key == "materials") {
    s.materials = parse_materials(value, s.materials.e_min);
    s.constraint.n_materials = s.materials.count();
  } else if (key == "material_set") {
    const double e_min = s.materials.e_min;
    s.materials = five_material_set(static_cast<int>(parse_long(key, value)));
    s.materials.e_min = e_min;
    s.constraint.n_materials = s.materials.count();
  } else if (key == "constraint") {
    if (value == "volume") {
      s.constraint.kind = ConstraintKind::Volume;
    } else if (value == "mass") {
      s.constraint.kind = ConstraintKind::Mass;
    } else {
      throw std::invalid_argument("unknown constraint kind: " + std::string(value));
    }
  } else if (key == "target" || key == "vt" || key == "mmax") {
    s.constraint.target = parse_double(key, value);
  } else if (key == "filter_radius") {
    s.filter_radius = parse_double(key, value);
  } else if (key == "tolerance" || key == "eps") {
    s.tolerance = parse_double(key, value);
  } else if (key == "d0") {
    s.d0 = parse_double(key, value);
  } else if (key == "theta1") {
    s.theta1 = parse_double(key, value);
  } else if (key == "theta2") {
    s.theta2 = parse_double(key, value);
  } else if (key == "d_min") {
    s.d_min = parse_double(key, value);
  } else if (key == "d_max") {
    s.d_max = parse_double(key, value);
  } else if (key == "radius_mode") {
    if (value == "adaptive") {
      s.radius_mode = RadiusMode::Adaptive;
    } else if (value == "fixed") {
      s.radius_mode = RadiusMode::Fixed;
    } else {
      throw std::invalid_argument("unknown radius mode: " + std::string(value));
    }
  } else if (key == "scheme") {
    s.scheme = parse_scheme(value);
  } else if (key == "relax_start") {
    s.relax_start = parse_double(key, value);
  } else if (key == "relax_stages") {
    s.relax_stages = static_cast<int>(parse_long(key, value));
  } else if (key == "target_step" || key == "dv") {
    s.target_step = parse_double(key, value);
  } else if (key == "e0_relaxed") {
    s.e0_relaxed = parse_double(key, value);
  } else if (key == "max_iterations" || key == "max_iters") {
    s.max_iterations = static_cast<int>(parse_long(key, value));
  } else if (key == "master_budget") {
    s.master_budget = static_cast<int>(parse_long(key, value));
  } else if (key == "max_selection_size") {
    s.max_selection_size = static_cast<int>(parse_long(key, value));
  } else if (key == "milp_node_limit") {
    s.milp_node_limit = parse_long(key, value);
  } else if (key == "milp_gap") {
    s.milp_gap = parse_double(key, value);
  } else if (key == "bound_crossing") {
    if (value == "true" || value == "1" || value == "on") {
      s.bound_crossing = true;
    } else if (value == "false" || value == "0" || value == "off") {
      s.bound_crossing = false;
    } else {
      throw std::invalid_argument("bound_crossing expects true or false, got " + std::string(value));
    }
  } else {
    throw std::invalid_argument("unknown key: " + std::string(key));
  }
}

void apply_spec_text(ProblemSpec& spec, std::string_view text) {
  int line_no = 0;
  while (!text.empty()) {
    auto nl = text.find('\n');
    auto line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw std::invalid_argument("line " + std::to_string(line_no) + ": expected key = value");
    }
    apply_spec_value(spec, trim(line.substr(0, eq)), line.substr(eq + 1));
  }
}

ProblemSpec parse_spec(std::string_view text) {
  // A `preset` line seeds the defaults; later keys override them.
  ProblemSpec spec;
  std::string_view scan = text;
  while (!scan.empty()) {
    auto nl = scan.find('\n');
    auto line = trim(scan.substr(0, nl));
    scan = nl == std::string_view::npos ? std::string_view{} : scan.substr(nl + 1);
    if (line.starts_with("preset")) {
      auto eq = line.find('=');
      if (eq != std::string_view::npos) {
        auto name = trim(line.substr(eq + 1));
        const auto names = preset_names();
        if (std::find(names.begin(), names.end(), name) != names.end()) {
          spec = make_preset(name);
        }
      }
      break;
    }
  }
  apply_spec_text(spec, text);
  return spec;
}

bool operator==(const Material& a, const Material& b) {
  return a.young == b.young && a.density == b.density;
}
bool operator==(const MaterialSet& a, const MaterialSet& b) {
  return a.materials == b.materials && a.e_min == b.e_min;
}
bool operator==(const ConstraintSpec& a, const ConstraintSpec& b) {
  return a.kind == b.kind && a.target == b.target && a.n_materials == b.n_materials;
}
bool operator==(const ProblemSpec& a, const ProblemSpec& b) {
  return a.preset == b.preset && a.support == b.support && a.nx == b.nx && a.ny == b.ny &&
         a.poisson == b.poisson && a.load == b.load && a.spring_in == b.spring_in &&
         a.spring_out == b.spring_out && a.materials == b.materials &&
         a.constraint == b.constraint && a.filter_radius == b.filter_radius &&
         a.tolerance == b.tolerance && a.d0 == b.d0 && a.theta1 == b.theta1 &&
         a.theta2 == b.theta2 && a.d_min == b.d_min && a.d_max == b.d_max &&
         a.radius_mode == b.radius_mode && a.scheme == b.scheme &&
         a.relax_start == b.relax_start && a.relax_stages == b.relax_stages &&
         a.target_step == b.target_step && a.e0_relaxed == b.e0_relaxed &&
         a.max_iterations == b.max_iterations && a.master_budget == b.master_budget &&
         a.max_selection_size == b.max_selection_size &&
         a.milp_node_limit == b.milp_node_limit && a.milp_gap == b.milp_gap &&
         a.bound_crossing == b.bound_crossing;
}

}  // namespace dvto
