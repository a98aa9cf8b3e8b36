#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <map>
#include <optional>
#include <sstream>
#include <tuple>

#include "dvto/cli.hpp"

namespace py = pybind11;
using namespace dvto;

namespace {

py::array_t<int> map_array(const MaterialMap& map) {
  py::array_t<int> out({map.rows, map.cols});
  auto a = out.mutable_unchecked<2>();
  for (int r = 0; r < map.rows; ++r)
    for (int c = 0; c < map.cols; ++c) a(r, c) = map(r, c);
  return out;
}

// (n_e, n_M) float array -> DesignField, marked binary when every entry is 0 or 1.
DesignField design_from_array(const ProblemSpec& spec, py::array_t<double> arr) {
  auto a = arr.unchecked();
  if (a.ndim() == 1 && spec.n_materials() == 1 && a.shape(0) == spec.n_elements()) {
    arr = arr.reshape({spec.n_elements(), 1});
  }
  auto b = arr.unchecked<2>();
  if (b.shape(0) != spec.n_elements() || b.shape(1) != spec.n_materials()) {
    throw std::invalid_argument("design must have shape (n_elements, n_materials)");
  }
  DesignField d(spec.n_elements(), spec.n_materials());
  bool binary = true;
  for (int e = 0; e < spec.n_elements(); ++e) {
    for (int m = 0; m < spec.n_materials(); ++m) {
      d(e, m) = b(e, m);
      binary = binary && (b(e, m) == 0.0 || b(e, m) == 1.0);
    }
  }
  if (binary) d.mark_binary();
  return d;
}

py::array_t<double> design_array(const DesignField& d) {
  py::array_t<double> out({d.n_elements(), d.n_materials()});
  auto a = out.mutable_unchecked<2>();
  for (int e = 0; e < d.n_elements(); ++e)
    for (int m = 0; m < d.n_materials(); ++m) a(e, m) = d(e, m);
  return out;
}

py::array_t<double> vec(const std::vector<double>& v) {
  return py::array_t<double>(static_cast<py::ssize_t>(v.size()), v.data());
}

py::array_t<double> vec(const Eigen::VectorXd& v) {
  return py::array_t<double>(static_cast<py::ssize_t>(v.size()), v.data());
}

py::dict record_dict(const IterationRecord& r) {
  py::dict d;
  d["stage"] = r.stage;
  d["k"] = r.k;
  d["f"] = r.f;
  d["eta"] = r.eta;
  d["U"] = r.upper;
  d["d"] = r.d;
  d["omega"] = r.omega;
  d["n_subproblems"] = r.subproblems;
  d["active_set"] = r.active;
  d["measure"] = r.measure;
  d["E0"] = r.e0;
  d["target"] = r.target;
  return d;
}

}  // namespace

PYBIND11_MODULE(_dvto, m) {
  m.doc() = "Discrete-variable topology optimization with trust-region cuts";

  py::class_<ProblemSpec>(m, "Spec")
      .def(py::init([](const std::string& preset) { return make_preset(preset); }),
           py::arg("preset") = "mbb")
      .def_static("from_text", &parse_spec)
      .def("to_text", &format_spec)
      .def("set",
           [](ProblemSpec& s, const std::string& key, py::object value) {
             std::string text;
             if (py::isinstance<py::bool_>(value)) {
               text = value.cast<bool>() ? "true" : "false";
             } else if (py::isinstance<py::float_>(value)) {
               std::ostringstream os;
               os.precision(17);
               os << value.cast<double>();
               text = os.str();
             } else {
               text = py::str(value).cast<std::string>();
             }
             apply_spec_value(s, key, text);
             return &s;
           },
           py::arg("key"), py::arg("value"), py::return_value_policy::reference_internal)
      .def("validate", &validate)
      .def_readwrite("preset", &ProblemSpec::preset)
      .def_readwrite("nx", &ProblemSpec::nx)
      .def_readwrite("ny", &ProblemSpec::ny)
      .def_readwrite("filter_radius", &ProblemSpec::filter_radius)
      .def_readwrite("tolerance", &ProblemSpec::tolerance)
      .def_readwrite("d0", &ProblemSpec::d0)
      .def_readwrite("max_iterations", &ProblemSpec::max_iterations)
      .def_property(
          "target", [](const ProblemSpec& s) { return s.constraint.target; },
          [](ProblemSpec& s, double v) { s.constraint.target = v; })
      .def_property_readonly("n_elements", &ProblemSpec::n_elements)
      .def_property_readonly("n_materials", &ProblemSpec::n_materials)
      .def_property_readonly("is_mechanism",
                             [](const ProblemSpec& s) { return s.objective() == Objective::Mechanism; })
      .def("__eq__", [](const ProblemSpec& a, const ProblemSpec& b) { return a == b; })
      .def("__repr__", [](const ProblemSpec& s) {
        return "<Spec " + s.preset + " " + std::to_string(s.nx) + "x" + std::to_string(s.ny) + ">";
      });

  m.def("preset_names", &preset_names);

  m.def("build_spec",
        [](const std::string& preset, std::optional<std::string> resolution,
           std::optional<std::string> mode, std::map<std::string, std::string> overrides) {
          RunConfig c;
          c.preset = preset;
          if (resolution) c.resolution = parse_resolution(*resolution);
          c.mode = mode;
          for (auto& [k, v] : overrides) c.overrides.emplace_back(k, v);
          return build_spec(c);
        },
        py::arg("preset") = "mbb", py::arg("resolution") = py::none(),
        py::arg("mode") = py::none(),
        py::arg("overrides") = std::map<std::string, std::string>{},
        "Preset plus resolution (radius rescaled), mode and key overrides; validated.");

  py::class_<RunResult>(m, "RunResult")
      .def_readonly("objective", &RunResult::objective)
      .def_readonly("fem_solves", &RunResult::fem_solves)
      .def_readonly("iterations", &RunResult::iterations)
      .def_readonly("ok", &RunResult::ok)
      .def_readonly("cap_hit", &RunResult::cap_hit)
      .def_readonly("stalled", &RunResult::stalled)
      .def_readonly("failure", &RunResult::failure)
      .def_readonly("seconds", &RunResult::seconds)
      .def_property_readonly("design", [](const RunResult& r) { return design_array(r.design); })
      .def_property_readonly("history", [](const RunResult& r) {
        py::list out;
        for (const auto& rec : r.history) out.append(record_dict(rec));
        return out;
      });

  m.def("run",
        [](const ProblemSpec& spec) {
          py::gil_scoped_release release;
          return run(spec);
        },
        py::arg("spec"), "Runs every relaxation stage and returns the final design and history.");

  m.def("material_map",
        [](const ProblemSpec& spec, py::array_t<double> design, bool mirror) {
          return map_array(material_map(spec, design_from_array(spec, design), mirror));
        },
        py::arg("spec"), py::arg("design"), py::arg("mirror") = true,
        "Rows top to bottom, 0 = void, m = material m; the mechanism half domain is mirrored.");

  m.def("write_artifacts",
        [](const std::filesystem::path& dir, const ProblemSpec& spec, const RunResult& r) {
          write_artifacts(dir, spec, r);
        },
        py::arg("dir"), py::arg("spec"), py::arg("result"));

  m.def("measure",
        [](const ProblemSpec& spec, py::array_t<double> design) {
          const Measure ms = measure(design_from_array(spec, design), spec.constraint, spec.materials);
          return py::make_tuple(ms.value, ms.feasible);
        },
        py::arg("spec"), py::arg("design"), "Volume or mass fraction and feasibility.");

  m.def("analyze",
        [](const ProblemSpec& spec, py::array_t<double> design, std::optional<double> e_min) {
          const DesignField d = design_from_array(spec, design);
          MaterialSet mat = spec.materials;
          if (e_min) mat.e_min = *e_min;
          const FemModel model = make_model(spec);
          StateSolver solver(model);
          const StateSolution st = solver.analyze(d, mat);
          const ConicFilter filter(spec.nx, spec.ny, spec.filter_radius);
          const auto raw = raw_sensitivities(model, d, st.u, st.mu, mat);
          py::dict out;
          out["objective"] = st.objective;
          out["u"] = vec(st.u);
          out["mu"] = vec(st.mu);
          out["raw"] = vec(raw);
          out["filtered"] = vec(filter.apply(raw, mat.count()));
          return out;
        },
        py::arg("spec"), py::arg("design"), py::arg("e_min") = py::none(),
        "State solve plus raw and filtered sensitivities (element-major).");

  m.def("initial_design", [](const ProblemSpec& s) { return design_array(initial_design(s)); });

  m.def("exponential_targets", &exponential_targets, py::arg("p0"), py::arg("pd"),
        py::arg("n_stages"));
  m.def("stage_schedule", [](const ProblemSpec& spec) {
    std::vector<std::pair<double, double>> out;
    for (const auto& s : make_schedule(spec).stages) out.emplace_back(s.e0, s.target);
    return out;
  });

  m.def("diagnose_conditioning", [](const ProblemSpec& spec) {
    std::vector<std::tuple<std::string, double, double>> out;
    for (const auto& r : diagnose_conditioning(spec)) out.emplace_back(r.label, r.f_final, r.f_relaxed);
    return out;
  });

  py::class_<SparseRow>(m, "Row")
      .def(py::init([](std::vector<int> index, std::vector<double> coef, double bound,
                       double eta_coef) {
             SparseRow r;
             r.index = std::move(index);
             r.coef = std::move(coef);
             r.bound = bound;
             r.eta_coef = eta_coef;
             return r;
           }),
           py::arg("index"), py::arg("coef"), py::arg("bound"), py::arg("eta_coef") = 0.0)
      .def_readwrite("index", &SparseRow::index)
      .def_readwrite("coef", &SparseRow::coef)
      .def_readwrite("bound", &SparseRow::bound)
      .def_readwrite("eta_coef", &SparseRow::eta_coef);

  py::class_<BinaryProgram>(m, "BinaryProgram")
      .def(py::init([](std::vector<double> cost, std::vector<SparseRow> rows,
                       std::vector<std::vector<int>> groups, bool has_eta, double constant) {
             BinaryProgram p;
             p.n = static_cast<int>(cost.size());
             p.cost = std::move(cost);
             p.rows = std::move(rows);
             p.groups = std::move(groups);
             p.has_eta = has_eta;
             p.constant = constant;
             return p;
           }),
           py::arg("cost"), py::arg("rows") = std::vector<SparseRow>{},
           py::arg("groups") = std::vector<std::vector<int>>{}, py::arg("has_eta") = false,
           py::arg("constant") = 0.0)
      .def_readonly("n", &BinaryProgram::n)
      .def("check", &BinaryProgram::check);

  py::class_<MilpResult>(m, "MilpResult")
      .def_property_readonly("status", [](const MilpResult& r) { return std::string(to_string(r.status)); })
      .def_readonly("objective", &MilpResult::objective)
      .def_readonly("x", &MilpResult::x)
      .def_readonly("eta", &MilpResult::eta)
      .def_readonly("nodes", &MilpResult::nodes);

  m.def("solve_milp",
        [](const BinaryProgram& p, long node_limit, double gap) {
          MilpOptions o;
          o.node_limit = node_limit;
          o.gap_tol = gap;
          return solve(p, o);
        },
        py::arg("program"), py::arg("node_limit") = 20000, py::arg("gap") = 1e-9,
        "Branch-and-bound over the LP relaxation.");
  m.def("brute_force", &brute_force, py::arg("program"), "Exhaustive optimum, n <= 24.");
}
