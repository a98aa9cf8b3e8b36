// Acceptance suite: one PASS/FAIL line per criterion.
//
// Exit status is 0 when every failing criterion is listed with --expect-red; a listed criterion
// that passes is reported but does not fail the run.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "dvto/cli.hpp"
#include "support/instances.hpp"

using namespace dvto;
namespace fs = std::filesystem;

namespace {

// Tolerances and limits, pinned.
constexpr int kOracleInstances = 240;
constexpr double kOracleSeconds = 60.0;
constexpr double kOracleTol = 1e-9;
constexpr double kGradTol = 1e-4;
constexpr double kGradStep = 1e-6;
constexpr double kTrustTol = 1e-12;
constexpr double kBand = 0.15;
constexpr double kMbbRef = 233.80, kCantileverRef = 99.62, kTwoMatRef = 83.33;
constexpr double kFiveRef1 = 37.50, kFiveRef2 = 36.63;
constexpr int kMbbFem = 40, kCantileverFem = 40, kMechanismFem = 60, kTwoMatFem = 60,
              kFiveFem = 50;
constexpr double kMechanismMax = -0.80;
constexpr double kBoundTol = 1e-9;
constexpr double kOrderAgreement = 0.90;
constexpr double kOrderObjective = 0.03;

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string num(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double elapsed(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool within(double f, double ref, double band) { return std::abs(f - ref) <= band * std::abs(ref); }

// ---- property criteria -------------------------------------------------------------------

Verdict oracle_equivalence() {
  std::mt19937_64 rng(20240611);
  const auto t0 = std::chrono::steady_clock::now();
  int mismatches = 0, optimal = 0, grouped = 0;
  for (int i = 0; i < kOracleInstances; ++i) {
    BinaryProgram p;
    switch (i % 6) {
      case 0: p = testing::random_master_program(rng, 12 + i % 9, 1, 1, false); break;
      case 1: p = testing::random_master_program(rng, 10 + i % 11, 1, 3, false); break;
      case 2: p = testing::random_master_program(rng, 10, 2, 1, true); break;
      case 3: p = testing::random_master_program(rng, 6, 3, 2, true); break;
      case 4: p = testing::random_master_program(rng, 4, 5, 2, true); break;
      default: p = testing::random_dense_program(rng, 18, 4, true); break;
    }
    grouped += !p.groups.empty();
    const MilpResult a = solve(p);
    const MilpResult b = brute_force(p);
    optimal += b.status == MilpStatus::Optimal;
    const bool same =
        a.status == b.status &&
        (b.status != MilpStatus::Optimal ||
         (std::abs(a.objective - b.objective) <= kOracleTol * std::max(1.0, std::abs(b.objective)) &&
          evaluate(p, a.x).max_violation <= 1e-9));
    mismatches += !same;
  }
  const double secs = elapsed(t0);
  std::ostringstream os;
  os << kOracleInstances << " instances (" << grouped << " grouped, " << optimal
     << " feasible), " << mismatches << " mismatches, " << num("%.1f", secs) << " s";
  return {mismatches == 0 && secs < kOracleSeconds, os.str()};
}

double gradient_error(const char* preset) {
  ProblemSpec s = make_preset(preset);
  s.nx = 4, s.ny = 4;
  const FemModel model = make_model(s);
  StateSolver solver(model);
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> U(0.2, 0.9);
  DesignField d(model.n_elements(), 1);
  for (int e = 0; e < model.n_elements(); ++e) d(e, 0) = U(rng);
  const MaterialSet& mat = s.materials;
  const StateSolution st = solver.analyze(d, mat);
  const auto w = raw_single(model, d, st.u, st.mu, mat);
  const double e1 = mat.materials[0].young, e0 = mat.e_min;

  std::vector<double> grad(w.size()), fd(w.size());
  double scale = 0.0;
  for (int e = 0; e < model.n_elements(); ++e) {
    grad[e] = w[e] / ((e1 - e0) * d(e, 0) + e0) * (e1 - e0);
    DesignField p = d, m = d;
    p(e, 0) += kGradStep;
    m(e, 0) -= kGradStep;
    fd[e] = (solver.analyze(p, mat).objective - solver.analyze(m, mat).objective) / (2 * kGradStep);
    scale = std::max(scale, std::abs(fd[e]));
  }
  double worst = 0.0;
  for (std::size_t e = 0; e < fd.size(); ++e) {
    // entries far below the largest derivative are compared against 1% of it
    worst = std::max(worst, std::abs(grad[e] - fd[e]) / std::max(std::abs(fd[e]), 1e-2 * scale));
  }
  return worst;
}

Verdict gradient_check() {
  const double c = gradient_error("cantilever");
  const double m = gradient_error("mechanism");
  return {c <= kGradTol && m <= kGradTol,
          "max relative error compliance " + num("%.2e", c) + ", mechanism " + num("%.2e", m)};
}

Verdict trust_identities() {
  long checked = 0, bad = 0;
  auto design = [](int code, int n, int nm) {
    DesignField d(n, nm);
    for (int e = 0; e < n; ++e) {
      const int v = code % (nm + 1);
      code /= nm + 1;
      if (v > 0) d(e, v - 1) = 1.0;
    }
    d.mark_binary();
    return d;
  };
  auto distance = [](const DesignField& a, const DesignField& b) {
    int dist = 0;
    for (int e = 0; e < a.n_elements(); ++e) {
      double oa = 0, ob = 0;
      for (int m = 0; m < a.n_materials(); ++m) oa += a(e, m), ob += b(e, m);
      dist += oa != ob;
    }
    return dist;
  };
  auto sweep = [&](int n, int nm) {
    int codes = 1;
    for (int e = 0; e < n; ++e) codes *= nm + 1;
    for (int a = 0; a < codes; ++a) {
      const DesignField anchor = design(a, n, nm);
      const TrustRow row =
          trust_region_row(make_cut(0, anchor, 0.0, std::vector<double>(n * nm), 1.0));
      ++checked;
      bad += std::abs(row.lhs(anchor.values())) > kTrustTol;
      for (int b = 0; b < codes; ++b) {
        const DesignField rho = design(b, n, nm);
        ++checked;
        bad += std::abs(row.lhs(rho.values()) - distance(anchor, rho) / double(n * nm)) > kTrustTol;
      }
    }
  };
  for (int n = 1; n <= 6; ++n) sweep(n, 1);
  for (int n = 1; n <= 5; ++n) sweep(n, 2);
  return {bad == 0, std::to_string(checked) + " anchor/design pairs (n_e <= 6 single, <= 5 two-material), " +
                        std::to_string(bad) + " violations"};
}

Verdict schedule_tables() {
  const std::vector<double> a{0.600, 0.543, 0.492, 0.446, 0.404, 0.366, 0.331, 0.300};
  const std::vector<double> b{0.500, 0.459, 0.422, 0.387, 0.356, 0.327, 0.300};
  auto matches = [](const std::vector<double>& got, const std::vector<double>& want) {
    if (got.size() != want.size()) return false;
    for (std::size_t i = 0; i < got.size(); ++i) {
      if (std::lround(got[i] * 1000) != std::lround(want[i] * 1000)) return false;
    }
    return true;
  };
  const bool ok_a = matches(exponential_targets(0.6, 0.3, 8), a);
  const bool ok_b = matches(exponential_targets(0.5, 0.3, 7), b);
  return {ok_a && ok_b, std::string("0.6 -> 0.3 over 8 stages ") + (ok_a ? "matches" : "differs") +
                            ", 0.5 -> 0.3 over 7 stages " + (ok_b ? "matches" : "differs")};
}

// ---- regression runs ---------------------------------------------------------------------

struct Logged {
  std::string name;
  ProblemSpec spec;
  RunResult result;
};

class Runs {
 public:
  explicit Runs(fs::path out) : out_(std::move(out)) {}

  const Logged& get(const std::string& name, const ProblemSpec& spec) {
    auto it = runs_.find(name);
    if (it != runs_.end()) return it->second;
    spdlog::info("running {} ({}x{})", name, spec.nx, spec.ny);
    Logged l{name, spec, run(spec)};
    spdlog::info("{}: f = {:.6g}, N_FEM = {}, {:.1f} s", name, l.result.objective,
                 l.result.fem_solves, l.result.seconds);
    if (!out_.empty()) write_artifacts(out_ / name, spec, l.result);
    return runs_.emplace(name, std::move(l)).first->second;
  }

  const std::map<std::string, Logged>& all() const { return runs_; }

 private:
  fs::path out_;
  std::map<std::string, Logged> runs_;
};

std::string summary(const RunResult& r) {
  std::ostringstream os;
  os << "f = " << num("%.5g", r.objective) << ", N_FEM = " << r.fem_solves << ", "
     << num("%.0f", r.seconds) << " s";
  if (!r.ok) os << ", failed: " << r.failure;
  return os.str();
}

ProblemSpec preset(const char* name) { return make_preset(name); }

ProblemSpec five(int set) {
  ProblemSpec s = make_preset("cantilever5mat");
  s.materials = five_material_set(set);
  return s;
}

// Same materials as five(1), listed in a different order; permuted slot i holds original kOrder[i].
constexpr int kOrder[5] = {0, 2, 4, 3, 1};

ProblemSpec five_permuted() {
  ProblemSpec s = five(1);
  const auto base = s.materials.materials;
  for (int i = 0; i < 5; ++i) s.materials.materials[i] = base[kOrder[i]];
  return s;
}

Verdict regression(Runs& runs, const std::string& name, const ProblemSpec& spec, double ref,
                   int max_fem) {
  const RunResult& r = runs.get(name, spec).result;
  const bool ok = r.ok && within(r.objective, ref, kBand) && r.fem_solves <= max_fem;
  return {ok, summary(r) + " (ref " + num("%.2f", ref) + " +-15%, N_FEM <= " +
                  std::to_string(max_fem) + ")"};
}

Verdict mechanism(Runs& runs) {
  const RunResult& r = runs.get("mechanism", preset("mechanism")).result;
  const bool ok = r.ok && r.objective <= kMechanismMax && r.fem_solves <= kMechanismFem;
  return {ok, summary(r) + " (need f <= -0.80, N_FEM <= 60)"};
}

std::set<int> materials_used(const DesignField& d) {
  std::set<int> used;
  for (int e = 0; e < d.n_elements(); ++e) {
    if (int m = d.material_index(e); m > 0) used.insert(m);
  }
  return used;
}

std::string list(const std::set<int>& s) {
  std::string out = "{";
  for (int m : s) out += (out.size() > 1 ? "," : "") + std::to_string(m);
  return out + "}";
}

Verdict five_material(Runs& runs) {
  const RunResult& a = runs.get("cantilever5mat_set1", five(1)).result;
  const RunResult& b = runs.get("cantilever5mat_set2", five(2)).result;
  const auto ua = materials_used(a.design), ub = materials_used(b.design);
  const bool ok_a = a.ok && ua == std::set<int>{1, 2, 3, 5} && within(a.objective, kFiveRef1, kBand) &&
                    a.fem_solves <= kFiveFem;
  const bool ok_b = b.ok && ub == std::set<int>{1, 2, 3, 4, 5} &&
                    within(b.objective, kFiveRef2, kBand) && b.fem_solves <= kFiveFem;
  return {ok_a && ok_b, "set 1: " + summary(a) + ", materials " + list(ua) + "; set 2: " +
                            summary(b) + ", materials " + list(ub)};
}

Verdict bounds(const Runs& runs) {
  int checked = 0, u_rises = 0, eta_above = 0, eta_above_after = 0, infeasible = 0;
  std::string where;
  for (const auto& [name, l] : runs.all()) {
    ++checked;
    const auto& h = l.result.history;
    for (std::size_t i = 1; i < h.size(); ++i) {
      if (h[i].stage != h[i - 1].stage) continue;
      if (h[i].upper > h[i - 1].upper) ++u_rises;
      // the incumbent the master was solved against is the previous record's U
      const double u_master = h[i - 1].upper;
      const bool last = i + 1 == h.size() || h[i + 1].stage != h[i].stage;
      if (!last && std::isfinite(u_master) && h[i].eta > u_master + kBoundTol * std::abs(u_master)) {
        ++eta_above;
        if (where.size() < 120) {
          where += " " + name + "[s" + std::to_string(h[i].stage) + ",k" + std::to_string(h[i].k) + "]";
        }
      }
      if (!last && h[i].eta > h[i].upper + kBoundTol * std::abs(h[i].upper)) ++eta_above_after;
    }
    const Measure m = measure(l.result.design, l.spec.constraint, l.spec.materials);
    infeasible += !(m.feasible && l.result.design.binary());
  }
  std::ostringstream os;
  os << checked << " runs: U rises " << u_rises << ", eta above the master-time U before the last step "
     << eta_above << (where.empty() ? "" : " at" + where) << " (above the updated U: "
     << eta_above_after << "), infeasible finals " << infeasible;
  return {checked > 0 && u_rises == 0 && eta_above == 0 && infeasible == 0, os.str()};
}

Verdict material_order(Runs& runs) {
  const Logged& base = runs.get("cantilever5mat_set1", five(1));
  const Logged& perm = runs.get("cantilever5mat_permuted", five_permuted());
  const DesignField& a = base.result.design;
  const DesignField& b = perm.result.design;
  int same = 0;
  for (int e = 0; e < a.n_elements(); ++e) {
    const int pb = b.material_index(e);
    same += a.material_index(e) == (pb > 0 ? kOrder[pb - 1] + 1 : 0);
  }
  const double agree = double(same) / a.n_elements();
  const double df = std::abs(perm.result.objective - base.result.objective) /
                    std::abs(base.result.objective);
  return {base.result.ok && perm.result.ok && agree >= kOrderAgreement && df <= kOrderObjective,
          "layout agreement " + num("%.1f", 100 * agree) + "% (need >= 90%), f " +
              num("%.5g", base.result.objective) + " vs " + num("%.5g", perm.result.objective) +
              " (" + num("%.2f", 100 * df) + "%, need <= 3%)"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::vector<int> only, expect_red;
  std::string out = "acceptance_out";
  bool verbose = false;
  app.add_option("--only", only, "criteria to run (default all)");
  app.add_option("--expect-red", expect_red, "criteria known to fail; they do not set the exit status");
  app.add_option("--out", out, "directory for run artifacts (empty: none)");
  app.add_flag("-v,--verbose", verbose, "log optimizer progress");
  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(verbose ? spdlog::level::info : spdlog::level::warn);

  Runs runs(out);
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"MILP matches exhaustive enumeration", oracle_equivalence},
      {"sensitivities match central differences", gradient_check},
      {"trust rows are scaled Hamming distances", trust_identities},
      {"relaxation schedule tables", schedule_tables},
      {"MBB 240x80", [&] { return regression(runs, "mbb", preset("mbb"), kMbbRef, kMbbFem); }},
      {"cantilever 240x120",
       [&] { return regression(runs, "cantilever", preset("cantilever"), kCantileverRef, kCantileverFem); }},
      {"compliant mechanism 200x100", [&] { return mechanism(runs); }},
      {"two-material MBB 120x60",
       [&] { return regression(runs, "mbb2mat", preset("mbb2mat"), kTwoMatRef, kTwoMatFem); }},
      {"five-material cantilever 120x80", [&] { return five_material(runs); }},
      {"bound behaviour on every logged run", [&] { return bounds(runs); }},
      {"material-order invariance", [&] { return material_order(runs); }},
  };

  // criterion 10 inspects whatever runs exist, so it goes last
  std::vector<int> order;
  for (int i = 1; i <= static_cast<int>(criteria.size()); ++i) {
    if (i != 10) order.push_back(i);
  }
  order.push_back(10);

  int unexpected = 0;
  for (int id : order) {
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[id - 1].second();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    const bool red_ok = std::find(expect_red.begin(), expect_red.end(), id) != expect_red.end();
    std::cout << (v.pass ? "PASS" : "FAIL") << "  " << id << "  " << criteria[id - 1].first << ": "
              << v.detail << " [" << num("%.1f", elapsed(t0)) << " s]";
    if (!v.pass && red_ok) std::cout << " (expected red)";
    if (v.pass && red_ok) std::cout << " (listed as expected red, passed)";
    std::cout << std::endl;
    unexpected += !v.pass && !red_ok;
  }
  return unexpected == 0 ? 0 : 1;
}
