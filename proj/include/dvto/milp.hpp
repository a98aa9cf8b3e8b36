#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace dvto {

/// sum_k coef[k] * x[index[k]] + eta_coef * eta <= bound
struct SparseRow {
  std::vector<int> index;
  std::vector<double> coef;
  double eta_coef = 0.0;
  double bound = 0.0;
  std::string name;
};

/// min cost . x + constant (+ eta) over binary x and, when has_eta, one free continuous eta.
///
/// groups are at-most-one sets; each variable appears in at most one group. fixing, when
/// non-empty, holds -1 (free), 0 or 1 per variable.
struct BinaryProgram {
  int n = 0;
  std::vector<double> cost;
  double constant = 0.0;
  bool has_eta = false;
  std::vector<SparseRow> rows;
  std::vector<std::vector<int>> groups;
  std::vector<std::int8_t> fixing;

  /// Structural problems (bad indices, overlapping groups, eta without a lower-bounding row).
  std::vector<std::string> check() const;
};

enum class MilpStatus { Optimal, Infeasible, NodeLimit };

std::string_view to_string(MilpStatus s);

struct MilpOptions {
  long node_limit = 20000;
  double feasibility_tol = 1e-9;
  double integrality_tol = 1e-6;
  double gap_tol = 1e-9;  // relative
  int cut_rounds = 4;     // root rounds of {0, 1/2} cuts over integer rows
  bool record_bounds = false;
};

struct MilpResult {
  MilpStatus status = MilpStatus::Infeasible;
  double objective = 0.0;
  std::vector<std::uint8_t> x;
  double eta = 0.0;
  long nodes = 0;
  long lp_iterations = 0;
  int cuts = 0;
  double best_bound = 0.0;
  std::vector<double> bound_trace;  // global lower bound after each node, if recorded

  bool has_solution() const { return !x.empty() || status == MilpStatus::Optimal; }
};

struct LpResult {
  bool feasible = false;
  double value = 0.0;
  std::vector<double> x;
  double eta = 0.0;
  std::vector<int> fractional;
  long iterations = 0;
};

/// Continuous relaxation with every x in [0, 1] and group sums <= 1. local_fixing overrides the
/// program's own fixing when non-empty.
LpResult solve_lp_relaxation(const BinaryProgram& program,
                             const std::vector<std::int8_t>& local_fixing = {});

/// Best-first branch-and-bound on the LP relaxation.
MilpResult solve(const BinaryProgram& program, const MilpOptions& options = {});

/// Exhaustive enumeration; n <= 24.
MilpResult brute_force(const BinaryProgram& program);

struct Evaluation {
  bool feasible = false;
  double objective = 0.0;
  double eta = 0.0;
  double max_violation = 0.0;
};

/// Objective of a binary assignment with eta set to its smallest feasible value.
Evaluation evaluate(const BinaryProgram& program, const std::vector<std::uint8_t>& x,
                    double tol = 1e-9);

/// Fixed-format MPS text (binaries as BV bounds, eta as a free column, groups as L rows).
void write_mps(const BinaryProgram& program, std::ostream& out, const std::string& name = "MASTER");

/// Solver engine behind the master problem; the built-in one is the default.
class MilpBackend {
 public:
  virtual ~MilpBackend() = default;
  virtual std::string name() const = 0;
  virtual MilpResult solve(const BinaryProgram& program, const MilpOptions& options) = 0;
};

std::shared_ptr<MilpBackend> builtin_backend();

}  // namespace dvto
