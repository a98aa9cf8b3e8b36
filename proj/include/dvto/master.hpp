#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dvto/cuts.hpp"
#include "dvto/milp.hpp"
#include "dvto/model.hpp"

namespace dvto {

/// A set of active cuts and its ranking key, the largest cached single-cut optimum among them.
struct Selection {
  std::vector<int> cuts;  // sorted
  double key = 0.0;
};

/// Lazily emits multi-cut selections in non-descending key order.
///
/// Cuts are ranked by their single-cut optimum (ties by index). Every selection whose
/// highest-ranked member sits at rank r has key singles[rank r], so the stream walks r upward and,
/// for each r, joins that cut with the non-empty subsets of lower-ranked cuts in order of size.
/// Singletons are never produced.
class SelectionStream {
 public:
  SelectionStream(std::vector<double> singles, const std::set<std::vector<int>>* excluded = nullptr,
                  int max_size = 0);

  std::optional<Selection> next();
  const std::optional<Selection>& peek();

 private:
  bool advance_subset();
  std::optional<Selection> make_current();

  std::vector<double> singles_;
  std::vector<int> order_;
  const std::set<std::vector<int>>* excluded_;
  int max_size_;
  int rank_ = 1;
  std::vector<int> combo_;  // ranks below rank_
  bool started_ = false;
  bool peeked_ = false;
  std::optional<Selection> buffered_;
};

/// Rows of the stage's volume or mass constraint, plus at-most-one groups for n_M > 1.
void add_constraint_rows(BinaryProgram& program, const ConstraintSpec& constraint,
                         const MaterialSet& materials, int n_elements);

/// Master subproblem for a selection. A single cut becomes the objective and eta is dropped.
BinaryProgram build_subproblem(const std::vector<int>& selection, const CutPool& pool,
                               const ConstraintSpec& constraint, const MaterialSet& materials);

struct MasterTraceEntry {
  std::vector<int> cuts;
  double key = 0.0;
  bool feasible = false;
  double value = 0.0;
  MilpStatus status = MilpStatus::Infeasible;
  long nodes = 0;
};

struct MasterOptions {
  int budget = 32;
  int max_selection_size = 0;
  MilpOptions milp;
  std::shared_ptr<MilpBackend> backend;  // null: built-in
};

struct MasterResult {
  bool feasible = false;
  DesignField design;
  double eta = 0.0;
  std::vector<int> active;
  int subproblems = 0;
  bool budget_hit = false;
  bool node_limit_hit = false;
  bool exhausted = false;  // every selection was already excluded; nothing was solved
  std::vector<MasterTraceEntry> trace;
};

/// Solves the single-cut problem of the newest cut (caching its optimum in the pool, skipped when
/// already cached), then walks the selection stream until the best optimum is below the next key
/// or the budget is spent.
MasterResult solve_master(CutPool& pool, const ConstraintSpec& constraint,
                          const MaterialSet& materials, const MasterOptions& options = {});

/// Short text form of a selection, e.g. "0;2;5".
std::string format_selection(const std::vector<int>& cuts);

}  // namespace dvto
