#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "dvto/cuts.hpp"
#include "dvto/fem.hpp"
#include "dvto/master.hpp"
#include "dvto/model.hpp"
#include "dvto/sensitivity.hpp"

namespace dvto {

/// omega = min over active cuts j of (f_j - f_k) / (f_j - eta_k).
///
/// A cut whose predicted reduction is numerically zero counts as +1 when the objective did not
/// rise and -1 otherwise.
double merit(const CutPool& pool, const std::vector<int>& active, double f_k, double eta_k);

/// Gap test |eta - U| / |U| < eps (absolute below |U| = 1e-12), or eta > U when crossing is on.
/// upper is the incumbent the master was solved against; never stops while it is infinite.
bool should_stop(double eta, double upper, double eps, bool crossing = false);

struct RadiusState {
  double d = 0.4;
  double theta1 = 0.7;
  double theta2 = 1.5;
  double d_min = 1e-3;
  double d_max = 0.6;
};

/// Radius for the newest cut given the merit and the smallest radius among the active cuts.
double update_radius(const RadiusState& state, double omega, double d_star);

struct IterationRecord {
  int stage = 0;
  int k = 0;
  double f = 0.0;
  double eta = 0.0;     // NaN at k = 0
  double upper = 0.0;   // +inf until the first master iterate is evaluated
  double d = 0.0;       // radius of the cut created at this iteration
  double omega = 0.0;   // NaN when not evaluated
  int subproblems = 0;
  std::vector<int> active;
  double fem_seconds = 0.0;
  double master_seconds = 0.0;
  double measure = 0.0;
  double e0 = 0.0;
  double target = 0.0;
  bool stop = false;
  bool budget_hit = false;
  bool node_limit_hit = false;
};

struct StageParams {
  int stage = 0;
  double e0 = 1e-9;
  double target = 0.4;
};

struct StageResult {
  DesignField best;
  double upper = 0.0;
  std::vector<IterationRecord> history;
  int fem_solves = 0;
  bool converged = false;
  bool cap_hit = false;
  bool stalled = false;  // budget spent without a feasible subproblem; incumbent kept
  bool failed = false;
  std::string failure;
};

using IterationCallback = std::function<void(const IterationRecord&)>;
using DesignCallback = std::function<void(int k, const DesignField&)>;

/// Shared per-run state: mesh, filter and a state solver whose symbolic factorization is reused.
struct StageContext {
  const ProblemSpec& spec;
  const FemModel& model;
  const ConicFilter& filter;
  StateSolver& solver;
  IterationCallback on_iteration;
  DesignCallback on_design;  // sees every evaluated design, iteration 0 included
};

/// One relaxation stage: FEM solve, cut, master, bounds, stop test, radius update.
StageResult run_stage(StageContext& ctx, const DesignField& initial, const StageParams& params);

/// Filtered sensitivities of a solved state.
std::vector<double> filtered_sensitivities(const StageContext& ctx, const DesignField& design,
                                           const StateSolution& state,
                                           const MaterialSet& materials);

/// CSV with columns stage,k,f,eta,U,d,omega,n_subproblems,active_set,measure,E0,target.
void write_history_csv(std::ostream& out, const std::vector<IterationRecord>& history);

}  // namespace dvto
