#pragma once

#include <string>
#include <vector>

#include "dvto/optimizer.hpp"

namespace dvto {

struct Stage {
  double e0 = 1e-9;
  double target = 0.4;
};

struct StageSchedule {
  SchemeKind scheme = SchemeKind::E0Only;
  std::vector<Stage> stages;
};

/// P_l = P0 exp(-((l - 1)/(N_P - 1)) log(P0 / Pd)), l = 1..N_P; endpoints are exact.
std::vector<double> exponential_targets(double p0, double pd, int n_stages);

/// N_P exponential stages at the relaxed modulus followed by one stage at the final modulus and Pd.
StageSchedule schedule(double p0, double pd, int n_stages, double e0_relaxed = 1e-2,
                       double e0_final = 1e-9);

/// Stages implied by the spec's scheme (the spec's materials.e_min is the final modulus).
StageSchedule make_schedule(const ProblemSpec& spec);

struct RunResult {
  DesignField design;
  double objective = 0.0;
  int fem_solves = 0;
  int iterations = 0;
  std::vector<IterationRecord> history;
  std::vector<StageResult> stages;
  bool ok = true;
  bool cap_hit = false;
  bool stalled = false;
  std::string failure;
  double seconds = 0.0;
};

/// Chains the stages: each stage's best design seeds the next, cuts and radius reset per stage.
RunResult run(const ProblemSpec& spec, IterationCallback on_iteration = {});

}  // namespace dvto
