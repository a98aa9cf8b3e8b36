#include "dvto/relaxation.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

namespace dvto {

std::vector<double> exponential_targets(double p0, double pd, int n_stages) {
  if (!(pd > 0.0 && p0 >= pd)) throw std::invalid_argument("schedule needs P0 >= Pd > 0");
  if (n_stages < 2) throw std::invalid_argument("schedule needs at least two stages");
  std::vector<double> out(n_stages);
  const double rate = std::log(p0 / pd);
  for (int l = 1; l <= n_stages; ++l) {
    out[l - 1] = p0 * std::exp(-(static_cast<double>(l - 1) / (n_stages - 1)) * rate);
  }
  out.front() = p0;
  out.back() = pd;
  return out;
}

StageSchedule schedule(double p0, double pd, int n_stages, double e0_relaxed, double e0_final) {
  StageSchedule s;
  s.scheme = SchemeKind::Exponential;
  for (double t : exponential_targets(p0, pd, n_stages)) s.stages.push_back({e0_relaxed, t});
  s.stages.push_back({e0_final, pd});
  return s;
}

StageSchedule make_schedule(const ProblemSpec& spec) {
  const double target = spec.constraint.target;
  const double e0 = spec.materials.e_min;
  switch (spec.scheme) {
    case SchemeKind::E0Only:
      return {SchemeKind::E0Only, {{spec.e0_relaxed, target}, {e0, target}}};
    case SchemeKind::Exponential:
      return schedule(spec.relax_start, target, spec.relax_stages, spec.e0_relaxed, e0);
    case SchemeKind::TargetStep: {
      StageSchedule s;
      s.scheme = SchemeKind::TargetStep;
      for (int l = 0;; ++l) {
        const double t = 1.0 - l * spec.target_step;
        if (t <= target + 1e-12) break;
        s.stages.push_back({e0, t});
      }
      s.stages.push_back({e0, target});
      return s;
    }
  }
  throw std::invalid_argument("unknown scheme");
}

RunResult run(const ProblemSpec& spec, IterationCallback on_iteration) {
  if (auto issues = validate(spec); !issues.empty()) {
    throw std::invalid_argument("invalid problem: " + issues.front());
  }
  const auto t0 = std::chrono::steady_clock::now();
  const FemModel model = make_model(spec);
  const ConicFilter filter(spec.nx, spec.ny, spec.filter_radius);
  StateSolver solver(model);
  StageContext ctx{spec, model, filter, solver, std::move(on_iteration)};

  const StageSchedule plan = make_schedule(spec);
  RunResult res;
  DesignField seed = initial_design(spec);
  bool have_feasible = false;
  for (std::size_t l = 0; l < plan.stages.size(); ++l) {
    StageParams params{static_cast<int>(l) + 1, plan.stages[l].e0, plan.stages[l].target};
    StageResult st = run_stage(ctx, seed, params);
    res.fem_solves += st.fem_solves;
    res.history.insert(res.history.end(), st.history.begin(), st.history.end());
    res.cap_hit = res.cap_hit || st.cap_hit;
    res.stalled = res.stalled || st.stalled;
    const bool failed = st.failed;
    if (std::isfinite(st.upper)) {
      seed = st.best;
      res.design = st.best;
      res.objective = st.upper;
      have_feasible = true;
    }
    res.stages.push_back(std::move(st));
    if (failed) {
      res.ok = false;
      res.failure = res.stages.back().failure;
      break;
    }
  }
  if (!have_feasible) {
    res.ok = false;
    res.design = seed;
    if (res.failure.empty()) res.failure = "no feasible design was produced";
  }
  for (const auto& r : res.history) res.iterations += r.k > 0;
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

}  // namespace dvto
