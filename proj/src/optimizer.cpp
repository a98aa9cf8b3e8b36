#include "dvto/optimizer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

#include <spdlog/spdlog.h>

namespace dvto {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

bool should_stop(double eta, double upper, double eps, bool crossing) {
  if (!std::isfinite(upper)) return false;
  if (crossing && eta > upper) return true;
  const double denom = std::abs(upper);
  if (denom < 1e-12) return std::abs(eta - upper) < eps;
  return std::abs(eta - upper) / denom < eps;
}

double merit(const CutPool& pool, const std::vector<int>& active, double f_k, double eta_k) {
  if (active.empty()) throw std::invalid_argument("merit needs a non-empty active set");
  double omega = kInf;
  for (int j : active) {
    const double fj = pool[j].value;
    const double predicted = fj - eta_k;
    double w;
    if (std::abs(predicted) <= 1e-12 * std::max(1.0, std::abs(fj))) {
      w = fj - f_k >= 0.0 ? 1.0 : -1.0;
    } else {
      w = (fj - f_k) / predicted;
    }
    omega = std::min(omega, w);
  }
  return omega;
}

double update_radius(const RadiusState& s, double omega, double d_star) {
  if (omega >= 1.0) return std::min(s.theta2 * d_star, s.d_max);
  if (omega >= 0.0) return std::max(s.theta1 * d_star, s.d_min);
  return std::max(0.5 * d_star, s.d_min);
}

std::vector<double> filtered_sensitivities(const StageContext& ctx, const DesignField& design,
                                           const StateSolution& state,
                                           const MaterialSet& materials) {
  auto raw = raw_sensitivities(ctx.model, design, state.u, state.mu, materials);
  return ctx.filter.apply(raw, materials.count());
}

StageResult run_stage(StageContext& ctx, const DesignField& initial, const StageParams& params) {
  const ProblemSpec& spec = ctx.spec;
  MaterialSet materials = spec.materials;
  materials.e_min = params.e0;
  ConstraintSpec constraint = spec.constraint;
  constraint.target = params.target;

  const bool adaptive = spec.radius_mode == RadiusMode::Adaptive;
  RadiusState radius{spec.d0, spec.theta1, spec.theta2, spec.d_min, spec.d_max};

  MasterOptions mopt;
  mopt.budget = spec.master_budget;
  mopt.max_selection_size = spec.max_selection_size;
  mopt.milp.node_limit = spec.milp_node_limit;
  mopt.milp.gap_tol = spec.milp_gap;

  StageResult out;
  out.best = initial;
  out.upper = kInf;
  CutPool pool;

  auto analyze = [&](const DesignField& rho, IterationRecord& rec) {
    const auto t0 = std::chrono::steady_clock::now();
    StateSolution st = ctx.solver.analyze(rho, materials);
    ++out.fem_solves;
    rec.fem_seconds = seconds_since(t0);
    rec.f = st.objective;
    rec.measure = measure(rho, constraint, materials).value;
    if (ctx.on_design) ctx.on_design(rec.k, rho);
    return st;
  };
  auto emit = [&](IterationRecord& rec) {
    rec.stage = params.stage;
    rec.e0 = params.e0;
    rec.target = params.target;
    out.history.push_back(rec);
    if (ctx.on_iteration) ctx.on_iteration(rec);
  };

  IterationRecord rec0;
  rec0.k = 0;
  rec0.eta = kNaN;
  rec0.omega = kNaN;
  rec0.d = spec.d0;
  StateSolution state = analyze(initial, rec0);
  pool.add(make_cut(0, initial, state.objective,
                    filtered_sensitivities(ctx, initial, state, materials), spec.d0,
                    params.stage));
  rec0.upper = out.upper;
  emit(rec0);

  double last_d = spec.d0;
  for (int k = 1; k <= spec.max_iterations; ++k) {
    IterationRecord rec;
    rec.k = k;
    const auto tm = std::chrono::steady_clock::now();
    MasterResult mr = solve_master(pool, constraint, materials, mopt);
    rec.master_seconds = seconds_since(tm);
    rec.subproblems = mr.subproblems;
    rec.budget_hit = mr.budget_hit;
    rec.node_limit_hit = mr.node_limit_hit;
    if (mr.exhausted) {
      spdlog::info("stage {}: no unexplored cut selection left at iteration {}", params.stage, k);
      out.converged = true;
      return out;
    }
    if (!mr.feasible && mr.budget_hit && std::isfinite(out.upper)) {
      spdlog::warn("stage {}: no feasible master subproblem within the budget at iteration {}; "
                   "keeping the incumbent", params.stage, k);
      out.stalled = true;
      return out;
    }
    if (!mr.feasible) {
      out.failed = true;
      out.failure = "master problem infeasible at stage " + std::to_string(params.stage) +
                    ", iteration " + std::to_string(k);
      return out;
    }
    pool.exclude(mr.active);
    rec.active = mr.active;
    rec.eta = mr.eta;

    int seen = -1;
    for (int j = 0; j < pool.size() && seen < 0; ++j) {
      if (pool[j].anchor == mr.design) seen = j;
    }
    // A repeated design carries no new information: reuse its value and add no cut.
    if (seen >= 0) {
      rec.f = pool[seen].value;
      rec.measure = measure(mr.design, constraint, materials).value;
      const double upper_before = out.upper;
      if (rec.f < out.upper) {
        out.upper = rec.f;
        out.best = mr.design;
      }
      rec.upper = out.upper;
      rec.omega = kNaN;
      rec.d = last_d;
      if (should_stop(mr.eta, upper_before, spec.tolerance, spec.bound_crossing)) {
        rec.stop = true;
        out.converged = true;
        emit(rec);
        return out;
      }
      emit(rec);
      continue;
    }

    state = analyze(mr.design, rec);
    const double upper_before = out.upper;
    if (rec.f < out.upper) {
      out.upper = rec.f;
      out.best = mr.design;
    }
    rec.upper = out.upper;

    if (should_stop(mr.eta, upper_before, spec.tolerance, spec.bound_crossing)) {
      rec.stop = true;
      rec.omega = kNaN;
      rec.d = last_d;
      out.converged = true;
      emit(rec);
      return out;
    }

    double d_new = spec.d0;
    rec.omega = merit(pool, mr.active, rec.f, mr.eta);
    if (adaptive) {
      double d_star = kInf;
      for (int j : mr.active) d_star = std::min(d_star, pool[j].radius);
      d_new = update_radius(radius, rec.omega, d_star);
    }
    rec.d = d_new;
    last_d = d_new;
    pool.add(make_cut(k, mr.design, rec.f,
                      filtered_sensitivities(ctx, mr.design, state, materials), d_new,
                      params.stage));
    emit(rec);
  }
  out.cap_hit = true;
  spdlog::warn("stage {} reached the iteration cap of {}", params.stage, spec.max_iterations);
  return out;
}

void write_history_csv(std::ostream& out, const std::vector<IterationRecord>& history) {
  out << "stage,k,f,eta,U,d,omega,n_subproblems,active_set,measure,E0,target\n";
  out.precision(12);
  auto num = [&](double v) -> std::ostream& {
    if (std::isnan(v)) return out << "";
    if (std::isinf(v)) return out << (v > 0 ? "inf" : "-inf");
    return out << v;
  };
  for (const auto& r : history) {
    out << r.stage << ',' << r.k << ',';
    num(r.f) << ',';
    num(r.eta) << ',';
    num(r.upper) << ',';
    num(r.d) << ',';
    num(r.omega) << ',' << r.subproblems << ',' << format_selection(r.active) << ',';
    num(r.measure) << ',';
    num(r.e0) << ',';
    num(r.target) << '\n';
  }
}

}  // namespace dvto
