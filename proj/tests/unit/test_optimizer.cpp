#include <doctest.h>

#include <cmath>
#include <sstream>

#include "dvto/optimizer.hpp"

using namespace dvto;

namespace {

CutPool pool_with_values(std::initializer_list<double> values, double radius = 0.2) {
  CutPool pool;
  int j = 0;
  for (double v : values) pool.add(make_cut(j++, DesignField(2, 1), v, {0.0, 0.0}, radius));
  return pool;
}

struct Rig {
  ProblemSpec spec;
  FemModel model;
  ConicFilter filter;
  StateSolver solver;
  StageContext ctx;

  explicit Rig(ProblemSpec s)
      : spec(std::move(s)),
        model(make_model(spec)),
        filter(spec.nx, spec.ny, spec.filter_radius),
        solver(model),
        ctx{spec, model, filter, solver, {}, {}} {}
};

ProblemSpec small(const char* preset, int nx, int ny) {
  ProblemSpec s = make_preset(preset);
  s.nx = nx, s.ny = ny;
  s.filter_radius = 1.5;
  return s;
}

}  // namespace

TEST_CASE("merit: worked examples") {
  CutPool one = pool_with_values({100.0});
  CHECK(merit(one, {0}, 90.0, 90.0) == doctest::Approx(1.0));
  CHECK(merit(one, {0}, 105.0, 90.0) == doctest::Approx(-0.5));

  CutPool two = pool_with_values({100.0, 96.0});
  CHECK(merit(two, {0, 1}, 94.0, 90.0) == doctest::Approx(1.0 / 3));
  CHECK(merit(two, {0}, 94.0, 90.0) == doctest::Approx(0.6));
  CHECK_THROWS(merit(two, {}, 94.0, 90.0));
}

TEST_CASE("merit: exact prediction is classified by the achieved change") {
  CutPool pool = pool_with_values({50.0});
  CHECK(merit(pool, {0}, 49.0, 50.0) == 1.0);
  CHECK(merit(pool, {0}, 50.0, 50.0) == 1.0);
  CHECK(merit(pool, {0}, 51.0, 50.0) == -1.0);
}

TEST_CASE("radius update: worked examples") {
  RadiusState s;
  CHECK(update_radius(s, 1.2, 0.2) == doctest::Approx(0.3));
  CHECK(update_radius(s, -0.5, 0.004) == doctest::Approx(0.002));
  CHECK(update_radius(s, 0.5, 1e-3) == doctest::Approx(1e-3));
  CHECK(update_radius(s, 1.0, 0.5) == doctest::Approx(0.6));  // capped
  CHECK(update_radius(s, 0.0, 0.2) == doctest::Approx(0.14));
  CHECK(update_radius(s, -0.1, 1.5e-3) == doctest::Approx(1e-3));
}

TEST_CASE("radius update stays within its bounds") {
  RadiusState s;
  for (double omega : {-3.0, -0.2, 0.0, 0.3, 0.99, 1.0, 4.0}) {
    for (double d : {1e-3, 0.01, 0.2, 0.6}) {
      const double r = update_radius(s, omega, d);
      CHECK(r >= s.d_min);
      CHECK(r <= s.d_max);
    }
  }
}

TEST_CASE("stop test: worked examples") {
  CHECK(should_stop(99.6, 100.0, 5e-3));
  CHECK_FALSE(should_stop(99.0, 100.0, 5e-3));
  CHECK(should_stop(101.0, 100.0, 5e-3, true));
  CHECK_FALSE(should_stop(101.0, 100.0, 5e-3, false));
  CHECK_FALSE(should_stop(1.0, INFINITY, 5e-3, true));
  // negative objectives use |U|
  CHECK(should_stop(-0.9240, -0.9226, 5e-3));
  CHECK_FALSE(should_stop(-1.0, -0.9226, 5e-3));
  // absolute gap near U = 0
  CHECK(should_stop(1e-3, 0.0, 5e-3));
}

TEST_CASE("all-solid start with no volume limit stays solid") {
  ProblemSpec s = small("cantilever", 8, 4);
  s.constraint.target = 1.0;
  Rig rig(s);
  DesignField solid(s.n_elements(), 1, 1.0);
  solid.mark_binary();
  const StageResult r = run_stage(rig.ctx, solid, {1, 1e-9, 1.0});
  CHECK(r.converged);
  CHECK_FALSE(r.failed);
  CHECK(r.history.size() <= 3u);  // k = 0 plus at most two master iterations
  REQUIRE(std::isfinite(r.upper));
  for (double v : r.best.values()) CHECK(v == 1.0);
}

TEST_CASE("stage invariants on small problems") {
  for (const char* preset : {"mbb", "cantilever", "mechanism"}) {
    CAPTURE(preset);
    ProblemSpec s = small(preset, 16, 8);
    Rig rig(s);
    const DesignField start = initial_design(s);
    int fem = 0;
    rig.ctx.on_design = [&](int, const DesignField&) { ++fem; };
    const StageResult r = run_stage(rig.ctx, start, {1, 1e-2, s.constraint.target});
    CHECK_FALSE(r.failed);
    REQUIRE(std::isfinite(r.upper));
    CHECK(fem == r.fem_solves);
    CHECK(r.history.front().k == 0);
    CHECK(std::isnan(r.history.front().eta));
    for (std::size_t i = 1; i < r.history.size(); ++i) {
      CHECK(r.history[i].upper <= r.history[i - 1].upper);
      CHECK(r.history[i].d >= s.d_min - 1e-15);
      CHECK(r.history[i].d <= s.d_max + 1e-15);
    }
    const Measure m = measure(r.best, {s.constraint.kind, s.constraint.target, 1}, s.materials);
    CHECK(m.feasible);
    CHECK(r.best.binary());
  }
}

TEST_CASE("fixed radius keeps d at its initial value") {
  ProblemSpec s = small("mbb", 16, 8);
  s.radius_mode = RadiusMode::Fixed;
  s.d0 = 0.1;
  Rig rig(s);
  const StageResult r = run_stage(rig.ctx, initial_design(s), {1, 1e-2, 0.4});
  for (const auto& rec : r.history) CHECK(rec.d == 0.1);
}

TEST_CASE("history csv") {
  IterationRecord a;
  a.stage = 1, a.k = 0, a.f = 12.5, a.eta = NAN, a.upper = INFINITY, a.d = 0.4, a.omega = NAN;
  a.measure = 0.4, a.e0 = 0.01, a.target = 0.4;
  IterationRecord b = a;
  b.k = 1, b.eta = 11.0, b.upper = 12.0, b.omega = 0.5, b.subproblems = 3, b.active = {0, 2};
  std::ostringstream os;
  write_history_csv(os, {a, b});
  std::istringstream in(os.str());
  std::string header, row0, row1;
  std::getline(in, header);
  std::getline(in, row0);
  std::getline(in, row1);
  CHECK(header == "stage,k,f,eta,U,d,omega,n_subproblems,active_set,measure,E0,target");
  CHECK(row0 == "1,0,12.5,,inf,0.4,,0,,0.4,0.01,0.4");
  CHECK(row1 == "1,1,12.5,11,12,0.4,0.5,3,0;2,0.4,0.01,0.4");
}
