import math

import numpy as np
import pytest

import dvto


def test_presets_round_trip():
    assert set(dvto.preset_names()) >= {"mbb", "cantilever", "mechanism", "mbb2mat"}
    for name in dvto.preset_names():
        s = dvto.Spec(name)
        assert s.validate() == []
        assert dvto.Spec.from_text(s.to_text()) == s


def test_build_spec_rescales_radius_and_validates():
    s = dvto.build_spec("mbb", "120x40")
    assert (s.nx, s.ny) == (120, 40)
    assert s.filter_radius == pytest.approx(2.0)
    s = dvto.build_spec("mbb", "120x40", overrides={"filter_radius": "3"})
    assert s.filter_radius == 3.0
    with pytest.raises(ValueError):
        dvto.build_spec("mbb", overrides={"theta1": "1.5"})
    with pytest.raises(ValueError):
        dvto.build_spec("mbb", "240")


def test_spec_set_accepts_python_values():
    s = dvto.Spec("cantilever")
    s.set("eps", 1e-7).set("bound_crossing", True).set("nx", 40)
    assert s.tolerance == 1e-7
    assert s.nx == 40
    assert "bound_crossing = true" in s.to_text()


def test_schedule_tables():
    got = dvto.exponential_targets(0.6, 0.3, 8)
    want = [0.600, 0.543, 0.492, 0.446, 0.404, 0.366, 0.331, 0.300]
    assert np.allclose(got, want, atol=5e-4)
    stages = dvto.stage_schedule(dvto.Spec("cantilever5mat"))
    assert len(stages) == 8
    assert stages[-1] == (1e-9, 0.3)


def test_small_run_is_feasible_and_deterministic(tmp_path):
    s = dvto.build_spec("mbb", "24x8")
    a = dvto.run(s)
    b = dvto.run(s)
    assert a.ok
    assert a.objective > 0
    assert a.fem_solves >= 2
    assert np.array_equal(a.design, b.design)
    value, feasible = dvto.measure(s, a.design)
    assert feasible and value <= s.target + 1e-12
    for stage in {h["stage"] for h in a.history}:
        ups = [h["U"] for h in a.history if h["stage"] == stage and math.isfinite(h["U"])]
        assert all(x >= y for x, y in zip(ups, ups[1:]))

    dvto.write_artifacts(tmp_path, s, a)
    csv = np.loadtxt(tmp_path / "design_final.csv", delimiter=",", dtype=int)
    assert csv.shape == (8, 24)
    assert np.array_equal(csv, dvto.material_map(s, a.design))


def test_mechanism_map_is_mirrored():
    s = dvto.build_spec("mechanism", "20x10")
    d = dvto.initial_design(s)
    d[:] = 0.0
    d[0, 0] = 1.0
    m = dvto.material_map(s, d)
    assert m.shape == (20, 20)
    assert np.array_equal(m, m[::-1])
    assert dvto.material_map(s, d, mirror=False).shape == (10, 20)


def test_compliance_sensitivities_match_finite_differences():
    s = dvto.build_spec("cantilever", "4x4", overrides={"e_min": "0.01", "filter_radius": "1"})
    rng = np.random.default_rng(0)
    d = rng.uniform(0.2, 0.9, size=(16, 1))
    out = dvto.analyze(s, d)
    assert np.all(out["raw"] <= 0)
    assert np.allclose(out["filtered"], out["raw"])
    e = 5
    h = 1e-6
    up, dn = d.copy(), d.copy()
    up[e, 0] += h
    dn[e, 0] -= h
    fd = (dvto.analyze(s, up)["objective"] - dvto.analyze(s, dn)["objective"]) / (2 * h)
    grad = out["raw"][e] / ((1 - 0.01) * d[e, 0] + 0.01) * (1 - 0.01)
    assert grad == pytest.approx(fd, rel=1e-4)


def test_milp_matches_brute_force():
    rng = np.random.default_rng(3)
    for _ in range(20):
        n = 10
        cost = rng.normal(size=n).tolist()
        rows = [
            dvto.Row(list(range(n)), rng.uniform(0, 1, size=n).tolist(), 0.4 * n / 2),
            dvto.Row(list(range(n)), rng.normal(size=n).tolist(), 1.0),
        ]
        p = dvto.BinaryProgram(cost, rows, groups=[[0, 1], [2, 3, 4]])
        assert p.check() == []
        a = dvto.solve_milp(p)
        b = dvto.brute_force(p)
        assert a.status == b.status
        if b.status == "optimal":
            assert a.objective == pytest.approx(b.objective, abs=1e-9)


def test_at_most_one_group_picks_the_best_member():
    p = dvto.BinaryProgram([-2.0, -3.0], groups=[[0, 1]])
    r = dvto.solve_milp(p)
    assert list(r.x) == [0, 1]
    assert r.objective == pytest.approx(-3.0)
