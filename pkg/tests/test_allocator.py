import collections
import math
import re

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from floqmap.model import GHZ, KHZ, MHZ, qubit_qubit_system
from floqmap.allocator import (
    AllocationError,
    Interval,
    Unsatisfiable,
    check,
    encode_constraints,
    export_smt,
    floquet_spot_check,
    four_qubit_problem,
    problem_from_dict,
    qcq_problem,
    refine_with_dressed,
    solve,
    two_qubit_problem,
)
from floqmap.statics import sw_effective_params


@pytest.fixture(scope="module")
def two_qubit():
    p = two_qubit_problem()
    return p, solve(p)


def kinds(problem):
    return collections.Counter(c.kind for c in problem.constraints)


finite = st.floats(-100, 100, allow_nan=False)


@settings(max_examples=200, deadline=None)
@given(finite, finite, finite, finite, st.floats(0, 1), st.floats(0, 1), st.sampled_from("+-*/"))
def test_interval_encloses_point_values(a, b, c, d, s, t, op):
    A, B = Interval(min(a, b), max(a, b)), Interval(min(c, d), max(c, d))
    x = A.lo + s * (A.hi - A.lo)
    y = B.lo + t * (B.hi - B.lo)
    if op == "/" and B.lo <= 0 <= B.hi:
        R = A / B
        assert R.lo == -math.inf and R.hi == math.inf
        return
    R = {"+": A + B, "-": A - B, "*": A * B, "/": A / B}[op]
    v = {"+": x + y, "-": x - y, "*": x * y, "/": x / y if y else 0.0}[op]
    tol = 1e-9 * (1 + abs(v))
    assert R.lo - tol <= v <= R.hi + tol
    assert abs(A).lo - tol <= abs(x) <= abs(A).hi + tol


def test_encoding_structure():
    p = two_qubit_problem()
    k = kinds(p)
    assert k["resonance-equality"] == 1 and k["parametric-limit"] == 1
    assert k["box-bound"] == 3  # two frequency boxes and the amplitude cap
    assert k["detuning-margin"] > 0
    p4 = four_qubit_problem()
    assert len(p4.targets) == 4
    assert kinds(p4)["parametric-limit"] == 4
    fams = {c.meta.get("row") for c in p4.constraints
            if c.kind == "detuning-margin" and c.meta.get("target") == p4.targets[0].key}
    assert len(fams) == 4  # the four single-excitation links of the ring


def test_empty_target_list_is_trivial():
    p = encode_constraints(qubit_qubit_system(), "qubit", [])
    assert all(c.kind == "box-bound" for c in p.constraints)
    s = solve(p)
    assert s.satisfiable and s.report == ()


def test_encoding_errors():
    qq = qubit_qubit_system()
    with pytest.raises(AllocationError):
        encode_constraints(qq, "laser", [])
    with pytest.raises(AllocationError):
        encode_constraints(qq, "coupler", [])
    with pytest.raises(AllocationError):
        encode_constraints(qq, "qubit", [], margin=1.0)
    with pytest.raises(AllocationError):
        encode_constraints(qq, "qubit", [], objective="fastest")
    with pytest.raises(AllocationError):
        problem_from_dict({"topology": "torus"})


def test_solve_is_sound_and_deterministic(two_qubit):
    p, s = two_qubit
    report, worst = check(p, s.assignment)
    assert all(r.passed for r in report)
    assert worst == pytest.approx(s.worst_margin)
    assert solve(p).assignment == s.assignment
    assert s.stage == "bare" and not s.violated()


def test_first_feasible_objective_is_sound():
    p = two_qubit_problem(objective="none")
    s = solve(p)
    assert all(r.passed for r in check(p, s.assignment)[0])


def test_resonance_violation_detected(two_qubit):
    p, s = two_qubit
    bad = dict(s.assignment)
    bad["fp:01<->10"] += 2 * KHZ
    report, worst = check(p, bad)
    res = next(r for r in report if r.kind == "resonance-equality")
    assert not res.passed and worst <= 0


def test_relaxing_margin_is_monotone(two_qubit):
    p, s = two_qubit
    passing = []
    for m in (40, 20, 10, 5, 1.01):
        rep, _ = check(p.with_margin(m), s.assignment)
        passing.append({r.name for r in rep if r.passed})
    for tight, loose in zip(passing, passing[1:]):
        assert tight <= loose


def test_raising_margin_cannot_create_feasibility():
    p = two_qubit_problem(margin=400.0, objective="none")
    with pytest.raises(Unsatisfiable):
        solve(p, max_nodes=2000)


def test_contradictory_boxes_unsatisfiable():
    boxes = {"Q1.freq": (5.0 * GHZ, 5.0 * GHZ + 0.5 * MHZ), "Q2.freq": (5.0 * GHZ, 5.0 * GHZ + 0.5 * MHZ)}
    p = two_qubit_problem(boxes=boxes, objective="none")
    with pytest.raises(Unsatisfiable) as err:
        solve(p)
    assert err.value.violated  # tightest violated rows are reported


def test_refinement_idempotent(two_qubit):
    p, s = two_qubit
    r = refine_with_dressed(p, s, trust_radius=5 * MHZ)
    r2 = refine_with_dressed(p, r, trust_radius=5 * MHZ)
    assert r.stage == "refined" and r.satisfiable
    for k, v in r.assignment.items():
        assert r2.assignment[k] == pytest.approx(v, abs=1.0)


def test_weak_coupling_refinement_negligible():
    p = two_qubit_problem(qubit_qubit_system().scaled_couplings(0.01))
    r = refine_with_dressed(p, solve(p))
    assert all(abs(v) < 1 * KHZ for v in r.fp_shift.values())


def test_coupler_refinement_tracks_lamb_shift():
    p = qcq_problem()
    s = solve(p)
    r = refine_with_dressed(p, s)
    sysm = p.system_at(s.assignment)
    sw = sw_effective_params(sysm)
    lamb = (sw.omega_tilde_1 - sw.omega_tilde_2) - (sysm.modes[0].frequency - sysm.modes[2].frequency)
    shift = next(iter(r.fp_shift.values()))
    # same sign and magnitude as the second-order estimate (higher orders add ~20%)
    assert 0.5 < abs(shift / lamb) < 1.5
    assert 0.1 * MHZ < abs(shift) < 5 * MHZ


def test_reference_coupler_parameters_report():
    p = qcq_problem()
    template = {n: p.template_value(n) for n in p.variables}
    report, worst = check(p, template)
    coupler_rows = [r for r in report if r.kind == "detuning-margin" and "<->" in r.name]
    assert coupler_rows
    for r in report:
        if r.kind == "detuning-margin":
            assert r.passed == (r.ratio >= 1.0)


def test_spot_check_cross_validation(two_qubit):
    """Floquet-measured 2g/Delta of every constrained pair stays below 1.5 / margin."""
    p, s = two_qubit
    r = refine_with_dressed(p, s, trust_radius=5 * MHZ)
    (spot,) = floquet_spot_check(p, r, n_points=3, window=0.0 + 1e-9)
    assert spot.theta.shape[1] == len(spot.pairs) > 0
    centre = spot.theta[len(spot.grid) // 2]
    assert np.nanmax(np.tan(centre)) <= 1.5 / p.margin


def test_smt_export(two_qubit):
    p, _ = two_qubit
    text = export_smt(p)
    assert text.count("(") == text.count(")")
    assert "(set-logic QF_NRA)" in text and "(check-sat)" in text
    assert "(declare-fun Q1_freq () Real)" in text
    names = re.findall(r":named (\S+?)\)", text)
    assert len(names) == len(set(names)) == sum(1 for c in p.constraints if c.kind != "resonance-equality")


def test_problem_from_dict_matches_builder():
    p = problem_from_dict({"topology": "qq", "target": ["01", "10"], "n": 1, "margin": 10})
    q = two_qubit_problem()
    assert [c.name for c in p.constraints] == [c.name for c in q.constraints]
    assert p.objective == q.objective


def test_solution_serialization(two_qubit):
    _, s = two_qubit
    d = s.to_dict()
    assert d["satisfiable"] and d["stage"] == "bare"
    assert set(d["assignment_MHz"]) == set(s.assignment)
