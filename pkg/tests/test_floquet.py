import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings
from hypothesis import strategies as st

from floqmap.model import KHZ, MHZ, DriveSpec, SystemSpec, ModeSpec
from floqmap.floquet import (
    BracketError,
    CollisionRecord,
    DriveTemplate,
    FloquetResult,
    FloquetSolver,
    collision_angle,
    dynamic_zz,
    find_anticrossing,
    floquet_spectrum,
    fold,
    fold_distance,
    golden_section,
    match_quasienergies,
    max_collision_angle_landscape,
    mixing_angle,
    one_period_propagator,
    propagators,
    resonant_gap,
    sambe_spectrum,
    theta_map,
    unitarity_error,
)
from floqmap.statics import static_zz

TWO_G_N1 = 5.818649368420834 * MHZ  # 2 J J_1(1.84), mpmath


@pytest.fixture(scope="module")
def solver(qq):
    return FloquetSolver(qq, "Q1")


@settings(max_examples=100, deadline=None)
@given(st.floats(-1e4, 1e4), st.floats(0.1, 100), st.integers(-50, 50))
def test_fold_range_and_periodicity(e, fp, k):
    f = fold(e, fp)
    assert -fp / 2 - 1e-9 <= f < fp / 2 + 1e-9
    assert fold_distance(e, e + k * fp, fp) < 1e-9 * max(1.0, abs(e) + abs(k * fp))


def test_template_validation():
    with pytest.raises(ValueError):
        DriveTemplate("Q1")
    with pytest.raises(ValueError):
        DriveTemplate("Q1", eps=1.0, eps_over_fp=1.0)
    d = DriveTemplate("Q1", eps_over_fp=2.0, phase=0.1).at(3.0)
    assert (d.amplitude, d.frequency, d.phase) == (6.0, 3.0, 0.1)


def test_undriven_propagator_matches_expm(solver):
    d = DriveSpec("Q1", 0.0, 150 * MHZ)
    U = one_period_propagator(solver.H0, solver.A, d)
    ref = sla.expm(-1j * solver.H0 * d.period)
    assert np.max(np.abs(U - ref)) < 1e-8
    res = floquet_spectrum(U, d.frequency, solver.spectrum)
    for lab in ("00", "01", "10", "11", "02"):
        assert fold_distance(res.quasienergy(lab), solver.spectrum.energy(lab), d.frequency) < 1e-6 * d.frequency


def test_unitarity_and_sambe_agreement(solver):
    d = DriveSpec("Q1", 276 * MHZ, 150 * MHZ)
    U = one_period_propagator(solver.H0, solver.A, d)
    assert unitarity_error(U) < 1e-9
    res = floquet_spectrum(U, d.frequency)
    q = sambe_spectrum(solver.H0, solver.A, d, 20)
    assert match_quasienergies(q, res.quasienergies, d.frequency) < 1e-6 * d.frequency


def test_batched_equals_single(solver):
    drives = [DriveSpec("Q1", 1.84 * f, f) for f in np.array([140.0, 150.0, 163.0]) * MHZ]
    Ub = propagators(solver.H0, solver.A, drives)
    for d, U in zip(drives, Ub):
        assert np.max(np.abs(U - one_period_propagator(solver.H0, solver.A, d))) < 1e-8


def test_solver_rejects_other_target(solver):
    from floqmap.model import ModelError

    with pytest.raises(ModelError):
        solver.propagators([DriveSpec("Q2", 1.0, 1.0)])


def test_resonant_gap_first_sideband(solver):
    tpl = DriveTemplate("Q1", eps_over_fp=1.84)
    rec = resonant_gap(solver, tpl, ("01", "10"), 150.3 * MHZ, 1 * MHZ)
    assert rec.gap == pytest.approx(TWO_G_N1, rel=0.01)
    assert rec.fp == pytest.approx(150.07 * MHZ, abs=50 * KHZ)
    assert rec.angle == pytest.approx(np.pi / 2)


def test_find_anticrossing_agrees_with_resonant_gap(solver):
    tpl = DriveTemplate("Q1", eps_over_fp=1.84)
    rec = find_anticrossing(solver, tpl, ("01", "10"), (148 * MHZ, 152 * MHZ), n_coarse=9)
    fast = resonant_gap(solver, tpl, ("01", "10"), 150 * MHZ, 1 * MHZ)
    assert rec.gap == pytest.approx(fast.gap, abs=5 * KHZ)
    assert rec.fp == pytest.approx(fast.fp, abs=10 * KHZ)
    with pytest.raises(BracketError):
        find_anticrossing(solver, tpl, ("01", "10"), (152 * MHZ, 156 * MHZ), n_coarse=5)


def test_collision_angle():
    assert collision_angle(1.0, 0.0) == pytest.approx(np.pi / 2)
    assert collision_angle(0.2, 1.0) == pytest.approx(np.arctan(0.2))
    with pytest.raises(ValueError):
        collision_angle(0.0, 0.0)
    rec = CollisionRecord(((0, 1), (1, 0)), 2.0, 0.0, np.pi / 2, 1.0)
    assert rec.angle_at(2.0) == pytest.approx(np.pi / 2)
    assert rec.angle_at(np.sqrt(8.0)) == pytest.approx(np.pi / 4)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.001, np.pi / 2 - 1e-3))
def test_mixing_angle_two_level(theta):
    """Rotated two-level modes reproduce the angle they were built with."""
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    modes = np.array([[c, -s], [s, c]], complex)
    res = FloquetResult(np.array([0.0, 1.0]), modes, 10.0)
    va, vb = np.array([1, 0], complex), np.array([0, 1], complex)
    assert mixing_angle(res, va, vb) == pytest.approx(theta, abs=1e-9)


def test_golden_section():
    x, fx = golden_section(lambda x: (x - 0.3) ** 2 + 1, 0, 1, 1e-8)
    assert x == pytest.approx(0.3, abs=1e-7)
    assert fx == pytest.approx(1.0)


def test_dynamic_zz_zero_drive_matches_static(qq, solver):
    z = dynamic_zz(solver, DriveSpec("Q1", 0.0, 150 * MHZ))
    assert z == pytest.approx(static_zz(qq), abs=1 * KHZ)
    z, amps, path = dynamic_zz(solver, DriveSpec("Q1", 100 * MHZ, 300 * MHZ), n_ramp=4, return_path=True)
    assert len(amps) == len(path) == 5
    assert path[-1] == z


def test_landscape_peaks_on_resonance(solver):
    tpl = DriveTemplate("Q1", eps_over_fp=1.84)
    grid = np.array([130.0, 150.07, 175.0]) * MHZ
    land = max_collision_angle_landscape(solver, tpl, grid, [("01", "10"), ("11", "02")])
    assert land.theta.shape == (3, 2)
    assert land.max_theta[1] > 1.4
    assert land.argmax[1] == ((0, 1), (1, 0))
    assert land.theta[0, 0] < 0.5 * land.theta[1, 0] and land.theta[2, 0] < 0.5 * land.theta[1, 0]
    skip = max_collision_angle_landscape(solver, tpl, grid[:1], [("01", "10"), ("11", "02")], exclude=[("10", "01")])
    assert skip.pairs == (((1, 1), (0, 2)),)
    with pytest.raises(ValueError):
        theta_map(solver, [], [], reference="lab")


def test_bare_two_level_crossing_gap():
    """A single driven mode coupled to a static one: the n = 1 gap is 2 J J_1(x)."""
    from floqmap.model import CouplingSpec, GHZ
    from floqmap.sidebands import bessel_j

    s = SystemSpec(
        (ModeSpec("A", 5.0 * GHZ, -0.2 * GHZ, 2, tunable=True), ModeSpec("B", 5.1 * GHZ, -0.2 * GHZ, 2)),
        (CouplingSpec(("A", "B"), 2 * MHZ),),
    )
    sol = FloquetSolver(s, "A")
    tpl = DriveTemplate("A", eps_over_fp=1.2)
    rec = resonant_gap(sol, tpl, ("01", "10"), 100 * MHZ, 0.5 * MHZ, reference="bare")
    assert rec.gap == pytest.approx(2 * 2 * MHZ * bessel_j(1, 1.2), rel=0.01)
