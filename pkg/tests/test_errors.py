import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import jv

from floqmap.model import GHZ, MHZ, DriveSpec, qubit_coupler_qubit_system
from floqmap.sidebands import catalog_qcq, catalog_qq, find_entry
from floqmap.errors import (
    BudgetError,
    ResolveError,
    error_vs_resonance_sweep,
    per_harmonic_breakdown,
    population_error,
    rabi_terms,
    solve_amplitude,
)

X = 1.84


def qq_budget(qq, target, **kw):
    cat = catalog_qq(qq, dressed=True)
    fp = abs(find_entry(cat, *target).detuning)
    return population_error(qq, "qubit", target, DriveSpec("Q1", X * fp, fp), catalog=cat, **kw)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.01, 10), st.floats(-500, 500), st.floats(0.1, 10), st.sampled_from(["pi", "half_pi", "2pi"]))
def test_rabi_term_bounded(g, det, gt, pulse):
    p, b = rabi_terms(g * MHZ, det * MHZ, gt * MHZ, pulse)
    assert 0 <= p <= b + 1e-15 <= 1 + 1e-15


def test_rabi_term_resonant_pi_pulse():
    p, b = rabi_terms(1.0, 0.0, 1.0)
    assert b == 1.0 and p == pytest.approx(1.0)
    p, _ = rabi_terms(1.0, 0.0, 1.0, "2pi")
    assert p == pytest.approx(0.0, abs=1e-24)
    with pytest.raises(BudgetError):
        rabi_terms(1.0, 0.0, 0.0)


def test_dominant_channel_recomputed_by_hand(qq, qq_spectrum):
    """The 11-02 group of the 01-10 budget from dressed energies and Bessel values only."""
    b = qq_budget(qq, ("01", "10"))
    fp = b.drive.frequency
    gt = 5 * MHZ * abs(jv(1, X))
    assert b.g_target == pytest.approx(gt, rel=1e-12)
    det0 = qq_spectrum.energy("02") - qq_spectrum.energy("11")
    expected = 0.0
    for n in range(-15, 16):
        g = np.sqrt(2) * 5 * MHZ * jv(n, X)
        om = np.hypot(2 * g, det0 + n * fp)
        expected += (2 * g / om) ** 2 * np.sin(np.pi * om / (4 * gt)) ** 2
    assert b.by_group()["11<->02"][0] == pytest.approx(expected, rel=1e-9)


def test_operating_point_findings(qq):
    totals = {}
    for tgt in (("01", "10"), ("11", "02"), ("11", "20")):
        b = qq_budget(qq, tgt)
        rot = b.rotating_totals()
        assert rot["counter"] < 1e-2 * rot["co"]
        assert b.total <= b.bound
        totals[tgt] = b.total
    assert min(totals, key=totals.get) == ("11", "20")


def test_partition_identity(qq):
    b = qq_budget(qq, ("11", "02"), harmonics=10)
    parts = per_harmonic_breakdown(b)
    assert set(parts) <= set(range(-10, 11))
    assert sum(v for v, _ in parts.values()) == pytest.approx(b.total, rel=1e-12)
    assert sum(v[0] for v in b.by_group().values()) == pytest.approx(b.total, rel=1e-12)
    # the target sideband itself is excluded
    assert not any(c.entry is b.target and c.n == b.n_target for c in b.contributions)


def test_budget_serialization(qq):
    d = qq_budget(qq, ("01", "10")).to_dict()
    assert d["target"] == "01<->10" and d["pulse"] == "pi"
    assert d["P_e"] == pytest.approx(sum(c["P_e"] for c in d["contributions"]))


def test_budget_errors(qq, qcq):
    d = DriveSpec("Q1", 100 * MHZ, 150 * MHZ)
    with pytest.raises(BudgetError):
        population_error(qq, "qubit", ("01", "10"), d, pulse="3pi")
    with pytest.raises(BudgetError):
        population_error(qq, "laser", ("01", "10"), d)
    with pytest.raises(BudgetError):
        population_error(qq, "coupler", ("01", "10"), d)
    with pytest.raises(KeyError):
        population_error(qq, "qubit", ("00", "22"), d)
    # eps = 0 leaves no first-sideband strength
    with pytest.raises(BudgetError):
        population_error(qq, "qubit", ("01", "10"), DriveSpec("Q1", 0.0, 150 * MHZ))


def test_coupler_scheme_budget(qcq):
    cat = catalog_qcq(qcq)
    fp = abs(find_entry(cat, "001", "100").detuning)
    b = population_error(qcq, "coupler", ("001", "100"), DriveSpec("C", 300 * MHZ, fp), catalog=cat)
    assert b.total <= b.bound
    assert set(b.by_group()) >= {"coupler", "101<->002", "101<->200"}
    assert b.n_target == -1


def test_solve_amplitude_inverts_bessel():
    fp = 150 * MHZ
    eps = solve_amplitude(5 * MHZ, fp, 1, 2 * 2.0 * MHZ)
    assert 2 * 5 * MHZ * jv(1, eps / fp) == pytest.approx(4.0 * MHZ, rel=1e-9)
    with pytest.raises(ResolveError):
        solve_amplitude(5 * MHZ, fp, 1, 20 * MHZ)
    with pytest.raises(ResolveError):
        solve_amplitude(5 * MHZ, fp, 0, 1 * MHZ)


def test_resonance_sweep_holds_strength():
    base = qubit_coupler_qubit_system()

    def at(x):
        s = base.with_mode("Q1", frequency=5.801 * GHZ + x * MHZ, tunable=True)
        return s.with_mode("Q2", frequency=5.801 * GHZ)

    r = error_vs_resonance_sweep(at, ("001", "100"), 3 * MHZ, [100.0, 200.0, 300.0], drive_target="Q1")
    assert np.allclose(r.g_target, 3 * MHZ, rtol=1e-6)
    assert np.all(np.diff(r.resonance) > 0)
    total = sum(r.components.values())
    assert np.allclose(total, r.total_bound, rtol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.floats(4.5, 5.5), st.floats(4.5, 5.5), st.floats(1, 10), st.floats(0.5, 1.8))
def test_budget_bound_holds_for_random_pairs(w1, w2, J, x):
    from floqmap.model import CouplingSpec, ModeSpec, SystemSpec

    if abs(w1 - w2) < 0.05:
        return
    s = SystemSpec(
        (ModeSpec("Q1", w1 * GHZ, -0.22 * GHZ, 3, tunable=True), ModeSpec("Q2", w2 * GHZ, -0.25 * GHZ, 3)),
        (CouplingSpec(("Q1", "Q2"), J * MHZ),),
    )
    cat = catalog_qq(s)
    fp = abs(find_entry(cat, "01", "10").detuning)
    b = population_error(s, "qubit", ("01", "10"), DriveSpec("Q1", x * fp, fp), harmonics=8, catalog=cat)
    for c in b.contributions:
        assert c.p <= c.bound + 1e-15
    assert sum(v for v, _ in per_harmonic_breakdown(b).values()) == pytest.approx(b.total, rel=1e-12, abs=1e-300)
