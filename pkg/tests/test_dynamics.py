import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings
from hypothesis import strategies as st

from floqmap.model import MHZ, DriveSpec, basis_vector, build_static_hamiltonian
from floqmap.floquet import DriveTemplate, FloquetSolver, one_period_propagator
from floqmap.dynamics import (
    AliasingError,
    ModelMismatch,
    Peak,
    chevron,
    compare_peaks,
    evolve,
    fit_generalized_rabi,
    micromotion_spectrum,
    population_spectrum,
    rabi_model,
    sideband_lines,
    superposition,
    trajectory_spectrum,
)
from floqmap.dynamics import Trajectory
from floqmap.sidebands import catalog_qq


def test_undriven_evolution_matches_expm(qq):
    psi0 = superposition(qq, ("01", "11"), basis="bare")
    d = DriveSpec("Q1", 0.0, 150 * MHZ)
    traj = evolve(qq, d, psi0, 20e-9, 11, track=("01", "11"), basis="bare")
    H = build_static_hamiltonian(qq)
    ref = sla.expm(-1j * H * traj.times[-1]) @ psi0
    assert np.max(np.abs(traj.states[-1] - ref)) < 1e-8
    assert traj.norm_drift < 1e-8


def test_driven_evolution_matches_floquet_propagator(qq):
    d = DriveSpec("Q1", 276 * MHZ, 150 * MHZ, 0.4)
    psi0 = basis_vector(qq, "01")
    traj = evolve(qq, d, psi0, d.period, 3)
    sol = FloquetSolver(qq, "Q1")
    U = one_period_propagator(sol.H0, sol.A, d)
    assert np.max(np.abs(traj.states[-1] - U @ psi0)) < 1e-8


def test_dressed_state_is_stationary(qq, qq_spectrum):
    psi0 = qq_spectrum.vector("11")
    traj = evolve(qq, DriveSpec("Q1", 0.0, 100 * MHZ), psi0, 50e-9, 51, track=("11",), spectrum=qq_spectrum)
    assert np.max(np.abs(traj.population("11") - 1)) < 1e-9


def test_evolve_requires_normalized_state(qq):
    with pytest.raises(ValueError):
        evolve(qq, DriveSpec("Q1", 0.0, 1.0), 2 * basis_vector(qq, "00"), 1e-9, 2)


@settings(max_examples=40, deadline=None)
@given(st.floats(1.0, 8.0), st.floats(0.0, 10.0))
def test_rabi_fit_recovers_parameters(two_g_mhz, det_mhz):
    two_g, det = two_g_mhz * MHZ, det_mhz * MHZ
    omega = np.hypot(two_g, det)
    t = np.linspace(0, 2e-6, 4001)
    P = rabi_model(t, omega, (two_g / omega) ** 2)
    g_fit, d_fit = fit_generalized_rabi(t, P)
    assert g_fit == pytest.approx(two_g, rel=1e-5)
    assert d_fit == pytest.approx(det, abs=1e-4 * omega)


def test_rabi_fit_rejects_non_rabi(rng):
    t = np.linspace(0, 1e-6, 1000)
    P = 0.5 * np.sin(2 * np.pi * 3e6 * t) ** 2 + 0.4 * np.sin(2 * np.pi * 11e6 * t + 1) ** 2
    with pytest.raises(ModelMismatch):
        fit_generalized_rabi(t, P, max_rms=0.01)


def test_chevron_on_resonance(qq):
    tpl = DriveTemplate("Q1", eps_over_fp=1.84)
    grid = np.array([150.07, 160.0]) * MHZ
    times, P = chevron(qq, tpl, grid, 0.2e-6, 201)
    assert P.shape == (2, 201)
    assert P[0].max() > 0.95  # full swap on resonance
    # 10 MHz off: (2g)^2 / ((2g)^2 + Delta^2) = 0.26, plus micromotion ripple
    assert 0.2 < P[1].max() < 0.26 + 0.1


def test_population_spectrum_peak():
    t = np.arange(10_000) * 1e-10
    pop = 0.5 + 0.1 * np.cos(2 * np.pi * 50e6 * t)
    f, a = population_spectrum(t, pop)
    k = int(np.argmax(a))
    assert f[k] == pytest.approx(50e6)
    assert a[k] == pytest.approx(0.1, rel=1e-6)


def _synthetic(freqs_amps, n=5000, dt=1e-10):
    t = np.arange(n) * dt
    pop = 0.5 + sum(a * np.cos(2 * np.pi * f * t) for f, a in freqs_amps)
    return Trajectory(t, np.zeros((n, 1)), {(0, 1): pop})


def test_hann_interpolation_recovers_off_bin_tone():
    # bin = 2 MHz; the tone sits 0.4 bin off the grid
    traj = _synthetic([(37.8e6, 0.1)])
    raw = trajectory_spectrum(traj, floor=1e-2)
    fine = trajectory_spectrum(traj, floor=1e-2, window="hann", refine=True)
    assert raw.peaks[0].frequency == pytest.approx(38e6)
    assert len(fine.peaks) == 1
    assert fine.peaks[0].frequency == pytest.approx(37.8e6, abs=0.05e6)
    with pytest.raises(ValueError):
        population_spectrum(traj.times, traj.populations[(0, 1)], "kaiser")


def test_fmax_cut_does_not_create_edge_peak():
    # a strong line below the cut leaks a monotone tail across fmax
    traj = _synthetic([(101e6, 0.2)])
    spec = trajectory_spectrum(traj, floor=1e-4, fmax=200e6)
    assert len(spec.peaks) == 1 and abs(spec.peaks[0].frequency - 101e6) <= 1e6


def test_sideband_lines_and_matching(qq):
    cat = catalog_qq(qq)
    fp = 150 * MHZ
    lines = sideband_lines(cat, fp, n_max=2, fmax=400e6)
    assert all(0 <= f <= 400e6 for f, _, _ in lines)
    names = {(name, n) for _, name, n in lines}
    assert ("01<->10", 0) in names and ("11<->20", -2) in names
    ex = sideband_lines(cat, fp, n_max=2, fmax=400e6, exclude=[("01", "10")])
    assert ("01<->10", -1) not in {(name, n) for _, name, n in ex}
    peaks = [Peak(150.5e6, 0.5, (1, 1)), Peak(87e6, 0.2, (1, 1)), Peak(10e6, 1e-4, (1, 1))]
    matched, unmatched = compare_peaks(peaks, lines)
    assert [p.frequency for p, _ in matched] == [150.5e6]
    assert [p.frequency for p, _ in unmatched] == [87e6]


def test_micromotion_aliasing_guard(qq):
    with pytest.raises(AliasingError):
        micromotion_spectrum(qq, DriveSpec("Q1", 1.0, 1.0), basis_vector(qq, "11"), 1e-6, 100, max_line=100e6)


def test_superposition_normalized(qq, qq_spectrum):
    v = superposition(qq, ("01", "11"), spectrum=qq_spectrum)
    assert np.linalg.norm(v) == pytest.approx(1.0)
    assert abs(v.conj() @ qq_spectrum.vector("01")) ** 2 == pytest.approx(0.5)
