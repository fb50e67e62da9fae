import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from floqmap.model import GHZ, MHZ, ModelError, qubit_qubit_system
from floqmap.statics import sw_effective_params
from floqmap.sidebands import (
    StepCollapse,
    adiabatic_strength,
    analytic_coupling_derivative,
    bessel_j,
    catalog_qcq,
    catalog_qq,
    central_derivative,
    coupler_mod_strength,
    effective_coupling_function,
    fd_weights,
    find_entry,
    fourier_coupling_harmonics,
    harmonic_weight,
    qubit_mod_strength,
    qubit_stark_shifts,
    resonance_frequency,
    resonant_order,
    sideband_detuning,
    stark_shifted_detuning,
    taylor_coefficients,
)

# mpmath values frozen from the oracle script
BESSEL_ORACLE = {(1, 1.84): 0.5818649368420834, (0, 1.84): 0.31671658178385753,
                 (2, 1.84): 0.3157453060879723, (15, 3.5): 2.789136099596137e-09}
G_ADIABATIC_50 = 0.19931723631355178 * MHZ
JT12_FORMULA = -4.660649464436519 * MHZ


def bessel_quadrature(n, x, samples=4096):
    """Trapezoid rule on the periodic integral representation (spectrally accurate)."""
    tau = 2 * np.pi * np.arange(samples) / samples
    return float(np.mean(np.cos(n * tau - x * np.sin(tau))))


@pytest.mark.parametrize("key", list(BESSEL_ORACLE))
def test_bessel_against_mpmath(key):
    n, x = key
    assert bessel_j(n, x) == pytest.approx(BESSEL_ORACLE[key], rel=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(-15, 15), st.floats(0, 10))
def test_bessel_dual_route(n, x):
    assert bessel_j(n, x) == pytest.approx(bessel_quadrature(n, x), abs=1e-13)


def test_qq_catalog_rows(qq):
    cat = catalog_qq(qq)
    assert len(cat) == 9
    assert sum(e.rotating == "co" for e in cat) == 3
    e = find_entry(cat, "10", "01")
    assert e.detuning == pytest.approx(150 * MHZ)
    assert e.base_strength == pytest.approx(5 * MHZ) and e.C == 1
    assert find_entry(cat, "11", "02").detuning == pytest.approx(-110 * MHZ)
    assert find_entry(cat, "11", "20").detuning == pytest.approx(370 * MHZ)
    # the 01-12 row carries alpha of the second qubit
    assert find_entry(cat, "01", "12").detuning == pytest.approx(-(9850 - 260) * MHZ)
    assert find_entry(cat, "11", "22").C == 4
    with pytest.raises(KeyError):
        find_entry(cat, "00", "22")


def test_qq_dressed_catalog(qq):
    cat = catalog_qq(qq, dressed=True)
    assert find_entry(cat, "01", "10").detuning == pytest.approx(150.33294253545318 * MHZ, abs=1e3)


def test_qcq_catalog(qcq):
    cat = catalog_qcq(qcq)
    assert len(cat) == 27
    assert sum(e.channel == "coupler" for e in cat) == 18
    assert sum(e.rotating == "counter" for e in cat) == 18
    assert find_entry(cat, "001", "100").base_strength == pytest.approx(JT12_FORMULA, rel=1e-12)
    for e in cat:
        if e.channel == "coupler":
            assert abs(e.base_strength) == pytest.approx(np.sqrt(e.C) * 100 * MHZ)
    with pytest.raises(ModelError):
        catalog_qcq(qubit_qubit_system())
    with pytest.raises(ModelError):
        catalog_qq(qcq)


def test_qubit_strength_and_resonances(qq):
    e = find_entry(catalog_qq(qq), "01", "10")
    fp = 150 * MHZ
    assert qubit_mod_strength(5 * MHZ, 1, 1.84 * fp, fp) == pytest.approx(0.5818649368420834 * 5 * MHZ)
    assert resonance_frequency(e, 2) == pytest.approx(75 * MHZ)
    assert resonant_order(e, fp) == -1
    assert abs(sideband_detuning(e, -1, fp)) < 1e-3
    with pytest.raises(ValueError):
        resonance_frequency(e, 0)
    with pytest.raises(ValueError):
        qubit_mod_strength(1.0, 1, 1.0, 0.0)


def test_fd_weights_and_derivatives():
    w = fd_weights(2, np.array([-1.0, 0.0, 1.0]))
    assert np.allclose(w, [1, -2, 1])
    assert central_derivative(np.sin, 0.3, 3, 1e-2) == pytest.approx(-np.cos(0.3), rel=1e-7)


def test_harmonic_weights():
    # cos^3 = (3 cos + cos 3)/4 -> weights 3 and 1 over 2^3
    assert harmonic_weight(3, 1) == 3 and harmonic_weight(3, 3) == 1
    assert harmonic_weight(4, 2) == 4 and harmonic_weight(4, 1) == 0
    assert harmonic_weight(0, 1) == 0


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 9))
def test_harmonic_weights_reconstruct_power(n):
    t = np.linspace(0, 2 * np.pi, 17)
    recon = sum(harmonic_weight(n, m) * 2 * np.cos(m * t) for m in range(1, n + 1)) / 2**n
    if n % 2 == 0:
        recon += math.comb(n, n // 2) / 2**n
    assert np.allclose(recon, np.cos(t) ** n)


def test_analytic_vs_fd_derivatives(qcq):
    f = effective_coupling_function(qcq)
    wc = qcq.mode("C").frequency
    assert analytic_coupling_derivative(qcq, 0) == pytest.approx(JT12_FORMULA, rel=1e-12)
    for n in (1, 2, 3):
        fd = central_derivative(f, wc, n, 4 * n * MHZ)
        assert fd == pytest.approx(analytic_coupling_derivative(qcq, n), rel=1e-5)
    D_fd = taylor_coefficients(qcq, 200 * MHZ, 4)
    D_an = taylor_coefficients(qcq, 200 * MHZ, 4, derivative="analytic")
    assert np.allclose(D_fd, D_an, rtol=1e-4)
    with pytest.raises(ValueError):
        taylor_coefficients(qcq, 1.0, 2, derivative="analytic", coupling="exact")


def test_adiabatic_limit(qcq):
    assert adiabatic_strength(qcq, 50 * MHZ) == pytest.approx(G_ADIABATIC_50, rel=1e-12)
    # N = 1 Taylor truncation equals the leading-order expression up to the J12 term
    g1 = coupler_mod_strength(qcq, None, 1, 50 * MHZ, 1, derivative="analytic")
    assert abs(g1) == pytest.approx(G_ADIABATIC_50, rel=1e-9)


def test_taylor_converges_to_fourier(qcq):
    eps = 200 * MHZ
    c = fourier_coupling_harmonics(qcq, "12", eps, 3)
    assert c[0] != 0
    g1 = coupler_mod_strength(qcq, None, 1, eps, 5)
    g2 = coupler_mod_strength(qcq, None, 2, eps, 6)
    assert g1 == pytest.approx(c[1], rel=1e-3)
    assert g2 == pytest.approx(c[2], rel=1e-2)


def test_exact_coupling_route(qcq):
    wc = qcq.mode("C").frequency
    assert effective_coupling_function(qcq, "12", "exact")(wc) == pytest.approx(-4.558 * MHZ, rel=1e-3)
    assert effective_coupling_function(qcq, "101_200", "exact")(wc) == pytest.approx(-5.621 * MHZ, rel=1e-3)
    with pytest.raises(ValueError):
        effective_coupling_function(qcq, "12", "magic")


def test_coupler_strength_errors(qq, qcq):
    with pytest.raises(ModelError):
        coupler_mod_strength(qq, None, 1, 1.0)
    with pytest.raises(ValueError):
        coupler_mod_strength(qcq, None, 3, 1.0, 2)
    with pytest.raises(ModelError):
        coupler_mod_strength(qcq, ("000", "101"), 1, 1.0)
    with pytest.raises(StepCollapse):
        coupler_mod_strength(qcq, None, 1, 1.2 * GHZ)


def test_stark_shift_routes_agree(qcq):
    eps = 150 * MHZ
    s1, s2 = qubit_stark_shifts(qcq, eps)

    p = sw_effective_params(qcq)
    taylor = stark_shifted_detuning(qcq, eps, 6) - (p.omega_tilde_1 - p.omega_tilde_2)
    assert taylor == pytest.approx(s1 - s2, rel=1e-3)
    assert qubit_stark_shifts(qcq, 0.0) == (0.0, 0.0)


@settings(max_examples=30, deadline=None)
@given(st.floats(10, 300))
def test_coupler_strength_odd_in_amplitude_for_odd_harmonic(eps_mhz):
    from floqmap.model import qubit_coupler_qubit_system

    s = qubit_coupler_qubit_system()
    eps = eps_mhz * MHZ
    g = coupler_mod_strength(s, None, 1, eps, 3, derivative="analytic")
    gm = coupler_mod_strength(s, None, 1, -eps, 3, derivative="analytic")
    assert gm == pytest.approx(-g, rel=1e-12)
    g2 = coupler_mod_strength(s, None, 2, eps, 4, derivative="analytic")
    assert coupler_mod_strength(s, None, 2, -eps, 4, derivative="analytic") == pytest.approx(g2, rel=1e-12)
