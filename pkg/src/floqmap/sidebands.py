"""Sideband catalogs and analytic parametric coupling strengths."""
from __future__ import annotations

from dataclasses import dataclass
from math import comb, factorial
from typing import Callable, Sequence

import numpy as np
from scipy.special import jv

from .model import Label, ModelError, SystemSpec, format_label, parse_label
from .statics import DressedSpectrum, block_effective_coupling, exact_dressed_spectrum, sw_effective_params

# the first excited manifolds reachable from the computational space
SOURCE_MAX_EXCITATIONS = 2


@dataclass(frozen=True)
class TransitionEntry:
    bra: Label
    ket: Label
    rotating: str  # "co" | "counter"
    channel: str  # "qubit" | "coupler"
    C: int
    detuning: float  # rad/s
    base_strength: float  # rad/s
    expression: str = ""
    modes: tuple[str, str] = ("", "")

    @property
    def name(self) -> str:
        return f"{format_label(self.bra)}<->{format_label(self.ket)}"

    def beta(self, n: int, eps: float, fp: float, phase: float) -> float:
        """Drive-dependent phase of the n-th sideband."""
        return n * (phase + np.pi) + (eps / fp) * np.sin(phase)

    def pair(self) -> tuple[Label, Label]:
        return self.bra, self.ket


@dataclass(frozen=True)
class SidebandStrength:
    order: int
    strength: float
    resonance: float


# --------------------------------------------------------------- helpers

def _bare_energy(system: SystemSpec, label: Label) -> float:
    return sum(m.frequency * n + 0.5 * m.anharmonicity * n * (n - 1) for m, n in zip(system.modes, label))


def _expression(system: SystemSpec, upper: Label, lower: Label) -> str:
    """Symbolic E(lower) - E(upper) in terms of w_i and a_i."""
    terms = []
    for m, nu, nl in zip(system.modes, upper, lower):
        dw = nl - nu
        da = (nl * (nl - 1) - nu * (nu - 1)) // 2
        for coeff, sym in ((dw, f"w_{m.label}"), (da, f"a_{m.label}")):
            if coeff == 0:
                continue
            sign = "+" if coeff > 0 else "-"
            mag = "" if abs(coeff) == 1 else f"{abs(coeff)}*"
            terms.append(f"{sign}{mag}{sym}")
    s = "".join(terms)
    return s[1:] if s.startswith("+") else (s or "0")


def _is_source(system: SystemSpec, label: Label) -> bool:
    if sum(label) > SOURCE_MAX_EXCITATIONS:
        return False
    return all(n == 0 for m, n in zip(system.modes, label) if m.kind == "coupler")


def _coupler_ok(system: SystemSpec, label: Label) -> bool:
    return all(n <= 1 for m, n in zip(system.modes, label) if m.kind == "coupler")


def _in_space(system: SystemSpec, label: Label) -> bool:
    return all(0 <= n < d for n, d in zip(label, system.levels))


def _display_order(system: SystemSpec, a: Label, b: Label) -> tuple[Label, Label]:
    def key(lab):
        return (sum(lab), 0 if _is_source(system, lab) else 1, max(lab), lab)

    return (a, b) if key(a) <= key(b) else (b, a)


def generate_catalog(
    system: SystemSpec,
    *,
    energies: Callable[[Label], float] | None = None,
    strengths: Callable[[Label, Label, str, str], float] | None = None,
    require_space: bool = True,
) -> list[TransitionEntry]:
    """Enumerate single-ladder sideband transitions out of the low-excitation manifold.

    Co-rotating rows move one excitation across a coupled pair; counter-rotating
    rows add one excitation to each mode of the pair. At least one state must
    have all couplers in the ground state and at most two excitations, and no
    coupler is excited twice.
    """
    n = len(system.modes)
    energy = energies or (lambda lab: _bare_energy(system, lab))
    idx = {m.label: k for k, m in enumerate(system.modes)}
    sources = [lab for lab in np.ndindex(*(SOURCE_MAX_EXCITATIONS + 1,) * n) if _is_source(system, lab)]
    sources.sort(key=lambda lab: (sum(lab), lab))
    seen = set()
    out = []
    for c in system.couplings:
        i, j = sorted((idx[c.pair[0]], idx[c.pair[1]]))
        mi, mj = system.modes[i], system.modes[j]
        channel = "coupler" if "coupler" in (mi.kind, mj.kind) else "qubit"
        for s in sources:
            s = tuple(int(k) for k in s)
            cands = []
            # b_i^dag b_j and b_i b_j^dag
            for di, dj in ((1, -1), (-1, 1)):
                t = list(s)
                t[i] += di
                t[j] += dj
                cands.append(("co", tuple(t)))
            t = list(s)
            t[i] += 1
            t[j] += 1
            cands.append(("counter", tuple(t)))
            for rot, t in cands:
                if min(t) < 0 or not _coupler_ok(system, t):
                    continue
                if rot == "co" and sum(t) > SOURCE_MAX_EXCITATIONS:
                    continue
                if require_space and not _in_space(system, t):
                    continue
                key = frozenset((s, t))
                if key in seen:
                    continue
                seen.add(key)
                # "upper" state carries the extra quantum on mode i
                upper, lower = (t, s) if t[i] > s[i] else (s, t)
                C = max(s[i], t[i]) * max(s[j], t[j])
                det = energy(lower) - energy(upper)
                bra, ket = _display_order(system, s, t)
                if strengths is not None:
                    g = strengths(bra, ket, rot, channel)
                else:
                    g = np.sqrt(C) * c.strength
                out.append(
                    TransitionEntry(
                        bra, ket, rot, channel, C, det, g,
                        _expression(system, upper, lower), (mi.label, mj.label),
                    )
                )
    out.sort(key=lambda e: (e.rotating != "co", e.channel != "qubit", sum(e.bra), e.bra, e.ket))
    return out


def catalog_qq(system: SystemSpec, *, dressed: bool = False, spectrum: DressedSpectrum | None = None) -> list[TransitionEntry]:
    """Two-qubit rows; bare Duffing detunings unless `dressed` is set."""
    if len(system.modes) != 2:
        raise ModelError("catalog_qq needs a two-mode system")
    if not dressed:
        return generate_catalog(system)
    sp = spectrum or exact_dressed_spectrum(system)
    return generate_catalog(system, energies=lambda lab: sp.energy(lab) if _in_space(system, lab) else _bare_energy(system, lab))


def catalog_qcq(
    system: SystemSpec,
    *,
    spectrum: DressedSpectrum | None = None,
    dressed: bool = True,
) -> list[TransitionEntry]:
    """Qubit-coupler-qubit rows; detunings from dressed energies by default."""
    if len(system.modes) != 3:
        raise ModelError("catalog_qcq needs a three-mode system (Q1, C, Q2)")
    if dressed:
        sp = spectrum or exact_dressed_spectrum(system)
        energies = lambda lab: sp.energy(lab) if _in_space(system, lab) else _bare_energy(system, lab)
    else:
        energies = None
    sw = sw_effective_params(system)
    q1, c, q2 = system.modes

    def strengths(bra, ket, rot, channel):
        C = _level_coefficient(system, bra, ket)
        if channel == "coupler":
            # which qubit is paired with the coupler
            diff = [abs(a - b) for a, b in zip(bra, ket)]
            J = system.coupling(q1.label, c.label) if diff[0] else system.coupling(q2.label, c.label)
            return np.sqrt(C) * J
        pair = {bra, ket}
        if pair == {(0, 0, 1), (1, 0, 0)}:
            return sw.J_tilde_12
        if pair == {(1, 0, 1), (0, 0, 2)}:
            return sw.J_tilde_101_002
        if pair == {(1, 0, 1), (2, 0, 0)}:
            return sw.J_tilde_101_200
        return np.sqrt(C) * sw.J_tilde_12

    return generate_catalog(system, energies=energies, strengths=strengths)


def _level_coefficient(system: SystemSpec, a: Label, b: Label) -> int:
    moved = [k for k, (x, y) in enumerate(zip(a, b)) if x != y]
    C = 1
    for k in moved:
        C *= max(a[k], b[k])
    return C


def find_entry(catalog: Sequence[TransitionEntry], a, b) -> TransitionEntry:
    a, b = parse_label(a), parse_label(b)
    for e in catalog:
        if {e.bra, e.ket} == {a, b}:
            return e
    raise KeyError(f"no catalogued transition {format_label(a)}<->{format_label(b)}")


# ------------------------------------------------------------- strengths

def bessel_j(n: int, x):
    return jv(n, x)


def qubit_mod_strength(base_strength: float, n: int, eps: float, fp: float) -> float:
    if not fp > 0:
        raise ValueError("drive frequency must be positive")
    return base_strength * float(jv(n, eps / fp))


def resonance_frequency(entry: TransitionEntry | float, n: int) -> float:
    if n == 0:
        raise ValueError("harmonic order must be nonzero")
    det = entry.detuning if isinstance(entry, TransitionEntry) else float(entry)
    if det == 0:
        raise ValueError("zero detuning has no sideband resonance")
    return abs(det) / abs(n)


def resonant_order(entry: TransitionEntry, fp: float) -> int:
    """Harmonic n closest to satisfying detuning + n*fp = 0."""
    return int(np.rint(-entry.detuning / fp))


def sideband_detuning(entry: TransitionEntry, n: int, fp: float) -> float:
    return entry.detuning + n * fp


# ---------------------------------------------- coupler-modulated strengths

def fd_weights(order: int, points: np.ndarray) -> np.ndarray:
    """Finite-difference weights for the `order`-th derivative at 0 on `points` (units of h)."""
    m = len(points)
    A = np.vander(points, m, increasing=True).T
    b = np.zeros(m)
    b[order] = factorial(order)
    return np.linalg.solve(A, b)


class StepCollapse(ArithmeticError):
    pass


def central_derivative(f: Callable[[float], float], x0: float, order: int, h: float, accuracy: int | None = None) -> float:
    """Central finite difference with one Richardson step (h and h/2)."""
    if order == 0:
        return f(x0)
    acc = accuracy or 2 * ((order + 1) // 2) + 2
    half = (order - 1) // 2 + acc // 2
    pts = np.arange(-half, half + 1, dtype=float)
    w = fd_weights(order, pts)

    def est(step):
        vals = np.array([f(x0 + p * step) for p in pts])
        if not np.all(np.isfinite(vals)):
            raise StepCollapse("non-finite function value inside the stencil")
        return float(w @ vals) / step**order

    d1, d2 = est(h), est(h / 2)
    return d2 + (d2 - d1) / (2**acc - 1)


_PAIRS = {"12": ("100", "001"), "101_002": ("101", "002"), "101_200": ("101", "200")}


def effective_coupling_function(system: SystemSpec, which: str = "12", method: str = "sw") -> Callable[[float], float]:
    """J~(w_c) for one qubit-qubit channel.

    method "sw" is the second-order Schrieffer-Wolff expression; "exact" block-
    diagonalizes the full Hamiltonian at each coupler frequency.
    """
    if method == "exact":
        a, b = _PAIRS[which]
        coupler = system.modes[1].label
        return lambda wc: block_effective_coupling(system.with_mode(coupler, frequency=wc), a, b)
    if method != "sw":
        raise ValueError("method must be 'sw' or 'exact'")
    attr = {"12": "J_tilde_12", "101_002": "J_tilde_101_002", "101_200": "J_tilde_101_200"}[which]
    return lambda wc: float(getattr(sw_effective_params(system, wc, warn_ratio=0.0), attr))


def _which_for(transition) -> str:
    if transition is None or isinstance(transition, str):
        return transition or "12"
    a, b = transition.pair() if isinstance(transition, TransitionEntry) else map(parse_label, transition)
    pair = {a, b}
    if pair == {(0, 0, 1), (1, 0, 0)}:
        return "12"
    if pair == {(1, 0, 1), (0, 0, 2)}:
        return "101_002"
    if pair == {(1, 0, 1), (2, 0, 0)}:
        return "101_200"
    raise ModelError("coupler-modulated strengths are defined for the 001-100, 101-002 and 101-200 channels")


def analytic_coupling_derivative(system: SystemSpec, n: int, which: str = "12", omega_c: float | None = None) -> float:
    """n-th derivative of the second-order effective coupling with respect to the coupler frequency."""
    q1, c, q2 = system.modes
    wc = c.frequency if omega_c is None else omega_c
    J1c = system.coupling(q1.label, c.label)
    J2c = system.coupling(q2.label, c.label)
    J12 = system.coupling(q1.label, q2.label)
    w1, w2, a1, a2 = q1.frequency, q2.frequency, q1.anharmonicity, q2.anharmonicity

    def dinv_minus(a):  # d^n/dwc^n 1/(a - wc)
        return factorial(n) / (a - wc) ** (n + 1)

    def dinv_plus(a):  # d^n/dwc^n 1/(a + wc)
        return (-1) ** n * factorial(n) / (a + wc) ** (n + 1)

    if which == "12":
        pref, terms = 0.5, dinv_minus(w1) + dinv_minus(w2) - dinv_plus(w1) - dinv_plus(w2)
        base = J12
    elif which == "101_002":
        pref, terms = 1 / np.sqrt(2), dinv_minus(w1) + dinv_minus(w2 + a2) - dinv_plus(w1) - dinv_plus(w2 + a2)
        base = np.sqrt(2) * J12
    elif which == "101_200":
        pref, terms = 1 / np.sqrt(2), dinv_minus(w1 + a1) + dinv_minus(w2) - dinv_plus(w1 + a1) - dinv_plus(w2)
        base = np.sqrt(2) * J12
    else:
        raise KeyError(which)
    if n == 0:
        return base + pref * J1c * J2c * terms
    return pref * J1c * J2c * terms


def taylor_coefficients(
    system: SystemSpec,
    eps: float,
    N: int,
    which: str = "12",
    *,
    derivative: str = "fd",
    h: float | None = None,
    coupling: str = "sw",
) -> np.ndarray:
    """D_n for n = 0..N (D_0 is the static value)."""
    wc = system.modes[1].frequency
    f = effective_coupling_function(system, which, coupling)
    out = np.zeros(N + 1)
    for n in range(N + 1):
        if derivative == "analytic":
            if coupling != "sw":
                raise ValueError("analytic derivatives exist only for the SW coupling")
            d = analytic_coupling_derivative(system, n, which)
        else:
            step = h if h is not None else 2 * np.pi * 1e6 * max(1, 4 * n)
            _guard_singularity(system, step * (n + 2), eps)
            d = central_derivative(f, wc, n, step)
        out[n] = eps**n / (2**n * factorial(n)) * d
    return out


def _guard_singularity(system: SystemSpec, reach: float, eps: float) -> None:
    q1, c, q2 = system.modes
    wc = c.frequency
    span = reach + abs(eps)
    for w in (q1.frequency, q2.frequency, q1.frequency + q1.anharmonicity, q2.frequency + q2.anharmonicity):
        if abs(w - wc) <= span:
            raise StepCollapse(
                f"coupler excursion {span / (2e6 * np.pi):.1f} MHz reaches a qubit transition; "
                "effective-coupling expansion is singular"
            )


def harmonic_weight(n: int, m: int) -> int:
    """Multiplicity of cos(m wp t) in cos^n after power reduction, halved."""
    m = abs(m)
    return sum(comb(n, k) for k in range((n - 1) // 2 + 1) if n - 2 * k == m) if n >= 1 else 0


def coupler_mod_strength(
    system: SystemSpec,
    transition=None,
    m: int = 1,
    eps: float = 0.0,
    N: int | None = None,
    *,
    derivative: str = "fd",
    coupling: str = "sw",
) -> float:
    """g^(m) from the Taylor expansion of the effective coupling about the static coupler frequency.

    `coupling` picks the J~ being expanded: the second-order SW form or the
    exact block-diagonalized coupling.
    """
    if len(system.modes) != 3:
        raise ModelError("coupler modulation needs a qubit-coupler-qubit system")
    N = abs(m) + 2 if N is None else N
    if N < abs(m):
        raise ValueError("Taylor order must be at least |m|")
    which = _which_for(transition)
    D = taylor_coefficients(system, eps, N, which, derivative=derivative, coupling=coupling)
    return float(sum(D[n] * harmonic_weight(n, m) for n in range(1, N + 1)))


def adiabatic_strength(system: SystemSpec, eps: float) -> float:
    """Leading-order first-sideband strength for the 001-100 channel."""
    q1, c, q2 = system.modes
    J1c = system.coupling(q1.label, c.label)
    J2c = system.coupling(q2.label, c.label)
    D1, D2 = q1.frequency - c.frequency, q2.frequency - c.frequency
    S1, S2 = q1.frequency + c.frequency, q2.frequency + c.frequency
    return eps * J1c * J2c / 4 * (1 / D1**2 + 1 / D2**2 + 1 / S1**2 + 1 / S2**2)


def stark_shifted_detuning(system: SystemSpec, eps: float, N: int = 4, *, derivative: str = "fd") -> float:
    """Time-averaged omega~_1 - omega~_2 under coupler modulation, even Taylor orders only."""
    q1, c, q2 = system.modes
    wc = c.frequency

    def diff(x):
        p = sw_effective_params(system, x, warn_ratio=0.0)
        return p.omega_tilde_1 - p.omega_tilde_2

    total = diff(wc)
    for n in range(2, N + 1, 2):
        if derivative == "analytic":
            d = _analytic_lamb_derivative(system, n)
        else:
            step = 2 * np.pi * 1e6 * 4 * n
            _guard_singularity(system, step * (n + 2), eps)
            d = central_derivative(diff, wc, n, step)
        total += eps**n / (2**n * factorial(n)) * d * comb(n, n // 2)
    return total


def _analytic_lamb_derivative(system: SystemSpec, n: int) -> float:
    q1, c, q2 = system.modes
    wc = c.frequency
    out = 0.0
    for q, sign in ((q1, 1), (q2, -1)):
        J = system.coupling(q.label, c.label)
        d = factorial(n) / (q.frequency - wc) ** (n + 1) - (-1) ** n * factorial(n) / (q.frequency + wc) ** (n + 1)
        out += sign * J**2 * d
    return out


def fourier_coupling_harmonics(system: SystemSpec, which: str, eps: float, m_max: int, samples: int = 128) -> np.ndarray:
    """g^(m), m = 0..m_max, as Fourier coefficients of J~(w_c + eps cos t).

    This is the N -> infinity limit of the Taylor route and stays accurate at
    harmonic orders where high finite-difference derivatives do not.
    """
    if m_max >= samples // 2:
        raise ValueError("too few quadrature samples for the requested harmonics")
    wc = system.modes[1].frequency
    _guard_singularity(system, 0.0, eps)
    f = effective_coupling_function(system, which)
    theta = 2 * np.pi * np.arange(samples) / samples
    vals = np.array([f(wc + eps * np.cos(t)) for t in theta])
    c = np.fft.rfft(vals).real / samples
    return c[: m_max + 1]


def qubit_stark_shifts(system: SystemSpec, eps: float, samples: int = 64) -> tuple[float, float]:
    """Period-averaged shifts of w~_1 and w~_2 when the coupler is modulated by eps cos."""
    wc = system.modes[1].frequency
    if eps == 0:
        return 0.0, 0.0
    _guard_singularity(system, 0.0, eps)
    theta = 2 * np.pi * np.arange(samples) / samples
    p0 = sw_effective_params(system, wc, warn_ratio=0.0)
    s1 = s2 = 0.0
    for t in theta:
        p = sw_effective_params(system, wc + eps * np.cos(t), warn_ratio=0.0)
        s1 += p.omega_tilde_1
        s2 += p.omega_tilde_2
    return s1 / samples - p0.omega_tilde_1, s2 / samples - p0.omega_tilde_2
