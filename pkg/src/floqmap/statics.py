"""Undriven spectra: dressed-state tracking, perturbative energies, SW parameters, static ZZ."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .model import (
    KHZ,
    Label,
    ModelError,
    SystemSpec,
    basis_vector,
    build_static_hamiltonian,
    coupling_operator,
    diagonal_energies,
    enumerate_bare_states,
    parse_label,
    state_index,
)

DEGENERACY_TOL = 1.0 * KHZ


class TrackingError(RuntimeError):
    """Overlap-based labeling could not identify a state unambiguously."""


class DegeneratePerturbation(ValueError):
    pass


class SingularityError(ValueError):
    pass


# ------------------------------------------------------------ assignment

def assign_by_overlap(reference: np.ndarray, candidates: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Globally optimal matching of reference columns onto candidate columns.

    Returns (cols, weights): reference column r is matched to candidate column
    cols[r] with squared overlap weights[r].
    """
    W = np.abs(reference.conj().T @ candidates) ** 2
    rows, cols = linear_sum_assignment(-W)
    order = np.argsort(rows)
    cols = cols[order]
    return cols, W[np.arange(W.shape[0]), cols]


# --------------------------------------------------------- dressed states

@dataclass(frozen=True)
class DressedSpectrum:
    """Eigenpairs of the static Hamiltonian keyed by the bare state they continue from."""

    labels: tuple[Label, ...]
    energies: np.ndarray  # rad/s, in bare-basis order
    vectors: np.ndarray  # column k continues from labels[k]
    bare_overlap: np.ndarray  # |<bare_k|dressed_k>|^2
    min_step_overlap: float = 1.0
    _index: Mapping[Label, int] = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_index", {lab: k for k, lab in enumerate(self.labels)})

    def index(self, label) -> int:
        return self._index[parse_label(label)]

    def energy(self, label) -> float:
        return float(self.energies[self.index(label)])

    def vector(self, label) -> np.ndarray:
        return self.vectors[:, self.index(label)]

    def overlap(self, label) -> float:
        return float(self.bare_overlap[self.index(label)])

    def __getitem__(self, label):
        k = self.index(label)
        return float(self.energies[k]), self.vectors[:, k], float(self.bare_overlap[k])


def _eigh(H: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return np.linalg.eigh(0.5 * (H + H.conj().T))


def track_eigenstates(
    path: Sequence[np.ndarray],
    start: np.ndarray,
    *,
    floor: float = 0.5,
    names: Sequence | None = None,
) -> tuple[np.ndarray, np.ndarray, float]:
    """Follow eigenvectors along a list of Hermitian matrices.

    `start` holds one column per tracked state. Returns energies and vectors
    of the final matrix in the order of `start`, plus the smallest winning
    overlap seen along the way.
    """
    prev = start
    worst = 1.0
    E = None
    for step, H in enumerate(path):
        evals, evecs = _eigh(H)
        cols, w = assign_by_overlap(prev, evecs)
        k = int(np.argmin(w))
        worst = min(worst, float(w[k]))
        if w[k] < floor:
            who = names[k] if names is not None else k
            raise TrackingError(f"tracking ambiguity at step {step}: state {who} best overlap {w[k]:.3f} < {floor}")
        vecs = evecs[:, cols]
        # fix the global phase of each column so the reference component is real positive
        ph = np.sum(prev.conj() * vecs, axis=0)
        ph = np.where(np.abs(ph) > 0, ph / np.abs(ph), 1.0)
        prev = vecs / ph
        E = evals[cols]
    return E, prev, worst


def exact_dressed_spectrum(
    system: SystemSpec,
    n_steps: int = 20,
    *,
    floor: float = 0.5,
    refine_below: float = 0.8,
    max_refinements: int = 4,
    rwa: bool = False,
) -> DressedSpectrum:
    """Label every eigenpair by continuation from the uncoupled limit.

    Couplings are scaled by lambda from 0 to 1; the step count is doubled when
    the weakest winning overlap drops below `refine_below`.
    """
    labels = tuple(enumerate_bare_states(system))
    D = diagonal_energies(system)
    V = coupling_operator(system, rwa=rwa)
    start = np.eye(system.dim, dtype=complex)
    steps = n_steps
    for attempt in range(max_refinements + 1):
        lams = np.linspace(0.0, 1.0, steps + 1)[1:]
        path = (np.diag(D) + lam * V for lam in lams)
        E, vecs, worst = track_eigenstates(path, start, floor=floor, names=labels)
        if worst >= refine_below or attempt == max_refinements:
            break
        steps *= 2
    overlap = np.abs(np.diag(vecs)) ** 2
    return DressedSpectrum(labels, np.asarray(E, float), vecs, overlap, worst)


# --------------------------------------------------- perturbation theory

def _denominators(system: SystemSpec, s: int) -> np.ndarray:
    E0 = diagonal_energies(system)
    return E0[s] - E0


def perturbative_corrections(system: SystemSpec, state, *, rwa: bool = False, max_order: int = 4) -> tuple[float, ...]:
    """(E0, E2, E3, E4) from the nondegenerate Rayleigh-Schrodinger sums.

    The coupling operator is either the full X_i X_j form or its
    excitation-conserving part.
    """
    s = state_index(system, state)
    E0 = diagonal_energies(system)
    V = coupling_operator(system, rwa=rwa).real
    Esj = E0[s] - E0
    others = np.arange(system.dim) != s

    # denominators only matter for states reachable within the orders computed
    hops = max(1, max_order // 2)
    reach = np.zeros(system.dim, bool)
    v = np.zeros(system.dim)
    v[s] = 1.0
    for _ in range(hops):
        v = np.abs(V) @ v
        reach |= v > 0
    bad = others & reach & (np.abs(Esj) < DEGENERACY_TOL)
    if bad.any():
        j = int(np.flatnonzero(bad)[0])
        raise DegeneratePerturbation(
            f"energy denominator E_sj = {Esj[j]:.3e} rad/s below tolerance between state {s} and {j}"
        )
    r = np.zeros(system.dim)
    r[others] = 1.0 / Esj[others]
    r[~reach] = 0.0
    u = V[s] * r  # V_sj / E_sj
    E2 = float(np.sum(V[s] ** 2 * r))
    E3 = float(u @ V @ u)
    E4 = float(u @ V @ (r * (V @ u)) - E2 * np.sum(V[s] ** 2 * r**2))
    return float(E0[s]), E2, E3, E4


def perturbative_energy(system: SystemSpec, state, order: int = 4, *, rwa: bool = False, method: str = "sum") -> float:
    if order not in (0, 2, 3, 4):
        raise ValueError("order must be 2, 3 or 4")
    if method == "closed":
        parts = closed_form_energy(system, state)
    elif method == "sum":
        parts = perturbative_corrections(system, state, rwa=rwa)
    else:
        raise ValueError(f"unknown method {method!r}")
    E0, E2, E3, E4 = parts
    return E0 + (E2 if order >= 2 else 0.0) + (E3 if order >= 3 else 0.0) + (E4 if order >= 4 else 0.0)


@dataclass(frozen=True)
class QCQParams:
    w1: float
    wc: float
    w2: float
    a1: float
    ac: float
    a2: float
    J1c: float
    J2c: float
    J12: float

    @classmethod
    def from_system(cls, system: SystemSpec, omega_c: float | None = None) -> "QCQParams":
        if len(system.modes) != 3:
            raise ModelError("qubit-coupler-qubit helpers need exactly three modes (Q1, C, Q2)")
        q1, c, q2 = system.modes
        return cls(
            q1.frequency,
            c.frequency if omega_c is None else omega_c,
            q2.frequency,
            q1.anharmonicity,
            c.anharmonicity,
            q2.anharmonicity,
            system.coupling(q1.label, c.label),
            system.coupling(q2.label, c.label),
            system.coupling(q1.label, q2.label),
        )


def closed_form_energy(system: SystemSpec, state) -> tuple[float, float, float, float]:
    """(E0, E2, E3, E4) for the nine low-lying qubit-coupler-qubit states, RWA coupling."""
    p = QCQParams.from_system(system)
    w1, wc, w2, a1, ac, a2 = p.w1, p.wc, p.w2, p.a1, p.ac, p.a2
    J1c, J2c, J12 = p.J1c, p.J2c, p.J12
    D12, D1c, D2c = w1 - w2, w1 - wc, w2 - wc
    S1c, S2c = w1 + wc, w2 + wc
    lab = "".join(str(k) for k in parse_label(state))

    if lab == "000":
        return 0.0, 0.0, 0.0, 0.0
    if lab == "001":
        return (
            w2,
            J2c**2 / D2c - J12**2 / D12,
            -2 * J12 * J1c * J2c / (D12 * D2c),
            J12**2 * J2c**2 * (1 / (D12 * D2c**2) - 1 / (D12**2 * D2c))
            - J2c**4 / D2c**3
            - J1c**2 * J2c**2 / (D12 * D2c**2)
            + J12**2 * J1c**2 / (D12**2 * D2c)
            + J12**4 / D12**3,
        )
    if lab == "010":
        return (
            wc,
            -J2c**2 / D2c - J1c**2 / D1c,
            2 * J12 * J1c * J2c / (D1c * D2c),
            J1c**2 * J2c**2 * (1 / (D1c * D2c**2) + 1 / (D1c**2 * D2c))
            + J2c**4 / D2c**3
            - J12**2 * J2c**2 / (D1c * D2c**2)
            - J12**2 * J1c**2 / (D1c**2 * D2c)
            + J1c**4 / D1c**3,
        )
    if lab == "100":
        return (
            w1,
            J1c**2 / D1c + J12**2 / D12,
            2 * J12 * J1c * J2c / (D12 * D1c),
            -J12**2 * J1c**2 * (1 / (D12 * D1c**2) + 1 / (D12**2 * D1c))
            - J1c**4 / D1c**3
            + J1c**2 * J2c**2 / (D12 * D1c**2)
            + J12**2 * J2c**2 / (D12**2 * D1c)
            - J12**4 / D12**3,
        )
    if lab == "002":
        return (
            2 * w2 + a2,
            2 * J12**2 / (-D12 + a2) + 2 * J2c**2 / (D2c + a2),
            4 * J12 * J1c * J2c / ((-D12 + a2) * (D2c + a2)),
            4 * J12**4 * (D12 + a1) / ((D12 - a2) ** 3 * (2 * D12 + a1 - a2))
            + 2 * J12**2 * J1c**2 / ((D12 - a2) ** 2 * (D2c + a2))
            - 2 * J1c**2 * J2c**2 / ((D12 - a2) * (D2c + a2) ** 2)
            - 4 * J2c**4 * (D2c - ac) / ((D2c + a2) ** 3 * (2 * D2c + a2 - ac))
            - 2 * J12**2 * J2c**2 * (D12 - D2c - 2 * a2) * (D12 - D2c - 2 * S1c + 4 * w2)
            / ((D12 - a2) ** 2 * (D2c + a2) ** 2 * (S1c - a2 - 2 * w2)),
        )
    if lab == "200":
        return (
            2 * w1 + a1,
            2 * J12**2 / (D12 + a1) + 2 * J1c**2 / (D1c + a1),
            4 * J12 * J1c * J2c / ((D12 + a1) * (D1c + a1)),
            4 * J12**4 * (-D12 + a2) / ((D12 + a1) ** 3 * (2 * D12 + a1 - a2))
            + 2 * J12**2 * J1c**2 * (D12 + D1c + 2 * a1) * (D12 + D1c + 2 * S2c - 4 * w1)
            / ((D12 + a1) ** 2 * (D1c + a1) ** 2 * (-S2c + a1 + 2 * w1))
            + 2 * J12**2 * J2c**2 / ((D12 + a1) ** 2 * (D1c + a1))
            + 4 * J1c**4 * (-D1c + ac) / ((D1c + a1) ** 3 * (2 * D1c + a1 - ac))
            + 2 * J1c**2 * J2c**2 / ((D12 + a1) * (D1c + a1) ** 2),
        )
    if lab == "011":
        X = -S2c + a1 + 2 * w1
        P = D2c + a2
        Q = -D2c + ac
        return (
            S2c,
            2 * J2c**2 * (1 / (D2c - ac) + 1 / (-D2c - a2)) - J1c**2 / D1c - J12**2 / D12,
            2 * J12 * J1c * J2c * (2 / (D1c * P) + 2 / (D12 * Q) + 1 / (D12 * D1c)),
            J12**2 * J1c**2 * (
                -2 / (D1c**2 * X) - 2 / (D1c**2 * P) - 4 / (D12 * D1c * X) + 1 / (D12 * D1c**2)
                - 2 / (D12**2 * X) - 2 / (D12**2 * Q) + 1 / (D12**2 * D1c)
            )
            + J12**2 * J2c**2 * (
                -4 / (D1c * P**2) + 2 / (D12 * P**2) + 2 / (D12 * Q**2) - 4 / (D12 * D1c * P)
                + 2 / (D12**2 * P) + 2 / (D12**2 * Q) - 1 / (D12**2 * D1c)
            )
            + J1c**2 * J2c**2 * (
                2 / (D1c * P**2) + 2 / (D1c * Q**2) + 2 / (D1c**2 * P) + 2 / (D1c**2 * Q)
                - 4 / (D12 * Q**2) - 4 / (D12 * D1c * Q) - 1 / (D12 * D1c**2)
            )
            + 4 * J2c**4 * (1 / P**3 + 1 / (Q * P**2) + 1 / (Q**2 * P) + 1 / Q**3)
            + J1c**4 / D1c**3
            + J12**4 / D12**3,
        )
    if lab == "101":
        A = D12 - a2
        B = D12 + a1
        K = D1c + D2c - ac
        return (
            w1 + w2,
            2 * J12**2 * (1 / A - 1 / B) + J2c**2 / D2c + J1c**2 / D1c,
            2 * J12 * J1c * J2c * (-2 / (D2c * B) + 2 / (D1c * A) + 1 / (D1c * D2c)),
            4 * J12**4 * (-1 / A**3 + 1 / (B * A**2) - 1 / (B**2 * A) + 1 / B**3)
            + J12**2 * J1c**2 * (
                4 / (D2c * B**2) - 2 / (D1c * A**2) - 2 / (D1c * B**2) - 4 / (D1c * D2c * B)
                - 2 / (D1c**2 * A) + 2 / (D1c**2 * B) + 1 / (D1c**2 * D2c)
            )
            + J12**2 * J2c**2 * (
                -2 / (D2c * A**2) - 2 / (D2c * B**2) - 2 / (D2c**2 * A) + 2 / (D2c**2 * B)
                + 4 / (D1c * A**2) + 4 / (D1c * D2c * A) + 1 / (D1c * D2c**2)
            )
            + J1c**2 * J2c**2 * (
                2 / (D2c**2 * K) - 2 / (D2c**2 * B) + 4 / (D1c * D2c * K) - 1 / (D1c * D2c**2)
                + 2 / (D1c**2 * K) + 2 / (D1c**2 * A) - 1 / (D1c**2 * D2c)
            )
            - J2c**4 / D2c**3
            - J1c**4 / D1c**3,
        )
    if lab == "110":
        P = D1c + a1
        Q = D1c - ac
        Y = S1c - a2 - 2 * w2
        return (
            S1c,
            2 * J1c**2 * (1 / Q - 1 / P) - J2c**2 / D2c + J12**2 / D12,
            2 * J12 * J1c * J2c * (2 / (D2c * P) + 2 / (D12 * Q) - 1 / (D12 * D2c)),
            J12**2 * J1c**2 * (
                -4 / (D2c * P**2) - 2 / (D12 * Q**2) - 2 / (D12 * P**2) + 4 / (D12 * D2c * P)
                - 2 / (D12**2 * Q) + 2 / (D12**2 * P) - 1 / (D12**2 * D2c)
            )
            + J12**2 * J2c**2 * (
                2 / (D2c**2 * Y) - 2 / (D2c**2 * P) - 4 / (D12 * D2c * Y) - 1 / (D12 * D2c**2)
                + 2 / (D12**2 * Y) + 2 / (D12**2 * Q) + 1 / (D12**2 * D2c)
            )
            + 4 * J1c**4 * (-1 / Q**3 + 1 / P**3 + 1 / (P * Q**2) - 1 / (P**2 * Q))
            + J1c**2 * J2c**2 * (
                2 / (D2c * Q**2) + 2 / (D2c * P**2) - 2 / (D2c**2 * Q) + 2 / (D2c**2 * P)
                + 4 / (D12 * Q**2) - 4 / (D12 * D2c * Q) + 1 / (D12 * D2c**2)
            )
            + J2c**4 / D2c**3
            - J12**4 / D12**3,
        )
    raise KeyError(f"no closed form for state |{lab}>")


CLOSED_FORM_STATES = ("000", "001", "010", "100", "002", "200", "011", "101", "110")


# ------------------------------------------------------ Schrieffer-Wolff

@dataclass(frozen=True)
class EffectiveQQParams:
    J_tilde_12: float
    omega_tilde_1: float
    omega_tilde_2: float
    J_tilde_101_002: float
    J_tilde_101_200: float
    J_tilde_12_third: float | None = None


def _inv(x: float, what: str) -> float:
    if x == 0:
        raise SingularityError(f"{what} vanishes")
    return 1.0 / x


def sw_effective_params(
    system: SystemSpec,
    omega_c: float | None = None,
    *,
    third_order: bool = False,
    warn_ratio: float = 5.0,
) -> EffectiveQQParams:
    """Coupler-eliminated parameters; `omega_c` overrides the coupler frequency."""
    p = QCQParams.from_system(system, omega_c)
    D1c, D2c = p.w1 - p.wc, p.w2 - p.wc
    S1c, S2c = p.w1 + p.wc, p.w2 + p.wc
    for D, J, name in ((D1c, p.J1c, "Delta_1c"), (D2c, p.J2c, "Delta_2c")):
        if J != 0 and D != 0 and abs(D / J) < warn_ratio:
            warnings.warn(f"{name}/J = {D / J:.2f}: outside the dispersive regime", stacklevel=2)
    i1, i2 = _inv(D1c, "Delta_1c"), _inv(D2c, "Delta_2c")
    s1, s2 = _inv(S1c, "Sigma_1c"), _inv(S2c, "Sigma_2c")
    w1t = p.w1 + p.J1c**2 * (i1 - s1)
    w2t = p.w2 + p.J2c**2 * (i2 - s2)
    JJ = p.J1c * p.J2c
    J12t = p.J12 + 0.5 * JJ * (i1 + i2 - s1 - s2)
    r2 = np.sqrt(2.0)
    J002 = r2 * p.J12 + JJ / r2 * (
        i1 + _inv(D2c + p.a2, "Delta_2c + alpha_2") - s1 - _inv(S2c + p.a2, "Sigma_2c + alpha_2")
    )
    J200 = r2 * p.J12 + JJ / r2 * (
        _inv(D1c + p.a1, "Delta_1c + alpha_1") + i2 - _inv(S1c + p.a1, "Sigma_1c + alpha_1") - s2
    )
    J3 = None
    if third_order:
        J3 = p.J12 + 0.5 * JJ * (i1 + i2) - p.J12 * (p.J1c**2 + p.J2c**2) / (2 * D1c * D2c)
    return EffectiveQQParams(J12t, w1t, w2t, J002, J200, J3)


def block_effective_coupling(system: SystemSpec, a, b, spectrum: DressedSpectrum | None = None) -> float:
    """Off-diagonal element of the exact two-state effective Hamiltonian for bare states a, b.

    The dressed pair is rotated back onto span{|a>, |b>} with the closest
    unitary to their bare-space overlap (polar factor), which is the all-order
    limit of the Schrieffer-Wolff elimination.
    """
    sp = spectrum or exact_dressed_spectrum(system)
    a, b = parse_label(a), parse_label(b)
    P = np.stack([basis_vector(system, a), basis_vector(system, b)], axis=1)
    V = np.stack([sp.vector(a), sp.vector(b)], axis=1)
    U, _, Wh = np.linalg.svd(P.conj().T @ V)
    T = U @ Wh
    H = T @ np.diag([sp.energy(a), sp.energy(b)]) @ T.conj().T
    return float(H[0, 1].real)


# --------------------------------------------------------------- ZZ

def _zz_labels(system: SystemSpec) -> tuple[Label, Label, Label, Label]:
    n = len(system.modes)
    if n == 2:
        return (1, 1), (0, 0), (0, 1), (1, 0)
    if n == 3:
        return (1, 0, 1), (0, 0, 0), (0, 0, 1), (1, 0, 0)
    raise ModelError("static ZZ is defined for two-qubit or qubit-coupler-qubit systems")


def _combine(e11, e00, e01, e10):
    return e11 + e00 - e01 - e10


def zz_two_mode(system: SystemSpec) -> float:
    """Second-order two-transmon ZZ with exchange-type coupling."""
    q1, q2 = system.modes
    J = system.coupling(q1.label, q2.label)
    D12 = q1.frequency - q2.frequency
    return 2 * J**2 * (1 / (D12 - q2.anharmonicity) - 1 / (D12 + q1.anharmonicity))


def zz_two_mode_printed(system: SystemSpec) -> float:
    """J^2/(Delta+alpha_2) - J^2/(Delta-alpha_1) with Delta = omega_2 - omega_1, as commonly quoted."""
    q1, q2 = system.modes
    J = system.coupling(q1.label, q2.label)
    D = q2.frequency - q1.frequency
    return J**2 / (D + q2.anharmonicity) - J**2 / (D - q1.anharmonicity)


def static_zz(
    system: SystemSpec,
    method: str = "exact",
    order: int = 4,
    *,
    rwa: bool = False,
    spectrum: DressedSpectrum | None = None,
) -> float:
    """Static ZZ.

    method: "exact" (tracked diagonalization), "sum" (Rayleigh-Schrodinger
    sums to `order`, full or RWA coupling), "closed" (printed closed forms,
    qubit-coupler-qubit only) or "formula" (two-mode second-order expression).
    """
    l11, l00, l01, l10 = _zz_labels(system)
    if method == "exact":
        sp = spectrum or exact_dressed_spectrum(system)
        return _combine(*(sp.energy(l) for l in (l11, l00, l01, l10)))
    if method == "formula":
        if len(system.modes) != 2:
            raise ModelError("two-mode formula needs a two-mode system")
        return zz_two_mode(system)
    if method in ("sum", "closed"):
        if method == "closed" and len(system.modes) != 3:
            raise ModelError("closed forms exist only for the qubit-coupler-qubit system")
        es = [perturbative_energy(system, l, order, rwa=rwa, method=method) for l in (l11, l00, l01, l10)]
        return _combine(*es)
    raise ValueError(f"unknown method {method!r}")


def zz_closed_terms(system: SystemSpec) -> tuple[float, float, float]:
    """(zeta2, zeta3, zeta4) closed forms; zeta4 keeps only the J1c^2 J2c^2 terms."""
    p = QCQParams.from_system(system)
    D12, D1c, D2c = p.w1 - p.w2, p.w1 - p.wc, p.w2 - p.wc
    a1, a2, ac = p.a1, p.a2, p.ac
    J12, J1c, J2c = p.J12, p.J1c, p.J2c
    z2 = 2 * J12**2 * (1 / (D12 - a2) - 1 / (D12 + a1))
    z3 = 2 * J12 * J1c * J2c * (
        -2 / (D2c * (D12 + a1)) + 1 / (D1c * D2c) + 2 / (D1c * (D12 - a2)) + 1 / (D12 * D2c) - 1 / (D12 * D1c)
    )
    K = D1c + D2c - ac
    z4 = J1c**2 * J2c**2 * (
        2 / (D2c**2 * K) - 1 / (D1c * D2c**2) - 2 / (D2c**2 * (D12 + a1)) + 4 / (D1c * D2c * K)
        + 2 / (D1c**2 * K) + 2 / (D1c**2 * (D12 - a2)) - 1 / (D1c**2 * D2c) + 1 / (D12 * D2c**2)
        - 1 / (D12 * D1c**2)
    )
    return z2, z3, z4
