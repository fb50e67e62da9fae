"""Floquet quasienergies for a single-tone drive H(t) = H0 + eps cos(wp t + phi) A."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
import scipy.linalg as sla
from scipy.integrate import solve_ivp
from scipy.optimize import linear_sum_assignment

from .model import (
    KHZ,
    MHZ,
    DriveSpec,
    Label,
    ModelError,
    SystemSpec,
    basis_vector,
    build_drive_operator,
    build_static_hamiltonian,
    format_label,
    parse_label,
)
from .statics import DressedSpectrum, TrackingError, assign_by_overlap, exact_dressed_spectrum

UNITARITY_TOL = 1e-9


class StiffnessError(RuntimeError):
    pass


class BracketError(ValueError):
    pass


class UnfoldingError(RuntimeError):
    pass


# ------------------------------------------------------------ drive helpers

@dataclass(frozen=True)
class DriveTemplate:
    """Drive family parameterized by its frequency.

    Exactly one of `eps` (fixed amplitude) and `eps_over_fp` (fixed modulation
    index) is set.
    """

    target: str
    eps: float | None = None
    eps_over_fp: float | None = None
    phase: float = 0.0

    def __post_init__(self):
        if (self.eps is None) == (self.eps_over_fp is None):
            raise ValueError("set exactly one of eps and eps_over_fp")

    def at(self, fp: float) -> DriveSpec:
        eps = self.eps if self.eps is not None else self.eps_over_fp * fp
        return DriveSpec(self.target, eps, fp, self.phase)


def fold(eps, fp):
    """Map quasienergies into [-fp/2, fp/2)."""
    return np.mod(np.asarray(eps) + 0.5 * fp, fp) - 0.5 * fp


def fold_distance(e1, e2, fp):
    d = np.mod(np.asarray(e1) - np.asarray(e2), fp)
    return np.minimum(d, fp - d)


# --------------------------------------------------------------- integrator

class _Frame:
    """Interaction picture with respect to the diagonal of H(t).

    The diagonal phases integrate analytically, which removes the large bare
    energies from the numerical problem.
    """

    def __init__(self, H0: np.ndarray, A: np.ndarray):
        self.d0 = np.real(np.diag(H0)).copy()
        self.a = np.real(np.diag(A)).copy()
        self.V = H0 - np.diag(np.diag(H0))
        self.Aoff = A - np.diag(np.diag(A))
        self.has_aoff = bool(np.any(self.Aoff != 0))

    def phases(self, t: np.ndarray, eps: np.ndarray, fp: np.ndarray, phi: np.ndarray) -> np.ndarray:
        """phi_k(t) for a batch: t, eps, fp, phi have shape (B,) -> (B, N)."""
        integ = (eps / fp) * (np.sin(fp * t + phi) - np.sin(phi))
        return t[:, None] * self.d0[None, :] + integ[:, None] * self.a[None, :]

    def coupling(self, t, eps, fp, phi) -> np.ndarray:
        p = np.exp(1j * self.phases(t, eps, fp, phi))
        M = self.V[None, :, :]
        if self.has_aoff:
            s = eps * np.cos(fp * t + phi)
            M = M + s[:, None, None] * self.Aoff[None, :, :]
        return p[:, :, None] * M * p.conj()[:, None, :]


def _drive_arrays(drives: Sequence[DriveSpec]):
    eps = np.array([d.amplitude for d in drives], float)
    fp = np.array([d.frequency for d in drives], float)
    phi = np.array([d.phase for d in drives], float)
    return eps, fp, phi


def _solve(fun, y0, t_end, rtol, atol, t_eval=None):
    sol = solve_ivp(fun, (0.0, t_end), y0, method="DOP853", rtol=rtol, atol=atol, t_eval=t_eval)
    if sol.status != 0:
        raise StiffnessError(f"integration failed ({sol.message}); lower eps_p or relax the tolerance")
    return sol


def propagators(
    H0: np.ndarray,
    A: np.ndarray,
    drives: Sequence[DriveSpec],
    *,
    tol: float = 1e-12,
    chunk: int = 32,
) -> np.ndarray:
    """One-period propagators U(T, 0) for a batch of drives, shape (B, N, N).

    Each drive is integrated on its own period through a rescaled time
    tau = t / T in [0, 1], so a batch shares one adaptive step sequence.
    """
    drives = list(drives)
    out = []
    for start in range(0, len(drives), chunk):
        out.append(_propagator_chunk(H0, A, drives[start : start + chunk], tol))
    return np.concatenate(out, axis=0) if out else np.zeros((0,) + H0.shape, complex)


def _propagator_chunk(H0, A, drives, tol):
    N = H0.shape[0]
    B = len(drives)
    frame = _Frame(H0, A)
    eps, fp, phi = _drive_arrays(drives)
    T = 2 * np.pi / fp
    # the error norm is an RMS over the whole batch; tighten so each member meets tol
    rt = max(tol / np.sqrt(B), 3e-14)

    def rhs(tau, y):
        U = y.reshape(B, N, N)
        VI = frame.coupling(tau * T, eps, fp, phi)
        return (-1j * T[:, None, None] * (VI @ U)).ravel()

    y0 = np.broadcast_to(np.eye(N, dtype=complex), (B, N, N)).ravel().copy()
    sol = _solve(rhs, y0, 1.0, rt, rt)
    UI = sol.y[:, -1].reshape(B, N, N)
    ph = np.exp(-1j * frame.phases(T, eps, fp, phi))
    return ph[:, :, None] * UI


def one_period_propagator(H0: np.ndarray, A: np.ndarray, drive: DriveSpec, tol: float = 1e-12) -> np.ndarray:
    U = propagators(H0, A, [drive], tol=tol)[0]
    err = unitarity_error(U)
    if err > UNITARITY_TOL:
        raise StiffnessError(f"propagator unitarity error {err:.2e} exceeds {UNITARITY_TOL}")
    return U


def unitarity_error(U: np.ndarray) -> float:
    return float(np.max(np.abs(U.conj().T @ U - np.eye(U.shape[0]))))


# ------------------------------------------------------------- spectrum

@dataclass(frozen=True)
class FloquetResult:
    quasienergies: np.ndarray  # folded, rad/s
    modes: np.ndarray  # columns are |Phi_alpha(0)>
    fp: float
    labels: Mapping[Label, int] = field(default_factory=dict)
    overlaps: Mapping[Label, float] = field(default_factory=dict)
    drive: DriveSpec | None = None
    unitarity: float = 0.0

    def index(self, label) -> int:
        return self.labels[parse_label(label)]

    def quasienergy(self, label) -> float:
        return float(self.quasienergies[self.index(label)])

    def mode(self, label) -> np.ndarray:
        return self.modes[:, self.index(label)]


def _reference(reference, labels):
    if reference is None:
        return None, ()
    if isinstance(reference, DressedSpectrum):
        labs = tuple(labels) if labels is not None else reference.labels
        labs = tuple(parse_label(l) for l in labs)
        return np.stack([reference.vector(l) for l in labs], axis=1), labs
    if isinstance(reference, FloquetResult):
        labs = tuple(labels) if labels is not None else tuple(reference.labels)
        labs = tuple(parse_label(l) for l in labs)
        return np.stack([reference.mode(l) for l in labs], axis=1), labs
    ref = np.asarray(reference)
    if labels is None:
        raise ValueError("labels are required with a raw reference matrix")
    return ref, tuple(parse_label(l) for l in labels)


def floquet_spectrum(
    U: np.ndarray,
    fp: float,
    reference=None,
    labels: Iterable | None = None,
    *,
    floor: float = 0.5,
    strict: bool = True,
    drive: DriveSpec | None = None,
) -> FloquetResult:
    """Quasienergies and t=0 Floquet modes of a one-period propagator.

    Modes are labeled by a globally optimal overlap assignment against the
    reference (dressed static states, or a previous sweep point).
    """
    Tm, Z = sla.schur(U, output="complex")
    lam = np.diag(Tm)
    T = 2 * np.pi / fp
    q = fold(-np.angle(lam) / T, fp)
    ref, labs = _reference(reference, labels)
    lab_map, ov = {}, {}
    if ref is not None:
        cols, w = assign_by_overlap(ref, Z)
        for lab, c, wt in zip(labs, cols, w):
            if strict and wt < floor:
                raise TrackingError(f"Floquet mode for |{format_label(lab)}> has best overlap {wt:.3f} < {floor}")
            lab_map[lab] = int(c)
            ov[lab] = float(wt)
    return FloquetResult(q, Z, fp, lab_map, ov, drive, unitarity_error(U))


class FloquetSolver:
    """Caches the static problem for repeated Floquet evaluations of one system."""

    def __init__(self, system: SystemSpec, target: str, spectrum: DressedSpectrum | None = None, tol: float = 1e-12):
        self.system = system
        self.target = target
        self.H0 = build_static_hamiltonian(system)
        A, _ = build_drive_operator(system, DriveSpec(target, 0.0, 1.0))
        self.A = A
        self.spectrum = spectrum or exact_dressed_spectrum(system)
        self.tol = tol

    def propagators(self, drives: Sequence[DriveSpec]) -> np.ndarray:
        for d in drives:
            if d.target != self.target:
                raise ModelError("drive target differs from the solver target")
        return propagators(self.H0, self.A, drives, tol=self.tol)

    def results(self, drives: Sequence[DriveSpec], labels=None, *, strict: bool = False) -> list[FloquetResult]:
        Us = self.propagators(drives)
        out = []
        for d, U in zip(drives, Us):
            err = unitarity_error(U)
            if err > UNITARITY_TOL:
                raise StiffnessError(f"propagator unitarity error {err:.2e} exceeds {UNITARITY_TOL}")
            out.append(floquet_spectrum(U, d.frequency, self.spectrum, labels, strict=strict, drive=d))
        return out

    def result(self, drive: DriveSpec, labels=None, *, strict: bool = False) -> FloquetResult:
        return self.results([drive], labels, strict=strict)[0]

    def dressed(self, label) -> np.ndarray:
        return self.spectrum.vector(label)


# ----------------------------------------------------------- pair analysis

def pair_modes(result: FloquetResult, va: np.ndarray, vb: np.ndarray) -> tuple[int, int, np.ndarray, np.ndarray]:
    """The two Floquet modes carrying most weight in span{va, vb}."""
    pa = np.abs(va.conj() @ result.modes) ** 2
    pb = np.abs(vb.conj() @ result.modes) ** 2
    # optimal assignment of the two reference states to two distinct modes
    W = np.stack([pa, pb])
    rows, cols = linear_sum_assignment(-W)
    i, j = int(cols[list(rows).index(0)]), int(cols[list(rows).index(1)])
    return i, j, pa, pb


def pair_splitting(result: FloquetResult, va: np.ndarray, vb: np.ndarray) -> float:
    i, j, _, _ = pair_modes(result, va, vb)
    return float(fold_distance(result.quasienergies[i], result.quasienergies[j], result.fp))


def mixing_angle(result: FloquetResult, va: np.ndarray, vb: np.ndarray) -> float:
    """Collision angle from the admixture of the two reference states in their Floquet modes.

    For an isolated two-level anticrossing the modes are
    cos(theta/2)|a> + sin(theta/2)|b> with tan(theta) = |2g/Delta|.
    """
    i, j, pa, pb = pair_modes(result, va, vb)
    qs = []
    for k in (i, j):
        tot = pa[k] + pb[k]
        if tot <= 0:
            continue
        q = pb[k] / tot
        qs.append(min(q, 1 - q))
    q = float(np.mean(qs)) if qs else 0.0
    return float(2 * np.arcsin(np.sqrt(min(max(q, 0.0), 0.5))))


def collision_angle(gap: float, detuning: float) -> float:
    gap, detuning = abs(gap), abs(detuning)
    if gap == 0 and detuning == 0:
        raise ValueError("collision angle undefined for zero gap and zero detuning")
    if detuning == 0:
        return np.pi / 2
    return float(np.arctan(gap / detuning))


@dataclass(frozen=True)
class CollisionRecord:
    transition: tuple[Label, Label]
    gap: float  # 2g
    detuning: float
    angle: float
    fp: float
    scan: tuple[np.ndarray, np.ndarray] | None = field(default=None, repr=False, compare=False)

    def angle_at(self, splitting: float) -> float:
        det = np.sqrt(max(splitting**2 - self.gap**2, 0.0))
        return collision_angle(self.gap, det)


def golden_section(f: Callable[[float], float], a: float, b: float, tol: float, max_iter: int = 200) -> tuple[float, float]:
    invphi = (np.sqrt(5) - 1) / 2
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if abs(b - a) <= tol:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    x = c if fc < fd else d
    return x, min(fc, fd)


def splitting_scan(solver: FloquetSolver, template: DriveTemplate, pair, grid: np.ndarray) -> np.ndarray:
    a, b = (parse_label(x) for x in pair)
    va, vb = solver.dressed(a), solver.dressed(b)
    res = solver.results([template.at(f) for f in grid])
    return np.array([pair_splitting(r, va, vb) for r in res])


def find_anticrossing(
    system: SystemSpec | FloquetSolver,
    template: DriveTemplate,
    transition,
    bracket: tuple[float, float],
    *,
    n_coarse: int = 201,
    tol: float = 1.0 * KHZ,
) -> CollisionRecord:
    """Locate the minimum Floquet splitting of a labeled pair inside a drive-frequency bracket."""
    solver = system if isinstance(system, FloquetSolver) else FloquetSolver(system, template.target)
    a, b = (parse_label(x) for x in transition)
    va, vb = solver.dressed(a), solver.dressed(b)
    grid = np.linspace(bracket[0], bracket[1], n_coarse)
    split = splitting_scan(solver, template, (a, b), grid)
    k = int(np.argmin(split))
    if k == 0 or k == len(grid) - 1:
        raise BracketError(
            f"no interior splitting minimum for {format_label(a)}<->{format_label(b)} in "
            f"[{bracket[0] / 2e6 / np.pi:.4f}, {bracket[1] / 2e6 / np.pi:.4f}] MHz"
        )

    def f(fp):
        return pair_splitting(solver.result(template.at(fp)), va, vb)

    x, gap = golden_section(f, grid[k - 1], grid[k + 1], tol)
    return CollisionRecord((a, b), gap, 0.0, np.pi / 2, x, (grid, split))


def _quadratic_min(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    c2, c1, c0 = np.polyfit(x, y, 2)
    if c2 <= 0:
        k = int(np.argmin(y))
        return float(x[k]), float(y[k])
    xm = -c1 / (2 * c2)
    return float(xm), float(c0 - c1**2 / (4 * c2))


def resonant_gap(
    solver: FloquetSolver,
    template: DriveTemplate,
    pair,
    fp_guess: float,
    window: float,
    *,
    n_coarse: int = 9,
    n_fine: int = 7,
    reference: str = "dressed",
) -> CollisionRecord:
    """Minimum splitting near `fp_guess` from two batched scans.

    Near an isolated anticrossing the squared splitting is quadratic in the
    drive-frequency offset, so a parabola through the fine scan gives the gap
    without a serial line search.
    """
    a, b = (parse_label(x) for x in pair)
    if reference == "dressed":
        va, vb = solver.dressed(a), solver.dressed(b)
    else:
        va, vb = basis_vector(solver.system, a), basis_vector(solver.system, b)
    lo, hi = fp_guess - window, fp_guess + window
    for _ in range(4):
        grid = np.linspace(lo, hi, n_coarse)
        split = np.array([pair_splitting(r, va, vb) for r in solver.results([template.at(f) for f in grid])])
        k = int(np.argmin(split))
        if 0 < k < n_coarse - 1:
            break
        # minimum sits on an edge: slide the window that way
        shift = (hi - lo) * (0.75 if k else -0.75)
        lo, hi = lo + shift, hi + shift
    else:
        raise BracketError(f"no splitting minimum for {format_label(a)}<->{format_label(b)} near {fp_guess / 2e6 / np.pi:.4f} MHz")
    step = grid[1] - grid[0]
    fine = np.linspace(grid[k] - step, grid[k] + step, n_fine)
    fsplit = np.array([pair_splitting(r, va, vb) for r in solver.results([template.at(f) for f in fine])])
    x0, g2 = _quadratic_min(fine - grid[k], fsplit**2)
    gap = float(np.sqrt(max(g2, 0.0)))
    return CollisionRecord((a, b), gap, 0.0, np.pi / 2, grid[k] + x0, (fine, fsplit))


def qubit_strength_sweep(
    system: SystemSpec,
    target: str,
    pair,
    n: int,
    ratios: Sequence[float],
    *,
    fp_static: float = 150 * MHZ,
    window: float = 1 * MHZ,
) -> np.ndarray:
    """Floquet gap/2 of `pair` on its n-th qubit-modulated sideband for each eps/wp.

    For n != 0 the drive frequency is scanned around |E_a - E_b|/|n|. The n = 0
    resonance sits at zero static detuning for any drive frequency, so there the
    driven qubit's mean frequency is scanned instead at fixed `fp_static`.
    """
    a, b = (parse_label(x) for x in pair)
    out = np.zeros(len(ratios))
    if n != 0:
        solver = FloquetSolver(system, target)
        fp0 = abs(solver.spectrum.energy(a) - solver.spectrum.energy(b)) / abs(n)
        for k, x in enumerate(ratios):
            rec = resonant_gap(solver, DriveTemplate(target, eps_over_fp=float(x)), (a, b), fp0, window)
            out[k] = 0.5 * rec.gap
        return out
    idx = system.index_of_mode(target)
    other = [m for k, m in enumerate(system.modes) if k != idx and a[k] != b[k]]
    centre = other[0].frequency if other else system.modes[idx].frequency
    for k, x in enumerate(ratios):
        drive = DriveSpec(target, float(x) * fp_static, fp_static)

        def split_at(offsets):
            vals = []
            for d in offsets:
                sysd = system.with_mode(target, frequency=centre + d)
                H0 = build_static_hamiltonian(sysd)
                A, _ = build_drive_operator(sysd, drive)
                U = one_period_propagator(H0, A, drive, 1e-12)
                res = floquet_spectrum(U, fp_static, drive=drive)
                vals.append(pair_splitting(res, basis_vector(sysd, a), basis_vector(sysd, b)))
            return np.array(vals)

        coarse = np.linspace(-window, window, 9)
        split = split_at(coarse)
        j = int(np.clip(np.argmin(split), 1, 7))
        fine = np.linspace(coarse[j - 1], coarse[j + 1], 7)
        _, g2 = _quadratic_min(fine, split_at(fine) ** 2)
        out[k] = 0.5 * np.sqrt(max(g2, 0.0))
    return out


def coupler_strength_sweep(
    system: SystemSpec,
    pair,
    m: int,
    amplitudes: Sequence[float],
    *,
    window: float = 2 * MHZ,
) -> np.ndarray:
    """Floquet gap/2 of a qubit-qubit pair on its m-th coupler-modulated sideband per amplitude.

    The scan is centred on the dressed detuning corrected by the period-averaged
    Stark shifts of both qubits.
    """
    from .sidebands import qubit_stark_shifts

    coupler = next(md.label for md in system.modes if md.kind == "coupler")
    solver = FloquetSolver(system, coupler)
    a, b = (parse_label(x) for x in pair)
    i1, i2 = 0, len(system.modes) - 1
    out = np.zeros(len(amplitudes))
    for k, eps in enumerate(amplitudes):
        d1, d2 = qubit_stark_shifts(system, float(eps))
        shift = lambda lab: lab[i1] * d1 + lab[i2] * d2
        det = solver.spectrum.energy(a) + shift(a) - solver.spectrum.energy(b) - shift(b)
        fp0 = abs(det) / abs(m)
        rec = resonant_gap(solver, DriveTemplate(coupler, eps=float(eps)), (a, b), fp0, window)
        out[k] = 0.5 * rec.gap
    return out


# ----------------------------------------------------------- landscapes

@dataclass(frozen=True)
class Landscape:
    fp: np.ndarray
    pairs: tuple[tuple[Label, Label], ...]
    theta: np.ndarray  # (n_fp, n_pairs), NaN where tracking failed

    @property
    def max_theta(self) -> np.ndarray:
        return np.nanmax(np.where(np.isnan(self.theta), -np.inf, self.theta), axis=1)

    @property
    def argmax(self) -> list[tuple[Label, Label] | None]:
        out = []
        for row in self.theta:
            if np.all(np.isnan(row)):
                out.append(None)
            else:
                out.append(self.pairs[int(np.nanargmax(row))])
        return out


def theta_map(solver: FloquetSolver, results: Sequence[FloquetResult], pairs, reference: str = "dressed") -> np.ndarray:
    """Mixing-angle estimate per (result, pair).

    `reference` selects the states the Floquet modes are compared with:
    "dressed" static eigenstates or "bare" product states (the frame of the
    qubit-modulated sideband expansion, free of static hybridization).
    """
    if reference not in ("dressed", "bare"):
        raise ValueError("reference must be 'dressed' or 'bare'")
    vecs = {}
    theta = np.full((len(results), len(pairs)), np.nan)
    for p, (a, b) in enumerate(pairs):
        for lab in (a, b):
            if lab not in vecs:
                vecs[lab] = solver.dressed(lab) if reference == "dressed" else basis_vector(solver.system, lab)
        for r, res in enumerate(results):
            try:
                theta[r, p] = mixing_angle(res, vecs[a], vecs[b])
            except (ValueError, np.linalg.LinAlgError):
                pass
    return theta


def max_collision_angle_landscape(
    system: SystemSpec | FloquetSolver,
    template: DriveTemplate,
    grid: Sequence[float],
    pairs: Sequence[tuple],
    *,
    exclude: Sequence[tuple] = (),
    reference: str = "dressed",
) -> Landscape:
    solver = system if isinstance(system, FloquetSolver) else FloquetSolver(system, template.target)
    pairs = tuple((parse_label(a), parse_label(b)) for a, b in pairs)
    skip = {frozenset((parse_label(a), parse_label(b))) for a, b in exclude}
    pairs = tuple(p for p in pairs if frozenset(p) not in skip)
    grid = np.asarray(grid, float)
    try:
        results = list(solver.results([template.at(fp) for fp in grid]))
    except StiffnessError:
        results = []
        for fp in grid:
            try:
                results.append(solver.result(template.at(fp)))
            except StiffnessError:
                results.append(None)
    theta = np.full((len(grid), len(pairs)), np.nan)
    ok = [k for k, r in enumerate(results) if r is not None]
    if ok:
        theta[ok] = theta_map(solver, [results[k] for k in ok], pairs, reference)
    return Landscape(grid, pairs, theta)


# ----------------------------------------------------------- dynamic ZZ

COMPUTATIONAL_QCQ = ((0, 0, 0), (0, 0, 1), (1, 0, 0), (1, 0, 1))
COMPUTATIONAL_QQ = ((0, 0), (0, 1), (1, 0), (1, 1))


def dynamic_zz(
    system: SystemSpec | FloquetSolver,
    drive: DriveSpec,
    *,
    n_ramp: int = 8,
    return_path: bool = False,
):
    """zeta_d = e_101 - e_001 - e_100 + e_000 with branches unfolded along an amplitude ramp."""
    solver = system if isinstance(system, FloquetSolver) else FloquetSolver(system, drive.target)
    n_modes = len(solver.system.modes)
    labs = COMPUTATIONAL_QCQ if n_modes == 3 else COMPUTATIONAL_QQ
    amps = np.linspace(0.0, drive.amplitude, n_ramp + 1)
    drives = [DriveSpec(drive.target, a, drive.frequency, drive.phase) for a in amps]
    Us = solver.propagators(drives)
    fp = drive.frequency
    prev_vecs = np.stack([solver.dressed(l) for l in labs], axis=1)
    prev_vals = np.array([solver.spectrum.energy(l) for l in labs])
    path = []
    for k, U in enumerate(Us):
        res = floquet_spectrum(U, fp, prev_vecs, labs, strict=False, drive=drives[k])
        idx = [res.index(l) for l in labs]
        q = res.quasienergies[idx]
        unf = q + fp * np.round((prev_vals - q) / fp)
        if k > 0 and np.max(np.abs(unf - prev_vals)) > fp / 4:
            raise UnfoldingError("quasienergy branch moved more than wp/4 in one ramp step; refine the ramp")
        prev_vals = unf
        prev_vecs = res.modes[:, idx]
        e000, e001, e100, e101 = unf if n_modes == 3 else (unf[0], unf[1], unf[2], unf[3])
        path.append(e101 - e001 - e100 + e000)
    zeta = path[-1]
    if abs(zeta) > fp / 4:
        raise UnfoldingError("dynamic ZZ comparable to wp/2; unfolding is ambiguous")
    return (zeta, amps, np.array(path)) if return_path else zeta


# ------------------------------------------------------------ Sambe space

def sambe_matrix(H0: np.ndarray, A: np.ndarray, drive: DriveSpec, cutoff: int) -> np.ndarray:
    N = H0.shape[0]
    K = cutoff
    M = np.zeros((N * (2 * K + 1),) * 2, complex)
    # H(t) = sum_m H^(m) e^{i m wp t}; only m = +-1 survive for a cosine drive
    Hp = 0.5 * drive.amplitude * np.exp(1j * drive.phase) * A
    Hm = 0.5 * drive.amplitude * np.exp(-1j * drive.phase) * A
    for bi, n in enumerate(range(-K, K + 1)):
        sl = slice(bi * N, (bi + 1) * N)
        M[sl, sl] = H0 + n * drive.frequency * np.eye(N)
        if bi + 1 < 2 * K + 1:
            sl2 = slice((bi + 1) * N, (bi + 2) * N)
            # row block n, column block n+1 carries H^(n-(n+1)) = H^(-1)
            M[sl, sl2] = Hm
            M[sl2, sl] = Hp
    return M


def sambe_spectrum(H0: np.ndarray, A: np.ndarray, drive: DriveSpec, cutoff: int) -> np.ndarray:
    """Folded quasienergies from the truncated extended-space matrix, one per physical state.

    Among the replicas, each bare state keeps the eigenvector with the largest
    weight on its central-block component.
    """
    N = H0.shape[0]
    M = sambe_matrix(H0, A, drive, cutoff)
    w, v = np.linalg.eigh(M)
    central = v[cutoff * N : (cutoff + 1) * N, :]
    W = np.abs(central) ** 2
    rows, cols = linear_sum_assignment(-W)
    return fold(w[cols[np.argsort(rows)]], drive.frequency)


def match_quasienergies(q1: np.ndarray, q2: np.ndarray, fp: float) -> float:
    """Largest folded distance after optimally pairing two quasienergy sets."""
    D = fold_distance(q1[:, None], q2[None, :], fp)
    r, c = linear_sum_assignment(D)
    return float(np.max(D[r, c]))
