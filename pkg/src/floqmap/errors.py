"""Population-error budgets from independent parasitic sideband channels."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq

from .model import DriveSpec, ModelError, Label, SystemSpec, parse_label
from .sidebands import (
    TransitionEntry,
    _which_for,
    catalog_qcq,
    catalog_qq,
    coupler_mod_strength,
    find_entry,
    fourier_coupling_harmonics,
    generate_catalog,
    qubit_mod_strength,
    qubit_stark_shifts,
    resonant_order,
)
from .statics import DressedSpectrum, exact_dressed_spectrum

DEFAULT_HARMONICS = 15
# harmonics above this use the Fourier route; finite differences degrade past ~6th order
TAYLOR_MAX_ORDER = 4
PULSES = {"pi": 1.0, "half_pi": 0.5, "2pi": 2.0}


class BudgetError(ValueError):
    pass


class ResolveError(RuntimeError):
    """Target strength cannot be reached by any drive amplitude."""


@dataclass(frozen=True)
class Contribution:
    entry: TransitionEntry
    n: int
    g: float  # rad/s
    detuning: float  # rad/s
    p: float
    bound: float

    @property
    def group(self) -> str:
        return channel_group(self.entry)


@dataclass(frozen=True)
class ErrorBudget:
    target: TransitionEntry
    n_target: int
    drive: DriveSpec
    g_target: float
    pulse: str
    contributions: tuple[Contribution, ...]
    total: float = field(init=False)
    bound: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "total", float(sum(c.p for c in self.contributions)))
        object.__setattr__(self, "bound", float(sum(c.bound for c in self.contributions)))

    def by_group(self) -> dict[str, tuple[float, float]]:
        out: dict[str, list[float]] = {}
        for c in self.contributions:
            acc = out.setdefault(c.group, [0.0, 0.0])
            acc[0] += c.p
            acc[1] += c.bound
        return {k: (v[0], v[1]) for k, v in out.items()}

    def rotating_totals(self) -> dict[str, float]:
        out = {"co": 0.0, "counter": 0.0}
        for c in self.contributions:
            out[c.entry.rotating] += c.p
        return out

    def to_dict(self) -> dict:
        mhz = 2e6 * np.pi
        return {
            "target": self.target.name,
            "n_target": self.n_target,
            "eps_MHz": self.drive.amplitude / mhz,
            "fp_MHz": self.drive.frequency / mhz,
            "g_target_MHz": self.g_target / mhz,
            "pulse": self.pulse,
            "P_e": self.total,
            "P_e_bound": self.bound,
            "contributions": [
                {
                    "transition": c.entry.name,
                    "rotating": c.entry.rotating,
                    "channel": c.entry.channel,
                    "n": c.n,
                    "g_MHz": c.g / mhz,
                    "detuning_MHz": c.detuning / mhz,
                    "P_e": c.p,
                    "P_e_bound": c.bound,
                }
                for c in self.contributions
            ],
        }


def channel_group(entry: TransitionEntry) -> str:
    """Bar grouping used in budget plots: co-rotating qubit rows by name, the rest pooled."""
    if entry.channel == "coupler":
        return "coupler"
    if entry.rotating == "counter":
        return "counter"
    return entry.name


def rabi_terms(g: float, detuning: float, g_target: float, pulse: str = "pi") -> tuple[float, float]:
    """(P_e, bound) for one channel with coupling g and detuning over the target pulse."""
    if not g_target > 0:
        raise BudgetError("target strength must be positive")
    two_g2 = (2 * g) ** 2
    omega2 = two_g2 + detuning**2
    if omega2 == 0:
        return 0.0, 0.0
    bound = two_g2 / omega2
    k = PULSES[pulse]
    p = bound * np.sin(k * np.pi * np.sqrt(omega2) / (4 * g_target)) ** 2
    return float(p), float(bound)


# ------------------------------------------------------------ strengths

class _QubitScheme:
    def __init__(self, system: SystemSpec, drive: DriveSpec):
        self.k = system.index_of_mode(drive.target)
        self.eps, self.fp = drive.amplitude, drive.frequency

    def strength(self, e: TransitionEntry, n: int) -> float:
        dk = abs(e.bra[self.k] - e.ket[self.k])
        if dk == 0:
            return e.base_strength if n == 0 else 0.0
        return e.base_strength * float(qubit_mod_strength(1.0, n, dk * self.eps, self.fp))

    def shift(self, label: Label) -> float:
        return 0.0


class _CouplerScheme:
    def __init__(self, system: SystemSpec, drive: DriveSpec, n_max: int):
        self.system = system
        self.eps, self.fp = drive.amplitude, drive.frequency
        self.n_max = n_max
        self._cache: dict[str, np.ndarray] = {}
        self.d1, self.d2 = qubit_stark_shifts(system, self.eps)

    def _harmonics(self, which: str) -> np.ndarray:
        if which not in self._cache:
            g = fourier_coupling_harmonics(self.system, which, self.eps, self.n_max, samples=max(128, 4 * self.n_max + 8))
            for m in range(1, min(TAYLOR_MAX_ORDER, self.n_max) + 1):
                g[m] = coupler_mod_strength(self.system, which, m, self.eps)
            self._cache[which] = g
        return self._cache[which]

    def strength(self, e: TransitionEntry, n: int) -> float:
        if e.channel == "coupler":
            return e.base_strength * float(qubit_mod_strength(1.0, n, self.eps, self.fp))
        try:
            which = _which_for(e)
            scale = 1.0
        except ModelError:
            # counter-rotating qubit rows follow the 001-100 effective coupling
            which = "12"
            scale = e.base_strength / self._static("12")
        return scale * float(self._harmonics(which)[abs(n)])

    def _static(self, which: str) -> float:
        return float(fourier_coupling_harmonics(self.system, which, 0.0, 0, samples=4)[0])

    def shift(self, label: Label) -> float:
        return label[0] * self.d1 + label[2] * self.d2


def _catalog(system: SystemSpec, dressed: bool, spectrum: DressedSpectrum | None):
    if len(system.modes) == 2:
        return catalog_qq(system, dressed=dressed, spectrum=spectrum)
    if len(system.modes) == 3:
        return catalog_qcq(system, dressed=dressed, spectrum=spectrum)
    if dressed:
        sp = spectrum or exact_dressed_spectrum(system)
        return generate_catalog(system, energies=sp.energy)
    return generate_catalog(system)


def population_error(
    system: SystemSpec,
    scheme: str,
    target,
    drive: DriveSpec,
    harmonics: int = DEFAULT_HARMONICS,
    *,
    n_target: int | None = None,
    pulse: str = "pi",
    dressed: bool = True,
    spectrum: DressedSpectrum | None = None,
    catalog: Sequence[TransitionEntry] | None = None,
) -> ErrorBudget:
    """Independent-channel population error of every catalogued sideband except the target."""
    if pulse not in PULSES:
        raise BudgetError(f"pulse must be one of {sorted(PULSES)}")
    cat = list(catalog) if catalog is not None else _catalog(system, dressed, spectrum)
    if isinstance(target, TransitionEntry):
        tgt = find_entry(cat, target.bra, target.ket)
    else:
        tgt = find_entry(cat, *target)
    if scheme == "qubit":
        model = _QubitScheme(system, drive)
    elif scheme == "coupler":
        if len(system.modes) != 3:
            raise BudgetError("coupler scheme needs a qubit-coupler-qubit system")
        model = _CouplerScheme(system, drive, harmonics)
    else:
        raise BudgetError("scheme must be 'qubit' or 'coupler'")
    nt = resonant_order(tgt, drive.frequency) if n_target is None else n_target
    g_t = abs(model.strength(tgt, nt))
    if not g_t > 0:
        raise BudgetError("target strength vanishes at this operating point")
    contributions = []
    for e in cat:
        det0 = e.detuning + _shift_delta(model, e)
        for n in range(-harmonics, harmonics + 1):
            if e is tgt and n == nt:
                continue
            g = model.strength(e, n)
            if g == 0.0:
                continue
            d = det0 + n * drive.frequency
            p, b = rabi_terms(g, d, g_t, pulse)
            contributions.append(Contribution(e, n, g, d, p, b))
    return ErrorBudget(tgt, nt, drive, g_t, pulse, tuple(contributions))


def _shift_delta(model, e: TransitionEntry) -> float:
    upper, lower = _upper_lower(e)
    return model.shift(lower) - model.shift(upper)


def _upper_lower(e: TransitionEntry) -> tuple[Label, Label]:
    # mirrors the catalog convention: "upper" holds the extra quantum on the first mode of the pair
    diff = [k for k, (a, b) in enumerate(zip(e.bra, e.ket)) if a != b]
    i = diff[0]
    return (e.ket, e.bra) if e.ket[i] > e.bra[i] else (e.bra, e.ket)


def per_harmonic_breakdown(budget: ErrorBudget) -> dict[int, tuple[float, str]]:
    """Harmonic n -> (summed P_e, dominant transition)."""
    acc: dict[int, dict[str, float]] = {}
    for c in budget.contributions:
        acc.setdefault(c.n, {}).setdefault(c.entry.name, 0.0)
        acc[c.n][c.entry.name] += c.p
    out = {}
    for n in sorted(acc):
        names = acc[n]
        out[n] = (float(sum(names.values())), max(names, key=names.get))
    return out


# ------------------------------------------------------------- sweeps

@dataclass(frozen=True)
class ResonanceSweep:
    parameter: np.ndarray
    resonance: np.ndarray  # rad/s
    eps: np.ndarray  # rad/s
    g_target: np.ndarray  # achieved 2g, rad/s
    total_bound: np.ndarray
    components: dict[str, np.ndarray]
    peaks: tuple[tuple[float, str, int], ...]  # (resonance, group, harmonic)


def solve_amplitude(
    base: float,
    fp: float,
    n: int,
    two_g: float,
    strength: Callable[[float], float] | None = None,
    x_max: float | None = None,
) -> float:
    """Smallest eps with |2 g(eps)| = two_g on the first Bessel lobe."""
    if strength is None:
        def strength(eps):
            return abs(qubit_mod_strength(base, n, eps, fp))

        from scipy.special import jnp_zeros

        x_max = x_max or (float(jnp_zeros(abs(n), 1)[0]) if n != 0 else 0.0)
    if not x_max:
        raise ResolveError("harmonic order has no rising lobe")
    hi = x_max * fp
    f = lambda e: 2 * strength(e) - two_g
    if f(hi) < 0:
        raise ResolveError(f"target 2g = {two_g / 2e6 / np.pi:.3f} MHz is unreachable (max {2 * strength(hi) / 2e6 / np.pi:.3f} MHz)")
    return float(brentq(f, 0.0, hi, xtol=1e-9 * hi, rtol=1e-14))


def error_vs_resonance_sweep(
    system_at: Callable[[float], SystemSpec],
    target,
    two_g: float,
    grid: Sequence[float],
    *,
    drive_target: str,
    n_target: int = 1,
    harmonics: int = DEFAULT_HARMONICS,
    phase: float = 0.0,
) -> ResonanceSweep:
    """Upper-bound error versus the target resonance with 2g held fixed (qubit modulation).

    `system_at(x)` builds the system for each grid value; the drive frequency is
    placed on the target's n-th dressed resonance and eps re-solved so that the
    target strength stays at `two_g`.
    """
    a, b = (parse_label(t) for t in target)
    res, epss, gs, totals = [], [], [], []
    comps: dict[str, list[float]] = {}
    per_point_n: list[dict[str, tuple[float, int]]] = []
    for x in grid:
        system = system_at(float(x))
        cat = _catalog(system, True, None)
        tgt = find_entry(cat, a, b)
        fp = abs(tgt.detuning) / abs(n_target)
        n_signed = resonant_order(tgt, fp)
        eps = solve_amplitude(tgt.base_strength, fp, n_signed, two_g)
        drive = DriveSpec(drive_target, eps, fp, phase)
        budget = population_error(system, "qubit", (a, b), drive, harmonics, n_target=n_signed, catalog=cat)
        res.append(fp)
        epss.append(eps)
        gs.append(2 * budget.g_target)
        totals.append(budget.bound)
        groups: dict[str, float] = {}
        best: dict[str, tuple[float, int]] = {}
        for c in budget.contributions:
            groups[c.group] = groups.get(c.group, 0.0) + c.bound
            if c.bound > best.get(c.group, (0.0, 0))[0]:
                best[c.group] = (c.bound, c.n)
        for k in set(comps) | set(groups):
            comps.setdefault(k, [0.0] * (len(res) - 1)).append(groups.get(k, 0.0))
        per_point_n.append(best)
    components = {k: np.array(v) for k, v in comps.items()}
    peaks = []
    for k, v in components.items():
        for i in range(1, len(v) - 1):
            if v[i] > v[i - 1] and v[i] >= v[i + 1]:
                peaks.append((res[i], k, per_point_n[i].get(k, (0.0, 0))[1]))
    peaks.sort()
    return ResonanceSweep(
        np.asarray(grid, float), np.array(res), np.array(epss), np.array(gs),
        np.array(totals), components, tuple(peaks),
    )
