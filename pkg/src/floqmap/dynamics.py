"""Time-domain Schrodinger integration, Rabi fits and micromotion spectra."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import curve_fit
from scipy.signal import find_peaks

from .floquet import DriveTemplate, StiffnessError, _drive_arrays, _Frame, _solve
from .model import (
    DriveSpec,
    Label,
    SystemSpec,
    build_drive_operator,
    build_static_hamiltonian,
    format_label,
    parse_label,
)
from .statics import DressedSpectrum, exact_dressed_spectrum

NORM_FAIL = 1e-6


class IntegrationError(RuntimeError):
    pass


class ModelMismatch(ValueError):
    pass


class AliasingError(ValueError):
    pass


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # (n_samples, N), lab frame
    populations: Mapping[Label, np.ndarray] = field(default_factory=dict)
    norm_drift: float = 0.0

    def population(self, label) -> np.ndarray:
        return self.populations[parse_label(label)]


def evolve_batch(
    H0: np.ndarray,
    A: np.ndarray,
    drives: Sequence[DriveSpec],
    psi0: np.ndarray,
    duration: float,
    n_samples: int,
    *,
    tol: float = 1e-12,
) -> tuple[np.ndarray, np.ndarray]:
    """Integrate several drives at once on a shared uniform sample grid.

    Returns (times, states) with states of shape (B, n_samples, N).
    """
    drives = list(drives)
    B, N = len(drives), H0.shape[0]
    frame = _Frame(H0, A)
    eps, fp, phi = _drive_arrays(drives)
    psi0 = np.asarray(psi0, complex)
    y0 = np.broadcast_to(psi0, (B, N)).copy()
    times = np.linspace(0.0, duration, n_samples)
    rt = max(tol / np.sqrt(B), 3e-14)

    def rhs(t, y):
        psi = y.reshape(B, N)
        VI = frame.coupling(np.full(B, t), eps, fp, phi)
        return (-1j * np.einsum("bij,bj->bi", VI, psi)).ravel()

    sol = _solve(rhs, y0.ravel(), duration, rt, rt, t_eval=times)
    yI = sol.y.reshape(B, N, n_samples).transpose(0, 2, 1)
    ph = np.stack([np.exp(-1j * frame.phases(times, np.full_like(times, e), np.full_like(times, f), np.full_like(times, p)))
                   for e, f, p in zip(eps, fp, phi)])
    states = ph * yI
    norms = np.linalg.norm(states, axis=2)
    drift = float(np.max(np.abs(norms - np.linalg.norm(psi0))))
    if drift > NORM_FAIL:
        raise IntegrationError(f"norm drift {drift:.2e} exceeds {NORM_FAIL}")
    return times, states


def _projectors(system: SystemSpec, labels, basis: str, spectrum: DressedSpectrum | None):
    labels = [parse_label(l) for l in labels]
    if basis == "dressed":
        sp = spectrum or exact_dressed_spectrum(system)
        return labels, np.stack([sp.vector(l) for l in labels], axis=1)
    from .model import basis_vector

    return labels, np.stack([basis_vector(system, l) for l in labels], axis=1)


def evolve(
    system: SystemSpec,
    drive: DriveSpec,
    psi0: np.ndarray,
    duration: float,
    n_samples: int,
    tol: float = 1e-12,
    *,
    track: Sequence = (),
    basis: str = "dressed",
    spectrum: DressedSpectrum | None = None,
) -> Trajectory:
    H0 = build_static_hamiltonian(system)
    A, _ = build_drive_operator(system, drive)
    norm0 = np.linalg.norm(psi0)
    if abs(norm0 - 1) > 1e-12:
        raise ValueError("initial state must be normalized")
    times, states = evolve_batch(H0, A, [drive], psi0, duration, n_samples, tol=tol)
    states = states[0]
    pops = {}
    if track:
        labs, P = _projectors(system, track, basis, spectrum)
        amp = states @ P.conj()
        pops = {l: np.abs(amp[:, k]) ** 2 for k, l in enumerate(labs)}
    drift = float(np.max(np.abs(np.linalg.norm(states, axis=1) - 1)))
    return Trajectory(times, states, pops, drift)


# ------------------------------------------------------------ Rabi fits

def rabi_model(t, omega, amp):
    return amp * np.sin(0.5 * omega * t) ** 2


def fit_generalized_rabi(t: np.ndarray, P: np.ndarray, *, max_rms: float = 0.05) -> tuple[float, float]:
    """Fit P(t) = A sin^2(Omega t / 2); returns (2g, |Delta|) with A = (2g/Omega)^2."""
    t = np.asarray(t, float)
    P = np.asarray(P, float)
    dt = t[1] - t[0]
    spec = np.abs(np.fft.rfft(P - P.mean()))
    freqs = np.fft.rfftfreq(len(P), dt)
    k = int(np.argmax(spec[1:]) + 1)
    amp0 = float(np.clip(2 * P.mean(), 1e-3, 1.0))
    best = None
    for df in (-0.5, 0.0, 0.5):
        f0 = max(freqs[k] + df * freqs[1], freqs[1] * 0.5)
        try:
            popt, _ = curve_fit(rabi_model, t, P, p0=(2 * np.pi * f0, amp0), maxfev=20000)
        except RuntimeError:
            continue
        rms = float(np.sqrt(np.mean((rabi_model(t, *popt) - P) ** 2)))
        if best is None or rms < best[0]:
            best = (rms, popt)
    if best is None or best[0] > max_rms:
        raise ModelMismatch("population trace is not a single generalized Rabi oscillation")
    omega, amp = abs(best[1][0]), float(np.clip(best[1][1], 0.0, 1.0))
    return omega * np.sqrt(amp), omega * np.sqrt(1.0 - amp)


def chevron(
    system: SystemSpec,
    template: DriveTemplate,
    fp_grid: Sequence[float],
    duration: float,
    n_samples: int,
    initial="01",
    final="10",
    *,
    basis: str = "dressed",
    tol: float = 1e-12,
    spectrum: DressedSpectrum | None = None,
    chunk: int = 64,
) -> tuple[np.ndarray, np.ndarray]:
    """Population of `final` versus (drive frequency, time) starting from `initial`."""
    H0 = build_static_hamiltonian(system)
    drives = [template.at(f) for f in fp_grid]
    A, _ = build_drive_operator(system, drives[0])
    (li, lf), P = _projectors(system, (initial, final), basis, spectrum)
    psi0 = P[:, 0]
    rows = []
    times = None
    for s in range(0, len(drives), chunk):
        times, states = evolve_batch(H0, A, drives[s : s + chunk], psi0, duration, n_samples, tol=tol)
        rows.append(np.abs(states @ P[:, 1].conj()) ** 2)
    return times, np.concatenate(rows, axis=0)


# ----------------------------------------------------------- micromotion

@dataclass(frozen=True)
class Peak:
    frequency: float  # Hz
    amplitude: float  # relative to the largest bin
    label: Label


@dataclass(frozen=True)
class MicromotionSpectrum:
    freqs: np.ndarray  # Hz
    amplitudes: Mapping[Label, np.ndarray]
    peaks: tuple[Peak, ...]
    trajectory: Trajectory | None = None


def population_spectrum(times: np.ndarray, pop: np.ndarray, window: str = "rect") -> tuple[np.ndarray, np.ndarray]:
    """Single-sided amplitude spectrum with the mean removed.

    window="rect" is the raw FFT; "hann" trades a wider main lobe for sidelobes
    that fall off fast enough to stop leakage from strong lines forming false peaks.
    """
    n = len(pop)
    dt = times[1] - times[0]
    if window == "rect":
        w = np.ones(n)
    elif window == "hann":
        w = np.hanning(n)
    else:
        raise ValueError(f"unknown window {window!r}")
    amp = np.abs(np.fft.rfft((pop - pop.mean()) * w)) * 2.0 / w.sum()
    return np.fft.rfftfreq(n, dt), amp


def _interpolated(freqs: np.ndarray, amp: np.ndarray, i: int) -> float:
    # parabola through the log-magnitudes of the peak bin and its neighbours
    if i <= 0 or i >= len(amp) - 1 or min(amp[i - 1], amp[i], amp[i + 1]) <= 0:
        return float(freqs[i])
    a, b, c = np.log(amp[i - 1 : i + 2])
    den = a - 2 * b + c
    off = 0.0 if den == 0 else 0.5 * (a - c) / den
    return float(freqs[i] + np.clip(off, -0.5, 0.5) * (freqs[1] - freqs[0]))


def micromotion_spectrum(
    system: SystemSpec,
    drive: DriveSpec,
    psi0: np.ndarray,
    duration: float = 0.5e-6,
    n_samples: int = 100_000,
    labels: Sequence = ("11",),
    *,
    floor: float = 1e-4,
    fmax: float | None = 500e6,
    max_line: float | None = None,
    basis: str = "dressed",
    spectrum: DressedSpectrum | None = None,
    tol: float = 1e-12,
    window: str = "rect",
    refine: bool = False,
) -> MicromotionSpectrum:
    """FFT of tracked populations; peaks above `floor` relative to the largest bin."""
    nyquist = 0.5 * (n_samples - 1) / duration
    if max_line is not None and max_line >= nyquist:
        raise AliasingError(f"catalogued line {max_line / 1e6:.1f} MHz exceeds Nyquist {nyquist / 1e6:.1f} MHz")
    traj = evolve(system, drive, psi0, duration, n_samples, tol, track=labels, basis=basis, spectrum=spectrum)
    return trajectory_spectrum(traj, floor=floor, fmax=fmax, window=window, refine=refine)


def trajectory_spectrum(
    traj: Trajectory,
    *,
    floor: float = 1e-4,
    fmax: float | None = 500e6,
    window: str = "rect",
    refine: bool = False,
) -> MicromotionSpectrum:
    """Spectra and peaks of the tracked populations of an existing trajectory."""
    amps = {}
    peaks = []
    freqs = None
    for lab, pop in traj.populations.items():
        freqs, amp = population_spectrum(traj.times, pop, window)
        amps[lab] = amp
    top = max(float(a[1:].max()) for a in amps.values()) if amps else 0.0
    for lab, amp in amps.items():
        if top <= 0:
            continue
        # search the full spectrum so the fmax cut cannot manufacture an edge maximum
        idx, _ = find_peaks(amp, height=floor * top)
        for i in idx:
            if i == 0 or (fmax is not None and freqs[i] > fmax):
                continue
            f = _interpolated(freqs, amp, i) if refine else float(freqs[i])
            peaks.append(Peak(f, float(amp[i] / top), lab))
    peaks.sort(key=lambda p: p.frequency)
    return MicromotionSpectrum(freqs, amps, tuple(peaks), traj)


def sideband_lines(catalog, fp: float, n_max: int = 15, fmax: float | None = None, exclude=()) -> list[tuple[float, str, int]]:
    """|Delta_i + n wp| / 2pi for every catalogued transition, in Hz."""
    skip = {frozenset((parse_label(a), parse_label(b))) for a, b in exclude}
    out = []
    for e in catalog:
        for n in range(-n_max, n_max + 1):
            f = abs(e.detuning + n * fp) / (2 * np.pi)
            if fmax is not None and f > fmax:
                continue
            if frozenset((e.bra, e.ket)) in skip and abs(e.detuning + n * fp) < 1e-9 * fp:
                continue
            out.append((f, e.name, n))
    out.sort()
    return out


def compare_peaks(peaks: Sequence[Peak], lines, tolerance: float = 2e6, min_amplitude: float = 1e-3):
    """Match each peak to the nearest catalogued line; returns (matched, unmatched) lists."""
    freqs = np.array([l[0] for l in lines]) if lines else np.zeros(0)
    matched, unmatched = [], []
    for p in peaks:
        if p.amplitude < min_amplitude:
            continue
        if len(freqs) == 0:
            unmatched.append((p, None))
            continue
        k = int(np.argmin(np.abs(freqs - p.frequency)))
        (matched if abs(freqs[k] - p.frequency) <= tolerance else unmatched).append((p, lines[k]))
    return matched, unmatched


def superposition(system: SystemSpec, labels, *, basis: str = "dressed", spectrum: DressedSpectrum | None = None) -> np.ndarray:
    _, P = _projectors(system, labels, basis, spectrum)
    v = P.sum(axis=1)
    return v / np.linalg.norm(v)
