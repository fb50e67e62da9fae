"""Circuit description and truncated Hamiltonian assembly.

All internal frequencies are angular (rad/s). The JSON loader converts from
f/2pi values given in GHz / MHz.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

TWO_PI = 2.0 * np.pi
GHZ = TWO_PI * 1e9
MHZ = TWO_PI * 1e6
KHZ = TWO_PI * 1e3

DEFAULT_DIM_CAP = 1_000_000


class ModelError(ValueError):
    """Invalid system or drive definition."""


class DimensionOverflow(ModelError):
    def __init__(self, dim: int, cap: int):
        super().__init__(f"Hilbert dimension {dim} exceeds cap {cap}")
        self.dim = dim
        self.cap = cap


@dataclass(frozen=True)
class ModeSpec:
    label: str
    frequency: float  # rad/s
    anharmonicity: float = 0.0  # rad/s
    levels: int = 4
    tunable: bool = False
    kind: str = "qubit"  # "qubit" or "coupler"

    def __post_init__(self):
        if self.kind not in ("qubit", "coupler"):
            raise ModelError(f"mode {self.label!r}: kind must be 'qubit' or 'coupler'")
        if self.levels < 2:
            raise ModelError(f"mode {self.label!r}: levels must be >= 2")
        if not self.frequency > 0:
            raise ModelError(f"mode {self.label!r}: frequency must be positive")


@dataclass(frozen=True)
class CouplingSpec:
    pair: tuple[str, str]
    strength: float  # rad/s

    def __post_init__(self):
        a, b = self.pair
        if a == b:
            raise ModelError(f"coupling pair must name two distinct modes, got {self.pair}")
        object.__setattr__(self, "pair", (a, b))
        if not np.isreal(self.strength):
            raise ModelError("coupling strength must be real")


@dataclass(frozen=True)
class DriveSpec:
    target: str
    amplitude: float  # eps_p, rad/s
    frequency: float  # omega_p, rad/s
    phase: float = 0.0

    def __post_init__(self):
        if not self.frequency > 0:
            raise ModelError("drive frequency must be positive")

    def signal(self, t):
        return self.amplitude * np.cos(self.frequency * t + self.phase)

    @property
    def period(self) -> float:
        return TWO_PI / self.frequency


@dataclass(frozen=True)
class SystemSpec:
    modes: tuple[ModeSpec, ...]
    couplings: tuple[CouplingSpec, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(self.modes))
        object.__setattr__(self, "couplings", tuple(self.couplings))
        labels = [m.label for m in self.modes]
        if len(set(labels)) != len(labels):
            raise ModelError(f"duplicate mode labels in {labels}")
        seen = set()
        for c in self.couplings:
            for lab in c.pair:
                if lab not in labels:
                    raise ModelError(f"coupling references unknown mode {lab!r}")
            key = frozenset(c.pair)
            if key in seen:
                raise ModelError(f"more than one coupling for pair {c.pair}")
            seen.add(key)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(m.label for m in self.modes)

    @property
    def levels(self) -> tuple[int, ...]:
        return tuple(m.levels for m in self.modes)

    @property
    def dim(self) -> int:
        return int(np.prod(self.levels))

    def index_of_mode(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise ModelError(f"unknown mode {label!r}") from None

    def mode(self, label: str) -> ModeSpec:
        return self.modes[self.index_of_mode(label)]

    def coupling(self, a: str, b: str) -> float:
        for c in self.couplings:
            if set(c.pair) == {a, b}:
                return c.strength
        return 0.0

    def with_mode(self, label: str, **changes) -> "SystemSpec":
        i = self.index_of_mode(label)
        modes = list(self.modes)
        modes[i] = replace(modes[i], **changes)
        return replace(self, modes=tuple(modes))

    def with_levels(self, levels: Sequence[int]) -> "SystemSpec":
        modes = tuple(replace(m, levels=int(n)) for m, n in zip(self.modes, levels, strict=True))
        return replace(self, modes=modes)

    def with_coupling(self, a: str, b: str, strength: float) -> "SystemSpec":
        cs = [c for c in self.couplings if set(c.pair) != {a, b}]
        cs.append(CouplingSpec((a, b), strength))
        return replace(self, couplings=tuple(cs))

    def scaled_couplings(self, lam: float) -> "SystemSpec":
        return replace(self, couplings=tuple(CouplingSpec(c.pair, lam * c.strength) for c in self.couplings))

    def permuted(self, order: Sequence[str]) -> "SystemSpec":
        """Same circuit with modes reordered."""
        modes = tuple(self.mode(lab) for lab in order)
        return replace(self, modes=modes)


# ---------------------------------------------------------------- basis

Label = tuple[int, ...]


def enumerate_bare_states(system: SystemSpec) -> list[Label]:
    return [tuple(int(k) for k in idx) for idx in np.ndindex(*system.levels)]


def state_index(system: SystemSpec, label: Label | str) -> int:
    label = parse_label(label)
    levels = system.levels
    if len(label) != len(levels):
        raise ModelError(f"label {label} has wrong number of modes for {levels}")
    for n, d in zip(label, levels):
        if not 0 <= n < d:
            raise ModelError(f"label {label} outside truncation {levels}")
    return int(np.ravel_multi_index(label, levels))


def state_label(system: SystemSpec, index: int) -> Label:
    return tuple(int(k) for k in np.unravel_index(index, system.levels))


def parse_label(label: Label | str | Iterable[int]) -> Label:
    if isinstance(label, str):
        s = label.strip().strip("|⟩>")
        return tuple(int(ch) for ch in s)
    return tuple(int(k) for k in label)


def format_label(label: Label) -> str:
    return "".join(str(k) for k in label)


def basis_vector(system: SystemSpec, label: Label | str) -> np.ndarray:
    v = np.zeros(system.dim, dtype=complex)
    v[state_index(system, label)] = 1.0
    return v


# ------------------------------------------------------------ operators

def annihilation(levels: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, levels, dtype=float)), k=1)


def _embed(op: np.ndarray, site: int, levels: Sequence[int]) -> np.ndarray:
    out = np.ones((1, 1))
    for k, d in enumerate(levels):
        out = np.kron(out, op if k == site else np.eye(d))
    return out


def number_operator(system: SystemSpec, label: str) -> np.ndarray:
    i = system.index_of_mode(label)
    d = system.levels[i]
    return _embed(np.diag(np.arange(d, dtype=float)), i, system.levels).astype(complex)


def _check_dim(system: SystemSpec, cap: int) -> None:
    if system.dim > cap:
        raise DimensionOverflow(system.dim, cap)


def diagonal_energies(system: SystemSpec) -> np.ndarray:
    """Uncoupled Duffing energies for every bare state, in basis order."""
    labels = np.array(enumerate_bare_states(system), dtype=float).reshape(system.dim, len(system.modes))
    w = np.array([m.frequency for m in system.modes])
    a = np.array([m.anharmonicity for m in system.modes])
    return labels @ w + (0.5 * labels * (labels - 1)) @ a


def coupling_operator(system: SystemSpec, rwa: bool = False) -> np.ndarray:
    """Sum_ij J_ij X_i X_j, or only its excitation-conserving part when rwa=True."""
    levels = system.levels
    V = np.zeros((system.dim, system.dim))
    for c in system.couplings:
        i, j = (system.index_of_mode(lab) for lab in c.pair)
        ai = _embed(annihilation(levels[i]), i, levels)
        aj = _embed(annihilation(levels[j]), j, levels)
        if rwa:
            term = ai.T @ aj + ai @ aj.T
        else:
            xi = ai + ai.T
            xj = aj + aj.T
            term = xi @ xj
        V += c.strength * term
    # exact symmetry
    return (0.5 * (V + V.T)).astype(complex)


def build_static_hamiltonian(system: SystemSpec, *, dim_cap: int = DEFAULT_DIM_CAP, rwa: bool = False) -> np.ndarray:
    _check_dim(system, dim_cap)
    H = coupling_operator(system, rwa=rwa)
    H[np.diag_indices_from(H)] += diagonal_energies(system)
    return H


def build_drive_operator(system: SystemSpec, drive: DriveSpec) -> tuple[np.ndarray, "callable"]:
    mode = system.mode(drive.target)
    if not mode.tunable:
        raise ModelError(f"drive target {drive.target!r} is not tunable")
    return number_operator(system, drive.target), drive.signal


# ------------------------------------------------------------------ I/O

def system_from_dict(cfg: dict) -> tuple[SystemSpec, DriveSpec | None]:
    try:
        modes = [
            ModeSpec(
                label=str(m["label"]),
                frequency=float(m["freq_GHz"]) * GHZ,
                anharmonicity=float(m.get("anharm_MHz", 0.0)) * MHZ,
                levels=int(m.get("levels", 4)),
                tunable=bool(m.get("tunable", False)),
                kind=str(m.get("kind", "qubit")),
            )
            for m in cfg["modes"]
        ]
        couplings = [CouplingSpec((str(c["a"]), str(c["b"])), float(c["J_MHz"]) * MHZ) for c in cfg.get("couplings", [])]
    except (KeyError, TypeError) as exc:
        raise ModelError(f"malformed config: {exc}") from exc
    system = SystemSpec(tuple(modes), tuple(couplings))
    drive = None
    if cfg.get("drive"):
        d = cfg["drive"]
        drive = DriveSpec(
            target=str(d["target"]),
            amplitude=float(d.get("eps_MHz", 0.0)) * MHZ,
            frequency=float(d["fp_MHz"]) * MHZ,
            phase=float(d.get("phase_rad", 0.0)),
        )
        if not system.mode(drive.target).tunable:
            raise ModelError(f"drive target {drive.target!r} is not tunable")
    return system, drive


def system_to_dict(system: SystemSpec, drive: DriveSpec | None = None) -> dict:
    out = {
        "modes": [
            {
                "label": m.label,
                "freq_GHz": m.frequency / GHZ,
                "anharm_MHz": m.anharmonicity / MHZ,
                "levels": m.levels,
                "tunable": m.tunable,
                "kind": m.kind,
            }
            for m in system.modes
        ],
        "couplings": [{"a": c.pair[0], "b": c.pair[1], "J_MHz": c.strength / MHZ} for c in system.couplings],
    }
    if drive is not None:
        out["drive"] = {
            "target": drive.target,
            "eps_MHz": drive.amplitude / MHZ,
            "fp_MHz": drive.frequency / MHZ,
            "phase_rad": drive.phase,
        }
    return out


def load_config(path: str | Path) -> tuple[SystemSpec, DriveSpec | None]:
    with open(path) as fh:
        try:
            cfg = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ModelError(f"{path}: invalid JSON ({exc})") from exc
    return system_from_dict(cfg)


# ------------------------------------------------------- reference circuits

def qubit_qubit_system(levels: int = 4) -> SystemSpec:
    """Two directly coupled transmons, Q1 tunable."""
    return SystemSpec(
        modes=(
            ModeSpec("Q1", 4.85 * GHZ, -220 * MHZ, levels, tunable=True),
            ModeSpec("Q2", 5.00 * GHZ, -260 * MHZ, levels),
        ),
        couplings=(CouplingSpec(("Q1", "Q2"), 5 * MHZ),),
    )


def qubit_coupler_qubit_system(levels: Sequence[int] = (4, 3, 4)) -> SystemSpec:
    """Two transmons joined through a tunable coupler; mode order Q1, C, Q2."""
    l1, lc, l2 = levels
    return SystemSpec(
        modes=(
            ModeSpec("Q1", 5.801 * GHZ, -205 * MHZ, l1),
            ModeSpec("C", 6.990 * GHZ, -105 * MHZ, lc, tunable=True, kind="coupler"),
            ModeSpec("Q2", 5.921 * GHZ, -300 * MHZ, l2),
        ),
        couplings=(
            CouplingSpec(("Q1", "C"), 100 * MHZ),
            CouplingSpec(("Q2", "C"), 100 * MHZ),
            CouplingSpec(("Q1", "Q2"), 5 * MHZ),
        ),
    )
