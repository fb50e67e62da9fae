"""Frequency allocation as a constraint-satisfaction problem.

Constraints are small expression trees over decision variables (mode
frequencies and anharmonicities, rad/s). The same tree evaluates on floats
for `check`, on intervals for branch-and-prune, on dressed energies for
refinement, and renders to SMT-LIB s-expressions for external solvers.
"""
from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.special import jnp_zeros, jv

from .model import (
    GHZ,
    KHZ,
    MHZ,
    CouplingSpec,
    Label,
    ModeSpec,
    SystemSpec,
    format_label,
    parse_label,
    qubit_coupler_qubit_system,
    qubit_qubit_system,
)

RESOLUTION = 10 * KHZ
RESONANCE_TOL = 1 * KHZ
DEFAULT_MARGIN = 10.0
DEFAULT_HARMONICS = 15
# eps/wp for lattice tones; J_2 is half its value at the J_1 maximum
LATTICE_RATIO = 1.2
OBJECTIVES = ("none", "max_worst_margin", "min_bound")


class AllocationError(ValueError):
    pass


class Unsatisfiable(RuntimeError):
    def __init__(self, message: str, violated: Sequence[str] = ()):
        super().__init__(message)
        self.violated = tuple(violated)


# ============================================================ intervals

class Interval:
    __slots__ = ("lo", "hi")

    def __init__(self, lo: float, hi: float | None = None):
        self.lo = float(lo)
        self.hi = float(lo if hi is None else hi)

    def __repr__(self):
        return f"[{self.lo:.6g}, {self.hi:.6g}]"

    @staticmethod
    def of(x) -> "Interval":
        return x if isinstance(x, Interval) else Interval(x)

    def __add__(self, o):
        o = Interval.of(o)
        return Interval(self.lo + o.lo, self.hi + o.hi)

    __radd__ = __add__

    def __neg__(self):
        return Interval(-self.hi, -self.lo)

    def __sub__(self, o):
        return self + (-Interval.of(o))

    def __rsub__(self, o):
        return Interval.of(o) - self

    def __mul__(self, o):
        o = Interval.of(o)
        p = (self.lo * o.lo, self.lo * o.hi, self.hi * o.lo, self.hi * o.hi)
        return Interval(min(p), max(p))

    __rmul__ = __mul__

    def __truediv__(self, o):
        o = Interval.of(o)
        if o.lo <= 0 <= o.hi:
            return Interval(-math.inf, math.inf)
        return self * Interval(1 / o.hi, 1 / o.lo)

    def __rtruediv__(self, o):
        return Interval.of(o) / self

    def __abs__(self):
        if self.lo >= 0:
            return Interval(self.lo, self.hi)
        if self.hi <= 0:
            return Interval(-self.hi, -self.lo)
        return Interval(0.0, max(-self.lo, self.hi))

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)


# ========================================================== expressions

class Expr:
    def eval(self, env: Mapping):  # pragma: no cover - abstract
        raise NotImplementedError

    def smt(self, scale: float) -> str:  # pragma: no cover - abstract
        raise NotImplementedError

    def variables(self) -> set[str]:
        return set()

    def opaque(self) -> bool:
        return False

    def __add__(self, o):
        return Bin("+", self, _wrap(o))

    def __radd__(self, o):
        return Bin("+", _wrap(o), self)

    def __sub__(self, o):
        return Bin("-", self, _wrap(o))

    def __rsub__(self, o):
        return Bin("-", _wrap(o), self)

    def __mul__(self, o):
        return Bin("*", self, _wrap(o))

    def __rmul__(self, o):
        return Bin("*", _wrap(o), self)

    def __truediv__(self, o):
        return Bin("/", self, _wrap(o))

    def __rtruediv__(self, o):
        return Bin("/", _wrap(o), self)

    def __neg__(self):
        return Bin("*", Const(-1.0, dimensionless=True), self)

    def __abs__(self):
        return Abs(self)


def _wrap(x) -> Expr:
    return x if isinstance(x, Expr) else Const(float(x), dimensionless=True)


def _num(x: float) -> str:
    s = f"{x:.12g}"
    if "e" in s or "E" in s:
        s = f"{x:.12f}".rstrip("0").rstrip(".") or "0"
    return f"(- {s[1:]})" if s.startswith("-") else s


@dataclass(frozen=True, eq=False)
class Const(Expr):
    value: float
    dimensionless: bool = False

    def eval(self, env):
        return self.value

    def smt(self, scale):
        return _num(self.value if self.dimensionless else self.value / scale)


@dataclass(frozen=True, eq=False)
class Var(Expr):
    name: str

    def eval(self, env):
        return env[self.name]

    def smt(self, scale):
        return _smt_name(self.name)

    def variables(self):
        return {self.name}


@dataclass(frozen=True, eq=False)
class Bin(Expr):
    op: str
    a: Expr
    b: Expr

    def eval(self, env):
        x, y = self.a.eval(env), self.b.eval(env)
        if self.op == "+":
            return x + y
        if self.op == "-":
            return x - y
        if self.op == "*":
            return x * y
        return x / y

    def smt(self, scale):
        return f"({self.op} {self.a.smt(scale)} {self.b.smt(scale)})"

    def variables(self):
        return self.a.variables() | self.b.variables()

    def opaque(self):
        return self.a.opaque() or self.b.opaque()


@dataclass(frozen=True, eq=False)
class Abs(Expr):
    a: Expr

    def eval(self, env):
        return abs(self.a.eval(env))

    def smt(self, scale):
        s = self.a.smt(scale)
        return f"(ite (>= {s} 0) {s} (- {s}))"

    def variables(self):
        return self.a.variables()

    def opaque(self):
        return self.a.opaque()


@dataclass(frozen=True, eq=False)
class Energy(Expr):
    """Energy of a product-state label; bare Duffing form unless the env carries a dressed value."""

    label: Label
    terms: tuple[tuple[int, Expr, Expr], ...]  # (n, frequency, anharmonicity) per occupied mode

    def eval(self, env):
        key = "E:" + format_label(self.label)
        if key in env:
            return env[key]
        out = 0.0
        for n, f, a in self.terms:
            out = out + n * f.eval(env) + (n * (n - 1) // 2) * a.eval(env)
        return out

    def smt(self, scale):
        parts = []
        for n, f, a in self.terms:
            parts.append(f"(* {n} {f.smt(scale)})")
            if n > 1:
                parts.append(f"(* {n * (n - 1) // 2} {a.smt(scale)})")
        if not parts:
            return "0"
        return parts[0] if len(parts) == 1 else f"(+ {' '.join(parts)})"

    def variables(self):
        out = set()
        for n, f, a in self.terms:
            out |= f.variables()
            if n > 1:
                out |= a.variables()
        return out


@dataclass(frozen=True, eq=False)
class Opaque(Expr):
    """Point-evaluated strength (no interval form); intervals get a loose envelope around the midpoint."""

    name: str
    fn: Callable[[Mapping[str, float]], float]
    deps: frozenset[str]
    envelope: tuple[float, float] = (0.5, 2.0)
    template_value: float = 0.0

    def eval(self, env):
        if any(isinstance(v, Interval) for v in env.values()):
            mid = {k: (v.mid if isinstance(v, Interval) else v) for k, v in env.items()}
            v = abs(self.fn(mid))
            return Interval(self.envelope[0] * v, self.envelope[1] * v)
        return self.fn(env)

    def smt(self, scale):
        return _smt_name(self.name)

    def variables(self):
        return set(self.deps)

    def opaque(self):
        return True


def _smt_name(name: str) -> str:
    return name.replace(":", "_").replace(".", "_").replace("<->", "_")


# ========================================================= constraints

@dataclass(frozen=True, eq=False)
class Constraint:
    kind: str  # resonance-equality | parametric-limit | detuning-margin | zz-cap | box-bound
    name: str
    lhs: Expr
    rhs: Expr
    margin: float = 1.0
    tol: float = RESONANCE_TOL
    meta: Mapping = field(default_factory=dict)

    def scaled(self, s: float) -> "Constraint":
        if self.kind in ("parametric-limit", "detuning-margin"):
            return replace(self, margin=self.margin * s)
        return self

    def interval_status(self, env) -> tuple[str, float]:
        """('pass'|'fail'|'unknown', upper bound on achieved/required) over an interval box."""
        L = Interval.of(self.lhs.eval(env))
        R = Interval.of(self.rhs.eval(env))
        if self.kind in ("parametric-limit", "detuning-margin"):
            req = abs(R) * self.margin
            ub = math.inf if req.lo <= 0 else L.hi / req.lo
            if L.lo >= req.hi:
                return "pass", ub
            if L.hi < req.lo:
                return "fail", ub
            return "unknown", ub
        if self.kind == "zz-cap":
            Ll = abs(L)
            ub = math.inf if Ll.lo <= 0 else R.hi / Ll.lo
            if Ll.hi <= R.lo:
                return "pass", ub
            if Ll.lo > R.hi:
                return "fail", ub
            return "unknown", ub
        if self.kind == "box-bound":
            lo, hi = self.meta["bounds"]
            if L.lo >= lo and L.hi <= hi:
                return "pass", math.inf
            if L.hi < lo or L.lo > hi:
                return "fail", 0.0
            return "unknown", math.inf
        return "pass", math.inf  # resonance rows hold by substitution during search


@dataclass(frozen=True)
class ConstraintResult:
    name: str
    kind: str
    lhs: float
    required: float
    ratio: float  # achieved / required for inequality rows
    passed: bool
    error: str = ""

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "kind": self.kind,
            "lhs_MHz": self.lhs / MHZ if math.isfinite(self.lhs) else None,
            "required_MHz": self.required / MHZ if math.isfinite(self.required) else None,
            "ratio": self.ratio if math.isfinite(self.ratio) else None,
            "passed": self.passed,
            "error": self.error,
        }


def _evaluate(c: Constraint, env: Mapping[str, float]) -> ConstraintResult:
    try:
        with np.errstate(all="raise"):
            L = float(c.lhs.eval(env))
            R = float(c.rhs.eval(env))
    except (ZeroDivisionError, FloatingPointError, ArithmeticError) as exc:
        return ConstraintResult(c.name, c.kind, math.nan, math.nan, 0.0, False, f"singular: {exc}")
    if not (math.isfinite(L) and math.isfinite(R)):
        return ConstraintResult(c.name, c.kind, L, R, 0.0, False, "non-finite expression")
    if c.kind in ("parametric-limit", "detuning-margin"):
        req = c.margin * abs(R)
        ratio = math.inf if req == 0 else L / req
        return ConstraintResult(c.name, c.kind, L, req, ratio, L >= req)
    if c.kind == "zz-cap":
        ratio = math.inf if L == 0 else R / abs(L)
        return ConstraintResult(c.name, c.kind, abs(L), R, ratio, abs(L) <= R)
    if c.kind == "box-bound":
        lo, hi = c.meta["bounds"]
        ok = lo <= L <= hi
        return ConstraintResult(c.name, c.kind, L, lo, math.inf if ok else 0.0, ok)
    diff = abs(L - R)
    return ConstraintResult(c.name, c.kind, L, R, math.inf if diff <= c.tol else c.tol / diff, diff <= c.tol)


# ============================================================ problems

@dataclass(frozen=True)
class Target:
    pair: tuple[Label, Label]
    n: int = 1
    drive: str = ""  # modulated mode label
    ratio: float | None = None  # eps_p / w_p; None -> maximizer of |J_n|
    name: str = ""

    @property
    def key(self) -> str:
        return self.name or f"{format_label(self.pair[0])}<->{format_label(self.pair[1])}"

    @property
    def x(self) -> float:
        if self.ratio is not None:
            return float(self.ratio)
        return float(jnp_zeros(abs(self.n), 1)[0])


@dataclass(frozen=True)
class AllocationProblem:
    system: SystemSpec  # template; decision variables override its frequencies
    scheme: str
    topology: str
    targets: tuple[Target, ...]
    variables: Mapping[str, tuple[float, float]]
    drives: Mapping[str, Expr]  # fp name -> resonance expression
    constraints: tuple[Constraint, ...]
    margin: float = DEFAULT_MARGIN
    objective: str = "none"  # none | max_worst_margin | min_bound
    resolution: float = RESOLUTION
    harmonics: int = DEFAULT_HARMONICS
    kappa: float = 1.0

    def scaled(self, s: float) -> "AllocationProblem":
        return replace(self, constraints=tuple(c.scaled(s) for c in self.constraints), margin=self.margin * s)

    def with_margin(self, margin: float) -> "AllocationProblem":
        return self.scaled(margin / self.margin)

    def free_variables(self) -> list[str]:
        used = set()
        for c in self.constraints:
            used |= c.lhs.variables() | c.rhs.variables()
        for e in self.drives.values():
            used |= e.variables()
        return [v for v in self.variables if v in used and self.variables[v][1] > self.variables[v][0]]

    def template_value(self, name: str) -> float:
        mode, attr = name.split(".")
        m = self.system.mode(mode)
        return m.frequency if attr == "freq" else m.anharmonicity

    def system_at(self, assignment: Mapping[str, float]) -> SystemSpec:
        sysm = self.system
        for name in self.variables:
            if name in assignment:
                mode, attr = name.split(".")
                key = "frequency" if attr == "freq" else "anharmonicity"
                sysm = sysm.with_mode(mode, **{key: float(assignment[name])})
        return sysm


def _var_name(mode: str, attr: str) -> str:
    return f"{mode}.{attr}"


def _fp_name(t: Target) -> str:
    return "fp:" + t.key


def _mode_exprs(system: SystemSpec, variables: Mapping[str, tuple[float, float]]):
    out = []
    for m in system.modes:
        fn, an = _var_name(m.label, "freq"), _var_name(m.label, "anharm")
        f = Var(fn) if fn in variables else Const(m.frequency)
        a = Var(an) if an in variables else Const(m.anharmonicity)
        out.append((f, a))
    return out


def _energy(system: SystemSpec, modes, label: Label) -> Energy:
    terms = tuple((n, f, a) for n, (f, a) in zip(label, modes) if n)
    return Energy(tuple(label), terms)


def _upper_lower(a: Label, b: Label) -> tuple[Label, Label]:
    i = next(k for k, (x, y) in enumerate(zip(a, b)) if x != y)
    return (a, b) if a[i] > b[i] else (b, a)


def _detuning(system, modes, a: Label, b: Label) -> Expr:
    upper, lower = _upper_lower(a, b)
    return _energy(system, modes, lower) - _energy(system, modes, upper)


def _sw_exprs(f1, fc, f2, a1, a2, J1c, J2c, J12) -> dict[str, Expr]:
    """Second-order coupler-eliminated strengths as expression trees."""
    D1, D2 = f1 - fc, f2 - fc
    S1, S2 = f1 + fc, f2 + fc
    JJ = Const(J1c * J2c / MHZ) * Const(MHZ)  # keep the constant in frequency^2 units
    i1, i2, s1, s2 = 1.0 / D1, 1.0 / D2, 1.0 / S1, 1.0 / S2
    r2 = math.sqrt(2.0)
    return {
        "12": Const(J12) + Const(0.5, True) * JJ * (i1 + i2 - s1 - s2),
        "101_002": Const(r2 * J12) + Const(1 / r2, True) * JJ * (i1 + 1.0 / (D2 + a2) - s1 - 1.0 / (S2 + a2)),
        "101_200": Const(r2 * J12) + Const(1 / r2, True) * JJ * (1.0 / (D1 + a1) + i2 - 1.0 / (S1 + a1) - s2),
    }


def _bessel(m: int, x: float) -> float:
    return abs(float(jv(m, x)))


# -------------------------------------------------------- row families

@dataclass(frozen=True)
class _Row:
    a: Label
    b: Label
    strength: Expr  # static base strength (|.| taken at evaluation)
    index_scale: float  # modulation index multiplier relative to the tone's eps/wp
    harmonic: Callable[[int, float], Expr] | None = None  # overrides strength * |J_m|

    @property
    def name(self) -> str:
        return f"{format_label(self.a)}<->{format_label(self.b)}"


def _rows_direct(system: SystemSpec, modes, drive: str, single_excitation: bool) -> list[_Row]:
    from .sidebands import generate_catalog

    k = system.index_of_mode(drive)
    rows = []
    for e in generate_catalog(system, require_space=True):
        if e.rotating != "co":
            continue
        if single_excitation and sum(e.bra) != 1:
            continue
        dk = abs(e.bra[k] - e.ket[k])
        rows.append(_Row(e.bra, e.ket, Const(e.base_strength), float(dk)))
    return rows


def _rows_qcq(system: SystemSpec, modes, scheme: str, kappa: float, harmonics: int, x_of: Callable[[], Expr]) -> list[_Row]:
    (f1, a1), (fc, _), (f2, a2) = modes
    q1, c, q2 = system.modes
    J1c, J2c = system.coupling(q1.label, c.label), system.coupling(q2.label, c.label)
    J12 = system.coupling(q1.label, q2.label)
    sw = _sw_exprs(f1, fc, f2, a1, a2, J1c, J2c, J12)
    L = parse_label
    qubit_rows = [(L("001"), L("100"), "12"), (L("101"), L("002"), "101_002"), (L("101"), L("200"), "101_200")]
    coupler_rows = [(L("001"), L("010"), J2c, "2c"), (L("100"), L("010"), J1c, "1c"), (L("101"), L("011"), J1c, "1c"), (L("101"), L("110"), J2c, "2c")]
    rows = []
    for a, b, which in qubit_rows:
        if scheme == "qubit":
            rows.append(_Row(a, b, sw[which], 1.0))
        else:
            rows.append(_Row(a, b, sw[which], 0.0, harmonic=_coupler_harmonic_factory(system, which, x_of, harmonics)))
    for a, b, J, side in coupler_rows:
        if scheme == "qubit":
            rows.append(_Row(a, b, Const(J), 1.0 if side == "1c" else kappa))
        else:
            rows.append(_Row(a, b, Const(J), 1.0))
    return rows


def _coupler_harmonic_factory(system: SystemSpec, which: str, x_of, harmonics: int):
    """g^(m) of a coupler-modulated qubit channel as an opaque, cached point function."""
    from .sidebands import coupler_mod_strength, fourier_coupling_harmonics

    cache: dict = {}

    def make(m: int, x: float, fp_name: str, deps: frozenset[str], sys_at) -> Expr:
        def fn(env):
            key = tuple(sorted((k, round(float(v), 3)) for k, v in env.items() if k in deps or k == fp_name))
            if key not in cache:
                s = sys_at(env)
                eps = x * float(env[fp_name])
                g = fourier_coupling_harmonics(s, which, eps, harmonics, samples=max(128, 4 * harmonics + 8))
                for mm in range(1, min(4, harmonics) + 1):
                    g[mm] = coupler_mod_strength(s, which, mm, eps)
                cache[key] = g
            return float(abs(cache[key][abs(m)]))

        return Opaque(f"g_{which}_m{m}", fn, deps | {fp_name})

    return make


# ------------------------------------------------------------ encoder

def encode_constraints(
    system: SystemSpec,
    scheme: str,
    targets: Sequence[Target],
    *,
    topology: str | None = None,
    margin: float = DEFAULT_MARGIN,
    boxes: Mapping[str, tuple[float, float]] | None = None,
    harmonics: int = DEFAULT_HARMONICS,
    kappa: float = 1.0,
    zz_cap: float | None = None,
    objective: str = "none",
    resolution: float = RESOLUTION,
    max_amplitude: float | None = None,
) -> AllocationProblem:
    """Resonance, parametric-limit and detuning-margin rows for every target tone.

    `max_amplitude` caps eps_p = (eps_p/w_p) * w_p per tone (a box-bound row).
    """
    if scheme not in ("qubit", "coupler"):
        raise AllocationError(f"unknown scheme {scheme!r}")
    if objective not in OBJECTIVES:
        raise AllocationError(f"unknown objective {objective!r}")
    topology = topology or _detect_topology(system)
    if topology not in ("qq", "qcq", "lattice", "lattice_coupler"):
        raise AllocationError(f"unknown topology {topology!r}")
    if scheme == "coupler" and topology in ("qq", "lattice"):
        raise AllocationError("coupler modulation needs a coupler in the topology")
    if margin <= 1:
        raise AllocationError("margins must exceed 1")
    boxes = dict(boxes or {})
    for name in boxes:
        mode, attr = name.split(".")
        system.mode(mode)
        if attr not in ("freq", "anharm"):
            raise AllocationError(f"unknown variable {name!r}")
    modes = _mode_exprs(system, boxes)
    targets = tuple(targets)
    drives: dict[str, Expr] = {}
    cons: list[Constraint] = []
    seen: set[str] = set()

    def add(c: Constraint):
        if c.name not in seen:
            seen.add(c.name)
            cons.append(c)

    for name, (lo, hi) in boxes.items():
        add(Constraint("box-bound", f"box:{name}", Var(name), Const(lo), meta={"bounds": (lo, hi)}))

    for t in targets:
        a, b = (parse_label(p) for p in t.pair)
        t = replace(t, pair=(a, b))
        if not t.drive:
            raise AllocationError("every target needs a modulated mode")
        det_t = _detuning(system, modes, a, b)
        sign = 1.0 if float(det_t.eval(_template_env(system, boxes))) >= 0 else -1.0
        fp_expr = Const(sign / abs(t.n), True) * det_t
        fpn = _fp_name(t)
        drives[fpn] = fp_expr
        fp = Var(fpn)
        m_star = int(-sign * abs(t.n))
        x = t.x
        add(Constraint("resonance-equality", f"resonance:{t.key}", fp, Abs(det_t) / Const(abs(t.n), True), meta={"target": t.key}))
        rows = _family(system, modes, scheme, topology, t, kappa, harmonics, fpn, boxes)
        trow = next((r for r in rows if {r.a, r.b} == {a, b}), None)
        if trow is None:
            raise AllocationError(f"target {t.key} is not a catalogued transition of this topology")
        para = _para_strength(system, modes, topology, t, trow, rows)
        add(Constraint("parametric-limit", f"para:{t.key}", fp, para, margin, meta={"target": t.key}))
        if max_amplitude is not None:
            add(Constraint("box-bound", f"amplitude:{t.key}", Const(x, True) * fp, Const(0.0),
                           meta={"bounds": (0.0, float(max_amplitude)), "target": t.key}))
        for r in rows:
            det = _detuning(system, modes, r.a, r.b)
            for m in range(-harmonics, harmonics + 1):
                if r is trow and m == m_star:
                    continue
                if r.harmonic is not None:
                    strength = r.harmonic(m, x, fpn, frozenset(det.variables() | r.strength.variables()), _sys_at_factory(system, boxes))
                else:
                    jm = _bessel(m, r.index_scale * x)
                    if jm == 0.0:
                        continue
                    strength = Const(jm, True) * r.strength
                lhs = Abs(det + Const(float(m), True) * fp) if m else Abs(det)
                if r.index_scale == 0 and r.harmonic is None:
                    label = f"{r.name} static"
                else:
                    label = f"{r.name} m={m} (tone {t.key})"
                add(Constraint("detuning-margin", label, lhs, strength, margin,
                               meta={"target": t.key, "row": r.name, "m": m, "pair": (r.a, r.b)}))
    if topology in ("lattice", "lattice_coupler"):
        for c in _dispersive_rows(system, modes, margin):
            add(c)
    if zz_cap is not None:
        add(_zz_constraint(system, boxes, zz_cap))
    return AllocationProblem(system, scheme, topology, targets, boxes, drives, tuple(cons), margin, objective, resolution, harmonics, kappa)


def _dispersive_rows(system: SystemSpec, modes, margin: float) -> list[Constraint]:
    """Static separation of qubit pairs that share a neighbour (second-order exchange)."""
    n = len(system.modes)
    nbrs = {k: set() for k in range(n)}
    for c in system.couplings:
        i, j = system.index_of_mode(c.pair[0]), system.index_of_mode(c.pair[1])
        nbrs[i].add(j)
        nbrs[j].add(i)
    Jmax = max(abs(c.strength) for c in system.couplings)
    qubits = [k for k, m in enumerate(system.modes) if m.kind != "coupler"]
    out = []
    for a, b in itertools.combinations(qubits, 2):
        if b in nbrs[a]:
            continue
        shared = nbrs[a] & nbrs[b]
        if not shared:
            continue
        if all(system.modes[k].kind == "coupler" for k in shared):
            continue  # the mediated exchange is the target itself
        ea = tuple(1 if k == a else 0 for k in range(n))
        eb = tuple(1 if k == b else 0 for k in range(n))
        det = _energy(system, modes, ea) - _energy(system, modes, eb)
        name = f"dispersive {system.modes[a].label}-{system.modes[b].label}"
        out.append(Constraint("detuning-margin", name, Abs(det), Const(Jmax), margin, meta={"row": name, "m": 0}))
    return out


def _template_env(system: SystemSpec, boxes) -> dict[str, float]:
    env = {}
    for name, (lo, hi) in boxes.items():
        mode, attr = name.split(".")
        m = system.mode(mode)
        v = m.frequency if attr == "freq" else m.anharmonicity
        env[name] = min(max(v, lo), hi)
    return env


def _sys_at_factory(system: SystemSpec, boxes):
    def sys_at(env):
        s = system
        for name in boxes:
            if name in env:
                mode, attr = name.split(".")
                s = s.with_mode(mode, **{("frequency" if attr == "freq" else "anharmonicity"): float(env[name])})
        return s

    return sys_at


def _detect_topology(system: SystemSpec) -> str:
    kinds = [m.kind for m in system.modes]
    if len(kinds) == 2 and "coupler" not in kinds:
        return "qq"
    if len(kinds) == 3 and kinds[1] == "coupler":
        return "qcq"
    return "lattice_coupler" if "coupler" in kinds else "lattice"


def _family(system, modes, scheme, topology, t: Target, kappa, harmonics, fpn, boxes) -> list[_Row]:
    if topology == "qq":
        return _rows_direct(system, modes, t.drive, single_excitation=False)
    if topology == "lattice":
        return _rows_direct(system, modes, t.drive, single_excitation=True)
    if topology == "qcq":
        return _rows_qcq(system, modes, scheme, kappa, harmonics, None)
    return _rows_lattice_coupler(system, modes, t)


def _rows_lattice_coupler(system: SystemSpec, modes, t: Target) -> list[_Row]:
    """Qubit-coupler single-excitation rows plus the coupler-mediated target row."""
    k = system.index_of_mode(t.drive)
    n = len(system.modes)
    rows = []

    def e(i):
        lab = [0] * n
        lab[i] = 1
        return tuple(lab)

    for c in system.couplings:
        i, j = system.index_of_mode(c.pair[0]), system.index_of_mode(c.pair[1])
        dk = 1.0 if k in (i, j) else 0.0
        rows.append(_Row(e(i), e(j), Const(c.strength), dk))
    a, b = t.pair
    qa, qb = a.index(1), b.index(1)
    f = dict(zip(range(n), modes))
    J1c, J2c = system.coupling(system.modes[qa].label, t.drive), system.coupling(system.modes[qb].label, t.drive)
    try:
        J12 = system.coupling(system.modes[qa].label, system.modes[qb].label)
    except Exception:
        J12 = 0.0
    sw = _sw_exprs(f[qa][0], f[k][0], f[qb][0], f[qa][1], f[qb][1], J1c, J2c, J12)
    rows.append(_Row(a, b, sw["12"], 0.0))
    return rows


def _para_strength(system, modes, topology, t: Target, trow: _Row, rows) -> Expr:
    if topology == "lattice":
        return Const(max(abs(c.strength) for c in system.couplings))
    return Abs(trow.strength)


def _zz_constraint(system: SystemSpec, boxes, cap: float) -> Constraint:
    from .statics import static_zz

    sys_at = _sys_at_factory(system, boxes)

    def fn(env):
        return float(static_zz(sys_at(env), "exact"))

    return Constraint("zz-cap", "zz-cap", Opaque("zz_static", fn, frozenset(boxes), (0.0, math.inf)), Const(cap))


# ============================================================ checking

@dataclass(frozen=True)
class AllocationSolution:
    assignment: Mapping[str, float]
    worst_margin: float
    report: tuple[ConstraintResult, ...]
    stage: str  # bare | refined
    satisfiable: bool
    fp_shift: Mapping[str, float] = field(default_factory=dict)
    nodes: int = 0

    def violated(self) -> list[str]:
        return [r.name for r in self.report if not r.passed]

    def to_dict(self) -> dict:
        return {
            "stage": self.stage,
            "satisfiable": self.satisfiable,
            "worst_margin": self.worst_margin if math.isfinite(self.worst_margin) else None,
            "assignment_MHz": {k: v / MHZ for k, v in sorted(self.assignment.items())},
            "fp_shift_kHz": {k: v / KHZ for k, v in sorted(self.fp_shift.items())},
            "constraints": [r.to_dict() for r in self.report],
        }


def _full_env(problem: AllocationProblem, assignment: Mapping[str, float], dressed: Mapping[str, float] | None = None) -> dict:
    env = {name: float(assignment.get(name, problem.template_value(name))) for name in problem.variables}
    if dressed:
        env.update(dressed)
    for fpn, expr in problem.drives.items():
        env[fpn] = float(assignment[fpn]) if fpn in assignment else float(expr.eval(env))
    return env


def check(problem: AllocationProblem, assignment: Mapping[str, float], *, dressed: Mapping[str, float] | None = None) -> tuple[list[ConstraintResult], float]:
    """Evaluate every constraint at a full assignment; returns (report, worst achieved/required ratio)."""
    env = _full_env(problem, assignment, dressed)
    report = [_evaluate(c, env) for c in problem.constraints]
    ratios = [r.ratio for r in report if r.kind in ("parametric-limit", "detuning-margin", "zz-cap")]
    worst = min(ratios) if ratios else math.inf
    if any(not r.passed for r in report if r.kind in ("box-bound", "resonance-equality")):
        worst = min(worst, 0.0)
    return report, worst


def _assignment(problem: AllocationProblem, point: Mapping[str, float], dressed=None) -> dict[str, float]:
    env = _full_env(problem, point, dressed)
    return {k: env[k] for k in list(problem.variables) + list(problem.drives)}


# ============================================================ search

class _NotLinear(Exception):
    pass


def _linear(expr: Expr, subst: Mapping[str, tuple[float, dict]]) -> tuple[float, dict]:
    """(constant, {var: coeff}) for expressions linear in the decision variables."""
    if isinstance(expr, Const):
        return expr.value, {}
    if isinstance(expr, Var):
        if expr.name in subst:
            return subst[expr.name]
        return 0.0, {expr.name: 1.0}
    if isinstance(expr, Energy):
        c, co = 0.0, {}
        for n, f, a in expr.terms:
            for k, e in ((n, f), (n * (n - 1) // 2, a)):
                if k == 0:
                    continue
                c1, d1 = _linear(e, subst)
                c += k * c1
                for v, x in d1.items():
                    co[v] = co.get(v, 0.0) + k * x
        return c, co
    if isinstance(expr, Bin):
        ca, da = _linear(expr.a, subst)
        cb, db = _linear(expr.b, subst)
        if expr.op in "+-":
            s = 1.0 if expr.op == "+" else -1.0
            out = dict(da)
            for v, x in db.items():
                out[v] = out.get(v, 0.0) + s * x
            return ca + s * cb, out
        if expr.op == "*":
            if not da:
                return ca * cb, {v: ca * x for v, x in db.items()}
            if not db:
                return ca * cb, {v: cb * x for v, x in da.items()}
        if expr.op == "/" and not db:
            return ca / cb, {v: x / cb for v, x in da.items()}
    raise _NotLinear


class _Compiled:
    """Vectorized interval/point evaluation of linear rows; tree evaluation for the rest."""

    def __init__(self, problem: AllocationProblem, names: list[str], fixed: Mapping[str, float]):
        self.problem, self.names, self.fixed = problem, names, fixed
        subst = {}
        fixed_sub = {k: (v, {}) for k, v in fixed.items()}
        for fpn, e in problem.drives.items():
            subst[fpn] = _linear_or_none(e, fixed_sub)
        rows, rest = [], []
        for c in problem.constraints:
            if c.kind == "resonance-equality":
                continue
            lin = None
            if c.kind in ("parametric-limit", "detuning-margin") and not c.rhs.variables() and all(subst.values()):
                inner, absolute = (c.lhs.a, True) if isinstance(c.lhs, Abs) else (c.lhs, False)
                try:
                    k0, co = _linear(inner, {**fixed_sub, **subst})
                    lin = (k0, co, absolute, c.margin * abs(float(c.rhs.eval({}))), abs(float(c.rhs.eval({}))), c.kind == "detuning-margin")
                except (_NotLinear, KeyError):
                    lin = None
            if lin is None:
                rest.append(c)
            else:
                rows.append((c, lin))
        self.lin_cons = [c for c, _ in rows]
        d = len(names)
        idx = {n: k for k, n in enumerate(names)}
        self.A = np.zeros((len(rows), d))
        self.c = np.zeros(len(rows))
        self.absolute = np.zeros(len(rows), bool)
        self.req = np.zeros(len(rows))
        self.g2 = np.zeros(len(rows))  # (2g)^2 of channel rows, 0 elsewhere
        for r, (_, (k0, co, ab, req, g, channel)) in enumerate(rows):
            self.c[r] = k0
            for v, x in co.items():
                self.A[r, idx[v]] = x
            self.absolute[r] = ab
            self.req[r] = req
            self.g2[r] = (2 * g) ** 2 if channel else 0.0
        self.absA = np.abs(self.A)
        self.rest = rest
        self.box_rows = [c for c in rest if c.kind == "box-bound"]

    def box(self, lo: np.ndarray, hi: np.ndarray) -> tuple[str, float, str | None]:
        """(status, objective bound, failed row); the bound is an upper bound on the
        worst ratio, or a lower bound on the summed error bound when minimizing."""
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        status = "pass"
        ub = math.inf
        lb = 0.0
        if len(self.c):
            centre = self.c + self.A @ mid
            rad = self.absA @ half
            vlo, vhi = centre - rad, centre + rad
            Lhi = np.where(self.absolute, np.maximum(np.abs(vlo), np.abs(vhi)), vhi)
            straddle = (vlo <= 0) & (vhi >= 0)
            Llo = np.where(self.absolute, np.where(straddle, 0.0, np.minimum(np.abs(vlo), np.abs(vhi))), vlo)
            fails = Lhi < self.req
            if fails.any():
                return "fail", 0.0, self.lin_cons[int(np.argmax(fails))].name
            with np.errstate(divide="ignore"):
                ratios = np.where(self.req > 0, Lhi / np.where(self.req > 0, self.req, 1.0), math.inf)
            ub = float(ratios.min())
            lb = float(np.sum(self.g2 / (self.g2 + Lhi**2 + 1e-300)))
            if (Llo < self.req).any():
                status = "unknown"
        if self.rest:
            env = _interval_env(self.problem, self.names, lo, hi, self.fixed)
            for c in self.rest:
                s, u = c.interval_status(env)
                if c.kind != "box-bound":
                    ub = min(ub, u)
                if c.kind == "detuning-margin":
                    L = Interval.of(c.lhs.eval(env))
                    R = abs(Interval.of(c.rhs.eval(env)))
                    g2 = (2 * R.lo) ** 2
                    lb += g2 / (g2 + L.hi**2) if g2 > 0 else 0.0
                if s == "fail":
                    return "fail", 0.0, c.name
                if s == "unknown" or c.lhs.opaque() or c.rhs.opaque():
                    status = "unknown"
        if self.problem.objective == "min_bound":
            return status, lb, None
        return status, ub, None

    def point(self, x: np.ndarray) -> tuple[bool, float]:
        """(all rows pass, objective value) at a point; the objective is the worst
        ratio, or minus the summed error bound when minimizing."""
        worst = math.inf
        total = 0.0
        ok = True
        if len(self.c):
            v = self.c + self.A @ x
            L = np.where(self.absolute, np.abs(v), v)
            ok = bool(np.all(L >= self.req))
            with np.errstate(divide="ignore"):
                r = np.where(self.req > 0, L / np.where(self.req > 0, self.req, 1.0), math.inf)
            worst = float(r.min())
            total = float(np.sum(self.g2 / (self.g2 + L**2 + 1e-300)))
        if self.rest:
            env = _full_env(self.problem, {**self.fixed, **dict(zip(self.names, x))})
            for c in self.rest:
                res = _evaluate(c, env)
                ok = ok and res.passed
                if c.kind != "box-bound":
                    worst = min(worst, res.ratio)
                if c.kind == "detuning-margin" and res.passed:
                    g2 = (2 * res.required / c.margin) ** 2
                    total += g2 / (g2 + res.lhs**2) if g2 > 0 else 0.0
        if self.problem.objective == "min_bound":
            return ok, -total
        return ok, worst


def _linear_or_none(e: Expr, subst):
    try:
        return _linear(e, subst)
    except _NotLinear:
        return None


def _interval_env(problem, names, lo, hi, fixed) -> dict:
    env = dict(fixed)
    for k, name in enumerate(names):
        env[name] = Interval(lo[k], hi[k])
    for fpn, expr in problem.drives.items():
        env[fpn] = Interval.of(expr.eval(env))
    return env


def solve(
    problem: AllocationProblem,
    *,
    seed: int = 0,
    max_nodes: int | None = None,
    rel_gap: float = 1e-3,
) -> AllocationSolution:
    """Branch-and-prune over the decision box (bare-parameter stage).

    objective "none" returns the first box centre that passes every row
    (depth-first); "max_worst_margin" runs best-first branch-and-bound on the
    interval upper bound of the worst achieved/required ratio; "min_bound"
    minimizes the summed Lorentzian error bound (2g)^2/((2g)^2 + detuning^2) of
    all detuning-margin rows, using per-row interval lower bounds.
    """
    names = problem.free_variables()
    fixed = {}
    for n in problem.variables:
        if n not in names:
            lo, hi = problem.variables[n]
            fixed[n] = min(max(problem.template_value(n), lo), hi)
    if problem.objective not in OBJECTIVES:
        raise AllocationError(f"unknown objective {problem.objective!r}")
    maximize = problem.objective != "none"
    minimize = problem.objective == "min_bound"
    if max_nodes is None:
        max_nodes = 20_000 if maximize else 200_000
    if not problem.targets:
        point = {**fixed, **{n: 0.5 * sum(problem.variables[n]) for n in names}}
        report, worst = check(problem, point)
        if not all(r.passed for r in report):
            raise Unsatisfiable("box-bound rows fail", [r.name for r in report if not r.passed])
        return AllocationSolution(_assignment(problem, point), worst, tuple(report), "bare", True)
    comp = _Compiled(problem, names, fixed)
    lo0 = np.array([problem.variables[n][0] for n in names], float)
    hi0 = np.array([problem.variables[n][1] for n in names], float)
    rng = np.random.default_rng(seed)
    counter = itertools.count()
    heap = [(-math.inf, next(counter), lo0, hi0)]
    best = None  # (worst, x)
    fail_counts: dict[str, int] = {}
    nodes = 0

    def finish(x):
        point = {**fixed, **dict(zip(names, x))}
        report, worst = check(problem, point)
        if not all(r.passed for r in report):
            return None
        return AllocationSolution(_assignment(problem, point), worst, tuple(report), "bare", True, nodes=nodes)

    def hopeless(bound: float) -> bool:
        # bound: upper bound on worst ratio, or lower bound on the summed error bound
        if best is None:
            return False
        if minimize:
            return bound >= -best[0] * (1 - rel_gap)
        return bound <= best[0] * (1 + rel_gap)

    while heap and nodes < max_nodes:
        key, _, lo, hi = heapq.heappop(heap) if maximize else heap.pop()
        if maximize and hopeless(key if minimize else -key):
            break
        nodes += 1
        status, ub, failed = comp.box(lo, hi)
        if status == "fail":
            fail_counts[failed] = fail_counts.get(failed, 0) + 1
            continue
        width = hi - lo
        small = bool(np.all(width <= problem.resolution))
        if status == "pass" or small or maximize:
            x = 0.5 * (lo + hi)
            ok, worst = comp.point(x)
            if ok:
                if not maximize:
                    sol = finish(x)
                    if sol is not None:
                        return sol
                elif best is None or worst > best[0]:
                    best = (worst, x)
        if small or (maximize and hopeless(ub)):
            continue
        k = int(np.argmax(width / problem.resolution))
        mid = 0.5 * (lo[k] + hi[k])
        left_hi, right_lo = hi.copy(), lo.copy()
        left_hi[k] = mid
        right_lo[k] = mid
        kids = [(lo, left_hi), (right_lo, hi)]
        if rng.random() < 0.5:
            kids.reverse()
        for klo, khi in kids:
            if maximize:
                heapq.heappush(heap, (ub if minimize else -ub, next(counter), klo, khi))
            else:
                heap.append((-ub, next(counter), klo, khi))
    if best is not None:
        sol = finish(best[1])
        if sol is not None:
            return replace(sol, nodes=nodes)
    tight = sorted(fail_counts, key=lambda k: -fail_counts[k])[:5]
    why = "node limit reached" if heap else "search exhausted"
    raise Unsatisfiable(f"unsatisfiable within bounds and resolution ({why})", tight)


# ========================================================== refinement

def _dressed_energies(problem: AllocationProblem, assignment: Mapping[str, float]) -> dict[str, float]:
    from .statics import exact_dressed_spectrum

    sysm = problem.system_at(assignment)
    sp = exact_dressed_spectrum(sysm)
    out = {}
    for lab in sp.labels:
        out["E:" + format_label(lab)] = float(sp.energy(lab))
    return out


def refine_with_dressed(
    problem: AllocationProblem,
    solution: AllocationSolution,
    *,
    trust_radius: float = 0.0,
    max_evals: int = 200,
) -> AllocationSolution:
    """Re-solve resonances and margins with exact dressed energies.

    Drive frequencies are always re-centred on the dressed resonances. With a
    positive `trust_radius` the free mode frequencies may also move by at most
    that much (coordinate pattern search on the dressed worst margin).
    """
    base = {k: v for k, v in solution.assignment.items() if k in problem.variables}
    old_fp = {k: v for k, v in solution.assignment.items() if k in problem.drives}

    def evaluate(point):
        dressed = _dressed_energies(problem, point)
        assign = _assignment(problem, point, dressed)
        report, worst = check(problem, assign, dressed=dressed)
        return assign, report, worst

    assign, report, worst = evaluate(base)
    ok = all(r.passed for r in report)
    if not ok and trust_radius > 0:
        names = [n for n in problem.free_variables() if n.endswith(".freq")]
        center = dict(base)
        best = (worst, dict(base), assign, report)
        step = trust_radius / 2
        evals = 0
        while step >= problem.resolution and evals < max_evals and best[0] < 1.0:
            improved = False
            for n in names:
                for sgn in (1.0, -1.0):
                    trial = dict(best[1])
                    trial[n] = trial[n] + sgn * step
                    lo, hi = problem.variables[n]
                    if abs(trial[n] - center[n]) > trust_radius or not lo <= trial[n] <= hi:
                        continue
                    evals += 1
                    a2, r2, w2 = evaluate(trial)
                    if w2 > best[0]:
                        best = (w2, trial, a2, r2)
                        improved = True
            if not improved:
                step /= 2
        worst, _, assign, report = best
        ok = all(r.passed for r in report)
    shift = {k: assign[k] - old_fp[k] for k in old_fp}
    return AllocationSolution(assign, worst, tuple(report), "refined", ok, shift, solution.nodes)


# ============================================================== export

def export_smt(problem: AllocationProblem, *, scale: float = MHZ) -> str:
    """SMT-LIB 2 dump (QF_NRA); frequencies in units of `scale` (default MHz)."""
    lines = [f"; frequency unit: {scale / (2 * math.pi):.6g} Hz (cyclic)", "(set-logic QF_NRA)"]
    names = list(problem.variables)
    for n in names:
        lines.append(f"(declare-fun {_smt_name(n)} () Real)")
    opaque: dict[str, Opaque] = {}

    def collect(e: Expr):
        if isinstance(e, Opaque):
            opaque[e.name] = e
        for attr in ("a", "b"):
            if hasattr(e, attr):
                collect(getattr(e, attr))

    for c in problem.constraints:
        collect(c.lhs)
        collect(c.rhs)
    for name in sorted(opaque):
        lines.append(f"(declare-fun {_smt_name(name)} () Real) ; point-evaluated strength")
    for fpn, expr in problem.drives.items():
        lines.append(f"(define-fun {_smt_name(fpn)} () Real {expr.smt(scale)})")
    for c in problem.constraints:
        lhs, rhs = c.lhs.smt(scale), c.rhs.smt(scale)
        if c.kind == "box-bound":
            lo, hi = c.meta["bounds"]
            body = f"(and (>= {lhs} {_num(lo / scale)}) (<= {lhs} {_num(hi / scale)}))"
        elif c.kind == "resonance-equality":
            continue  # drive frequencies are defined by substitution
        elif c.kind == "zz-cap":
            body = f"(<= (ite (>= {lhs} 0) {lhs} (- {lhs})) {rhs})"
        else:
            r = f"(ite (>= {rhs} 0) {rhs} (- {rhs}))"
            body = f"(>= {lhs} (* {_num(c.margin)} {r}))"
        lines.append(f"(assert (! {body} :named {_smt_name(_clean(c.name))}))")
    lines.append("(check-sat)")
    lines.append("(get-model)")
    return "\n".join(lines) + "\n"


def _clean(name: str) -> str:
    # keep negative harmonics distinct from positive ones
    name = name.replace("<->", "_").replace("=-", "=neg")
    out = "".join(ch if ch.isalnum() else "_" for ch in name)
    return out.replace("__", "_").strip("_")


# ============================================================ problems

def two_qubit_problem(
    system: SystemSpec | None = None,
    target=("01", "10"),
    n: int = 1,
    *,
    margin: float = DEFAULT_MARGIN,
    boxes: Mapping[str, tuple[float, float]] | None = None,
    ratio: float | None = None,
    objective: str = "max_worst_margin",
    harmonics: int = DEFAULT_HARMONICS,
    max_amplitude: float | None = 600 * MHZ,
) -> AllocationProblem:
    """Qubit-modulated two-qubit problem around the reference parameters."""
    system = system or qubit_qubit_system()
    q1, q2 = system.modes
    if boxes is None:
        boxes = {
            f"{q1.label}.freq": (q1.frequency - 300 * MHZ, q1.frequency + 300 * MHZ),
            f"{q2.label}.freq": (q2.frequency - 200 * MHZ, q2.frequency + 200 * MHZ),
        }
    drive = next((m.label for m in system.modes if m.tunable), q1.label)
    t = Target(tuple(parse_label(p) for p in target), n, drive, ratio)
    return encode_constraints(system, "qubit", [t], margin=margin, boxes=boxes, objective=objective, harmonics=harmonics,
                              max_amplitude=max_amplitude)


def qcq_problem(
    system: SystemSpec | None = None,
    scheme: str = "qubit",
    target=("001", "100"),
    n: int = 1,
    *,
    margin: float = DEFAULT_MARGIN,
    boxes: Mapping[str, tuple[float, float]] | None = None,
    ratio: float | None = None,
    kappa: float = 1.0,
    objective: str = "none",
    harmonics: int = DEFAULT_HARMONICS,
) -> AllocationProblem:
    system = system or qubit_coupler_qubit_system()
    q1, c, q2 = system.modes
    if boxes is None:
        boxes = {f"{m.label}.freq": (m.frequency - 150 * MHZ, m.frequency + 150 * MHZ) for m in system.modes}
    drive = q1.label if scheme == "qubit" else c.label
    t = Target(tuple(parse_label(p) for p in target), n, drive, ratio)
    return encode_constraints(system, scheme, [t], topology="qcq", margin=margin, boxes=boxes, kappa=kappa,
                              objective=objective, harmonics=harmonics)


def four_qubit_lattice_system(levels: int = 2, J: float = 5 * MHZ) -> SystemSpec:
    """Ring Q1-Q2-Q3-Q4-Q1 of directly coupled transmons; Q1 and Q3 are modulated."""
    freqs = (5.25, 4.70, 5.45, 4.90)
    modes = tuple(
        ModeSpec(f"Q{k + 1}", f * GHZ, -250 * MHZ, levels, tunable=k in (0, 2)) for k, f in enumerate(freqs)
    )
    links = (("Q1", "Q2"), ("Q2", "Q3"), ("Q3", "Q4"), ("Q4", "Q1"))
    return SystemSpec(modes, tuple(CouplingSpec(p, J) for p in links))


def four_qubit_problem(
    system: SystemSpec | None = None,
    *,
    margin: float = DEFAULT_MARGIN,
    boxes: Mapping[str, tuple[float, float]] | None = None,
    ratio: float | None = LATTICE_RATIO,
    objective: str = "min_bound",
    harmonics: int = DEFAULT_HARMONICS,
    max_amplitude: float | None = 600 * MHZ,
) -> AllocationProblem:
    """Directly coupled lattice: Q1 drives links 12 and 41, Q3 drives 23 and 34.

    The ring's link detunings sum to zero, so every tone shares its sidebands with
    the other links; a modulation index below the J_1 maximum keeps the second
    sideband weak enough to leave slack on all of them.
    """
    system = system or four_qubit_lattice_system()
    if boxes is None:
        boxes = {f"Q{k}.freq": (4.0 * GHZ, 6.0 * GHZ) for k in range(1, 5)}
    e = lambda i: tuple(1 if k == i else 0 for k in range(4))
    targets = [
        Target((e(0), e(1)), 1, "Q1", ratio, "12"),
        Target((e(3), e(0)), 1, "Q1", ratio, "41"),
        Target((e(1), e(2)), 1, "Q3", ratio, "23"),
        Target((e(2), e(3)), 1, "Q3", ratio, "34"),
    ]
    return encode_constraints(system, "qubit", targets, topology="lattice", margin=margin, boxes=boxes,
                              objective=objective, harmonics=harmonics, max_amplitude=max_amplitude)


def four_qubit_coupler_system(levels: int = 2) -> SystemSpec:
    """Four qubits joined in a ring through four tunable couplers."""
    qf = (5.25, 4.70, 5.45, 4.90)
    cf = {"C12": 6.6, "C23": 6.8, "C34": 6.7, "C41": 6.9}
    modes = [ModeSpec(f"Q{k + 1}", f * GHZ, -250 * MHZ, levels) for k, f in enumerate(qf)]
    modes += [ModeSpec(n, f * GHZ, -100 * MHZ, levels, tunable=True, kind="coupler") for n, f in cf.items()]
    couplings = []
    for name in cf:
        a, b = f"Q{name[1]}", f"Q{name[2]}"
        couplings += [CouplingSpec((a, name), 100 * MHZ), CouplingSpec((name, b), 100 * MHZ)]
    return SystemSpec(tuple(modes), tuple(couplings))


def four_qubit_coupler_problem(
    system: SystemSpec | None = None,
    *,
    margin: float = DEFAULT_MARGIN,
    boxes: Mapping[str, tuple[float, float]] | None = None,
    ratio: float | None = None,
    objective: str = "none",
    harmonics: int = DEFAULT_HARMONICS,
) -> AllocationProblem:
    """Coupler-mediated lattice: each coupler drives its own qubit pair."""
    system = system or four_qubit_coupler_system()
    if boxes is None:
        boxes = {f"Q{k}.freq": (4.0 * GHZ, 6.0 * GHZ) for k in range(1, 5)}
    n = len(system.modes)
    e = lambda i: tuple(1 if k == i else 0 for k in range(n))
    targets = []
    for name in ("C12", "C23", "C34", "C41"):
        qa, qb = int(name[1]) - 1, int(name[2]) - 1
        targets.append(Target((e(qa), e(qb)), 1, name, ratio, name[1:]))
    return encode_constraints(system, "coupler", targets, topology="lattice_coupler", margin=margin, boxes=boxes,
                              objective=objective, harmonics=harmonics)


def problem_from_dict(d: Mapping) -> AllocationProblem:
    """JSON problem: {topology, scheme, system?, boxes_GHz?, targets, margin, objective, harmonics, kappa}."""
    from .model import system_from_dict

    topo = d.get("topology", "qq")
    system = system_from_dict(d["system"]) if "system" in d else None
    boxes = None
    if "boxes_GHz" in d:
        boxes = {k: (v[0] * GHZ, v[1] * GHZ) for k, v in d["boxes_GHz"].items()}
    kw = dict(margin=float(d.get("margin", DEFAULT_MARGIN)), harmonics=int(d.get("harmonics", DEFAULT_HARMONICS)))
    if "objective" in d:
        kw["objective"] = d["objective"]
    ratio = d.get("ratio")
    if "max_amplitude_MHz" in d and topo in ("qq", "lattice"):
        kw["max_amplitude"] = None if d["max_amplitude_MHz"] is None else float(d["max_amplitude_MHz"]) * MHZ
    if topo == "qq":
        tgt = d.get("target", ["01", "10"])
        return two_qubit_problem(system, tuple(tgt), int(d.get("n", 1)), boxes=boxes, ratio=ratio, **kw)
    if topo == "qcq":
        tgt = d.get("target", ["001", "100"])
        return qcq_problem(system, d.get("scheme", "qubit"), tuple(tgt), int(d.get("n", 1)), boxes=boxes, ratio=ratio,
                           kappa=float(d.get("kappa", 1.0)), **kw)
    if topo == "lattice":
        return four_qubit_problem(system, boxes=boxes, ratio=ratio, **kw)
    if topo == "lattice_coupler":
        return four_qubit_coupler_problem(system, boxes=boxes, ratio=ratio, **kw)
    raise AllocationError(f"unknown topology {topo!r}")


# ========================================================= spot check

@dataclass(frozen=True)
class SpotCheck:
    target: str
    fp: float
    grid: np.ndarray
    pairs: tuple[tuple[Label, Label], ...]
    theta: np.ndarray  # (n_grid, n_pairs)

    @property
    def max_theta(self) -> float:
        return float(np.nanmax(self.theta)) if self.theta.size else 0.0

    @property
    def worst_pair(self) -> tuple[Label, Label] | None:
        if not self.theta.size:
            return None
        return self.pairs[int(np.nanargmax(np.nanmax(self.theta, axis=0)))]


def floquet_spot_check(
    problem: AllocationProblem,
    solution: AllocationSolution,
    *,
    window: float = 5 * MHZ,
    n_points: int = 11,
    tol: float = 1e-11,
    reference: str | None = None,
) -> list[SpotCheck]:
    """Floquet collision angles of every constrained parasitic pair within +-window of each tone.

    The reference basis defaults to bare product states for directly coupled
    topologies and to static dressed states when couplers are present.
    """
    if reference is None:
        reference = "dressed" if problem.topology in ("qcq", "lattice_coupler") else "bare"
    from .floquet import FloquetSolver, theta_map
    from .model import DriveSpec

    system = problem.system_at(solution.assignment)
    out = []
    solvers: dict[str, FloquetSolver] = {}
    for t in problem.targets:
        a, b = (parse_label(p) for p in t.pair)
        pairs = []
        for c in problem.constraints:
            pr = c.meta.get("pair") if c.meta else None
            if c.kind != "detuning-margin" or pr is None or c.meta.get("target") != t.key:
                continue
            if {pr[0], pr[1]} == {a, b} or pr in pairs:
                continue
            pairs.append(pr)
        fp = float(solution.assignment[_fp_name(t)])
        grid = np.linspace(fp - window, fp + window, n_points)
        if t.drive not in solvers:
            solvers[t.drive] = FloquetSolver(system, t.drive, tol=tol)
        solver = solvers[t.drive]
        drives = [DriveSpec(t.drive, t.x * f, f) for f in grid]
        results = solver.results(drives)
        theta = theta_map(solver, results, pairs, reference)
        out.append(SpotCheck(t.key, fp, grid, tuple(pairs), theta))
    return out
