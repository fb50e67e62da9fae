"""Command-line front end: `floqmap <command> [options]`."""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from importlib import resources
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from . import __version__
from .model import GHZ, KHZ, MHZ, DriveSpec, ModelError, SystemSpec, format_label, load_config, parse_label

# sweep points per task; fixed so that results never depend on the worker count
CHUNK = 8
BUILTIN = ("qq", "qcq")


class UsageError(Exception):
    pass


# ------------------------------------------------------------------ helpers

def _builtin_path(name: str) -> Path:
    return Path(str(resources.files("floqmap") / "configs" / f"{name}.json"))


def _load(spec: str) -> tuple[SystemSpec, DriveSpec | None]:
    path = _builtin_path(spec) if spec in BUILTIN else Path(spec)
    if not path.exists():
        raise UsageError(f"config {spec!r} not found")
    try:
        return load_config(path)
    except ModelError as exc:
        msg = str(exc)
        raise UsageError(msg if msg.startswith(str(path)) else f"{path}: {msg}") from exc


def _load_json(spec: str) -> dict:
    path = _builtin_path(spec) if not Path(spec).exists() and _builtin_path(spec).exists() else Path(spec)
    if not path.exists():
        raise UsageError(f"file {spec!r} not found")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc


def _pair(text: str) -> tuple:
    parts = text.replace("<->", ",").replace("-", ",").split(",")
    if len(parts) != 2:
        raise UsageError(f"transition {text!r} must look like 01,10")
    try:
        return parse_label(parts[0].strip()), parse_label(parts[1].strip())
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"expected comma-separated integers, got {text!r}") from exc


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return "nan" if not math.isfinite(v) else f"{float(v):.10g}"
    return str(v)


def _csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def _emit(text: str, out: str | None) -> None:
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _map(fn: Callable, tasks: list, workers: int) -> list:
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, tasks))


def _chunks(seq: Sequence, size: int = CHUNK) -> list:
    return [list(seq[i : i + size]) for i in range(0, len(seq), size)]


def _tunable(system: SystemSpec, kind: str | None = None) -> str:
    for m in system.modes:
        if m.tunable and (kind is None or m.kind == kind):
            return m.label
    raise UsageError("config has no tunable mode to drive")


def _svg(path: str, x, ys: dict, xlabel: str, ylabel: str) -> None:
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError as exc:  # pragma: no cover
        raise UsageError("--svg needs matplotlib") from exc
    fig, ax = plt.subplots(figsize=(6, 4))
    for name, y in ys.items():
        ax.plot(x, y, label=name)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if len(ys) > 1:
        ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _catalog_for(system: SystemSpec, dressed: bool):
    from .sidebands import catalog_qcq, catalog_qq, generate_catalog

    if len(system.modes) == 2:
        return catalog_qq(system, dressed=dressed)
    if len(system.modes) == 3 and system.modes[1].kind == "coupler":
        return catalog_qcq(system, dressed=dressed)
    return generate_catalog(system)


# ----------------------------------------------------------------- catalog

def cmd_catalog(a, system, drive) -> int:
    cat = _catalog_for(system, a.dressed)
    if a.format == "json":
        rows = [
            {
                "bra": format_label(e.bra),
                "ket": format_label(e.ket),
                "class": e.rotating,
                "channel": e.channel,
                "C": e.C,
                "detuning_MHz": e.detuning / MHZ,
                "base_strength_MHz": e.base_strength / MHZ,
                "expression": e.expression,
            }
            for e in cat
        ]
        _emit(json.dumps({"units": {"detuning": "MHz", "strength": "MHz"}, "transitions": rows}, indent=2) + "\n", a.out)
    else:
        rows = [(format_label(e.bra), format_label(e.ket), e.rotating, e.channel, e.C, e.detuning / MHZ, e.base_strength / MHZ) for e in cat]
        _emit(_csv_text(("bra", "ket", "class", "channel", "C", "detuning_MHz", "base_strength_MHz"), rows), a.out)
    return 0


# --------------------------------------------------------------- landscape

def _amplitude(a, target: str, scheme: str, drive: DriveSpec | None) -> tuple[float | None, float | None]:
    """(eps, eps_over_fp) from the flags, falling back to the config drive on the same mode."""
    if a.eps_over_fp is not None and a.eps_mhz is not None:
        raise UsageError("give at most one of --eps-over-fp and --eps-mhz")
    if a.eps_mhz is not None:
        return a.eps_mhz * MHZ, None
    if a.eps_over_fp is not None:
        return None, a.eps_over_fp
    if drive is None or drive.target != target:
        raise UsageError("no drive amplitude: pass --eps-over-fp or --eps-mhz, or add a drive to the config")
    # coupler drives keep a fixed amplitude, qubit drives a fixed modulation index
    if scheme == "coupler":
        return drive.amplitude, None
    return None, drive.amplitude / drive.frequency


def _template(a, system: SystemSpec, scheme: str, drive: DriveSpec | None = None):
    from .floquet import DriveTemplate

    target = a.target or _tunable(system, "coupler" if scheme == "coupler" else None)
    eps, ratio = _amplitude(a, target, scheme, drive)
    if eps is not None:
        return DriveTemplate(target, eps=eps)
    return DriveTemplate(target, eps_over_fp=ratio)


def _landscape_task(args):
    from .floquet import max_collision_angle_landscape

    system, template, grid, pairs, reference = args
    land = max_collision_angle_landscape(system, template, grid, pairs, reference=reference)
    return land.theta


def cmd_landscape(a, system, drive) -> int:
    template = _template(a, system, a.scheme, drive)
    if a.transitions == "all":
        pairs = [e.pair() for e in _catalog_for(system, False)]
    else:
        pairs = [_pair(t) for t in a.transitions.split(";")]
    grid = np.linspace(a.fmin, a.fmax, a.points) * MHZ
    tasks = [(system, template, g, pairs, a.reference) for g in _chunks(grid)]
    theta = np.concatenate(_map(_landscape_task, tasks, a.workers), axis=0)
    rows = []
    for fp, row in zip(grid, theta):
        if np.all(np.isnan(row)):
            rows.append((fp / MHZ, float("nan"), "", ""))
            continue
        k = int(np.nanargmax(row))
        rows.append((fp / MHZ, float(row[k]), format_label(pairs[k][0]), format_label(pairs[k][1])))
    _emit(_csv_text(("fp_MHz", "max_theta_rad", "argmax_bra", "argmax_ket"), rows), a.out)
    if a.svg:
        _svg(a.svg, grid / MHZ, {f"{format_label(p[0])}<->{format_label(p[1])}": theta[:, k] for k, p in enumerate(pairs)},
             "wp/2pi (MHz)", "theta (rad)")
    return 0


# ----------------------------------------------------------------- chevron

def _chevron_task(args):
    from .dynamics import chevron

    system, template, grid, duration, samples, initial, final = args
    return chevron(system, template, grid, duration, samples, initial, final)


def cmd_chevron(a, system, drive) -> int:
    template = _template(a, system, "qubit" if system.mode(a.target or _tunable(system)).kind != "coupler" else "coupler", drive)
    grid = np.linspace(a.fmin, a.fmax, a.points) * MHZ
    duration = a.duration_ns * 1e-9
    tasks = [(system, template, g, duration, a.samples, a.initial, a.final) for g in _chunks(grid)]
    parts = _map(_chevron_task, tasks, a.workers)
    times = parts[0][0]
    pops = np.concatenate([p[1] for p in parts], axis=0)
    rows = [(fp / MHZ, t * 1e9, pops[i, j]) for i, fp in enumerate(grid) for j, t in enumerate(times)]
    _emit(_csv_text(("fp_MHz", "t_ns", f"P_{a.final}"), rows), a.out)
    return 0


# ------------------------------------------------------------- micromotion

def _drive_from(a, system, drive) -> DriveSpec:
    target = a.target or (drive.target if drive else _tunable(system))
    fp = a.fp_mhz * MHZ if a.fp_mhz is not None else (drive.frequency if drive else None)
    if fp is None:
        raise UsageError("no drive frequency: pass --fp-mhz or add a drive to the config")
    if a.eps_mhz is not None and a.eps_over_fp is not None:
        raise UsageError("give at most one of --eps-over-fp and --eps-mhz")
    if a.eps_mhz is not None:
        eps = a.eps_mhz * MHZ
    elif a.eps_over_fp is not None:
        eps = a.eps_over_fp * fp
    elif drive is not None:
        eps = drive.amplitude
    else:
        raise UsageError("no drive amplitude: pass --eps-mhz or --eps-over-fp")
    return DriveSpec(target, eps, fp, drive.phase if drive else 0.0)


def cmd_micromotion(a, system, drive) -> int:
    from .dynamics import compare_peaks, micromotion_spectrum, sideband_lines, superposition

    d = _drive_from(a, system, drive)
    psi = superposition(system, [s.strip() for s in a.psi.split(",")])
    labels = [s.strip() for s in a.labels.split(",")]
    spec = micromotion_spectrum(
        system, d, psi, a.duration_us * 1e-6, a.samples, labels,
        floor=a.floor, fmax=a.fmax * 1e6, window=a.window, refine=a.refine_peaks,
    )
    keep = spec.freqs <= a.fmax * 1e6
    header = ["freq_MHz"] + [f"amp_{format_label(parse_label(l))}" for l in labels]
    rows = [[f / 1e6] + [spec.amplitudes[parse_label(l)][k] for l in labels] for k, f in enumerate(spec.freqs) if keep[k]]
    _emit(_csv_text(header, rows), a.out)
    if a.peaks:
        lines = sideband_lines(_catalog_for(system, True), d.frequency, fmax=a.fmax * 1e6 + 5e6)
        matched, unmatched = compare_peaks(spec.peaks, lines, min_amplitude=a.floor)
        prow = []
        for p, line in matched + unmatched:
            prow.append((p.frequency / 1e6, p.amplitude, format_label(p.label), line[0] / 1e6 if line else float("nan"),
                         line[1] if line else "", line[2] if line else "", (p, line) in matched))
        prow.sort()
        Path(a.peaks).write_text(_csv_text(("freq_MHz", "rel_amplitude", "label", "line_MHz", "transition", "n", "matched"), prow))
    if a.svg:
        _svg(a.svg, [r[0] for r in rows], {h: [r[i + 1] for r in rows] for i, h in enumerate(header[1:])}, "f (MHz)", "amplitude")
    return 0


# ---------------------------------------------------------- strength sweep

def _qubit_strength_task(args):
    from .floquet import qubit_strength_sweep

    system, target, pair, n, xs = args
    return qubit_strength_sweep(system, target, pair, n, xs)


def _coupler_strength_task(args):
    from .floquet import coupler_strength_sweep

    system, pair, m, eps = args
    return coupler_strength_sweep(system, pair, m, eps)


def cmd_strength_sweep(a, system, drive) -> int:
    from .sidebands import coupler_mod_strength, qubit_mod_strength

    orders = _ints(a.n)
    if a.scheme == "qubit":
        pair = _pair(a.pair or "01,10")
        target = a.target or _tunable(system)
        xs = np.linspace(0.0, a.xmax, a.points)
        tasks = [(system, target, pair, n, c) for n in orders for c in _chunks(xs)]
        res = _map(_qubit_strength_task, tasks, a.workers)
        rows, k = [], 0
        for n in orders:
            g = np.concatenate(res[k : k + len(_chunks(xs))])
            k += len(_chunks(xs))
            for x, gv in zip(xs, g):
                rows.append((n, x, gv / MHZ, abs(qubit_mod_strength(system.couplings[0].strength, n, x, 1.0)) / MHZ))
        _emit(_csv_text(("n", "eps_over_fp", "floquet_g_MHz", "analytic_g_MHz"), rows), a.out)
        return 0
    if len(system.modes) != 3:
        raise UsageError("coupler strength sweep needs a qubit-coupler-qubit config")
    pair = _pair(a.pair or "001,100")
    eps = np.linspace(0.0, a.eps_max_mhz, a.points) * MHZ
    tasks = [(system, pair, m, c) for m in orders for c in _chunks(eps)]
    res = _map(_coupler_strength_task, tasks, a.workers)
    rows, k = [], 0
    nchunk = len(_chunks(eps))
    for m in orders:
        g = np.concatenate(res[k : k + nchunk])
        k += nchunk
        for e, gv in zip(eps, g):
            sw = abs(coupler_mod_strength(system, pair, m, e, abs(m) + 2)) if e > 0 else 0.0
            ad = abs(coupler_mod_strength(system, pair, m, e, abs(m))) if e > 0 else 0.0
            rows.append((m, e / MHZ, gv / MHZ, sw / MHZ, ad / MHZ))
    _emit(_csv_text(("m", "eps_MHz", "floquet_g_MHz", "taylor_g_MHz", "adiabatic_g_MHz"), rows), a.out)
    return 0


# ---------------------------------------------------------------------- zz

def _zz_task(args):
    from .statics import static_zz

    system, wcs = args
    out = []
    for wc in wcs:
        s = system.with_mode(system.modes[1].label, frequency=wc)
        out.append([static_zz(s)] + [static_zz(s, "sum", k) for k in (2, 3, 4)])
    return out


def cmd_zz(a, system, drive) -> int:
    if len(system.modes) != 3:
        raise UsageError("zz sweeps the coupler of a qubit-coupler-qubit config")
    wcs = np.linspace(a.wc_min, a.wc_max, a.points) * GHZ
    vals = [r for part in _map(_zz_task, [(system, c) for c in _chunks(wcs)], a.workers) for r in part]
    rows = [(wc / GHZ, *(v / KHZ for v in r)) for wc, r in zip(wcs, vals)]
    _emit(_csv_text(("omega_c_GHz", "zz_exact_kHz", "zz_pert2_kHz", "zz_pert3_kHz", "zz_pert4_kHz"), rows), a.out)
    return 0


# ------------------------------------------------------------ error budget

def cmd_error_budget(a, system, drive) -> int:
    from .errors import population_error
    from .sidebands import find_entry, resonant_order

    pair = _pair(a.target_transition)
    target = a.target or (_tunable(system, "coupler") if a.scheme == "coupler" else _tunable(system))
    if a.fp_mhz is None:
        cat = _catalog_for(system, True)
        fp = abs(find_entry(cat, *pair).detuning) / abs(a.n)
    else:
        fp = a.fp_mhz * MHZ
    eps, ratio = _amplitude(a, target, a.scheme, drive)
    eps = eps if eps is not None else ratio * fp
    d = DriveSpec(target, eps, fp)
    budget = population_error(system, a.scheme, pair, d, a.harmonics, pulse=a.pulse)
    _emit(json.dumps(budget.to_dict(), indent=2) + "\n", a.out)
    if a.csv:
        rows = [(g, p, b) for g, (p, b) in sorted(budget.by_group().items())]
        Path(a.csv).write_text(_csv_text(("group", "P_e", "P_e_bound"), rows))
    return 0


# ---------------------------------------------------------------- allocate

PRESETS = {"two-qubit": {"topology": "qq"}, "four-qubit": {"topology": "lattice"}}


def cmd_allocate(a, system, drive) -> int:
    from .allocator import export_smt, problem_from_dict, refine_with_dressed, solve

    if (a.problem is None) == (a.preset is None):
        raise UsageError("give exactly one of a problem file and --preset")
    d = PRESETS[a.preset] if a.preset else _load_json(a.problem)
    try:
        problem = problem_from_dict(d)
    except (KeyError, TypeError) as exc:
        raise UsageError(f"malformed problem: missing or bad field {exc}") from exc
    if a.export_smt:
        Path(a.export_smt).write_text(export_smt(problem))
    sol = solve(problem, seed=a.seed, max_nodes=a.max_nodes)
    if sol.satisfiable and not a.no_refine:
        sol = refine_with_dressed(problem, sol, trust_radius=a.trust_radius_mhz * MHZ)
    _emit(json.dumps(sol.to_dict(), indent=2) + "\n", a.out)
    return 0 if sol.satisfiable else 1


# ------------------------------------------------------------------ parser

def _drive_flags(p, *, required_fp=False):
    p.add_argument("--target", help="driven mode label (default: first tunable mode)")
    g = p.add_argument_group("amplitude")
    g.add_argument("--eps-over-fp", type=float, help="modulation index eps/wp")
    g.add_argument("--eps-mhz", type=float, help="modulation amplitude eps/2pi in MHz")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="floqmap", description="Sideband and frequency-collision maps for modulated superconducting circuits.")
    p.add_argument("--version", action="version", version=f"floqmap {__version__}")
    p.add_argument("--seed", type=int, default=0, help="tie-breaking seed for the allocator search")
    p.add_argument("--workers", type=int, default=1, help="worker processes for sweeps (output does not depend on it)")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, default_config="qq"):
        sp.add_argument("--config", default=default_config, help="system JSON path or builtin name (qq, qcq)")
        sp.add_argument("--out", default="-", help="output file (default stdout)")

    c = sub.add_parser("catalog", help="static transition table")
    common(c)
    c.add_argument("--format", choices=("csv", "json"), default="csv")
    c.add_argument("--dressed", action="store_true", help="use dressed energies for detunings")

    c = sub.add_parser("landscape", help="max collision angle versus drive frequency")
    common(c)
    c.add_argument("--fmin", type=float, required=True, help="MHz")
    c.add_argument("--fmax", type=float, required=True, help="MHz")
    c.add_argument("--points", type=int, default=201)
    c.add_argument("--scheme", choices=("qubit", "coupler"), default="qubit")
    c.add_argument("--transitions", default="all", help="'all' or a ';'-separated list like 01,10;11,02")
    c.add_argument("--reference", choices=("dressed", "bare"), default="dressed")
    c.add_argument("--svg")
    _drive_flags(c)

    c = sub.add_parser("chevron", help="population transfer versus drive frequency and time")
    common(c)
    c.add_argument("--fmin", type=float, required=True, help="MHz")
    c.add_argument("--fmax", type=float, required=True, help="MHz")
    c.add_argument("--points", type=int, default=41)
    c.add_argument("--duration-ns", type=float, default=500.0)
    c.add_argument("--samples", type=int, default=501)
    c.add_argument("--initial", default="01")
    c.add_argument("--final", default="10")
    _drive_flags(c)

    c = sub.add_parser("micromotion", help="FFT of driven populations and sideband-line matching")
    common(c)
    c.add_argument("--fp-mhz", type=float)
    c.add_argument("--psi", default="01,11", help="equal superposition of these dressed states")
    c.add_argument("--labels", default="11", help="tracked populations")
    c.add_argument("--duration-us", type=float, default=0.5)
    c.add_argument("--samples", type=int, default=100_000)
    c.add_argument("--fmax", type=float, default=500.0, help="MHz")
    c.add_argument("--floor", type=float, default=1e-3, help="relative peak threshold")
    c.add_argument("--peaks", help="CSV of detected peaks with their nearest catalogued line")
    c.add_argument("--window", choices=("rect", "hann"), default="rect", help="FFT window")
    c.add_argument("--refine-peaks", action="store_true", help="interpolate peak positions between bins")
    c.add_argument("--svg")
    _drive_flags(c)

    c = sub.add_parser("strength-sweep", help="Floquet sideband strengths against the analytic models")
    common(c)
    c.add_argument("--scheme", choices=("qubit", "coupler"), default="qubit")
    c.add_argument("--n", default="1", help="comma-separated sideband orders")
    c.add_argument("--xmax", type=float, default=4.0, help="largest eps/wp (qubit scheme)")
    c.add_argument("--eps-max-mhz", type=float, default=300.0, help="largest eps/2pi (coupler scheme)")
    c.add_argument("--points", type=int, default=25)
    c.add_argument("--pair", help="transition, e.g. 01,10")
    c.add_argument("--target")

    c = sub.add_parser("zz", help="static ZZ versus coupler frequency")
    common(c, "qcq")
    c.add_argument("--wc-min", type=float, default=6.3, help="GHz")
    c.add_argument("--wc-max", type=float, default=7.4, help="GHz")
    c.add_argument("--points", type=int, default=23)

    c = sub.add_parser("error-budget", help="population-error budget at one operating point")
    common(c)
    c.add_argument("--scheme", choices=("qubit", "coupler"), default="qubit")
    c.add_argument("--target-transition", default="01,10")
    c.add_argument("--n", type=int, default=1, help="target sideband order (sets wp when --fp-mhz is absent)")
    c.add_argument("--fp-mhz", type=float)
    c.add_argument("--harmonics", type=int, default=15)
    c.add_argument("--pulse", choices=("pi", "half_pi", "2pi"), default="pi")
    c.add_argument("--csv", help="per-group summary CSV")
    _drive_flags(c)

    c = sub.add_parser("allocate", help="frequency allocation with margin constraints")
    c.add_argument("problem", nargs="?", help="problem JSON")
    c.add_argument("--preset", choices=sorted(PRESETS))
    c.add_argument("--out", default="-")
    c.add_argument("--export-smt", help="write the constraint system as SMT-LIB s-expressions")
    c.add_argument("--trust-radius-mhz", type=float, default=5.0)
    c.add_argument("--max-nodes", type=int)
    c.add_argument("--no-refine", action="store_true")
    return p


COMMANDS = {
    "catalog": cmd_catalog,
    "landscape": cmd_landscape,
    "chevron": cmd_chevron,
    "micromotion": cmd_micromotion,
    "strength-sweep": cmd_strength_sweep,
    "zz": cmd_zz,
    "error-budget": cmd_error_budget,
    "allocate": cmd_allocate,
}

# domain failures: exit 1
DOMAIN_ERRORS = (ValueError, RuntimeError, ArithmeticError)


def dispatch(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.workers < 1:
        parser.error("--workers must be >= 1")
    try:
        if args.command == "allocate":
            system, drive = None, None
        else:
            system, drive = _load(args.config)
        return COMMANDS[args.command](args, system, drive)
    except UsageError as exc:
        print(f"floqmap: usage error: {exc}", file=sys.stderr)
        return 2
    except KeyError as exc:
        # unknown transition or state label given on the command line
        print(f"floqmap: usage error: {exc.args[0] if exc.args else exc}", file=sys.stderr)
        return 2
    except DOMAIN_ERRORS as exc:
        print(f"floqmap: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
