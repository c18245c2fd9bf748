"""Command-line entry point: verify, run, sweep, contour, distance-table.

Exit codes: 0 success, 1 invariant violation, 2 config error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import sys
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from . import metrics
from .calibration import calibrate_conflict_rule
from .channels import HALF_LOSS_KM, GAMMA_HZ, LossConfig
from .distance import best_over_alpha, eta_to_length, length_to_eta
from .hybrid import StateError
from .mirror import MirrorParams
from .protocols import (
    DEFAULT_CONFLICT_RULE,
    ConflictRule,
    NoiseConfig,
    atom_probabilities,
    entanglement_swap,
    repeater_chain_success,
    state_transfer,
    teleport,
)

EXIT_OK, EXIT_VIOLATION, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3

SCHEMA_VERSION = 1
FORMULA_TOL = 1e-9
MIRROR_TOL = 1e-6

NODES = ("bob", "alice", "charlie")
# Canonical order: also the row-major order of sweep axes and CSV columns.
PARAMETERS = (
    "alpha2", "delta", "eta", "distance_km",
    *(f"{node}_{part}" for node in NODES for part in ("transmission", "epsilon", "phi")),
    "alpha_prime2", "links",
)
SETTINGS = ("schema_version", "protocol", "conflict_rule", "mc_samples", "seed",
            "half_loss_km", "gamma", "psi", "out", "format")
PROTOCOL_NAMES = ("teleport", "qst", "swap", "repeater")
SWEEPABLE = ("teleport", "qst")
OUTPUT_COLUMNS = ("fbar_engine", "fbar_closed_form", "abs_deviation", "success_probability")

PRESETS = {
    "fig2": {"protocol": "teleport", "delta": "0:0.5:101", "alpha2": "0:20:201"},
    "fig3": {"protocol": "teleport", "eta": "0:1:201", "alpha2": "0:20:201"},
    "fig4a": {"protocol": "teleport", "alpha2": 1.75,
              "bob_transmission": "0:1:101", "bob_phi": f"0:{np.pi!r}:101"},
    "fig4b": {"protocol": "teleport", "alpha2": 4.0,
              "bob_transmission": "0:1:101", "bob_phi": f"0:{np.pi!r}:101"},
    "fig4c": {"protocol": "teleport", "alpha2": 1.75,
              "bob_transmission": "0:1:101", "alice_transmission": "0:1:101"},
    "fig4d": {"protocol": "teleport", "alpha2": 4.0,
              "bob_transmission": "0:1:101", "alice_transmission": "0:1:101"},
}


class ConfigError(Exception):
    pass


def fmt(x: float) -> str:
    return "%.17g" % x


# -- configuration --------------------------------------------------------------

def parse_value(name: str, value):
    """A scalar, or a range ``{min, max, steps}`` / ``"min:max:steps"`` as a grid."""
    if isinstance(value, bool):
        raise ConfigError(f"{name}: expected a number or range")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        parts = value.split(":")
        if len(parts) == 1:
            try:
                return float(value)
            except ValueError:
                raise ConfigError(f"{name}: cannot parse {value!r}") from None
        if len(parts) != 3:
            raise ConfigError(f"{name}: ranges are written min:max:steps")
        value = {"min": parts[0], "max": parts[1], "steps": parts[2]}
    if isinstance(value, dict):
        if set(value) != {"min", "max", "steps"}:
            raise ConfigError(f"{name}: a range needs exactly min, max and steps")
        try:
            lo, hi = float(value["min"]), float(value["max"])
            steps = int(value["steps"])
        except (TypeError, ValueError):
            raise ConfigError(f"{name}: malformed range {value!r}") from None
        if steps < 2 or not lo < hi:
            raise ConfigError(f"{name}: ranges need steps >= 2 and min < max")
        return np.linspace(lo, hi, steps)
    raise ConfigError(f"{name}: expected a number or range, got {value!r}")


def parse_complex(text) -> complex:
    try:
        return complex(str(text).replace(" ", ""))
    except ValueError:
        raise ConfigError(f"cannot parse amplitude {text!r}") from None


@dataclass
class Scenario:
    protocol: str = "teleport"
    params: dict = field(default_factory=dict)
    conflict_rule: ConflictRule = DEFAULT_CONFLICT_RULE
    mc_samples: int = 0
    seed: int = 0
    half_loss_km: float = HALF_LOSS_KM
    gamma: float | None = None
    psi: tuple[complex, complex] = (1.0, 0.0)
    out: str | None = None
    format: str | None = None

    @property
    def ranged(self) -> list[str]:
        return [k for k in PARAMETERS if isinstance(self.params.get(k), np.ndarray)]

    def scalar(self, name: str, default=None):
        value = self.params.get(name, default)
        if isinstance(value, np.ndarray):
            raise ConfigError(f"{name} must be a single value here")
        return value


def load_config(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError:
        raise
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"{path}: schema_version must be {SCHEMA_VERSION}, got {version!r}")
    return data


def build_scenario(layers: Iterable[dict]) -> Scenario:
    merged: dict = {}
    for layer in layers:
        for key, value in layer.items():
            if value is not None:
                merged[key] = value
    unknown = sorted(set(merged) - set(PARAMETERS) - set(SETTINGS))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    sc = Scenario()
    if "protocol" in merged:
        if merged["protocol"] not in PROTOCOL_NAMES:
            raise ConfigError(f"protocol must be one of {', '.join(PROTOCOL_NAMES)}")
        sc.protocol = merged["protocol"]
    if "conflict_rule" in merged:
        try:
            sc.conflict_rule = ConflictRule(merged["conflict_rule"])
        except ValueError:
            names = ", ".join(r.value for r in ConflictRule)
            raise ConfigError(f"conflict_rule must be one of {names}") from None
    for key, kind in (("mc_samples", int), ("seed", int), ("half_loss_km", float),
                      ("gamma", float)):
        if key in merged:
            try:
                setattr(sc, key, kind(merged[key]))
            except (TypeError, ValueError):
                raise ConfigError(f"{key}: expected {kind.__name__}") from None
    if sc.mc_samples < 0 or sc.seed < 0:
        raise ConfigError("mc_samples and seed must be non-negative")
    if sc.half_loss_km <= 0 or (sc.gamma is not None and sc.gamma < 0):
        raise ConfigError("half_loss_km must be positive and gamma non-negative")
    if "psi" in merged:
        psi = merged["psi"]
        if not isinstance(psi, (list, tuple)) or len(psi) != 2:
            raise ConfigError("psi needs two amplitudes")
        a, b = (parse_complex(z) for z in psi)
        norm = np.sqrt(abs(a) ** 2 + abs(b) ** 2)
        if norm == 0:
            raise ConfigError("psi must be nonzero")
        sc.psi = (a / norm, b / norm)
    if "format" in merged:
        if merged["format"] not in ("csv", "json"):
            raise ConfigError("format must be csv or json")
        sc.format = merged["format"]
    sc.out = merged.get("out")
    sc.params = {k: parse_value(k, merged[k]) for k in PARAMETERS if k in merged}
    if "eta" in sc.params and "distance_km" in sc.params:
        raise ConfigError("give eta or distance_km, not both")
    for node in NODES:
        if f"{node}_transmission" in sc.params and f"{node}_epsilon" in sc.params:
            raise ConfigError(f"give {node}_transmission or {node}_epsilon, not both")
    return sc


def noise_at(sc: Scenario, point: dict) -> NoiseConfig:
    try:
        loss = None
        if "eta" in point:
            loss = LossConfig(eta=point["eta"])
        elif "distance_km" in point:
            loss = LossConfig(distance_km=point["distance_km"], gamma=sc.gamma,
                              half_loss_km=sc.half_loss_km)
        mirrors = {}
        for node in NODES:
            phi = point.get(f"{node}_phi", 0.0)
            if f"{node}_transmission" in point:
                mirrors[node] = MirrorParams.from_transmission(point[f"{node}_transmission"], phi)
            else:
                mirrors[node] = MirrorParams(point.get(f"{node}_epsilon", 0.0), phi)
        return NoiseConfig(delta=point.get("delta", 0.0), loss=loss,
                           mirror_bob=mirrors["bob"], mirror_alice=mirrors["alice"],
                           mirror_charlie=mirrors["charlie"], conflict_rule=sc.conflict_rule)
    except StateError as exc:
        raise ConfigError(str(exc)) from None


def noise_family(keys: Iterable[str]) -> str:
    keys = set(keys)
    families = []
    if "delta" in keys:
        families.append("delta")
    if keys & {"eta", "distance_km"}:
        families.append("eta")
    if any(k.startswith(("bob_", "alice_")) for k in keys):
        families.append("mirror")
    if any(k.startswith("charlie_") for k in keys):
        raise ConfigError("charlie's mirror only enters the swap protocol")
    if len(families) > 1:
        raise ConfigError(f"no closed form combines {' and '.join(families)}; sweep one at a time")
    return families[0] if families else "ideal"


def closed_form(family: str, point: dict, noise: NoiseConfig) -> float:
    A = point["alpha2"]
    # looked up at call time so tests can tamper with the module
    if family == "ideal":
        return metrics.closed_form_ideal(A)
    if family == "delta":
        return metrics.closed_form_delta(A, point["delta"])
    if family == "eta":
        return metrics.closed_form_eta(A, noise.eta)
    bob, alice = noise.mirror_bob, noise.mirror_alice
    return metrics.closed_form_mirror(A, bob.r, bob.t, alice.r, alice.t)


def tolerance(family: str) -> float:
    return MIRROR_TOL if family == "mirror" else FORMULA_TOL


# -- output ---------------------------------------------------------------------

def render_table(columns: Sequence[str], rows: Sequence[Sequence], form: str,
                 extra: dict | None = None) -> str:
    if form == "json":
        payload = {"schema_version": SCHEMA_VERSION, **(extra or {}),
                   "columns": list(columns), "rows": [list(r) for r in rows]}
        return json.dumps(payload, indent=1) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    with open(out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


# -- verify ---------------------------------------------------------------------

@dataclass
class SuiteResult:
    name: str
    points: int
    max_deviation: float
    tolerance: float
    worst: dict

    @property
    def ok(self) -> bool:
        return self.max_deviation <= self.tolerance


def _suite(name: str, family: str, grid: Iterable[dict], protocols=("teleport", "qst"),
           rule: ConflictRule = DEFAULT_CONFLICT_RULE) -> SuiteResult:
    sc = Scenario(conflict_rule=rule)
    worst_dev, worst, count = -1.0, {}, 0
    for point in grid:
        noise = noise_at(sc, point)
        reference = closed_form(family, point, noise)
        for protocol in protocols:
            avg = metrics.design_average(protocol, np.sqrt(point["alpha2"]), noise)
            devs = [abs(avg.fidelity - reference)]
            if family in ("ideal", "delta"):
                devs.append(abs(avg.success_probability
                                - metrics.success_probability_closed(point["alpha2"])))
            count += 1
            if max(devs) > worst_dev:
                worst_dev, worst = max(devs), {"protocol": protocol, **point}
    return SuiteResult(name, count, worst_dev, tolerance(family), worst)


def _grid(**axes) -> list[dict]:
    names = list(axes)
    return [dict(zip(names, (float(v) for v in combo)))
            for combo in itertools.product(*axes.values())]


VERIFY_SUITES: dict[str, Callable[[], SuiteResult]] = {
    "ideal": lambda: _suite("ideal", "ideal", _grid(alpha2=[0.25, 1.0, 1.75, 4.0, 9.0])),
    "delta": lambda: _suite("delta", "delta", _grid(alpha2=np.linspace(0, 9, 21),
                                                   delta=np.linspace(0, np.pi, 21))),
    "eta": lambda: _suite("eta", "eta", _grid(alpha2=np.linspace(0, 9, 21),
                                             eta=np.linspace(0, 1, 21))),
    "mirror": lambda: _suite("mirror", "mirror", _grid(
        alpha2=[1.75, 4.0],
        bob_epsilon=np.linspace(0, 0.5, 3), bob_phi=np.linspace(0, 0.5, 3),
        alice_epsilon=np.linspace(0, 0.5, 3), alice_phi=np.linspace(0, 0.5, 3)),
        protocols=("teleport",)),
}


def cmd_verify(args) -> int:
    names = args.suite or list(VERIFY_SUITES)
    results = [VERIFY_SUITES[n]() for n in names]
    print(f"{'formula':<8} {'points':>6} {'max_deviation':>14} {'tolerance':>10}  status")
    for r in results:
        print(f"{r.name:<8} {r.points:>6} {r.max_deviation:>14.3e} {r.tolerance:>10.0e}  "
              f"{'ok' if r.ok else 'FAIL'}")
        if not r.ok:
            print(f"  worst point: {r.worst}", file=sys.stderr)
    print(f"conflict_rule: {DEFAULT_CONFLICT_RULE.value}")
    report = {
        "conflict_rule": DEFAULT_CONFLICT_RULE.value,
        "suites": [{"name": r.name, "points": r.points, "max_deviation": r.max_deviation,
                    "tolerance": r.tolerance, "ok": r.ok, "worst_point": r.worst}
                   for r in results],
    }
    status = EXIT_OK if all(r.ok for r in results) else EXIT_VIOLATION
    if args.calibrate:
        cal = calibrate_conflict_rule()
        report["calibration"] = cal.to_dict()
        print(f"calibrated rule: {cal.chosen.value} (residual {cal.residual:.3e})")
        if cal.chosen != DEFAULT_CONFLICT_RULE:
            print("default conflict rule disagrees with calibration", file=sys.stderr)
            status = EXIT_VIOLATION
    if args.report:
        emit(json.dumps(report, indent=2) + "\n", args.report)
    return status


# -- run ------------------------------------------------------------------------

def cmd_run(sc: Scenario) -> int:
    if sc.ranged:
        raise ConfigError(f"run takes single values; ranged: {', '.join(sc.ranged)}")
    if sc.format not in (None, "json"):
        raise ConfigError("run writes json only")
    point = dict(sc.params)
    noise = noise_at(sc, point)

    if sc.protocol == "repeater":
        a2 = _required(sc, "alpha_prime2")
        links = sc.scalar("links", 1.0)
        if links != int(links) or links < 1:
            raise ConfigError("links must be a positive integer")
        exact, approx = repeater_chain_success(np.sqrt(a2), int(links))
        print(f"P_chain exact = {fmt(exact)}")
        print(f"P_chain approx = {fmt(approx)}")
        payload = {"protocol": "repeater", "alpha_prime2": a2, "links": int(links),
                   "exact": exact, "approx": approx}
    elif sc.protocol == "swap":
        a2p = _required(sc, "alpha_prime2")
        a2 = sc.scalar("alpha2", a2p)
        res = entanglement_swap(np.sqrt(a2p), np.sqrt(a2), noise)
        print(f"stage1_success = {fmt(res.success_probability)}")
        bell = "nan" if res.bell_fidelity is None else fmt(res.bell_fidelity)
        print(f"bell_fidelity = {bell}")
        payload = _swap_payload(res)
    else:
        a2 = _required(sc, "alpha2")
        run = teleport if sc.protocol == "teleport" else state_transfer
        result = run(sc.psi, np.sqrt(a2), noise)
        avg = metrics.design_average(sc.protocol, np.sqrt(a2), noise)
        print(f"P_s = {fmt(result.success_probability)}")
        print(f"Fbar = {fmt(avg.fidelity)}")
        if sc.protocol == "qst":
            p_plus, p_minus = atom_probabilities(result)
            print(f"P_+ = {fmt(p_plus)}")
            print(f"P_- = {fmt(p_minus)}")
        payload = result.to_dict()
        payload["fbar_2design"] = avg.fidelity
    if sc.out:
        emit(json.dumps(payload, indent=2) + "\n", sc.out)
    return EXIT_OK


def _required(sc: Scenario, name: str) -> float:
    value = sc.scalar(name)
    if value is None:
        raise ConfigError(f"{sc.protocol} needs {name}")
    if value < 0:
        raise ConfigError(f"{name} must be non-negative")
    return value


def _swap_payload(res) -> dict:
    return {
        "protocol": "swap",
        "success_probability": res.success_probability,
        "bell_fidelity": res.bell_fidelity,
        "stage1": [{"record": [str(x) for x in o.record], "probability": o.probability,
                    "corrections": o.corrections, "success": o.success,
                    "pair_state": [[[z.real, z.imag] for z in row] for row in o.pair_state.tolist()]}
                   for o in res.stage1],
        "relay": [{"record": [str(x) for x in o.record], "probability": o.probability,
                   "pending_correction": o.pending_correction,
                   "channel_fidelity": o.channel_fidelity}
                  for o in (res.relay_channel or ())],
    }


# -- sweep ----------------------------------------------------------------------

def sweep_rows(sc: Scenario) -> tuple[list[str], list[list[float]], list[str]]:
    """Evaluate the grid; returns columns, rows in row-major order, violations."""
    if sc.protocol not in SWEEPABLE:
        raise ConfigError(f"sweep supports {', '.join(SWEEPABLE)}")
    axes = sc.ranged
    if not axes:
        raise ConfigError("sweep needs at least one ranged parameter")
    if "alpha2" not in sc.params:
        raise ConfigError("sweep needs alpha2")
    for name in ("alpha_prime2", "links"):
        if name in sc.params:
            raise ConfigError(f"{name} does not apply to {sc.protocol}")
    family = noise_family(sc.params)
    tol = tolerance(family)
    fixed = {k: v for k, v in sc.params.items() if k not in axes}
    columns = list(axes) + list(OUTPUT_COLUMNS)
    if sc.mc_samples:
        columns += ["fbar_mc", "fbar_mc_stderr"]
    rows, violations = [], []
    for index, combo in enumerate(itertools.product(*(sc.params[a] for a in axes))):
        point = {**fixed, **dict(zip(axes, (float(v) for v in combo)))}
        if point["alpha2"] < 0:
            raise ConfigError("alpha2 must be non-negative")
        noise = noise_at(sc, point)
        alpha = np.sqrt(point["alpha2"])
        avg = metrics.design_average(sc.protocol, alpha, noise)
        reference = closed_form(family, point, noise)
        dev = abs(avg.fidelity - reference)
        row = [point[a] for a in axes] + [avg.fidelity, reference, dev, avg.success_probability]
        if sc.mc_samples:
            mc = metrics.average_fidelity_mc(sc.protocol, alpha, noise, sc.mc_samples,
                                             sc.seed + index)
            row += [mc.mean, mc.stderr]
        rows.append(row)
        if not dev <= tol:
            where = ", ".join(f"{a}={fmt(point[a])}" for a in axes)
            violations.append(f"{where}: |fbar_engine - fbar_closed_form| = {dev:.3e} > {tol:.0e}")
    return columns, rows, violations


def cmd_sweep(sc: Scenario) -> int:
    columns, rows, violations = sweep_rows(sc)
    extra = {"protocol": sc.protocol, "conflict_rule": sc.conflict_rule.value,
             "seed": sc.seed, "mc_samples": sc.mc_samples}
    emit(render_table(columns, rows, sc.format or "csv", extra), sc.out)
    for v in violations:
        print(f"violation at {v}", file=sys.stderr)
    return EXIT_VIOLATION if violations else EXIT_OK


# -- contour --------------------------------------------------------------------

def read_grid(path: str, x: str, y: str, value: str):
    """Pivot a sweep CSV into axes ``xs``, ``ys`` and a field ``z[ix, iy]``."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {x, y, value} - set(reader.fieldnames or ())
        if missing:
            raise ConfigError(f"{path}: missing columns {', '.join(sorted(missing))}")
        data = [(float(r[x]), float(r[y]), float(r[value])) for r in reader]
    if not data:
        raise ConfigError(f"{path}: no rows")
    arr = np.array(data)
    xs, ix = np.unique(arr[:, 0], return_inverse=True)
    ys, iy = np.unique(arr[:, 1], return_inverse=True)
    if len(xs) < 2 or len(ys) < 2 or len(arr) != len(xs) * len(ys):
        raise ConfigError(f"{path}: {x} x {y} is not a full 2-D grid")
    z = np.full((len(xs), len(ys)), np.nan)
    z[ix, iy] = arr[:, 2]
    if np.isnan(z).any():
        raise ConfigError(f"{path}: duplicate grid points")
    return xs, ys, z


def contour_polylines(xs, ys, z, level: float) -> list[np.ndarray]:
    """Iso-lines of ``z`` at ``level`` in data coordinates (marching squares)."""
    from skimage.measure import find_contours

    lines = []
    for path in find_contours(z, level):
        px = np.interp(path[:, 0], np.arange(len(xs)), xs)
        py = np.interp(path[:, 1], np.arange(len(ys)), ys)
        lines.append(np.column_stack([px, py]))
    return lines


def cmd_contour(args) -> int:
    xs, ys, z = read_grid(args.csv, args.x, args.y, args.value)
    lines = contour_polylines(xs, ys, z, args.level)
    names = [args.x, args.y]
    if args.eta_to_km:
        if "eta" not in names:
            raise ConfigError("--eta-to-km needs eta as an axis")
        k = names.index("eta")
        names[k] = "distance_km"
        for line in lines:
            line[:, k] = [eta_to_length(e, args.half_loss_km) for e in line[:, k]]
    rows = [[i, float(px), float(py)] for i, line in enumerate(lines) for px, py in line]
    emit(render_table(["polyline", *names], rows, "csv"), args.out)
    return EXIT_OK


# -- distance table -------------------------------------------------------------

def parse_lengths(items: Sequence[str]) -> list[float]:
    out = []
    for item in items:
        for part in item.split(","):
            if part.strip():
                try:
                    out.append(float(part))
                except ValueError:
                    raise ConfigError(f"bad length {part!r}") from None
    if not out or min(out) < 0:
        raise ConfigError("lengths must be a non-empty list of non-negative km")
    return out


def distance_rows(lengths: Sequence[float], mapping: str, gamma: float | None,
                  half_loss_km: float) -> list[list[float]]:
    rows = []
    for length in lengths:
        try:
            eta = length_to_eta(length, mapping, gamma, half_loss_km)
        except (StateError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
        best = best_over_alpha(eta)
        rows.append([float(length), eta, best.mean_photons, best.fidelity])
    return rows


def cmd_distance_table(args) -> int:
    mapping = args.mapping or ("gamma" if args.gamma is not None else "half-loss")
    gamma = GAMMA_HZ if mapping == "gamma" and args.gamma is None else args.gamma
    rows = distance_rows(parse_lengths(args.lengths), mapping, gamma, args.half_loss_km)
    emit(render_table(["length_km", "eta", "best_alpha2", "best_fidelity"], rows, "csv"),
         args.out)
    return EXIT_OK


# -- argument parsing -----------------------------------------------------------

def _scenario_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON scenario file (schema_version 1)")
    p.add_argument("--protocol", choices=PROTOCOL_NAMES)
    for name in PARAMETERS:
        p.add_argument("--" + name.replace("_", "-"), dest=name, metavar="V",
                       help="value, or range min:max:steps")
    p.add_argument("--psi", nargs=2, metavar=("A", "B"), help="input qubit amplitudes")
    p.add_argument("--conflict-rule", choices=[r.value for r in ConflictRule])
    p.add_argument("--mc-samples", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--half-loss-km", type=float)
    p.add_argument("--gamma", type=float, help="damping rate in Hz (maps distance via time of flight)")
    p.add_argument("--out")
    p.add_argument("--format", choices=("csv", "json"))


def _scenario_from_args(args, preset: str | None = None) -> Scenario:
    layers = []
    if preset:
        layers.append(PRESETS[preset])
    if args.config:
        layers.append({k: v for k, v in load_config(args.config).items() if k != "schema_version"})
    flags = {k: getattr(args, k) for k in (*PARAMETERS, *SETTINGS) if hasattr(args, k)}
    layers.append(flags)
    return build_scenario(layers)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qmirror", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="compare the engine against the closed forms")
    v.add_argument("--suite", action="append", choices=list(VERIFY_SUITES))
    v.add_argument("--report", help="write a JSON report here")
    v.add_argument("--calibrate", action="store_true", help="rerun the both-click calibration")

    r = sub.add_parser("run", help="run one protocol instance")
    _scenario_flags(r)

    s = sub.add_parser("sweep", help="evaluate average fidelity on a parameter grid")
    _scenario_flags(s)
    s.add_argument("--preset", choices=sorted(PRESETS))

    c = sub.add_parser("contour", help="extract an iso-fidelity polyline from a sweep CSV")
    c.add_argument("csv")
    c.add_argument("--level", type=float, required=True)
    c.add_argument("--x", default="alpha2")
    c.add_argument("--y", required=True)
    c.add_argument("--value", default="fbar_engine")
    c.add_argument("--eta-to-km", action="store_true", help="report the eta axis as fibre length")
    c.add_argument("--half-loss-km", type=float, default=HALF_LOSS_KM)
    c.add_argument("--out")

    d = sub.add_parser("distance-table", help="best fidelity over photon number per fibre length")
    d.add_argument("--lengths", nargs="+", required=True, help="km, comma or space separated")
    d.add_argument("--gamma", type=float, help="damping rate in Hz")
    d.add_argument("--mapping", choices=("half-loss", "gamma"))
    d.add_argument("--half-loss-km", type=float, default=HALF_LOSS_KM)
    d.add_argument("--out")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        if args.command == "verify":
            return cmd_verify(args)
        if args.command == "run":
            return cmd_run(_scenario_from_args(args))
        if args.command == "sweep":
            return cmd_sweep(_scenario_from_args(args, args.preset))
        if args.command == "contour":
            return cmd_contour(args)
        return cmd_distance_table(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
