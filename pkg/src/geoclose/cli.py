"""Command-line front end: ``geoclose <command> [flags]``.

A problem comes from a JSON file (``--problem``), from flags, or both; flags
win. Results go to stdout as JSON. Errors go to stderr as JSON with exit code
2 (invalid input), 3 (numerical failure) or 4 (no solution).
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .closure import (
    POWERS_FULL,
    POWERS_PROOF,
    WindingNumbers,
    cartesian_winding,
    closure_residual_corollary,
    closure_residual_thm1,
    closure_residual_thm2,
    lattice_defect,
    predicted_length,
    scan_residual,
    solve_caustics_for_winding,
    thm2_winding_from_thm1,
)
from .config import DEFAULT, Tolerances
from .confocal import Ellipsoid, caustic_parameters, check_on_surface, check_tangent
from .errors import GeocloseError, ValidationError
from .oracle import GeodesicState, closure_test, state_from_caustics, trace
from .spectral import SpectralCurve, admissible_intervals

COMMANDS = ("caustics", "bands", "residual", "solve", "trace", "verify")

MODE_LINE = "line"
MODE_CAUSTICS = "caustics"
MODE_SEARCH = "search"


@dataclass
class ProblemSpec:
    """Everything a command needs.

    The mode is set by which inputs are present: a point and direction
    (``line``), caustic parameters (``caustics``) or a search bracket
    (``search``). Winding numbers may accompany any mode.
    """

    semi_axes: tuple[float, ...]
    point: tuple[float, ...] | None = None
    direction: tuple[float, ...] | None = None
    caustics: tuple[float, ...] | None = None
    winding: tuple[int, ...] | None = None
    bracket: list | None = None
    tolerances: dict = field(default_factory=dict)
    options: dict = field(default_factory=dict)

    @property
    def mode(self) -> str:
        modes = []
        if self.point is not None or self.direction is not None:
            modes.append(MODE_LINE)
        if self.caustics is not None:
            modes.append(MODE_CAUSTICS)
        if self.bracket is not None:
            modes.append(MODE_SEARCH)
        if not modes and self.winding is not None:
            modes.append(MODE_SEARCH)
        if len(modes) != 1:
            raise ValidationError(
                "give exactly one of: point+direction, caustics, or winding/bracket "
                f"(got {', '.join(modes) or 'none'})"
            )
        return modes[0]

    def tol(self) -> Tolerances:
        unknown = set(self.tolerances) - set(Tolerances.names())
        if unknown:
            raise ValidationError(f"unknown tolerance names: {sorted(unknown)}")
        conv = {}
        for k, v in self.tolerances.items():
            conv[k] = int(v) if k == "quad_max_nodes" else float(v)
        return DEFAULT.replace(**conv)

    def ellipsoid(self) -> Ellipsoid:
        return Ellipsoid(self.semi_axes, sep=self.tol().sep)

    def validate(self) -> str:
        mode = self.mode
        e = self.ellipsoid()
        tol = self.tol()
        if mode == MODE_LINE:
            if self.point is None or self.direction is None:
                raise ValidationError("line mode needs both point and direction")
            if len(self.point) != e.d or len(self.direction) != e.d:
                raise ValidationError(f"point and direction need {e.d} components")
            check_on_surface(e, self.point, tol)
            check_tangent(e, self.point, self.direction, tol)
        if mode == MODE_CAUSTICS and len(self.caustics) != e.d - 2:
            raise ValidationError(f"need {e.d - 2} caustic parameters")
        if self.winding is not None and len(self.winding) != e.d - 1:
            raise ValidationError(f"need {e.d - 1} winding numbers")
        pr = self.options.get("power_range", POWERS_PROOF)
        if pr not in (POWERS_PROOF, POWERS_FULL):
            raise ValidationError(f"power range must be {POWERS_PROOF!r} or {POWERS_FULL!r}")
        return mode


def _floats(text):
    if text is None:
        return None
    if isinstance(text, (list, tuple)):
        return tuple(float(v) for v in text)
    return tuple(float(_expr(v)) for v in str(text).replace(" ", "").split(",") if v)


def _expr(token: str) -> float:
    # accepts plain numbers and the forms sqrt(v) and p/q
    if token.startswith("sqrt(") and token.endswith(")"):
        return math.sqrt(_expr(token[5:-1]))
    if "/" in token:
        p, q = token.split("/", 1)
        return _expr(p) / _expr(q)
    try:
        return float(token)
    except ValueError:
        raise ValidationError(f"cannot read number {token!r}") from None


def _bracket(text):
    if text is None:
        return None
    if isinstance(text, list):
        return [tuple(float(v) for v in b) for b in (text if isinstance(text[0], list) else [text])]
    return [_floats(part) for part in str(text).split(";") if part]


def build_problem(args, tol_overrides: dict) -> ProblemSpec:
    data = {}
    if args.problem:
        try:
            data = json.loads(Path(args.problem).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read problem file: {exc}") from None
        known = {"semi_axes", "point", "direction", "caustics", "winding", "bracket",
                 "tolerances", "options"}
        extra = set(data) - known
        if extra:
            raise ValidationError(f"unknown problem keys: {sorted(extra)}")

    axes = _floats(args.axes) or _floats(data.get("semi_axes"))
    if axes is None:
        raise ValidationError("semi-axis parameters are required (--axes or semi_axes)")
    if args.d is not None and args.d != len(axes):
        raise ValidationError(f"--d {args.d} does not match {len(axes)} semi-axis parameters")

    winding = args.winding if args.winding is not None else data.get("winding")
    if winding is not None:
        winding = tuple(int(v) for v in (_floats(winding) if isinstance(winding, str) else winding))

    options = dict(data.get("options", {}))
    for key in ("power_range", "t_max", "samples", "events"):
        val = getattr(args, key, None)
        if val is not None:
            options[key] = val

    return ProblemSpec(
        semi_axes=axes,
        point=_floats(args.point) or _floats(data.get("point")),
        direction=_floats(args.direction) or _floats(data.get("direction")),
        caustics=_floats(args.caustics) or _floats(data.get("caustics")),
        winding=winding,
        bracket=_bracket(args.bracket) or _bracket(data.get("bracket")),
        tolerances={**data.get("tolerances", {}), **tol_overrides},
        options=options,
    )


def _curve(p: ProblemSpec) -> SpectralCurve:
    e = p.ellipsoid()
    tol = p.tol()
    if p.mode == MODE_LINE:
        cs = caustic_parameters(e, p.point, p.direction, tol)
        return SpectralCurve(e, cs.alpha, tol)
    if p.mode == MODE_CAUSTICS:
        return SpectralCurve(e, p.caustics, tol)
    raise ValidationError("this command needs a point+direction or caustic parameters")


def _start(p: ProblemSpec) -> GeodesicState:
    e = p.ellipsoid()
    if p.mode == MODE_LINE:
        return GeodesicState(np.array(p.point), np.array(p.direction))
    if p.mode == MODE_CAUSTICS:
        return state_from_caustics(e, p.caustics, tol=p.tol())
    raise ValidationError("this command needs a point+direction or caustic parameters")


def _need_winding(p: ProblemSpec) -> WindingNumbers:
    if p.winding is None:
        raise ValidationError("winding numbers are required (--winding)")
    return WindingNumbers(p.winding)


def _bands_json(c: SpectralCurve) -> list:
    b = admissible_intervals(c)
    return [{"s": s, "band": list(b[s]), "case": b.cases[s - 1]} for s in range(1, len(b) + 1)]


def _residuals(c: SpectralCurve, n, p: ProblemSpec) -> dict:
    tol = p.tol()
    pr = p.options.get("power_range", POWERS_PROOF)
    thm1 = closure_residual_thm1(c, None, n, pr, tol)
    cor = closure_residual_corollary(c, None, n, tol)
    n2 = thm2_winding_from_thm1(c, n)
    thm2 = closure_residual_thm2(c, n2, [0] * len(n2), tol=tol)
    defect, _, _ = lattice_defect(c, None, n, tol)
    return {
        "thm1": thm1.as_dict(),
        "corollary": cor.as_dict(),
        "thm2": {**thm2.as_dict(), "n": n2, "m": [0] * len(n2)},
        "lattice_defect": [float(v) for v in defect],
        "predicted_length": predicted_length(c, n, tol),
    }


def _oracle(e: Ellipsoid, start: GeodesicState, c: SpectralCurve, n, tol: Tolerances) -> dict:
    nc = cartesian_winding(c, n)
    ct = closure_test(e, start, nc, tol=tol)
    return {
        "winding_cartesian": list(nc),
        "return_distance": ct.return_distance,
        "period": ct.period,
        "predicted_period": predicted_length(c, nc, tol),
        "crossings": {str(s): list(v) for s, v in ct.crossings.items()},
        "ordering_violations": ct.ordering_violations,
        "closed": bool(ct.return_distance <= tol.oracle_close),
    }


def cmd_caustics(p: ProblemSpec) -> dict:
    if p.mode != MODE_LINE:
        raise ValidationError("caustics needs a point and a direction")
    cs = caustic_parameters(p.ellipsoid(), p.point, p.direction, p.tol())
    return {
        "command": "caustics",
        "alpha": list(cs.alpha),
        "degenerate": [{"caustic": k + 1, "semi_axis": j + 1} for k, j in cs.degenerate],
    }


def cmd_bands(p: ProblemSpec) -> dict:
    c = _curve(p)
    return {"command": "bands", "alpha": list(c.caustics), "bands": _bands_json(c)}


def cmd_residual(p: ProblemSpec, csv_path=None) -> dict:
    n = _need_winding(p)
    tol = p.tol()
    if p.mode == MODE_SEARCH:
        e = p.ellipsoid()
        if e.d != 3 or not p.bracket:
            raise ValidationError("residual scans need d = 3 and a --bracket")
        lo, hi = p.bracket[0]
        pts = int(p.options.get("scan_points", 256))
        grid, vals = scan_residual(e, n.n, lo, hi, pts, p.options.get("power_range", POWERS_PROOF), tol)
        if csv_path:
            with open(csv_path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["alpha", "relative_residual"])
                for a_, v in zip(grid, vals):
                    w.writerow([f"{a_:.17g}", f"{v:.17g}"])
        sign = np.sign(vals)
        changes = [float(grid[k]) for k in range(len(grid) - 1)
                   if np.isfinite(vals[k]) and np.isfinite(vals[k + 1]) and sign[k] * sign[k + 1] < 0]
        return {"command": "residual", "scan": {"points": pts, "bracket": [lo, hi],
                                                "sign_changes_near": changes, "csv": csv_path}}
    c = _curve(p)
    return {"command": "residual", "alpha": list(c.caustics), "winding": list(n.n),
            "tolerances": {"close": tol.close}, **_residuals(c, n, p)}


def cmd_solve(p: ProblemSpec) -> dict:
    n = _need_winding(p)
    e = p.ellipsoid()
    tol = p.tol()
    pr = p.options.get("power_range", POWERS_PROOF)
    bracket = p.bracket
    if bracket is not None and e.d == 3 and len(bracket) == 1:
        bracket = bracket[0]
    cs, rep = solve_caustics_for_winding(e, n, bracket, pr, p.options.get("scan_points"), tol)
    c = SpectralCurve(e, cs.alpha, tol)
    start = state_from_caustics(e, cs.alpha, tol=tol)
    return {
        "command": "solve",
        "winding": list(n.n),
        "alpha": list(cs.alpha),
        "residual": rep.as_dict(),
        "bands": _bands_json(c),
        "oracle": _oracle(e, start, c, n.n, tol),
    }


def cmd_trace(p: ProblemSpec, csv_path=None) -> dict:
    e = p.ellipsoid()
    tol = p.tol()
    start = _start(p)
    t_max = float(p.options.get("t_max", 50.0))
    samples = int(p.options.get("samples", 1001))
    tr = trace(e, start, t_max, samples, True, tol)
    events = json.loads(tr.events_json())
    out = {"command": "trace", "t_max": t_max, "samples": samples, "events": len(events)}
    if csv_path:
        tr.to_csv(csv_path)
        out["csv"] = str(csv_path)
    ev_path = p.options.get("events") or (str(Path(csv_path).with_suffix(".events.json")) if csv_path else None)
    if ev_path:
        Path(ev_path).write_text(tr.events_json() + "\n")
        out["events_json"] = ev_path
    else:
        out["event_list"] = events
    return out


def cmd_verify(p: ProblemSpec) -> dict:
    n = _need_winding(p)
    e = p.ellipsoid()
    tol = p.tol()
    c = _curve(p)
    res = _residuals(c, n, p)
    return {"command": "verify", "alpha": list(c.caustics), "winding": list(n.n), **res,
            "oracle": _oracle(e, _start(p), c, n.n, tol)}


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="geoclose",
        description="Closed geodesics on ellipsoids via hyperelliptic period conditions.",
        epilog="Tolerances: --tol-<name>=<value> for any of " + ", ".join(Tolerances.names()),
    )
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--problem", help="JSON problem file")
    ap.add_argument("--d", type=int, help="dimension (checked against --axes)")
    ap.add_argument("--axes", help="semi-axis parameters a1>...>ad, comma separated")
    ap.add_argument("--point", help="point on the ellipsoid")
    ap.add_argument("--direction", help="unit tangent direction")
    ap.add_argument("--caustics", help="caustic parameters")
    ap.add_argument("--winding", help="winding numbers n1,...,n_{d-1}")
    ap.add_argument("--bracket", help="lo,hi[;lo,hi...] search intervals, one per caustic")
    ap.add_argument("--power-range", dest="power_range", choices=(POWERS_PROOF, POWERS_FULL))
    ap.add_argument("--csv", help="write trajectory or scan data here")
    ap.add_argument("--events", help="events JSON path for trace")
    ap.add_argument("--t-max", dest="t_max", type=float, help="trace length")
    ap.add_argument("--samples", type=int, help="trace samples")
    return ap


def _tol_flags(rest: list[str]) -> dict:
    names = set(Tolerances.names())
    out = {}
    it = iter(rest)
    for tok in it:
        if not tok.startswith("--tol-"):
            raise ValidationError(f"unrecognised argument {tok!r}")
        key, _, val = tok[6:].partition("=")
        if not val:
            val = next(it, None)
            if val is None:
                raise ValidationError(f"{tok} needs a value")
        key = key.replace("-", "_")
        if key not in names:
            raise ValidationError(f"unknown tolerance {key!r}")
        try:
            out[key] = float(val)
        except ValueError:
            raise ValidationError(f"bad value for {tok}: {val!r}") from None
    return out


def run(argv=None) -> tuple[int, dict]:
    args, rest = _parser().parse_known_args(argv)
    try:
        p = build_problem(args, _tol_flags(rest))
        p.validate()
        if args.command == "caustics":
            out = cmd_caustics(p)
        elif args.command == "bands":
            out = cmd_bands(p)
        elif args.command == "residual":
            out = cmd_residual(p, args.csv)
        elif args.command == "solve":
            out = cmd_solve(p)
        elif args.command == "trace":
            out = cmd_trace(p, args.csv)
        else:
            out = cmd_verify(p)
    except GeocloseError as exc:
        return exc.exit_code, {"error": type(exc).__name__, "message": str(exc)}
    return 0, out


def _default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return str(obj)


def main(argv=None) -> int:
    code, out = run(argv)
    text = json.dumps(out, indent=2, default=_default)
    print(text, file=sys.stdout if code == 0 else sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
