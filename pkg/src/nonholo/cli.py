"""Command-line front end: ``nonholo geometry|generate|flow|soliton-metric --scene S --out DIR``.

Exit codes: 0 when every residual is under its tolerance, 2 when a residual
check fails (or the workflow hits a data-level error), 1 for usage, parse
and I/O errors.  Reports are deterministic for a given scene and seed.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from . import connection as conn
from .einstein import (COORDS4, AnsatzData, SourceSpec, convention_constant, einstein_residual,
                       generate_solution, interior_points, lc_constraint_residual)
from .errors import BlowUpError, NonholoError, StabilityError
from .expr import ParseError, evaluate_batch, parse
from .manifold import DMetric, NConnection, Splitting, nonholonomy
from .sampling import sample_points
from .soliton.evolve import (FlowState, HierarchyConfig, evolve, relative_drift, shift_field,
                             stability_bound)
from .soliton.seeds import line_soliton_h4, solit1_residual, solitonic_metric
from .soliton.spectral import CurveField, grid_points


class UsageError(Exception):
    """Bad invocation, unreadable scene or invalid scene content (exit code 1)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


DEFAULT_TOLERANCES = {
    "geometry": {"compatibility": 1e-10, "distortion": 1e-7, "lc_torsion": 1e-8, "constant_connection": 1e-10,
                 "curvature_spread": 1e-9, "curvature_closed_form": 1e-9, "scalar_spread": 1e-10},
    "generate": {"einstein": 1e-7},
    "flow": {"H0_drift": 1e-8, "H1_drift": 1e-6, "advection": 1e-6},
    "soliton-metric": {"solit1": 1e-6, "einstein": 1e-6},
}


# -- helpers -----------------------------------------------------------------------------------------
def _clean(x: Any) -> Any:
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(x, Mapping):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (np.floating, float)):
        f = float(x)
        return f if math.isfinite(f) else None
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def dumps(obj: Any) -> str:
    """Deterministic JSON (sorted keys, shortest round-trip floats)."""
    return json.dumps(_clean(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _fmt(x: float) -> str:
    return repr(float(x))


def write_csv(path: Path, header: list[str], rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([c if isinstance(c, str) else _fmt(c) for c in r])
    path.write_text(buf.getvalue())


def _threads() -> int:
    raw = os.environ.get("TOOL_THREADS")
    if raw is None or raw == "":
        return os.cpu_count() or 1
    try:
        t = int(raw)
    except ValueError:
        raise UsageError(f"TOOL_THREADS must be a positive integer, got {raw!r}")
    if t < 1:
        raise UsageError(f"TOOL_THREADS must be a positive integer, got {raw!r}")
    return t


def _chunked_eval(tables: Mapping[str, Any], points: Mapping[str, np.ndarray], threads: int) -> dict:
    """eval_tables over point chunks in a thread pool; results are reassembled in point order."""
    P = len(next(iter(points.values())))
    nchunks = max(1, min(threads, P))
    bounds = np.linspace(0, P, nchunks + 1).astype(int)
    chunks = [{k: v[bounds[i]:bounds[i + 1]] for k, v in points.items()} for i in range(nchunks)]
    if nchunks == 1:
        parts = [conn.eval_tables(tables, chunks[0])]
    else:
        with ThreadPoolExecutor(max_workers=nchunks) as ex:
            parts = list(ex.map(lambda c: conn.eval_tables(tables, c), chunks))
    return {k: np.concatenate([p[k] for p in parts], axis=0) for k in tables}


def _flat_columns(name: str, arr: np.ndarray) -> tuple[list[str], np.ndarray]:
    shape = arr.shape[1:]
    cols = [name + "".join(f"_{i}" for i in idx) for idx in np.ndindex(*shape)] if shape else [name]
    return cols, arr.reshape(arr.shape[0], -1)


def _residual(value: float, tol: float, mean: float | None = None) -> dict:
    out = {"max": float(value), "tolerance": tol}
    if mean is not None:
        out["mean"] = float(mean)
    return out


def _status(residuals: Mapping[str, dict]) -> str:
    ok = all(r["max"] is not None and math.isfinite(r["max"]) and r["max"] < r["tolerance"]
             for r in residuals.values())
    return "pass" if ok else "fail"


def _require(scene: Mapping, *sections: str) -> None:
    for s in sections:
        if s not in scene:
            raise UsageError(f"scene lacks required section {s!r}")


def _tolerances(scene: Mapping, cmd: str) -> dict:
    tol = dict(DEFAULT_TOLERANCES[cmd])
    user = scene.get("tolerances", {})
    if not isinstance(user, Mapping):
        raise UsageError("'tolerances' must be an object")
    for k, v in user.items():
        if k in tol:
            tol[k] = float(v)
    return tol


def _box(scene: Mapping, coords) -> dict:
    raw = scene.get("splitting", {}).get("box", {})
    box = {}
    for c in coords:
        lo, hi = raw.get(c, (0.0, 1.0))
        if not float(hi) > float(lo):
            raise UsageError(f"box for {c} must satisfy lo < hi")
        box[c] = (float(lo), float(hi))
    return box


# -- geometry ------------------------------------------------------------------------------------------
def cmd_geometry(scene: Mapping, out: Path, opts) -> dict:
    _require(scene, "splitting", "metric", "nconnection")
    sp = scene["splitting"]
    n, m = int(sp["n"]), int(sp["m"])
    if "h_coords" in sp or "v_coords" in sp:
        split = Splitting(n, m, tuple(sp.get("h_coords", [f"x{i + 1}" for i in range(n)])),
                          tuple(sp.get("v_coords", [f"y{n + a + 1}" for a in range(m)])))
    else:
        split = Splitting.standard(n, m)
    dm = DMetric.from_strings(split, scene["metric"]["g"], scene["metric"]["h"])
    nc = NConnection.from_strings(split, scene["nconnection"]["N"])
    tol = _tolerances(scene, "geometry")
    box = _box(scene, split.coords)
    pts = sample_points(box, int(scene.get("samples", 32)), int(scene.get("seed", 0)), split.coords)
    dm.check_invertible(pts)

    nh = nonholonomy(nc)
    dc = conn.canonical_dconnection(dm, nc)
    cb = conn.dcurvature(dc, nc, nh)
    ric = conn.ricci_and_scalars(cb, dm)
    lc = conn.levicivita_via_distortion(dm, nc, dc)
    tables = {"L_h": dc.L_h, "L_v": dc.L_v, "C_h": dc.C_h, "C_v": dc.C_v, **cb.as_dict(),
              "R_ij": ric.R_ij, "R_ia": ric.R_ia, "R_ai": ric.R_ai, "S_ab": ric.S_ab,
              "R_h": ric.R_h, "S_v": ric.S_v, "R_total": ric.R_total,
              "Gamma": lc.Gamma, "lc_torsion": conn.torsion_of_table(lc.Gamma, nc, nh)}
    vals = _chunked_eval(tables, pts, opts.threads)

    residuals = {"compatibility": _residual(conn.compatibility_residual(dc, dm, nc, pts), tol["compatibility"])}
    brute = conn.bruteforce_levicivita(dm, nc, pts)
    diff = np.abs(vals["Gamma"] - brute)
    residuals["distortion"] = _residual(diff.max(), tol["distortion"], diff.mean())
    tors = np.abs(vals["lc_torsion"])
    residuals["lc_torsion"] = _residual(tors.max() if tors.size else 0.0, tol["lc_torsion"])

    constants: dict[str, Any] = {}
    blocks = list(cb.as_dict())
    spreads = {b: float(np.max(np.ptp(vals[b], axis=0))) if vals[b].size else 0.0 for b in blocks}
    constants["R_blocks_spread"] = max(spreads.values())
    constants["R_total_mean"] = float(np.mean(vals["R_total"]))
    constants["R_h_mean"] = float(np.mean(vals["R_h"]))
    constants["S_v_mean"] = float(np.mean(vals["S_v"]))
    constants["R_total_spread"] = float(np.ptp(vals["R_total"]))
    if "constant" in scene:
        cs = scene["constant"]
        spec = conn.ConstantConnectionSpec(np.array(cs["h0"], dtype=float), np.array(cs["L0"], dtype=float))
        residuals["constant_connection"] = _residual(conn.constant_connection_check(nc, spec, pts),
                                                     tol["constant_connection"])
        residuals["curvature_spread"] = _residual(constants["R_blocks_spread"], tol["curvature_spread"])
        closed = conn.constant_curvature_closed_form(spec.L0)
        residuals["curvature_closed_form"] = _residual(
            float(np.max(np.abs(vals["R_vvhh"] - closed[None]))), tol["curvature_closed_form"])
        residuals["scalar_spread"] = _residual(constants["R_total_spread"], tol["scalar_spread"])

    coord_cols = list(split.coords)
    coord_vals = np.stack([pts[c] for c in split.coords], axis=1)
    artifacts = []
    for fname, names in (("connection.csv", ["L_h", "L_v", "C_h", "C_v"]),
                         ("curvature.csv", blocks),
                         ("ricci.csv", ["R_ij", "R_ia", "R_ai", "S_ab", "R_h", "S_v", "R_total"])):
        header, cols = ["point"] + coord_cols, [coord_vals]
        for nm in names:
            h, a = _flat_columns(nm, vals[nm])
            header += h
            cols.append(a)
        data = np.concatenate(cols, axis=1)
        write_csv(out / fname, header, ([str(k)] + list(row) for k, row in enumerate(data)))
        artifacts.append(fname)
    return {"residuals": residuals, "constants": constants, "artifacts": artifacts, "tolerances": tol}


# -- generate ------------------------------------------------------------------------------------------
def _ansatz(scene: Mapping, box: dict, f_default: str | None = None) -> AnsatzData:
    a = scene["ansatz"]
    coords = list(COORDS4)

    def ex(key, default):
        return parse(str(a.get(key, default)), coords)

    def pair(key):
        vals = a.get(key, ["0", "0"])
        if len(vals) != 2:
            raise UsageError(f"ansatz.{key} must list two expressions")
        return (parse(str(vals[0]), coords), parse(str(vals[1]), coords))

    f_src = a.get("f", f_default)
    if f_src is None:
        raise UsageError("ansatz lacks 'f'")
    eps = tuple(int(e) for e in a.get("eps", [1, 1, -1, -1]))
    return AnsatzData(psi=ex("psi", "0"), f=parse(str(f_src), coords), f0=ex("f0", "0"),
                      sigma0=ex("sigma0", "1"), h0bar=ex("h0bar", "1"), h0=float(a.get("h0", 1.0)),
                      eps=eps, n1=pair("n1"), n2=pair("n2"), box=box,
                      v0=None if a.get("v0") is None else float(a["v0"]))


def _metric_grid(sol, box: dict, per_axis: int) -> tuple[list[str], np.ndarray]:
    axes = [np.linspace(box[c][0], box[c][1], per_axis) for c in ("x1", "x2", "v")]
    X1, X2, V = np.meshgrid(*axes, indexing="ij")
    pts = {"x1": X1.ravel(), "x2": X2.ravel(), "v": V.ravel(),
           "y4": np.full(X1.size, 0.5 * (box["y4"][0] + box["y4"][1]))}
    exprs = [sol.dm.g[0][0], sol.dm.g[1][1], sol.h3, sol.h4, *sol.w, *sol.n]
    vals = evaluate_batch(exprs, pts)
    header = ["x1", "x2", "v", "y4", "g1", "g2", "h3", "h4", "w1", "w2", "n1", "n2"]
    return header, np.stack([pts[c] for c in COORDS4] + list(vals), axis=1)


def cmd_generate(scene: Mapping, out: Path, opts) -> dict:
    _require(scene, "ansatz")
    vacuum = bool(opts.vacuum or scene.get("vacuum", False))
    if not vacuum:
        _require(scene, "source")
    tol = _tolerances(scene, "generate")
    box = _box(scene, COORDS4)
    seed = int(scene.get("seed", 0))
    ad = _ansatz(scene, box)
    src = None
    if not vacuum:
        s = scene["source"]
        src = SourceSpec(parse(str(s.get("Upsilon1", "0")), COORDS4),
                         parse(str(s.get("Upsilon3", "0")), COORDS4), float(s.get("kappa", 1.0)))
    variant = str(scene["ansatz"].get("variant", "exact"))
    sol = generate_solution(ad, src, vacuum=vacuum, seed=seed, variant=variant)
    pts = interior_points(box, int(scene.get("samples", 32)), seed)
    rep = einstein_residual(sol, src, pts)
    residuals = {"einstein": _residual(rep.max_residual, tol["einstein"], float(np.mean(rep.components)))}
    lcr = lc_constraint_residual(sol, src, pts)
    constants: dict[str, Any] = {
        "R_h_mean": float(np.mean(rep.R_h)), "S_v_mean": float(np.mean(rep.S_v)),
        "lc_constraints": {"ep2b": lcr.ep2b, "ep2b1": lcr.ep2b1, "ep2b1_printed": lcr.ep2b1_printed,
                           "ep2b2": lcr.ep2b2, "degenerate": lcr.degenerate},
        "variant": variant, "vacuum": vacuum,
    }
    if src is not None:
        constants["convention_constant"] = convention_constant(sol, src, pts)
    header, data = _metric_grid(sol, box, int(scene.get("grid", 5)))
    write_csv(out / "metric.csv", header, data)
    return {"residuals": residuals, "constants": constants, "artifacts": ["metric.csv"], "tolerances": tol,
            "warnings": list(sol.warnings)}


# -- flow -------------------------------------------------------------------------------------------------
def cmd_flow(scene: Mapping, out: Path, opts) -> dict:
    _require(scene, "flow")
    fl = scene["flow"]
    tol = _tolerances(scene, "flow")
    p, N, L = int(fl.get("p", 1)), int(fl.get("N", 256)), float(fl.get("Lbox", 2 * math.pi))
    k, Rbar = int(fl.get("k", 1)), float(fl.get("Rbar", 0.0))
    steps, stride = int(fl.get("steps", 100)), int(fl.get("stride", 0))
    init = fl.get("initial")
    if init is None:
        raise UsageError("flow.initial is required")
    init = [init] if isinstance(init, str) else list(init)
    if len(init) != p:
        raise UsageError(f"flow.initial must give {p} component expression(s)")
    l = grid_points(N, L)
    comps = evaluate_batch([parse(str(e), ["l"]) for e in init], {"l": l})
    field = CurveField(np.stack(comps, axis=1), L)
    dt = float(fl["dt"]) if "dt" in fl else None
    if dt is None:
        dt = 0.5 * stability_bound(k, field.dl)
    try:
        cfg = HierarchyConfig(k, dt, steps, bool(fl.get("dealias", False)), stride, bool(opts.override_dt))
    except ValueError as exc:
        raise UsageError(str(exc))
    failure = None
    try:
        snaps = evolve(FlowState(field, 0.0, Rbar), cfg)
    except StabilityError as exc:
        raise UsageError(str(exc))
    except BlowUpError as exc:
        snaps = [FlowState(field, 0.0, Rbar).with_diagnostics(), exc.last_good]
        failure = {"code": "blow_up", "message": str(exc)}

    residuals = {"H0_drift": _residual(relative_drift(snaps, "H0"), tol["H0_drift"]),
                 "H1_drift": _residual(relative_drift(snaps, "H1"), tol["H1_drift"])}
    if failure:
        residuals["blow_up"] = _residual(float("inf"), 0.0)
    if k == 0 and not failure:
        expected = shift_field(field.values, -snaps[-1].tau, L)
        residuals["advection"] = _residual(float(np.max(np.abs(snaps[-1].field.values - expected))),
                                           tol["advection"])
    drifts2 = {name: relative_drift(snaps, name) for name in ("H2_printed", "H2_squared")}
    constants = {
        "dt": dt, "steps": steps, "tau_end": snaps[-1].tau,
        "H_series": [{"tau": s.tau, **s.H.as_dict()} for s in snaps],
        "H2_drift": drifts2,
        "H2_conserved_variant": min(drifts2, key=drifts2.get),
    }
    rows = []
    for s in snaps:
        for j in range(N):
            rows.append([s.tau, l[j], *s.field.values[j]])
    write_csv(out / "trajectory.csv", ["tau", "l"] + [f"v{c + 1}" for c in range(p)], rows)
    rep = {"residuals": residuals, "constants": constants, "artifacts": ["trajectory.csv"], "tolerances": tol}
    if failure:
        rep["failure"] = failure
    return rep


# -- soliton-metric -------------------------------------------------------------------------------------
def cmd_soliton_metric(scene: Mapping, out: Path, opts) -> dict:
    _require(scene, "soliton")
    kappa = float(scene["soliton"].get("kappa", 1.0))
    tol = _tolerances(scene, "soliton-metric")
    box = _box(scene, COORDS4)
    seed = int(scene.get("seed", 0))
    ad = _ansatz({"ansatz": scene.get("ansatz", {})}, box, f_default="v")
    h4 = line_soliton_h4(kappa)
    pts = interior_points(box, int(scene.get("samples", 32)), seed)
    s1 = solit1_residual(h4, int(scene["soliton"].get("eps", 1)), pts)
    sol = solitonic_metric(h4, ad, seed=seed)
    rep = einstein_residual(sol, None, pts)
    residuals = {"solit1": _residual(s1, tol["solit1"]),
                 "einstein": _residual(rep.max_residual, tol["einstein"], float(np.mean(rep.components)))}
    header, data = _metric_grid(sol, box, int(scene.get("grid", 5)))
    write_csv(out / "metric.csv", header, data)
    return {"residuals": residuals, "constants": {"kappa": kappa, "h4": str(h4)}, "artifacts": ["metric.csv"],
            "tolerances": tol}


COMMANDS = {"geometry": cmd_geometry, "generate": cmd_generate, "flow": cmd_flow,
            "soliton-metric": cmd_soliton_metric}


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="nonholo", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--scene", required=True, type=Path)
    ap.add_argument("--out", required=True, type=Path)
    ap.add_argument("--vacuum", action="store_true")
    ap.add_argument("--override-dt", action="store_true")
    return ap


def run(argv: list[str] | None = None) -> int:
    try:
        opts = build_parser().parse_args(argv)
        opts.threads = _threads()
        try:
            raw = opts.scene.read_bytes()
            scene = json.loads(raw)
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read scene {opts.scene}: {exc}")
        if not isinstance(scene, dict):
            raise UsageError("scene must be a JSON object")
        try:
            opts.out.mkdir(parents=True, exist_ok=True)
            probe = opts.out / ".write-probe"
            probe.write_text("")
            probe.unlink()
        except OSError as exc:
            raise UsageError(f"output directory {opts.out} is not writable: {exc}")
        digest = hashlib.sha256(json.dumps({"command": opts.command, "vacuum": opts.vacuum, "scene": scene},
                                           sort_keys=True).encode()).hexdigest()
        try:
            body = COMMANDS[opts.command](scene, opts.out, opts)
            status = _status(body["residuals"])
            if status == "pass" and body.get("warnings"):
                status = "warn"
        except (NonholoError, ArithmeticError) as exc:
            body = {"residuals": {}, "constants": {}, "artifacts": [],
                    "failure": {"code": getattr(exc, "code", type(exc).__name__), "message": str(exc)}}
            status = "fail"
        except (ParseError, KeyError, TypeError, ValueError, IndexError) as exc:
            raise UsageError(f"invalid scene: {exc}")
        report = {"command": opts.command, "inputs_digest": digest, "status": status, **body}
        (opts.out / "report.json").write_text(dumps(report))
    except UsageError as exc:
        print(f"nonholo: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"nonholo: I/O error: {exc}", file=sys.stderr)
        return 1
    return 0 if status in ("pass", "warn") else 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
