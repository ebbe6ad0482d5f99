"""Command-line entry point: ``lagsweep <command> [SCENARIO] [flags]``."""

from __future__ import annotations

import functools
import sys
from pathlib import Path
from typing import Callable

import click
import numpy as np

from . import billiard as bl
from . import lagrangian as lg
from . import planar as pl
from . import sweep as sw
from . import verify
from .errors import InputError
from .output import dumps, to_csv, versions
from .scenario import Scenario, load_scenario

EXIT_OK, EXIT_NUMERIC, EXIT_PARSE = 0, 1, 2


class Failure(Exception):
    """A completed run whose numerical checks did not pass."""

    def __init__(self, payload: dict):
        super().__init__("numerical failure")
        self.payload = payload


def _emit(payload: dict, out: str | None) -> None:
    text = dumps(payload)
    if out:
        Path(out).write_text(text)
    else:
        click.echo(text, nl=False)


def _write_csv(path: str | None, header: list[str], rows) -> None:
    if path:
        Path(path).write_text(to_csv(header, rows))


def command(name: str, takes_scenario: bool = True, **click_kwargs):
    """Attach the shared flags and the error-to-exit-code mapping."""

    def deco(fn: Callable):
        @click.option("--csv", "csv_path", type=click.Path(dir_okay=False), help="Also write a tabular dump here.")
        @click.option("--out", type=click.Path(dir_okay=False), help="Write JSON here instead of stdout.")
        @click.option("--threads", type=click.IntRange(min=1), default=1, show_default=True)
        @click.option("--tol", type=click.FloatRange(min=0, min_open=True), default=None)
        @click.option("--seed", type=int, default=None)
        @functools.wraps(fn)
        def wrapper(seed, tol, threads, out, csv_path, scenario_path=None, **kw):
            try:
                sc = load_scenario(scenario_path) if takes_scenario else Scenario()
                seed_ = seed if seed is not None else (sc.seed if sc.seed is not None else 0)
                tol_ = tol if tol is not None else sc.tol
                meta = {"command": name, "seed": seed_, "versions": versions()}
                result, tol_used = fn(sc=sc, seed=seed_, tol=tol_, threads=threads, csv_path=csv_path, **kw)
                meta["tol"] = tol_used
                _emit({"meta": meta, "result": result}, out)
            except Failure as f:
                meta["tol"] = tol_ if tol_ is not None else None
                _emit({"meta": meta, "result": f.payload}, out)
                sys.exit(EXIT_NUMERIC)
            except (InputError, FileNotFoundError) as exc:
                click.echo(dumps({"error": type(exc).__name__, "message": str(exc)}), err=True, nl=False)
                sys.exit(EXIT_PARSE)
            except ValueError as exc:  # precondition, domain and genericity errors
                _emit({"meta": {"command": name, "versions": versions()}, "error": type(exc).__name__, "message": str(exc)}, out)
                sys.exit(EXIT_NUMERIC)

        if takes_scenario:
            wrapper = click.argument("scenario_path", metavar="SCENARIO", type=click.Path(dir_okay=False))(wrapper)
        return click.command(name, **click_kwargs)(wrapper)

    return deco


@click.group()
@click.version_option(package_name="lagsweep")
def main() -> None:
    """Lagrangian tangent sweeps and outer billiards."""


def _graph(sc: Scenario) -> lg.LagrangianGraph:
    L = sc.lagrangian()
    if not isinstance(L, lg.LagrangianGraph):
        raise InputError("this command needs a graph model")
    return L


@command("sweep-check")
def sweep_check(sc, seed, tol, threads, csv_path):
    """Pullback comparison of the sweep map at given or sampled frames."""
    L = _graph(sc)
    tol = 1e-6 if tol is None else tol
    if sc.frames:
        frames = [lg.frame(f["q"], f["t"]) for f in sc.frames]
    else:
        rng = np.random.default_rng(seed)
        frames = [verify.random_regular_frame(L, rng) for _ in range(sc.samples)]
    rows = []
    for fr in frames:
        r = sw.verify_symplectomorphism(L, fr, step=sc.step, tol=tol)
        rows.append({"q": fr.q, "t": fr.t, "det_A": lg.det_A(L, fr), "defect": r["defect"], "ok": r["ok"]})
    result = {"frames": rows, "max_defect": max(r["defect"] for r in rows), "ok": all(r["ok"] for r in rows)}
    _write_csv(csv_path, ["q", "t", "det_A", "defect"], ([r["q"].tolist(), r["t"].tolist(), r["det_A"], r["defect"]] for r in rows))
    if not result["ok"]:
        raise Failure(result)
    return result, tol


@command("multiplicity")
def multiplicity(sc, seed, tol, threads, csv_path):
    """Count tangent spaces of L through a test point."""
    L = _graph(sc)
    tol = sw.NEWTON_TOL if tol is None else tol
    test = sc.test_point()
    report = sw.count_tangent_spaces(L, test, box=sc.box_pair(), grid=sc.grid, tol=tol, threads=threads)
    result = report.to_json()
    _write_csv(csv_path, ["q", "residual", "near_critical"], ([r.tolist(), res, i in report.flagged_near_critical] for i, (r, res) in enumerate(zip(report.roots, report.residuals))))
    if report.all_diverged:
        raise Failure(result)
    return result, tol


@command("newton-number", takes_scenario=False)
@click.option("--intercepts", required=True, help="Comma-separated positive integers, e.g. 3,3.")
def newton_number_cmd(sc, seed, tol, threads, csv_path, intercepts):
    """Newton number of the simplex with the given axis intercepts."""
    try:
        d = [int(v) for v in intercepts.split(",")]
    except ValueError as exc:
        raise InputError(f"bad intercepts {intercepts!r}") from exc
    return {"intercepts": d, "nu": sw.newton_number(d)}, tol


@command("billiard-step")
def billiard_step(sc, seed, tol, threads, csv_path):
    """All outer-billiard partners of a point."""
    L = _graph(sc)
    tol = sw.NEWTON_TOL if tol is None else tol
    a = sc.test_point()
    pairs = bl.correspondents(L, a, box=sc.box_pair(), grid=sc.grid, tol=tol, threads=threads)
    out = []
    for p in pairs:
        row = p.to_json()
        row["conormal"] = bl.conormal_check(L, p.a, p.b)
        out.append(row)
    _write_csv(csv_path, ["b", "q", "near_critical"], ([p.b.to_json(), p.frame.q.tolist(), p.near_critical] for p in pairs))
    return {"count": sum(not p.near_critical for p in pairs), "pairs": out}, tol


@command("orbit-search")
def orbit_search(sc, seed, tol, threads, csv_path):
    """Variational search for odd-period orbits on a product of curves."""
    L = sc.lagrangian()
    tol = 1e-6 if tol is None else tol
    orbits = bl.find_periodic_orbits(L, sc.k, starts=sc.starts, seed=seed, threads=threads)
    rows = []
    for o in orbits:
        row = o.to_json()
        row["verify"] = bl.orbit_verify(L, o, tol)
        rows.append(row)
    verified = sum(r["verify"]["ok"] for r in rows)
    result = {"k": sc.k, "starts": sc.starts, "distinct": len(rows), "verified": verified, "orbits": rows}
    _write_csv(csv_path, ["action", "is_max", "max_defect", "margin", "angles"], ([r["action"], r["is_max"], r["verify"]["max_defect"], r["verify"]["margin"], r["angles"]] for r in rows))
    if verified == 0:
        raise Failure(result)
    return result, tol


@main.group()
def planar() -> None:
    """Planar outer-billiard and tangent-sweep oracles."""


@command("tractrix", takes_scenario=False)
@click.option("--step", type=click.FloatRange(min=0, min_open=True), default=1e-3, show_default=True)
def planar_tractrix(sc, seed, tol, threads, csv_path, step):
    """Area between the tractrix and its asymptote."""
    tol = 1e-4 if tol is None else tol
    area = pl.tractrix_area(step)
    result = {"area": area, "target": "pi/2", "error": abs(area - np.pi / 2)}
    if result["error"] > tol:
        raise Failure(result)
    return result, tol


@command("step")
def planar_step(sc, seed, tol, threads, csv_path):
    """Iterate the planar outer billiard map from a point."""
    curve = sc.plane_curve()
    if sc.point is None or len(sc.point) != 2:
        raise InputError("'point' must be a 2-vector")
    pts, params = [np.asarray(sc.point, dtype=float)], []
    for _ in range(sc.iterations):
        b, t = pl.planar_outer_step(curve, pts[-1], sc.branch)
        pts.append(b)
        params.append(t)
    _write_csv(csv_path, ["x", "y"], (p.tolist() for p in pts))
    return {"branch": sc.branch, "points": pts, "tangency_params": params}, tol


@command("periodic")
def planar_periodic(sc, seed, tol, threads, csv_path):
    """Odd-period orbits of the planar outer billiard."""
    curve = sc.plane_curve()
    orbits = pl.find_planar_periodic(curve, sc.k, seed=seed, starts=sc.starts)
    _write_csv(csv_path, ["action", "step_defect", "params"], ([o.action, o.step_defect, o.params.tolist()] for o in orbits))
    result = {"k": sc.k, "count": len(orbits), "orbits": [o.to_json() for o in orbits]}
    if not orbits:
        raise Failure(result)
    return result, tol


@command("mamikon")
def planar_mamikon(sc, seed, tol, threads, csv_path):
    """Monte Carlo areas of a tangent sweep and its tangent cluster."""
    curve = sc.plane_curve()
    tol = 1e-2 if tol is None else tol
    sweep_area, cluster_area = pl.mamikon_area_check(curve, sc.region.build(), sc.mc_samples, seed)
    rel = abs(sweep_area - cluster_area) / cluster_area if cluster_area else 0.0
    result = {"sweep_area": sweep_area, "cluster_area": cluster_area, "relative_gap": rel, "samples": sc.mc_samples}
    if rel > tol:
        raise Failure(result)
    return result, tol


for _cmd in (planar_tractrix, planar_step, planar_periodic, planar_mamikon):
    planar.add_command(_cmd)


@command("verify-suite", takes_scenario=False)
@click.option("--full", is_flag=True, help="Use the acceptance sample sizes (slow).")
def verify_suite(sc, seed, tol, threads, csv_path, full):
    """Run every invariant check; nonzero exit on any failure."""
    budget = verify.Budget(frames=50, germs=50, test_points=20, mc_samples=1_000_000, orbit_starts=200, pairs=1000) if full else verify.Budget()
    results = verify.run_suite(seed, threads, budget)
    for r in results:
        click.echo(f"{'PASS' if r.passed else 'FAIL'} {r.name} value={r.value:.3g} tol={r.tol:.3g}", err=True)
    _write_csv(csv_path, ["name", "passed", "value", "tol"], ([r.name, r.passed, r.value, r.tol] for r in results))
    payload = {"checks": [r.to_json() for r in results], "passed": all(r.passed for r in results)}
    if not payload["passed"]:
        raise Failure(payload)
    return payload, None


for _cmd in (sweep_check, multiplicity, newton_number_cmd, billiard_step, orbit_search, verify_suite):
    main.add_command(_cmd)


if __name__ == "__main__":
    main()
