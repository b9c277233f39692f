"""Command line front end: ``aqec outer|inner|symmetry|export``."""
from __future__ import annotations

import csv
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path

import click
import numpy as np

from .channels import channel_from_config
from .hierarchy import PROD, SEP, HierarchyProblem, _marker_ready, applicable_mode, build_reduced, \
    build_unreduced, default_ppt_cuts, solve_outer
from .markers import build_marker_reduced
from .inner import seesaw_run, warm_started_pipeline
from .sdp import import_sdpa_solution, solve, write_sdpa
from .symmetry.report import report_json

DEFAULT_GRIDS = {"dep": (0.0, 20 / 29, 21), "pauli": (0.0, 20 / 29, 21), "depolarizing": (0.0, 20 / 29, 21),
                 "ad": (0.0, 1.0, 30)}
OUTER_COLUMNS = ["channel", "param", "level", "flags", "symmetry", "bound_type", "value", "solver_gap",
                 "seconds", "seed", "status"]
INNER_COLUMNS = ["channel", "param", "level", "flags", "bound_type", "method", "value", "iterations",
                 "seconds", "seed", "status"]


@dataclass
class SweepConfig:
    channel: str = "dep"
    param: float | None = None
    sweep: tuple[float, float, int] | None = None
    logical: int = 2
    qubits: int = 1
    level: int = 1
    ppt: bool = False
    ppt_cuts: bool = False
    ns: bool = False
    ns_a2b: bool = False
    variant: str = PROD
    symmetry: str = "auto"
    solver: str = "internal"
    method: str = "seesaw"
    out: str | None = None
    seed: int = 2024
    tol: float = 1e-8

    def __post_init__(self):
        if self.sweep is not None:
            a, b, k = self.sweep
            self.sweep = (float(a), float(b), int(k))
            if self.sweep[2] < 1:
                raise ValueError("grid count must be >= 1")
        if self.level < 1 or self.qubits < 1 or self.logical < 2:
            raise ValueError("need level >= 1, qubits >= 1 and logical dimension >= 2")
        if self.variant not in (PROD, SEP):
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.solver not in ("internal", "sdpa"):
            raise ValueError(f"unknown solver {self.solver!r}")
        if self.method not in ("seesaw", "rounded", "warm"):
            raise ValueError(f"unknown inner method {self.method!r}")

    @property
    def kind(self) -> str:
        return "kraus" if self.channel.startswith("kraus:") else self.channel

    def grid(self) -> list[float]:
        if self.kind == "kraus":
            return [float("nan")]
        if self.param is not None:
            return [float(self.param)]
        a, b, k = self.sweep or DEFAULT_GRIDS.get(self.kind, (0.0, 1.0, 11))
        return [float(v) for v in np.linspace(a, b, k)]

    def noise(self, param: float):
        cfg = {"type": self.kind, "param": param, "qubits": self.qubits}
        if self.kind == "kraus":
            cfg["path"] = self.channel.split(":", 1)[1]
        return channel_from_config(cfg)

    def problem(self, param: float) -> HierarchyProblem:
        cuts = default_ppt_cuts(self.level) if self.ppt_cuts else ()
        return HierarchyProblem(self.noise(param), self.logical, self.level, cuts, self.ns_a2b, self.ns,
                                self.variant, ppt_marginal=self.ppt)

    def flag_string(self) -> str:
        parts = [f for f in ("ppt", "ppt_cuts", "ns", "ns_a2b") if getattr(self, f)]
        return "+".join(parts + [self.variant])


def _fmt(v) -> str:
    if isinstance(v, float):
        return "" if not np.isfinite(v) else f"{v:.12g}"
    return str(v)


def write_rows(rows: list[dict], columns: list[str], out: str | None) -> None:
    """Write CSV rows; appends to an existing file with the same header."""
    rows = [{c: _fmt(r.get(c, "")) for c in columns} for r in rows]
    if out is None:
        w = csv.DictWriter(sys.stdout, columns, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
        return
    path = Path(out)
    fresh = not path.exists() or path.stat().st_size == 0
    if not fresh:
        with path.open(encoding="utf-8") as fh:
            head = fh.readline().strip().split(",")
        if head != columns:
            raise click.ClickException(f"{out} has a different CSV header")
    with path.open("a", encoding="utf-8", newline="") as fh:
        w = csv.DictWriter(fh, columns, lineterminator="\n")
        if fresh:
            w.writeheader()
        w.writerows(rows)


def _pool_size() -> int:
    env = os.environ.get("AQEC_THREADS")
    return max(1, int(env)) if env else (os.cpu_count() or 1)


def _map(fn, cfg: SweepConfig, grid: list[float]) -> list[dict]:
    n = min(_pool_size(), len(grid))
    if n <= 1:
        rows = [fn(cfg, p) for p in grid]
    else:
        with ProcessPoolExecutor(n) as pool:
            rows = list(pool.map(fn, [cfg] * len(grid), grid))
    return sorted(rows, key=lambda r: (np.nan_to_num(r["param"], nan=-1.0)))


def _base_row(cfg: SweepConfig, param: float) -> dict:
    return {"channel": cfg.channel, "param": param, "level": cfg.level, "flags": cfg.flag_string(),
            "seed": cfg.seed}


def outer_row(cfg: SweepConfig, param: float) -> dict:
    row = _base_row(cfg, param) | {"bound_type": "outer", "symmetry": cfg.symmetry}
    t0 = time.perf_counter()
    try:
        res = solve_outer(cfg.problem(param), cfg.symmetry, cfg.tol, cfg.seed, keep_state=False)
    except (ValueError, MemoryError, np.linalg.LinAlgError) as exc:
        return row | {"status": f"ERROR: {exc}", "seconds": time.perf_counter() - t0}
    row |= {"symmetry": res.symmetry, "solver_gap": res.solver_gap, "seconds": res.seconds,
            "status": res.status.value}
    if res.status.value in ("OPTIMAL", "INACCURATE"):
        row["value"] = res.value
    return row


def inner_row(cfg: SweepConfig, param: float) -> dict:
    row = _base_row(cfg, param) | {"bound_type": "inner", "method": cfg.method}
    t0 = time.perf_counter()
    try:
        noise = cfg.noise(param)
        if cfg.method == "seesaw":
            res = seesaw_run(noise, cfg.logical, "random", seed=cfg.seed)
            row |= {"value": res.pair.fidelity, "iterations": res.iterations, "status": res.status.value}
        else:
            if cfg.method == "rounded" and cfg.level < 2:
                raise ValueError("rounding needs --level >= 2")
            pipe = warm_started_pipeline(noise, cfg.logical, cfg.level, cfg.ppt, cfg.ns_a2b, cfg.variant,
                                         cfg.symmetry, cfg.tol, cfg.seed, ppt_cuts=cfg.ppt_cuts)
            if cfg.method == "rounded":
                row |= {"value": pipe.rounding.best_pair.fidelity, "iterations": 0}
            else:
                row |= {"value": pipe.inner.fidelity, "iterations": pipe.seesaw.iterations}
            row["status"] = pipe.seesaw.status.value
    except (ValueError, MemoryError, np.linalg.LinAlgError) as exc:
        row["status"] = f"ERROR: {exc}"
    row["seconds"] = time.perf_counter() - t0
    return row


def _assemble(cfg: SweepConfig, param: float):
    hp = cfg.problem(param)
    mode = applicable_mode(hp, cfg.seed) if cfg.symmetry == "auto" else cfg.symmetry
    if mode == "none":
        return build_unreduced(hp), mode
    if mode == "full" and _marker_ready(hp):
        return build_marker_reduced(hp, cfg.seed)[0], mode
    return build_reduced(hp, mode, cfg.seed)[0], mode


# ---------------------------------------------------------------------------
# click plumbing
# ---------------------------------------------------------------------------

def _parse_sweep(_ctx, _param, value):
    if value is None:
        return None
    try:
        a, b, k = value.split(":")
        return float(a), float(b), int(k)
    except ValueError:
        raise click.BadParameter("expected start:stop:count") from None


def sweep_options(fn):
    opts = [
        click.option("--config", type=click.Path(exists=True, dir_okay=False), help="JSON file with SweepConfig fields."),
        click.option("--channel", default="dep", show_default=True,
                     help="dep (replacement form), pauli, ad or kraus:<file>."),
        click.option("--param", type=float, help="Single noise parameter."),
        click.option("--sweep", callback=_parse_sweep, help="Grid start:stop:count."),
        click.option("--logical", default=2, show_default=True, help="Logical dimension d_L."),
        click.option("--qubits", default=1, show_default=True, help="Physical qubits m."),
        click.option("--level", default=1, show_default=True, help="Extension level n."),
        click.option("--ppt", is_flag=True, help="PPT on the marginal LP:(LbPb)^(1)."),
        click.option("--ppt-cuts", "ppt_cuts", is_flag=True, help="PPT cuts on the full extension (stronger)."),
        click.option("--ns", is_flag=True, help="Decoder-side non-signaling marginal."),
        click.option("--ns-a2b", "ns_a2b", is_flag=True, help="Encoder-to-decoder non-signaling."),
        click.option("--variant", type=click.Choice([PROD, SEP]), default=PROD, show_default=True),
        click.option("--symmetry", type=click.Choice(["auto", "none", "ext", "iid", "combined", "full"]),
                     default="auto", show_default=True),
        click.option("--solver", type=click.Choice(["internal", "sdpa"]), default="internal", show_default=True),
        click.option("--out", type=click.Path(dir_okay=True), help="Output path (CSV, JSON or directory)."),
        click.option("--seed", default=2024, show_default=True, type=int),
        click.option("--tol", default=1e-8, show_default=True, type=float),
    ]
    for o in reversed(opts):
        fn = o(fn)
    return fn


def _config(ctx: click.Context, kw: dict) -> SweepConfig:
    base: dict = {}
    path = kw.pop("config", None)
    if path:
        base = json.loads(Path(path).read_text())
        unknown = set(base) - {f.name for f in fields(SweepConfig)}
        if unknown:
            raise click.BadParameter(f"unknown config keys {sorted(unknown)}")
    for k, v in kw.items():
        src = ctx.get_parameter_source(k)
        if k not in base or src not in (click.core.ParameterSource.DEFAULT, None):
            base[k] = v
    if isinstance(base.get("sweep"), str):
        base["sweep"] = _parse_sweep(None, None, base["sweep"])
    try:
        return SweepConfig(**base)
    except (TypeError, ValueError) as exc:
        raise click.BadParameter(str(exc)) from None


@click.group()
def main():
    """Outer and inner bounds on the channel fidelity of approximate error correction."""


@main.command()
@sweep_options
@click.option("--dry-run", is_flag=True, help="Print SDP dimensions without solving.")
@click.pass_context
def outer(ctx, dry_run, **kw):
    """Outer bounds from the extension hierarchy, one CSV row per grid point."""
    cfg = _config(ctx, kw)
    grid = cfg.grid()
    if dry_run:
        for p in grid:
            prob, mode = _assemble(cfg, p)
            click.echo(json.dumps({"param": p, "symmetry": mode} | prob.summary()))
        return
    if cfg.solver == "sdpa":
        _export(cfg, grid)
        return
    write_rows(_map(outer_row, cfg, grid), OUTER_COLUMNS, cfg.out)


@main.command()
@sweep_options
@click.option("--method", type=click.Choice(["seesaw", "rounded", "warm"]), default="seesaw", show_default=True)
@click.pass_context
def inner(ctx, **kw):
    """Inner bounds from see-saw, rounding, or the warm-started pipeline."""
    cfg = _config(ctx, kw)
    write_rows(_map(inner_row, cfg, cfg.grid()), INNER_COLUMNS, cfg.out)


@main.command()
@click.option("--qubits", default=3, show_default=True)
@click.option("--level", default=2, show_default=True)
@click.option("--no-unitary", is_flag=True, help="Skip the combined block computation.")
@click.option("--seed", default=2024, show_default=True, type=int)
@click.option("--out", type=click.Path(dir_okay=False))
def symmetry(qubits, level, no_unitary, seed, out):
    """Block sizes, multiplicity tables and joint-symmetry verdicts as JSON."""
    try:
        text = report_json(qubits, level, not no_unitary, seed)
    except ValueError as exc:
        raise click.ClickException(str(exc)) from None
    if out:
        Path(out).write_text(text + "\n", encoding="utf-8")
    else:
        click.echo(text)


def _export(cfg: SweepConfig, grid: list[float]) -> list[Path]:
    target = Path(cfg.out or ".")
    target.mkdir(parents=True, exist_ok=True)
    written = []
    for p in grid:
        prob, mode = _assemble(cfg, p)
        tag = "x" if not np.isfinite(p) else f"{p:.6g}"
        path = target / f"{cfg.kind}_q{cfg.qubits}_n{cfg.level}_{tag}.dat-s"
        write_sdpa(prob, path, comment=f"{cfg.channel} param={p:.12g} level={cfg.level} "
                                       f"flags={cfg.flag_string()} symmetry={mode}")
        written.append(path)
        click.echo(str(path))
    return written


@main.command()
@sweep_options
@click.option("--solution", type=click.Path(exists=True, dir_okay=False),
              help="External SDPA solution file to compare against the internal solver.")
@click.pass_context
def export(ctx, solution, **kw):
    """Write SDPA files for the outer problems; optionally check an external solution."""
    cfg = _config(ctx, kw)
    grid = cfg.grid()
    if solution is None:
        _export(cfg, grid)
        return
    if len(grid) != 1:
        raise click.BadParameter("--solution needs a single --param")
    prob, mode = _assemble(cfg, grid[0])
    ext = import_sdpa_solution(solution, prob)
    own = solve(prob, tol=cfg.tol)
    click.echo(json.dumps({"param": grid[0], "symmetry": mode, "internal": own.primal_value,
                           "external": ext.primal_value, "difference": abs(own.primal_value - ext.primal_value)}))


if __name__ == "__main__":
    main()
