"""Command-line driver: ``pantograph-cg {run,compare,asymptotics,bound-table}``.

Configuration files are flat ``section.key = value`` assignments, one per
line, with ``#`` starting a comment::

    params.alpha = 2.0
    grid.h = 1e-3
    initial.preset = hat
    initial.params = 1.0, 1.0
    time.t_final = 1.0
    solver.method = both

Exit codes: 0 success, 2 malformed configuration, 3 domain too short for the
requested time, 4 series not converged within ``solver.n_max`` terms (outputs
are still written), 5 ``compare`` gap above ``compare.threshold``.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
import tempfile
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from .asymptotics import DEFAULT_LAMBDAS, y_estimate
from .dyson_phillips import SeriesConfig, dp_trajectory, truncation_bound
from .grid import (
    GridFunction,
    HorizonError,
    ModelParams,
    SpaceTag,
    Trajectory,
    check_horizon,
    make_grid,
    make_initial,
    norm,
    total_mass,
    L1,
    SUP,
)
from .operators import h_norm
from .reference import FDConfig, fd_solve, recover_n

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_HORIZON = 3
EXIT_NOT_CONVERGED = 4
EXIT_THRESHOLD = 5


class ConfigError(ValueError):
    def __init__(self, msg: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {msg}" if line else msg)


# -- configuration ----------------------------------------------------------


def _floats(text: str) -> list[float]:
    return [float(p) for p in text.split(",") if p.strip()]


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _choice(*options: str) -> Callable[[str], str]:
    def parse(text: str) -> str:
        if text not in options:
            raise ValueError(f"expected one of {options}, got {text!r}")
        return text

    return parse


_SCHEMA: dict[str, tuple[Callable[[str], Any], Any]] = {
    "params.g": (float, 1.0),
    "params.b": (float, 1.0),
    "params.mu": (float, 0.0),
    "params.alpha": (float, 2.0),
    "grid.L": (float, 10.0),
    "grid.h": (float, 1e-3),
    "initial.preset": (str, "hat"),
    "initial.params": (_floats, [1.0, 1.0]),
    "time.t_final": (float, None),
    "time.save_times": (_floats, None),
    "time.n_saves": (int, None),
    "solver.method": (_choice("dp", "fd", "both"), "dp"),
    "solver.tol": (float, 1e-6),
    "solver.n_max": (int, 60),
    "solver.n_time_nodes": (int, 41),
    "solver.cfl": (float, 0.9),
    "solver.space": (SpaceTag.parse, L1),
    "asymptotics.enabled": (_bool, False),
    "asymptotics.lambdas": (_floats, list(DEFAULT_LAMBDAS)),
    "asymptotics.horizon": (float, None),
    "asymptotics.cesaro_t": (float, None),
    "asymptotics.chunk": (float, 0.5),
    "asymptotics.chunk_nodes": (int, 21),
    "asymptotics.tol": (float, 1e-9),
    "asymptotics.outflow_tol": (float, 1e-6),
    "asymptotics.check_doubling": (_bool, True),
    "output.dir": (str, "out"),
    "output.format": (_choice("csv", "json"), "csv"),
    "output.emit_n": (_bool, False),
    "compare.threshold": (float, 0.02),
}


@dataclass
class RunConfig:
    params: ModelParams
    L: float
    h: float
    preset: str
    preset_params: list[float]
    t_final: float
    save_times: list[float]
    method: str
    n_time_nodes: int
    tol: float
    n_max: int
    cfl: float
    space: SpaceTag
    asymptotics: dict = field(default_factory=dict)
    out_dir: Path = Path("out")
    fmt: str = "csv"
    emit_n: bool = False
    threshold: float = 0.02

    def series_cfg(self, t: float) -> SeriesConfig:
        return SeriesConfig(t, self.n_time_nodes, self.tol, self.n_max)

    def summary(self) -> dict:
        return {
            "params": asdict(self.params),
            "grid": {"L": self.L, "h": self.h},
            "initial": {"preset": self.preset, "params": self.preset_params},
            "time": {"t_final": self.t_final, "save_times": self.save_times},
            "solver": {
                "method": self.method, "tol": self.tol, "n_max": self.n_max,
                "n_time_nodes": self.n_time_nodes, "cfl": self.cfl,
                "space": str(self.space),
            },
        }


def read_config(path: str | os.PathLike) -> dict[str, Any]:
    """Parse a config file into a dict keyed by dotted names, defaults filled."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    raw: dict[str, Any] = {}
    lines: dict[str, int] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}", lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _SCHEMA:
            raise ConfigError(f"unknown key {key!r}", lineno)
        if key in raw:
            raise ConfigError(f"duplicate key {key!r} (first on line {lines[key]})", lineno)
        conv = _SCHEMA[key][0]
        try:
            raw[key] = conv(value)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {exc}", lineno) from None
        lines[key] = lineno
    out = {k: d for k, (_, d) in _SCHEMA.items()}
    out.update(raw)
    out["_lines"] = lines
    return out


def build_config(raw: dict[str, Any]) -> RunConfig:
    lines = raw.get("_lines", {})

    def fail(msg, *keys):
        line = next((lines[k] for k in keys if k in lines), None)
        raise ConfigError(msg, line)

    if raw["time.t_final"] is None:
        fail("time.t_final is required")
    t_final = raw["time.t_final"]
    if t_final < 0:
        fail("time.t_final must be non-negative", "time.t_final")
    if raw["time.save_times"] is not None and raw["time.n_saves"] is not None:
        fail("give time.save_times or time.n_saves, not both", "time.n_saves")
    if raw["time.save_times"] is not None:
        save = sorted(raw["time.save_times"])
        if any(s < 0 or s > t_final for s in save) or len(set(save)) != len(save):
            fail("save_times must be distinct and within [0, t_final]", "time.save_times")
    elif raw["time.n_saves"] is not None:
        n = raw["time.n_saves"]
        if n < 1 or (n > 1 and t_final == 0):
            fail("time.n_saves must be >= 1 (1 when t_final = 0)", "time.n_saves")
        save = [t_final] if n == 1 else list(np.linspace(0.0, t_final, n))
    else:
        save = [t_final]

    names = ("g", "b", "mu", "alpha")
    try:
        params = ModelParams(*(raw[f"params.{n}"] for n in names))
    except ValueError as exc:
        # point at the first field that is invalid on its own
        ok = ModelParams(1.0, 1.0)
        bad = []
        for n in names:
            try:
                dataclasses.replace(ok, **{n: raw[f"params.{n}"]})
            except ValueError:
                bad.append(f"params.{n}")
        fail(str(exc), *bad)
    if not (0 < raw["solver.cfl"] <= 1):
        fail("solver.cfl must be in (0, 1]", "solver.cfl")
    try:
        SeriesConfig(1.0, raw["solver.n_time_nodes"], raw["solver.tol"], raw["solver.n_max"])
    except ValueError as exc:
        fail(str(exc), "solver.n_time_nodes", "solver.tol", "solver.n_max")

    asym = {
        "enabled": raw["asymptotics.enabled"],
        "lambdas": raw["asymptotics.lambdas"],
        "horizon": raw["asymptotics.horizon"],
        "cesaro_t": raw["asymptotics.cesaro_t"],
        "chunk": raw["asymptotics.chunk"],
        "chunk_nodes": raw["asymptotics.chunk_nodes"],
        "tol": raw["asymptotics.tol"],
        "outflow_tol": raw["asymptotics.outflow_tol"],
        "check_doubling": raw["asymptotics.check_doubling"],
    }
    return RunConfig(
        params=params,
        L=raw["grid.L"],
        h=raw["grid.h"],
        preset=raw["initial.preset"],
        preset_params=raw["initial.params"],
        t_final=t_final,
        save_times=[float(s) for s in save],
        method=raw["solver.method"],
        n_time_nodes=raw["solver.n_time_nodes"],
        tol=raw["solver.tol"],
        n_max=raw["solver.n_max"],
        cfl=raw["solver.cfl"],
        space=raw["solver.space"],
        asymptotics=asym,
        out_dir=Path(raw["output.dir"]),
        fmt=raw["output.format"],
        emit_n=raw["output.emit_n"],
        threshold=raw["compare.threshold"],
    )


def load_config(path) -> tuple[RunConfig, GridFunction]:
    """Read, validate and build the initial data. Raises `ConfigError`."""
    raw = read_config(path)
    cfg = build_config(raw)
    lines = raw["_lines"]
    try:
        grid = make_grid(cfg.L, cfg.h)
    except ValueError as exc:
        raise ConfigError(str(exc), lines.get("grid.h", lines.get("grid.L"))) from None
    try:
        u0 = make_initial(cfg.preset, cfg.preset_params, grid)
    except ValueError as exc:
        raise ConfigError(
            str(exc), lines.get("initial.params", lines.get("initial.preset"))
        ) from None
    return cfg, u0


# -- output -----------------------------------------------------------------


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def format_table(columns: dict[str, np.ndarray]) -> str:
    """CSV text with a header row and shortest round-trip float formatting."""
    names = list(columns)
    cols = [np.asarray(columns[n]) for n in names]
    fmts = [str if np.issubdtype(c.dtype, np.integer) else (lambda v: repr(float(v)))
            for c in cols]
    rows = [",".join(names)]
    for vals in zip(*cols):
        rows.append(",".join(f(v) for f, v in zip(fmts, vals)))
    return "\n".join(rows) + "\n"


def read_table(path: str | os.PathLike) -> dict[str, np.ndarray]:
    """Inverse of `format_table` for snapshot files."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        data = [[float(v) for v in line.split(",")] for line in fh if line.strip()]
    arr = np.array(data, dtype=float).reshape(-1, len(header))
    return {name: arr[:, i] for i, name in enumerate(header)}


def snapshot_name(t: float, fmt: str) -> str:
    return f"u_t{t:.6f}.{fmt}"


def write_snapshot(
    directory: Path, t_label: float, t_actual: float, u: GridFunction,
    params: ModelParams, fmt: str, emit_n: bool,
) -> Path:
    cols = {"x": u.grid.x, "u": u.values}
    if emit_n:
        cols["n"] = recover_n(u, t_actual, params).values
    path = directory / snapshot_name(t_label, fmt)
    if fmt == "csv":
        text = format_table(cols)
    else:
        payload = {"t": t_actual, **{k: [float(v) for v in c] for k, c in cols.items()}}
        text = json.dumps(payload) + "\n"
    _atomic_write(path, text)
    return path


def _write_json(path: Path, obj) -> None:
    _atomic_write(path, json.dumps(obj, indent=2, sort_keys=False, allow_nan=True) + "\n")


# -- commands ---------------------------------------------------------------


def _solve(cfg: RunConfig, u0: GridFunction, method: str) -> Trajectory:
    if method == "dp":
        return dp_trajectory(u0, cfg.params, cfg.save_times, cfg.series_cfg(1.0), cfg.space)
    return fd_solve(u0, cfg.params, cfg.t_final, FDConfig(cfg.cfl), cfg.save_times)


def _snapshot_records(traj: Trajectory, method: str, labels, files) -> list[dict]:
    recs = []
    for k, (t, s) in enumerate(zip(traj.times, traj.snapshots)):
        rec = {
            "solver": method,
            "t": labels[k],
            "t_actual": float(t),
            "file": files[k],
            "mass": total_mass(s),
            "norm_l1": norm(s, L1),
            "norm_sup": norm(s, SUP),
        }
        if method == "dp":
            rec["n_used"] = traj.meta["n_used"][k]
            rec["remainder_bound"] = traj.meta["remainder_bound"][k]
            rec["converged"] = traj.meta["converged"][k]
        recs.append(rec)
    return recs


def _load_or_exit(config_path):
    try:
        cfg, u0 = load_config(config_path)
    except ConfigError as exc:
        print(f"{config_path}: {exc}", file=sys.stderr)
        return None, None, EXIT_CONFIG
    try:
        check_horizon(u0, cfg.params.g, cfg.t_final)
    except HorizonError as exc:
        print(f"{config_path}: {exc}", file=sys.stderr)
        return None, None, EXIT_HORIZON
    return cfg, u0, EXIT_OK


def cmd_run(config_path) -> int:
    """Solve, write one snapshot file per save time and ``summary.json``."""
    start = time.perf_counter()
    cfg, u0, code = _load_or_exit(config_path)
    if code:
        return code
    methods = ["dp", "fd"] if cfg.method == "both" else [cfg.method]
    trajs: dict[str, Trajectory] = {}
    records: list[dict] = []
    for m in methods:
        traj = _solve(cfg, u0, m)
        trajs[m] = traj
        directory = cfg.out_dir / m if cfg.method == "both" else cfg.out_dir
        labels = traj.meta.get("requested_times", list(traj.times))
        files = []
        for t_label, t, snap in zip(labels, traj.times, traj.snapshots):
            p = write_snapshot(directory, t_label, t, snap, cfg.params, cfg.fmt, cfg.emit_n)
            files.append(str(p.relative_to(cfg.out_dir)))
        records.extend(_snapshot_records(traj, m, labels, files))

    summary: dict[str, Any] = {"config": cfg.summary(), "snapshots": records}
    if cfg.method == "both":
        summary["gaps"] = [
            {"t": float(t), "l1_gap_rel": _rel_gap(a, b)}
            for t, a, b in zip(trajs["dp"].times, trajs["dp"].snapshots, trajs["fd"].snapshots)
        ]
    warnings_out = []
    code = EXIT_OK
    if "dp" in trajs and not all(trajs["dp"].meta["converged"]):
        warnings_out.append(
            f"series not converged within n_max = {cfg.n_max} terms; "
            "remainder_bound exceeds tol for some snapshots"
        )
        code = EXIT_NOT_CONVERGED
    summary["warnings"] = warnings_out
    summary["status"] = "ok" if code == EXIT_OK else "not_converged"
    summary["wall_time_s"] = time.perf_counter() - start
    _write_json(cfg.out_dir / "summary.json", summary)
    for w in warnings_out:
        print(f"warning: {w}", file=sys.stderr)
    return code


def _rel_gap(ref: GridFunction, other: GridFunction) -> float:
    denom = norm(ref, L1)
    return norm(other - ref, L1) / denom if denom > 0 else norm(other, L1)


def compare_report(cfg: RunConfig, u0: GridFunction) -> list[dict]:
    dp = _solve(cfg, u0, "dp")
    fd = _solve(cfg, u0, "fd")
    m0 = total_mass(u0)
    rate = cfg.params.growth_exponent
    rows = []
    for t, a, b in zip(dp.times, dp.snapshots, fd.snapshots):
        mass_dp = total_mass(a)
        rows.append({
            "t": float(t),
            "l1_gap_rel": _rel_gap(a, b),
            "mass_dp": mass_dp,
            "mass_fd": total_mass(b),
            "mass_law_err": abs(mass_dp * math.exp(-rate * t) / m0 - 1.0),
        })
    return rows


def cmd_compare(config_path) -> int:
    """Cross-check the two solvers; exit 5 if any L1 gap exceeds the threshold."""
    cfg, u0, code = _load_or_exit(config_path)
    if code:
        return code
    rows = compare_report(cfg, u0)
    ok = all(r["l1_gap_rel"] <= cfg.threshold for r in rows)
    report = {"threshold": cfg.threshold, "pass": ok, "rows": rows}
    _write_json(cfg.out_dir / "compare.json", report)
    print(json.dumps(report, indent=2))
    return EXIT_OK if ok else EXIT_THRESHOLD


def cmd_asymptotics(config_path, trajectory: Trajectory | None = None) -> int:
    """Cesaro and resolvent estimates of the limit profile.

    `trajectory` replaces the computed solution (used by tests to inject
    synthetic data).
    """
    try:
        cfg, u0 = load_config(config_path)
    except ConfigError as exc:
        print(f"{config_path}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    a = cfg.asymptotics
    if not a["enabled"]:
        print(f"{config_path}: asymptotics.enabled is false", file=sys.stderr)
        return EXIT_CONFIG
    cesaro_t = a["cesaro_t"] if a["cesaro_t"] is not None else cfg.t_final
    try:
        chunk = SeriesConfig(a["chunk"], a["chunk_nodes"], a["tol"], cfg.n_max)
        est = y_estimate(
            u0, cfg.params, a["lambdas"], a["horizon"], chunk,
            cesaro_t=cesaro_t, check_doubling=a["check_doubling"],
            outflow_tol=a["outflow_tol"], trajectory=trajectory,
        )
    except HorizonError as exc:
        print(f"{config_path}: {exc}", file=sys.stderr)
        return EXIT_HORIZON
    except ValueError as exc:
        print(f"{config_path}: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out = cfg.out_dir
    ces = est.cesaro
    _atomic_write(out / "cesaro.csv", format_table({
        "t": ces.t_grid, "stabilization_metric": ces.stabilization_metric,
    }))
    _atomic_write(out / "cesaro_mean_final.csv", format_table({
        "x": ces.final.grid.x, "y": ces.final.values,
    }))
    for lam, cand in zip(est.lambdas, est.candidates):
        _atomic_write(out / f"resolvent_lambda{lam:.6f}.csv", format_table({
            "x": cand.grid.x, "y": cand.values,
        }))
    summary = {
        "lambdas": est.lambdas.tolist(),
        "horizon": est.horizon,
        "tail_bounds": est.tail_bounds.tolist(),
        "horizon_changes": None if est.horizon_changes is None else est.horizon_changes.tolist(),
        "consistency": est.consistency.tolist(),
        "cesaro_t": float(ces.t_grid[-1]),
        "final_stabilization": ces.final_stabilization(),
        "cesaro_gaps": est.cesaro_gaps.tolist(),
        "initial_mass": total_mass(u0),
    }
    _write_json(out / "asymptotics.json", summary)
    print(json.dumps(summary, indent=2))
    return EXIT_OK


def minimal_terms(t: float, h_norm_value: float, tol: float, cap: int = 100_000) -> int | None:
    """Smallest ``n`` with ``truncation_bound(n, t, |H|) <= tol`` (None past `cap`)."""
    for n in range(cap + 1):
        if truncation_bound(n, t, h_norm_value) <= tol:
            return n
    return None


def bound_table_text(
    n_max: int, times: Sequence[float], space: SpaceTag, b: float, alpha: float,
    tols: Sequence[float] = (1e-6,),
) -> str:
    hn = h_norm(space, ModelParams(g=1.0, b=b, mu=0.0, alpha=alpha))
    cols: dict[str, np.ndarray] = {"n": np.arange(n_max + 1)}
    for t in times:
        cols[f"t={t:g}"] = np.array([truncation_bound(n, t, hn) for n in range(n_max + 1)])
    text = format_table(cols)
    lines = [f"# space={space} |H|={hn!r}"]
    for tol in tols:
        found = ", ".join(
            f"t={t:g}: {minimal_terms(t, hn, tol)}" for t in times
        )
        lines.append(f"# minimal n for tol={tol:g}: {found}")
    return text + "\n".join(lines) + "\n"


def cmd_bound_table(n_max, t_list, space, b, alpha, tols=(1e-6,)) -> int:
    print(bound_table_text(n_max, t_list, space, b, alpha, tols), end="")
    return EXIT_OK


def _configure_threads() -> None:
    raw = os.environ.get("PANTOGRAPH_CG_THREADS", "").strip()
    if raw and int(raw) < 0:
        raise SystemExit("PANTOGRAPH_CG_THREADS must be >= 0")


def main(argv: Sequence[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="pantograph-cg",
        description="Series and finite-difference solvers for the cell growth equation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("run", "solve and write snapshots"),
        ("compare", "cross-check the series and upwind solvers"),
        ("asymptotics", "Cesaro and resolvent estimates of the limit profile"),
    ):
        p = sub.add_parser(name, help=help_)
        p.add_argument("config")
    p = sub.add_parser("bound-table", help="print the series remainder bound")
    p.add_argument("--n-max", type=int, required=True)
    p.add_argument("--times", type=_floats, required=True)
    p.add_argument("--space", type=SpaceTag.parse, default=L1)
    p.add_argument("--b", type=float, required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--tol", type=_floats, default=[1e-6])
    args = parser.parse_args(argv)
    _configure_threads()

    if args.command == "run":
        return cmd_run(args.config)
    if args.command == "compare":
        return cmd_compare(args.config)
    if args.command == "asymptotics":
        return cmd_asymptotics(args.config)
    try:
        return cmd_bound_table(args.n_max, args.times, args.space, args.b, args.alpha, args.tol)
    except ValueError as exc:
        parser.error(str(exc))


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
