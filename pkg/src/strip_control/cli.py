"""``strip-control`` command line: run, sweep and geometry dump."""

from __future__ import annotations

import argparse
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .geometry import dump_boxes
from .report import manifest_text, render_csv, render_figure, write_atomic
from .scenario import ConfigError, expand_sweep, load_file, scenario_from_dict
from .tasks import TaskResult, run_task

WORKERS_ENV = "STRIP_CONTROL_WORKERS"


def _default_workers() -> int:
    value = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(value))
    except ValueError:
        return 1


def _run_point(raw: dict, name: str, seed: Optional[int]) -> TaskResult:
    return run_task(scenario_from_dict(raw, name, seed))


def _emit(out_dir: Path, name: str, columns, rows, plot_rows, xlabel, ylabel, manifest: dict,
          figures: bool) -> list:
    # render everything before touching the disk
    primary = render_csv(columns, rows)
    plot = render_csv(["series", "x", "y"], plot_rows)
    outputs = [out_dir / f"{name}.csv", out_dir / f"{name}_plot.csv"]
    write_atomic(outputs[0], primary)
    write_atomic(outputs[1], plot)
    if figures and plot_rows:
        fig = out_dir / f"{name}.png"
        render_figure(fig, plot_rows, xlabel, ylabel, name)
        outputs.append(fig)
    mpath = out_dir / f"{name}_manifest.json"
    manifest["outputs"] = [p.name for p in outputs]
    write_atomic(mpath, manifest_text(manifest))
    return outputs + [mpath]


def cmd_run(args) -> int:
    start = time.perf_counter()
    raw = load_file(args.file)
    scen = scenario_from_dict(raw, Path(args.file).stem, args.seed)
    res = run_task(scen)
    manifest = {"command": "run", "task": scen.task, "seed": scen.seed, "version": __version__,
                "parameters": raw, "domain": scen.domain.as_dict(), "summary": res.summary,
                "wall_time_s": time.perf_counter() - start}
    outs = _emit(Path(args.out_dir), scen.name, res.columns, res.rows, res.plot_rows,
                 res.xlabel, res.ylabel, manifest, not args.no_figures)
    for p in outs:
        print(p)
    return 0


def cmd_sweep(args) -> int:
    start = time.perf_counter()
    raw = load_file(args.file)
    keys, points = expand_sweep(raw)
    name = str(raw.get("name", Path(args.file).stem))
    # validate every point before any work starts
    for _, cfg in points:
        scenario_from_dict(cfg, name, args.seed)
    workers = args.workers or _default_workers()
    cfgs = [cfg for _, cfg in points]
    if workers > 1 and len(points) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_point, cfgs, [name] * len(cfgs), [args.seed] * len(cfgs)))
    else:
        results = [_run_point(cfg, name, args.seed) for cfg in cfgs]
    columns = ["point"] + keys + results[0].columns
    rows, plot_rows = [], []
    for i, ((values, _), res) in enumerate(zip(points, results)):
        if res.columns != results[0].columns:
            raise ConfigError("sweep points produced different column sets")
        prefix = (i,) + tuple(values[k] for k in keys)
        rows.extend(prefix + tuple(r) for r in res.rows)
        label = " ".join(f"{k.split('.')[-1]}={values[k]:g}" if isinstance(values[k], (int, float))
                         else f"{k.split('.')[-1]}={values[k]}" for k in keys)
        names = [s for s, _, _ in res.plot_rows]
        if len(set(names)) == len(names):
            # one point per series: join the sweep into a single curve
            plot_rows.extend(res.plot_rows)
        else:
            plot_rows.extend((f"{label} {s}".strip(), x, y) for s, x, y in res.plot_rows)
    manifest = {"command": "sweep", "task": raw.get("task"), "seed": args.seed if args.seed is not None
                else raw.get("seed", 0), "version": __version__, "parameters": raw,
                "points": len(points), "workers": workers, "wall_time_s": time.perf_counter() - start}
    outs = _emit(Path(args.out_dir), name, columns, rows, plot_rows, results[0].xlabel,
                 results[0].ylabel, manifest, not args.no_figures)
    for p in outs:
        print(p)
    return 0


def cmd_geometry_dump(args) -> int:
    raw = load_file(args.file)
    scen = scenario_from_dict(raw, Path(args.file).stem, args.seed)
    dom = scen.domain
    rows = dump_boxes(scen.control_set(), dom.model_lo, dom.model_hi)
    cols = [f"{side}_{j + 1}" for j in range(dom.d) for side in ("lo", "hi")]
    path = Path(args.out_dir) / f"{scen.name}_boxes.csv"
    write_atomic(path, render_csv(cols, rows))
    print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="strip-control",
                                description="Null-control experiments for the heat equation on a strip.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    common.add_argument("--out-dir", default=".", help="directory for CSV, manifest and figures")
    common.add_argument("--workers", type=int, default=None,
                        help=f"worker processes for sweeps (default ${WORKERS_ENV} or 1)")
    common.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", parents=[common], help="run one scenario")
    r.add_argument("file")
    r.set_defaults(func=cmd_run)
    s = sub.add_parser("sweep", parents=[common], help="run the Cartesian expansion of [sweep]")
    s.add_argument("file")
    s.set_defaults(func=cmd_sweep)
    g = sub.add_parser("geometry", help="geometry utilities")
    gsub = g.add_subparsers(dest="geometry_command", required=True)
    d = gsub.add_parser("dump", parents=[common], help="write the control set as a box list")
    d.add_argument("file")
    d.set_defaults(func=cmd_geometry_dump)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"strip-control: {exc}", file=sys.stderr)
        return 2
    except (ArithmeticError, ValueError) as exc:
        print(f"strip-control: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
