"""Command-line entry point: run sweeps, validate manifests, list profiles,
reproduce shipped figure manifests."""
from __future__ import annotations

import argparse
import csv
import hashlib
import itertools
import json
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

from . import __version__
from .config import ConfigError, RunManifest, apply_axis, dump_manifest, parse_config, parse_text
from .experiments import run_many
from .noise import PLATFORMS, default_profile

log = logging.getLogger("qsensim")

COLUMNS = (
    "experiment", "platform", "n_sensors", "n_s", "n_f", "phi_true", "epsilon",
    "error_classes", "role_scope", "shots", "backend", "post_select", "seed",
    "phi_est", "accuracy_pct", "overlap", "kept_fraction", "master_seed",
)

EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL = 0, 1, 2


def row_seed(master_seed: int, coords: tuple, rep: int) -> int:
    """Stable 63-bit seed from the master seed, grid coordinates and repetition."""
    key = json.dumps([master_seed, [[n, v if not isinstance(v, tuple) else list(v)] for n, v in coords], rep])
    return int.from_bytes(hashlib.sha256(key.encode()).digest()[:8], "big") >> 1


@dataclass
class PointResult:
    index: tuple[int, ...]
    coords: tuple
    rows: list[dict]
    error: str | None = None


def grid(m: RunManifest):
    """Yield ``(index tuple, coordinate tuple)`` for every grid point."""
    names = [n for n, _ in m.axes]
    ranges = [range(len(v)) for _, v in m.axes]
    for idx in itertools.product(*ranges):
        yield idx, tuple((names[i], m.axes[i][1][j]) for i, j in enumerate(idx))


def run_point(m: RunManifest, idx, coords) -> PointResult:
    try:
        cfg = m.base
        for name, value in coords:
            cfg = apply_axis(cfg, name, value)
        cfg.validate()
        seeds = [row_seed(m.master_seed, coords, r) for r in range(m.repetitions)]
        rows = []
        for res in run_many(cfg, seeds):
            row = res.row()
            row["master_seed"] = m.master_seed
            rows.append(row)
        return PointResult(idx, coords, rows)
    except Exception as e:  # a failed point is reported, the sweep goes on
        return PointResult(idx, coords, [], f"{type(e).__name__}: {e}")


def _run_point_args(args):
    return run_point(*args)


class _Writer:
    """Serialises rows to a text sink in one of the supported formats."""

    def __init__(self, sink, fmt: str):
        if fmt not in ("csv", "jsonl"):
            raise ValueError(f"unknown format {fmt!r}")
        self.sink, self.fmt = sink, fmt
        if fmt == "csv":
            self._csv = csv.DictWriter(sink, fieldnames=COLUMNS, lineterminator="\n")
            self._csv.writeheader()

    def rows(self, rows):
        for row in rows:
            if self.fmt == "csv":
                self._csv.writerow({k: _cell(row.get(k, "")) for k in COLUMNS})
            else:
                self.sink.write(json.dumps({k: row.get(k, "") for k in COLUMNS}) + "\n")
        self.sink.flush()

    def footer(self, footer: dict):
        if self.fmt == "csv":
            self.sink.write("#footer " + " ".join(f"{k}={v}" for k, v in footer.items()) + "\n")
        else:
            self.sink.write(json.dumps({"footer": footer}) + "\n")
        self.sink.flush()


def _results(m: RunManifest, tasks):
    """Point results in grid order; with a pool, each is yielded once it and
    every earlier point are done."""
    if m.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=m.jobs) as pool:
            yield from pool.map(_run_point_args, tasks)
    else:
        for t in tasks:
            yield run_point(*t)


def execute(m: RunManifest, sink=None) -> int:
    """Run every grid point and stream its rows to ``sink`` (a text stream,
    default ``m.output_path`` or stdout). Returns the exit code."""
    t0 = time.perf_counter()
    tasks = [(m, idx, coords) for idx, coords in grid(m)]
    own = sink is None and m.output_path
    if own:
        Path(m.output_path).parent.mkdir(parents=True, exist_ok=True)
        sink = open(m.output_path, "w", newline="")
    elif sink is None:
        sink = sys.stdout
    failed = 0
    try:
        w = _Writer(sink, m.format)
        for r in _results(m, tasks):
            if r.error:
                failed += 1
                log.error("point %s failed: %s", dict(r.coords), r.error)
            else:
                log.info("point %s: %d row(s)", dict(r.coords), len(r.rows))
                w.rows(r.rows)
        w.footer({"wall_time_s": round(time.perf_counter() - t0, 3), "version": __version__,
                  "failed_points": failed})
    finally:
        if own:
            sink.close()
    return EXIT_PARTIAL if failed else EXIT_OK


def _cell(v):
    if isinstance(v, float):
        return repr(v)
    return v


def shipped_manifests() -> list[str]:
    base = resources.files("qsensim") / "manifests"
    return sorted(p.name[:-5] for p in base.iterdir() if p.name.endswith(".toml"))


def load_shipped(fig_id: str) -> RunManifest:
    name = fig_id.lower().replace("fig.", "fig").replace(" ", "")
    if name.startswith("fig") and name[3:].isdigit():
        name = f"fig{int(name[3:]):02d}"
    res = resources.files("qsensim") / "manifests" / f"{name}.toml"
    if not res.is_file():
        raise ConfigError(f"no shipped manifest {fig_id!r}; available: {', '.join(shipped_manifests())}")
    return parse_text(res.read_text(), f"{name}.toml")


def _override(m: RunManifest, args) -> RunManifest:
    kw = {}
    if getattr(args, "seed", None) is not None:
        kw["master_seed"] = args.seed
    if getattr(args, "jobs", None) is not None:
        kw["jobs"] = args.jobs
    if getattr(args, "format", None) is not None:
        kw["format"] = args.format
    if getattr(args, "out", None) is not None:
        kw["output_path"] = args.out
    if getattr(args, "shots", None) is not None:
        kw["base"] = m.base.replace(shots=args.shots)
    if getattr(args, "repetitions", None) is not None:
        kw["repetitions"] = args.repetitions
    return replace(m, **kw)


def cmd_run(args) -> int:
    _, m = parse_config(args.config)
    m = _override(m, args)
    return execute(m)


def cmd_validate(args) -> int:
    _, m = parse_config(args.config)
    sys.stdout.write(dump_manifest(_override(m, args)))
    return EXIT_OK


def cmd_profiles(args) -> int:
    hdr = f"{'platform':<16}{'T1 (s)':>10}{'T2 (s)':>10}{'SGE':>8}{'TGE':>8}{'SPE':>8}{'ME':>8}{'1q (s)':>10}{'2q (s)':>10}{'read (s)':>10}"
    print(hdr)
    for name in PLATFORMS:
        p = default_profile(name)
        d = p.durations
        print(f"{name:<16}{p.t1:>10.3g}{p.t2:>10.3g}{p.sge:>8.4g}{p.tge:>8.4g}{p.spe:>8.4g}{p.me[0]:>8.4g}"
              f"{d['single_gate']:>10.3g}{d['two_gate']:>10.3g}{d['readout']:>10.3g}")
    return EXIT_OK


def cmd_repro(args) -> int:
    m = _override(load_shipped(args.figure), args)
    return execute(m)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qsensim", description="Noisy distributed quantum sensing simulator")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="verb", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", required=True, help="TOML run manifest")
        p.add_argument("--out", help="output file (default: stdout)")
        p.add_argument("--format", choices=("csv", "jsonl"))
        p.add_argument("--seed", type=int, help="master seed")
        p.add_argument("--jobs", type=int, help="worker processes")

    common(sub.add_parser("run", help="execute a manifest"))
    common(sub.add_parser("validate", help="parse a manifest and print it with defaults filled in"))
    sub.add_parser("profiles", help="print the platform noise registry")
    rp = sub.add_parser("repro", help="run a shipped figure manifest")
    rp.add_argument("figure", help="e.g. fig10; see README for the list")
    common(rp, config=False)
    rp.add_argument("--shots", type=int, help="override the shot count")
    rp.add_argument("--repetitions", type=int, help="override repetitions per point")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    handlers = {"run": cmd_run, "validate": cmd_validate, "profiles": cmd_profiles, "repro": cmd_repro}
    try:
        return handlers[args.verb](args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
