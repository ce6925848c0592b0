"""Batch entry point: ``rbaccess run --preset fig2|fig3|fig4|custom``.

Exit codes: 0 success, 2 validation, 3 I/O, 4 grid sizing refusal.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import os
import sys
import time
from dataclasses import replace

from rbaccess import __version__
from rbaccess.config import PRESETS, RunConfig, config_dict, dump_config, load_config
from rbaccess.errors import ConfigurationError, GridSizeError, SetupError, UsageError
from rbaccess.harness import ExperimentBase, run_experiment

log = logging.getLogger("rbaccess")

CSV_COLUMNS = ("axis_value", "policy", "mean_reward", "ci_low", "ci_high", "replications")
EXIT_OK, EXIT_VALIDATION, EXIT_IO, EXIT_SIZING = 0, 2, 3, 4


def preset_sweep(cfg: RunConfig, preset: str):
    """``(axis, points)`` swept by a preset."""
    if preset == "fig2":
        return "horizon", list(range(1, cfg.horizon + 1))
    if preset == "fig3":
        return "rb_count", list(range(1, cfg.physical.slices[cfg.focal_slice - 1].rbs + 1))
    if preset == "fig4":
        return "false_obs", [round(0.1 * i, 10) for i in range(1, 9)]
    if preset == "custom":
        return cfg.custom_axis, list(cfg.custom_points)
    raise ConfigurationError(f"unknown preset {preset!r}", key="preset")


def experiment_base(cfg: RunConfig) -> ExperimentBase:
    return ExperimentBase(cfg.physical, cfg.focal_slice - 1, cfg.discount, cfg.horizon, cfg.grid,
                          cfg.memory_cap_mib * 2**20)


def summary_csv(summary) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in summary.rows:
        w.writerow([repr(float(r.axis_value)), r.policy, repr(float(r.mean_reward)), repr(float(r.ci_low)),
                    repr(float(r.ci_high)), r.replications])
    return buf.getvalue()


def _write_atomic(path, text: str):
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def run(preset: str, cfg: RunConfig) -> dict:
    """Run one preset and write ``<preset>.csv`` plus its manifest into ``cfg.output_dir``."""
    started = time.perf_counter()
    axis, points = preset_sweep(cfg, preset)
    os.makedirs(cfg.output_dir, exist_ok=True)
    if not os.access(cfg.output_dir, os.W_OK):
        raise PermissionError(f"output directory {cfg.output_dir!r} is not writable")
    summary = run_experiment(axis, points, cfg.replications, cfg.policy_kinds, experiment_base(cfg), cfg.seed)
    solved = time.perf_counter()
    text = summary_csv(summary)
    csv_path = os.path.join(cfg.output_dir, f"{preset}.csv")
    _write_atomic(csv_path, text)
    manifest = {
        "tool": "rbaccess",
        "version": __version__,
        "preset": preset,
        "axis": axis,
        "points": [float(p) for p in points],
        "metadata": summary.metadata,
        "config": config_dict(replace(cfg, preset=preset)),
        "artifacts": {
            f"{preset}.csv": hashlib.sha256(text.encode("utf-8")).hexdigest(),
            "policy_tables": [{"model_hash": m, "sha256": c}
                              for m, c in summary.table_hashes.items()],
        },
    }
    _write_atomic(os.path.join(cfg.output_dir, f"{preset}_manifest.json"),
                  json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    timings = {"simulate_and_solve_s": solved - started, "total_s": time.perf_counter() - started}
    _write_atomic(os.path.join(cfg.output_dir, f"{preset}_timings.json"), json.dumps(timings, indent=2) + "\n")
    return {"csv": csv_path, "summary": summary, "manifest": manifest}


def _parse_policies(text: str):
    return tuple(p.strip() for p in text.split(",") if p.strip())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rbaccess", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"rbaccess {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="run an experiment preset")
    p.add_argument("preset_pos", nargs="?", choices=PRESETS, metavar="PRESET")
    p.add_argument("--preset", choices=PRESETS)
    p.add_argument("--config", metavar="PATH")
    p.add_argument("--seed", type=int, metavar="U64")
    p.add_argument("--replications", type=int, metavar="N")
    p.add_argument("--out", metavar="DIR")
    p.add_argument("--grid", type=int, metavar="N")
    p.add_argument("--policies", type=_parse_policies, metavar="LIST")
    p.add_argument("-v", "--verbose", action="store_true")
    d = sub.add_parser("dump-config", help="print the resolved config as TOML")
    d.add_argument("--config", metavar="PATH")
    return parser


def resolve_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    overrides = {}
    for flag, key in (("seed", "seed"), ("replications", "replications"), ("out", "output_dir"),
                      ("grid", "grid"), ("policies", "policies")):
        value = getattr(args, flag, None)
        if value is not None:
            overrides[key] = value
    preset = getattr(args, "preset", None) or getattr(args, "preset_pos", None)
    if preset:
        overrides["preset"] = preset
    return replace(cfg, **overrides) if overrides else cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        if args.command == "dump-config":
            sys.stdout.write(dump_config(cfg))
            return EXIT_OK
        out = run(cfg.preset, cfg)
        print(f"wrote {out['csv']} ({len(out['summary'].rows)} rows)")
        return EXIT_OK
    except (ConfigurationError, UsageError, SetupError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except GridSizeError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_SIZING
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
