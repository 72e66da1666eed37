"""
Command line harness.

    tilechol gen --locations locs.csv [--matrix-out A.bin] [run flags]
    tilechol factor [--config run.json] [run flags]
    tilechol sweep grid.json [--out summary.csv]
    tilechol render-map map.json [--ppm map.ppm]

Any error ends the command with a JSON error object on stderr and exit
status 1.
"""
import argparse
import csv
import json
import logging
import os
import sys
from typing import Any, Dict, List, Optional

from pydantic import ValidationError
from schematics.exceptions import BaseError as ReportError

from tilechol.config import RunConfig, load_run_config, load_sweep_grid
from tilechol.constants import BANDWIDTH_PRESETS, CORRELATION_PRESETS, LOG_LEVEL_ENV
from tilechol.core import dump_matrix
from tilechol.covariance import write_locations_csv
from tilechol.exceptions import TileCholError, error_object
from tilechol.pipeline import generate_problem, run_case
from tilechol.planner import load_precision_map
from tilechol.render import legend, render_ascii, write_ppm
from tilechol.report import write_report
from tilechol.scheduler import Variant
from tilechol.schemas import TraceEventSchema, TransferEventSchema, write_jsonl

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = [
    "n",
    "nb",
    "variant",
    "devices",
    "precision_mode",
    "eps_target",
    "theta",
    "c2g",
    "g2c",
    "total_bytes",
    "kl",
    "kl_abs",
    "wall_seconds",
    "status",
    "error",
]

# flag destination -> RunConfig field
RUN_FLAGS = {
    "n": "n",
    "nb": "nb",
    "variant": "variant",
    "devices": "devices",
    "streams": "streams_per_device",
    "capacity_bytes": "capacity_bytes",
    "capacity_fraction": "capacity_fraction",
    "precision_mode": "precision_mode",
    "eps_target": "eps_target",
    "theta": "theta",
    "correlation": "correlation",
    "nugget": "nugget",
    "seed": "seed",
    "bandwidth": "bandwidth",
    "eviction_policy": "eviction_policy",
    "watchdog": "watchdog_seconds",
    "lockstep": "lockstep",
    "sort_locations": "sort_locations",
    "observations": "observations",
    "matrix": "matrix_path",
    "report": "report_path",
    "trace": "trace_path",
    "ledger": "ledger_path",
    "map": "map_path",
}


def setup_logging(level: Optional[str] = None) -> None:
    level = (level or os.environ.get(LOG_LEVEL_ENV) or "WARNING").upper()
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def add_run_flags(p: argparse.ArgumentParser, with_outputs: bool = True) -> None:
    p.add_argument("--config", help="JSON run configuration; flags override its values")
    p.add_argument("--n", type=int)
    p.add_argument("--nb", type=int)
    p.add_argument("--variant", choices=[v.value for v in Variant])
    p.add_argument("--devices", type=int)
    p.add_argument("--streams", type=int, help="streams per device")
    p.add_argument("--capacity-bytes", type=int)
    p.add_argument("--capacity-fraction", type=float,
                   help="device capacity as a fraction of the FP64 matrix bytes")
    p.add_argument("--precision-mode", choices=["fp64", "2p", "3p", "4p"])
    p.add_argument("--eps-target", type=float)
    p.add_argument("--theta", type=float, nargs=3, metavar=("SIGMA_SQ", "RANGE", "NU"))
    p.add_argument("--correlation", choices=list(CORRELATION_PRESETS))
    p.add_argument("--nugget", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--bandwidth", choices=list(BANDWIDTH_PRESETS))
    p.add_argument("--eviction-policy", choices=["lru", "fifo"])
    p.add_argument("--watchdog", type=float, help="seconds before a dependency wait fails")
    p.add_argument("--lockstep", action="store_true", default=None,
                   help="pass a turn between streams so transfer volumes are reproducible")
    p.add_argument("--no-sort", dest="sort_locations", action="store_false", default=None,
                   help="keep locations in generation order")
    p.add_argument("--observations", choices=["zero", "sampled"])
    p.add_argument("--matrix", help="tile dump to factorize instead of generating one")
    if with_outputs:
        p.add_argument("--report", help="report JSON (default: stdout)")
        p.add_argument("--trace", help="event trace JSONL")
        p.add_argument("--ledger", help="transfer ledger JSONL")
        p.add_argument("--map", help="precision map JSON")


def run_config_from_args(args: argparse.Namespace) -> RunConfig:
    overrides = {field: getattr(args, dest, None) for dest, field in RUN_FLAGS.items()}
    return load_run_config(args.config, overrides)


def cmd_gen(args: argparse.Namespace) -> int:
    cfg = run_config_from_args(args)
    locs, A = generate_problem(cfg)
    write_locations_csv(args.locations, locs)
    logger.info("wrote %s locations to %s", len(locs), args.locations)
    if args.matrix_out:
        dump_matrix(args.matrix_out, A)
        logger.info("wrote %s to %s", A, args.matrix_out)
    return 0


def cmd_factor(args: argparse.Namespace) -> int:
    cfg = run_config_from_args(args)
    outcome = run_case(cfg)
    result = outcome.result

    if cfg.trace_path:
        write_jsonl(cfg.trace_path, TraceEventSchema(), result.trace.events)
    if cfg.ledger_path:
        events = sorted((e for ledger in result.ledgers for e in ledger.events),
                        key=lambda e: (e.t_start, e.device))
        write_jsonl(cfg.ledger_path, TransferEventSchema(), events)
    if cfg.map_path:
        with open(cfg.map_path, "w") as f:
            f.write(outcome.pmap.to_json())

    report = outcome.report()
    if cfg.report_path:
        write_report(cfg.report_path, report)
    else:
        report.validate()
        json.dump(report.to_primitive(), sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")
    return 0


def sweep_row(data: Dict[str, Any]) -> Dict[str, Any]:
    row: Dict[str, Any] = {k: data.get(k, "") for k in ("n", "nb", "variant", "devices",
                                                       "precision_mode", "eps_target")}
    try:
        cfg = RunConfig.parse_obj(data)
        row.update(n=cfg.n, nb=cfg.nb, variant=cfg.variant.value, devices=cfg.devices,
                   precision_mode=cfg.precision_mode, eps_target=cfg.eps_target,
                   theta=";".join(repr(v) for v in cfg.theta))
        outcome = run_case(cfg)
    except (TileCholError, ValidationError, ValueError) as e:
        logger.warning("sweep run %s failed: %s", data, e)
        row.update(status="error", error=json.dumps(error_object(e), sort_keys=True))
        return row
    result = outcome.result
    row.update(c2g=result.c2g_bytes, g2c=result.g2c_bytes, total_bytes=result.total_bytes,
               kl=repr(outcome.kl), kl_abs=repr(outcome.kl_abs),
               wall_seconds=f"{result.wall_seconds:.6f}", status="ok", error="")
    return row


def cmd_sweep(args: argparse.Namespace) -> int:
    grid = load_sweep_grid(args.grid)
    failed = 0
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        writer = csv.DictWriter(out, fieldnames=SWEEP_COLUMNS, restval="", lineterminator="\n")
        writer.writeheader()
        for data in grid.expand():
            row = sweep_row(data)
            failed += row["status"] != "ok"
            writer.writerow(row)
            out.flush()
    finally:
        if out is not sys.stdout:
            out.close()
    if failed:
        logger.warning("%s sweep runs failed", failed)
    return 1 if failed else 0


def cmd_render_map(args: argparse.Namespace) -> int:
    pmap = load_precision_map(args.map)
    sys.stdout.write(render_ascii(pmap))
    if args.legend:
        sys.stdout.write(legend(pmap))
    if args.ppm:
        write_ppm(args.ppm, pmap, args.scale)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tilechol",
                                     description="Out-of-core tile Cholesky simulator")
    parser.add_argument("--log-level", help=f"overrides ${LOG_LEVEL_ENV} (default WARNING)")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate locations and optionally the covariance dump")
    add_run_flags(gen, with_outputs=False)
    gen.add_argument("--locations", required=True, help="output CSV of locations")
    gen.add_argument("--matrix-out", help="output tile dump of the covariance")
    gen.set_defaults(func=cmd_gen)

    factor = sub.add_parser("factor", help="run one factorization and report")
    add_run_flags(factor)
    factor.set_defaults(func=cmd_factor)

    sweep = sub.add_parser("sweep", help="run a grid of configurations into a CSV summary")
    sweep.add_argument("grid", help='JSON {"base": {...}, "axes": {"field": [...]}}')
    sweep.add_argument("--out", help="CSV output (default: stdout)")
    sweep.set_defaults(func=cmd_sweep)

    render = sub.add_parser("render-map", help="draw a precision map")
    render.add_argument("map", help="precision map JSON")
    render.add_argument("--ppm", help="also write a PPM image")
    render.add_argument("--scale", type=int, default=8, help="pixels per tile in the PPM")
    render.add_argument("--legend", action="store_true")
    render.set_defaults(func=cmd_render_map)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.log_level)
    try:
        return args.func(args)
    except (TileCholError, ValidationError, ReportError, ValueError, OSError) as e:
        logger.debug("command %s failed", args.command, exc_info=True)
        sys.stderr.write(json.dumps(error_object(e), sort_keys=True) + "\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
