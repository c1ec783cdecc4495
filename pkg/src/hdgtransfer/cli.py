"""Command line entry point: ``hdgtransfer {run,convergence,diagnostics,paths} --config F``."""

import argparse
import logging
import sys

from .diagnostics import diagnostics_constants, write_diagnostics_csv
from .errors import HdgError
from .spaces import space_tables
from .study import build_level, load_config, run_convergence, solve_level, write_results_csv
from .transfer import dump_paths_csv


def _cmd_run(cfg):
    res, sol = solve_level(cfg, cfg.level, export_path=cfg.export_matrix or None)
    path = f"{cfg.out}_run.csv"
    with open(path, "w", newline="") as fh:
        write_results_csv([res], fh)
    print(f"domain={cfg.domain} k={cfg.k} nu={cfg.nu} level={cfg.level} "
          f"N_elem={res.n_elem} h={res.h:.4e} R={res.R:.4e} paths_valid={res.paths_valid}")
    for key, val in res.errors.items():
        print(f"  err_{key} = {val:.6e}")
    for key, val in res.certificates.items():
        print(f"  certificate {key} = {val:.3e}")
    print(f"wrote {path}")


def _cmd_convergence(cfg):
    path = f"{cfg.out}.csv"
    results = run_convergence(cfg, csv_path=path)
    last = results[-1]
    summary = " ".join(f"eoc_{k}={v:.3f}" for k, v in last.eocs.items() if v is not None)
    print(f"{len(results)} levels, final {summary or '(no rates)'}")
    print(f"wrote {path}")


def _cmd_diagnostics(cfg):
    mesh, _, paths = build_level(cfg, cfg.level)
    rows, R = diagnostics_constants(mesh, paths, space_tables(cfg.k))
    path = f"{cfg.out}_diagnostics.csv"
    with open(path, "w", newline="") as fh:
        write_diagnostics_csv(rows, fh)
    print(f"{len(rows)} boundary edges, R={R:.4e}")
    print(f"wrote {path}")


def _cmd_paths(cfg):
    _, _, paths = build_level(cfg, cfg.level)
    path = f"{cfg.out}_paths.csv"
    with open(path, "w", newline="") as fh:
        dump_paths_csv(paths, fh)
    print(f"{len(paths)} paths, max length {paths.max_length:.4e}, non_crossing={paths.non_crossing}")
    print(f"wrote {path}")


COMMANDS = {"run": _cmd_run, "convergence": _cmd_convergence,
            "diagnostics": _cmd_diagnostics, "paths": _cmd_paths}


def build_parser():
    parser = argparse.ArgumentParser(prog="hdgtransfer",
                                     description="Unfitted HDG for linear elasticity with boundary-data transfer.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log per-level progress")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in [("run", "single solve and report"),
                        ("convergence", "refinement study, writes <out>.csv"),
                        ("diagnostics", "per-edge constants, writes <out>_diagnostics.csv"),
                        ("paths", "transfer path dump, writes <out>_paths.csv")]:
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True, help="key=value configuration file")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
        COMMANDS[args.command](cfg)
    except (HdgError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
