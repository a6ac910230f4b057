"""Command-line entry point: ``sim run``, ``sim boost-check``, ``sim sweep-dispersion``.

Exit codes: 0 success, 1 configuration error, 2 runtime failure (including a
failed verification battery).  ``SIM_OUTPUT_DIR`` overrides the configured
output directory.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import tempfile
from pathlib import Path

from ..errors import ConfigError
from .config import WAVE_SCENARIOS, ScenarioConfig, load_config, validate
from .scenarios import SCHEMA_VERSION, format_json, run_scenario, sweep_dispersion, to_dict

OUTPUT_ENV = "SIM_OUTPUT_DIR"
EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2

log = logging.getLogger("geomaxwell.cli")


def output_dir(cfg, override=None):
    return Path(override or os.environ.get(OUTPUT_ENV) or cfg.output.dir)


def write_artifacts(directory, files):
    """Write every file via a temporary name and rename, so readers never see partial files."""
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for name, text in sorted(files.items()):
        fd, tmp = tempfile.mkstemp(dir=directory, prefix=f".{name}.")
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, directory / name)
        written.append(directory / name)
    return written


def _parser():
    p = argparse.ArgumentParser(prog="sim", description="Structure-preserving Maxwell simulations.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a scenario config")
    r.add_argument("config")
    r.add_argument("--jobs", type=int, default=1, help="threads for independent sub-runs")
    r.add_argument("--output", help="output directory (overrides config and environment)")
    s = sub.add_parser("sweep-dispersion", help="measure omega(k) over the configured modes")
    s.add_argument("config")
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--output")
    b = sub.add_parser("boost-check", help="run the Lorentz boost verification battery")
    b.add_argument("--samples", type=int, default=1000)
    b.add_argument("--v-max", type=float, default=0.99)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--jobs", type=int, default=1)
    b.add_argument("--output")
    return p


def _config_for(args):
    if args.command == "boost-check":
        cfg = ScenarioConfig(scenario="boost_check", seed=args.seed)
        cfg.boost.samples = args.samples
        cfg.boost.v_max = args.v_max
        return validate(cfg)
    cfg = load_config(args.config)
    if args.command == "sweep-dispersion" and cfg.scenario not in WAVE_SCENARIOS:
        raise ConfigError("scenario", f"sweep-dispersion needs one of {WAVE_SCENARIOS}")
    return cfg


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.jobs < 1:
            raise ConfigError("--jobs", "must be at least 1")
        cfg = _config_for(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "sweep-dispersion":
            out = sweep_dispersion(cfg, jobs=args.jobs)
            out.files[f"{cfg.prefix}_sweep.json"] = format_json(
                {"schema_version": SCHEMA_VERSION, "scenario": cfg.scenario,
                 "config": to_dict(cfg), **out.summary})
        else:
            out = run_scenario(cfg, jobs=args.jobs)
    except Exception as exc:  # solver and measurement failures
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    directory = output_dir(cfg, args.output)
    try:
        paths = write_artifacts(directory, out.files)
    except OSError as exc:
        print(f"runtime failure: cannot write outputs: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    for path in paths:
        log.info("wrote %s", path)
    if args.command == "boost-check":
        print(out.files[f"{cfg.prefix}_report.json"], end="")
    if not out.passed:
        print("verification battery reported failures", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
