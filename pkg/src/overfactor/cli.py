"""Command-line harness.

Subcommands: demo-overfit, grid, scaling, rip-probe.  Each accepts an optional
config file in a plain ``key = value`` text format (# starts a comment; lists
are comma-separated) plus repeated ``--set key=value`` overrides.  Outputs go
to a run directory.  Exit status is 0 only when every assertion of the invoked
suite passed.  Worker count comes from --workers or $OVERFACTOR_WORKERS.
"""

from __future__ import annotations

import argparse
import sys

from .experiments import (
    COMPLETION_GD,
    SENSING_GD,
    ExperimentGrid,
    OverfitDemoConfig,
    ScalingConfig,
    run_grid,
    run_overfit_demo,
    run_rip_probe,
    run_scaling_study,
)
from .recovery import GdConfig


def parse_value(text: str):
    text = text.strip()
    if "," in text:
        return [parse_value(p) for p in text.split(",") if p.strip()]
    lowered = text.lower()
    if lowered in ("true", "false"):
        return lowered == "true"
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            continue
    return text


def read_config_file(path) -> dict:
    entries = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
            key, value = line.split("=", 1)
            entries[key.strip()] = parse_value(value)
    return entries


def _collect_options(args) -> dict:
    options = {}
    if args.config:
        options.update(read_config_file(args.config))
    for item in args.set or []:
        if "=" not in item:
            raise SystemExit(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        options[key.strip()] = parse_value(value)
    return options


def _pop_gd(options: dict, default: GdConfig) -> GdConfig:
    kwargs = {}
    for key in ("r", "eta", "alpha", "T", "record_every"):
        if key in options:
            kwargs[key] = options.pop(key)
    return GdConfig(
        r=kwargs.get("r", default.r),
        eta=kwargs.get("eta", default.eta),
        alpha=kwargs.get("alpha", default.alpha),
        T=kwargs.get("T", default.T),
        record_every=kwargs.get("record_every", default.record_every),
    )


def _as_tuple(value):
    return tuple(value) if isinstance(value, list) else (value,)


def _finish(report, out_dir) -> int:
    failed = [a for a in report["assertions"] if not a["passed"]]
    for a in report["assertions"]:
        status = "PASS" if a["passed"] else "FAIL"
        print(f"[{status}] {a['name']}: {a.get('detail', {})}")
    print(f"report written to {out_dir}")
    return 1 if failed else 0


def cmd_demo_overfit(args) -> int:
    options = _collect_options(args)
    default_gd = COMPLETION_GD if options.get("problem") == "completion" else SENSING_GD
    gd = _pop_gd(options, default_gd)
    config = OverfitDemoConfig(gd=gd, **options)
    report = run_overfit_demo(config, args.out)
    return _finish(report, args.out)


def cmd_grid(args) -> int:
    options = _collect_options(args)
    default_gd = COMPLETION_GD if options.get("problem") == "completion" else SENSING_GD
    gd = _pop_gd(options, default_gd)
    for key in ("rank_values", "sigma2_values"):
        if key in options:
            options[key] = _as_tuple(options[key])
    threshold = options.pop("spearman_threshold", 0.8)
    grid = ExperimentGrid(gd=gd, **options)
    report = run_grid(grid, args.out, workers=args.workers, spearman_threshold=threshold)
    return _finish(report, args.out)


def cmd_scaling(args) -> int:
    options = _collect_options(args)
    gd = _pop_gd(options, SENSING_GD)
    axis = options.pop("axis", "sigma2")
    if "values" in options:
        options["values"] = _as_tuple(options["values"])
    config = ScalingConfig.with_defaults(axis, gd=gd, **options)
    report = run_scaling_study(config, args.out, workers=args.workers)
    return _finish(report, args.out)


def cmd_rip_probe(args) -> int:
    options = _collect_options(args)
    report = run_rip_probe(args.out, **options)
    return _finish(report, args.out)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="overfactor",
        description="Over-parameterized factored gradient descent experiments "
                    "with hold-out early stopping.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, runner in [
        ("demo-overfit", cmd_demo_overfit),
        ("grid", cmd_grid),
        ("scaling", cmd_scaling),
        ("rip-probe", cmd_rip_probe),
    ]:
        p = sub.add_parser(name)
        p.add_argument("--config", help="key = value config file")
        p.add_argument("--out", required=True, help="run output directory")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config entry (repeatable)")
        p.add_argument("--workers", type=int, default=None,
                       help="parallel worker count (default: $OVERFACTOR_WORKERS or CPU count)")
        p.set_defaults(runner=runner)
    args = parser.parse_args(argv)
    return args.runner(args)


if __name__ == "__main__":
    sys.exit(main())
