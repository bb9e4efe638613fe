"""``hjzone`` command line: solve, inspect, slice, classify, evaluate, oracle-check.

Exit codes: 0 success, 2 bad input or validation failure, 3 numerical failure.
Angles on the command line are in degrees.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import resource
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .config import ZoneParams
from .grid import GridSpec, OutOfDomainError, default_spec, smoke_spec

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERIC = 3

GRID_PRESETS = {"default": default_spec, "smoke": smoke_spec}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    params: ZoneParams = field(default_factory=ZoneParams)
    grid: GridSpec = field(default_factory=default_spec)
    cfl: float = 0.8
    checkpoint_interval: float = 0.1
    scheme: str = "eno2"
    keep_braking: bool = False
    output: str = "zone.hjz"

    @classmethod
    def from_dict(cls, doc: dict | None) -> "RunConfig":
        doc = dict(doc or {})
        unknown = set(doc) - {"params", "grid", "solver", "output"}
        if unknown:
            raise ConfigError(f"unknown config section(s): {sorted(unknown)}")
        try:
            params = ZoneParams.from_dict(doc.get("params") or {})
            grid = _grid_from(doc.get("grid"), params.v_max)
            solver = dict(doc.get("solver") or {})
            extra = set(solver) - {"cfl", "checkpoint_interval", "scheme", "keep_braking"}
            if extra:
                raise ConfigError(f"unknown solver option(s): {sorted(extra)}")
            cfg = cls(params, grid, output=str(doc.get("output", "zone.hjz")), **solver)
        except (TypeError, KeyError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        cfg.validate()
        return cfg

    def validate(self):
        from .solver import SCHEMES

        if not 0.0 < self.cfl < 1.0:
            raise ConfigError(f"CFL number must lie in (0, 1), got {self.cfl}")
        if self.checkpoint_interval <= 0:
            raise ConfigError("checkpoint interval must be positive")
        if self.scheme not in SCHEMES:
            raise ConfigError(f"scheme must be one of {SCHEMES}")
        if self.grid.hi[3] != self.params.v_max or self.grid.hi[4] != self.params.v_max:
            raise ConfigError("speed axes must end at v_max")


def _grid_from(doc, v_max) -> GridSpec:
    if doc is None:
        return default_spec(v_max=v_max)
    if isinstance(doc, str):
        if doc not in GRID_PRESETS:
            raise ConfigError(f"unknown grid preset {doc!r}")
        return GRID_PRESETS[doc](v_max=v_max)
    if "lo" in doc:
        return GridSpec.from_dict(doc)
    return default_spec(doc["counts"], v_max=v_max)


def load_config(path) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        doc = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML/JSON: {exc}") from exc
    if doc is not None and not isinstance(doc, dict):
        raise ConfigError("config must be a mapping")
    return RunConfig.from_dict(doc)


def _state(values, name):
    x, y, psi_deg, v = values
    from .dynamics import VehicleState
    if v < 0:
        raise ValueError(f"{name} speed must be non-negative")
    return VehicleState(x, y, math.radians(psi_deg), v)


def _load_artifact(path):
    from .zone import load
    if not Path(path).is_file():
        raise FileNotFoundError(f"artifact not found: {path}")
    return load(path)


def cmd_solve(args) -> int:
    from .solver import solve_two_phase
    from .zone import ZoneArtifact, save

    cfg = load_config(args.config)
    if args.grid:
        cfg.grid = GRID_PRESETS[args.grid](v_max=cfg.params.v_max)
    for name in ("cfl", "scheme", "checkpoint_interval"):
        if getattr(args, name) is not None:
            setattr(cfg, name, getattr(args, name))
    if args.keep_braking:
        cfg.keep_braking = True
    cfg.validate()
    out = args.output or cfg.output

    started = time.perf_counter()
    result = solve_two_phase(cfg.grid, cfg.params, cfl=cfg.cfl,
                             checkpoint_interval=cfg.checkpoint_interval, scheme=cfg.scheme,
                             workers=args.workers, progress=args.progress)
    wall = time.perf_counter() - started
    solver = {"scheme": cfg.scheme, "cfl": cfg.cfl,
              "checkpoint_interval": cfg.checkpoint_interval}
    art = ZoneArtifact.from_solution(result, cfg.params, solver, keep_braking=cfg.keep_braking)
    written = save(art, out)
    field_mb = art.payload_bytes / 1e6
    stored = len(result.braking.fields) + 2
    peak_rss = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss / 1024
    print(f"solve wall time: {wall:.1f} s")
    print(f"field payload: {art.payload_bytes} bytes ({field_mb:.1f} MB)")
    print(f"peak field memory: {stored} fields, {stored * field_mb:.1f} MB "
          f"(process peak RSS {peak_rss:.0f} MB)")
    print(f"monotonicity violations: {result.braking.monotonicity_violations()}")
    print(f"wrote {out} ({written} bytes)")
    return EXIT_OK


def cmd_inspect(args) -> int:
    art = _load_artifact(args.artifact)
    block = art.parameter_block()
    block["format_version"] = art.version
    block["payload_bytes"] = art.payload_bytes
    block["braking_checkpoints"] = len(art.braking_times or [])
    v = art.field.values
    block["value_range"] = [float(v.min()), float(v.max())]
    block["negative_fraction"] = float((v < 0).mean())
    print(json.dumps(block, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_slice(args) -> int:
    from .zone import slice_zone, write_slice_csv, write_slice_svg

    art = _load_artifact(args.artifact)
    sl = slice_zone(art, math.radians(args.psi), args.ve, args.vc, args.resolution)
    if not (args.csv or args.svg):
        raise ValueError("give --csv and/or --svg")
    if args.csv:
        rows = write_slice_csv(sl, args.csv)
        print(f"wrote {args.csv} ({rows} rows)")
    if args.svg:
        write_slice_svg(sl, args.svg, art.params)
        print(f"wrote {args.svg}")
    print(f"zero-sublevel area: {sl.sublevel_area():.1f} m^2, contours: {len(sl.contours)}")
    return EXIT_OK


def cmd_classify(args) -> int:
    from .zone import classify, conservative_margin

    art = _load_artifact(args.artifact)
    ego = _state(args.ego, "ego")
    contender = _state(args.contender, "contender")
    margin = conservative_margin(art) if args.conservative else args.margin
    c = classify(art, ego, contender, margin)
    verdict = "safety-critical" if c.safety_critical else "not safety-critical"
    sign = "< 0" if c.value < 0 else ">= 0"
    where = "" if c.in_domain else " (outside grid)"
    base = "critical" if c.baseline else "not critical"
    print(f"{verdict}, value {c.value:.3f} m ({sign}){where}, baseline: {base}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    from .evaluation import evaluate, load_log

    art = _load_artifact(args.artifact)
    if not Path(args.log).is_file():
        raise FileNotFoundError(f"log not found: {args.log}")
    report = evaluate(load_log(args.log), art, workers=args.workers or 1)
    print(report.table())
    if args.report:
        Path(args.report).write_text(json.dumps(report.to_dict(), indent=2) + "\n")
        print(f"wrote {args.report}")
    return EXIT_OK


def cmd_oracle_check(args) -> int:
    from .completeness import completeness_check
    from .solver import set_workers

    art = _load_artifact(args.artifact)
    set_workers(args.workers)
    rep = completeness_check(art, args.samples, args.seed, args.budget)
    print(f"samples: {len(rep.samples)}  witnessed: {rep.witnessed}  "
          f"violations (V >= {rep.epsilon:.3f} m): {len(rep.violations)}  "
          f"rate: {100 * rep.violation_rate:.2f}%")
    if args.json:
        Path(args.json).write_text(json.dumps(rep.to_dict(), indent=2) + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hjzone", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="compute the zone and write an artifact")
    s.add_argument("--config", help="YAML or JSON run config")
    s.add_argument("-o", "--output", help="artifact path (overrides config)")
    s.add_argument("--grid", choices=sorted(GRID_PRESETS))
    s.add_argument("--cfl", type=float)
    s.add_argument("--scheme")
    s.add_argument("--checkpoint-interval", type=float)
    s.add_argument("--keep-braking", action="store_true", help="store the braking tube too")
    s.add_argument("--progress", action="store_true")
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("inspect", help="print the artifact parameter block")
    s.add_argument("artifact")
    s.set_defaults(func=cmd_inspect)

    s = sub.add_parser("slice", help="export an (x_rel, y_rel) slice")
    s.add_argument("artifact")
    s.add_argument("--psi", type=float, required=True, help="relative heading, degrees")
    s.add_argument("--ve", type=float, required=True)
    s.add_argument("--vc", type=float, required=True)
    s.add_argument("--resolution", type=int, default=200)
    s.add_argument("--csv")
    s.add_argument("--svg")
    s.set_defaults(func=cmd_slice)

    s = sub.add_parser("classify", help="classify one contender")
    s.add_argument("artifact")
    s.add_argument("--ego", type=float, nargs=4, metavar=("X", "Y", "PSI_DEG", "V"),
                   default=[0.0, 0.0, 0.0, 0.0])
    s.add_argument("--contender", type=float, nargs=4, metavar=("X", "Y", "PSI_DEG", "V"),
                   required=True)
    s.add_argument("--margin", type=float, default=0.0)
    s.add_argument("--conservative", action="store_true",
                   help="use the one-cell gradient margin instead of --margin")
    s.set_defaults(func=cmd_classify)

    s = sub.add_parser("evaluate", help="false-positive report for a detection log")
    s.add_argument("artifact")
    s.add_argument("log")
    s.add_argument("--report", help="write the JSON report here")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("oracle-check", help="completeness against rollout witnesses")
    s.add_argument("artifact")
    s.add_argument("--samples", type=int, default=100)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--budget", type=int, default=10_000)
    s.add_argument("--json", help="write the JSON summary here")
    s.set_defaults(func=cmd_oracle_check)

    for sp in sub.choices.values():
        sp.add_argument("--workers", type=int, default=None,
                        help="worker threads (default: all cores)")
    return p


def main(argv=None) -> int:
    from .evaluation import LogFormatError
    from .solver import SolverInstabilityError
    from .zone import ZoneFormatError

    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (SolverInstabilityError, FloatingPointError) as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, ZoneFormatError, LogFormatError, OutOfDomainError,
            FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
