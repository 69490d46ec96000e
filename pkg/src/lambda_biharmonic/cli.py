"""Command line front end: parse a JSON run configuration, build the
surface, sweep the requested checks and emit a JSON or CSV report.

Exit codes: 0 when every enabled check passes, 1 when a check fails or the
surface cannot be built, 2 for configuration or usage errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from dataclasses import dataclass, field
from typing import Annotated, Literal, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from . import __version__
from . import catalog as cat
from .ambient import AmbientSpace
from .calculus import ChartGrid, GridGeometry
from .residuals import (
    ALL_CHECKS,
    CLOSED_FORM_TOLERANCE,
    DEFAULT_TOLERANCES,
    IDENTITY_CHECKS,
    LAMBDA_CHECKS,
    ResidualReport,
    evaluate_checks,
)

SCHEMA_VERSION = "1.0"
MIN_RESOLUTION = 9
MAX_RESOLUTION = 1025
DEFAULT_RESOLUTION = {2: 81, 3: 41}
DEFAULT_RESOLUTION_HIGH_DIM = 17
CSV_HEADER = ("check", "max_residual", "tolerance", "pass")

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2


class ConfigError(ValueError):
    """Invalid configuration; maps to exit code 2."""


# ---------------------------------------------------------------------------
# configuration schema


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class AmbientConfig(_Strict):
    c: Literal[-1, 0, 1]
    m: int = Field(ge=2, le=6)


class SliceSurface(_Strict):
    kind: Literal["slice"]
    t0: float = 0.0


class GraphSurface(_Strict):
    kind: Literal["graph"]
    seed: int | None = None


class EuclideanCylinderSurface(_Strict):
    kind: Literal["euclidean_cylinder"]
    k: int = Field(ge=1)
    a: float = Field(gt=0)
    tilt: float = 0.0


class SphericalCylinderSurface(_Strict):
    kind: Literal["spherical_vertical_cylinder"]
    rho: float = Field(gt=0, lt=math.pi)


class HyperbolicCylinderSurface(_Strict):
    kind: Literal["hyperbolic_vertical_cylinder"]
    rho: float = Field(gt=0)


class RotationMinimalSurface(_Strict):
    kind: Literal["rotation_minimal"]
    initial_slope: float = 0.5
    s0: float = Field(default=1.0, gt=0)
    s1: float = Field(default=1.4, gt=0)
    step: float = Field(default=1e-3, gt=0)


class ExpressionSurface(_Strict):
    kind: Literal["custom-graph-expression"]
    expression: str
    lo: list[float] | None = None
    hi: list[float] | None = None


Surface = Annotated[
    Union[
        SliceSurface,
        GraphSurface,
        EuclideanCylinderSurface,
        SphericalCylinderSurface,
        HyperbolicCylinderSurface,
        RotationMinimalSurface,
        ExpressionSurface,
    ],
    Field(discriminator="kind"),
]
SURFACE_KINDS = (
    "slice",
    "graph",
    "euclidean_cylinder",
    "spherical_vertical_cylinder",
    "hyperbolic_vertical_cylinder",
    "rotation_minimal",
    "custom-graph-expression",
)
# the base curvature each kind is defined over (None: any)
_REQUIRED_C = {
    "euclidean_cylinder": 0,
    "spherical_vertical_cylinder": 1,
    "hyperbolic_vertical_cylinder": -1,
}


class DomainConfig(_Strict):
    lo: list[float]
    hi: list[float]


class GridConfig(_Strict):
    resolution: int | list[int] | None = None
    domain: DomainConfig | None = None
    margin: int = Field(default=4, ge=2)

    @field_validator("resolution")
    @classmethod
    def _resolution_range(cls, v):
        values = v if isinstance(v, list) else [v] if v is not None else []
        for r in values:
            if not MIN_RESOLUTION <= r <= MAX_RESOLUTION:
                raise ValueError(f"resolution must lie in [{MIN_RESOLUTION}, {MAX_RESOLUTION}], got {r}")
        return v


class RunConfig(_Strict):
    """Validated run configuration."""

    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    ambient: AmbientConfig
    surface: Surface
    lambda_: float | Literal["auto"] = Field(default="auto", alias="lambda")
    grid: GridConfig = Field(default_factory=GridConfig)
    checks: list[str] | None = None
    tolerances: dict[str, float] = Field(default_factory=dict)
    seed: int = 0

    @field_validator("checks")
    @classmethod
    def _known_checks(cls, v):
        if v is None:
            return v
        for name in v:
            if name not in ALL_CHECKS:
                raise ValueError(f"unknown check {name!r}")
        return v

    @field_validator("tolerances")
    @classmethod
    def _positive_tolerances(cls, v):
        for name, tol in v.items():
            if name not in ALL_CHECKS:
                raise ValueError(f"unknown check {name!r}")
            if not (tol > 0 and math.isfinite(tol)):
                raise ValueError(f"tolerance for {name!r} must be positive")
        return v

    @model_validator(mode="after")
    def _consistent(self):
        kind = self.surface.kind
        need = _REQUIRED_C.get(kind)
        if need is not None and self.ambient.c != need:
            raise ValueError(f"surface kind {kind!r} needs ambient c = {need}")
        if kind == "rotation_minimal" and self.ambient.c == 0:
            raise ValueError("rotation_minimal needs ambient c = 1 or -1")
        if kind == "euclidean_cylinder" and not self.surface.k <= self.ambient.m - 1:
            raise ValueError("euclidean_cylinder needs 1 <= k <= m - 1")
        m = self.ambient.m
        res = self.grid.resolution
        if isinstance(res, list) and len(res) != m:
            raise ValueError(f"grid.resolution needs {m} entries")
        dom = self.grid.domain
        if dom is not None and (len(dom.lo) != m or len(dom.hi) != m):
            raise ValueError(f"grid.domain bounds need {m} entries")
        return self

    def echo(self) -> dict:
        return self.model_dump(mode="json", by_alias=True)


def _format_validation(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        path = ".".join(str(p) for p in err["loc"]) or "<root>"
        lines.append(f"{path}: {err['msg']}")
    return "\n".join(lines)


def parse_config(text: str | bytes) -> RunConfig:
    """Parse and validate JSON configuration text.

    Raises ``ConfigError`` with one ``path: message`` line per problem.
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"<root>: invalid JSON ({exc.msg} at line {exc.lineno})") from exc
    if not isinstance(data, dict):
        raise ConfigError("<root>: configuration must be a JSON object")
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_validation(exc)) from exc


def config_json_schema() -> dict:
    return RunConfig.model_json_schema(by_alias=True)


# ---------------------------------------------------------------------------
# surface construction


def build_entry(config: RunConfig) -> cat.CatalogEntry:
    s = config.surface
    c, m = config.ambient.c, config.ambient.m
    space = AmbientSpace(c, m)
    if s.kind == "slice":
        return cat.slice_entry(space, s.t0)
    if s.kind == "graph":
        return cat.random_graph(space, config.seed if s.seed is None else s.seed)
    if s.kind == "euclidean_cylinder":
        return cat.euclidean_cylinder(m, s.k, s.a, s.tilt)
    if s.kind == "spherical_vertical_cylinder":
        return cat.spherical_vertical_cylinder(m, s.rho)
    if s.kind == "hyperbolic_vertical_cylinder":
        return cat.hyperbolic_vertical_cylinder(m, s.rho)
    if s.kind == "rotation_minimal":
        return cat.rotation_minimal(c, m, s.initial_slope, s.s0, s.s1, s.step)
    if s.kind == "custom-graph-expression":
        return cat.expression_graph(space, s.expression, s.lo, s.hi)
    raise ConfigError(f"surface.kind: unsupported kind {s.kind!r}")


def resolve_lambda(config: RunConfig, entry: cat.CatalogEntry | None) -> float | None:
    """Numeric lambda for the run; ``"any"`` entries resolve to 0."""
    if config.lambda_ != "auto":
        return float(config.lambda_)
    if entry is None:
        return None
    if entry.lambda_star == "any":
        return 0.0
    return entry.numeric_lambda


def default_resolution(m: int) -> int:
    return DEFAULT_RESOLUTION.get(m, DEFAULT_RESOLUTION_HIGH_DIM)


def build_grid(config: RunConfig, entry: cat.CatalogEntry) -> ChartGrid:
    m = config.ambient.m
    g = config.grid
    res = g.resolution if g.resolution is not None else default_resolution(m)
    n = tuple(res) if isinstance(res, list) else (int(res),) * m
    if g.domain is not None:
        lo, hi = tuple(g.domain.lo), tuple(g.domain.hi)
    else:
        lo, hi = entry.immersion.lo, entry.immersion.hi
    return ChartGrid(tuple(map(float, lo)), tuple(map(float, hi)), n, g.margin)


def select_checks(config: RunConfig, lam: float | None) -> list[str]:
    if config.checks is not None:
        return list(config.checks)
    names = [n for n in IDENTITY_CHECKS if lam is not None or n not in ("biharmonic_htheta", "biharmonic_height")]
    if lam is not None:
        names.insert(0, "lambda_residual")
    return names


def tolerances_for(config: RunConfig, entry: cat.CatalogEntry | None) -> dict:
    tol = dict(DEFAULT_TOLERANCES)
    if entry is not None and entry.closed_form:
        for name in LAMBDA_CHECKS:
            tol[name] = CLOSED_FORM_TOLERANCE
    tol.update(config.tolerances)
    return tol


# ---------------------------------------------------------------------------
# run and emit


@dataclass
class RunReport:
    config: dict
    reports: list = field(default_factory=list)
    wall_time: float = 0.0
    overall_pass: bool = False
    version: str = __version__
    schema_version: str = SCHEMA_VERSION
    lam: float | None = None
    surface: dict = field(default_factory=dict)
    error: str | None = None

    @property
    def exit_code(self) -> int:
        return EXIT_OK if self.overall_pass else EXIT_FAIL

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "tool_version": self.version,
            "config": self.config,
            "seed": self.config.get("seed"),
            "lambda": self.lam,
            "surface": self.surface,
            "checks": [r.to_dict() for r in self.reports],
            "overall_pass": self.overall_pass,
            "error": self.error,
            "wall_time": self.wall_time,
        }


def run(config: RunConfig, jobs: int = 1) -> RunReport:
    """Build the surface, evaluate the checks and assemble the report."""
    start = time.perf_counter()
    report = RunReport(config.echo())
    tol = tolerances_for(config, None)
    space = AmbientSpace(config.ambient.c, config.ambient.m)
    try:
        entry = build_entry(config)
        lam = resolve_lambda(config, entry)
        checks = select_checks(config, lam)
        tol = tolerances_for(config, entry)
        grid = build_grid(config, entry)
        report.lam = lam
        report.surface = entry.describe()
        geom = GridGeometry.build(entry.immersion, grid, jobs=jobs)
        report.reports = evaluate_checks(geom, checks, lam, tol)
    except (ValueError, ArithmeticError, IndexError, RuntimeError) as exc:
        report.error = f"{type(exc).__name__}: {exc}"
        names = config.checks or ["surface"]
        report.reports = [
            ResidualReport.failure(n, tol.get(n, float("nan")), {}, space, report.error)
            for n in names
        ]
    report.overall_pass = bool(report.reports) and all(r.passed for r in report.reports)
    report.wall_time = time.perf_counter() - start
    return report


def _json_safe(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    return obj


def emit(report: RunReport, fmt: str = "json") -> bytes:
    """Serialize a report; identical runs give identical bytes except wall time."""
    if fmt == "json":
        text = json.dumps(_json_safe(report.to_dict()), indent=2, sort_keys=True, allow_nan=False)
        return (text + "\n").encode("utf-8")
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in report.reports:
            w.writerow([r.check, repr(float(r.max_residual)), repr(float(r.tolerance)), "true" if r.passed else "false"])
        return buf.getvalue().encode("utf-8")
    raise ValueError(f"unknown format {fmt!r}")


# ---------------------------------------------------------------------------
# other subcommands


def catalog_rows() -> list[dict]:
    rows = []
    for e in cat.default_entries():
        d = e.describe()
        rows.append(
            {
                "name": d["name"],
                "ambient": d["ambient"],
                "params": d["params"],
                "lambda_star": d["lambda_star"],
                "minimal": d["minimal"],
            }
        )
    return rows


def emit_catalog(rows: list[dict], fmt: str) -> bytes:
    if fmt == "json":
        return (json.dumps(rows, indent=2, sort_keys=True) + "\n").encode("utf-8")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("name", "ambient", "params", "lambda_star", "minimal"))
    for r in rows:
        w.writerow((r["name"], r["ambient"], json.dumps(r["params"], sort_keys=True), r["lambda_star"], r["minimal"]))
    return buf.getvalue().encode("utf-8")


def rotation_trace(c: int, m: int, initial_slope: float, s0: float, s1: float, step: float, every: int = 1) -> bytes:
    """Integrate a minimal profile and return its CSV trace at the RK4 nodes."""
    from .rotation import minimal_profile_integrate, profile_trace, trace_csv

    profile = minimal_profile_integrate(AmbientSpace(c, m), initial_slope, s0, s1, step)
    nodes = profile.samples["s"][:: max(1, every)]
    return trace_csv(profile_trace(profile, nodes)).encode("utf-8")


def list_checks_text() -> str:
    return "\n".join(ALL_CHECKS) + "\n"


# ---------------------------------------------------------------------------
# entry point


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_CONFIG)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="lambda-biharmonic", description=__doc__.split("\n\n")[0].replace("\n", " "))
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("--list-checks", action="store_true", help="print every check name and exit")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp, config=False):
        if config:
            sp.add_argument("--config", required=True, help="path to a JSON run configuration ('-' for stdin)")
            sp.add_argument("--seed", type=int, help="override the configured seed")
            sp.add_argument("--jobs", type=int, default=1, help="worker threads for frame evaluation")
        sp.add_argument("--format", choices=("json", "csv"), default="json")
        sp.add_argument("--out", help="write output here instead of stdout")

    common(sub.add_parser("check", help="run the checks in a configuration"), config=True)
    common(sub.add_parser("catalog", help="list catalog entries and their lambda values"))
    rot = sub.add_parser("rotation", help="integrate a minimal rotation profile and print a CSV trace")
    rot.add_argument("--c", type=int, choices=(-1, 1), default=1)
    rot.add_argument("--m", type=int, default=3)
    rot.add_argument("--initial-slope", type=float, default=0.5)
    rot.add_argument("--s0", type=float, default=1.0)
    rot.add_argument("--s1", type=float, default=1.4)
    rot.add_argument("--step", type=float, default=1e-3)
    rot.add_argument("--every", type=int, default=1, help="keep every n-th node")
    rot.add_argument("--out")
    sub.add_parser("list-checks", help="print every check name")
    return p


def _write(data: bytes, out: str | None) -> None:
    if out:
        with open(out, "wb") as fh:
            fh.write(data)
    else:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()


def _read_config(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_CONFIG
    if args.list_checks or args.command == "list-checks":
        _write(list_checks_text().encode("utf-8"), None)
        return EXIT_OK
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_CONFIG
    if args.command == "catalog":
        _write(emit_catalog(catalog_rows(), args.format), args.out)
        return EXIT_OK
    if args.command == "rotation":
        try:
            data = rotation_trace(args.c, args.m, args.initial_slope, args.s0, args.s1, args.step, args.every)
        except ValueError as exc:
            sys.stderr.write(f"error: {exc}\n")
            return EXIT_CONFIG
        except RuntimeError as exc:
            sys.stderr.write(f"error: {exc}\n")
            return EXIT_FAIL
        _write(data, args.out)
        return EXIT_OK
    # check
    try:
        text = _read_config(args.config)
        config = parse_config(text)
        if args.seed is not None:
            config = config.model_copy(update={"seed": args.seed})
    except (OSError, ConfigError) as exc:
        sys.stderr.write(f"config error:\n{exc}\n")
        return EXIT_CONFIG
    if args.jobs < 1:
        sys.stderr.write("config error:\n--jobs: must be at least 1\n")
        return EXIT_CONFIG
    report = run(config, jobs=args.jobs)
    _write(emit(report, args.format), args.out)
    return report.exit_code


def entry_point() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entry_point()
