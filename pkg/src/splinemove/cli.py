"""``splinemove`` command line: rotation sweeps, slip runs, DGCL checks, flap demo and exports."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from . import io as gio
from .barrier import BarrierConfig
from .domains.annulus import build_annulus, rotating_square_preset
from .domains.open_domain import build_open_domain, flap_preset
from .errors import ArgumentError, ParameterizationError, SolverError, SplineMoveError
from .movers import METHODS, annulus_boundary, max_rotation_sweep
from .quality import QualityReport, min_scaled_jacobian
from .transfer import SnapshotPair, SplineField, area_scaled_copy, field_drift, field_space, mesh_velocity_divergence, transfer

log = logging.getLogger("splinemove")

EXIT_OK = 0
EXIT_CHECK = 1
EXIT_USAGE = 2
EXIT_PARAM = 3
EXIT_SOLVER = 4

PRESETS = ("rotating-square", "flap")
DGCL_TOL = 1e-12


@dataclass
class RunConfig:
    preset: str = "rotating-square"
    degree: int = 2
    refine: int = 2
    dtheta_deg: float = 2.25
    theta0_deg: float = 0.0
    steps: int = 200
    dt: float = 0.01
    slip: bool = True
    methods: list = field(default_factory=lambda: list(METHODS))
    sweep_step_deg: float = 0.5
    sweep_resolution_deg: float = 0.1
    sweep_limit_deg: float = 360.0
    u0: list = field(default_factory=lambda: [1.0, 0.5])
    negative_control: bool = False
    amplitude: float = 0.3
    omega: float = 2.0 * math.pi / 3.0
    flap_steps: int = 60
    export_every: int = 0
    export_m: int = 17
    barrier: dict = field(default_factory=dict)
    out: str = "out"

    def validate(self) -> "RunConfig":
        if self.preset not in PRESETS:
            raise ArgumentError(f"unknown preset {self.preset!r}; choose from {', '.join(PRESETS)}")
        if self.degree < 1 or self.refine < 0:
            raise ArgumentError("degree must be >= 1 and refine >= 0")
        for name in ("dtheta_deg", "dt", "sweep_step_deg", "sweep_resolution_deg", "sweep_limit_deg", "omega"):
            if not getattr(self, name) > 0:
                raise ArgumentError(f"{name} must be positive")
        if self.steps < 1 or self.flap_steps < 1 or self.export_m < 2 or self.export_every < 0:
            raise ArgumentError("steps, flap_steps >= 1, export_m >= 2, export_every >= 0 required")
        if self.amplitude < 0:
            raise ArgumentError("amplitude must be non-negative")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ArgumentError(f"unknown method(s): {', '.join(sorted(unknown))}")
        if not self.methods:
            raise ArgumentError("empty method list")
        valid = {f.name for f in fields(BarrierConfig)}
        bad = set(self.barrier) - valid
        if bad:
            raise ArgumentError(f"unknown barrier option(s): {', '.join(sorted(bad))}")
        self.barrier_config()
        return self

    def barrier_config(self) -> BarrierConfig:
        return BarrierConfig(**self.barrier)

    @property
    def elevate(self) -> int:
        return self.degree - 1


@dataclass
class TimingRecord:
    """Per-step wall times in milliseconds."""

    step: int
    build: float = 0.0
    stage1: float = 0.0
    stage2: float = 0.0
    transfer: float = 0.0
    report: float = 0.0
    total: float = 0.0

    HEADER = ("step", "build_ms", "stage1_ms", "stage2_ms", "transfer_ms", "report_ms", "total_ms")

    def row(self) -> list:
        return [self.step] + [f"{v:.3f}" for v in (self.build, self.stage1, self.stage2, self.transfer,
                                                      self.report, self.total)]


def split_build(wall_ms: float, records) -> tuple:
    """Split a build's wall time into (build, stage1, stage2).

    Stage times are per-patch sums; with concurrent patches they are
    scaled to fit the wall time so the phases never exceed the total.
    """
    s1 = sum(r.stage1_ms for r in records if r is not None)
    s2 = sum(r.stage2_ms for r in records if r is not None)
    if s1 + s2 > wall_ms and s1 + s2 > 0:
        f = wall_ms / (s1 + s2)
        s1, s2 = s1 * f, s2 * f
    return max(wall_ms - s1 - s2, 0.0), s1, s2


class Writer:
    """One CSV file per concern inside the output directory."""

    def __init__(self, out: Path):
        self.out = out
        self._files = {}

    def row(self, name: str, header, values) -> None:
        if name not in self._files:
            f = open(self.out / f"{name}.csv", "w", newline="")
            w = csv.writer(f)
            w.writerow(header)
            self._files[name] = (f, w)
        self._files[name][1].writerow(values)

    def close(self) -> None:
        for f, _ in self._files.values():
            f.close()
        self._files.clear()


def _fmt(x) -> str:
    return repr(float(x))


def _quality_row(step, x, rep: QualityReport) -> list:
    return [step, _fmt(x), _fmt(rep.jmin), rep.patch] + [_fmt(v) for v in rep.xi] + [_fmt(min(rep.min_det))]


QUALITY_HEADER = ["step", "theta_deg", "jmin", "patch", "xi1", "xi2", "min_det"]


def _convergence_rows(writer: Writer, step: int, records) -> None:
    for k, rec in enumerate(records):
        if rec is None:
            continue
        for r in rec.rows:
            writer.row("convergence", ["step", "patch", "stage", "iteration", "objective", "grad_norm", "min_det"],
                       [step, k, r[0], r[1], _fmt(r[2]), _fmt(r[3]), _fmt(r[4])])


def _annulus_spec(cfg: RunConfig):
    return rotating_square_preset(elevate=cfg.elevate, refine=cfg.refine, barrier=cfg.barrier_config())


def _maybe_export(cfg: RunConfig, domain, step: int) -> None:
    if cfg.export_every and step % cfg.export_every == 0:
        gio.export_step(domain, Path(cfg.out) / "vtk", step, cfg.export_m)


# -- commands ---------------------------------------------------------------------------------
def cmd_sweep(cfg: RunConfig, writer: Writer) -> int:
    spec = _annulus_spec(cfg)
    ref = build_annulus(spec, 0.0, slip=False).domain
    bnd = annulus_boundary(ref, spec.center)
    results = []
    for m in cfg.methods:
        log.info("sweep %s", m)
        r = max_rotation_sweep(m, cfg.sweep_step_deg, cfg.sweep_resolution_deg, cfg.sweep_limit_deg,
                               reference=ref, bnd=bnd, annulus=spec)
        results.append(r)
        writer.row("sweep", ["method", "theta_max_deg", "steps", "wall_ms"], r.csv_row())
    print(f"{'rank':>4}  {'method':<6} {'theta_max [deg]':>15}")
    for i, r in enumerate(sorted(results, key=lambda r: r.theta_max_deg), 1):
        print(f"{i:>4}  {r.method:<6} {r.theta_max_deg:>15.1f}")
    return EXIT_OK


def _run_annulus_sequence(cfg: RunConfig, writer: Writer, steps: int, operator=transfer):
    spec = _annulus_spec(cfg)
    prev, fld = None, None
    worst = 0.0
    for n in range(steps + 1):
        theta_deg = cfg.theta0_deg + n * cfg.dtheta_deg
        t0 = time.perf_counter()
        try:
            b = build_annulus(spec, math.radians(theta_deg), slip=cfg.slip)
        except ParameterizationError as e:
            raise ParameterizationError(f"theta = {theta_deg:g} deg: {e}", e.e_fold, e.min_det, e.patch,
                                        theta_deg) from e
        wall = 1e3 * (time.perf_counter() - t0)
        tim = TimingRecord(n)
        tim.build, tim.stage1, tim.stage2 = split_build(wall, b.records)
        t1 = time.perf_counter()
        if prev is None:
            fld = SplineField.constant(field_space(b.domain), cfg.u0)
            drift, div = 0.0, 0.0
        else:
            pair = SnapshotPair(prev, b.domain, cfg.dt)
            fld = operator(pair, fld)
            drift = field_drift(fld, cfg.u0)
            div = mesh_velocity_divergence(pair)
        tim.transfer = 1e3 * (time.perf_counter() - t1)
        worst = max(worst, drift)
        t2 = time.perf_counter()
        rep = min_scaled_jacobian(b.domain)
        writer.row("quality", QUALITY_HEADER, _quality_row(n, theta_deg, rep))
        writer.row("dgcl", ["step", "theta_deg", "drift", "mesh_velocity_divergence"],
                   [n, _fmt(theta_deg), _fmt(drift), _fmt(div)])
        _convergence_rows(writer, n, b.records)
        _maybe_export(cfg, b.domain, n)
        tim.report = 1e3 * (time.perf_counter() - t2)
        tim.total = 1e3 * (time.perf_counter() - t0)
        writer.row("timing", TimingRecord.HEADER, tim.row())
        log.info("step %d theta %.2f jmin %.4f drift %.2e", n, theta_deg, rep.jmin, drift)
        prev = b.domain
    return worst


def cmd_slip_run(cfg: RunConfig, writer: Writer) -> int:
    _run_annulus_sequence(cfg, writer, cfg.steps)
    return EXIT_OK


def cmd_dgcl(cfg: RunConfig, writer: Writer) -> int:
    op = area_scaled_copy if cfg.negative_control else transfer
    worst = _run_annulus_sequence(cfg, writer, cfg.steps, op)
    ok = worst < DGCL_TOL
    print(f"max drift {worst:.3e} ({'PASS' if ok else 'FAIL'} at {DGCL_TOL:g}"
          f"{', negative control' if cfg.negative_control else ''})")
    return EXIT_OK if ok else EXIT_CHECK


def cmd_flap(cfg: RunConfig, writer: Writer) -> int:
    case = flap_preset(cfg.amplitude, cfg.omega, elevate=cfg.elevate, refine=cfg.refine, barrier=cfg.barrier_config())
    for n in range(cfg.flap_steps + 1):
        t = n * case.period / cfg.flap_steps
        t0 = time.perf_counter()
        dom, records = build_open_domain(case.spec, case.inner_at(t), t=t)
        wall = 1e3 * (time.perf_counter() - t0)
        tim = TimingRecord(n)
        tim.build, tim.stage1, tim.stage2 = split_build(wall, records)
        t2 = time.perf_counter()
        rep = min_scaled_jacobian(dom)
        writer.row("quality", ["step", "t"] + QUALITY_HEADER[2:], _quality_row(n, t, rep))
        _convergence_rows(writer, n, records)
        _maybe_export(cfg, dom, n)
        tim.report = 1e3 * (time.perf_counter() - t2)
        tim.total = 1e3 * (time.perf_counter() - t0)
        writer.row("timing", TimingRecord.HEADER, tim.row())
        log.info("step %d t %.3f jmin %.4f", n, t, rep.jmin)
    return EXIT_OK


def cmd_export(cfg: RunConfig, writer: Writer) -> int:
    out = Path(cfg.out) / "vtk"
    if cfg.preset == "flap":
        case = flap_preset(cfg.amplitude, cfg.omega, elevate=cfg.elevate, refine=cfg.refine,
                           barrier=cfg.barrier_config())
        for n in range(cfg.steps):
            t = n * cfg.dt
            gio.export_step(build_open_domain(case.spec, case.inner_at(t), t=t)[0], out, n, cfg.export_m)
    else:
        spec = _annulus_spec(cfg)
        for n in range(cfg.steps):
            theta = math.radians(cfg.theta0_deg + n * cfg.dtheta_deg)
            gio.export_step(build_annulus(spec, theta, slip=cfg.slip).domain, out, n, cfg.export_m)
    print(f"wrote {cfg.steps} step(s) to {out}")
    return EXIT_OK


COMMANDS = {"sweep": cmd_sweep, "slip-run": cmd_slip_run, "dgcl": cmd_dgcl, "flap": cmd_flap, "export": cmd_export}
COMMAND_DEFAULTS = {"dgcl": {"steps": 100}, "export": {"steps": 1}, "flap": {"preset": "flap"}}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="splinemove", description=__doc__)
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", help="JSON file with RunConfig fields")
    ap.add_argument("--out", help="output directory")
    ap.add_argument("--steps", type=int)
    ap.add_argument("--dtheta-deg", type=float, dest="dtheta_deg")
    ap.add_argument("--theta0-deg", type=float, dest="theta0_deg")
    ap.add_argument("--no-slip", action="store_true")
    ap.add_argument("--method", action="append", help="sweep method (repeatable or comma separated)")
    ap.add_argument("--refine", type=int)
    ap.add_argument("--degree", type=int)
    ap.add_argument("--export-every", type=int, dest="export_every")
    ap.add_argument("--preset", choices=PRESETS)
    ap.add_argument("--negative-control", action="store_true")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    return ap


def resolve_config(args) -> RunConfig:
    data = dict(COMMAND_DEFAULTS.get(args.command, {}))
    if args.config:
        with open(args.config) as f:
            loaded = json.load(f)
        if not isinstance(loaded, dict):
            raise ArgumentError("config file must hold a JSON object")
        data.update(loaded)
    known = {f.name for f in fields(RunConfig)}
    bad = set(data) - known
    if bad:
        raise ArgumentError(f"unknown config key(s): {', '.join(sorted(bad))}")
    for name in ("out", "steps", "dtheta_deg", "theta0_deg", "refine", "degree", "export_every", "preset"):
        v = getattr(args, name)
        if v is not None:
            data[name] = v
    if args.no_slip:
        data["slip"] = False
    if args.negative_control:
        data["negative_control"] = True
    if args.method is not None:
        data["methods"] = [m.strip() for a in args.method for m in a.split(",") if m.strip()]
    return RunConfig(**data).validate()


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(message)s")
    try:
        cfg = resolve_config(args)
    except (ArgumentError, OSError, TypeError, ValueError) as e:
        print(f"splinemove: usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(json.dumps(asdict(cfg), indent=2, sort_keys=True) + "\n")
    writer = Writer(out)
    try:
        return COMMANDS[args.command](cfg, writer)
    except ParameterizationError as e:
        print(f"splinemove: parameterization failure: {e}", file=sys.stderr)
        return EXIT_PARAM
    except SolverError as e:
        print(f"splinemove: solver failure: {e}", file=sys.stderr)
        return EXIT_SOLVER
    except ArgumentError as e:
        print(f"splinemove: usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except SplineMoveError as e:
        print(f"splinemove: parameterization failure: {e}", file=sys.stderr)
        return EXIT_PARAM
    finally:
        writer.close()


if __name__ == "__main__":
    sys.exit(main())
