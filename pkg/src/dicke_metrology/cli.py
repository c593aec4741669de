"""Command-line front end: scans, reports and maps as CSV/JSON.

Exit codes: 0 success, 1 computational error, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import __version__
from .errors import DickeMetrologyError
from .expdata import (
    GAUSSIAN_BETA,
    UNDEFINED_DEPTH,
    BootstrapConfig,
    RegionMapSpec,
    experimental_bound,
    bootstrap_gain,
    gain_lower_bound,
    read_measured_moments,
    region_map,
    variance_curve,
)
from .metrology import (
    depth_caveat,
    depth_from_gain,
    ideal_dicke_moments,
    moments_of,
    optimal_variance,
    qfi,
)
from .spinops import Axis, SpinSystem, build_collective
from .states import (
    SqueezingParams,
    ThermalDickeParams,
    dicke,
    squeezed_ground_state,
    thermal_dicke,
)

# Above this N the ideal-Dicke report uses closed-form moments instead of dense matrices.
NUMERIC_DICKE_MAX_N = 500


@dataclass(frozen=True)
class ScanSpec:
    parameter: str
    start: float
    stop: float
    count: int
    scale: str = "log"
    n_particles: int | None = None

    def __post_init__(self):
        if self.parameter not in ("lambda", "temperature", "theta", "jx2_over_jmax2", "jz2"):
            raise ValueError(f"unknown scan parameter {self.parameter!r}")
        if self.count < 2:
            raise ValueError("grid count must be >= 2")
        if not self.start < self.stop:
            raise ValueError("grid min must be < max")
        if self.scale not in ("linear", "log"):
            raise ValueError("grid scale must be 'linear' or 'log'")
        if self.scale == "log" and self.start <= 0:
            raise ValueError("log grid requires min > 0")

    def values(self) -> np.ndarray:
        if self.scale == "log":
            return np.geomspace(self.start, self.stop, self.count)
        return np.linspace(self.start, self.stop, self.count)


def parse_grid(text: str, parameter: str, default_scale: str = "log") -> ScanSpec:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) not in (3, 4):
        raise ValueError(f"grid must be 'min,max,count[,scale]', got {text!r}")
    try:
        start, stop = float(parts[0]), float(parts[1])
        count = int(parts[2])
    except ValueError:
        raise ValueError(f"grid must be 'min,max,count[,scale]', got {text!r}") from None
    scale = parts[3] if len(parts) == 4 else default_scale
    return ScanSpec(parameter, start, stop, count, scale)


def _metadata(command: str, args: argparse.Namespace, **extra) -> dict:
    meta = {"tool": "dicke-metrology", "version": __version__, "command": command}
    for key, value in sorted(vars(args).items()):
        if key in ("func", "command", "grid_param") or key.endswith("_spec") or callable(value):
            continue
        meta[key] = value
    meta.update(extra)
    return meta


def _json_safe(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    if isinstance(value, np.generic):
        return _json_safe(value.item())
    return value


def _emit(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _emit_json(report: dict, out: str | None) -> None:
    _emit(json.dumps(_json_safe(report), indent=2) + "\n", out)


def _csv_text(meta: dict, header: list[str], rows) -> str:
    buf = io.StringIO()
    for key, value in meta.items():
        buf.write(f"# {key}: {value}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(["" if v is None else _fmt(v) for v in row])
    return buf.getvalue()


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return "nan" if math.isnan(v) else repr(float(v))
    return str(v)


def cmd_ideal_dicke(args: argparse.Namespace) -> int:
    n = args.n
    closed = ideal_dicke_moments(n)
    if n <= NUMERIC_DICKE_MAX_N:
        state = dicke(n)
        moments = moments_of(state)
        qfi_value = qfi(state, build_collective(state.system, Axis.Y))
        source = "numeric"
    else:
        moments = closed
        qfi_value = n * (n + 2) / 2
        source = "closed-form"
    result = optimal_variance(moments)
    report = {
        "metadata": _metadata("ideal-dicke", args, moments_source=source),
        "moments": {k: getattr(moments, k) for k in
                    ("jx2", "jy2", "jz2", "jx4", "jz4", "jz_jx2_jz")},
        "closed_form": {
            "jx2": closed.jx2, "jx4": closed.jx4, "var_opt": 2 / (n * (n + 2)),
            "qfi": n * (n + 2) / 2,
        },
        **result.as_dict(),
        "qfi": qfi_value,
    }
    _emit_json(report, args.out)
    return 0


def _scan(args, spec: ScanSpec, label: str, make_state: Callable) -> int:
    n = args.n
    system = SpinSystem(n)
    jy = build_collective(system, Axis.Y)
    rows = []
    for value in spec.values():
        try:
            state = make_state(float(value))
            res = optimal_variance(moments_of(state))
            f_q = qfi(state, jy)
            rows.append([value, res.inv_var_opt, f_q, res.inv_var_opt / n, f_q / n,
                         res.theta_opt, ""])
        except DickeMetrologyError as exc:
            rows.append([value, math.nan, math.nan, math.nan, math.nan, math.nan,
                         f"{type(exc).__name__}: {exc}"])
    meta = _metadata(args.command, args, grid_values=f"{spec.start},{spec.stop},{spec.count},{spec.scale}")
    header = [label, "inv_var_opt", "qfi", "inv_var_opt_over_n", "qfi_over_n", "theta_opt", "error"]
    _emit(_csv_text(meta, header, rows), args.out)
    return 0


def cmd_scan_squeezing(args: argparse.Namespace) -> int:
    spec = args.grid_spec
    return _scan(args, spec, "lambda",
                 lambda lam: squeezed_ground_state(SqueezingParams(args.n, lam)))


def cmd_scan_thermal(args: argparse.Namespace) -> int:
    spec = args.grid_spec
    return _scan(args, spec, "temperature",
                 lambda t: thermal_dicke(ThermalDickeParams(args.n, t)))


def cmd_sensitivity_curve(args: argparse.Namespace) -> int:
    m = read_measured_moments(args.moments_file)
    thetas = args.grid_spec.values()
    var = variance_curve(m, thetas)
    rows = []
    for t, v in zip(thetas, var):
        if np.isnan(v):
            rows.append([t, None, "singular"])
        else:
            rows.append([t, 1.0 / (v * m.n_particles), "curve"])
    best = experimental_bound(m)
    rows.append([best.theta_opt, best.gain, "theta_opt"])
    rows.append([None, 1.0, "shot_noise"])
    meta = _metadata("sensitivity-curve", args, n_particles=m.n_particles,
                     substitutions="jy2=jx2; jz_jx2_jz=Z bound")
    _emit(_csv_text(meta, ["theta", "inv_var_over_n", "kind"], rows), args.out)
    return 0


def cmd_exp_bound(args: argparse.Namespace) -> int:
    m = read_measured_moments(args.moments_file)
    central = experimental_bound(m)
    boot = bootstrap_gain(m, BootstrapConfig(n_resamples=args.resamples, seed=args.seed))
    second_only = float(gain_lower_bound(m.jx2, m.jz2, m.n_particles, args.beta))
    report = {
        "metadata": _metadata("exp-bound", args, n_particles=m.n_particles,
                              bootstrap_model="independent-gaussian, clipped at 0"),
        "central": central.as_dict(),
        "bootstrap": boot.as_dict(),
        "depth_from_bootstrap_mean": depth_from_gain(boot.mean_gain, m.n_particles, warn=False),
        "depth_caveat": depth_caveat(central.depth_certified, m.n_particles),
        "second_moments_only": {
            "gain": second_only,
            "label": "Gaussian-assumed",
            "beta": args.beta,
        },
    }
    _emit_json(report, args.out)
    return 0


def cmd_region_map(args: argparse.Namespace) -> int:
    spec = args.region_spec
    rmap = region_map(spec)
    extra = {"jmax2": spec.jmax2, "label": "Gaussian-assumed"}
    if args.point is not None:
        jx2, jz2 = args.point
        g = float(gain_lower_bound(jx2, jz2, args.n, args.beta))
        extra["point_gain"] = g
        extra["point_depth"] = depth_from_gain(g, args.n, warn=False) if math.isfinite(g) else "undefined"
    meta = _metadata("region-map", args, **extra)
    rows = [(f, z, g, "undefined" if d == UNDEFINED_DEPTH else d) for f, z, g, d in rmap.rows()]
    _emit(_csv_text(meta, ["jx2_over_jmax2", "jz2", "gain", "depth"], rows), args.out)
    if args.cross_section is not None:
        jz2, gain, depth = rmap.cross_section(args.cross_section)
        rows = [(args.cross_section, z, g, "undefined" if d == UNDEFINED_DEPTH else d)
                for z, g, d in zip(jz2, gain, depth)]
        text = _csv_text(meta, ["jx2_over_jmax2", "jz2", "gain", "depth"], rows)
        _emit(text, args.cross_out)
    return 0


def _point(text: str) -> tuple[float, float]:
    try:
        a, b = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("expected 'jx2,jz2'") from None
    return a, b


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dicke-metrology",
        description="Metrological usefulness of noisy Dicke states from collective-spin moments.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, n_default=None, grid_default=None):
        p.add_argument("--n", type=int, default=n_default, required=n_default is None,
                       help="particle number N")
        p.add_argument("--out", default=None, help="output path (default stdout)")
        if grid_default is not None:
            p.add_argument("--grid", default=grid_default, help="min,max,count[,linear|log]")
        return p

    p = common(sub.add_parser("ideal-dicke", help="report for the ideal Dicke state |D_N>"))
    p.set_defaults(func=cmd_ideal_dicke)

    p = common(sub.add_parser("scan-squeezing", help="scan squeezed ground states over lambda"),
               n_default=100, grid_default="1e-3,1e3,61,log")
    p.set_defaults(func=cmd_scan_squeezing, grid_param="lambda")

    p = common(sub.add_parser("scan-thermal", help="scan thermal Dicke states over T"),
               n_default=100, grid_default="0.01,100,61,log")
    p.set_defaults(func=cmd_scan_thermal, grid_param="temperature")

    p = sub.add_parser("sensitivity-curve", help="gain versus theta from a moments file")
    p.add_argument("moments_file")
    p.add_argument("--out", default=None)
    p.add_argument("--grid", default=f"1e-4,{math.pi / 2 - 1e-4!r},400,log",
                   help="theta grid min,max,count[,scale]")
    p.set_defaults(func=cmd_sensitivity_curve, grid_param="theta")

    p = sub.add_parser("exp-bound", help="central and bootstrapped bound from a moments file")
    p.add_argument("moments_file")
    p.add_argument("--out", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--resamples", type=int, default=10_000)
    p.add_argument("--beta", type=float, default=GAUSSIAN_BETA,
                   help="<J_z^4>/<J_z^2>^2 for the second-moments-only estimate")
    p.set_defaults(func=cmd_exp_bound)

    p = common(sub.add_parser("region-map", help="gain lower bound over (<J_x^2>, <J_z^2>)"),
               n_default=7900, grid_default="0.005,1,200,linear")
    p.add_argument("--jz2-grid", default="0,400,81,linear", help="<J_z^2> grid")
    p.add_argument("--beta", type=float, default=GAUSSIAN_BETA)
    p.add_argument("--point", type=_point, default=None, help="evaluate 'jx2,jz2' too")
    p.add_argument("--cross-section", type=float, default=None,
                   help="<J_x^2>/J_max^2 for a cross-section CSV")
    p.add_argument("--cross-out", default=None, help="cross-section output path")
    p.set_defaults(func=cmd_region_map, grid_param="jx2_over_jmax2")
    return parser


def _validate(parser: argparse.ArgumentParser, args: argparse.Namespace) -> None:
    if getattr(args, "n", None) is not None and args.n < 1:
        parser.error("--n must be positive")
    if args.command in ("ideal-dicke", "scan-thermal") and args.n % 2:
        parser.error(f"{args.command} needs an even --n (got {args.n})")
    if args.command == "exp-bound":
        if args.resamples < 100:
            parser.error("--resamples must be at least 100")
        if not args.beta > 0:
            parser.error("--beta must be positive")
    if hasattr(args, "grid"):
        default_scale = "linear" if args.command == "region-map" else "log"
        try:
            args.grid_spec = parse_grid(args.grid, args.grid_param, default_scale)
            if args.command == "region-map":
                args.jz2_grid_spec = parse_grid(args.jz2_grid, "jz2", "linear")
                args.region_spec = RegionMapSpec(args.n, args.grid_spec.values(),
                                                 args.jz2_grid_spec.values(), args.beta)
        except ValueError as exc:
            parser.error(str(exc))


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _validate(parser, args)
    try:
        return args.func(args)
    except (DickeMetrologyError, OSError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
