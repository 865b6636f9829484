"""Command line front end: ``localcap capacity|sweep|trace``.

Exit codes: 0 success, 2 invalid input, 3 simulation failure (too many
failed traces, or a contour that would not close), 130 interrupted.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .aloha import capacity_aloha
from .capacity import (
    RESULT_FIELDS,
    CapacityEstimate,
    code_version,
    estimate_capacity,
    result_row,
)
from .exceptions import FailureRateExceeded, LocalCapacityError
from .geometry import ChannelParams, Region, TransmitterSet
from .point_processes import ProcessSpec
from .reception import TraceConfig, trace_contour, write_contour
from .svgplot import line_chart

DEFAULT_D = 25.0
DEFAULT_REGION = 2000.0
FULL_REGION = 10000.0
FULL_SAMPLES = 10000
#: CSMA exclusion radius implied by theta = 1e-5 at alpha = 4.
DEFAULT_CSMA_R0 = 1e-5 ** -0.25

SCHEMES = {
    "grid:square": "square", "grid:sq": "square",
    "grid:hex": "hexagonal", "grid:hexagonal": "hexagonal",
    "grid:tri": "triangular", "grid:triangular": "triangular",
    "aloha": None, "aloha-mc": None, "coloring": None, "csma": None,
}
CANONICAL = {"square": "grid:square", "hexagonal": "grid:hex", "triangular": "grid:tri"}


class UsageError(ValueError):
    pass


def csma_theta(alpha: float) -> float:
    """Default carrier-sense threshold: keeps the exclusion radius of theta=1e-5 at alpha=4."""
    return DEFAULT_CSMA_R0 ** -alpha


def canonical_scheme(name: str) -> str:
    key = name.strip().lower()
    if key not in SCHEMES:
        raise UsageError(f"unknown scheme {name!r}; choose from {', '.join(sorted(SCHEMES))}")
    lat = SCHEMES[key]
    return CANONICAL[lat] if lat else key


@dataclass
class Job:
    """One fully resolved capacity run."""

    scheme: str
    beta: float
    alpha: float
    d: float = DEFAULT_D
    theta: float | None = None
    region: float | None = None
    samples: int | None = None
    seed: int = 0
    dt: float | None = None
    full_scale: bool = False
    selection: str = "central"

    def __post_init__(self):
        self.scheme = canonical_scheme(self.scheme)
        ChannelParams(self.beta, self.alpha)
        if not self.d > 0:
            raise UsageError("--d must be > 0")
        if self.theta is not None and not self.theta > 0:
            raise UsageError("--theta must be > 0")
        if self.region is not None and not self.region > 0:
            raise UsageError("--region must be > 0")
        if self.samples is not None and self.samples < 1:
            raise UsageError("--samples must be >= 1")
        if self.dt is not None and not self.dt > 0:
            raise UsageError("--dt must be > 0")

    @property
    def channel(self) -> ChannelParams:
        return ChannelParams(self.beta, self.alpha)

    @property
    def effective_theta(self) -> float:
        return self.theta if self.theta is not None else csma_theta(self.alpha)

    def length_scale(self) -> float:
        if self.scheme == "csma":
            return self.effective_theta ** (-1.0 / self.alpha) / DEFAULT_CSMA_R0
        return self.d / DEFAULT_D

    def region_obj(self) -> Region:
        side = self.region
        if side is None:
            side = (FULL_REGION if self.full_scale else DEFAULT_REGION) * self.length_scale()
        return Region.square(side)

    def n_samples(self) -> int:
        if self.samples is not None:
            return self.samples
        if self.full_scale:
            return FULL_SAMPLES
        return 1 if self.scheme.startswith("grid:") else 1000

    def spec(self) -> ProcessSpec:
        r = self.region_obj()
        if self.scheme.startswith("grid:"):
            return ProcessSpec.grid(SCHEMES[self.scheme], self.d, r, seed=self.seed)
        if self.scheme == "aloha-mc":
            return ProcessSpec.poisson(1.0 / self.d ** 2, r, seed=self.seed)
        if self.scheme == "coloring":
            return ProcessSpec.coloring(self.d, r, seed=self.seed)
        if self.scheme == "csma":
            return ProcessSpec.csma(self.effective_theta, r, seed=self.seed)
        raise UsageError(f"{self.scheme} has no process to simulate")

    def parameter(self) -> float | None:
        if self.scheme == "aloha":
            return None
        return self.effective_theta if self.scheme == "csma" else self.d

    def run(self) -> CapacityEstimate:
        if self.scheme == "aloha":
            c = capacity_aloha(self.beta, self.alpha)
            return CapacityEstimate("aloha", None, self.channel, math.nan, math.nan, c, 0.0,
                                    1, 0, self.seed)
        est = estimate_capacity(self.spec(), self.channel, self.n_samples(),
                                TraceConfig(dt=self.dt), selection=self.selection)
        return est

    def row(self, est: CapacityEstimate, version: str) -> dict:
        r = result_row(est, version)
        r["scheme"] = self.scheme
        if self.scheme == "aloha":
            r["lambda"] = r["sigma"] = ""
        return r


# --------------------------------------------------------------------------
# argument parsing


def _beta_from(args) -> float | None:
    if args.beta is not None and args.beta_db is not None:
        raise UsageError("give either --beta or --beta-db, not both")
    if args.beta_db is not None:
        return 10.0 ** (args.beta_db / 10.0)
    return args.beta


def _common(p: argparse.ArgumentParser, *, required: bool):
    p.add_argument("--beta", type=float, help="SIR threshold, linear")
    p.add_argument("--beta-db", type=float, help="SIR threshold in dB")
    p.add_argument("--alpha", type=float, required=required, help="attenuation exponent (> 2)")
    p.add_argument("--d", type=float, help="spacing / exclusion distance in meters (default 25)")
    p.add_argument("--theta", type=float, help="CSMA carrier-sense threshold")
    p.add_argument("--dt", type=float, help="tracing step in meters")
    p.add_argument("--samples", type=int, help="Monte Carlo samples")
    p.add_argument("--seed", type=int, help="base seed")
    p.add_argument("--region", type=float, help="side of the square map in meters")
    p.add_argument("--full-scale", action="store_true", default=None,
                   help="10000 m map and 10000 samples")
    p.add_argument("--selection", choices=["central", "nearest"],
                   help="which transmitter to trace in each sample")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="localcap", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"localcap {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    c = sub.add_parser("capacity", help="estimate one capacity value")
    c.add_argument("--scheme", required=True)
    _common(c, required=True)
    c.add_argument("--out", help="results CSV to write")

    s = sub.add_parser("sweep", help="beta and alpha sweeps over several schemes")
    s.add_argument("--config", help="key=value config file (a results CSV header also works)")
    s.add_argument("--schemes", help="comma separated scheme list")
    s.add_argument("--beta-values", help="comma separated linear thresholds")
    s.add_argument("--alpha-values", help="comma separated exponents")
    s.add_argument("--fixed-beta", type=float)
    s.add_argument("--fixed-alpha", type=float)
    _common(s, required=False)
    s.add_argument("--out", help="output prefix")
    s.add_argument("--svg", choices=["yes", "no"], help="also draw SVG charts")

    t = sub.add_parser("trace", help="export one reception contour")
    t.add_argument("--scheme", required=True, help="a scheme name or 'two' for two transmitters")
    _common(t, required=True)
    t.add_argument("--out", default="contour.csv")
    return ap


# --------------------------------------------------------------------------
# capacity


def cmd_capacity(args) -> int:
    beta = _beta_from(args)
    if beta is None:
        raise UsageError("--beta or --beta-db is required")
    job = Job(args.scheme, beta, args.alpha, d=args.d or DEFAULT_D, theta=args.theta,
              region=args.region, samples=args.samples, seed=args.seed or 0, dt=args.dt,
              full_scale=bool(args.full_scale), selection=args.selection or "central")
    est = job.run()
    row = job.row(est, code_version())
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=RESULT_FIELDS, lineterminator="\n")
    w.writeheader()
    w.writerow(row)
    sys.stdout.write(buf.getvalue())
    if est.failures:
        print(f"# {est.failures} of {est.samples} traces failed", file=sys.stderr)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(f"# localcap {__version__} capacity\n")
            fh.write(buf.getvalue())
    return 0


# --------------------------------------------------------------------------
# sweep

SWEEP_KEYS = ["schemes", "beta_values", "alpha_values", "fixed_beta", "fixed_alpha", "samples",
              "seed", "d", "theta", "region", "dt", "full_scale", "selection"]
SWEEP_DEFAULTS = {
    "schemes": "grid:tri,grid:square,grid:hex,aloha,coloring,csma",
    "beta_values": "1,2,5,10,20",
    "alpha_values": "3,4,5,6,8",
    "fixed_beta": "10",
    "fixed_alpha": "4",
    "samples": "100",
    "seed": "0",
    "d": "25",
    "theta": "",
    "region": "",
    "dt": "",
    "full_scale": "no",
    "selection": "central",
    "out": "sweep",
    "svg": "yes",
}


def read_config(path) -> dict:
    """Read a ``[sweep]`` section; lines may carry a leading ``# `` (CSV header echo)."""
    text = Path(path).read_text()
    lines = text.splitlines()
    if lines and lines[0].startswith("#"):
        kept = []
        for line in lines:
            if not line.startswith("#"):
                break
            kept.append(line[1:].strip())
        text = "\n".join(kept)
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise UsageError(f"bad config: {exc}") from None
    if not cp.has_section("sweep"):
        raise UsageError("config needs a [sweep] section")
    cfg = dict(cp["sweep"])
    unknown = set(cfg) - set(SWEEP_DEFAULTS)
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
    return cfg


def _floats(text, key):
    try:
        vals = [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"{key}: expected comma separated numbers") from None
    if not vals:
        raise UsageError(f"{key}: empty list")
    return vals


def _opt_float(text):
    text = str(text).strip()
    return float(text) if text else None


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "yes" if v else "no"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return ",".join(_fmt(x) for x in v)
    return str(v)


@dataclass
class SweepSpec:
    schemes: list
    beta_values: list
    alpha_values: list
    fixed_beta: float = 10.0
    fixed_alpha: float = 4.0
    samples: int = 100
    seed: int = 0
    d: float = DEFAULT_D
    theta: float | None = None
    region: float | None = None
    dt: float | None = None
    full_scale: bool = False
    selection: str = "central"
    out: str = "sweep"
    svg: bool = True
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (self.schemes and self.beta_values and self.alpha_values):
            raise UsageError("schemes, beta_values and alpha_values must be nonempty")
        self.schemes = [canonical_scheme(s) for s in self.schemes]
        for b in self.beta_values + [self.fixed_beta]:
            if not b > 0:
                raise UsageError("all beta values must be > 0")
        for a in self.alpha_values + [self.fixed_alpha]:
            if not a > 2:
                raise UsageError("all alpha values must be > 2")
        if self.samples < 1:
            raise UsageError("samples must be >= 1")

    @classmethod
    def from_mapping(cls, m: dict) -> "SweepSpec":
        try:
            return cls(
                schemes=[s.strip() for s in m["schemes"].split(",") if s.strip()],
                beta_values=_floats(m["beta_values"], "beta_values"),
                alpha_values=_floats(m["alpha_values"], "alpha_values"),
                fixed_beta=float(m["fixed_beta"]),
                fixed_alpha=float(m["fixed_alpha"]),
                samples=int(m["samples"]),
                seed=int(m["seed"]),
                d=float(m["d"]),
                theta=_opt_float(m["theta"]),
                region=_opt_float(m["region"]),
                dt=_opt_float(m["dt"]),
                full_scale=str(m["full_scale"]).strip().lower() in ("1", "yes", "true", "on"),
                selection=m["selection"].strip(),
                out=m["out"],
                svg=str(m["svg"]).strip().lower() in ("1", "yes", "true", "on"),
            )
        except (KeyError, ValueError) as exc:
            if isinstance(exc, UsageError):
                raise
            raise UsageError(f"bad sweep setting: {exc}") from None

    def echo(self) -> list[str]:
        """Config lines reproducing this sweep (output location excluded)."""
        lines = ["[sweep]"]
        for key in SWEEP_KEYS:
            lines.append(f"{key} = {_fmt(getattr(self, key))}")
        return lines

    def job(self, scheme, beta, alpha) -> Job:
        return Job(scheme, beta, alpha, d=self.d, theta=self.theta, region=self.region,
                   samples=self.samples, seed=self.seed, dt=self.dt,
                   full_scale=self.full_scale, selection=self.selection)


def _sweep_spec(args) -> SweepSpec:
    m = dict(SWEEP_DEFAULTS)
    if args.config:
        m.update(read_config(args.config))
    flag_map = {
        "schemes": args.schemes, "beta_values": args.beta_values,
        "alpha_values": args.alpha_values, "fixed_beta": args.fixed_beta,
        "fixed_alpha": args.fixed_alpha, "samples": args.samples, "seed": args.seed,
        "d": args.d, "theta": args.theta, "region": args.region, "dt": args.dt,
        "selection": args.selection, "out": args.out, "svg": args.svg,
    }
    for k, v in flag_map.items():
        if v is not None:
            m[k] = str(v)
    if args.full_scale:
        m["full_scale"] = "yes"
    if args.beta is not None or args.beta_db is not None:
        m["fixed_beta"] = str(_beta_from(args))
    if args.alpha is not None:
        m["fixed_alpha"] = str(args.alpha)
    return SweepSpec.from_mapping(m)


def _run_family(spec: SweepSpec, var: str, values, path: Path, version: str):
    """Run one sweep family, flushing each row as soon as it exists."""
    results = {}
    with open(path, "w", newline="") as fh:
        for line in spec.echo():
            fh.write(f"# {line}\n")
        fh.write(f"# ; family = {var}\n")
        w = csv.DictWriter(fh, fieldnames=RESULT_FIELDS, lineterminator="\n")
        w.writeheader()
        fh.flush()
        for v in values:
            beta = v if var == "beta" else spec.fixed_beta
            alpha = v if var == "alpha" else spec.fixed_alpha
            for scheme in spec.schemes:
                job = spec.job(scheme, beta, alpha)
                est = job.run()
                w.writerow(job.row(est, version))
                fh.flush()
                results[(scheme, v)] = est.capacity
    return results


def _write_scaled(spec, var, values, results, path: Path):
    with open(path, "w", newline="") as fh:
        for line in spec.echo():
            fh.write(f"# {line}\n")
        fh.write(f"# ; family = {var}, capacity divided by grid:tri\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([var] + spec.schemes)
        for v in values:
            ref = results[("grid:tri", v)]
            w.writerow([repr(float(v))] + [repr(results[(s, v)] / ref) for s in spec.schemes])


def _write_svg(spec, var, values, results, path: Path, scaled: bool):
    series = {}
    for s in spec.schemes:
        pts = []
        for v in values:
            c = results[(s, v)]
            if scaled:
                c /= results[("grid:tri", v)]
            pts.append((v, c))
        series[s] = pts
    ylabel = "capacity / triangular grid" if scaled else "capacity"
    path.write_text(line_chart(series, var, ylabel))


def cmd_sweep(args) -> int:
    spec = _sweep_spec(args)
    out = Path(spec.out)
    if out.parent and not out.parent.exists():
        out.parent.mkdir(parents=True)
    version = code_version()
    needs_tri = "grid:tri" not in spec.schemes
    if needs_tri:
        spec.schemes.append("grid:tri")
    families = [("beta", spec.beta_values), ("alpha", spec.alpha_values)]
    try:
        for var, values in families:
            res = _run_family(spec, var, values, Path(f"{out}_{var}.csv"), version)
            _write_scaled(spec, var, values, res, Path(f"{out}_scaled_{var}.csv"))
            if spec.svg:
                _write_svg(spec, var, values, res, Path(f"{out}_{var}.svg"), False)
                _write_svg(spec, var, values, res, Path(f"{out}_scaled_{var}.svg"), True)
    except KeyboardInterrupt:
        print("interrupted; partial results kept", file=sys.stderr)
        return 130
    return 0


# --------------------------------------------------------------------------
# trace


def cmd_trace(args) -> int:
    beta = _beta_from(args)
    if beta is None:
        raise UsageError("--beta or --beta-db is required")
    d = args.d or DEFAULT_D
    channel = ChannelParams(beta, args.alpha)
    config = TraceConfig(dt=args.dt)
    if args.scheme == "two":
        tset = TransmitterSet(np.array([[0.0, 0.0], [d, 0.0]]), Region.square(4 * d), "two")
        i = 0
    else:
        job = Job(args.scheme, beta, args.alpha, d=d, theta=args.theta, region=args.region,
                  seed=args.seed or 0, dt=args.dt)
        tset = job.spec().generate(0, alpha=args.alpha)
        i = tset.nearest_to((0.0, 0.0))
    contour = trace_contour(tset, i, channel, config)
    csv_path, json_path = write_contour(contour, args.out)
    print(f"area={contour.area!r} shoelace={contour.shoelace_area!r} steps={contour.steps} "
          f"-> {csv_path}, {json_path}")
    return 0


COMMANDS = {"capacity": cmd_capacity, "sweep": cmd_sweep, "trace": cmd_trace}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except FailureRateExceeded as exc:
        print(f"localcap: {exc}", file=sys.stderr)
        return 3
    except (UsageError, ValueError) as exc:
        print(f"localcap: error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 2
    except LocalCapacityError as exc:
        print(f"localcap: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
