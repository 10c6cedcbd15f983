"""Command-line driver: ``tripartite <command> [options]``.

Every command accepts ``--config FILE`` (a JSON object whose keys are the
long option names without dashes, e.g. ``{"g1_sq": 2e6, "eta": 0.28}``);
explicit flags override file values.  CSV floats are printed with 17
significant digits.  On failure a single JSON error line is written to
stderr and the exit status is 1.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .core import CouplingConfig, ModeMeans, mode_means
from .detection import DetectionConfig, detected_correlation, noise_reduction
from .errors import ConfigError, TripartiteError
from .estimators import estimate_statistics
from .fitting import PARAMETERS, FitSpec, fit_pump_scan, read_scan
from .sampling import (
    CoherenceMismatch, NoiseModel, read_shotset, sample_dark_run, sample_run, write_shotset,
)
from .scan import ScanConfig, format_rows, run_scan
from .statistics import joint_pmf, marginal_pmf

DEFAULTS = {
    "g1_sq": 1.0, "g2_sq": 2.0, "z": 1.0,
    "eta": None, "eta1": 1.0, "eta2": 1.0, "eta3": 1.0,
    "mu": 1, "sigma_el": [0.0], "spurious": [0.0], "collect": [1.0],
    "shots": 50_000, "seed": 0, "out": None, "workers": 1,
}


def _f(x: float) -> str:
    return f"{float(x):.17g}"


def _common(p: argparse.ArgumentParser, couplings_nargs=None) -> None:
    g = p.add_argument_group("model")
    g.add_argument("--config", help="JSON file with option values")
    g.add_argument("--g1-sq", type=float, nargs=couplings_nargs, help="squared downconversion coupling")
    g.add_argument("--g2-sq", type=float, nargs=couplings_nargs, help="squared upconversion coupling")
    g.add_argument("--z", type=float, help="interaction length")
    g.add_argument("--means", help="N2,N3 mode means instead of couplings")
    g.add_argument("--eta", type=float, help="uniform quantum efficiency")
    g.add_argument("--eta1", type=float)
    g.add_argument("--eta2", type=float)
    g.add_argument("--eta3", type=float)
    g.add_argument("--mu", type=int, help="temporal modes per shot")
    g.add_argument("--sigma-el", type=float, nargs="+", help="electronic noise std, 1 or 3 values")
    g.add_argument("--spurious", type=float, nargs="+", help="spurious thermal photons per mode")
    g.add_argument("--collect", type=float, nargs="+", help="collection fraction per arm")
    g.add_argument("--shots", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--workers", type=int)
    g.add_argument("--out", help="output path (default: stdout)")


def _resolve(args: argparse.Namespace) -> dict:
    opts = dict(DEFAULTS)
    if getattr(args, "config", None):
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        opts.update({k.replace("-", "_"): v for k, v in data.items()})
    for k, v in vars(args).items():
        if v is not None and k not in ("command", "func", "config"):
            opts[k] = v
    return opts


def _detection(o: dict) -> DetectionConfig:
    if o.get("eta") is not None:
        return DetectionConfig.uniform(o["eta"])
    return DetectionConfig(o["eta1"], o["eta2"], o["eta3"])


def _noise(o: dict) -> NoiseModel:
    def triple(v):
        v = v if isinstance(v, (list, tuple)) else [v]
        if len(v) == 1:
            return tuple(v) * 3
        if len(v) != 3:
            raise ConfigError("per-arm options take one or three values")
        return tuple(v)

    return NoiseModel(o["mu"], triple(o["sigma_el"]), triple(o["spurious"]), triple(o["collect"]))


def _scalar(v):
    if isinstance(v, (list, tuple)):
        if len(v) != 1:
            raise ConfigError("expected a single value")
        return v[0]
    return v


def _means(o: dict):
    if o.get("means"):
        parts = [float(s) for s in str(o["means"]).split(",")]
        if len(parts) != 2:
            raise ConfigError("--means takes N2,N3")
        return ModeMeans.from_pair(*parts), None
    c = CouplingConfig(_scalar(o["g1_sq"]), _scalar(o["g2_sq"]), o["z"])
    return mode_means(c), c


def _emit(text: str, out) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_dynamics(args) -> None:
    o = _resolve(args)
    grid = np.linspace(args.start, args.stop, args.num)
    d = _detection(o)
    lines = [f"{args.vary},n1,n2,n3,regime,eps_1_23_detected,R_1_23"]
    for v in grid:
        vals = {"g1_sq": _scalar(o["g1_sq"]), "g2_sq": _scalar(o["g2_sq"]), "z": o["z"], args.vary: v}
        c = CouplingConfig(**vals)
        m = mode_means(c)
        try:
            eps = _f(detected_correlation(m, d, "1,2+3"))
            r = _f(noise_reduction(m, d, "1,2+3"))
        except TripartiteError:
            eps = r = ""
        lines.append(f"{_f(v)},{_f(m.n1)},{_f(m.n2)},{_f(m.n3)},{c.regime.value},{eps},{r}")
    _emit("\n".join(lines) + "\n", o["out"])


def cmd_pmf(args) -> None:
    o = _resolve(args)
    m, _ = _means(o)
    if args.mode is not None:
        lines = ["n,probability"]
        lines += [f"{n},{_f(marginal_pmf(m, args.mode, n))}" for n in range(args.max_n + 1)]
    elif args.n is not None:
        lines = ["n,p,r,probability", f"{args.n},{args.p},{args.r},{_f(joint_pmf(m, args.n, args.p, args.r))}"]
    else:
        lines = ["n,p,r,probability"]
        for n in range(args.max_n + 1):
            for p in range(n + 1):
                lines.append(f"{n},{p},{n - p},{_f(joint_pmf(m, n, p, n - p))}")
    _emit("\n".join(lines) + "\n", o["out"])


def _write_or_print(s, out) -> None:
    if out:
        write_shotset(s, out)
    else:
        sys.stdout.write("shot,m1,m2,m3\n")
        for i, (a, b, c) in enumerate(s.records):
            sys.stdout.write(f"{i},{_f(a)},{_f(b)},{_f(c)}\n")


def cmd_sample(args) -> None:
    o = _resolve(args)
    m, c = _means(o)
    s = sample_run(m, _detection(o), _noise(o), o["shots"], o["seed"], o["workers"], coupling=c)
    _write_or_print(s, o["out"])


def cmd_dark(args) -> None:
    o = _resolve(args)
    s = sample_dark_run(_detection(o), _noise(o), o["shots"], o["seed"], o["workers"])
    _write_or_print(s, o["out"])


def cmd_estimate(args) -> None:
    o = _resolve(args)
    s = read_shotset(args.input)
    dark = read_shotset(args.dark) if args.dark else None
    rep = estimate_statistics(s, dark, seed=o["seed"])
    if args.csv_row:
        text = rep.csv_header() + "\n" + rep.csv_row() + "\n"
    else:
        text = rep.to_json() + "\n"
    _emit(text, o["out"])


def cmd_scan(args) -> None:
    o = _resolve(args)
    g1 = o["g1_sq"] if isinstance(o["g1_sq"], (list, tuple)) else [o["g1_sq"]]
    g2 = o["g2_sq"] if isinstance(o["g2_sq"], (list, tuple)) else [o["g2_sq"]]
    mismatch = None
    if o.get("match_g1_sq") is not None:
        exponent = o.get("collect_exponent")
        scale = o.get("spurious_scale")
        mismatch = CoherenceMismatch(
            o["match_g1_sq"], 1.0 if exponent is None else exponent, 0.0 if scale is None else scale
        )
    cfg = ScanConfig(
        g1, g2, o["z"], _detection(o), _noise(o), o["shots"], o["seed"], None, mismatch, o["workers"]
    )
    _emit(format_rows(run_scan(cfg)), o["out"])


def cmd_fit(args) -> None:
    o = _resolve(args)
    data = read_scan(args.input, args.axis, args.z)
    initial = {}
    for p in PARAMETERS:
        v = o.get("init_" + p)
        initial[p] = v if v is not None else {"coupling": 1.0, "eta1": 0.3, "eta_sum": 0.3, "mu_scale": 1.0}[p]
    free = tuple(s.strip() for s in args.free.split(",") if s.strip())
    spec = FitSpec(free=free, initial=initial)
    res = fit_pump_scan(data, spec, n_bootstrap=args.bootstrap, seed=o["seed"])
    _emit(res.to_json() + "\n", o["out"])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tripartite", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dynamics", help="mode means along z or a coupling")
    _common(p)
    p.add_argument("--vary", choices=("z", "g1_sq", "g2_sq"), default="z")
    p.add_argument("--start", type=float, default=0.0)
    p.add_argument("--stop", type=float, required=True)
    p.add_argument("--num", type=int, default=50)
    p.set_defaults(func=cmd_dynamics)

    p = sub.add_parser("pmf", help="joint or marginal photon-number probabilities")
    _common(p)
    p.add_argument("--mode", type=int, choices=(1, 2, 3), help="print the marginal of this mode")
    p.add_argument("--n", type=int)
    p.add_argument("--p", type=int, default=0)
    p.add_argument("--r", type=int, default=0)
    p.add_argument("--max-n", type=int, default=10)
    p.set_defaults(func=cmd_pmf)

    p = sub.add_parser("sample", help="simulate a run of shots")
    _common(p)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("dark", help="simulate a dark (no light) run")
    _common(p)
    p.set_defaults(func=cmd_dark)

    p = sub.add_parser("estimate", help="estimate statistics of a shot CSV")
    _common(p)
    p.add_argument("--input", required=True)
    p.add_argument("--dark")
    p.add_argument("--csv-row", action="store_true", help="emit a one-line CSV row instead of JSON")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("scan", help="sweep couplings with Monte Carlo estimation")
    _common(p, couplings_nargs="+")
    p.add_argument("--match-g1-sq", type=float, help="enable the coherence-mismatch model")
    p.add_argument("--collect-exponent", type=float)
    p.add_argument("--spurious-scale", type=float)
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("fit", help="fit a pump scan CSV")
    _common(p)
    p.add_argument("--input", required=True)
    p.add_argument("--axis", choices=("g1_sq", "g2_sq"))
    p.add_argument("--free", default="coupling,eta1,eta_sum")
    for name in PARAMETERS:
        p.add_argument(f"--init-{name.replace('_', '-')}", dest=f"init_{name}", type=float)
    p.add_argument("--bootstrap", type=int, default=0, help="residual-bootstrap resamples")
    p.set_defaults(func=cmd_fit)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except (TripartiteError, OSError, ValueError) as exc:
        line = {"error": type(exc).__name__, "message": str(exc)}
        sys.stderr.write(json.dumps(line) + "\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
