"""Command line entry point ``bosonclt``.

Exit codes: 0 success, 1 invariant failure, 2 configuration error, 3 tail-budget abort.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from .convolve import CutoffPolicy, convolve, self_convolve
from .errors import BosonCLTError, ConfigError, TailBudgetExceeded
from .fisher import fisher_distance, kmb_fisher, sld_fisher
from .fock import DensityMatrix
from .gaussian import gaussify
from .lab import (
    ExperimentConfig,
    build_state,
    chi_rate_probe,
    fit_slope,
    records_csv,
    run_invariant_suite,
    run_sweep,
    write_svg,
)
from .metrics import hs_distance, relative_entropy, trace_distance
from .poincare import estimate_gap

EXIT_OK, EXIT_INVARIANT, EXIT_CONFIG, EXIT_TAIL = 0, 1, 2, 3


def _jsonable(x):
    if isinstance(x, float) and not math.isfinite(x):
        return "inf" if x > 0 else ("-inf" if x < 0 else "nan")
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.generic):
        return _jsonable(x.item())
    return x


def _emit(obj, out: str | None) -> None:
    text = json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _read_json(path: str):
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc


def _load_state(path: str) -> DensityMatrix:
    """A state file is either a serialized density matrix or a state spec."""
    data = _read_json(path)
    if isinstance(data, dict) and "re" in data:
        try:
            return DensityMatrix.from_json(data)
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"bad density matrix in {path}: {exc}") from exc
    return build_state(data)


def _n_list(text: str | None):
    if text is None:
        return None
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad --n-list {text!r}") from exc


def _config(args) -> ExperimentConfig:
    data = _read_json(args.config) if getattr(args, "config", None) else {}
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    if getattr(args, "n_list", None):
        data["n_list"] = _n_list(args.n_list)
    if getattr(args, "cutoff", None) is not None:
        data["n_max"] = args.cutoff
    if getattr(args, "seed", None) is not None:
        data["seed"] = args.seed
    if getattr(args, "state", None):
        data["state"] = _read_json(args.state)
    return ExperimentConfig.from_dict(data)


# ---------------------------------------------------------------------------


def cmd_state_build(args) -> int:
    spec = _read_json(args.config) if args.config else {"kind": "example"}
    if args.cutoff is not None:
        spec = dict(spec, cutoff=args.cutoff)
    if args.seed is not None and spec.get("kind") == "random":
        spec = dict(spec, seed=args.seed)
    _emit(build_state(spec).to_json(), args.out)
    return EXIT_OK


def cmd_convolve(args) -> int:
    rho = _load_state(args.rho)
    policy = CutoffPolicy(args.cutoff if args.cutoff is not None else 64, args.tail_budget)
    if args.n is not None:
        report = self_convolve(rho, args.n, policy)
    else:
        if not args.sigma:
            raise ConfigError("convolve needs --sigma or --n")
        report = convolve(rho, _load_state(args.sigma), args.eta, policy)
    _emit(report.to_json(), args.out)
    return EXIT_OK


def cmd_gaussify(args) -> int:
    rho = _load_state(args.rho)
    spec = gaussify(rho)
    out = spec.to_json()
    if args.cutoff is not None:
        out["state"] = spec.state(args.cutoff).to_json()
    _emit(out, args.out)
    return EXIT_OK


def cmd_metrics(args) -> int:
    rho = _load_state(args.rho)
    if args.sigma:
        sigma = _load_state(args.sigma)
    else:
        sigma = gaussify(rho).state(args.cutoff if args.cutoff is not None else max(rho.cutoff.per_mode))
    _emit(
        {
            "trace": trace_distance(rho, sigma),
            "hs": hs_distance(rho, sigma),
            "relent": relative_entropy(rho, sigma),
        },
        args.out,
    )
    return EXIT_OK


def cmd_fisher(args) -> int:
    rho = _load_state(args.rho)
    total, per = sld_fisher(rho)
    j, per_j = fisher_distance(rho)
    _emit({"I": total, "I_modes": per.tolist(), "J": j, "J_modes": per_j.tolist(), "kmb": kmb_fisher(rho)}, args.out)
    return EXIT_OK


def cmd_poincare(args) -> int:
    rho = _load_state(args.rho)
    cutoff = args.cutoff
    if cutoff is not None and rho.m > 1:
        cutoff = (cutoff,) * rho.m
    est = estimate_gap(rho, cutoff)
    _emit(est.to_json(), args.out)
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _config(args)
    result = run_sweep(cfg)
    out = Path(args.out) if args.out else None
    csv_text = records_csv(result.records, cfg.timing)
    summary = {"n_list": cfg.n_list, "aborted_step": result.aborted_step, "message": result.message, "fits": {}}
    for metric in ("trace", "relent"):
        try:
            slope, intercept, r2 = fit_slope(result.records, metric)
            summary["fits"][metric] = {"slope": slope, "intercept": intercept, "r2": r2}
        except BosonCLTError as exc:
            summary["fits"][metric] = {"error": str(exc)}
    if out:
        out.mkdir(parents=True, exist_ok=True)
        (out / "sweep.csv").write_text(csv_text)
        if result.records:
            write_svg(result.records, out / "sweep.svg")
        _emit(summary, str(out / "sweep.json"))
    else:
        sys.stdout.write(csv_text)
    if not result.ok:
        sys.stderr.write(result.message + "\n")
        return EXIT_TAIL
    return EXIT_OK


def cmd_probe_chi(args) -> int:
    if args.rho:
        rho = _load_state(args.rho)
    else:
        rho = build_state(_config(args).state)
    n_list = _n_list(args.n_list) or [16, 64, 256, 1024]
    series = chi_rate_probe(rho, n_list, complex(args.z.replace(" ", "")))
    _emit({"z": args.z, "series": [{"n": n, "value": v} for n, v in series]}, args.out)
    return EXIT_OK


def cmd_check(args) -> int:
    report = run_invariant_suite(args.seed if args.seed is not None else 0, args.sizes)
    if args.out:
        Path(args.out).write_text(report.to_json() + "\n")
    sys.stdout.write("\n".join(report.lines()) + "\n")
    return EXIT_OK if report.passed else EXIT_INVARIANT


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bosonclt", description="Bosonic quantum CLT laboratory")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config or state spec")
        p.add_argument("--cutoff", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--out")
        return p

    state = sub.add_parser("state", help="state construction")
    state_sub = state.add_subparsers(dest="action", required=True)
    common(state_sub.add_parser("build", help="build a state from a spec")).set_defaults(func=cmd_state_build)

    p = common(sub.add_parser("convolve", help="binary or n-fold self convolution"))
    p.add_argument("--rho", required=True)
    p.add_argument("--sigma")
    p.add_argument("--eta", type=float, default=0.5)
    p.add_argument("--n", type=int)
    p.add_argument("--tail-budget", type=float, default=1e-8)
    p.set_defaults(func=cmd_convolve)

    p = common(sub.add_parser("gaussify", help="Gaussification of a state"))
    p.add_argument("--rho", required=True)
    p.set_defaults(func=cmd_gaussify)

    p = common(sub.add_parser("metrics", help="distances to a second state or to the Gaussification"))
    p.add_argument("--rho", required=True)
    p.add_argument("--sigma")
    p.set_defaults(func=cmd_metrics)

    p = common(sub.add_parser("fisher", help="SLD and KMB Fisher information"))
    p.add_argument("--rho", required=True)
    p.set_defaults(func=cmd_fisher)

    p = common(sub.add_parser("poincare", help="Poincare gap estimate"))
    p.add_argument("--rho", required=True)
    p.set_defaults(func=cmd_poincare)

    p = common(sub.add_parser("sweep", help="n-sweep of the self convolution"))
    p.add_argument("--n-list")
    p.add_argument("--state", help="state spec JSON overriding the config")
    p.set_defaults(func=cmd_sweep)

    p = common(sub.add_parser("probe-chi", help="sqrt(n)-scaled characteristic function gap"))
    p.add_argument("--rho")
    p.add_argument("--state")
    p.add_argument("--n-list")
    p.add_argument("--z", default="1j")
    p.set_defaults(func=cmd_probe_chi)

    p = common(sub.add_parser("check", help="run the invariant suite"))
    p.add_argument("--sizes", type=int, default=5)
    p.set_defaults(func=cmd_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        return args.func(args)
    except TailBudgetExceeded as exc:
        sys.stderr.write(f"tail budget exceeded: {exc}\n")
        return EXIT_TAIL
    except (ConfigError, ValueError, BosonCLTError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
