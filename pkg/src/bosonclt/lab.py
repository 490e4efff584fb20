"""Experiment harness: sweeps of rho^{[+]n}, slope fits, chi probes and the invariant suite."""

from __future__ import annotations

import csv
import io
import json
import math
import time
import zlib
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .charfn import char_fn
from .convolve import CutoffPolicy, iter_self_convolve
from .errors import ConfigError, InsufficientDataError, TailBudgetExceeded
from .fisher import fisher_distance
from .fock import DensityMatrix, build_pure_state, mixture, random_state
from .gaussian import gaussian_char_fn, gaussify, thermal_state
from .metrics import hs_distance, relative_entropy, trace_distance
from .poincare import estimate_gap

CSV_HEADER = ["n", "trace", "hs", "relent", "J", "tail", "ms"]
METRICS = ("trace", "hs", "relent", "J", "lambda")


# ---------------------------------------------------------------------------
# configuration


def _parse_index(key) -> tuple[int, ...]:
    if isinstance(key, (list, tuple)):
        return tuple(int(k) for k in key)
    return tuple(int(k) for k in str(key).replace("(", "").replace(")", "").split(","))


def _parse_amp(v) -> complex:
    if isinstance(v, (list, tuple)):
        return complex(float(v[0]), float(v[1]))
    if isinstance(v, str):
        return complex(v.replace(" ", ""))
    return complex(v)


def build_state(spec: Mapping[str, Any], rng=None) -> DensityMatrix:
    """State from a JSON-style spec.

    Kinds: ``pure`` (``amplitudes`` mapping ``"n"`` or ``"n1,n2"`` to numbers
    or ``[re, im]``), ``thermal`` (``nu``), ``mixture`` (``components`` and
    ``weights``), ``random`` (``rank``, ``seed``) and ``example`` (the
    ``(|0> + |3>)/sqrt(2)`` superposition).
    """
    try:
        kind = spec.get("kind", "pure")
        if kind == "example":
            return build_pure_state({0: 1.0, 3: 1.0}, spec.get("cutoff", 3))
        if kind == "pure":
            amps = {_parse_index(k): _parse_amp(v) for k, v in spec["amplitudes"].items()}
            cutoff = spec.get("cutoff")
            if cutoff is None:
                m = len(next(iter(amps)))
                cutoff = [max(k[j] for k in amps) for j in range(m)]
                cutoff = [max(c, 1) for c in cutoff]
            return build_pure_state(amps, cutoff)
        if kind == "thermal":
            return thermal_state(spec["nu"], spec["cutoff"])
        if kind == "mixture":
            comps = [build_state(c, rng) for c in spec["components"]]
            return mixture(comps, spec.get("weights", [1.0] * len(comps)))
        if kind == "random":
            seed = spec.get("seed", rng)
            return random_state(spec["cutoff"], seed, rank=spec.get("rank"))
    except (KeyError, TypeError, StopIteration) as exc:
        raise ConfigError(f"malformed state spec: {exc!r}") from exc
    raise ConfigError(f"unknown state kind {kind!r}")


@dataclass
class ExperimentConfig:
    state: dict = field(default_factory=lambda: {"kind": "example"})
    n_list: list = field(default_factory=lambda: [1, 2, 4, 8, 16, 32, 64])
    n_max: int = 48
    tail_budget: float = 1e-8
    reference_cutoff: int | None = None
    metrics: list = field(default_factory=lambda: ["trace", "hs", "relent", "J"])
    seed: int = 0
    timing: bool = False
    out_csv: str | None = None
    out_svg: str | None = None
    out_json: str | None = None

    def __post_init__(self):
        self.n_list = [int(n) for n in self.n_list]
        if not self.n_list or any(n < 1 for n in self.n_list):
            raise ConfigError("n_list must contain positive integers")
        if self.n_list != sorted(set(self.n_list)):
            raise ConfigError("n_list must be strictly ascending")
        bad = set(self.metrics) - set(METRICS)
        if bad:
            raise ConfigError(f"unknown metrics {sorted(bad)}")
        if self.n_max < 1 or self.tail_budget <= 0:
            raise ConfigError("n_max must be >= 1 and tail_budget positive")

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        return cls(**dict(data))

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc

    @property
    def policy(self) -> CutoffPolicy:
        return CutoffPolicy(self.n_max, self.tail_budget)


# ---------------------------------------------------------------------------
# sweeps


@dataclass
class ConvergenceRecord:
    n: int
    trace_distance: float = math.nan
    hs_distance: float = math.nan
    relative_entropy: float = math.nan
    J: float = math.nan
    discarded_mass: float = 0.0
    wall_time: float = 0.0
    tail_mass: float = 0.0
    lambda_hat: float = math.nan

    def metric(self, name: str) -> float:
        return {
            "trace": self.trace_distance,
            "hs": self.hs_distance,
            "relent": self.relative_entropy,
            "J": self.J,
            "lambda": self.lambda_hat,
            "tail": self.tail_mass,
        }[name]


@dataclass
class SweepResult:
    records: list
    aborted_step: int | None = None
    message: str = ""

    def __iter__(self):
        return iter(self.records)

    def __len__(self):
        return len(self.records)

    def __getitem__(self, i):
        return self.records[i]

    @property
    def ok(self) -> bool:
        return self.aborted_step is None


def thermal_reference(nu, cutoff, tol: float = 1e-14) -> DensityMatrix:
    """Thermal product at ``cutoff`` or larger, so its own truncation weight stays below ``tol``."""
    nu = np.atleast_1d(np.asarray(nu, dtype=float))
    per = []
    for v, c in zip(nu, np.broadcast_to(np.atleast_1d(cutoff), nu.shape)):
        q = (v - 1) / (v + 1)
        need = int(math.ceil(math.log(tol) / math.log(q))) if q > 0 else 1
        per.append(max(int(c), need, 1))
    return thermal_state(nu, tuple(per))


def _measure(rho: DensityMatrix, ref: DensityMatrix, metrics: Sequence[str]) -> dict:
    out = {}
    if "trace" in metrics:
        out["trace_distance"] = trace_distance(rho, ref)
    if "hs" in metrics:
        out["hs_distance"] = hs_distance(rho, ref)
    if "relent" in metrics:
        out["relative_entropy"] = relative_entropy(rho, ref)
    if "J" in metrics:
        out["J"] = fisher_distance(rho)[0]
    if "lambda" in metrics:
        out["lambda_hat"] = estimate_gap(rho).lambda_hat
    return out


def run_sweep(config: ExperimentConfig, state: DensityMatrix | None = None) -> SweepResult:
    """Self-convolve the configured state once up to ``max(n_list)``, measuring at each listed ``n``.

    The Gaussian reference is computed once from the input state.
    """
    rho = state if state is not None else build_state(config.state, config.seed)
    spec = gaussify(rho)
    ref_cut = config.reference_cutoff or max(config.n_max, max(rho.cutoff.per_mode))
    ref = spec.state(ref_cut)
    wanted = set(config.n_list)
    records = []
    start = time.perf_counter()
    try:
        for n, rep in enumerate(iter_self_convolve(rho, max(config.n_list), config.policy), start=1):
            if n not in wanted:
                continue
            vals = _measure(rep.output, ref, config.metrics)
            now = time.perf_counter()
            records.append(
                ConvergenceRecord(
                    n=n,
                    discarded_mass=rep.discarded_mass,
                    wall_time=now - start,
                    tail_mass=rep.output.tail_mass,
                    **vals,
                )
            )
    except TailBudgetExceeded as exc:
        return SweepResult(records, exc.step, str(exc))
    return SweepResult(records)


def fit_slope(records: Iterable[ConvergenceRecord], metric: str, n_min: int = 4) -> tuple[float, float, float]:
    """Least-squares fit of ``log(metric)`` against ``log(n)``; returns ``(slope, intercept, R^2)``.

    Records with ``n < n_min`` or a nonpositive or non-finite value are skipped.
    """
    pts = [(r.n, r.metric(metric)) for r in records]
    pts = [(n, v) for n, v in pts if n >= n_min and np.isfinite(v) and v > 0]
    if len(pts) < 4:
        raise InsufficientDataError(f"need at least 4 usable points for {metric}, have {len(pts)}")
    x = np.log([n for n, _ in pts])
    y = np.log([v for _, v in pts])
    slope, intercept = np.polyfit(x, y, 1)
    pred = slope * x + intercept
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum((y - pred) ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2


def chi_rate_probe(state: DensityMatrix, n_list: Sequence[int], z) -> list[tuple[int, float]]:
    """``sqrt(n) |chi_rho(z/sqrt(n))^n - chi_{rho_G}(z)|`` for each ``n`` (single mode)."""
    if state.m != 1:
        raise ValueError("chi_rate_probe is single-mode")
    z = complex(z)
    target = gaussian_char_fn(gaussify(state), z)
    out = []
    for n in n_list:
        base = char_fn(state, z / math.sqrt(n))
        out.append((int(n), math.sqrt(n) * abs(base**n - target)))
    return out


# ---------------------------------------------------------------------------
# output


def _fmt(v: float) -> str:
    return repr(float(v))


def records_csv(records: Iterable[ConvergenceRecord], timing: bool = False) -> str:
    """CSV text with header ``n,trace,hs,relent,J,tail,ms``.

    ``ms`` is written as 0 unless ``timing`` is set, so that seeded runs are
    byte-identical.
    """
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in sorted(records, key=lambda r: r.n):
        w.writerow(
            [
                r.n,
                _fmt(r.trace_distance),
                _fmt(r.hs_distance),
                _fmt(r.relative_entropy),
                _fmt(r.J),
                _fmt(r.tail_mass),
                _fmt(1000 * r.wall_time if timing else 0.0),
            ]
        )
    return buf.getvalue()


def write_csv(records, path, timing: bool = False) -> None:
    Path(path).write_text(records_csv(records, timing))


def write_svg(records: Sequence[ConvergenceRecord], path, metrics=("trace", "relent")) -> None:
    """Log-log plot of the selected metrics with reference slopes -1/2 and -1."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "bosonclt"
    fig, ax = plt.subplots(figsize=(5, 4))
    ns = np.array([r.n for r in records], dtype=float)
    for name in metrics:
        vals = np.array([r.metric(name) for r in records])
        ok = np.isfinite(vals) & (vals > 0)
        if ok.any():
            ax.loglog(ns[ok], vals[ok], "o-", label=name)
    if len(ns):
        for slope, style in ((-0.5, "--"), (-1.0, ":")):
            anchor = [r.metric(metrics[0]) for r in records if np.isfinite(r.metric(metrics[0]))]
            if anchor:
                ax.loglog(ns, anchor[-1] * (ns / ns[-1]) ** slope, style, color="gray", label=f"slope {slope:g}")
    ax.set_xlabel("n")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


# ---------------------------------------------------------------------------
# invariant suite


@dataclass
class InvariantResult:
    name: str
    passed: bool
    violation: float
    detail: str = ""


@dataclass
class InvariantReport:
    seed: int
    results: list

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def to_json(self) -> str:
        return json.dumps(
            {"seed": self.seed, "passed": self.passed, "results": [asdict(r) for r in self.results]},
            indent=2,
            sort_keys=True,
        )

    def lines(self) -> list[str]:
        return [
            f"{'PASS' if r.passed else 'FAIL'} {r.name} violation={r.violation:.3e} {r.detail}".rstrip()
            for r in self.results
        ]


def run_invariant_suite(seed: int = 0, sizes: int = 5) -> InvariantReport:
    """Run every property check on ``sizes`` seeded random samples per check."""
    from . import invariants

    results = []
    for name, check in invariants.CHECKS:
        rng = np.random.default_rng([seed, zlib.crc32(name.encode())])
        try:
            violation, passed, detail = check(rng, sizes)
        except Exception as exc:  # reported, never swallowed silently
            violation, passed, detail = math.inf, False, f"{type(exc).__name__}: {exc}"
        results.append(InvariantResult(name, bool(passed), float(violation), detail))
    return InvariantReport(seed, results)
