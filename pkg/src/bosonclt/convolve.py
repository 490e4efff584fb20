"""Beam-splitter unitaries and quantum convolution on truncated Fock spaces.

The beam splitter ``U_eta = exp(theta (a^dag b - a b^dag))`` with
``cos(theta) = sqrt(eta)`` conserves the total photon number of the mode pair,
so it is exact on every block ``span{|k, N-k>}``.  The convolution

    rho [+]_eta sigma = tr_2 U (rho (x) sigma) U^dag

is evaluated without forming the joint state: writing
``sigma = sum_e s_e |u_e><v_e|`` gives a Kraus-like sum
``sum_{e,c} s_e A_{c,u_e} rho A_{c,v_e}^dag`` whose factors are read off the
blocks.  No joint-space truncation enters; the output lives on cutoff
``N_rho + N_sigma`` per mode and is only capped afterwards by a
:class:`CutoffPolicy` that measures what it drops.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterator, Sequence

import numpy as np
from scipy.linalg import expm

from .errors import CutoffMismatchError, TailBudgetExceeded
from .fock import (
    DensityMatrix,
    FockCutoff,
    annihilation,
    as_matrix,
    embed_matrix,
    restrict_matrix,
)

DEFAULT_TAIL_BUDGET = 1e-8


def _check_eta(eta: float) -> float:
    eta = float(eta)
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"transmissivity must lie in [0, 1], got {eta}")
    return eta


def block_generator(n_total: int, sign: int = -1) -> np.ndarray:
    """Generator ``a^dag b - a b^dag`` on the block with ``n_total`` photons.

    Basis ``|k, n_total - k>`` for ``k = 0..n_total``.  ``sign=+1`` gives the
    non-antisymmetric ``a^dag b + a b^dag``, only useful for mutation tests.
    """
    k = np.arange(n_total)
    lower = np.zeros((n_total + 1, n_total + 1))
    lower[k + 1, k] = np.sqrt((k + 1) * (n_total - k))
    return lower + sign * lower.T


@lru_cache(maxsize=8192)
def _block(eta: float, n_total: int, sign: int = -1) -> np.ndarray:
    theta = np.arccos(np.sqrt(eta))
    b = expm(theta * block_generator(n_total, sign))
    b.setflags(write=False)
    return b


@dataclass(frozen=True, eq=False)
class BeamSplitterBlocks:
    """Blocks ``B_N`` of ``U_eta`` for ``N = 0..n_total``.

    ``blocks[N][k, j] = <k, N-k| U |j, N-j>``.
    """

    eta: float
    n_total: int
    blocks: tuple = field(repr=False)

    def unitary(self, n1: int, n2: int) -> np.ndarray:
        """Dense ``U_eta`` on ``span{|j, t>: j <= n1, t <= n2}`` restricted to blocks with ``j + t <= n_total``."""
        d1, d2 = n1 + 1, n2 + 1
        u = np.zeros((d1 * d2, d1 * d2))
        for n, b in enumerate(self.blocks):
            ks = [k for k in range(n + 1) if k <= n1 and n - k <= n2]
            idx = [k * d2 + (n - k) for k in ks]
            u[np.ix_(idx, idx)] = b[np.ix_(ks, ks)]
        return u


def beam_splitter(eta: float, n_total: int, _sign: int = -1) -> BeamSplitterBlocks:
    eta = _check_eta(eta)
    return BeamSplitterBlocks(eta, n_total, tuple(_block(eta, n, _sign) for n in range(n_total + 1)))


@dataclass(frozen=True)
class CutoffPolicy:
    """Per-mode output cap ``min(N_rho + N_sigma, n_max)`` and a tail budget."""

    n_max: int | Sequence[int] = 64
    tail_budget: float = DEFAULT_TAIL_BUDGET

    def cap(self, joint: FockCutoff) -> FockCutoff:
        caps = np.broadcast_to(np.asarray(self.n_max), (joint.m,))
        return FockCutoff(tuple(min(n, int(c)) for n, c in zip(joint.per_mode, caps)), joint.ceiling)


@dataclass(frozen=True, eq=False)
class ConvolutionReport:
    output: DensityMatrix
    discarded_mass: float
    steps: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "output": self.output.to_json(),
            "discarded_mass": self.discarded_mass,
            "steps": [
                {"eta": eta, "cutoff": list(c), "discarded": lost} for eta, c, lost in self.steps
            ],
        }


def _kraus_slices(eta: float, n1: int, n2: int, sign: int) -> np.ndarray:
    """Array ``W[c, t, k, j] = <k, c| U |j, t>`` for one mode pair.

    Shape ``(n1+n2+1, n2+1, n1+n2+1, n1+1)``.
    """
    nout = n1 + n2
    bfull = np.zeros((nout + 1, nout + 1, nout + 1))
    for n in range(nout + 1):
        bfull[n, : n + 1, : n + 1] = _block(eta, n, sign)
    c = np.arange(nout + 1)[:, None, None, None]
    t = np.arange(n2 + 1)[None, :, None, None]
    k = np.arange(nout + 1)[None, None, :, None]
    j = np.arange(n1 + 1)[None, None, None, :]
    n = j + t
    valid = (k + c == n) & (k <= n)
    return np.where(valid, bfull[n, np.minimum(k, nout), np.minimum(j, nout)], 0.0)


def convolve_operator(x, y, eta: float, cut_x, cut_y, _sign: int = -1) -> np.ndarray:
    """``tr_2 U_eta (X (x) Y) U_eta^dag`` for arbitrary operators ``X`` and ``Y``.

    Returns a matrix on cutoff ``cut_x + cut_y`` per mode.  Both arguments may
    be any square matrices (not only states), which is what the commutation
    check needs.
    """
    eta = _check_eta(eta)
    cut_x, cut_y = FockCutoff.of(cut_x), FockCutoff.of(cut_y)
    if cut_x.m != cut_y.m:
        raise CutoffMismatchError("convolution needs equal mode counts")
    x, y = as_matrix(x), as_matrix(y)
    m = cut_x.m
    w = [_kraus_slices(eta, a, b, _sign) for a, b in zip(cut_x.per_mode, cut_y.per_mode)]
    out_cut = FockCutoff(tuple(a + b for a, b in zip(cut_x.per_mode, cut_y.per_mode)), cut_x.ceiling)

    u, s, vh = np.linalg.svd(y)
    keep = s > s[0] * 1e-15 if s.size and s[0] > 0 else np.zeros(s.shape, bool)
    u, s, v = u[:, keep], s[keep], vh[keep].conj().T
    out = np.zeros((out_cut.dim, out_cut.dim), dtype=complex)
    if s.size == 0:
        return out
    for cs in itertools.product(*(range(p.shape[0]) for p in w)):
        wc = w[0][cs[0]]
        for mode in range(1, m):
            wc = _kron3(wc, w[mode][cs[mode]])
        au = np.einsum("te,tkj->ekj", u, wc)
        av = np.einsum("te,tkj->ekj", v, wc)
        out += np.einsum("e,ekj,ji,eli->kl", s, au, x, av.conj(), optimize=True)
    return out


def _kron3(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product of stacks ``(t, k, j)`` in all three axes."""
    ta, ka, ja = a.shape
    tb, kb, jb = b.shape
    return np.einsum("pkj,qlm->pqkljm", a, b).reshape(ta * tb, ka * kb, ja * jb)


def _cap(raw: np.ndarray, joint: FockCutoff, policy: CutoffPolicy) -> tuple[np.ndarray, FockCutoff, float]:
    target = policy.cap(joint)
    if target == joint:
        return raw, joint, 0.0
    kept = restrict_matrix(raw, joint, target)
    lost = max(float(np.trace(raw).real - np.trace(kept).real), 0.0)
    return kept, target, lost


def _convolve_step(rho: DensityMatrix, sigma: DensityMatrix, eta: float, policy: CutoffPolicy, step: int = 1):
    if rho.m != sigma.m:
        raise CutoffMismatchError("convolution needs equal mode counts")
    # the Kraus expansion runs over the second factor; swap so it is the cheaper one
    if np.linalg.matrix_rank(sigma.entries) * sigma.dim > np.linalg.matrix_rank(rho.entries) * rho.dim:
        rho, sigma, eta = sigma, rho, 1.0 - eta
    raw = convolve_operator(rho.entries, sigma.entries, eta, rho.cutoff, sigma.cutoff)
    joint = FockCutoff(tuple(a + b for a, b in zip(rho.cutoff.per_mode, sigma.cutoff.per_mode)), rho.cutoff.ceiling)
    kept, target, lost = _cap(raw, joint, policy)
    tail = rho.tail_mass + sigma.tail_mass + lost
    if tail > policy.tail_budget:
        raise TailBudgetExceeded(
            f"tail mass {tail:.3e} exceeds budget {policy.tail_budget:.1e} at step {step}",
            step=step,
            tail_mass=tail,
        )
    out = DensityMatrix.from_matrix(kept, target, tail)
    return out, lost, target


def convolve(rho: DensityMatrix, sigma: DensityMatrix, eta: float, policy: CutoffPolicy | None = None) -> ConvolutionReport:
    """Binary convolution ``rho [+]_eta sigma``."""
    eta = _check_eta(eta)
    policy = policy or CutoffPolicy()
    out, lost, target = _convolve_step(rho, sigma, eta, policy)
    return ConvolutionReport(out, lost, [(eta, target.per_mode, lost)])


def iter_self_convolve(rho: DensityMatrix, n: int, policy: CutoffPolicy | None = None) -> Iterator[ConvolutionReport]:
    """Yield the reports for ``rho^{[+]k}``, ``k = 1..n``.

    Uses ``sigma_k = sigma_{k-1} [+]_{1-1/k} rho``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    policy = policy or CutoffPolicy()
    current = rho
    discarded = 0.0
    steps: list = []
    yield ConvolutionReport(current, 0.0, [])
    for k in range(2, n + 1):
        eta = 1.0 - 1.0 / k
        current, lost, target = _convolve_step(current, rho, eta, policy, step=k)
        discarded += lost
        steps = steps + [(eta, target.per_mode, lost)]
        yield ConvolutionReport(current, discarded, steps)


def self_convolve(rho: DensityMatrix, n: int, policy: CutoffPolicy | None = None) -> ConvolutionReport:
    report = None
    for report in iter_self_convolve(rho, n, policy):
        pass
    return report


def commutator_compat_check(rho: DensityMatrix, sigma: DensityMatrix, eta: float, _sign: int = -1) -> float:
    """Trace-norm deviation of ``sqrt(eta)[a_j, rho [+] sigma]`` from ``[a_j, rho] [+] sigma``, maximized over modes.

    Both sides are formed on cutoffs padded by one level per mode, where the
    commutators of the finite-support operators are exact.
    """
    eta = _check_eta(eta)
    cr = rho.cutoff.enlarged(1)
    x = embed_matrix(rho.entries, rho.cutoff, cr)
    conv = convolve_operator(x, sigma.entries, eta, cr, sigma.cutoff, _sign)
    out_cut = FockCutoff(tuple(a + b for a, b in zip(cr.per_mode, sigma.cutoff.per_mode)), cr.ceiling)
    worst = 0.0
    for j in range(rho.m):
        a_in = annihilation(cr, j).entries
        a_out = annihilation(out_cut, j).entries
        # rho only reaches level N, so pad-one commutator is exact; the output
        # conv of the padded rho only reaches N + N_sigma, below out_cut
        lhs = np.sqrt(eta) * (a_out @ conv - conv @ a_out)
        comm = a_in @ x - x @ a_in
        rhs = convolve_operator(comm, sigma.entries, eta, cr, sigma.cutoff, _sign)
        worst = max(worst, float(np.abs(np.linalg.svd(lhs - rhs, compute_uv=False)).sum()))
    return worst
