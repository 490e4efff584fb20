"""Truncated multimode Fock-space states and ladder operators.

A mode with cutoff ``N`` keeps the basis ``|0>, ..., |N>``.  Multi-indices are
ordered row-major over modes with mode 0 varying slowest, which is the ordering
produced by ``np.kron(op_mode0, op_mode1, ...)``.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.special import gammaln

from .errors import (
    CutoffMismatchError,
    CutoffViolationError,
    DegenerateInputError,
    DimensionCeilingError,
)

DIM_CEILING = 4096
HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-10
EIG_TOL = 1e-10


@dataclass(frozen=True)
class FockCutoff:
    per_mode: tuple[int, ...]
    ceiling: int = field(default=DIM_CEILING, compare=False)

    def __post_init__(self):
        per_mode = tuple(int(n) for n in np.atleast_1d(self.per_mode))
        object.__setattr__(self, "per_mode", per_mode)
        if not per_mode:
            raise CutoffViolationError("a cutoff needs at least one mode")
        if any(n < 1 for n in per_mode):
            raise CutoffViolationError(f"every mode cutoff must be >= 1, got {per_mode}")
        if self.dim > self.ceiling:
            raise DimensionCeilingError(
                f"total dimension {self.dim} exceeds ceiling {self.ceiling}"
            )

    @classmethod
    def of(cls, cutoff) -> "FockCutoff":
        if isinstance(cutoff, FockCutoff):
            return cutoff
        return cls(tuple(np.atleast_1d(cutoff)))

    @property
    def m(self) -> int:
        return len(self.per_mode)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(n + 1 for n in self.per_mode)

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims))

    def index(self, occupation: Sequence[int]) -> int:
        occupation = tuple(np.atleast_1d(occupation))
        if len(occupation) != self.m:
            raise CutoffViolationError(f"multi-index {occupation} has wrong length for {self.m} modes")
        for n, cap in zip(occupation, self.per_mode):
            if n < 0 or n > cap:
                raise CutoffViolationError(f"occupation {occupation} outside cutoff {self.per_mode}")
        return int(np.ravel_multi_index(occupation, self.dims))

    def occupations(self) -> np.ndarray:
        """Array of shape (dim, m) listing the multi-index of every basis vector."""
        return np.array(list(itertools.product(*(range(d) for d in self.dims))), dtype=int)

    def total_photons(self) -> np.ndarray:
        return self.occupations().sum(axis=1)

    def enlarged(self, extra: int = 1) -> "FockCutoff":
        return FockCutoff(tuple(n + extra for n in self.per_mode), self.ceiling)

    def union(self, other: "FockCutoff") -> "FockCutoff":
        if other.m != self.m:
            raise CutoffMismatchError("cutoffs have different mode counts")
        return FockCutoff(tuple(max(a, b) for a, b in zip(self.per_mode, other.per_mode)), self.ceiling)


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex, copy=True)
    a.setflags(write=False)
    return a


def hermitize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.conj().T)


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Truncated Fock-basis density operator.

    ``tail_mass`` is the probability weight discarded by truncation on the way
    to this state; it only ever grows along a pipeline.
    """

    cutoff: FockCutoff
    entries: np.ndarray
    tail_mass: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "cutoff", FockCutoff.of(self.cutoff))
        entries = np.asarray(self.entries)
        d = self.cutoff.dim
        if entries.shape != (d, d):
            raise CutoffMismatchError(f"matrix shape {entries.shape} does not match dimension {d}")
        object.__setattr__(self, "entries", _readonly(entries))
        if self.tail_mass < 0:
            raise ValueError("tail_mass must be nonnegative")
        object.__setattr__(self, "tail_mass", float(self.tail_mass))

    @classmethod
    def from_matrix(cls, matrix, cutoff, tail_mass: float = 0.0, renormalize: bool = True):
        """Hermitize (and optionally renormalize) ``matrix`` into a state."""
        cutoff = FockCutoff.of(cutoff)
        rho = hermitize(np.asarray(matrix, dtype=complex))
        if renormalize:
            tr = np.trace(rho).real
            if tr <= 0:
                raise DegenerateInputError("matrix has nonpositive trace")
            rho = rho / tr
        return cls(cutoff, rho, tail_mass)

    @property
    def m(self) -> int:
        return self.cutoff.m

    @property
    def dim(self) -> int:
        return self.cutoff.dim

    def trace(self) -> float:
        return float(np.trace(self.entries).real)

    def eigvals(self) -> np.ndarray:
        return np.linalg.eigvalsh(hermitize(self.entries))

    def check(self) -> None:
        """Raise ``ValueError`` if the state invariants do not hold."""
        rho = self.entries
        if np.max(np.abs(rho - rho.conj().T), initial=0.0) > HERMITIAN_TOL:
            raise ValueError("density matrix is not Hermitian")
        if abs(self.trace() - 1.0) > TRACE_TOL:
            raise ValueError(f"density matrix has trace {self.trace()!r}")
        if self.eigvals().min() < -EIG_TOL:
            raise ValueError("density matrix has a negative eigenvalue")

    def to_json(self) -> dict:
        return {
            "cutoff": list(self.cutoff.per_mode),
            "re": self.entries.real.tolist(),
            "im": self.entries.imag.tolist(),
            "tail_mass": self.tail_mass,
        }

    @classmethod
    def from_json(cls, obj: Mapping | str) -> "DensityMatrix":
        if isinstance(obj, str):
            obj = json.loads(obj)
        entries = np.asarray(obj["re"], dtype=float) + 1j * np.asarray(obj["im"], dtype=float)
        return cls(FockCutoff(tuple(obj["cutoff"])), entries, float(obj.get("tail_mass", 0.0)))


@dataclass(frozen=True, eq=False)
class ModeOperator:
    cutoff: FockCutoff
    entries: np.ndarray
    label: str = "custom"

    def __post_init__(self):
        object.__setattr__(self, "cutoff", FockCutoff.of(self.cutoff))
        object.__setattr__(self, "entries", _readonly(self.entries))

    @property
    def H(self) -> "ModeOperator":
        return ModeOperator(self.cutoff, self.entries.conj().T, f"adjoint({self.label})")


def as_matrix(x) -> np.ndarray:
    if isinstance(x, (DensityMatrix, ModeOperator)):
        return x.entries
    return np.asarray(x, dtype=complex)


# ---------------------------------------------------------------------------
# single-mode building blocks


def ladder(n: int) -> np.ndarray:
    """Single-mode annihilation matrix on ``|0>..|n>``."""
    return np.diag(np.sqrt(np.arange(1, n + 1, dtype=float)), k=1).astype(complex)


def _check_mode(cutoff: FockCutoff, mode: int) -> None:
    if not 0 <= mode < cutoff.m:
        raise IndexError(f"mode {mode} out of range for {cutoff.m} modes")


def _embed_single(op: np.ndarray, cutoff: FockCutoff, mode: int) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for j, d in enumerate(cutoff.dims):
        out = np.kron(out, op if j == mode else np.eye(d))
    return out


def annihilation(cutoff, mode: int = 0) -> ModeOperator:
    cutoff = FockCutoff.of(cutoff)
    _check_mode(cutoff, mode)
    a = _embed_single(ladder(cutoff.per_mode[mode]), cutoff, mode)
    return ModeOperator(cutoff, a, f"annihilation({mode})")


def creation(cutoff, mode: int = 0) -> ModeOperator:
    a = annihilation(cutoff, mode)
    return ModeOperator(a.cutoff, a.entries.conj().T, f"creation({mode})")


def number(cutoff, mode: int = 0) -> ModeOperator:
    cutoff = FockCutoff.of(cutoff)
    _check_mode(cutoff, mode)
    n = np.diag(np.arange(cutoff.per_mode[mode] + 1, dtype=float)).astype(complex)
    return ModeOperator(cutoff, _embed_single(n, cutoff, mode), f"number({mode})")


def quadratures(cutoff) -> list[np.ndarray]:
    """Matrices of (x_1, p_1, ..., x_m, p_m) with a = (x + i p)/sqrt(2)."""
    cutoff = FockCutoff.of(cutoff)
    out = []
    for j in range(cutoff.m):
        a = annihilation(cutoff, j).entries
        ad = a.conj().T
        out.append((a + ad) / np.sqrt(2))
        out.append((a - ad) / (1j * np.sqrt(2)))
    return out


def displacement_matrices(z, n: int) -> np.ndarray:
    """Single-mode ``<p|D_z|q>`` for every ``z`` in a 1-d array.

    Returns shape ``(len(z), n+1, n+1)``.  Each diagonal ``p = q + k`` of the
    lower triangle is ``sqrt(q!/p!) z^k e^{-|z|^2/2} L_q^{(k)}(|z|^2)``, built
    with the normalized three-term Laguerre recurrence in ``q`` (all offsets at
    once).  The upper triangle follows from
    ``<q|D_z|p> = (-1)^k conj(<p|D_z|q>)``.  Elements are the exact
    infinite-dimensional values; no operator truncation enters.
    """
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    k_pts = z.shape[0]
    d = n + 1
    x = (np.abs(z) ** 2)[:, None]
    ks = np.arange(d, dtype=float)[None, :]
    # f_0^{(k)} = |z|^k e^{-x/2} / sqrt(k!), in log space to avoid overflow
    with np.errstate(divide="ignore", invalid="ignore"):
        log_r = np.log(np.abs(z))[:, None]
        log_f0 = np.where(ks > 0, ks * log_r, 0.0) - 0.5 * x - 0.5 * gammaln(ks + 1)
    cur = np.exp(log_f0)
    prev = np.zeros_like(cur)
    lower = np.zeros((k_pts, d, d))
    cols = np.arange(d)
    for q in range(d):
        kmax = d - q
        lower[:, cols[:kmax] + q, q] = cur[:, :kmax]
        if q == n:
            break
        nxt = (2 * q + 1 + ks - x) * cur - np.sqrt(q * (q + ks)) * prev
        prev, cur = cur, nxt / np.sqrt((q + 1) * (q + ks + 1))
    offset = cols[:, None] - cols[None, :]
    phase = np.exp(1j * np.angle(z))[:, None, None] ** np.abs(offset)[None]
    low = lower * phase
    sign = np.where(offset % 2 == 0, 1.0, -1.0)
    upper = sign * np.conj(np.swapaxes(low, 1, 2))
    return np.where(offset >= 0, low, upper)


def displacement(z, cutoff) -> ModeOperator:
    cutoff = FockCutoff.of(cutoff)
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    if z.shape != (cutoff.m,):
        raise ValueError(f"z must have length {cutoff.m}")
    if not np.all(np.isfinite(z)):
        raise ValueError("z must be finite")
    out = np.ones((1, 1), dtype=complex)
    for zj, nj in zip(z, cutoff.per_mode):
        out = np.kron(out, displacement_matrices([zj], nj)[0])
    return ModeOperator(cutoff, out, f"displacement({z.tolist()})")


def phase_rotation(theta, cutoff) -> np.ndarray:
    """Unitary ``exp(i theta_j a_j^dag a_j)`` (passive, diagonal in the Fock basis)."""
    cutoff = FockCutoff.of(cutoff)
    theta = np.broadcast_to(np.asarray(theta, dtype=float), (cutoff.m,))
    phases = cutoff.occupations() @ theta
    return np.diag(np.exp(1j * phases))


# ---------------------------------------------------------------------------
# states


def build_pure_state(amplitudes: Mapping, cutoff) -> DensityMatrix:
    """``|v><v|`` for ``v = sum amplitudes[idx] |idx>``, normalized.

    Keys are occupation multi-indices (an int is accepted for one mode).
    """
    cutoff = FockCutoff.of(cutoff)
    v = np.zeros(cutoff.dim, dtype=complex)
    for idx, amp in amplitudes.items():
        v[cutoff.index(idx)] += complex(amp)
    norm = np.linalg.norm(v)
    if norm == 0:
        raise DegenerateInputError("amplitude vector is zero")
    v = v / norm
    return DensityMatrix(cutoff, np.outer(v, v.conj()))


def vacuum(cutoff) -> DensityMatrix:
    cutoff = FockCutoff.of(cutoff)
    return build_pure_state({(0,) * cutoff.m: 1.0}, cutoff)


def fock_state(n, cutoff) -> DensityMatrix:
    cutoff = FockCutoff.of(cutoff)
    return build_pure_state({tuple(np.atleast_1d(n)): 1.0}, cutoff)


def mixture(states: Sequence[DensityMatrix], weights: Sequence[float]) -> DensityMatrix:
    weights = np.asarray(weights, dtype=float)
    if np.any(weights < 0) or weights.sum() <= 0:
        raise DegenerateInputError("mixture weights must be nonnegative and not all zero")
    weights = weights / weights.sum()
    cutoff = states[0].cutoff
    for s in states[1:]:
        cutoff = cutoff.union(s.cutoff)
    acc = sum(w * embed(s, cutoff).entries for s, w in zip(states, weights))
    tail = float(sum(w * s.tail_mass for s, w in zip(states, weights)))
    return DensityMatrix.from_matrix(acc, cutoff, tail)


def _as_tensor(a: np.ndarray, dims) -> np.ndarray:
    return a.reshape(tuple(dims) + tuple(dims))


def embed_matrix(a: np.ndarray, old: FockCutoff, new: FockCutoff) -> np.ndarray:
    """Zero-pad an operator from ``old`` to the larger cutoff ``new``."""
    if old.m != new.m or any(n < o for o, n in zip(old.per_mode, new.per_mode)):
        raise CutoffMismatchError(f"cannot embed {old.per_mode} into {new.per_mode}")
    if old == new:
        return np.array(a, dtype=complex)
    t = _as_tensor(np.asarray(a), old.dims)
    out = np.zeros(new.dims + new.dims, dtype=complex)
    out[tuple(slice(0, d) for d in old.dims) * 2] = t
    return out.reshape(new.dim, new.dim)


def restrict_matrix(a: np.ndarray, old: FockCutoff, new: FockCutoff) -> np.ndarray:
    """Keep the block of ``a`` on the smaller cutoff ``new``."""
    t = _as_tensor(np.asarray(a), old.dims)
    return t[tuple(slice(0, d) for d in new.dims) * 2].reshape(new.dim, new.dim)


def embed(rho: DensityMatrix, cutoff) -> DensityMatrix:
    cutoff = FockCutoff.of(cutoff)
    return DensityMatrix(cutoff, embed_matrix(rho.entries, rho.cutoff, cutoff), rho.tail_mass)


def pad(rho: DensityMatrix, extra: int = 1) -> DensityMatrix:
    return embed(rho, rho.cutoff.enlarged(extra))


def truncate(rho: DensityMatrix, cutoff) -> DensityMatrix:
    """Cut ``rho`` down to ``cutoff``, recording the discarded weight and renormalizing."""
    cutoff = FockCutoff.of(cutoff)
    if cutoff == rho.cutoff:
        return rho
    kept = restrict_matrix(rho.entries, rho.cutoff, cutoff)
    lost = max(rho.trace() - float(np.trace(kept).real), 0.0)
    return DensityMatrix.from_matrix(kept, cutoff, rho.tail_mass + lost)


def tensor(rho: DensityMatrix, sigma: DensityMatrix) -> DensityMatrix:
    cutoff = FockCutoff(rho.cutoff.per_mode + sigma.cutoff.per_mode, rho.cutoff.ceiling)
    return DensityMatrix(cutoff, np.kron(rho.entries, sigma.entries), rho.tail_mass + sigma.tail_mass)


def partial_trace_matrix(a: np.ndarray, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    dims = tuple(dims)
    keep = sorted(set(keep))
    if not keep:
        raise ValueError("keep must be a nonempty set of modes")
    m = len(dims)
    t = _as_tensor(np.asarray(a), dims)
    letters = "abcdefghijklmnopqrstuvwxyz"
    rows = list(letters[:m])
    cols = [letters[m + j] if j in keep else rows[j] for j in range(m)]
    out = "".join(rows[j] for j in keep) + "".join(cols[j] for j in keep)
    r = np.einsum("".join(rows) + "".join(cols) + "->" + out, t)
    d = int(np.prod([dims[j] for j in keep]))
    return r.reshape(d, d)


def partial_trace(rho: DensityMatrix, keep: Sequence[int]) -> DensityMatrix:
    keep = sorted(set(np.atleast_1d(keep).tolist()))
    if not keep:
        raise ValueError("keep must be a nonempty set of modes")
    if any(j < 0 or j >= rho.m for j in keep):
        raise IndexError(f"keep {keep} out of range for {rho.m} modes")
    r = partial_trace_matrix(rho.entries, rho.cutoff.dims, keep)
    cutoff = FockCutoff(tuple(rho.cutoff.per_mode[j] for j in keep), rho.cutoff.ceiling)
    return DensityMatrix(cutoff, hermitize(r), rho.tail_mass)


def expectation(rho: DensityMatrix, op) -> complex:
    if isinstance(op, ModeOperator) and op.cutoff != rho.cutoff:
        raise CutoffMismatchError(f"operator cutoff {op.cutoff.per_mode} != state cutoff {rho.cutoff.per_mode}")
    x = as_matrix(op)
    if x.shape != rho.entries.shape:
        raise CutoffMismatchError("operator and state dimensions differ")
    return complex(np.trace(rho.entries @ x))


def random_state(cutoff, rng, rank: int | None = None, symmetry: int | None = 3) -> DensityMatrix:
    """Seeded random state ``G G^dag / tr(G G^dag)`` with complex Gaussian ``G``.

    ``rank=1`` gives a random pure state.  With ``symmetry=k`` the state is made
    invariant under the phase rotations ``exp(2 pi i r a_j^dag a_j / k)`` of
    every mode, which for ``k >= 3`` forces zero mean and a per-mode diagonal
    covariance matrix (Williamson form).  Mixed states are twirled; pure states
    are drawn on a single residue class of occupations per mode.  ``None``
    skips the symmetrization.
    """
    cutoff = FockCutoff.of(cutoff)
    rng = np.random.default_rng(rng)
    d = cutoff.dim
    r = d if rank is None else rank
    g = rng.standard_normal((d, r)) + 1j * rng.standard_normal((d, r))
    occ = cutoff.occupations()
    if symmetry and r == 1:
        residue = rng.integers(0, min(symmetry, min(cutoff.per_mode) + 1), size=cutoff.m)
        keep = np.all(occ % symmetry == residue, axis=1)
        g[~keep] = 0.0
        return build_pure_state({tuple(o): amp for o, amp in zip(occ[keep], g[keep, 0])}, cutoff)
    rho = g @ g.conj().T
    if symmetry:
        mask = np.ones((d, d), dtype=bool)
        for j in range(cutoff.m):
            mask &= (occ[:, j][:, None] - occ[:, j][None, :]) % symmetry == 0
        rho = np.where(mask, rho, 0.0)
    return DensityMatrix.from_matrix(rho, cutoff)
