"""SLD Poincare constant as a spectral gap on the truncated operator space.

For a test operator ``X`` the Dirichlet form is
``sum_j ||[a_j, X]||^2_rho + ||[a_j^dag, X]||^2_rho`` and the Gram form is
``||X||^2_rho``.  Commutators are kept on the interior block (every mode below
its cutoff), where the truncated ladder operators obey the canonical
commutation relation.  This leaves a few operators living on the cutoff edge
whose interior gradient vanishes; they do not depend on ``rho`` and are
deflated together with the identity before the generalized eigensolve.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg as sla

from .errors import CutoffMismatchError, RankDeficiencyError, UnsupportedFrameError
from .fock import DensityMatrix, FockCutoff, annihilation, as_matrix, embed, hermitize, phase_rotation
from .fisher import is_faithful, sld_norm2

SMOOTH_EPS = 1e-6
GRAM_TOL = 1e-13
NULL_TOL = 1e-10


def interior_projector(cutoff: FockCutoff) -> np.ndarray:
    occ = cutoff.occupations()
    inside = np.all(occ < np.array(cutoff.per_mode), axis=1)
    return np.diag(inside.astype(float))


def gradient_terms(rho, x, cutoff=None) -> list[float]:
    """``[||[a_1, X]||^2, ||[a_1^dag, X]||^2, ...]`` with interior-block commutators."""
    r = as_matrix(rho)
    cut = rho.cutoff if isinstance(rho, DensityMatrix) else FockCutoff.of(cutoff if cutoff is not None else r.shape[0] - 1)
    x = as_matrix(x)
    if x.shape != r.shape:
        raise CutoffMismatchError("operator and state dimensions differ")
    p = interior_projector(cut)
    out = []
    for j in range(cut.m):
        a = annihilation(cut, j).entries
        for op in (a, a.conj().T):
            out.append(sld_norm2(r, p @ (op @ x - x @ op) @ p))
    return out


def gradient_norm(rho, x, cutoff=None) -> float:
    """``||dX||^2_rho = sum_j ||[a_j, X]||^2_rho + ||[a_j^dag, X]||^2_rho``."""
    return float(sum(gradient_terms(rho, x, cutoff)))


@lru_cache(maxsize=64)
def _commutator_maps(per_mode: tuple[int, ...]) -> tuple[np.ndarray, np.ndarray]:
    """Stacked matrices of ``X -> P [op, X] P`` (row-major vec) and an orthonormal basis of their kernel."""
    cut = FockCutoff(per_mode)
    d = cut.dim
    eye = np.eye(d)
    proj = np.kron(interior_projector(cut), interior_projector(cut))
    maps = []
    for j in range(cut.m):
        a = annihilation(cut, j).entries
        for op in (a, a.conj().T):
            maps.append(proj @ (np.kron(op, eye) - np.kron(eye, op.T)))
    stacked = np.stack(maps)
    null = sla.null_space(np.concatenate(maps), rcond=NULL_TOL)
    stacked.setflags(write=False)
    null.setflags(write=False)
    return stacked, null


@dataclass(frozen=True, eq=False)
class GapEstimate:
    lambda_hat: float
    cutoff: FockCutoff
    residual: float
    eigenvector: np.ndarray = field(repr=False)
    null_dim: int = 0
    smoothed: bool = False
    state: DensityMatrix | None = field(default=None, repr=False)

    def to_json(self) -> dict:
        return {
            "lambda_hat": self.lambda_hat,
            "cutoff": list(self.cutoff.per_mode),
            "residual": self.residual,
            "null_dim": self.null_dim,
            "smoothed": self.smoothed,
            "eigenvector": {"re": self.eigenvector.real.tolist(), "im": self.eigenvector.imag.tolist()},
        }


def smooth(rho: DensityMatrix, eps: float = SMOOTH_EPS, reference: DensityMatrix | None = None) -> DensityMatrix:
    """``(1 - eps) rho + eps tau_ref`` with ``tau_ref`` the Gaussification (or the maximally mixed state off-frame)."""
    if reference is None:
        from .gaussian import gaussify

        try:
            reference = gaussify(rho).state(rho.cutoff)
        except UnsupportedFrameError:
            reference = DensityMatrix(rho.cutoff, np.eye(rho.dim) / rho.dim)
    ref = embed(reference, rho.cutoff) if reference.cutoff != rho.cutoff else reference
    mixed = (1 - eps) * rho.entries + eps * ref.entries
    return DensityMatrix.from_matrix(mixed, rho.cutoff, rho.tail_mass)


def estimate_gap(rho: DensityMatrix, cutoff=None, eps: float = SMOOTH_EPS) -> GapEstimate:
    """Smallest generalized eigenvalue of Dirichlet versus Gram form off the gradient-null space.

    ``cutoff`` (default: the state's own) sets the operator space; the state is
    embedded there first.  Non-faithful states are smoothed with weight ``eps``.
    """
    if cutoff is not None:
        cutoff = FockCutoff.of(cutoff)
        rho = embed(rho, cutoff)
    smoothed = not is_faithful(rho)
    if smoothed:
        rho = smooth(rho, eps)
    cut = rho.cutoff
    d = cut.dim
    p, u = np.linalg.eigh(hermitize(rho.entries))
    p = np.maximum(p, 0.0)
    maps, null = _commutator_maps(cut.per_mode)

    # work with matrix units in the eigenbasis of rho: vec(X) = M vec(X~)
    m_basis = np.kron(u, u.conj())
    gram_fock = 0.5 * (np.kron(rho.entries, np.eye(d)) + np.kron(np.eye(d), rho.entries.T))
    gram_diag = 0.5 * (p[:, None] + p[None, :]).ravel()
    dirichlet = np.zeros((d * d, d * d), dtype=complex)
    for lmap in maps:
        lt = lmap @ m_basis
        dirichlet += lt.conj().T @ gram_fock @ lt
    dirichlet = hermitize(dirichlet)

    # constraints: Gram-orthogonal to every gradient-null operator (this includes
    # the identity, i.e. tr(rho X) = 0)
    null_t = m_basis.conj().T @ null
    constraints = (null_t * gram_diag[:, None]).conj().T
    q = sla.null_space(constraints)
    gq = hermitize(q.conj().T @ (gram_diag[:, None] * q))
    aq = hermitize(q.conj().T @ dirichlet @ q)
    gw = np.linalg.eigvalsh(gq)
    bad = int(np.sum(gw <= GRAM_TOL * max(gw.max(), 1.0)))
    if bad:
        raise RankDeficiencyError(f"Gram matrix is singular on a subspace of dimension {bad}", deficient_dim=bad)
    # symmetric scaling keeps the generalized problem well conditioned
    scale = 1.0 / np.sqrt(np.real(np.diag(gq)))
    vals, vecs = sla.eigh(aq * np.outer(scale, scale), gq * np.outer(scale, scale))
    lam = float(vals[0])
    xt = (q @ (scale * vecs[:, 0])).reshape(d, d)
    x = u @ xt @ u.conj().T
    x = x / np.sqrt(sld_norm2(rho.entries, x))
    residual = float(abs(np.trace(rho.entries @ x)))
    return GapEstimate(max(lam, 0.0) if lam > -1e-9 else lam, cut, residual, x, null.shape[1] - 1, smoothed, rho)


def passive_invariance_check(rho: DensityMatrix, theta, cutoff=None) -> tuple[float, float]:
    """Gap estimates of ``rho`` and of ``U rho U^dag`` for ``U = exp(i theta a^dag a)``."""
    if cutoff is not None:
        rho = embed(rho, cutoff)
    u = phase_rotation(theta, rho.cutoff)
    rotated = DensityMatrix.from_matrix(u @ rho.entries @ u.conj().T, rho.cutoff, rho.tail_mass)
    return estimate_gap(rho).lambda_hat, estimate_gap(rotated).lambda_hat
