"""Distances and entropies between truncated states."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .charfn import PhaseGrid, plancherel_hs_norm
from .fock import DensityMatrix, FockCutoff, annihilation, as_matrix, embed_matrix, hermitize

CLAMP = 1e-12
SUPPORT_EPS = 1e-10
SUPPORT_MASS = 1e-8


@dataclass(frozen=True, eq=False)
class SpectralDecomp:
    """Eigenvalues in descending order with eigenvectors as columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    clamped: int = 0

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T


def spectral(a, clamp: bool = True) -> SpectralDecomp:
    """Eigendecomposition of the Hermitian part of ``a``.

    With ``clamp`` set, negative eigenvalues of magnitude at most 1e-12 are set
    to zero and counted.
    """
    w, v = np.linalg.eigh(hermitize(as_matrix(a)))
    w, v = w[::-1], v[:, ::-1]
    clamped = 0
    if clamp:
        small = (w < 0) & (w >= -CLAMP)
        clamped = int(small.sum())
        w = np.where(small, 0.0, w)
    return SpectralDecomp(w, v, clamped)


def aligned(rho: DensityMatrix, sigma: DensityMatrix) -> tuple[np.ndarray, np.ndarray, FockCutoff]:
    """Zero-pad both states to their common (larger) cutoff."""
    cut = rho.cutoff.union(sigma.cutoff)
    return embed_matrix(rho.entries, rho.cutoff, cut), embed_matrix(sigma.entries, sigma.cutoff, cut), cut


def trace_norm(t) -> float:
    return float(np.abs(np.linalg.svd(as_matrix(t), compute_uv=False)).sum())


def trace_distance(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """``||rho - sigma||_1`` (no factor 1/2, so the range is [0, 2])."""
    a, b, _ = aligned(rho, sigma)
    return float(np.abs(np.linalg.eigvalsh(hermitize(a - b))).sum())


def hs_distance(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    a, b, _ = aligned(rho, sigma)
    return float(np.linalg.norm(a - b))


def relative_entropy_report(rho: DensityMatrix, sigma: DensityMatrix) -> tuple[float, float]:
    """Return ``(D(rho || sigma), rho-mass outside the support of sigma)``.

    Natural logarithm.  ``D`` is ``inf`` when more than 1e-8 of the weight of
    ``rho`` lies on eigenvectors of ``sigma`` with eigenvalue at most 1e-10.
    """
    a, b, _ = aligned(rho, sigma)
    p, u = np.linalg.eigh(hermitize(a))
    q, v = np.linalg.eigh(hermitize(b))
    p = np.where(p > CLAMP, p, 0.0)
    overlap = np.abs(u.conj().T @ v) ** 2
    inside = q > SUPPORT_EPS
    outside_mass = float(p @ overlap[:, ~inside].sum(axis=1))
    if outside_mass > SUPPORT_MASS:
        return math.inf, outside_mass
    nz = p > 0
    ent = float(np.sum(p[nz] * np.log(p[nz])))
    # negligible weight on the numerical kernel of sigma is dropped; the rest of
    # the spectrum enters the cross term so both terms see the same eigenvalues
    pos = q > 0
    cross = float(p @ overlap[:, pos] @ np.log(q[pos]))
    return ent - cross, outside_mass


def relative_entropy(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    return relative_entropy_report(rho, sigma)[0]


def trace_norm_charfn_bound(t, cutoff=None, grid: PhaseGrid | None = None) -> tuple[float, float]:
    """Both sides of ``||T||_1^2 <= (pi^2/6)^m ||A^dag T A||_2^2`` with ``A = a_1 ... a_m``.

    The Hilbert-Schmidt norm on the right is evaluated by phase-space
    quadrature of ``|chi_{A^dag T A}|^2``.  ``A^dag T A`` is built on the space
    one level larger per mode, where it is exact for finite-support ``T``.
    """
    if isinstance(t, DensityMatrix):
        mat, cut = t.entries, t.cutoff
    else:
        mat = as_matrix(t)
        cut = FockCutoff.of(cutoff if cutoff is not None else mat.shape[0] - 1)
    lhs = trace_norm(mat) ** 2
    if lhs == 0.0:
        return 0.0, 0.0
    big = cut.enlarged(1)
    x = embed_matrix(mat, cut, big)
    a = np.eye(big.dim, dtype=complex)
    for j in range(cut.m):
        a = a @ annihilation(big, j).entries
    sandwiched = a.conj().T @ x @ a
    rhs = (math.pi**2 / 6) ** cut.m * plancherel_hs_norm(sandwiched, grid, big)
    return lhs, rhs
