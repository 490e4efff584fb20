"""Symplectic form and Williamson normal form of covariance matrices."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import sqrtm

from .errors import SpectralError

UNCERTAINTY_TOL = 1e-8


@dataclass(frozen=True)
class SymplecticForm:
    """``Omega_m``: block diagonal with ``[[0, 1], [-1, 0]]`` blocks, ordering ``(x_1, p_1, ..., x_m, p_m)``."""

    m: int

    @property
    def matrix(self) -> np.ndarray:
        return np.kron(np.eye(self.m), np.array([[0.0, 1.0], [-1.0, 0.0]]))

    def is_symplectic(self, s: np.ndarray, tol: float = 1e-8) -> bool:
        om = self.matrix
        return bool(np.max(np.abs(s @ om @ s.T - om)) <= tol)


def symplectic_form(m: int) -> np.ndarray:
    return SymplecticForm(m).matrix


def symplectic_eigenvalues(gamma: np.ndarray) -> np.ndarray:
    """``|eig(i Omega gamma)|``, each value once, sorted descending."""
    gamma = np.asarray(gamma, dtype=float)
    m = gamma.shape[0] // 2
    ev = np.abs(np.linalg.eigvals(1j * symplectic_form(m) @ gamma))
    return np.sort(ev)[::-1][::2]


def uncertainty_violation(gamma: np.ndarray) -> float:
    """Largest negative part of ``gamma + i Omega`` (0 for physical covariances)."""
    gamma = np.asarray(gamma, dtype=float)
    m = gamma.shape[0] // 2
    low = np.linalg.eigvalsh(gamma + 1j * symplectic_form(m)).min()
    return float(max(-low, 0.0))


def williamson(gamma: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Williamson decomposition of a positive definite covariance matrix.

    Returns ``(S, nu)`` with ``S`` symplectic, ``S gamma S^T = diag(nu_1, nu_1,
    ..., nu_m, nu_m)`` and ``nu`` sorted in descending order.

    The eigenvectors ``w = x + i p`` of ``gamma Omega`` with eigenvalues ``i nu``
    give the columns ``(x, p)`` of ``S^{-1}``.  They are obtained from the
    Hermitian matrix ``i gamma^{1/2} Omega gamma^{1/2}`` (similar to
    ``i Omega gamma`` up to a transpose), which yields an orthonormal basis
    inside degenerate blocks for free.  Each ``w`` is rotated so its
    largest-modulus entry is real and positive.
    """
    gamma = np.asarray(gamma, dtype=float)
    if gamma.ndim != 2 or gamma.shape[0] != gamma.shape[1] or gamma.shape[0] % 2:
        raise SpectralError(f"covariance must be 2m x 2m, got shape {gamma.shape}")
    gamma = 0.5 * (gamma + gamma.T)
    evals = np.linalg.eigvalsh(gamma)
    if evals.min() <= 0:
        raise SpectralError(f"covariance is not positive definite (min eigenvalue {evals.min():.3e})")
    m = gamma.shape[0] // 2
    om = symplectic_form(m)
    root = np.real(sqrtm(gamma))
    root = 0.5 * (root + root.T)
    herm = 1j * root @ om @ root
    lam, vecs = np.linalg.eigh(0.5 * (herm + herm.conj().T))
    # eigenvalues come in +-nu pairs; i A v = -nu v  <=>  gamma Omega w = i nu w
    order = np.argsort(lam)[:m]
    nu = -lam[order]
    t = np.zeros_like(gamma)
    for col, (k, n) in enumerate(zip(order, nu)):
        w = np.sqrt(2.0 / n) * (root @ vecs[:, k])
        lead = w[np.argmax(np.abs(w))]
        w = w * np.conj(lead) / abs(lead)
        t[:, 2 * col] = w.real
        t[:, 2 * col + 1] = w.imag
    s = -om @ t.T @ om
    return s, nu
