"""Gaussian states: thermal synthesis, Gaussification and Gaussian characteristic functions."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .charfn import CovarianceData, covariance
from .errors import UnsupportedFrameError
from .fock import DensityMatrix, FockCutoff
from .symplectic import williamson

FRAME_TOL = 1e-6
NU_TOL = 1e-8


def nu_to_beta(nu) -> np.ndarray:
    """``beta = log((nu + 1)/(nu - 1))``; ``nu = 1`` maps to ``+inf``."""
    nu = np.asarray(nu, dtype=float)
    if np.any(nu < 1 - NU_TOL):
        raise ValueError(f"symplectic eigenvalues must be >= 1, got {nu}")
    with np.errstate(divide="ignore"):
        return np.where(nu - 1 <= NU_TOL, np.inf, np.log((nu + 1) / np.maximum(nu - 1, NU_TOL)))


def beta_to_nu(beta) -> np.ndarray:
    q = np.exp(-np.asarray(beta, dtype=float))
    return (1 + q) / (1 - q)


def thermal_weights(nu: float, n: int) -> np.ndarray:
    """Unnormalized-by-truncation weights ``(1 - q) q^k`` for ``k = 0..n``."""
    q = max((nu - 1) / (nu + 1), 0.0)
    return (1 - q) * q ** np.arange(n + 1)


def thermal_state(nu, cutoff) -> DensityMatrix:
    """Product of thermal states with symplectic eigenvalues ``nu`` (one per mode).

    ``tail_mass`` records the weight beyond the cutoff before renormalizing.
    """
    cutoff = FockCutoff.of(cutoff)
    nu = np.broadcast_to(np.asarray(nu, dtype=float), (cutoff.m,))
    if np.any(nu < 1):
        raise ValueError(f"nu must be >= 1, got {nu}")
    diag = np.ones(1)
    for v, n in zip(nu, cutoff.per_mode):
        diag = np.kron(diag, thermal_weights(v, n))
    tail = max(1.0 - diag.sum(), 0.0)
    return DensityMatrix(cutoff, np.diag(diag / diag.sum()), tail)


@dataclass(frozen=True, eq=False)
class GaussianSpec:
    """Gaussian state given by first moments ``d`` and covariance ``gamma``."""

    d: np.ndarray
    gamma: np.ndarray
    nu: np.ndarray = field(default=None)
    S: np.ndarray = field(default=None, repr=False)
    beta: np.ndarray = field(default=None)

    def __post_init__(self):
        d = np.asarray(self.d, dtype=float)
        gamma = np.asarray(self.gamma, dtype=float)
        if gamma.shape != (d.size, d.size) or d.size % 2:
            raise ValueError("d must have length 2m and gamma shape 2m x 2m")
        s, nu = williamson(gamma)
        if np.any(nu < 1 - NU_TOL):
            raise ValueError(f"covariance is not physical: symplectic eigenvalues {nu}")
        nu = np.maximum(nu, 1.0)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "gamma", 0.5 * (gamma + gamma.T))
        object.__setattr__(self, "nu", nu)
        object.__setattr__(self, "S", s)
        object.__setattr__(self, "beta", nu_to_beta(nu))

    @property
    def m(self) -> int:
        return self.d.size // 2

    @property
    def mode_nu(self) -> np.ndarray:
        """Per-mode ``nu_j`` read off the diagonal (meaningful in the Williamson frame)."""
        return np.maximum(np.diag(self.gamma)[0::2], 1.0)

    @property
    def mode_beta(self) -> np.ndarray:
        return nu_to_beta(self.mode_nu)

    def in_williamson_frame(self, tol: float = FRAME_TOL) -> bool:
        if np.max(np.abs(self.d), initial=0.0) > tol:
            return False
        target = np.kron(np.diag(self.mode_nu), np.eye(2))
        return bool(np.max(np.abs(self.gamma - target)) <= tol)

    def state(self, cutoff) -> DensityMatrix:
        """Fock synthesis as a thermal product; only available in the Williamson frame."""
        if not self.in_williamson_frame():
            raise UnsupportedFrameError(
                "Fock synthesis needs zero mean and a per-mode diagonal covariance"
            )
        return thermal_state(self.mode_nu, cutoff)

    def char_fn(self, z) -> complex:
        return gaussian_char_fn(self, z)

    def to_json(self) -> dict:
        return {
            "d": self.d.tolist(),
            "gamma": self.gamma.tolist(),
            "nu": self.nu.tolist(),
            "beta": [float(b) if np.isfinite(b) else "inf" for b in self.beta],
        }

    @classmethod
    def from_json(cls, obj: Mapping | str) -> "GaussianSpec":
        if isinstance(obj, str):
            obj = json.loads(obj)
        return cls(np.asarray(obj["d"], float), np.asarray(obj["gamma"], float))


def gaussify(rho: DensityMatrix | CovarianceData) -> GaussianSpec:
    """Gaussian state with the same mean and covariance as ``rho``."""
    cov = rho if isinstance(rho, CovarianceData) else covariance(rho)
    return GaussianSpec(cov.d, cov.gamma)


def _xi(z: np.ndarray) -> np.ndarray:
    """``D_z = exp(i xi^T R)`` with ``xi = sqrt(2) (Im z_j, -Re z_j)`` per mode."""
    xi = np.empty(z.shape[:-1] + (2 * z.shape[-1],))
    xi[..., 0::2] = np.sqrt(2) * z.imag
    xi[..., 1::2] = -np.sqrt(2) * z.real
    return xi


def gaussian_char_fn(spec: GaussianSpec, z) -> complex | np.ndarray:
    """``exp(i xi^T d - xi^T gamma xi / 4)``; accepts a single ``z`` or an array ``(K, m)``."""
    z = np.asarray(z, dtype=complex)
    single = z.ndim == 0 or (z.ndim == 1 and z.size == spec.m)
    z = z.reshape(-1, spec.m)
    xi = _xi(z)
    quad = np.einsum("ki,ij,kj->k", xi, spec.gamma, xi)
    out = np.exp(1j * xi @ spec.d - 0.25 * quad)
    return complex(out[0]) if single else out
