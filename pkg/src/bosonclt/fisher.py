"""Functional calculus, SLD inner product, score operators and Fisher informations.

``Pi_rho^g(X)`` multiplies the entries of ``X`` in the eigenbasis of ``rho``
by ``g(p_k, p_l)`` where ``p_k`` belongs to the row and ``p_l`` to the column,
so that ``g(x, y) = x`` is left multiplication by ``rho``.

Quantities built from ``[a_j, rho]`` are by default evaluated on the space one
Fock level larger per mode (``exact=True``).  There ``a_j`` acts exactly on
the support of ``rho``, so identities such as ``tr(rho [a, a^dag]) = 1`` hold
to rounding error instead of picking up a cutoff defect.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .charfn import covariance
from .errors import SpectralError, UnsupportedFrameError
from .fock import DensityMatrix, FockCutoff, annihilation, as_matrix, embed_matrix, hermitize, partial_trace_matrix

CLAMP = 1e-12
FRAME_TOL = 1e-6
J_AGREE_TOL = 1e-6


@dataclass(frozen=True)
class KernelFn:
    """Bivariate kernel ``g(x, y)`` evaluated on pairs of eigenvalues."""

    label: str
    fn: Callable[[np.ndarray, np.ndarray], np.ndarray]

    def __call__(self, x, y) -> np.ndarray:
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        return self.fn(x, y)

    def __mul__(self, other: "KernelFn") -> "KernelFn":
        return KernelFn(f"{self.label}*{other.label}", lambda x, y: self(x, y) * other(x, y))


def _psi(x, y):
    return 0.5 * (x + y)


def _phi(x, y):
    s = x + y
    return np.where(s > CLAMP, 2.0 / np.where(s > CLAMP, s, 1.0), 0.0)


def _zeta(x, y):
    s = x + y
    return np.where(s > CLAMP, 2.0 * (x - y) ** 2 / np.where(s > CLAMP, s, 1.0), 0.0)


def _logmean(x, y):
    with np.errstate(divide="ignore", invalid="ignore"):
        lx, ly = np.log(x), np.log(y)
        val = (x - y) / (lx - ly)
    close = np.abs(x - y) <= 1e-12 * np.maximum(np.maximum(x, y), 1e-300)
    val = np.where(close, 0.5 * (x + y), val)
    return np.where((x <= 0) | (y <= 0), 0.0, val)


def _pos_sqrt(x):
    return np.sqrt(np.maximum(x, 0.0))


ONE = KernelFn("one", lambda x, y: np.ones_like(x))
PSI = KernelFn("psi", _psi)
PHI = KernelFn("phi", _phi)
ZETA = KernelFn("zeta", _zeta)
LOGMEAN = KernelFn("logmean", _logmean)


def lsi_g(beta: float) -> KernelFn:
    """``g(x, y) = (e^{beta/4} sqrt(y) - e^{-beta/4} sqrt(x))^2``."""
    up, down = math.exp(beta / 4), math.exp(-beta / 4)
    return KernelFn("lsi_g", lambda x, y: (up * _pos_sqrt(y) - down * _pos_sqrt(x)) ** 2)


def thermal_mu(beta: float) -> float:
    q = math.exp(-beta)
    return (1 + q) / (2 * (1 - q))


def lsi_h(beta: float) -> KernelFn:
    """``h(x, y) = (sqrt(2/(x+y)) (y - x) + sqrt((x+y)/2)/mu)^2`` with ``h(0, 0) = 0``."""
    inv_mu = 1.0 / thermal_mu(beta)

    def h(x, y):
        s = x + y
        safe = np.where(s > 0, s, 1.0)
        val = (np.sqrt(2.0 / safe) * (y - x) + inv_mu * np.sqrt(safe / 2.0)) ** 2
        return np.where(s > 0, val, 0.0)

    return KernelFn("lsi_h", h)


def custom_kernel(fn, label: str = "custom") -> KernelFn:
    return KernelFn(label, fn)


# ---------------------------------------------------------------------------


def eig_state(rho) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues clamped at zero and eigenvectors of the Hermitian part."""
    p, u = np.linalg.eigh(hermitize(as_matrix(rho)))
    return np.where(p > CLAMP, p, 0.0), u


def pi_apply(rho, g: KernelFn, x) -> np.ndarray:
    """``Pi_rho^g(X)``: entrywise ``g(p_k, p_l)`` in the eigenbasis of ``rho``."""
    p, u = eig_state(rho)
    x = as_matrix(x)
    if x.shape != (p.size, p.size):
        raise ValueError(f"operator shape {x.shape} does not match state dimension {p.size}")
    xt = u.conj().T @ x @ u
    return u @ (g(p[:, None], p[None, :]) * xt) @ u.conj().T


def kernel_form(rho, g: KernelFn, x) -> float:
    """``tr(X^dag Pi_rho^g(X)) = sum g(p_k, p_l) |X~_kl|^2``."""
    p, u = eig_state(rho)
    xt = u.conj().T @ as_matrix(x) @ u
    return float(np.sum(g(p[:, None], p[None, :]) * np.abs(xt) ** 2))


def sld_inner(rho, x, y) -> complex:
    """``<X, Y>_rho = tr(rho X^dag Y)/2 + tr(X^dag rho Y)/2``."""
    r, x, y = as_matrix(rho), as_matrix(x), as_matrix(y)
    xd = x.conj().T
    return complex(0.5 * np.trace(r @ xd @ y) + 0.5 * np.trace(xd @ r @ y))


def sld_norm2(rho, x) -> float:
    return float(sld_inner(rho, x, x).real)


# ---------------------------------------------------------------------------


def _working(rho: DensityMatrix, exact: bool) -> tuple[np.ndarray, FockCutoff]:
    if not exact:
        return rho.entries, rho.cutoff
    cut = rho.cutoff.enlarged(1)
    return embed_matrix(rho.entries, rho.cutoff, cut), cut


def check_frame(rho: DensityMatrix, tol: float = FRAME_TOL):
    """Raise unless ``rho`` has zero mean and per-mode covariance ``diag(nu_j, nu_j)``."""
    cov = covariance(rho)
    nu = np.diag(cov.gamma)[0::2]
    target = np.kron(np.diag(nu), np.eye(2))
    off = max(np.max(np.abs(cov.gamma - target)), np.max(np.abs(cov.d), initial=0.0))
    if off > tol:
        raise UnsupportedFrameError(
            f"state is not in Williamson form (deviation {off:.2e}); per-mode Fisher terms are frame dependent"
        )
    return cov


@dataclass(frozen=True, eq=False)
class ScoreOperator:
    """SLD score ``S_{rho,j} = Pi_rho^phi([a_j, rho])`` in the Fock basis of ``cutoff``.

    ``mask`` marks eigenbasis pairs with ``p_k + p_l <= 1e-12`` where the
    kernel was set to zero.
    """

    matrix: np.ndarray
    mode: int
    cutoff: FockCutoff
    mask: np.ndarray


def sld_score(rho: DensityMatrix, j: int = 0, exact: bool = True) -> ScoreOperator:
    r, cut = _working(rho, exact)
    a = annihilation(cut, j).entries
    p, u = eig_state(r)
    comm = u.conj().T @ (a @ r - r @ a) @ u
    s = p[:, None] + p[None, :]
    mask = s <= CLAMP
    st = np.where(mask, 0.0, 2.0 * comm / np.where(mask, 1.0, s))
    return ScoreOperator(u @ st @ u.conj().T, j, cut, mask)


def _per_mode_fisher(r: np.ndarray, cut: FockCutoff) -> np.ndarray:
    p, u = eig_state(r)
    z = _zeta(p[:, None], p[None, :])
    out = []
    for j in range(cut.m):
        at = u.conj().T @ annihilation(cut, j).entries @ u
        out.append(float(np.sum(z * np.abs(at) ** 2)))
    return np.array(out)


def sld_fisher(rho: DensityMatrix, exact: bool = True, frame: bool = True) -> tuple[float, np.ndarray]:
    """SLD Fisher information ``(I, [I_j])`` with ``I_j = sum zeta(p_k, p_l) |a~_kl|^2``."""
    if frame:
        check_frame(rho)
    r, cut = _working(rho, exact)
    per = _per_mode_fisher(r, cut)
    return float(per.sum()), per


def is_faithful(rho: DensityMatrix, tol: float = CLAMP) -> bool:
    return bool(np.linalg.eigvalsh(hermitize(rho.entries)).min() > tol)


def fisher_distance(rho: DensityMatrix, exact: bool = True) -> tuple[float, np.ndarray]:
    """``J = I - I(rho_G)`` as ``(J, [J_j])`` with ``J_j = I_j - 1/mu_j``.

    For faithful states the norm form ``||S_j + a_j/mu_j||^2_rho`` is also
    computed and must agree to 1e-6.
    """
    cov = check_frame(rho)
    total, per = sld_fisher(rho, exact, frame=False)
    j_vals = per - 1.0 / cov.mu
    if is_faithful(rho):
        r, cut = _working(rho, exact)
        for j in range(rho.m):
            s = sld_score(rho, j, exact).matrix
            a = annihilation(cut, j).entries
            norm_form = sld_norm2(r, s + a / cov.mu[j])
            if abs(norm_form - j_vals[j]) > J_AGREE_TOL * max(1.0, abs(j_vals[j])):
                raise SpectralError(
                    f"Fisher distance forms disagree in mode {j}: {norm_form!r} vs {j_vals[j]!r}"
                )
    return float(j_vals.sum()), j_vals


def kmb_fisher(rho: DensityMatrix) -> float:
    """Kubo-Mori-Bogoliubov Fisher information ``sum_j tr(rho [a_j^dag, [a_j, log rho]])``.

    Evaluated as ``sum |[a_j, rho]~_kl|^2 / logmean(p_k, p_l)`` on the truncated
    space.  Returns ``inf`` when ``rho`` has a kernel.
    """
    if not is_faithful(rho):
        return math.inf
    p, u = np.linalg.eigh(hermitize(rho.entries))
    lm = _logmean(p[:, None], p[None, :])
    total = 0.0
    for j in range(rho.m):
        a = annihilation(rho.cutoff, j).entries
        c = u.conj().T @ (a @ rho.entries - rho.entries @ a) @ u
        total += float(np.sum(np.abs(c) ** 2 / lm))
    return total


def lsi_dirichlet(rho: DensityMatrix, beta: float | Sequence[float], exact: bool = True) -> float:
    """``sum_j tr|e^{beta_j/4} a_j sqrt(rho) - e^{-beta_j/4} sqrt(rho) a_j|^2`` via the kernel form."""
    beta = np.broadcast_to(np.asarray(beta, dtype=float), (rho.m,))
    if np.any(~np.isfinite(beta)) or np.any(beta <= 0):
        raise ValueError("lsi_dirichlet needs finite positive beta for every mode (nu = 1 modes are excluded)")
    r, cut = _working(rho, exact)
    return float(sum(kernel_form(r, lsi_g(b), annihilation(cut, j).entries) for j, b in enumerate(beta)))


def lsi_alpha(beta: float | Sequence[float], m: int | None = None) -> float:
    """Log-Sobolev constant ``alpha`` as a function of ``beta_min`` and the mode count."""
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    if m is None:
        m = beta.size
    b = float(beta.min())
    if not b > 0:
        raise ValueError("beta_min must be positive")
    inv = (2 + math.log(2 * m + 1)) / math.sinh(b / 2) + b / (4 * math.sinh(b / 4) ** 2)
    return 1.0 / inv


def lsi_constant(beta: float) -> float:
    """``C = 8 e^{-3 beta/2} / (1 + e^{-beta})^2``."""
    return 8 * math.exp(-1.5 * beta) / (1 + math.exp(-beta)) ** 2


def scalar_gh_check(beta: float, points: int = 1000, x_max: float = 1.0) -> float:
    """Largest value of ``C g(x, y) - h(x, y)`` over a ``points x points`` grid on ``[0, x_max]^2``."""
    if not beta > 0:
        raise ValueError("beta must be positive")
    xs = np.linspace(0.0, x_max, points)
    x, y = np.meshgrid(xs, xs, indexing="ij")
    return float(np.max(lsi_constant(beta) * lsi_g(beta)(x, y) - lsi_h(beta)(x, y)))


def cauchy_schwarz_check(rho1, rho2, a, b) -> tuple[float, float]:
    """Both sides of ``||tr_1(Pi^psi_{rho1}(A) B)||_{2,rho2} <= ||A||_{2,rho1} ||B||_{2,rho1 (x) rho2}``.

    ``A`` acts on the first factor only and ``B`` on the product space.
    """
    r1, r2 = as_matrix(rho1), as_matrix(rho2)
    d1, d2 = r1.shape[0], r2.shape[0]
    left = np.kron(pi_apply(r1, PSI, a), np.eye(d2))
    t = partial_trace_matrix(left @ as_matrix(b), (d1, d2), [1])
    lhs = math.sqrt(max(sld_norm2(r2, t), 0.0))
    rhs = math.sqrt(max(sld_norm2(r1, a), 0.0)) * math.sqrt(max(sld_norm2(np.kron(r1, r2), b), 0.0))
    return lhs, rhs
