"""Characteristic functions, Wigner functions, Plancherel norms and moments.

Conventions: ``D_z = exp(z a^dag - conj(z) a)``, ``chi_T(z) = tr(T D_z)``,
``R = (x_1, p_1, ..., x_m, p_m)`` with ``a = (x + i p)/sqrt(2)`` and the
covariance ``gamma = tr(rho {R - d, (R - d)^T})`` so the vacuum has
``gamma = I``.
"""

from __future__ import annotations

import csv
import io
import itertools
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import GridTooSmallError
from .fock import (
    DensityMatrix,
    FockCutoff,
    ModeOperator,
    annihilation,
    as_matrix,
    displacement_matrices,
    embed_matrix,
    quadratures,
)
from .symplectic import uncertainty_violation, williamson

BOUNDARY_TARGET = 1e-10
BOUNDARY_LIMIT = 1e-6
CHUNK = 2048


def _operator_and_cutoff(t, cutoff=None) -> tuple[np.ndarray, FockCutoff]:
    if isinstance(t, (DensityMatrix, ModeOperator)):
        return t.entries, t.cutoff
    t = np.asarray(t, dtype=complex)
    if cutoff is None:
        cutoff = FockCutoff((t.shape[0] - 1,))
    return t, FockCutoff.of(cutoff)


def char_fn_many(t, zs, cutoff=None) -> np.ndarray:
    """``chi_T`` at every row of ``zs`` (shape ``(K, m)``, or ``(K,)`` for one mode)."""
    mat, cut = _operator_and_cutoff(t, cutoff)
    zs = np.asarray(zs, dtype=complex)
    if zs.ndim == 1:
        zs = zs[:, None] if cut.m == 1 else zs[None, :]
    if zs.shape[1] != cut.m:
        raise ValueError(f"z must have {cut.m} components")
    if not np.all(np.isfinite(zs)):
        raise ValueError("z must be finite")
    m = cut.m
    tens = mat.reshape(cut.dims + cut.dims)
    out = np.empty(zs.shape[0], dtype=complex)
    letters = "abcdefgh"
    rows, cols = letters[:m], letters[m : 2 * m]
    # chi = sum T[n, q] prod_j D_j[q_j, n_j]
    spec = rows + cols + "".join(f",K{c}{r}" for r, c in zip(rows, cols)) + "->K"
    for start in range(0, zs.shape[0], CHUNK):
        chunk = zs[start : start + CHUNK]
        ds = [displacement_matrices(chunk[:, j], cut.per_mode[j]) for j in range(m)]
        out[start : start + CHUNK] = np.einsum(spec, tens, *ds, optimize=True)
    return out


def char_fn(t, z, cutoff=None) -> complex:
    """``chi_T(z) = tr(T D_z)`` evaluated with exact displacement elements."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    return complex(char_fn_many(t, z[None, :], cutoff)[0])


@dataclass(frozen=True, eq=False)
class PhaseGrid:
    """Tensor quadrature on the box ``[-R, R]^{2m}`` of ``(Re z_j, Im z_j)``.

    ``scheme`` is ``"gauss"`` (Gauss-Legendre) or ``"trapezoid"``.
    """

    radius: float
    points: int
    m: int = 1
    scheme: str = "gauss"
    nodes: np.ndarray = field(init=False, repr=False)
    weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.radius <= 0 or self.points < 2:
            raise ValueError("grid needs a positive radius and at least two points")
        if self.scheme == "gauss":
            x, w = np.polynomial.legendre.leggauss(self.points)
            x, w = self.radius * x, self.radius * w
        elif self.scheme == "trapezoid":
            x = np.linspace(-self.radius, self.radius, self.points)
            w = np.full(self.points, x[1] - x[0])
            w[[0, -1]] *= 0.5
        else:
            raise ValueError(f"unknown quadrature scheme {self.scheme!r}")
        axes = np.array(list(itertools.product(range(self.points), repeat=2 * self.m)))
        coords = x[axes]
        nodes = coords[:, 0::2] + 1j * coords[:, 1::2]
        weights = np.prod(w[axes], axis=1)
        nodes.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    def boundary_nodes(self, samples: int = 64) -> np.ndarray:
        """Points on the faces of the box, used for the decay check."""
        s = np.linspace(-self.radius, self.radius, samples)
        pts = []
        for j in range(self.m):
            for part in (0, 1):
                for edge in (-self.radius, self.radius):
                    z = np.zeros((samples, self.m), dtype=complex)
                    z[:, j] = edge + 1j * s if part == 0 else s + 1j * edge
                    pts.append(z)
        return np.concatenate(pts)


@dataclass(frozen=True, eq=False)
class CharSample:
    grid: PhaseGrid
    values: np.ndarray
    source: str = "operator"

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        header = []
        for j in range(self.grid.m):
            header += [f"re(z_{j + 1})", f"im(z_{j + 1})"]
        writer.writerow(header + ["re(chi)", "im(chi)"])
        for z, v in zip(self.grid.nodes, self.values):
            row = []
            for zj in z:
                row += [repr(float(zj.real)), repr(float(zj.imag))]
            writer.writerow(row + [repr(float(v.real)), repr(float(v.imag))])
        return buf.getvalue()

    @staticmethod
    def read_csv(text: str) -> tuple[np.ndarray, np.ndarray]:
        """Parse CSV text back into ``(nodes, values)``."""
        rows = list(csv.reader(io.StringIO(text)))
        data = np.array(rows[1:], dtype=float)
        z = data[:, :-2:2] + 1j * data[:, 1:-2:2]
        return z, data[:, -2] + 1j * data[:, -1]


def sample(t, grid: PhaseGrid, cutoff=None, source: str | None = None) -> CharSample:
    vals = char_fn_many(t, grid.nodes, cutoff)
    vals.setflags(write=False)
    if source is None:
        source = "density" if isinstance(t, DensityMatrix) else "operator"
    return CharSample(grid, vals, source)


def boundary_max(t, grid: PhaseGrid, cutoff=None) -> float:
    return float(np.max(np.abs(char_fn_many(t, grid.boundary_nodes(), cutoff))))


def check_grid(t, grid: PhaseGrid, cutoff=None, limit: float = BOUNDARY_LIMIT) -> float:
    edge = boundary_max(t, grid, cutoff)
    scale = max(np.abs(as_matrix(t)).max(), 1e-300)
    if edge > limit * scale:
        raise GridTooSmallError(f"|chi| reaches {edge:.2e} on the boundary of radius {grid.radius}")
    return edge


def auto_grid(t, cutoff=None, points: int | None = None, scheme: str = "gauss", target: float = BOUNDARY_TARGET) -> PhaseGrid:
    """Smallest radius (in steps of 0.5) at which boundary ``|chi|`` drops below ``target``."""
    _, cut = _operator_and_cutoff(t, cutoff)
    scale = max(np.abs(as_matrix(t)).max(), 1e-300)
    radius = 3.0
    while True:
        probe = PhaseGrid(radius, 2, cut.m)
        if boundary_max(t, probe, cutoff) <= target * scale or radius > 40:
            break
        radius += 0.5
    if points is None:
        # integrand is a polynomial of degree ~4N times a Gaussian
        points = int(min(max(24, 2 * radius + 4 * max(cut.per_mode) + 16), 140 if cut.m == 1 else 24))
    return PhaseGrid(radius, points, cut.m, scheme)


def wigner(t, z, grid: PhaseGrid | None = None, cutoff=None, imag_tol: float = 1e-6) -> complex:
    """Wigner function ``(1/pi^{2m}) int chi_T(w) exp(z^T conj(w) - conj(z)^T w) d^{2m}w``.

    Returned as complex.  For Hermitian ``T`` an imaginary part above
    ``imag_tol`` triggers a warning since it signals quadrature error.
    """
    mat, cut = _operator_and_cutoff(t, cutoff)
    if grid is None:
        grid = auto_grid(t, cutoff)
    check_grid(t, grid, cutoff)
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    w = grid.nodes
    chi = char_fn_many(t, w, cutoff)
    phase = np.exp(w.conj() @ z - w @ z.conj())
    val = np.sum(grid.weights * chi * phase) / np.pi ** (2 * cut.m)
    if np.allclose(mat, mat.conj().T, atol=1e-12) and abs(val.imag) > imag_tol:
        warnings.warn(f"Wigner value has imaginary part {val.imag:.2e}", RuntimeWarning, stacklevel=2)
    return complex(val)


def plancherel_hs_norm(t, grid: PhaseGrid | None = None, cutoff=None) -> float:
    """``(1/pi^m) int |chi_T|^2``, which equals ``tr(T^dag T)``."""
    _, cut = _operator_and_cutoff(t, cutoff)
    if grid is None:
        grid = auto_grid(t, cutoff)
    check_grid(t, grid, cutoff)
    chi = char_fn_many(t, grid.nodes, cutoff)
    return float(np.sum(grid.weights * np.abs(chi) ** 2) / np.pi**cut.m)


def moment(rho: DensityMatrix, kappa: float) -> float:
    """``tr(rho (H + m)^{kappa/2})`` with ``H`` the total number operator."""
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    levels = rho.cutoff.total_photons() + rho.m
    return float(np.real(np.diag(rho.entries)) @ (levels ** (kappa / 2.0)))


@dataclass(frozen=True, eq=False)
class CovarianceData:
    d: np.ndarray
    gamma: np.ndarray
    nu: np.ndarray
    mu: np.ndarray
    violation: float = 0.0

    @property
    def physical(self) -> bool:
        return self.violation <= 1e-8


def first_moments(rho: DensityMatrix) -> np.ndarray:
    cut = rho.cutoff.enlarged(1)
    x = embed_matrix(rho.entries, rho.cutoff, cut)
    return np.array([np.trace(x @ r).real for r in quadratures(cut)])


def covariance(rho: DensityMatrix) -> CovarianceData:
    """Mean vector, covariance, symplectic eigenvalues and ``mu_j = <a_j^dag a_j> + 1/2``.

    Moments are taken on the state embedded one Fock level higher per mode,
    where every second moment of the finite-support state is exact.
    """
    cut = rho.cutoff.enlarged(1)
    x = embed_matrix(rho.entries, rho.cutoff, cut)
    r = quadratures(cut)
    d = np.array([np.trace(x @ ri).real for ri in r])
    n = len(r)
    gamma = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            val = np.trace(x @ (r[i] @ r[j] + r[j] @ r[i])).real - 2 * d[i] * d[j]
            gamma[i, j] = gamma[j, i] = val
    mu = np.array(
        [np.trace(x @ annihilation(cut, j).H.entries @ annihilation(cut, j).entries).real + 0.5 for j in range(rho.m)]
    )
    violation = uncertainty_violation(gamma)
    _, nu = williamson(gamma)
    if violation > 1e-8:
        warnings.warn(
            f"covariance violates the uncertainty relation by {violation:.2e}; truncation damage likely",
            RuntimeWarning,
            stacklevel=2,
        )
    return CovarianceData(d, gamma, nu, mu, violation)
