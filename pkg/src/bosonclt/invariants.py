"""Property checks run by :func:`bosonclt.lab.run_invariant_suite`.

Each check takes ``(rng, sizes)`` and returns ``(violation, passed, detail)``.
"""

from __future__ import annotations

import math

import numpy as np

from .charfn import char_fn_many, covariance, plancherel_hs_norm
from .convolve import CutoffPolicy, beam_splitter, commutator_compat_check, convolve, iter_self_convolve, self_convolve
from .fisher import (
    ZETA,
    KernelFn,
    fisher_distance,
    is_faithful,
    kernel_form,
    pi_apply,
    sld_fisher,
)
from .fock import (
    DensityMatrix,
    FockCutoff,
    annihilation,
    build_pure_state,
    embed_matrix,
    hermitize,
    number,
    partial_trace,
    phase_rotation,
    random_state,
    tensor,
)
from .gaussian import thermal_state
from .metrics import hs_distance, relative_entropy, trace_distance
from .poincare import estimate_gap, gradient_norm, interior_projector
from .symplectic import symplectic_eigenvalues, symplectic_form, williamson


def example_state() -> DensityMatrix:
    return build_pure_state({0: 1.0, 3: 1.0}, 3)


def random_symplectic(m: int, rng) -> np.ndarray:
    """Product of a random orthogonal symplectic, single-mode squeezers and another one."""

    def passive():
        a = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
        u, _ = np.linalg.qr(a)
        x, y = u.real, u.imag
        o = np.zeros((2 * m, 2 * m))
        o[0::2, 0::2], o[0::2, 1::2] = x, -y
        o[1::2, 0::2], o[1::2, 1::2] = y, x
        return o

    r = rng.uniform(-0.8, 0.8, size=m)
    sq = np.diag(np.ravel(np.column_stack([np.exp(r), np.exp(-r)])))
    return passive() @ sq @ passive()


def random_states(rng, count, cutoff=4, m=1):
    for _ in range(count):
        yield random_state((cutoff,) * m, rng)


def _result(violation, tol, detail=""):
    return float(violation), bool(violation <= tol), detail


# fock ----------------------------------------------------------------------


def check_ccr(rng, sizes):
    worst = 0.0
    for n in range(1, 9):
        for m in (1, 2):
            cut = FockCutoff((n,) * m)
            inside = np.diag(interior_projector(cut)) > 0
            for j in range(m):
                a = annihilation(cut, j).entries
                comm = a @ a.conj().T - a.conj().T @ a
                worst = max(worst, np.abs(comm[np.ix_(inside, inside)] - np.eye(inside.sum())).max())
    return _result(worst, 1e-13)


def check_state_invariants(rng, sizes):
    worst = 0.0
    states = list(random_states(rng, sizes)) + [example_state()]
    states += [convolve(states[i], states[i + 1], rng.uniform()).output for i in range(len(states) - 1)]
    for s in states:
        ev = np.linalg.eigvalsh(hermitize(s.entries))
        worst = max(
            worst,
            max(-ev.min() - 1e-10, 0.0),
            max(abs(s.trace() - 1) - 1e-10, 0.0),
            max(np.abs(s.entries - s.entries.conj().T).max() - 1e-12, 0.0),
        )
    return _result(worst, 0.0)


def check_partial_trace_tensor(rng, sizes):
    worst = 0.0
    for _ in range(sizes):
        r, s = random_state(3, rng), random_state(2, rng)
        joint = tensor(r, s)
        worst = max(
            worst,
            np.abs(partial_trace(joint, [0]).entries - r.entries).max(),
            np.abs(partial_trace(joint, [1]).entries - s.entries).max(),
        )
    return _result(worst, 1e-12)


# charfn --------------------------------------------------------------------


def _random_z(rng, k, m=1, scale=1.5):
    return scale * (rng.standard_normal((k, m)) + 1j * rng.standard_normal((k, m)))


def check_chi_bounded(rng, sizes):
    worst = 0.0
    for s in list(random_states(rng, sizes)) + [example_state()]:
        worst = max(worst, np.abs(char_fn_many(s, _random_z(rng, 50))).max() - 1.0)
    return _result(max(worst, 0.0), 1e-9)


def check_chi_conjugate(rng, sizes):
    worst = 0.0
    for _ in range(sizes):
        g = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
        t = g + g.conj().T
        z = _random_z(rng, 30)
        worst = max(worst, np.abs(char_fn_many(t, -z) - np.conj(char_fn_many(t, z))).max())
    return _result(worst, 1e-12)


def check_plancherel(rng, sizes):
    worst = 0.0
    for _ in range(sizes):
        g = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        t = g + g.conj().T
        direct = np.trace(t.conj().T @ t).real
        worst = max(worst, abs(plancherel_hs_norm(t) - direct) / direct)
    return _result(worst, 1e-3)


def check_sup_chi_gap(rng, sizes):
    r = np.linspace(0.5, 6.0, 80)
    th = np.linspace(0, 2 * np.pi, 90, endpoint=False)
    z = (r[:, None] * np.exp(1j * th[None, :])).ravel()
    sup = np.abs(char_fn_many(example_state(), z)).max()
    delta = 1.0 - sup
    return float(max(-delta, 0.0)), bool(delta > 0), f"delta={delta:.4f}"


# gaussian ------------------------------------------------------------------


def check_williamson(rng, sizes):
    worst = 0.0
    for _ in range(sizes):
        m = int(rng.integers(1, 4))
        s0 = random_symplectic(m, rng)
        nu = np.sort(rng.uniform(1.0, 5.0, m))[::-1]
        gamma = s0 @ np.kron(np.diag(nu), np.eye(2)) @ s0.T
        s, got = williamson(gamma)
        om = symplectic_form(m)
        worst = max(
            worst,
            np.abs(s @ om @ s.T - om).max(),
            np.abs(s @ gamma @ s.T - np.kron(np.diag(got), np.eye(2))).max(),
            np.abs(got - nu).max(),
            np.abs(symplectic_eigenvalues(gamma) - nu).max(),
        )
    return _result(worst, 1e-8)


def check_thermal_covariance(rng, sizes):
    worst = 0.0
    for nu in (1.0, 1.5, 2.0, 4.0):
        t = thermal_state(nu, 60)
        worst = max(worst, np.abs(covariance(t).gamma - nu * np.eye(2)).max())
    return _result(worst, 1e-8)


def check_gaussian_fixed_point(rng, sizes):
    policy = CutoffPolicy(24, 1e-8)
    worst = 0.0
    for nu in (1.0, 2.0):
        t = thermal_state(nu, 20)
        out = self_convolve(t, 16, policy).output
        worst = max(worst, trace_distance(out, t))
    return _result(worst, 10 * policy.tail_budget)


# convolve ------------------------------------------------------------------


def check_moment_flow(rng, sizes):
    worst = 0.0
    for _ in range(sizes):
        r = random_state(3, rng, symmetry=None)
        s = random_state(3, rng, symmetry=None)
        eta = rng.uniform()
        out = convolve(r, s, eta).output
        cr, cs, co = covariance(r), covariance(s), covariance(out)
        worst = max(
            worst,
            np.abs(co.gamma - (eta * cr.gamma + (1 - eta) * cs.gamma)).max(),
            np.abs(co.d - (math.sqrt(eta) * cr.d + math.sqrt(1 - eta) * cs.d)).max(),
        )
    return _result(worst, 1e-8)


def check_photon_conservation(rng, sizes):
    worst = 0.0
    for _ in range(sizes):
        r = random_state(3, rng, symmetry=None)
        s = random_state(2, rng, symmetry=None)
        # the blocks with up to 5 photons are invariant, so work on cutoff (5, 5)
        u = beam_splitter(rng.uniform(), 5).unitary(5, 5)
        cut = FockCutoff((5, 5))
        joint = embed_matrix(np.kron(r.entries, s.entries), FockCutoff((3, 2)), cut)
        ntot = number(cut, 0).entries + number(cut, 1).entries
        before = np.trace(ntot @ joint).real
        after = np.trace(ntot @ u @ joint @ u.T).real
        worst = max(worst, abs(after - before))
    return _result(worst, 1e-12)


def check_symmetry(rng, sizes):
    worst = 0.0
    for _ in range(sizes):
        r = random_state(3, rng, symmetry=None)
        s = random_state(2, rng, symmetry=None)
        worst = max(worst, trace_distance(convolve(r, s, 0.5).output, convolve(s, r, 0.5).output))
    return _result(worst, 1e-10)


def check_passive_commutation(rng, sizes):
    worst = 0.0
    for _ in range(sizes):
        r = random_state(3, rng, symmetry=None)
        s = random_state(3, rng, symmetry=None)
        eta, theta = rng.uniform(), rng.uniform(0, 2 * np.pi)

        def rot(x):
            u = phase_rotation(theta, x.cutoff)
            return DensityMatrix.from_matrix(u @ x.entries @ u.conj().T, x.cutoff)

        z = _random_z(rng, 20)
        lhs = char_fn_many(rot(convolve(r, s, eta).output), z)
        rhs = char_fn_many(convolve(rot(r), rot(s), eta).output, z)
        worst = max(worst, np.abs(lhs - rhs).max())
    return _result(worst, 1e-10)


def check_commutation_lemma(rng, sizes):
    worst = commutator_compat_check(example_state(), thermal_state(1.0, 2), 0.5)
    for _ in range(sizes):
        r = random_state(3, rng, symmetry=None)
        s = random_state(3, rng, symmetry=None)
        worst = max(worst, commutator_compat_check(r, s, rng.uniform(0.05, 0.95)))
    return _result(worst, 1e-8)


def check_mutation_detected(rng, sizes):
    dev = commutator_compat_check(example_state(), thermal_state(2.0, 3), 0.3, _sign=1)
    return float(dev), bool(dev > 1e-3), "sign-flipped generator must break the commutation identity"


# metrics -------------------------------------------------------------------


def _pairs(rng, sizes):
    states = list(random_states(rng, sizes, cutoff=3)) + [example_state(), thermal_state(2.0, 3)]
    return [(a, b) for i, a in enumerate(states) for b in states[i + 1 :]]


def check_pinsker(rng, sizes):
    worst = -math.inf
    for a, b in _pairs(rng, sizes):
        d = relative_entropy(a, b)
        if np.isfinite(d):
            worst = max(worst, 0.5 * trace_distance(a, b) ** 2 - d)
    return _result(max(worst, 0.0), 1e-9)


def check_triangle(rng, sizes):
    states = list(random_states(rng, sizes + 2, cutoff=3))
    worst = 0.0
    for i in range(len(states) - 2):
        a, b, c = states[i : i + 3]
        worst = max(worst, trace_distance(a, c) - trace_distance(a, b) - trace_distance(b, c))
    return _result(max(worst, 0.0), 1e-9)


def check_relent_nonneg(rng, sizes):
    worst = 0.0
    for a, b in _pairs(rng, sizes):
        d = relative_entropy(a, b)
        worst = max(worst, -d)
        if trace_distance(a, b) > 1e-8:
            worst = max(worst, float(d <= 0))
    for a in random_states(rng, sizes, cutoff=3):
        worst = max(worst, abs(relative_entropy(a, a)))
    return _result(worst, 1e-9)


def check_hs_le_trace(rng, sizes):
    worst = 0.0
    for a, b in _pairs(rng, sizes):
        worst = max(worst, hs_distance(a, b) - trace_distance(a, b))
    return _result(max(worst, 0.0), 1e-12)


# fisher --------------------------------------------------------------------


def check_fisher_sandwich(rng, sizes):
    worst = 0.0
    states = list(random_states(rng, sizes, cutoff=5)) + [example_state(), thermal_state(2.0, 20)]
    for s in states:
        _, per = sld_fisher(s)
        mu = covariance(s).mu
        worst = max(worst, np.max(1.0 / mu - per), np.max(per - 4 * mu * (1 + 1e-8)))
    return _result(max(worst, 0.0), 1e-9)


def check_kernel_monotonicity(rng, sizes):
    bigger = KernelFn("2(x+y)", lambda x, y: 2 * (x + y))
    worst = 0.0
    for s in random_states(rng, sizes):
        x = rng.standard_normal((s.dim, s.dim)) + 1j * rng.standard_normal((s.dim, s.dim))
        worst = max(worst, kernel_form(s, ZETA, x) - kernel_form(s, bigger, x))
    return _result(max(worst, 0.0), 1e-10)


def check_self_adjoint(rng, sizes):
    worst = 0.0
    for s in random_states(rng, sizes):
        x = rng.standard_normal((s.dim, s.dim)) + 1j * rng.standard_normal((s.dim, s.dim))
        y = rng.standard_normal((s.dim, s.dim)) + 1j * rng.standard_normal((s.dim, s.dim))
        lhs = np.trace(x.conj().T @ pi_apply(s, ZETA, y))
        rhs = np.trace(pi_apply(s, ZETA, x).conj().T @ y)
        worst = max(worst, abs(lhs - rhs))
    return _result(worst, 1e-10)


def check_j_forms(rng, sizes):
    # fisher_distance raises when the two forms disagree on a faithful state
    worst = 0.0
    for s in random_states(rng, sizes):
        if is_faithful(s):
            j, _ = fisher_distance(s)
            worst = max(worst, -j)
    return _result(max(worst, 0.0), 1e-9)


def check_pure_saturation(rng, sizes):
    worst = 0.0
    for _ in range(sizes):
        s = random_state(6, rng, rank=1)
        _, per = sld_fisher(s)
        worst = max(worst, abs(per[0] - 4 * covariance(s).mu[0]))
    return _result(worst, 1e-8)


# poincare ------------------------------------------------------------------


def check_gap_nonneg(rng, sizes):
    worst = 0.0
    for s in random_states(rng, sizes, cutoff=3):
        worst = max(worst, -estimate_gap(s).lambda_hat)
    return _result(max(worst, 0.0), 1e-9)


def check_gap_stability(rng, sizes):
    worst = 0.0
    for nu in (1.5, 2.0):
        lo = estimate_gap(thermal_state(nu, 8)).lambda_hat
        hi = estimate_gap(thermal_state(nu, 16)).lambda_hat
        worst = max(worst, abs(lo - hi) / hi)
    return _result(worst, 0.05)


def check_rayleigh(rng, sizes):
    worst = 0.0
    for s in list(random_states(rng, sizes, cutoff=3)) + [thermal_state(2.0, 8)]:
        g = estimate_gap(s)
        worst = max(worst, abs(gradient_norm(g.state, g.eigenvector) - g.lambda_hat))
    return _result(worst, 1e-8)


# lab -----------------------------------------------------------------------


def check_j_contraction(rng, sizes):
    rho = example_state()
    lam = estimate_gap(rho, cutoff=10).lambda_hat
    j0, _ = fisher_distance(rho)
    i0, _ = sld_fisher(rho)
    series = {}
    for n, rep in enumerate(iter_self_convolve(rho, 16, CutoffPolicy(48)), start=1):
        if n in (1, 2, 4, 8, 16):
            series[n] = fisher_distance(rep.output)[0]
    worst = max(series[n] - j0 / (1 + lam / (4 * i0) * (n - 1)) for n in (2, 4, 8, 16))
    vals = [series[n] for n in sorted(series)]
    worst = max(worst, max(b - a for a, b in zip(vals, vals[1:])))
    return _result(max(worst, 0.0), 1e-9, f"lambda_hat={lam:.3e} (smoothed example state)")


CHECKS = [
    ("fock.ccr_interior", check_ccr),
    ("fock.state_invariants", check_state_invariants),
    ("fock.partial_trace_tensor", check_partial_trace_tensor),
    ("charfn.chi_bounded", check_chi_bounded),
    ("charfn.chi_conjugate_symmetry", check_chi_conjugate),
    ("charfn.plancherel", check_plancherel),
    ("charfn.sup_chi_gap", check_sup_chi_gap),
    ("gaussian.williamson_roundtrip", check_williamson),
    ("gaussian.thermal_covariance", check_thermal_covariance),
    ("gaussian.fixed_point", check_gaussian_fixed_point),
    ("convolve.moment_flow", check_moment_flow),
    ("convolve.photon_conservation", check_photon_conservation),
    ("convolve.symmetry", check_symmetry),
    ("convolve.passive_commutation", check_passive_commutation),
    ("convolve.commutation_lemma", check_commutation_lemma),
    ("convolve.mutation_detected", check_mutation_detected),
    ("metrics.pinsker", check_pinsker),
    ("metrics.triangle", check_triangle),
    ("metrics.relent_nonneg", check_relent_nonneg),
    ("metrics.hs_le_trace", check_hs_le_trace),
    ("fisher.sandwich", check_fisher_sandwich),
    ("fisher.kernel_monotonicity", check_kernel_monotonicity),
    ("fisher.self_adjoint", check_self_adjoint),
    ("fisher.j_forms", check_j_forms),
    ("fisher.pure_saturation", check_pure_saturation),
    ("poincare.nonneg", check_gap_nonneg),
    ("poincare.stability", check_gap_stability),
    ("poincare.rayleigh", check_rayleigh),
    ("lab.j_contraction", check_j_contraction),
]
