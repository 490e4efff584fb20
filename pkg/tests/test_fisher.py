import math

import numpy as np
import pytest

from bosonclt.errors import UnsupportedFrameError
from bosonclt.fisher import (
    ONE,
    PHI,
    PSI,
    ZETA,
    cauchy_schwarz_check,
    custom_kernel,
    fisher_distance,
    is_faithful,
    kernel_form,
    kmb_fisher,
    lsi_alpha,
    lsi_constant,
    lsi_dirichlet,
    pi_apply,
    scalar_gh_check,
    sld_fisher,
    sld_inner,
    sld_norm2,
    sld_score,
)
from bosonclt.fock import (
    annihilation,
    build_pure_state,
    displacement,
    embed_matrix,
    random_state,
    vacuum,
)
from bosonclt.gaussian import nu_to_beta, thermal_state
from bosonclt.charfn import covariance
from bosonclt.lab import thermal_reference
from bosonclt.metrics import relative_entropy

from conftest import random_hermitian


def lyapunov_score(r, a):
    """Minimum-norm solution of ``r S + S r = 2 [a, r]`` by least squares on the vectorized map."""
    d = r.shape[0]
    eye = np.eye(d)
    lmap = np.kron(r, eye) + np.kron(eye, r.T)
    rhs = (2 * (a @ r - r @ a)).reshape(-1)
    s, *_ = np.linalg.lstsq(lmap, rhs, rcond=1e-13)
    return s.reshape(d, d)


def oracle_fisher(rho):
    cut = rho.cutoff.enlarged(1)
    r = embed_matrix(rho.entries, rho.cutoff, cut)
    total = 0.0
    for j in range(rho.m):
        s = lyapunov_score(r, annihilation(cut, j).entries)
        total += 0.5 * np.trace(r @ (s.conj().T @ s + s @ s.conj().T)).real
    return total


class TestFunctionalCalculus:
    def test_one_is_identity(self, rng):
        rho = random_state(4, rng)
        x = rng.normal(size=(5, 5))
        assert np.allclose(pi_apply(rho, ONE, x), x)

    def test_psi_is_jordan_product(self, rng):
        rho = random_state(4, rng)
        x = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
        r = rho.entries
        assert np.allclose(pi_apply(rho, PSI, x), (r @ x + x @ r) / 2)

    def test_composition(self, rng):
        rho = random_state(4, rng)
        x = rng.normal(size=(5, 5))
        g1 = custom_kernel(lambda a, b: 1 + a * b, "g1")
        g2 = custom_kernel(lambda a, b: np.exp(a - b), "g2")
        lhs = pi_apply(rho, g1, pi_apply(rho, g2, x))
        assert np.allclose(lhs, pi_apply(rho, g1 * g2, x), atol=1e-10)

    def test_phi_inverts_psi_on_support(self, rng):
        rho = random_state(3, rng)
        x = rng.normal(size=(4, 4))
        assert np.allclose(pi_apply(rho, PHI * PSI, x), x)

    def test_kernel_form_nonneg(self, rng):
        rho = random_state(4, rng)
        assert kernel_form(rho, ZETA, rng.normal(size=(5, 5))) >= 0

    def test_shape_mismatch(self, rho_ex):
        with pytest.raises(ValueError):
            pi_apply(rho_ex, ONE, np.eye(3))


class TestSLDInner:
    def test_identity(self, rho_ex):
        assert sld_inner(rho_ex, np.eye(4), np.eye(4)) == pytest.approx(1)

    @pytest.mark.parametrize("nu", [1.5, 3.0])
    def test_thermal_mu(self, nu):
        t = thermal_state(nu, 150)
        a = annihilation(150).entries
        assert sld_norm2(t, a) == pytest.approx(nu / 2, rel=1e-9)

    def test_example_cross_term(self):
        rho = build_pure_state({0: 1, 3: 1}, 4)
        a = annihilation(4).entries
        assert abs(sld_inner(rho, a, a.conj().T)) < 1e-15

    def test_conjugate_symmetric(self, rng):
        rho = random_state(3, rng)
        x, y = random_hermitian(rng, 4), rng.normal(size=(4, 4))
        assert sld_inner(rho, x, y) == pytest.approx(np.conj(sld_inner(rho, y, x)))


class TestScore:
    def test_thermal_score(self):
        nu = 2.0
        t = thermal_state(nu, 30)
        s = sld_score(t).matrix
        a = annihilation(31).entries
        # away from the cutoff edge the score is -a / mu
        assert np.allclose(s[:25, :25], -a[:25, :25] / (nu / 2), atol=1e-9)

    def test_inner_with_a_is_minus_one(self, rng):
        rho = random_state(4, rng)
        sc = sld_score(rho)
        cut = sc.cutoff
        r = embed_matrix(rho.entries, rho.cutoff, cut)
        assert sld_inner(r, sc.matrix, annihilation(cut).entries) == pytest.approx(-1, abs=1e-10)

    def test_example_pure_state(self, rho_ex):
        sc = sld_score(rho_ex)
        r = embed_matrix(rho_ex.entries, rho_ex.cutoff, sc.cutoff)
        comm = annihilation(sc.cutoff).entries @ r - r @ annihilation(sc.cutoff).entries
        p, u = np.linalg.eigh(r)
        st = u.conj().T @ sc.matrix @ u
        ct = u.conj().T @ comm @ u
        pure = np.isclose(p, 1)
        kern = ~pure
        assert np.allclose(st[np.ix_(pure, kern)], 2 * ct[np.ix_(pure, kern)])
        assert np.allclose(st[np.ix_(kern, kern)], 0)

    def test_matches_lyapunov_oracle(self, rng):
        rho = random_state(3, rng)
        sc = sld_score(rho)
        r = embed_matrix(rho.entries, rho.cutoff, sc.cutoff)
        assert np.allclose(sc.matrix, lyapunov_score(r, annihilation(sc.cutoff).entries), atol=1e-9)


class TestFisher:
    def test_vacuum(self):
        assert sld_fisher(vacuum(3))[0] == pytest.approx(2)

    @pytest.mark.parametrize("nu", [1.5, 2.0, 4.0])
    def test_thermal(self, nu):
        assert sld_fisher(thermal_reference(nu, 20))[0] == pytest.approx(2 / nu, abs=1e-6)

    def test_example(self, rho_ex):
        total, per = sld_fisher(rho_ex)
        assert total == pytest.approx(8, abs=1e-12)
        assert per == pytest.approx([8])

    def test_random_states_match_oracle(self, rng):
        for _ in range(4):
            rho = random_state(4, rng)
            assert sld_fisher(rho)[0] == pytest.approx(oracle_fisher(rho), rel=1e-8)

    def test_pure_state_formula(self, rng):
        # centered pure states: I = 2(<a a^dag> + <a^dag a>) = 4<N> + 2
        for _ in range(4):
            psi = random_state(6, rng, rank=1)
            n_mean = float(np.diag(psi.entries).real @ np.arange(7))
            assert sld_fisher(psi)[0] == pytest.approx(4 * n_mean + 2, rel=1e-10)

    def test_sandwich(self, rng):
        for _ in range(10):
            rho = random_state(5, rng)
            mu = covariance(rho).mu[0]
            i = sld_fisher(rho)[0]
            assert 1 / mu <= i <= 4 * mu * (1 + 1e-8)

    def test_two_mode(self, rng):
        rho = random_state((2, 2), rng)
        total, per = sld_fisher(rho)
        assert total == pytest.approx(per.sum())
        assert total == pytest.approx(oracle_fisher(rho), rel=1e-8)

    def test_frame_required(self):
        alpha = 0.5
        rho = build_pure_state(dict(enumerate(displacement(alpha, 30).entries[:, 0])), 30)
        with pytest.raises(UnsupportedFrameError):
            sld_fisher(rho)
        assert sld_fisher(rho, frame=False)[0] > 0

    def test_faithful(self, rho_ex):
        assert not is_faithful(rho_ex)
        assert is_faithful(thermal_state(2, 5))


class TestFisherDistance:
    def test_example(self, rho_ex):
        assert fisher_distance(rho_ex)[0] == pytest.approx(7.5, abs=1e-12)

    @pytest.mark.parametrize("nu", [1.0, 2.0, 4.0])
    def test_gaussian_zero(self, nu):
        assert fisher_distance(thermal_reference(nu, 20))[0] == pytest.approx(0, abs=1e-6)

    def test_nonnegative(self, rng):
        for _ in range(20):
            assert fisher_distance(random_state(4, rng))[0] >= -1e-9

    def test_norm_form_agrees(self, rng):
        rho = random_state(4, rng)
        j, per = fisher_distance(rho)
        sc = sld_score(rho)
        r = embed_matrix(rho.entries, rho.cutoff, sc.cutoff)
        mu = covariance(rho).mu[0]
        norm_form = sld_norm2(r, sc.matrix + annihilation(sc.cutoff).entries / mu)
        assert norm_form == pytest.approx(j, abs=1e-8)


class TestKMB:
    @pytest.mark.parametrize("nu, cutoff", [(1.5, 12), (3.0, 25)])
    def test_thermal_is_beta(self, nu, cutoff):
        # cutoffs keep the truncated thermal state faithful
        t = thermal_state(nu, cutoff)
        assert kmb_fisher(t) == pytest.approx(math.log((nu + 1) / (nu - 1)), rel=1e-6)

    def test_pure_infinite(self, rho_ex):
        assert kmb_fisher(rho_ex) == math.inf

    def test_dominates_sld(self, rng):
        for _ in range(10):
            rho = random_state(4, rng)
            assert kmb_fisher(rho) >= sld_fisher(rho, exact=False)[0] - 1e-10


class TestLSI:
    def test_thermal_zero(self):
        nu = 2.0
        t = thermal_reference(nu, 40)
        assert lsi_dirichlet(t, nu_to_beta(nu)) == pytest.approx(0, abs=1e-10)

    def test_example_lsi(self, rho_ex):
        beta = math.log(5 / 3)
        d = relative_entropy(rho_ex, thermal_reference(4.0, 60))
        lsi = lsi_dirichlet(rho_ex, beta)
        assert lsi_alpha(beta) * d <= lsi
        assert lsi_constant(beta) * lsi <= fisher_distance(rho_ex)[0]

    def test_alpha_closed_form(self):
        b = math.log(3)
        expect = 1 / ((2 + math.log(3)) / math.sinh(b / 2) + math.log(3) / (4 * math.sinh(b / 4) ** 2))
        assert lsi_alpha(b) == pytest.approx(expect)

    def test_alpha_monotone_positive(self):
        vals = [lsi_alpha(b) for b in np.linspace(0.05, 8, 40)]
        assert all(v > 0 for v in vals)
        assert np.all(np.diff(vals) > 0)

    def test_rejects_infinite_beta(self):
        with pytest.raises(ValueError):
            lsi_dirichlet(vacuum(2), math.inf)

    def test_gh_grid(self):
        for beta in (0.3, 1.0, 3.0):
            assert scalar_gh_check(beta, points=200) <= 1e-12

    def test_random_inequalities(self, rng):
        for _ in range(10):
            rho = random_state(5, rng)
            nu = covariance(rho).nu[0]
            beta = float(nu_to_beta(nu))
            lsi = lsi_dirichlet(rho, beta)
            d = relative_entropy(rho, thermal_reference(nu, 40))
            assert lsi_alpha(beta) * d <= lsi + 1e-9
            assert lsi_constant(beta) * lsi <= fisher_distance(rho)[0] + 1e-9


class TestCauchySchwarz:
    def test_random_quadruples(self, rng):
        for _ in range(10):
            r1, r2 = random_state(2, rng, symmetry=None), random_state(2, rng, symmetry=None)
            a = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
            b = rng.normal(size=(9, 9)) + 1j * rng.normal(size=(9, 9))
            lhs, rhs = cauchy_schwarz_check(r1, r2, a, b)
            assert lhs <= rhs * (1 + 1e-9)

    def test_identity_a(self, rng):
        r1, r2 = random_state(2, rng), random_state(2, rng)
        b = rng.normal(size=(9, 9))
        lhs, rhs = cauchy_schwarz_check(r1, r2, np.eye(3), b)
        assert lhs <= rhs * (1 + 1e-9)
