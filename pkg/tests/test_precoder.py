import numpy as np
import pytest

from otfsftn import (
    GridShape,
    PulseSpec,
    derive_subchannels,
    effective_channel,
    eva_channel,
    finalize,
    gram_dd,
    gram_matrix,
    hermitian_evd_desc,
    mi_sum,
    solve_precoder,
    uniform_gamma,
    waterfill,
)

from conftest import complex_gaussian, eva_config


def random_hermitian(rng, n):
    a = complex_gaussian(rng, n * n).reshape(n, n)
    return 0.5 * (a + a.conj().T)


def eva_instance(m, n, alpha, seed, nu_max=2000.0, beta=0.25):
    shape = GridShape(m, n)
    spec = PulseSpec(beta=beta)
    cfg = eva_config(m, n, alpha, beta=beta, nu_max=nu_max, seed=seed)
    gram = gram_dd(gram_matrix(shape, alpha, spec), shape)
    chan = eva_channel(nu_max, cfg, np.random.default_rng(seed))
    eff = effective_channel(chan, spec, cfg)
    return shape, gram, eff


class TestHermitianEvd:
    def test_identity(self):
        w, lam = hermitian_evd_desc(np.eye(4, dtype=complex))
        np.testing.assert_array_equal(lam, np.ones(4))
        recon = w @ np.diag(lam) @ w.conj().T
        assert np.abs(recon - np.eye(4)).max() <= 1e-12

    def test_descending_order(self):
        _, lam = hermitian_evd_desc(np.diag([1.0, 3.0, 2.0]).astype(complex))
        np.testing.assert_allclose(lam, [3.0, 2.0, 1.0], atol=1e-14)

    def test_reconstruction(self, rng):
        a = random_hermitian(rng, 8)
        w, lam = hermitian_evd_desc(a)
        scale = np.abs(a).max()
        assert np.abs(w @ np.diag(lam) @ w.conj().T - a).max() <= 1e-9 * scale
        assert np.abs(w.conj().T @ w - np.eye(8)).max() <= 1e-10

    def test_deterministic_basis(self, rng):
        a = random_hermitian(rng, 6)
        w1, _ = hermitian_evd_desc(a)
        w2, _ = hermitian_evd_desc(a.copy())
        np.testing.assert_array_equal(w1, w2)

    def test_phase_normalization(self, rng):
        a = random_hermitian(rng, 5)
        w, _ = hermitian_evd_desc(a)
        for col in w.T:
            lead = col[np.argmax(np.abs(col) > 1e-8)]
            assert abs(lead.imag) <= 1e-12 and lead.real > 0.0

    def test_rejects_non_hermitian(self, rng):
        a = complex_gaussian(rng, 16).reshape(4, 4)
        with pytest.raises(ValueError, match="Hermitian"):
            hermitian_evd_desc(a)


class TestDeriveSubchannels:
    def test_fully_degenerate_instance(self):
        shape = GridShape(4, 2)
        eye = np.eye(shape.MN, dtype=complex)
        sol = derive_subchannels(eye, eye, shape)
        np.testing.assert_allclose(sol.xi, np.ones(shape.MN), atol=1e-12)
        np.testing.assert_allclose(sol.phi, np.ones(shape.MN), atol=1e-12)
        assert np.abs(sol.B - eye).max() <= 1e-12

    def test_unitary_channel_unit_gains(self, rng):
        shape = GridShape(4, 2)
        q, _ = np.linalg.qr(complex_gaussian(rng, shape.MN**2).reshape(shape.MN, shape.MN))
        sol = derive_subchannels(q, np.eye(shape.MN, dtype=complex), shape)
        np.testing.assert_allclose(sol.xi, np.ones(shape.MN), atol=1e-10)

    def test_gain_sum_trace_identity(self):
        # sum(xi) must equal trace(H_eq^H G_eq^{-1} H_eq), computed by direct
        # inversion as an independent oracle
        shape, gram, eff = eva_instance(4, 3, 0.85, seed=2)
        sol = derive_subchannels(eff.H_eq, gram.G_eq, shape)
        oracle = np.trace(eff.H_eq.conj().T @ np.linalg.inv(gram.G_eq) @ eff.H_eq).real
        assert abs(sol.xi.sum() - oracle) <= 1e-8 * abs(oracle)

    def test_descending_and_nonnegative(self):
        shape, gram, eff = eva_instance(8, 4, 0.9, seed=3)
        sol = derive_subchannels(eff.H_eq, gram.G_eq, shape)
        assert np.all(np.diff(sol.xi) <= 1e-12)
        assert np.all(sol.xi >= 0.0)
        assert np.all(np.diff(sol.lam) <= 1e-12)

    def test_bases_unitary(self):
        shape, gram, eff = eva_instance(8, 4, 0.9, seed=3)
        sol = derive_subchannels(eff.H_eq, gram.G_eq, shape)
        eye = np.eye(shape.MN)
        assert np.abs(sol.V.conj().T @ sol.V - eye).max() <= 1e-10
        assert np.abs(sol.U.conj().T @ sol.U - eye).max() <= 1e-10

    def test_floor_never_activates_away_from_edge(self):
        # clamping is reserved for the admissibility edge; interior packing
        # ratios keep the raw spectrum above the floor
        for alpha in (0.82, 0.85, 0.9, 1.0):
            shape, gram, eff = eva_instance(16, 4, alpha, seed=12)
            sol = derive_subchannels(eff.H_eq, gram.G_eq, shape)
            assert sol.floored == 0

    def test_floor_inactive_at_larger_frame(self):
        # MN = 384 just above the admissibility edge
        shape, gram, eff = eva_instance(64, 6, 0.82, seed=13)
        sol = derive_subchannels(eff.H_eq, gram.G_eq, shape)
        assert sol.floored == 0

    def test_phi_positive(self):
        shape, gram, eff = eva_instance(8, 4, 0.85, seed=4)
        sol = derive_subchannels(eff.H_eq, gram.G_eq, shape)
        assert np.all(sol.phi > 0.0)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            derive_subchannels(np.eye(4, dtype=complex), np.eye(4, dtype=complex), GridShape(4, 2))


class TestWaterfill:
    def test_symmetric_case(self):
        gamma, mu = waterfill(np.ones(4), np.ones(4), snr=2.0, budget=4.0)
        np.testing.assert_allclose(gamma, np.ones(4), atol=1e-12)
        assert abs(mu - (1.0 + 0.5)) <= 1e-12

    def test_single_subchannel(self):
        gamma, _ = waterfill(np.array([0.7]), np.array([1.3]), snr=5.0, budget=1.0)
        assert abs(gamma[0] - 1.0 / 1.3) <= 1e-12

    def test_two_channel_grid_oracle(self):
        # independent scalar search over the water level
        xi = np.array([4.0, 1.0])
        phi = np.array([1.0, 1.0])
        snr, budget = 1.0, 2.0

        def spent(mu):
            return np.sum(np.maximum(mu - phi / (xi * snr), 0.0) )

        lo, hi = 0.0, 10.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            lo, hi = (mid, hi) if spent(mid) < budget else (lo, mid)
        mu_oracle = 0.5 * (lo + hi)
        gamma_oracle = np.maximum(mu_oracle / phi - 1.0 / (xi * snr), 0.0)

        gamma, mu = waterfill(xi, phi, snr, budget)
        np.testing.assert_allclose(gamma, gamma_oracle, atol=1e-8)
        assert gamma[0] > gamma[1]

    def test_constraint_residual(self, rng):
        for _ in range(20):
            n = 48
            xi = rng.uniform(0.01, 3.0, n)
            phi = rng.uniform(0.2, 2.0, n)
            gamma, _ = waterfill(xi, phi, snr=4.0, budget=float(n))
            assert abs(float(gamma @ phi) - n) <= 1e-10 * n
            assert np.all(gamma >= 0.0)

    def test_kkt_conditions(self, rng):
        n = 48
        xi = rng.uniform(0.001, 2.0, n)
        phi = rng.uniform(0.3, 1.8, n)
        snr = 2.5
        gamma, mu = waterfill(xi, phi, snr, float(n))
        act = gamma > 0.0
        lhs = phi[act] * (gamma[act] + 1.0 / (xi[act] * snr))
        assert np.abs(lhs - mu).max() <= 1e-8 * mu
        if (~act).any():
            assert np.all(mu / phi[~act] <= 1.0 / (xi[~act] * snr) + 1e-8)

    def test_low_snr_drops_weak_subchannels(self):
        xi = np.array([2.0, 1e-3])
        phi = np.ones(2)
        gamma, _ = waterfill(xi, phi, snr=0.1, budget=2.0)
        assert gamma[1] == 0.0 and gamma[0] > 0.0

    def test_numerically_dead_subchannels_inactive(self):
        xi = np.array([1.0, 1e-15])
        gamma, _ = waterfill(xi, np.ones(2), snr=1e6, budget=2.0)
        assert gamma[1] == 0.0

    def test_optimality_against_perturbations(self, rng):
        # projected random feasible perturbations never beat the water filling
        n = 48
        xi = rng.uniform(0.01, 2.0, n)
        phi = rng.uniform(0.3, 1.5, n)
        snr = 3.0
        budget = float(n)
        gamma, _ = waterfill(xi, phi, snr, budget)
        best = mi_sum(xi, gamma, snr)
        for _ in range(100):
            pert = np.maximum(gamma + rng.normal(0.0, 0.2, n), 0.0)
            pert *= budget / float(pert @ phi)
            assert mi_sum(xi, pert, snr) <= best + 1e-9

    def test_mi_strictly_increasing_in_snr(self, rng):
        n = 24
        xi = rng.uniform(0.05, 2.0, n)
        phi = rng.uniform(0.5, 1.5, n)
        previous = -1.0
        for snr_db in (-5.0, 0.0, 5.0, 10.0, 20.0):
            snr = 10.0 ** (snr_db / 10.0)
            gamma, _ = waterfill(xi, phi, snr, float(n))
            mi = mi_sum(xi, gamma, snr)
            assert mi > previous
            previous = mi

    def test_rejects_all_zero_gains(self):
        with pytest.raises(ValueError, match="usable"):
            waterfill(np.zeros(4), np.ones(4), 1.0, 4.0)

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            waterfill(np.array([-1.0]), np.ones(1), 1.0, 1.0)
        with pytest.raises(ValueError):
            waterfill(np.ones(1), np.zeros(1), 1.0, 1.0)
        with pytest.raises(ValueError):
            waterfill(np.ones(1), np.ones(1), 0.0, 1.0)


class TestFinalize:
    def test_unit_gamma_gives_unitary_precoder(self):
        shape, gram, eff = eva_instance(4, 3, 0.9, seed=5)
        sol = derive_subchannels(eff.H_eq, gram.G_eq, shape)
        sol.gamma = np.ones(shape.MN)
        finalize(sol)
        assert np.abs(sol.P_mat - sol.U).max() == 0.0
        assert np.abs(sol.P_mat.conj().T @ sol.P_mat - np.eye(shape.MN)).max() <= 1e-10

    def test_degenerate_identity_link(self):
        shape = GridShape(4, 2)
        eye = np.eye(shape.MN, dtype=complex)
        sol = derive_subchannels(eye, eye, shape)
        sol.gamma = np.full(shape.MN, 1.0)
        finalize(sol)
        dhp = sol.D @ eye @ sol.P_mat
        assert np.abs(dhp - np.diag(np.sqrt(sol.gamma))).max() <= 1e-10

    def test_diagonalization_identities(self):
        shape, gram, eff = eva_instance(8, 4, 0.9, seed=6)
        sol = solve_precoder(eff.H_eq, gram.G_eq, shape, snr=10.0)
        bound = 1e-8 * sol.xi.max()
        dhp = sol.D @ eff.H_eq @ sol.P_mat
        assert np.abs(dhp - np.diag(sol.xi * np.sqrt(sol.gamma))).max() <= bound
        dgd = sol.D @ gram.G_eq @ sol.D.conj().T
        assert np.abs(dgd - np.diag(sol.xi)).max() <= bound

    def test_energy_constraint_satisfied(self):
        shape, gram, eff = eva_instance(8, 4, 0.85, seed=7)
        sol = solve_precoder(eff.H_eq, gram.G_eq, shape, snr=5.0)
        assert abs(float(sol.gamma @ sol.phi) - shape.MN) <= 1e-8 * shape.MN

    def test_uniform_gamma_meets_constraint(self):
        shape, gram, eff = eva_instance(8, 4, 0.85, seed=8)
        sol = derive_subchannels(eff.H_eq, gram.G_eq, shape)
        g = uniform_gamma(sol.phi, float(shape.MN))
        assert abs(float(g @ sol.phi) - shape.MN) <= 1e-10 * shape.MN
        # trace(G_eq) = MN makes the unscaled identity already feasible
        assert np.abs(g - 1.0).max() <= 1e-10

    def test_finalize_requires_gamma(self):
        shape, gram, eff = eva_instance(4, 3, 0.9, seed=9)
        sol = derive_subchannels(eff.H_eq, gram.G_eq, shape)
        with pytest.raises(ValueError, match="gamma"):
            finalize(sol)
