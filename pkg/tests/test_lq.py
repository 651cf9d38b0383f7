"""
Unit tests for the closed-form LQ oracle.
Tests riccati_r, classify_degeneracy, semimon_constants, solve_nplayer_lq,
solve_mfg_lq and eval_lq.
"""

import csv

import numpy as np
import pytest
from scipy.integrate import trapezoid

from mfgc.errors import DegeneracyError, DomainError
from mfgc.grid import TimeGrid
from mfgc.lq import (
    DegeneracyClass,
    GameMode,
    LqParams,
    classify_degeneracy,
    eval_lq,
    lq_hamiltonian,
    riccati_r,
    semimon_constants,
    solve_mfg_lq,
    solve_nplayer_lq,
    write_solution_csv,
)
from mfgc.lq.oracle import mfg_system_matrix


class TestLqParams:
    """Tests for LQ parameter validation."""

    def test_player_count_from_positions(self):
        """Test n_players defaults to the number of initial positions."""
        params = LqParams(kappa=0.5, gamma=1.0, initial_positions=(1.0, 2.0, 3.0))
        assert params.n_players == 3
        assert params.mode == GameMode.NPLAYER

    def test_gaussian_init_is_mean_field(self):
        """Test a Gaussian initial law selects mean-field mode."""
        params = LqParams(kappa=0.5, gamma=1.0, gaussian_init=(0.5, 2.0))
        assert params.mode == GameMode.MEAN_FIELD
        assert params.mu0 == 0.5
        assert params.s0 == 2.0

    def test_zero_kappa_rejected(self):
        """Test kappa = 0 is rejected."""
        with pytest.raises(ValueError):
            LqParams(kappa=0.0, gamma=1.0, initial_positions=(1.0, -1.0))

    def test_negative_gamma_rejected(self):
        """Test gamma < 0 is rejected."""
        with pytest.raises(ValueError):
            LqParams(kappa=0.5, gamma=-0.5, initial_positions=(1.0, -1.0))

    def test_mismatched_player_count_rejected(self):
        """Test n_players must match the number of positions."""
        with pytest.raises(ValueError):
            LqParams(kappa=0.5, gamma=1.0, n_players=3, initial_positions=(1.0, -1.0))


class TestRiccati:
    """Tests for the Riccati coefficient r(t)."""

    def test_terminal_value_is_one(self):
        """Test r(T) = 1 for any gamma and horizon."""
        for gamma, T in [(0.0, 1.0), (1.0, 2.5), (4.0, 0.3)]:
            params = LqParams(kappa=0.5, gamma=gamma, horizon=T, gaussian_init=(0.0, 1.0))
            assert riccati_r(T, params) == pytest.approx(1.0, abs=1e-14)

    def test_initial_value(self):
        """Test r(0) = 2/3 for gamma = 1, T = 1."""
        params = LqParams(kappa=0.5, gamma=1.0, gaussian_init=(0.0, 1.0))
        assert riccati_r(0.0, params) == pytest.approx(2.0 / 3.0, abs=1e-14)

    def test_large_gamma_limit(self):
        """Test r(0) tends to 1 as gamma dominates."""
        params = LqParams(kappa=0.5, gamma=1e6, gaussian_init=(0.0, 1.0))
        assert abs(riccati_r(0.0, params) - 1.0) <= 1e-6

    def test_vectorized(self):
        """Test r accepts an array of times."""
        params = LqParams(kappa=0.5, gamma=1.0, gaussian_init=(0.0, 1.0))
        t = np.linspace(0.0, 1.0, 5)
        np.testing.assert_allclose(riccati_r(t, params), 2.0 / (3.0 - t))

    def test_outside_horizon_raises(self):
        """Test times outside [0, T] raise DomainError."""
        params = LqParams(kappa=0.5, gamma=1.0, gaussian_init=(0.0, 1.0))
        with pytest.raises(DomainError):
            riccati_r(1.5, params)
        with pytest.raises(DomainError):
            riccati_r(-0.1, params)


class TestClassifyDegeneracy:
    """Tests for the degeneracy classification."""

    def test_mfg_kappa_minus_lambda(self):
        """Test kappa = -(1+gamma) has no quadratic solution in the MFG."""
        params = LqParams(kappa=-2.0, gamma=1.0, gaussian_init=(0.0, 1.0))
        report = classify_degeneracy(params, GameMode.MEAN_FIELD)
        assert report.classification == DegeneracyClass.NO_QUADRATIC_SOLUTION
        assert not report.regular

    def test_nplayer_upper_line(self):
        """Test kappa = (1+gamma)(N-1) has no quadratic solution for N players."""
        params = LqParams(kappa=2.0, gamma=0.0, initial_positions=(1.0, 0.0, -1.0))
        report = classify_degeneracy(params, GameMode.NPLAYER)
        assert report.classification == DegeneracyClass.NO_QUADRATIC_SOLUTION
        assert "N-1" in report.violated_condition

    def test_non_unique_family(self):
        """Test the vanishing determinant with mu(0) = 0 gives a non-unique family."""
        params = LqParams(kappa=-1.0, gamma=1.0, rho=-2.0, horizon=1.0, gaussian_init=(0.0, 1.0))
        report = classify_degeneracy(params, GameMode.MEAN_FIELD)
        assert report.classification == DegeneracyClass.NON_UNIQUE_FAMILY
        assert report.determinant == pytest.approx(0.0, abs=1e-12)

    def test_inconsistent_system(self):
        """Test the vanishing determinant with mu(0) != 0 is inconsistent."""
        params = LqParams(kappa=-1.0, gamma=1.0, rho=-2.0, horizon=1.0, gaussian_init=(1.0, 1.0))
        report = classify_degeneracy(params, GameMode.MEAN_FIELD)
        assert report.classification == DegeneracyClass.INCONSISTENT_SYSTEM

    def test_regular(self):
        """Test generic parameters are regular."""
        params = LqParams(kappa=0.5, gamma=1.0, rho=0.5, gaussian_init=(0.5, 1.0))
        assert classify_degeneracy(params).regular

    @pytest.mark.parametrize(
        "point, init",
        [
            ((0.5, 1.0, 0.5, 1.0), {"gaussian_init": (0.5, 1.0)}),
            ((-1.5, 1.0, -3.0, 2.0), {"gaussian_init": (0.0, 1.0)}),
            ((0.8, 0.2, 1.0, 1.0), {"initial_positions": (1.0, -0.5, 0.25)}),
            ((-0.7, 0.5, 0.0, 3.0), {"initial_positions": (0.0, 1.0)}),
        ],
    )
    def test_locally_constant(self, point, init):
        """Test small random perturbations of a non-singular point keep its class."""
        kappa, gamma, rho, horizon = point
        base = classify_degeneracy(LqParams(kappa=kappa, gamma=gamma, rho=rho, horizon=horizon, **init))
        rng = np.random.default_rng(21)
        for dk, dg, dr, dT in rng.uniform(-1e-3, 1e-3, size=(50, 4)):
            params = LqParams(
                kappa=kappa + dk, gamma=gamma + dg, rho=rho + dr, horizon=horizon + dT, **init
            )
            assert classify_degeneracy(params).classification == base.classification


class TestSemimonConstants:
    """Tests for the LQ semimonotonicity constants."""

    def test_nplayer_C_La(self):
        """Test C_La = 0.5 for N = 3, kappa = 1, gamma = 0."""
        params = LqParams(kappa=1.0, gamma=0.0, initial_positions=(1.0, 0.0, -1.0))
        report = semimon_constants(params)
        assert report.C_La == pytest.approx(0.5)

        form = np.eye(3) + 0.5 * (np.ones((3, 3)) - np.eye(3))
        assert np.linalg.eigvalsh(form).min() == pytest.approx(report.C_La)
        assert report.printed_matches_eigen

    def test_eigen_constants_match_dense_eigensolve(self):
        """Test the eigenvalue constants against a dense eigensolve for negative kappa."""
        N, kappa, gamma, rho = 4, -1.0, 0.5, 0.6
        params = LqParams(kappa=kappa, gamma=gamma, rho=rho, initial_positions=tuple(range(N)))
        report = semimon_constants(params)
        off = np.ones((N, N)) - np.eye(N)
        L_form = (1 + gamma) * np.eye(N) + kappa / (N - 1) * off
        g_form = np.eye(N) + rho / (N - 1) * off
        assert report.C_La_eigen == pytest.approx(np.linalg.eigvalsh(L_form).min())
        assert report.C_g_eigen == pytest.approx(-np.linalg.eigvalsh(g_form).min())
        assert not report.printed_matches_eigen

    def test_mean_field_semimonotone(self):
        """Test the condition value 4 > 0 is semimonotone."""
        params = LqParams(kappa=0.5, gamma=1.0, rho=0.5, horizon=1.0, gaussian_init=(0.0, 1.0))
        report = semimon_constants(params, GameMode.MEAN_FIELD)
        assert report.condition_value == pytest.approx(4.0)
        assert report.semimonotone

    def test_mean_field_boundary(self):
        """Test the condition value 0 is not semimonotone."""
        params = LqParams(kappa=-1.0, gamma=1.0, rho=-2.0, horizon=1.0, gaussian_init=(0.0, 1.0))
        report = semimon_constants(params, GameMode.MEAN_FIELD)
        assert report.condition_value == pytest.approx(0.0, abs=1e-14)
        assert not report.semimonotone

    def test_contraction_margin(self):
        """Test the margin 1 - |kappa|/(1+gamma)."""
        params = LqParams(kappa=-1.5, gamma=1.0, gaussian_init=(0.0, 1.0))
        report = semimon_constants(params)
        assert report.contraction_margin == pytest.approx(0.25)
        assert report.contractive

    def test_nplayer_needs_player_count(self):
        """Test N-player constants without n_players raise DomainError."""
        params = LqParams(kappa=0.5, gamma=1.0, gaussian_init=(0.0, 1.0))
        with pytest.raises(DomainError):
            semimon_constants(params, GameMode.NPLAYER)


class TestSolveNPlayer:
    """Tests for the N-player LQ equilibrium."""

    def test_matches_collocation(self, nplayer_params, collocation):
        """Test trajectories, controls and costates against a dense collocation solve."""
        params = nplayer_params(z=(1.0, -0.5, 0.25), kappa=0.5, gamma=1.0, rho=0.3)
        steps = 40
        sol = solve_nplayer_lq(params, TimeGrid(1.0, steps))
        X, Y, A = collocation(0.5, 1.0, 0.3, 1.0, params.initial_positions, steps)

        np.testing.assert_allclose(sol.X, X, atol=1e-8)
        np.testing.assert_allclose(sol.controls, A, atol=1e-8)
        np.testing.assert_allclose(sol.r * sol.X + sol.p, Y, atol=1e-8)

    def test_symmetric_players(self, nplayer_params, collocation):
        """Test identical starts give identical trajectories matching collocation."""
        params = nplayer_params(z=(1.0, 1.0), kappa=0.5, gamma=0.0)
        sol = solve_nplayer_lq(params, TimeGrid(1.0, 50))
        X, _, A = collocation(0.5, 0.0, 0.0, 1.0, (1.0, 1.0), 50)
        np.testing.assert_allclose(sol.X[0], sol.X[1], atol=1e-12)
        np.testing.assert_allclose(sol.X, X, atol=1e-8)
        np.testing.assert_allclose(sol.controls, A, atol=1e-8)

    def test_controls_constant_in_time(self, nplayer_params, grid):
        """Test equilibrium controls do not vary along the trajectories."""
        sol = solve_nplayer_lq(nplayer_params(rho=0.5), grid)
        A = sol.controls
        np.testing.assert_allclose(A, A[:, :1] * np.ones_like(A), atol=1e-9)

    def test_decoupled_limit(self, nplayer_params, grid):
        """Test near-zero coupling reduces to the single-player solution."""
        params = nplayer_params(z=(1.0, -1.0), kappa=1e-10, gamma=1.0, rho=0.0)
        sol = solve_nplayer_lq(params, grid)
        S = 1.0 + 2.0
        expected = np.outer([1.0, -1.0], (S - grid.nodes) / S)
        np.testing.assert_allclose(sol.p, 0.0, atol=1e-8)
        np.testing.assert_allclose(sol.C, -sol.p / 2.0, atol=1e-8)
        np.testing.assert_allclose(sol.X, expected, atol=1e-8)

    def test_boundary_identity(self, nplayer_params, grid):
        """Test P(T) - rho M(T) = 0 and the per-player terminal conditions."""
        for rho in (0.0, 0.5, -0.7):
            sol = solve_nplayer_lq(nplayer_params(rho=rho), grid)
            assert sol.boundary_residual() <= 1e-10

    def test_shared_riccati(self, nplayer_params, grid):
        """Test r and K agree with the closed forms."""
        params = nplayer_params()
        sol = solve_nplayer_lq(params, grid)
        np.testing.assert_allclose(sol.r, riccati_r(grid.nodes, params))
        np.testing.assert_allclose(sol.K, -sol.r / params.lam)

    def test_degenerate_raises(self):
        """Test kappa = (1+gamma)(N-1) raises DegeneracyError with its report."""
        params = LqParams(kappa=1.0, gamma=0.0, initial_positions=(1.0, 1.0))
        with pytest.raises(DegeneracyError) as exc:
            solve_nplayer_lq(params, TimeGrid(1.0, 20))
        assert exc.value.report.classification == DegeneracyClass.NO_QUADRATIC_SOLUTION

    def test_needs_dirac_positions(self, mfg_params, grid):
        """Test a Gaussian parameter set is refused by the N-player solver."""
        with pytest.raises(DomainError):
            solve_nplayer_lq(mfg_params(), grid)

    def test_grid_horizon_mismatch(self, nplayer_params):
        """Test a grid with the wrong horizon is refused."""
        with pytest.raises(DomainError):
            solve_nplayer_lq(nplayer_params(horizon=2.0), TimeGrid(1.0, 20))

    def test_noise_shifts_q_only(self, nplayer_params, grid):
        """Test beta adds beta * integral of r to q and leaves the gains alone."""
        base = solve_nplayer_lq(nplayer_params(beta=0.0), grid)
        noisy = solve_nplayer_lq(nplayer_params(beta=0.4), grid)
        np.testing.assert_allclose(noisy.C, base.C, atol=1e-12)
        np.testing.assert_allclose(noisy.p, base.p, atol=1e-12)
        g, S = 2.0, 3.0
        expected = 0.4 * g * np.log((S - grid.nodes) / g)
        np.testing.assert_allclose(noisy.q - base.q, expected[None, :] * np.ones_like(base.q), atol=1e-6)

    def test_terminal_value(self, nplayer_params, grid):
        """Test w_i(T, x) = (x + rho mean_{j!=i} X_j(T))^2 / 2."""
        sol = solve_nplayer_lq(nplayer_params(rho=0.5), grid)
        XT = sol.X[:, -1]
        for i in range(sol.n_players):
            others = (XT.sum() - XT[i]) / (sol.n_players - 1)
            for x in (-1.0, 0.0, 2.0):
                assert sol.value(i, 1.0, x) == pytest.approx(0.5 * (x + 0.5 * others) ** 2, abs=1e-9)


class TestSolveMfg:
    """Tests for the closed-form mean field equilibrium."""

    def test_system_matrix_example(self):
        """Test the (B, D) system for kappa = 1, gamma = 0, T = 1, rho = 0, mu(0) = 1."""
        params = LqParams(kappa=1.0, gamma=0.0, rho=0.0, horizon=1.0, gaussian_init=(1.0, 1.0))
        np.testing.assert_allclose(mfg_system_matrix(params), [[1.0, -2.0], [-1.0, 5.0]])
        sol = solve_mfg_lq(params)
        assert sol.determinant == pytest.approx(3.0)
        assert sol.B == pytest.approx(5.0 / 3.0)
        assert sol.D == pytest.approx(1.0 / 3.0)

    def test_determinant_proportional_to_condition(self):
        """Test det = (1+kappa+gamma+T(1+rho))/kappa."""
        for kappa, gamma, rho in [(1.0, 0.0, 0.0), (0.5, 1.0, 0.5), (-0.7, 2.0, -0.3)]:
            params = LqParams(kappa=kappa, gamma=gamma, rho=rho, gaussian_init=(1.0, 1.0))
            sol = solve_mfg_lq(params)
            assert sol.determinant == pytest.approx(params.semimon_condition / kappa)
            assert classify_degeneracy(params).determinant == pytest.approx(sol.determinant)

    def test_centered_law_is_trivial(self, mfg_params):
        """Test rho = 0 and mu(0) = 0 give B = D = 0 and vanishing mu, p, C."""
        sol = solve_mfg_lq(mfg_params(mu0=0.0, rho=0.0))
        assert sol.B == pytest.approx(0.0, abs=1e-15)
        assert sol.D == pytest.approx(0.0, abs=1e-15)
        np.testing.assert_allclose(sol.mu_curve, 0.0, atol=1e-15)
        np.testing.assert_allclose(sol.p_curve, 0.0, atol=1e-15)
        np.testing.assert_allclose(sol.C_curve, 0.0, atol=1e-15)

    def test_boundary_conditions(self, mfg_params):
        """Test mu(0) = mu0 and p(T) = rho mu(T)."""
        sol = solve_mfg_lq(mfg_params(rho=0.5))
        assert sol.boundary_residual() <= 1e-12

    def test_terminal_value(self, mfg_params):
        """Test v(T, x) = (x + rho mu(T))^2 / 2."""
        sol = solve_mfg_lq(mfg_params(rho=0.5))
        mu_T = sol.mu(1.0)
        for x in (-2.0, 0.0, 0.7, 3.0):
            assert sol.value(1.0, x) == pytest.approx(0.5 * (x + 0.5 * mu_T) ** 2, abs=1e-12)

    def test_mean_copy_follows_mu(self, mfg_params):
        """Test the copy started at mu(0) traces mu(t) with the mean control."""
        sol = solve_mfg_lq(mfg_params(mu0=0.8, rho=0.5))
        X, A = sol.copy_paths([0.8])
        np.testing.assert_allclose(X[0], sol.mu_curve, atol=1e-12)
        np.testing.assert_allclose(A[0], sol.mean_control(sol.times), atol=1e-12)

    def test_copy_paths_solve_feedback_ode(self, mfg_params):
        """Test copies satisfy X' = K X + C with constant controls."""
        sol = solve_mfg_lq(mfg_params(rho=0.3))
        X, A = sol.copy_paths([-1.0, 0.5, 2.0])
        feedback = sol.feedback(sol.times[None, :], X)
        np.testing.assert_allclose(A, feedback, atol=1e-12)
        np.testing.assert_allclose(X[:, 0], [-1.0, 0.5, 2.0])

    def test_density_normalized(self, mfg_params):
        """Test the Gaussian density integrates to 1 and centers on mu."""
        sol = solve_mfg_lq(mfg_params(mu0=0.5, s0=2.0))
        x = np.linspace(-10.0, 10.0, 20001)
        for t in (0.0, 0.5, 1.0):
            m = sol.density(t, x)
            assert trapezoid(m, x) == pytest.approx(1.0, abs=1e-8)
            assert trapezoid(x * m, x) == pytest.approx(sol.mu(t), abs=1e-8)

    def test_control_law(self, mfg_params):
        """Test the law of the controls has mean K mu + C and variance K^2/(2 s^2)."""
        sol = solve_mfg_lq(mfg_params())
        mean, var = sol.control_law(0.25)
        assert mean == pytest.approx(sol.K(0.25) * sol.mu(0.25) + sol.C(0.25))
        assert var == pytest.approx(sol.K(0.25) ** 2 / (2 * sol.s(0.25) ** 2))

    def test_noise_offset(self, mfg_params):
        """Test beta adds beta (1+gamma) log(tau/(1+gamma)) to q."""
        base = solve_mfg_lq(mfg_params(beta=0.0))
        noisy = solve_mfg_lq(mfg_params(beta=0.3))
        g, S = 2.0, 3.0
        assert noisy.q(0.0) - base.q(0.0) == pytest.approx(0.3 * g * np.log(S / g))
        assert noisy.C(0.0) == pytest.approx(base.C(0.0))

    def test_degenerate_raises(self):
        """Test the non-unique family raises DegeneracyError."""
        params = LqParams(kappa=-1.0, gamma=1.0, rho=-2.0, gaussian_init=(0.0, 1.0))
        with pytest.raises(DegeneracyError) as exc:
            solve_mfg_lq(params)
        assert exc.value.report.classification == DegeneracyClass.NON_UNIQUE_FAMILY


class TestEvalLq:
    """Tests for point evaluation of LQ solutions."""

    def test_decoupled_gradient(self, nplayer_params, grid):
        """Test the decoupled gradient at (0, 1) is r(0) = (1+gamma)/(T+1+gamma)."""
        sol = solve_nplayer_lq(nplayer_params(z=(1.0, -1.0), kappa=1e-10), grid)
        result = eval_lq(sol, 0.0, 1.0, player=0)
        assert result.gradient == pytest.approx(2.0 / 3.0, abs=1e-8)

    def test_nplayer_consistency_residual(self, nplayer_params, grid):
        """Test the feedback consistency relation at grid nodes."""
        sol = solve_nplayer_lq(nplayer_params(rho=0.4), grid)
        for i in range(sol.n_players):
            for t in grid.nodes[::40]:
                for x in (-1.0, 0.3, 2.0):
                    assert eval_lq(sol, t, x, player=i).consistency_residual <= 1e-10

    def test_mfg_consistency_residual(self, mfg_params):
        """Test the mean-field feedback consistency relation."""
        sol = solve_mfg_lq(mfg_params(rho=0.4))
        for t in (0.0, 0.37, 1.0):
            for x in (-1.0, 0.3, 2.0):
                assert eval_lq(sol, t, x).consistency_residual <= 1e-10

    def test_nplayer_needs_player(self, nplayer_params, grid):
        """Test N-player evaluation without a player index raises DomainError."""
        sol = solve_nplayer_lq(nplayer_params(), grid)
        with pytest.raises(DomainError):
            eval_lq(sol, 0.0, 1.0)


class TestLqHamiltonian:
    """Tests for the closed-form LQ Hamiltonian."""

    def test_uncoupled(self):
        """Test H = p^2 / (2(1+gamma)) without coupling."""
        assert lq_hamiltonian(1.0, 0.0, kappa=0.0, gamma=1.0) == pytest.approx(0.25)

    def test_coupled(self):
        """Test H = 1.5 for kappa = 1, gamma = 0, p = 1, mean control 1."""
        assert lq_hamiltonian(1.0, 1.0, kappa=1.0, gamma=0.0) == pytest.approx(1.5)


class TestWriteSolutionCsv:
    """Tests for coefficient-curve export."""

    def test_nplayer_rows(self, nplayer_params, tmp_path):
        """Test one row per (player, node)."""
        sol = solve_nplayer_lq(nplayer_params(), TimeGrid(1.0, 10))
        path = write_solution_csv(sol, tmp_path / "nplayer.csv")
        with open(path) as f:
            rows = list(csv.reader(f))
        assert rows[0] == ["player", "t", "r", "p", "q", "K", "C", "X"]
        assert len(rows) == 1 + 3 * 11

    def test_mfg_rows(self, mfg_params, tmp_path):
        """Test one row per node for the mean field solution."""
        sol = solve_mfg_lq(mfg_params(), TimeGrid(1.0, 10))
        path = write_solution_csv(sol, tmp_path / "mfg.csv")
        with open(path) as f:
            rows = list(csv.reader(f))
        assert rows[0][0] == "t"
        assert len(rows) == 12
        assert float(rows[-1][1]) == pytest.approx(1.0)
