"""
Shared fixtures: LQ parameter factories and an independent collocation solve
of the N-player LQ forward-backward system.
"""

import numpy as np
import pytest

from mfgc.grid import TimeGrid
from mfgc.lq import LqParams


def collocation_nplayer_lq(kappa, gamma, rho, horizon, z, steps):
    """
    Solve the discretized N-player LQ system as one dense linear system.

    Unknowns are X, Y, A on every node for every player:
        X_{m+1} - X_m = dt/2 (A_m + A_{m+1}),   X_0 = z
        Y_{m+1} - Y_m = 0,                      Y_M = X_M + rho * mean_{j!=i} X_j(M)
        Y_m + (1+gamma) A_m + kappa * mean_{j!=i} A_j(m) = 0

    Returns:
        (X, Y, A), each of shape (N, steps + 1)
    """
    z = np.asarray(z, dtype=float)
    N, n = z.size, steps + 1
    dt = horizon / steps
    g = 1.0 + gamma
    w = 1.0 / (N - 1)
    size = 3 * N * n

    def ix(i, m):
        return i * n + m

    def iy(i, m):
        return N * n + i * n + m

    def ia(i, m):
        return 2 * N * n + i * n + m

    matrix = np.zeros((size, size))
    rhs = np.zeros(size)
    row = 0
    for i in range(N):
        matrix[row, ix(i, 0)] = 1.0
        rhs[row] = z[i]
        row += 1
        for m in range(steps):
            matrix[row, ix(i, m + 1)] = 1.0
            matrix[row, ix(i, m)] = -1.0
            matrix[row, ia(i, m)] = -0.5 * dt
            matrix[row, ia(i, m + 1)] = -0.5 * dt
            row += 1
        for m in range(steps):
            matrix[row, iy(i, m + 1)] = 1.0
            matrix[row, iy(i, m)] = -1.0
            row += 1
        matrix[row, iy(i, steps)] = 1.0
        matrix[row, ix(i, steps)] = -1.0
        for j in range(N):
            if j != i:
                matrix[row, ix(j, steps)] = -rho * w
        row += 1
        for m in range(n):
            matrix[row, iy(i, m)] = 1.0
            matrix[row, ia(i, m)] = g
            for j in range(N):
                if j != i:
                    matrix[row, ia(j, m)] = kappa * w
            row += 1

    solution = np.linalg.solve(matrix, rhs)
    X = solution[: N * n].reshape(N, n)
    Y = solution[N * n: 2 * N * n].reshape(N, n)
    A = solution[2 * N * n:].reshape(N, n)
    return X, Y, A


@pytest.fixture
def collocation():
    return collocation_nplayer_lq


@pytest.fixture
def nplayer_params():
    """Factory for regular N-player LQ parameters."""

    def make(z=(1.0, -0.5, 0.25), kappa=0.5, gamma=1.0, rho=0.0, horizon=1.0, beta=0.0):
        return LqParams(
            kappa=kappa, gamma=gamma, rho=rho, horizon=horizon, initial_positions=tuple(z), beta=beta
        )

    return make


@pytest.fixture
def mfg_params():
    """Factory for regular mean-field LQ parameters."""

    def make(mu0=0.5, s0=1.0, kappa=0.5, gamma=1.0, rho=0.0, horizon=1.0, beta=0.0):
        return LqParams(kappa=kappa, gamma=gamma, rho=rho, horizon=horizon, gaussian_init=(mu0, s0), beta=beta)

    return make


@pytest.fixture
def grid():
    return TimeGrid(1.0, 200)
