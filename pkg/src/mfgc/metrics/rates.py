"""
Theoretical rates: Fournier-Guillin empirical-measure rate, initial mismatch
K(N) and the concentration bound built from them.
"""

import math
from typing import Literal, Optional, Sequence

import numpy as np
from pydantic import BaseModel, Field, model_validator

from mfgc.errors import DomainError
from mfgc.metrics.wasserstein import w2_1d, w2_exact_small


def _moment_exponent(q: float) -> float:
    """(q-2)/q, equal to 1 for compactly supported laws (q = inf)."""
    return 1.0 if math.isinf(q) else (q - 2.0) / q


def fournier_guillin_rate(d: int, q: float, N) -> float:
    """
    r_{d,q}(N) =
        N^{-1/2} + N^{-(q-2)/q}                 d < 4
        N^{-1/2} log(1+N) + N^{-(q-2)/q}        d = 4
        N^{-2/d} + N^{-(q-2)/q}                 d > 4

    Raises:
        DomainError: q <= 2, q = 4 or q = d/(d-2), or N < 1
    """
    if d < 1:
        raise DomainError(f"dimension must be positive, got {d}", d)
    if not q > 2:
        raise DomainError(f"the rate needs finite moments of order q > 2, got q={q}", q)
    if q == 4 or (d > 2 and q == d / (d - 2)):
        raise DomainError(f"q={q} is excluded (q must differ from 4 and d/(d-2))", q)
    N_arr = np.asarray(N, dtype=float)
    if np.any(N_arr < 1):
        raise DomainError("N must be at least 1", N)

    moment = N_arr ** (-_moment_exponent(q))
    if d < 4:
        sample = N_arr ** -0.5
    elif d == 4:
        sample = N_arr ** -0.5 * np.log1p(N_arr)
    else:
        sample = N_arr ** (-2.0 / d)
    rate = sample + moment
    return float(rate) if rate.ndim == 0 else rate


def initial_mismatch_K(m0_samples, per_player_samples: Sequence) -> float:
    """K(N) = (1/N) sum_i W2(m0, law of player i)^2 from samples of each law."""
    if len(per_player_samples) == 0:
        raise DomainError("per-player samples are empty")
    m0 = np.asarray(m0_samples, dtype=float)
    one_d = m0.ndim == 1 or (m0.ndim == 2 and m0.shape[1] == 1)
    distance = w2_1d if one_d else w2_exact_small
    return float(np.mean([distance(m0, np.asarray(s, dtype=float)) ** 2 for s in per_player_samples]))


class TailParams(BaseModel):
    """Tail regime of m_0 and the abstract constants C, c of the concentration bound."""
    regime: Literal["moment", "super_gaussian", "sub_gaussian"] = "moment"
    sigma: Optional[float] = Field(None, gt=0, description="Exponent of the exponential moment.")
    C: float = Field(1.0, gt=0)
    c: float = Field(1.0, gt=0)

    @model_validator(mode="after")
    def _sigma_for_exponential_regimes(self) -> "TailParams":
        if self.regime != "moment" and self.sigma is None:
            raise ValueError(f"regime '{self.regime}' needs sigma")
        return self


def _a_term(epsilon: float, N: float, d: int, c: float) -> float:
    if d < 4:
        return math.exp(-c * N * epsilon**2)
    if d == 4:
        return math.exp(-c * N * epsilon**2 * math.log(1.0 + 1.0 / epsilon) ** -2)
    return math.exp(-c * N * epsilon ** (d / 2.0))


def _b_term(epsilon: float, N: float, q: float, tail: TailParams) -> float:
    c = tail.c
    if tail.regime == "moment":
        if not (q > 4 and epsilon < 4):
            raise DomainError("the moment tail branch needs q > 4 and epsilon < 4", (q, epsilon))
        return N * (N * epsilon) ** (-(q - epsilon) / 2.0)
    sigma = tail.sigma
    if tail.regime == "super_gaussian":
        if not sigma > 2:
            raise DomainError("the super-Gaussian branch needs sigma > 2", sigma)
        return math.exp(-c * N * epsilon ** (sigma / 2.0)) if epsilon > 2 else 0.0
    if not epsilon < sigma < 2:
        raise DomainError("the sub-Gaussian branch needs epsilon < sigma < 2", (epsilon, sigma))
    if epsilon <= 2:
        return math.exp(-c * (N * epsilon) ** ((sigma - epsilon) / 2.0))
    return math.exp(-c * (N * epsilon) ** (sigma / 2.0))


def concentration_bound(
    epsilon: float,
    N: int,
    d: int,
    q: float,
    tail: Optional[TailParams] = None,
    K: float = 0.0,
) -> float:
    """
    Shape of the bound on P(sup_t W2^2(empirical, mean-field law) > epsilon):

        C (epsilon^-1 (K(N) + r_{d,q}(N)) + a_eps(N) 1{epsilon <= 2} + b_eps(N))

    The constants C, c are unquantified; the result is a shape, not a probability.
    """
    if not epsilon > 0:
        raise DomainError("epsilon must be positive", epsilon)
    tail = tail or TailParams()
    rate = fournier_guillin_rate(d, q, N)
    a = _a_term(epsilon, N, d, tail.c) if epsilon <= 2 else 0.0
    b = _b_term(epsilon, N, q, tail)
    return tail.C * ((K + rate) / epsilon + a + b)
