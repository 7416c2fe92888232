"""Moments of a standard normal variable conditioned on ``Z <= zeta``.

The hot path uses the two-term recurrence

    m_k = (k - 1) m_{k-2} - zeta**(k-1) * lam,   lam = phi(zeta) / Phi(zeta)

so only the inverse Mills ratio ``lam`` has to be computed carefully.  Below
``MILLS_CROSSOVER`` it comes from a continued fraction for the Mills ratio
instead of the quotient ``phi / Phi``, which loses relative precision as
``Phi`` approaches underflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from math import comb

import numpy as np
from scipy.special import ndtr

MILLS_CROSSOVER = -8.0
MAX_ORDER = 5

_SQRT_2PI = math.sqrt(2.0 * math.pi)
_CF_DEPTH = 200


def _mills_ratio_cf(t: float) -> float:
    """Mills ratio ``Phi(-t) / phi(t)`` for ``t > 0`` by Laplace's continued fraction."""
    acc = t
    for k in range(_CF_DEPTH, 0, -1):
        acc = t + k / acc
    return 1.0 / acc


def inverse_mills(zeta: float) -> float:
    """``phi(zeta) / Phi(zeta)``; 0 at ``+inf``, never NaN for finite input."""
    if zeta == math.inf:
        return 0.0
    if zeta < MILLS_CROSSOVER:
        return 1.0 / _mills_ratio_cf(-zeta)
    phi = math.exp(-0.5 * zeta * zeta) / _SQRT_2PI
    return phi / float(ndtr(zeta))


@dataclass(frozen=True)
class TruncatedMomentTable:
    """``m[k] = E[Z**k | Z <= zeta]`` for ``k = 0..MAX_ORDER``."""

    zeta: float
    m: tuple[float, ...]

    def __getitem__(self, k: int) -> float:
        return self.m[k]

    def shifted(self, x: float, k: int) -> float:
        """``E[(x - Z)**k | Z <= zeta]``."""
        return sum(comb(k, j) * x ** (k - j) * (-1) ** j * self.m[j] for j in range(k + 1))


def trunc_moments(zeta: float, order: int = MAX_ORDER) -> TruncatedMomentTable:
    zeta = float(zeta)
    if math.isnan(zeta) or zeta == -math.inf:
        raise ValueError(f"zeta must be finite or +inf, got {zeta}")
    if zeta == math.inf:
        # unconditional moments of N(0, 1)
        m = [1.0, 0.0]
        for k in range(2, order + 1):
            m.append((k - 1) * m[k - 2])
        return TruncatedMomentTable(zeta, tuple(m[: order + 1]))

    lam = inverse_mills(zeta)
    m = [1.0, -lam]
    for k in range(2, order + 1):
        m.append((k - 1) * m[k - 2] - zeta ** (k - 1) * lam)
    return TruncatedMomentTable(zeta, tuple(m[: order + 1]))


def shifted_moment(x: float, zeta: float, k: int) -> float:
    """``E[(x - Z)**k | Z <= zeta]`` by binomial expansion over the moment table."""
    if k not in (1, 2, 3):
        raise ValueError("k must be 1, 2 or 3")
    return trunc_moments(zeta).shifted(x, k)

