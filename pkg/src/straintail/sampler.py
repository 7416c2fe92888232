"""Draw realisations of the Gaussian field on a grid.

Three laws are supported: the nominal law, the law conditioned on pinned
values, and the excursion-tilted law ``dQ = mes(A_zeta) / E[mes(A_zeta)] dP``
with ``A_zeta = {x in region : xi(x) > zeta}``.  The excursion measure is the
trapezoid measure of the grid, so the likelihood ratio reported with each
tilted draw is exact for the discretised field.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.linalg import eigh
from scipy.special import log_ndtr, ndtr, ndtri

from .kernel import SQUARED_EXPONENTIAL, StationaryKernel, spectral_moments
from .solver import trapezoid_weights

DIRECT = "direct"
CONDITIONAL = "conditional"
TILTED = "excursion-tilted"

# eigenvalues below this fraction of the largest are dropped from the factor
EIG_RTOL = 1e-13
# tolerated mismatch between the factor's variances and C(0)
VAR_ATOL = 1e-8


class IllConditionedGrid(RuntimeError):
    pass


@dataclass(frozen=True)
class PathSample:
    grid: np.ndarray
    values: np.ndarray
    seed: int
    method: str = DIRECT
    log_likelihood_ratio: float = 0.0
    tau: Optional[float] = None

    def __post_init__(self):
        g = np.asarray(self.grid)
        if g.ndim != 1 or g.size != np.asarray(self.values).size:
            raise ValueError("grid and values must be 1D of equal length")
        if g.size > 1 and not np.all(np.diff(g) > 0):
            raise ValueError("grid must be strictly increasing")

    def to_csv(self, path) -> None:
        np.savetxt(path, np.column_stack([self.grid, self.values]), delimiter=",",
                   header="x,xi", comments="", fmt="%.17g")


class GridField:
    """Covariance factor of the field on a fixed grid, shared by all draws.

    The factor is ``V sqrt(lam)`` over the eigenpairs that are not negligible;
    round-off negative eigenvalues are discarded with them.
    Smooth kernels on fine grids have numerically singular covariances; this
    keeps the realisations smooth where a jittered Cholesky factor would add
    white noise of the jitter's size.
    """

    def __init__(self, kernel: StationaryKernel, grid):
        spectral_moments(kernel)
        self.kernel = kernel
        self.grid = np.ascontiguousarray(grid, dtype=float)
        if self.grid.ndim != 1 or self.grid.size == 0:
            raise ValueError("grid must be a nonempty 1D array")
        if self.grid.size > 1 and not np.all(np.diff(self.grid) > 0):
            raise ValueError("grid must be strictly increasing")
        cov = kernel(np.abs(self.grid[:, None] - self.grid[None, :]))
        n = self.grid.size
        # largest eigenvalue is at most trace = n, so this drops only negligible modes
        lam, vec = eigh(cov, subset_by_value=[EIG_RTOL * n, np.inf], driver="evr")
        self.factor = vec * np.sqrt(lam)
        self.rank = int(lam.size)
        self.var = np.einsum("ij,ij->i", self.factor, self.factor)
        # a clipped negative part or a dropped significant mode shows up on the diagonal
        dev = float(np.max(np.abs(self.var - np.diag(cov)))) if self.rank else math.inf
        if not dev <= VAR_ATOL:
            raise IllConditionedGrid(
                f"covariance factor misses the diagonal by {dev:.3e}; the kernel is not "
                f"positive definite on this grid or the grid is too dense for the length scale"
            )
        self.weights = trapezoid_weights(self.grid) if self.grid.size > 1 else np.ones(1)

    @property
    def n(self) -> int:
        return self.grid.size

    def index_of(self, x: float) -> int:
        i = int(np.argmin(np.abs(self.grid - x)))
        if abs(self.grid[i] - x) > 1e-9 * max(1.0, abs(x)):
            raise ValueError(f"location {x} is not a grid point")
        return i

    def cov_column(self, i: int) -> np.ndarray:
        return self.factor @ self.factor[i]

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """``size`` nominal draws as rows."""
        z = rng.standard_normal((size, self.rank))
        return z @ self.factor.T

    def condition(self, paths: np.ndarray, idx: Sequence[int], values: np.ndarray) -> np.ndarray:
        """Matheron update: turn nominal draws into draws given ``xi[idx] = values``."""
        idx = list(idx)
        S = self.factor @ self.factor[idx].T  # n x k
        K = S[idx]
        resid = np.asarray(values, dtype=float) - paths[..., idx]
        coef = np.linalg.solve(K, np.atleast_2d(resid).T).T
        out = paths + coef @ S.T
        out[..., idx] = values
        return out

    def draw_tilted(
        self,
        rng: np.random.Generator,
        size: int,
        zeta,
        region: Optional[tuple[float, float]] = None,
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``size`` draws from the excursion-tilted law with their log ``dP/dQ``.

        ``zeta`` is a level or one level per node.  The peak node is chosen
        with probability proportional to its share of ``E[mes A_zeta]`` inside
        ``region``, its value from the normal law conditioned above its level,
        and the rest of the path by conditional infill.
        """
        zeta = np.broadcast_to(np.asarray(zeta, dtype=float), self.grid.shape)
        w = self._region_weights(region)
        if np.all(zeta == -math.inf):
            taus = rng.choice(self.n, size=size, p=w / w.sum())
            return self.draw(rng, size), np.zeros(size), taus
        sd = np.sqrt(self.var)
        tail = ndtr(-zeta / sd)  # P(xi_i > zeta_i) per node
        expected = float(np.sum(w * tail))
        if not expected > 0:
            raise ValueError("tilt levels leave no excursion mass inside the region")
        taus = rng.choice(self.n, size=size, p=w * tail / expected)
        paths = self.draw(rng, size)
        # inverse-cdf draw from N(0, var_i) restricted to (zeta_i, inf)
        uni = rng.random(size)
        peak = -sd[taus] * ndtri(uni * tail[taus])
        peak = np.maximum(peak, zeta[taus])
        S = self.factor @ self.factor[taus].T  # n x size
        coef = (peak - paths[np.arange(size), taus]) / self.var[taus]
        paths = paths + (S * coef).T
        paths[np.arange(size), taus] = peak
        # dQ/dP = mes(A_zeta) / E[mes(A_zeta)]
        mes = ((paths > zeta) * w).sum(axis=1)
        return paths, math.log(expected) - np.log(mes), taus

    def _region_weights(self, region):
        if self.n == 1:
            return np.ones(1)
        w = self.weights.copy()
        if region is not None:
            lo, hi = region
            if not lo < hi:
                raise ValueError("tilt region must be nonempty")
            inside = (self.grid >= lo - 1e-12) & (self.grid <= hi + 1e-12)
            # trapezoid weights of the sub-grid inside the region
            sub = np.where(inside)[0]
            if sub.size < 2:
                raise ValueError("tilt region contains fewer than two grid points")
            w = np.zeros(self.n)
            w[sub] = trapezoid_weights(self.grid[sub])
        return w


_FIELDS: dict = {}
_FIELDS_MAX = 16


def grid_field(kernel: StationaryKernel, grid) -> GridField:
    """Factorised field for ``(kernel, grid)``, memoised on the kernel parameters and grid bytes."""
    g = np.ascontiguousarray(grid, dtype=float)
    cov_id = None if kernel.family == SQUARED_EXPONENTIAL else id(kernel.cov)
    key = (kernel.family, kernel.length_scale, kernel.delta, kernel.a4, cov_id, g.tobytes())
    field = _FIELDS.get(key)
    if field is None:
        field = GridField(kernel, g)
        if len(_FIELDS) >= _FIELDS_MAX:
            _FIELDS.pop(next(iter(_FIELDS)))
        _FIELDS[key] = field
    return field


def rng_for(seed: int, *key: int) -> np.random.Generator:
    """Independent stream for ``(seed, *key)``; the same key always gives the same stream."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key)))


def sample_path(kernel: StationaryKernel, grid, seed: int) -> PathSample:
    field = grid_field(kernel, grid)
    xi = field.draw(rng_for(seed), 1)[0]
    return PathSample(field.grid.copy(), xi, int(seed), DIRECT)


def sample_conditional(kernel: StationaryKernel, grid, pins: Iterable[tuple[float, float]], seed: int) -> PathSample:
    field = grid_field(kernel, grid)
    pins = list(pins)
    idx = [field.index_of(x) for x, _ in pins]
    vals = np.array([v for _, v in pins], dtype=float)
    xi = field.draw(rng_for(seed), 1)
    xi = field.condition(xi, idx, vals)[0]
    return PathSample(field.grid.copy(), xi, int(seed), CONDITIONAL)


def sample_excursion_tilted(
    kernel: StationaryKernel,
    grid,
    region: tuple[float, float],
    zeta: float,
    seed: int,
) -> PathSample:
    field = grid_field(kernel, grid)
    paths, llr, taus = field.draw_tilted(rng_for(seed), 1, float(zeta), region)
    return PathSample(field.grid.copy(), paths[0], int(seed), TILTED, float(llr[0]), float(field.grid[taus[0]]))


def excursion_log_ratio(grid, values, zeta: float, region: tuple[float, float]) -> float:
    """``log E[mes A_zeta] - log mes(A_zeta)`` for a unit-variance field, trapezoid measure.

    Raises ``ValueError`` when the excursion set has zero measure on the grid.
    """
    grid = np.asarray(grid, dtype=float)
    lo, hi = region
    inside = (grid >= lo - 1e-12) & (grid <= hi + 1e-12)
    sub = np.where(inside)[0]
    w = trapezoid_weights(grid[sub])
    mes = float(np.sum(w * (np.asarray(values)[sub] > zeta)))
    if mes == 0.0:
        raise ValueError("excursion set has zero measure on the grid; grid too coarse")
    return math.log(float(np.sum(w))) + float(log_ndtr(-zeta)) - math.log(mes)
