"""Monte Carlo and importance-sampling estimates of ``P(max |v'| > b)``.

Draws are generated in fixed-size chunks; chunk ``c`` always uses the
stream ``(seed, c)`` and chunk results are reduced in index order, so the
estimate does not depend on how many worker threads process the chunks.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

from .asymptotics import LevelEquationError, approximate_tail
from .sampler import grid_field, rng_for
from .solver import (CONSTANT, AssumptionError, ProblemSpec, antiderivative_F,
                     strain_from_values, uniform_grid)

DIRECT = "direct"
TILTED = "tilted"

CHUNK = 4096
THREADS_ENV = "STRAINTAIL_THREADS"


@dataclass(frozen=True)
class TailEstimate:
    p_hat: float
    stderr: float
    n: int
    method: str
    b: float
    grid_n: int
    zeta: Optional[float] = None
    hits: int = 0

    @property
    def rel_stderr(self) -> float:
        return self.stderr / self.p_hat if self.p_hat > 0 else math.inf

    def to_dict(self) -> dict:
        return asdict(self)


def worker_count() -> int:
    raw = os.environ.get(THREADS_ENV, "0").strip() or "0"
    k = int(raw)
    if k < 0:
        raise ValueError(f"{THREADS_ENV} must be >= 0")
    return k if k > 0 else (os.cpu_count() or 1)


def _F_range(spec: ProblemSpec, grid: Optional[np.ndarray]) -> tuple[float, float]:
    xs = np.linspace(0.0, spec.L, 10001)
    if grid is not None:
        xs = np.union1d(xs, grid)
    F = antiderivative_F(spec.forcing, xs)
    return float(np.min(F)), float(np.max(F))


def osc_F(spec: ProblemSpec, grid: Optional[np.ndarray] = None) -> float:
    lo, hi = _F_range(spec, grid)
    return hi - lo


def zeta_star(spec: ProblemSpec, b: float, grid: Optional[np.ndarray] = None) -> float:
    """Largest tilt level for which ``{max|v'| > b}`` lies inside ``{sup xi > zeta}``.

    Follows from ``|v'(x)| <= e^{sigma sup xi} * osc F``.
    """
    if b <= 0 or spec.sigma == 0:
        return -math.inf
    return (math.log(b) - math.log(osc_F(spec, grid))) / spec.sigma


def envelope_levels(spec: ProblemSpec, b: float, grid: np.ndarray) -> np.ndarray:
    """Per-node levels ``zeta_i`` with ``{|v'(x_i)| > b} ⊆ {xi(x_i) > zeta_i}``.

    ``v'(x) = e^{sigma xi(x)} (F(x) - <F>)`` and the weighted average ``<F>``
    lies in ``[min F, max F]``, so ``|F(x) - <F>|`` is at most the distance
    from ``F(x)`` to the farther end of that range.  The smallest level is
    :func:`zeta_star`.
    """
    grid = np.asarray(grid, dtype=float)
    if b <= 0 or spec.sigma == 0:
        return np.full(grid.shape, -math.inf)
    lo, hi = _F_range(spec, grid)
    F = antiderivative_F(spec.forcing, grid)
    reach = np.maximum(F - lo, hi - F)
    with np.errstate(divide="ignore"):
        return (math.log(b) - np.log(reach)) / spec.sigma


class _Batch:
    """Per-run constants shared by the chunk workers."""

    def __init__(self, spec: ProblemSpec, b: float, grid_n: int, method: str, zeta: Optional[float]):
        self.spec = spec
        self.grid = uniform_grid(spec.L, grid_n)
        self.field = grid_field(spec.kernel, self.grid)
        self.F = antiderivative_F(spec.forcing, self.grid)
        self.logb = math.log(b) if b > 0 else -math.inf
        self.b = b
        self.method = method
        self.zeta = zeta

    def run_chunk(self, seed: int, c: int, size: int):
        rng = rng_for(seed, c)
        if self.method == TILTED:
            paths, llr, _ = self.field.draw_tilted(rng, size, self.zeta)
            w = np.exp(llr)
        else:
            paths = self.field.draw(rng, size)
            w = np.ones(size)
        s, g = strain_from_values(self.F, paths, self.spec.sigma, self.field.weights)
        with np.errstate(divide="ignore"):
            log_abs = s + np.log(np.abs(g))
        idx = np.argmax(log_abs, axis=1)
        top = log_abs[np.arange(size), idx]
        hit = top > self.logb if self.b != math.inf else np.zeros(size, dtype=bool)
        return hit, w, self.grid[idx]


def _chunk_sizes(n: int) -> list[int]:
    full, rest = divmod(n, CHUNK)
    return [CHUNK] * full + ([rest] if rest else [])


def _run(spec: ProblemSpec, b: float, n: int, grid_n: int, seed: int, method: str, zeta: Optional[float]):
    if n < 1:
        raise ValueError("n must be >= 1")
    batch = _Batch(spec, b, grid_n, method, zeta)
    sizes = _chunk_sizes(n)
    jobs = list(enumerate(sizes))
    workers = min(worker_count(), len(jobs))
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(lambda job: batch.run_chunk(seed, *job), jobs))
    else:
        parts = [batch.run_chunk(seed, c, size) for c, size in jobs]
    hit = np.concatenate([p[0] for p in parts])
    w = np.concatenate([p[1] for p in parts])
    loc = np.concatenate([p[2] for p in parts])
    return hit, w, loc


def _estimate(vals: np.ndarray) -> tuple[float, float]:
    n = vals.size
    mean = float(np.sum(vals) / n)
    if n < 2:
        return mean, 0.0
    return mean, float(np.std(vals, ddof=1) / math.sqrt(n))


def mc_direct(spec: ProblemSpec, b: float, n: int, grid_n: int, seed: int) -> TailEstimate:
    hit, _, _ = _run(spec, b, n, grid_n, seed, DIRECT, None)
    p, se = _estimate(hit.astype(float))
    return TailEstimate(p, se, int(n), DIRECT, float(b), int(grid_n), None, int(hit.sum()))


def mc_tilted(
    spec: ProblemSpec, b: float, n: int, grid_n: int, seed: int, zeta: Optional[float] = None
) -> TailEstimate:
    """Importance-sampling estimate under the excursion-tilted law over all of ``[0, L]``.

    By default each node is tilted at its own level from
    :func:`envelope_levels`.  A scalar ``zeta`` tilts every node at that level;
    values above :func:`zeta_star` are rejected because the estimator would
    then miss part of the event.  The reported ``zeta`` is the lowest level used.
    """
    grid = uniform_grid(spec.L, grid_n)
    if zeta is None:
        levels = envelope_levels(spec, b, grid)
        zeta = float(np.min(levels))
    else:
        z_max = zeta_star(spec, b, grid)
        if zeta > z_max + 1e-12:
            raise ValueError(f"zeta={zeta} exceeds zeta*(b)={z_max}; the estimator would be biased")
        levels = float(zeta)
    if zeta == -math.inf or b == math.inf:
        hit, _, _ = _run(spec, b, n, grid_n, seed, DIRECT, None)
        p, se = _estimate(hit.astype(float))
        return TailEstimate(p, se, int(n), TILTED, float(b), int(grid_n), zeta, int(hit.sum()))
    hit, w, _ = _run(spec, b, n, grid_n, seed, TILTED, levels)
    p, se = _estimate(np.where(hit, w, 0.0))
    return TailEstimate(p, se, int(n), TILTED, float(b), int(grid_n), float(zeta), int(hit.sum()))


@dataclass
class LocationHistogram:
    edges: np.ndarray
    masses: np.ndarray
    mass_near: float
    mass_left: float
    mass_right: float
    stderr_left: float
    stderr_right: float
    stderr_diff: float
    rho: float
    n_exceed: int
    anchors: tuple

    def summary(self) -> dict:
        return {
            "mass_near_ends_and_xstar": self.mass_near,
            "mass_left": self.mass_left,
            "mass_right": self.mass_right,
            "stderr_left": self.stderr_left,
            "stderr_right": self.stderr_right,
            "stderr_left_minus_right": self.stderr_diff,
            "rho": self.rho,
            "n_exceed": self.n_exceed,
            "anchors": list(self.anchors),
            "edges": self.edges.tolist(),
            "masses": self.masses.tolist(),
        }

    def to_csv(self) -> str:
        lines = ["bin_lo,bin_hi,mass"]
        for lo, hi, m in zip(self.edges[:-1], self.edges[1:], self.masses):
            lines.append(f"{lo!r},{hi!r},{m!r}")
        return "\n".join(lines) + "\n"


def _ratio_stderr(w: np.ndarray, ind: np.ndarray, mass: float) -> float:
    return float(math.sqrt(np.sum(w * w * (ind - mass) ** 2)) / np.sum(w))


def location_histogram(
    spec: ProblemSpec,
    b: float,
    n: int,
    grid_n: int,
    seed: int,
    rho: Optional[float] = None,
    bins: int = 20,
    method: str = TILTED,
) -> LocationHistogram:
    """Law of the arg-max of ``|v'|`` given ``max |v'| > b`` (self-normalised weights)."""
    rho = 2.0 * spec.kernel.length_scale if rho is None else float(rho)
    if method == TILTED and b > 0 and spec.sigma > 0:
        hit, w, loc = _run(spec, b, n, grid_n, seed, TILTED, envelope_levels(spec, b, uniform_grid(spec.L, grid_n)))
    else:
        hit, w, loc = _run(spec, b, n, grid_n, seed, DIRECT, None)
    if not hit.any():
        raise ArithmeticError(f"no exceedances of b={b:g} in {n} draws; b too large for n")
    w, loc = w[hit], loc[hit]
    total = float(np.sum(w))
    edges = np.linspace(0.0, spec.L, bins + 1)
    masses = np.histogram(loc, bins=edges, weights=w)[0] / total
    anchors = [0.0, spec.L]
    if spec.forcing.case != CONSTANT:
        anchors[1:1] = list(spec.forcing.x_stars)
    near = np.zeros(loc.size, dtype=bool)
    for a in anchors:
        near |= np.abs(loc - a) <= rho
    left = (np.abs(loc) <= rho).astype(float)
    right = (np.abs(loc - spec.L) <= rho).astype(float)
    ml, mr = float(np.sum(w * left) / total), float(np.sum(w * right) / total)
    return LocationHistogram(
        edges=edges,
        masses=masses,
        mass_near=float(np.sum(w * near) / total),
        mass_left=ml,
        mass_right=mr,
        stderr_left=_ratio_stderr(w, left, ml),
        stderr_right=_ratio_stderr(w, right, mr),
        stderr_diff=_ratio_stderr(w, left - right, ml - mr),
        rho=rho,
        n_exceed=int(hit.sum()),
        anchors=tuple(anchors),
    )


COMPARE_COLUMNS = ("b", "method", "p_hat", "stderr", "approx_total", "term_interior",
                   "term_left", "term_right", "ratio")


def compare(
    spec: ProblemSpec,
    b_list: Sequence[float],
    n: int,
    grid_n: int,
    seed: int,
    method: str = TILTED,
    homo_literal_theorem: bool = False,
) -> list[dict]:
    """One row per threshold: simulation estimate beside the asymptotic terms."""
    b_list = [float(b) for b in b_list]
    if any(b2 <= b1 for b1, b2 in zip(b_list, b_list[1:])):
        raise ValueError("b_list must be strictly increasing")
    rows = []
    for i, b in enumerate(b_list):
        # each level gets its own stream so rows are reproducible in isolation
        sub_seed = int(np.random.SeedSequence(int(seed), spawn_key=(10_000 + i,)).generate_state(1)[0])
        if method == TILTED:
            est = mc_tilted(spec, b, n, grid_n, sub_seed)
        else:
            est = mc_direct(spec, b, n, grid_n, sub_seed)
        row = {"b": b, "method": method, "p_hat": est.p_hat, "stderr": est.stderr}
        try:
            rep = approximate_tail(b, spec, homo_literal_theorem=homo_literal_theorem)
        except (AssumptionError, LevelEquationError, ValueError, ArithmeticError):
            rep = None
        if rep is None:
            row.update(approx_total="n/a", term_interior="n/a", term_left="n/a", term_right="n/a", ratio="n/a")
        else:
            row.update(approx_total=rep.total, term_interior=rep.term_interior, term_left=rep.term_left,
                       term_right=rep.term_right,
                       ratio=rep.total / est.p_hat if est.p_hat > 0 else "n/a")
        rows.append(row)
    return rows


def rows_to_csv(rows: list[dict]) -> str:
    lines = [",".join(COMPARE_COLUMNS)]
    for r in rows:
        lines.append(",".join(repr(r[c]) if isinstance(r[c], float) else str(r[c]) for c in COMPARE_COLUMNS))
    return "\n".join(lines) + "\n"
