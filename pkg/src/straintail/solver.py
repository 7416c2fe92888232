"""Forcing profiles, the model record, and the Dirichlet strain ``v'(x)``.

Two independent routes are provided: the closed-form strain (weighted
average of the antiderivative ``F`` under weights ``e^{sigma xi}``), and a
conservative finite-volume solve of ``(a v')' = p`` with ``v(0) = v(L) = 0``
used as an oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.linalg import solve_banded
from scipy.special import erf

from .kernel import StationaryKernel

INTERIOR_MAX = "interior-max"
CONSTANT = "constant"

ArrayFn = Callable[[np.ndarray], np.ndarray]


class AssumptionError(ValueError):
    """The model violates one of the standing assumptions on the forcing or kernel."""


@dataclass(frozen=True)
class ForcingProfile:
    """External force density ``p`` with its first two derivatives.

    ``antiderivative`` is the exact ``F(x) = int_0^x p`` when known; otherwise
    :func:`antiderivative_F` falls back to adaptive quadrature.
    """

    p: ArrayFn = field(repr=False)
    dp: ArrayFn = field(repr=False)
    d2p: ArrayFn = field(repr=False)
    case: str
    x_stars: tuple[float, ...] = ()
    p0: Optional[float] = None
    antiderivative: Optional[ArrayFn] = field(default=None, repr=False)
    name: str = "custom"
    params: tuple = ()

    @property
    def x_star(self) -> Optional[float]:
        return self.x_stars[0] if self.x_stars else None


def constant_forcing(p0: float) -> ForcingProfile:
    p0 = float(p0)
    if p0 == 0.0:
        raise AssumptionError("constant forcing must be nonzero")
    return ForcingProfile(
        p=lambda x: np.full_like(np.asarray(x, dtype=float), p0),
        dp=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
        d2p=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
        case=CONSTANT,
        p0=p0,
        antiderivative=lambda x: p0 * np.asarray(x, dtype=float),
        name="constant",
        params=(("p0", p0),),
    )


def gaussian_bump(base: float, amplitude: float, center: float, width: float) -> ForcingProfile:
    """``p(x) = base + amplitude * exp(-(x - center)^2 / (2 width^2))``."""
    base, amp, c, w = map(float, (base, amplitude, center, width))
    if w <= 0:
        raise AssumptionError("gaussian-bump width must be positive")
    s2 = math.sqrt(2.0) * w

    def g(x):
        return np.exp(-((np.asarray(x, dtype=float) - c) ** 2) / (2 * w * w))

    def F(x):
        x = np.asarray(x, dtype=float)
        return base * x + amp * w * math.sqrt(math.pi / 2) * (erf((x - c) / s2) - erf(-c / s2))

    return ForcingProfile(
        p=lambda x: base + amp * g(x),
        dp=lambda x: -amp * (np.asarray(x, dtype=float) - c) / w**2 * g(x),
        d2p=lambda x: amp * (((np.asarray(x, dtype=float) - c) / w**2) ** 2 - 1 / w**2) * g(x),
        case=INTERIOR_MAX,
        x_stars=(c,),
        antiderivative=F,
        name="gaussian-bump",
        params=(("base", base), ("amplitude", amp), ("center", c), ("width", w)),
    )


def cosine_bump(base: float, amplitude: float, center: float, L: float) -> ForcingProfile:
    """``p(x) = base + amplitude * cos(pi (x - center) / L)``; peak at ``center``."""
    base, amp, c, L = map(float, (base, amplitude, center, L))
    k = math.pi / L
    return ForcingProfile(
        p=lambda x: base + amp * np.cos(k * (np.asarray(x, dtype=float) - c)),
        dp=lambda x: -amp * k * np.sin(k * (np.asarray(x, dtype=float) - c)),
        d2p=lambda x: -amp * k * k * np.cos(k * (np.asarray(x, dtype=float) - c)),
        case=INTERIOR_MAX,
        x_stars=(c,),
        antiderivative=lambda x: base * np.asarray(x, dtype=float)
        + amp / k * (np.sin(k * (np.asarray(x, dtype=float) - c)) - math.sin(-k * c)),
        name="cosine-bump",
        params=(("base", base), ("amplitude", amp), ("center", c)),
    )


@dataclass(frozen=True)
class ProblemSpec:
    L: float
    sigma: float
    kernel: StationaryKernel
    forcing: ForcingProfile

    def __post_init__(self):
        if not self.L > 0:
            raise ValueError(f"L must be positive, got {self.L}")
        # sigma = 0 is a valid deterministic limit for simulation; the asymptotics reject it
        if not self.sigma >= 0:
            raise ValueError(f"sigma must be nonnegative, got {self.sigma}")


def validate_forcing(spec: ProblemSpec, n: int = 2001) -> None:
    """Raise :class:`AssumptionError` when the forcing is outside both admissible cases."""
    f, L = spec.forcing, spec.L
    if f.case == CONSTANT:
        if f.x_stars:
            raise AssumptionError("constant forcing cannot carry x_star")
        return
    if f.case != INTERIOR_MAX:
        raise AssumptionError(f"unknown forcing case {f.case!r}")
    if not f.x_stars:
        raise AssumptionError("interior-max forcing needs x_star")
    xs = np.linspace(0.0, L, n)
    ap = np.abs(f.p(xs))
    top = max(abs(float(f.p(np.asarray(x)))) for x in f.x_stars)
    for x in f.x_stars:
        if not 0.0 <= x <= L:
            raise AssumptionError(f"x_star={x} outside [0, L]")
        px = float(f.p(np.asarray(x)))
        if abs(abs(px) - top) > 1e-12 * top:
            raise AssumptionError(f"x_star={x} is not a global maximiser of |p|")
        if 0.0 < x < L and not np.sign(px) * float(f.d2p(np.asarray(x))) < 0:
            raise AssumptionError(f"|p| is not strongly concave at x_star={x} (need sign(p) p'' < 0)")
    if np.max(ap) > top * (1 + 1e-9):
        j = int(np.argmax(ap))
        raise AssumptionError(f"|p({xs[j]:.6g})|={ap[j]:.6g} exceeds |p(x_star)|={top:.6g}")


def uniform_grid(L: float, n_intervals: int) -> np.ndarray:
    return np.linspace(0.0, float(L), int(n_intervals) + 1)


def trapezoid_weights(grid: np.ndarray) -> np.ndarray:
    h = np.diff(grid)
    w = np.zeros_like(grid)
    w[:-1] += h / 2
    w[1:] += h / 2
    return w


def antiderivative_F(forcing: ForcingProfile, x):
    """``F(x) = int_0^x p(t) dt``, exact when the profile supplies it."""
    if forcing.antiderivative is not None:
        out = forcing.antiderivative(np.asarray(x, dtype=float))
        return float(out) if np.ndim(out) == 0 else out
    from scipy.integrate import quad

    f = lambda t: float(forcing.p(np.asarray(t)))
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.array([quad(f, 0.0, xi, epsabs=1e-14, epsrel=1e-12)[0] for xi in xs])
    return float(out[0]) if np.ndim(x) == 0 else out


def strain_from_values(F_vals: np.ndarray, xi: np.ndarray, sigma: float, weights: np.ndarray):
    """Closed-form strain on a grid for one path (1D) or a batch of paths (rows).

    Returns ``(log_e, g)`` with ``v' = exp(log_e) * g``: ``log_e = sigma xi`` and
    ``g = F - <F>`` where ``<F>`` is the trapezoid average under ``e^{sigma xi}``
    computed in shifted form so large ``sigma xi`` cannot overflow.
    """
    s = sigma * xi
    e = np.exp(s - s.max(axis=-1, keepdims=True))
    we = e * weights
    avg = (we @ F_vals) / we.sum(axis=-1)
    g = F_vals - np.expand_dims(avg, -1)
    return s, g


def strain_closed_form(spec: ProblemSpec, path) -> tuple[np.ndarray, np.ndarray]:
    """``(x, v'(x))`` on the path grid."""
    grid, xi = _grid_values(spec, path)
    F = antiderivative_F(spec.forcing, grid)
    s, g = strain_from_values(F, xi, spec.sigma, trapezoid_weights(grid))
    return grid, np.exp(s) * g


def solve_fd_oracle(spec: ProblemSpec, path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Finite-volume solution ``(x, v, v')`` of ``(a v')' = p``, ``v(0) = v(L) = 0``.

    Face coefficients are ``a`` at cell midpoints, ``exp(-sigma (xi_i + xi_{i+1}) / 2)``.
    The flux ``a v'`` on each face is recovered from the solution and the
    strain at the nodes is the flux at the node divided by ``a`` there.
    """
    grid, xi = _grid_values(spec, path)
    n = grid.size
    if n < 3:
        raise ValueError("need at least three grid points")
    h = np.diff(grid)
    s = spec.sigma
    a_face = np.exp(-s * 0.5 * (xi[:-1] + xi[1:]))
    k = a_face / h
    # nodal control volumes of width (h_{i-1} + h_i)/2
    p_nodes = spec.forcing.p(grid)
    rhs = p_nodes[1:-1] * 0.5 * (h[:-1] + h[1:])
    m = n - 2
    ab = np.zeros((3, m))
    ab[0, 1:] = k[1:-1]
    ab[1, :] = -(k[:-1] + k[1:])
    ab[2, :-1] = k[1:-1]
    if not np.all(np.isfinite(ab)):
        raise FloatingPointError("overflow in exp(-sigma xi); path too extreme for this sigma")
    v_in = solve_banded((1, 1), ab, rhs)
    v = np.concatenate([[0.0], v_in, [0.0]])
    flux_face = k * np.diff(v)
    # flux q = a v' satisfies q' = p, so at node i interpolate from the faces
    # with the local slope p: q(x_i) = q_face -/+ p * h/2, averaged.
    q = np.empty(n)
    q[1:-1] = 0.5 * (flux_face[:-1] + p_nodes[1:-1] * h[:-1] / 2 + flux_face[1:] - p_nodes[1:-1] * h[1:] / 2)
    q[0] = flux_face[0] - 0.5 * h[0] * 0.5 * (p_nodes[0] + p_nodes[1])
    q[-1] = flux_face[-1] + 0.5 * h[-1] * 0.5 * (p_nodes[-1] + p_nodes[-2])
    vprime = q * np.exp(s * xi)
    return grid, v, vprime


def max_abs_strain(spec: ProblemSpec, path) -> tuple[float, float]:
    """Maximum of ``|v'|`` over the grid and its location (first on ties)."""
    grid, vp = strain_closed_form(spec, path)
    a = np.abs(vp)
    i = int(np.argmax(a))
    return float(a[i]), float(grid[i])


def _grid_values(spec: ProblemSpec, path) -> tuple[np.ndarray, np.ndarray]:
    grid = np.asarray(path.grid, dtype=float)
    xi = np.asarray(path.values, dtype=float)
    if grid.shape != xi.shape or grid.ndim != 1:
        raise ValueError("path grid and values must be 1D and of equal length")
    if abs(grid[0]) > 1e-12 or abs(grid[-1] - spec.L) > 1e-9 * spec.L:
        raise ValueError(f"path grid must span [0, {spec.L}]")
    return grid, xi
