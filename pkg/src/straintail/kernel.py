"""Stationary unit-variance covariance kernels and their spectral moments."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

SQUARED_EXPONENTIAL = "squared-exponential"
CUSTOM_ANALYTIC = "custom-analytic"


class KernelError(ValueError):
    """Kernel fails an admissibility check (e.g. the A > Delta**2 gate)."""


@dataclass(frozen=True)
class StationaryKernel:
    """Covariance ``C(x)`` of a stationary, mean-zero, unit-variance process.

    ``delta`` and ``a4`` are the spectral moments ``-C''(0)`` and ``C''''(0)``;
    ``b6`` is the sixth-order coefficient of the small-lag expansion
    ``1 - delta x^2/2 + a4 x^4/24 - b6 x^6``, kept only as a diagnostic.
    """

    family: str
    length_scale: float
    delta: float
    a4: float
    b6: float
    cov: Callable[[np.ndarray], np.ndarray] = field(compare=False, repr=False)

    def __call__(self, x):
        return self.cov(np.asarray(x, dtype=float))


def squared_exponential(length_scale: float = 1.0) -> StationaryKernel:
    ell = float(length_scale)
    if not ell > 0:
        raise KernelError(f"length_scale must be positive, got {length_scale}")
    inv2 = 1.0 / (2.0 * ell * ell)
    return StationaryKernel(
        family=SQUARED_EXPONENTIAL,
        length_scale=ell,
        delta=1.0 / ell**2,
        a4=3.0 / ell**4,
        b6=1.0 / (48.0 * ell**6),
        cov=lambda x: np.exp(-inv2 * x * x),
    )


def custom_kernel(
    cov: Callable[[np.ndarray], np.ndarray],
    delta: float,
    a4: float,
    b6: float = float("nan"),
    length_scale: float = 1.0,
    validate: bool = True,
    rtol: float = 1e-5,
) -> StationaryKernel:
    """Wrap a user covariance; the supplied moments are checked by finite differences.

    Set ``validate=False`` to build kernels that are known to fail the
    assumptions (useful for diagnostics).
    """
    kern = StationaryKernel(CUSTOM_ANALYTIC, float(length_scale), float(delta), float(a4), float(b6), cov)
    if validate:
        d_fd, a_fd = fd_spectral_moments(kern)
        if abs(d_fd - delta) > rtol * abs(delta) or abs(a_fd - a4) > rtol * abs(a4):
            raise KernelError(
                f"supplied moments (delta={delta}, A={a4}) disagree with finite differences "
                f"(delta={d_fd:.8g}, A={a_fd:.8g})"
            )
    return kern


def eval_cov(kernel: StationaryKernel, x):
    out = kernel(np.abs(np.asarray(x, dtype=float)))
    return float(out) if np.ndim(out) == 0 else out


def spectral_moments(kernel: StationaryKernel) -> tuple[float, float, float]:
    """``(Delta, A, B)``; raises :class:`KernelError` unless ``A > Delta**2 > 0``."""
    d, a = kernel.delta, kernel.a4
    if not d > 0:
        raise KernelError(f"Delta must be positive, got {d}")
    if not a > d * d:
        raise KernelError(f"degenerate kernel: A={a} <= Delta^2={d * d}")
    return d, a, kernel.b6


def joint_deriv_cov(kernel: StationaryKernel) -> np.ndarray:
    """Covariance of ``(xi(x), xi'(x), xi''(x))`` at a single point."""
    d, a = kernel.delta, kernel.a4
    return np.array([[1.0, 0.0, -d], [0.0, d, 0.0], [-d, 0.0, a]])


def _richardson(stencil: Callable[[float], float], h: float, levels: int) -> float:
    # both stencils have even error expansions in h
    table: list[list[float]] = []
    for i in range(levels):
        row = [stencil(h / 2**i)]
        for j in range(1, i + 1):
            row.append((4**j * row[j - 1] - table[i - 1][j - 1]) / (4**j - 1))
        table.append(row)
    return table[-1][-1]


def fd_spectral_moments(kernel: StationaryKernel, h: Optional[float] = None, levels: int = 4) -> tuple[float, float]:
    """``(-C''(0), C''''(0))`` from central stencils with Richardson extrapolation."""
    c = lambda x: float(kernel(np.asarray(x)))
    scale = kernel.length_scale
    h2 = 0.05 * scale if h is None else h
    h4 = 0.2 * scale if h is None else h
    second = lambda s: (c(s) - 2.0 * c(0.0) + c(-s)) / s**2
    fourth = lambda s: (c(2 * s) - 4 * c(s) + 6 * c(0.0) - 4 * c(-s) + c(-2 * s)) / s**4
    return -_richardson(second, h2, levels), _richardson(fourth, h4, levels)


@dataclass
class AssumptionCheck:
    name: str
    passed: bool
    detail: str
    worst_lag: Optional[float] = None
    worst_value: Optional[float] = None

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "detail": self.detail,
            "worst_lag": self.worst_lag,
            "worst_value": self.worst_value,
        }


@dataclass
class AssumptionReport:
    checks: list[AssumptionCheck]
    fitted_delta: float
    fitted_a4: float

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> AssumptionCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def as_dict(self) -> dict:
        return {
            "all_passed": self.all_passed,
            "fitted_delta": self.fitted_delta,
            "fitted_A": self.fitted_a4,
            "checks": [c.as_dict() for c in self.checks],
        }


def check_assumptions(
    kernel: StationaryKernel,
    grid,
    tol: float = 1e-12,
    delta_rtol: float = 1e-4,
    a4_rtol: float = 1e-2,
) -> AssumptionReport:
    """Grid diagnostics for unit variance, the small-lag expansion, monotonicity and the A-gate.

    Monotonicity of ``C(lambda x)`` in ``lambda`` must hold on all of the
    positive half-line, so the lags are the grid extended geometrically out to
    ``20 * max(grid, length_scale)``.
    """
    lags = np.unique(np.abs(np.asarray(grid, dtype=float)))
    lags = lags[lags > 0]
    if lags.size < 3:
        raise ValueError("grid needs at least three positive lags")
    checks = []

    c0 = float(kernel(np.asarray(0.0)))
    vals = kernel(lags)
    over = np.abs(vals) - 1.0
    i = int(np.argmax(over))
    ok = abs(c0 - 1.0) <= tol and over[i] <= tol
    checks.append(AssumptionCheck("A1", bool(ok), f"C(0)={c0!r}, max|C| on grid={float(1 + over[i])!r}",
                                  float(lags[i]), float(vals[i])))

    # solve C(x) - 1 = -D x^2/2 + A x^4/24 - B x^6 on the three smallest lags
    x3 = lags[:3]
    mat = np.column_stack([-x3**2 / 2, x3**4 / 24, -x3**6])
    d_fit, a_fit, _ = np.linalg.solve(mat, kernel(x3) - 1.0)
    d_err = abs(d_fit - kernel.delta) / abs(kernel.delta)
    a_err = abs(a_fit - kernel.a4) / abs(kernel.a4) if kernel.a4 != 0 else math.inf
    checks.append(AssumptionCheck(
        "A2", bool(d_err <= delta_rtol and a_err <= a4_rtol),
        f"fitted Delta={d_fit:.10g} (rel err {d_err:.2e}), fitted A={a_fit:.6g} (rel err {a_err:.2e})",
        float(x3[0]), float(d_fit)))

    reach = 20.0 * max(lags[-1], kernel.length_scale)
    ext = np.geomspace(lags[-1], reach, 400) if reach > lags[-1] else np.empty(0)
    all_lags = np.unique(np.concatenate([[0.0], lags, ext]))
    cv = kernel(all_lags)
    rises = np.diff(cv)
    j = int(np.argmax(rises))
    checks.append(AssumptionCheck(
        "A3", bool(rises[j] <= tol),
        f"largest increase of C along the ray: {rises[j]:.3e}",
        float(all_lags[j + 1]), float(cv[j + 1])))

    gate = kernel.delta > 0 and kernel.a4 > kernel.delta**2
    checks.append(AssumptionCheck(
        "A-gate", bool(gate), f"A - Delta^2 = {kernel.a4 - kernel.delta**2:.6g}"))

    return AssumptionReport(checks, float(d_fit), float(a_fit))
