"""Closed-form tail approximation of ``w(b) = P(max |v'| > b)``.

Three contributions are assembled: an interior term near each maximiser of
``|p|`` (scale ``u^{-1/2} e^{-u^2/2}``) and one term per end of the interval
(scale ``u_end^{-1} e^{-u_end^2/2}``).  For constant forcing only the two end
terms remain and both ends share one level ``u_h``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .kernel import spectral_moments
from .solver import CONSTANT, INTERIOR_MAX, AssumptionError, ProblemSpec
from .truncnorm import trunc_moments

LEFT = "left"
RIGHT = "right"
HOMO = "homo"

INTERIOR_U = "interior-u"
LEFT_U0 = "left-u0"
RIGHT_UL = "right-uL"
HOMO_UH = "homo-uh"

ZETA_RANGE = (-2.0, 3.0)
ZETA_RANGE_WIDE = (-5.0, 7.0)
XI_STEP = 1e-3
GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class LevelEquationError(ArithmeticError):
    """No root of a level equation on its increasing branch; ``b`` is too small."""


class SearchEdgeError(ArithmeticError):
    """Maximiser of ``G`` pinned to the edge of the widened search interval."""


# ---------------------------------------------------------------------------
# interior objects


def H(x, u: float, spec: ProblemSpec):
    """``|x| exp(-Delta sigma u x^2 / 2)``."""
    x = np.asarray(x, dtype=float)
    out = np.abs(x) * np.exp(-0.5 * spec.kernel.delta * spec.sigma * u * x * x)
    return float(out) if out.ndim == 0 else out


def gamma_star(u: float, spec: ProblemSpec) -> float:
    return 1.0 / math.sqrt(u * spec.kernel.delta * spec.sigma)


@dataclass(frozen=True)
class LevelSolution:
    u: float
    residual: float
    which: str
    b: float


def _root_on_increasing_branch(f: Callable[[float], float], b: float, sigma: float, which: str) -> float:
    lo = 1.0 / (2.0 * sigma) * (1.0 + 1e-9) + 1e-12
    f_lo = f(lo)
    if f_lo >= 0:
        raise LevelEquationError(
            f"{which}: b={b:g} is below the smallest level reachable on the increasing "
            f"branch (u > 1/(2 sigma) = {1 / (2 * sigma):.4g}); outside the asymptotic regime"
        )
    hi = 10.0 * max(1.0, math.log(b) / sigma)
    for _ in range(60):
        if f(hi) > 0:
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise LevelEquationError(f"{which}: no bracket found for b={b:g}")
    return brentq(f, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=200)


def interior_log_lhs(u: float, p_abs: float, spec: ProblemSpec) -> float:
    """Log of ``|p(x*)| / sqrt(sigma Delta u) * exp(sigma u - 1/2)``."""
    s, d = spec.sigma, spec.kernel.delta
    return math.log(p_abs) - 0.5 * math.log(s * d * u) + s * u - 0.5


def solve_u_interior(b: float, spec: ProblemSpec, p_abs: Optional[float] = None) -> LevelSolution:
    if p_abs is None:
        xs = spec.forcing.x_star
        if xs is None:
            raise AssumptionError("interior level needs an interior maximiser of |p|")
        p_abs = abs(float(spec.forcing.p(np.asarray(xs))))
    logb = math.log(b)
    f = lambda u: interior_log_lhs(u, p_abs, spec) - logb
    u = _root_on_increasing_branch(f, b, spec.sigma, INTERIOR_U)
    return LevelSolution(u, math.exp(f(u) + logb) - b, INTERIOR_U, b)


# ---------------------------------------------------------------------------
# boundary objects


def _end_values(end: str, spec: ProblemSpec) -> tuple[float, float, float]:
    f = spec.forcing
    if end == HOMO:
        if f.case != CONSTANT:
            raise AssumptionError("homogeneous quantities need constant forcing")
        return f.p0, 0.0, 0.0
    x = 0.0 if end == LEFT else spec.L
    xa = np.asarray(x)
    return float(f.p(xa)), float(f.dp(xa)), float(f.d2p(xa))


def _quad_coefs(end: str, u: float, spec: ProblemSpec) -> tuple[float, float]:
    """``(|p|, c)`` with ``sign(p) H = e^{-x^2/2} E[|p| (x-Z) + c (x-Z)^2 | Z <= zeta]``."""
    p, dp, _ = _end_values(end, spec)
    if p == 0.0:
        raise AssumptionError(f"p vanishes at the {end} end; the boundary term is degenerate")
    if math.isinf(u) or end == HOMO:
        return abs(p), 0.0
    c = dp / (2.0 * math.sqrt(spec.kernel.delta * spec.sigma * u))
    if end == RIGHT:
        c = -c
    return abs(p), math.copysign(1.0, p) * c


def H_boundary(x, zeta: float, u: float, end: str, spec: ProblemSpec):
    """``H_0`` (``end='left'``), ``H_L`` (``'right'``) or ``H_h`` (``'homo'``), sign-adjusted.

    ``u = math.inf`` gives the limit form without the ``p'`` correction.
    """
    pa, c = _quad_coefs(end, u, spec)
    m = trunc_moments(zeta)
    x = np.asarray(x, dtype=float)
    e1 = x - m[1]
    e2 = x * x - 2 * x * m[1] + m[2]
    out = np.exp(-0.5 * x * x) * (pa * e1 + c * e2)
    return float(out) if out.ndim == 0 else out


def _newton(coefs: list[float], x: float, steps: int = 3) -> float:
    for _ in range(steps):
        f = df = 0.0
        for cf in coefs:
            df = df * x + f
            f = f * x + cf
        if df == 0.0:
            break
        x -= f / df
    return x


def _quadratic_roots(a: float, b: float, c: float) -> list[float]:
    disc = b * b - 4 * a * c
    if disc < 0:
        return []
    q = -0.5 * (b + math.copysign(math.sqrt(disc), b))
    if q == 0.0:
        return [0.0]
    return [q / a, c / q]


def _real_roots(coefs: tuple[float, ...]) -> list[float]:
    """Real roots of a polynomial of degree <= 3 (highest power first).

    A leading coefficient below ``1e-12`` of the others is dropped; the root it
    carries lies beyond ``1e12`` times the scale of the rest, where the
    callers' objective has long vanished.
    """
    coefs = list(coefs)
    while len(coefs) > 1 and abs(coefs[0]) <= 1e-12 * max(abs(x) for x in coefs[1:]):
        coefs.pop(0)
    if len(coefs) == 1:
        return []
    deg = len(coefs) - 1
    if deg <= 0:
        return []
    if deg == 1:
        return [-coefs[1] / coefs[0]]
    if deg == 2:
        return [_newton(coefs, x) for x in _quadratic_roots(*coefs)]
    a, b, c, d = coefs
    b, c, d = b / a, c / a, d / a
    # largest real root of the depressed cubic t^3 + p t + q, x = t - b/3
    p = c - b * b / 3
    q = 2 * b**3 / 27 - b * c / 3 + d
    disc = (q / 2) ** 2 + (p / 3) ** 3
    if disc > 0:
        sq = math.sqrt(disc)
        u1, u2 = -q / 2 + sq, -q / 2 - sq
        t = math.copysign(abs(u1) ** (1 / 3), u1) + math.copysign(abs(u2) ** (1 / 3), u2)
        r1 = t - b / 3
    elif p == 0.0 or math.sqrt(-p / 3) == 0.0:
        r1 = -b / 3
    else:
        r = 2 * math.sqrt(-p / 3)
        phi = math.acos(max(-1.0, min(1.0, 3 * q / (p * r)))) / 3
        r1 = max((r * math.cos(phi - 2 * math.pi * k / 3) - b / 3 for k in range(3)), key=abs)
    r1 = _newton(coefs, r1)
    if r1 == 0.0:
        rest = _quadratic_roots(1.0, b, c)
    else:
        # the other two from r2 r3 = -d / r1 and r1 (r2 + r3) + r2 r3 = c
        prod = -d / r1
        rest = _quadratic_roots(1.0, -(c - prod) / r1, prod)
    return [r1] + [_newton(coefs, x) for x in rest]


def _inner_sup(pa: float, c: float, zeta: float) -> tuple[float, float]:
    """``max_{x <= zeta} log|e^{-x^2/2} Q(x)|`` for ``Q = pa (x - m1) + c (x^2 - 2 x m1 + m2)``.

    Interior extrema solve ``Q' - x Q = 0`` (a cubic); the only other
    candidate is the end point ``x = zeta`` since the objective vanishes at
    ``-inf``.
    """
    m = trunc_moments(zeta)
    m1, m2 = m[1], m[2]
    q2, q1, q0 = c, pa - 2 * c * m1, -pa * m1 + c * m2
    # Q' - xQ = -q2 x^3 - q1 x^2 + (2 q2 - q0) x + q1
    cands = [zeta] + [r for r in _real_roots((-q2, -q1, 2 * q2 - q0, q1)) if r <= zeta]
    best_x, best = zeta, -math.inf
    for x in cands:
        val = abs(math.exp(-0.5 * x * x) * (q2 * x * x + q1 * x + q0))
        lv = math.log(val) if val > 0 else -math.inf
        if lv > best:
            best_x, best = x, lv
    return best, best_x


def G_boundary(zeta: float, u: float, end: str, spec: ProblemSpec) -> float:
    """``sup_{x <= zeta} log |H_end(x, zeta; u)|``."""
    pa, c = _quad_coefs(end, u, spec)
    return _inner_sup(pa, c, zeta)[0]


def golden_max(f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-10, max_iter: int = 200):
    """Golden-section search for the maximiser of a unimodal ``f`` on ``[lo, hi]``."""
    x1 = hi - GOLDEN * (hi - lo)
    x2 = lo + GOLDEN * (hi - lo)
    f1, f2 = f(x1), f(x2)
    it = 0
    while hi - lo > tol and it < max_iter:
        if f1 < f2:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + GOLDEN * (hi - lo)
            f2 = f(x2)
        else:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - GOLDEN * (hi - lo)
            f1 = f(x1)
        it += 1
    return (x1, f1) if f1 >= f2 else (x2, f2)


def _maximise_G(g: Callable[[float], float], rng: tuple[float, float], n_scan: int = 101):
    zs = np.linspace(rng[0], rng[1], n_scan)
    vals = np.array([g(z) for z in zs])
    i = int(np.argmax(vals))
    if i == 0 or i == n_scan - 1:
        return None
    return golden_max(g, zs[i - 1], zs[i + 1])


@dataclass(frozen=True)
class GSolution:
    zeta_hat: float
    G_max: float
    Xi: float
    x_hat: float


def G_and_zeta(end: str, u: float, spec: ProblemSpec) -> tuple[Callable[[float], float], GSolution]:
    """``G`` as a function of ``zeta``, its maximiser, and the curvature ``Xi``.

    ``Xi`` is always taken from the ``u = inf`` limit of ``G``.
    """
    pa, c = _quad_coefs(end, u, spec)
    g = lambda z: _inner_sup(pa, c, z)[0]
    g_max, z_hat = _sup_over_zeta(pa, c, end)
    x_hat = _inner_sup(pa, c, z_hat)[1]
    z_lim = z_hat if (math.isinf(u) or c == 0.0) else G_and_zeta(end, math.inf, spec)[1].zeta_hat
    return g, GSolution(z_hat, g_max, xi_curvature(end, z_lim, spec), x_hat)


def xi_curvature(end: str, zeta: float, spec: ProblemSpec, step: float = XI_STEP) -> float:
    """``-G''(zeta)`` of the limit-form ``G`` by central differences."""
    pa, _ = _quad_coefs(end, math.inf, spec)
    g = lambda z: _inner_sup(pa, 0.0, z)[0]
    return -(g(zeta + step) - 2.0 * g(zeta) + g(zeta - step)) / step**2


def _sup_over_zeta(pa: float, c: float, end: str, warm: Optional[float] = None) -> tuple[float, float]:
    """``(max_zeta G, argmax)``; with ``warm`` the bracket walks and widens from there."""
    g = lambda z: _inner_sup(pa, c, z)[0]
    if warm is not None:
        centre, half = warm, 0.02
        for _ in range(8):
            lo, hi = centre - half, centre + half
            z, val = golden_max(g, lo, hi)
            if lo + 1e-6 < z < hi - 1e-6:
                return val, z
            centre, half = z, 2.0 * half
    best = _maximise_G(g, ZETA_RANGE)
    if best is None:
        best = _maximise_G(g, ZETA_RANGE_WIDE, n_scan=241)
        if best is None:
            raise SearchEdgeError(f"maximiser of G_{end} lies at the edge of {ZETA_RANGE_WIDE}")
    z, val = best
    return val, z


def boundary_log_sup(u: float, end: str, spec: ProblemSpec, warm: Optional[float] = None) -> tuple[float, float]:
    """``(log sup_{x <= zeta} |H_end|, zeta_hat)`` at level ``u``.

    With ``warm`` set, the outer search starts from a small golden-section
    bracket around the previous maximiser instead of a full scan.
    """
    pa, c = _quad_coefs(end, u, spec)
    return _sup_over_zeta(pa, c, end, warm)


def boundary_log_lhs(u: float, end: str, spec: ProblemSpec, warm: Optional[float] = None) -> float:
    """Log of ``e^{sigma u} / sqrt(Delta sigma u) * sup H_end``."""
    s, d = spec.sigma, spec.kernel.delta
    return s * u - 0.5 * math.log(d * s * u) + boundary_log_sup(u, end, spec, warm)[0]


def solve_u_boundary(b: float, end: str, spec: ProblemSpec) -> LevelSolution:
    which = {LEFT: LEFT_U0, RIGHT: RIGHT_UL, HOMO: HOMO_UH}[end]
    logb = math.log(b)
    pa, c0 = _quad_coefs(end, 1.0, spec)
    if c0 == 0.0:
        # the sup does not depend on u; solve once
        sup_log = boundary_log_sup(math.inf, end, spec)[0]
        s, d = spec.sigma, spec.kernel.delta
        f = lambda u: s * u - 0.5 * math.log(d * s * u) + sup_log - logb
        u = _root_on_increasing_branch(f, b, spec.sigma, which)
        return LevelSolution(u, math.exp(f(u) + logb) - b, which, b)

    warm = [_sup_over_zeta(pa, 0.0, end)[1]]

    def f(u):
        val, z = boundary_log_sup(u, end, spec, warm[0])
        warm[0] = z
        s, d = spec.sigma, spec.kernel.delta
        return s * u - 0.5 * math.log(d * s * u) + val - logb

    u = _root_on_increasing_branch(f, b, spec.sigma, which)
    # residual from a cold evaluation
    resid = math.exp(boundary_log_lhs(u, end, spec)) - b
    return LevelSolution(u, resid, which, b)


def kappa_const(end: str, zeta_hat: float, spec: ProblemSpec) -> float:
    """The ``kappa`` constant of an end (or of the homogeneous case)."""
    d, a, _ = spectral_moments(spec.kernel)
    s = spec.sigma
    m = trunc_moments(zeta_hat)
    e1 = m.shifted(zeta_hat, 1)
    if not e1 > 0:
        raise ArithmeticError(f"E(zeta - Z | Z <= zeta) = {e1} at zeta={zeta_hat}; inconsistent maximiser")
    e_z4 = zeta_hat * m[4] - m[5]  # E[Z^4 (zeta - Z) | Z <= zeta]
    base = a / (24.0 * d * d * s)
    if end == HOMO:
        return base * zeta_hat**4 - base * m[4] + a * e_z4 / (24.0 * d * d * s * s * e1)
    p, _, p2 = _end_values(end, spec)
    e3 = m.shifted(zeta_hat, 3)
    bracket = (p2 / p) / (6.0 * s * d) * e3 + a / (24.0 * d * d * s * s) * e_z4
    return base * zeta_hat - base * m[4] + bracket / e1


# ---------------------------------------------------------------------------
# prefactors


def _prefactor(spec: ProblemSpec) -> float:
    d, a, _ = spectral_moments(spec.kernel)
    return math.sqrt(d) / ((2 * math.pi) ** 1.5 * math.sqrt(a - d * d))


def z_integral(spec: ProblemSpec) -> float:
    """``int exp{-(Delta^2 z^2/(A - Delta^2) - z/sigma)/2} dz`` in closed form."""
    d, a, _ = spectral_moments(spec.kernel)
    return math.sqrt(2 * math.pi * (a - d * d)) / d * math.exp((a - d * d) / (8 * spec.sigma**2 * d * d))


def D_boundary(Xi: float, kappa: float, spec: ProblemSpec) -> float:
    if not Xi > 0:
        raise ArithmeticError(f"Xi must be positive, got {Xi}")
    d = spec.kernel.delta
    return _prefactor(spec) * math.exp(kappa / spec.sigma) * z_integral(spec) * math.sqrt(2 * math.pi * d / Xi)


def interior_exponent(y, z, spec: ProblemSpec, curvature_ratio: float):
    """Exponent of the interior ``(y, z)`` integrand; ``curvature_ratio = p''(x*)/p(x*)``."""
    d, a, _ = spectral_moments(spec.kernel)
    s = spec.sigma
    return -0.5 * (
        d * d * z * z / (a - d * d)
        - z / s
        - y * y * z / d
        + a / (4 * d**4) * y**4
        + y * y * (a / (2 * s * d**3) - curvature_ratio / (s * d * d))
    )


def interior_y_cutoff(spec: ProblemSpec, rel: float = 1e-12) -> float:
    # after the z-integral the y-marginal is bounded by exp(-y^4 / (8 Delta^2)) times its peak
    d = spec.kernel.delta
    return (8.0 * d * d * math.log(1.0 / rel)) ** 0.25


def _interior_curvature_ratio(spec: ProblemSpec, x_star: float) -> float:
    xa = np.asarray(x_star)
    p = float(spec.forcing.p(xa))
    p2 = float(spec.forcing.d2p(xa))
    if p == 0.0 or not p2 / p < 0:
        raise AssumptionError(
            f"need sign(p) p'' < 0 at x*={x_star} (got p={p:.6g}, p''={p2:.6g}); the interior integral diverges"
        )
    return p2 / p


def D_interior(spec: ProblemSpec, x_star: Optional[float] = None, y_max: Optional[float] = None) -> float:
    """Interior prefactor: analytic z-integral, then adaptive quadrature in ``y``."""
    d, a, _ = spectral_moments(spec.kernel)
    s = spec.sigma
    x_star = spec.forcing.x_star if x_star is None else x_star
    rho = _interior_curvature_ratio(spec, x_star)
    az = d * d / (a - d * d)
    c2 = a / (2 * s * d**3) - rho / (s * d * d)

    def marginal(y):
        beta = 1.0 / s + y * y / d
        return math.exp(beta * beta / (8 * az) - 1.0 / (8 * az * s * s) - 0.5 * (a / (4 * d**4) * y**4 + c2 * y * y))

    Y = interior_y_cutoff(spec) if y_max is None else y_max
    iy = 2.0 * quad(marginal, 0.0, Y, epsabs=0.0, epsrel=1e-13, limit=200)[0]
    iz = math.sqrt(2 * math.pi / az) * math.exp(1.0 / (8 * az * s * s))
    pre = _prefactor(spec) * math.exp(a / (24 * s * s * d * d) + rho / (6 * s * s * d))
    return pre * iz * iy


# ---------------------------------------------------------------------------
# assembly


@dataclass(frozen=True)
class BoundaryConstants:
    zeta: float
    Xi: float
    kappa: float
    D: float


@dataclass
class ApproxReport:
    b: float
    case: str
    levels: dict
    boundary_left: Optional[BoundaryConstants]
    boundary_right: Optional[BoundaryConstants]
    interior_D: Optional[float]
    term_interior: float
    term_left: float
    term_right: float
    total: float
    log_total: float
    dominant_location: str
    ratio_r: float
    homo_literal_theorem: bool = False
    total_homo_literal: Optional[float] = None
    total_homo_proof: Optional[float] = None
    notes: list = field(default_factory=list)

    @property
    def terms(self) -> dict:
        return {"interior": self.term_interior, "left-end": self.term_left, "right-end": self.term_right}

    def to_dict(self) -> dict:
        lv = self.levels
        bl, br = self.boundary_left, self.boundary_right
        get = lambda obj, name: None if obj is None else getattr(obj, name)
        return {
            "b": self.b,
            "case": self.case,
            "u": get(lv.get("interior"), "u"),
            "u0": get(lv.get("left"), "u"),
            "uL": get(lv.get("right"), "u"),
            "zeta0": get(bl, "zeta"),
            "zetaL": get(br, "zeta"),
            "Xi0": get(bl, "Xi"),
            "XiL": get(br, "Xi"),
            "kappa0": get(bl, "kappa"),
            "kappaL": get(br, "kappa"),
            "D": self.interior_D,
            "D0": get(bl, "D"),
            "DL": get(br, "D"),
            "term_interior": self.term_interior,
            "term_left": self.term_left,
            "term_right": self.term_right,
            "total": self.total,
            "log_total": self.log_total,
            "dominant": self.dominant_location,
            "r": self.ratio_r,
            "homo_literal_theorem": self.homo_literal_theorem,
            "total_homo_literal": self.total_homo_literal,
            "total_homo_proof": self.total_homo_proof,
            "zeta_source": "u-limit",
            "notes": "; ".join(self.notes),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def boundary_constants(end: str, spec: ProblemSpec) -> BoundaryConstants:
    _, sol = G_and_zeta(end, math.inf, spec)
    kap = kappa_const(end, sol.zeta_hat, spec)
    return BoundaryConstants(sol.zeta_hat, sol.Xi, kap, D_boundary(sol.Xi, kap, spec))


def _log_term(D: float, u: float, power: float) -> float:
    return math.log(D) - power * math.log(u) - 0.5 * u * u


def approximate_tail(b: float, spec: ProblemSpec, homo_literal_theorem: bool = False) -> ApproxReport:
    if not b > 0:
        raise ValueError("b must be positive")
    if spec.sigma == 0:
        raise AssumptionError("the tail approximation needs sigma > 0")
    f = spec.forcing
    r = location_ratio_r().r
    notes: list[str] = []
    levels: dict = {}
    log_terms = {"interior": -math.inf, "left-end": -math.inf, "right-end": -math.inf}
    bl = br = None
    D_int = None
    lit = proof = None

    if f.case == CONSTANT:
        sol = solve_u_boundary(b, HOMO, spec)
        levels["left"] = levels["right"] = sol
        bc = boundary_constants(HOMO, spec)
        bl = br = bc
        lt_proof = _log_term(bc.D, sol.u, 1.0)
        lt_lit = _log_term(bc.D, sol.u, 0.0)
        proof = 2.0 * math.exp(lt_proof)
        lit = 2.0 * math.exp(lt_lit)
        lt = lt_lit if homo_literal_theorem else lt_proof
        log_terms["left-end"] = log_terms["right-end"] = lt
    elif f.case == INTERIOR_MAX:
        inner = [x for x in f.x_stars if 0.0 < x < spec.L]
        if len(inner) < len(f.x_stars):
            notes.append("maximiser of |p| on the boundary: interior term removed")
        if inner:
            sol = solve_u_interior(b, spec)
            levels["interior"] = sol
            D_int = sum(D_interior(spec, x) for x in inner)
            log_terms["interior"] = _log_term(D_int, sol.u, 0.5)
        for end, key in ((LEFT, "left"), (RIGHT, "right")):
            p_end = _end_values(end, spec)[0]
            if p_end == 0.0:
                notes.append(f"p vanishes at the {key} end: boundary term omitted")
                continue
            sol = solve_u_boundary(b, end, spec)
            levels[key] = sol
            bc = boundary_constants(end, spec)
            if end == LEFT:
                bl = bc
            else:
                br = bc
            log_terms[f"{key}-end"] = _log_term(bc.D, sol.u, 1.0)
    else:
        raise AssumptionError(f"unknown forcing case {f.case!r}")

    top = max(log_terms.values())
    dominant = max(log_terms, key=lambda k: log_terms[k])
    log_total = top + math.log(sum(math.exp(v - top) for v in log_terms.values()))
    ti, tl, tr = (math.exp(log_terms[k]) for k in ("interior", "left-end", "right-end"))
    return ApproxReport(
        b=float(b), case=f.case, levels=levels, boundary_left=bl, boundary_right=br, interior_D=D_int,
        term_interior=ti, term_left=tl, term_right=tr, total=ti + tl + tr, log_total=log_total,
        dominant_location=dominant, ratio_r=r, homo_literal_theorem=homo_literal_theorem,
        total_homo_literal=lit, total_homo_proof=proof, notes=notes,
    )


# ---------------------------------------------------------------------------
# most probable location


@dataclass(frozen=True)
class RatioResult:
    r: float
    r_grid: float
    zeta: float
    x: float


_R_CACHE: dict = {}


def location_ratio_r(grid_step: float = 1e-2) -> RatioResult:
    """``sup_{x <= zeta} e^{(1 - x^2)/2} (x - E[Z | Z <= zeta])``: coarse grid, then refinement."""
    if grid_step in _R_CACHE:
        return _R_CACHE[grid_step]
    zs = np.arange(ZETA_RANGE[0], ZETA_RANGE[1] + grid_step / 2, grid_step)
    best = (-math.inf, 0.0, 0.0)
    for z in zs:
        m1 = trunc_moments(z)[1]
        xs = np.arange(z, -3.0 - grid_step / 2, -grid_step)
        vals = np.exp(0.5 * (1 - xs * xs)) * (xs - m1)
        j = int(np.argmax(vals))
        if vals[j] > best[0]:
            best = (float(vals[j]), float(z), float(xs[j]))
    r_grid, z0, _ = best
    g = lambda z: _inner_sup(1.0, 0.0, z)[0]
    z_hat, g_max = golden_max(g, z0 - grid_step, z0 + grid_step, tol=1e-12)
    x_hat = _inner_sup(1.0, 0.0, z_hat)[1]
    res = RatioResult(math.exp(0.5 + g_max), r_grid, z_hat, x_hat)
    _R_CACHE[grid_step] = res
    return res


def dominant_location(b: float, spec: ProblemSpec, rtol: float = 1e-9) -> dict:
    """Analytic verdict from ``|p(x*)|`` versus ``r |p(end)|``, cross-checked with the term sizes."""
    f = spec.forcing
    r = location_ratio_r().r
    p0 = abs(float(f.p(np.asarray(0.0))))
    pL = abs(float(f.p(np.asarray(spec.L))))
    end_label, p_end = ("left-end", p0) if p0 >= pL else ("right-end", pL)
    tie = False
    if f.case == CONSTANT:
        analytic = end_label
        p_star = p0
    else:
        p_star = abs(float(f.p(np.asarray(f.x_star))))
        if not 0.0 < f.x_star < spec.L:
            analytic = end_label
        elif abs(p_star - r * p_end) <= rtol * p_star:
            analytic = "tie"
            tie = True
        else:
            analytic = "interior" if p_star > r * p_end else end_label
    report = approximate_tail(b, spec)
    by_terms = report.dominant_location
    return {
        "analytic": analytic,
        "by_terms": by_terms,
        "agree": analytic == by_terms,
        "tie": tie,
        "r": r,
        "p_star": p_star,
        "p_end": p_end,
        "terms": report.terms,
    }
