"""Phase, potential and eigenfunction reconstruction from a nodeless amplitude.

Given R with exact derivatives, the phase is S(x) = C * integral of dx/R^2
(line geometry) or C * integral of dr/(r^2 R^2) (radial geometry), and the
potential that makes psi = R e^{iS} a stationary state of energy E is

    line:    V = E + R''/(2R) - C^2/(2 R^4)
    radial:  V = E + R''/(2R) + R'/(r R) - C^2/(2 r^4 R^4)

The phase integral is done with adaptive Gauss-Kronrod 7/15 panels; on a grid
it is accumulated interval by interval and prefix-summed, so S is additive on
grid nodes by construction and stays unwrapped (it may span thousands of
radians near clipped edges).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .prefactor import LINE, RADIAL, NodalPrefactorError, Prefactor, PrefactorDomainError

__all__ = [
    "Grid1D",
    "ReconstructionConfig",
    "ReconstructedState",
    "ClipError",
    "QuadratureError",
    "amplitude",
    "clip_domain",
    "default_grid",
    "phase_at",
    "potential_line",
    "potential_radial",
    "reconstruct",
    "current_density",
]

DEFAULT_CLIP = 1e-3
DEFAULT_QUAD_TOL = 1e-10
_ABS_FLOOR = 1e-14
_MAX_BISECTIONS = 60
# total panel budget per integral: a non-integrable singularity makes the
# bisection tree grow exponentially long before any branch hits depth 60
_MAX_PANELS = 10_000


class ClipError(ValueError):
    """Grid or evaluation point lies where the amplitude is below the clip."""


class QuadratureError(ArithmeticError):
    """Adaptive quadrature failed to converge (near-node integrand blow-up)."""


@dataclass(frozen=True)
class Grid1D:
    """Uniform grid x_i = x_lo + i*h with h = (x_hi - x_lo)/(n - 1)."""

    x_lo: float
    x_hi: float
    n: int

    def __post_init__(self):
        if self.n < 3:
            raise ValueError("grid needs at least 3 nodes")
        if not self.x_lo < self.x_hi:
            raise ValueError("grid interval is empty")

    @property
    def h(self) -> float:
        return (self.x_hi - self.x_lo) / (self.n - 1)

    def points(self) -> np.ndarray:
        return np.linspace(self.x_lo, self.x_hi, self.n)


@dataclass(frozen=True)
class ReconstructionConfig:
    """Knobs for one reconstruction.

    E=None resolves to the family default (for the free family that default is
    C^2/2, fixed by the current constant).  x0=None resolves to the family
    default phase origin.  clip is the relative amplitude threshold: grids
    must stay where the amplitude is >= clip * (its maximum), which keeps
    1/R^4 representable; clip=0 disables the restriction.
    """

    C: float
    grid: Grid1D
    E: Optional[float] = None
    x0: Optional[float] = None
    clip: float = DEFAULT_CLIP
    quad_tol: float = DEFAULT_QUAD_TOL

    def __post_init__(self):
        if not self.quad_tol > 0.0:
            raise ValueError("quad_tol must be positive")
        if self.clip < 0.0:
            raise ValueError("clip must be >= 0")


@dataclass(frozen=True)
class ReconstructedState:
    """Sampled amplitude, phase, potential, eigenfunction and density."""

    grid: Grid1D
    geometry: str
    R: np.ndarray
    dR: np.ndarray
    d2R: np.ndarray
    S: np.ndarray
    V: np.ndarray
    psi: np.ndarray
    rho: np.ndarray
    current: float  # the constant C
    E: float


# --- Gauss-Kronrod 7/15 ----------------------------------------------------

_GK_X = np.array(
    [
        -0.991455371120812639206854697526329,
        -0.949107912342758524526189684047851,
        -0.864864423359769072789712788640926,
        -0.741531185599394439863864773280788,
        -0.586087235467691130294144838258730,
        -0.405845151377397166906606412076961,
        -0.207784955007898467600689403773245,
        0.0,
        0.207784955007898467600689403773245,
        0.405845151377397166906606412076961,
        0.586087235467691130294144838258730,
        0.741531185599394439863864773280788,
        0.864864423359769072789712788640926,
        0.949107912342758524526189684047851,
        0.991455371120812639206854697526329,
    ]
)

_GK_W = np.array(
    [
        0.022935322010529224963732008058970,
        0.063092092629978553290700663189204,
        0.104790010322250183839876322541518,
        0.140653259715525918745189590510238,
        0.169004726639267902826583426598550,
        0.190350578064785409913256402421014,
        0.204432940075298892414161999234649,
        0.209482141084727828012999174891714,
        0.204432940075298892414161999234649,
        0.190350578064785409913256402421014,
        0.169004726639267902826583426598550,
        0.140653259715525918745189590510238,
        0.104790010322250183839876322541518,
        0.063092092629978553290700663189204,
        0.022935322010529224963732008058970,
    ]
)

# Gauss-7 weights, aligned with the odd-indexed Kronrod nodes
_G_W = np.array(
    [
        0.129484966168869693270611432679082,
        0.279705391489276667901467771423780,
        0.381830050505118944950369775488975,
        0.417959183673469387755102040816327,
        0.381830050505118944950369775488975,
        0.279705391489276667901467771423780,
        0.129484966168869693270611432679082,
    ]
)


def _gk15(g, a: float, b: float):
    c = 0.5 * (a + b)
    half = 0.5 * (b - a)
    y = g(c + half * _GK_X)
    i_k = half * float(_GK_W @ y)
    i_g = half * float(_G_W @ y[1::2])
    return i_k, abs(i_k - i_g)


def _adaptive(g, a: float, b: float, tol: float, depth: int = 0, budget=None) -> float:
    if budget is None:
        budget = [_MAX_PANELS]
    i_k, err = _gk15(g, a, b)
    if err <= tol or err <= 1e-15 * abs(i_k):
        return i_k
    if depth >= _MAX_BISECTIONS or budget[0] <= 0:
        raise QuadratureError(
            f"quadrature did not converge on [{a:.6g}, {b:.6g}] "
            f"(depth {depth}, budget left {budget[0]}; integrand blows up near a node?)"
        )
    budget[0] -= 2
    m = 0.5 * (a + b)
    left = _adaptive(g, a, m, 0.5 * tol, depth + 1, budget)
    right = _adaptive(g, m, b, 0.5 * tol, depth + 1, budget)
    return left + right


def _phase_integrand(pref: Prefactor):
    radial = pref.geometry == RADIAL

    def g(s):
        v = pref.eval_many(s)[0]
        if not np.all(v > 0.0):
            raise NodalPrefactorError(
                f"{pref.name}: amplitude not strictly positive inside the "
                "integration range"
            )
        if radial:
            return 1.0 / (s * s * v * v)
        return 1.0 / (v * v)

    return g


def phase_at(
    pref: Prefactor, C: float, x0: float, x: float, quad_tol: float = DEFAULT_QUAD_TOL
) -> float:
    """Phase S(x) with S(x0) = 0, to relative accuracy quad_tol.

    Adaptive Gauss-Kronrod 7/15: panels are bisected until the panel error
    estimate drops below quad_tol*|whole-interval estimate| + 1e-14, the
    tolerance being split between halves.  Antisymmetric under swapping
    x and x0; linear in C (C multiplies the finished integral).
    """
    for point in (x0, x):
        if point < pref.x_lo or point > pref.x_hi:
            raise PrefactorDomainError(
                f"{pref.name}: phase endpoint {point} outside domain"
            )
    if C == 0.0 or x == x0:
        return 0.0
    a, b = (x0, x) if x0 <= x else (x, x0)
    sign = 1.0 if x0 <= x else -1.0
    g = _phase_integrand(pref)
    coarse, _ = _gk15(g, a, b)
    tol = quad_tol * abs(coarse) + _ABS_FLOOR
    return C * sign * _adaptive(g, a, b, tol)


# --- clipping ---------------------------------------------------------------


def amplitude(pref: Prefactor, xs) -> np.ndarray:
    """Amplitude controlling the singular terms: R on a line, r*R radially."""
    xs = np.asarray(xs, dtype=float)
    v = pref.eval_many(xs)[0]
    if pref.geometry == RADIAL:
        return xs * v
    return v


def _bisect_amplitude(pref, thr, lo, hi, lo_below: bool):
    # sign change of amplitude - thr is bracketed in [lo, hi]
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        below = float(amplitude(pref, np.array([mid]))[0]) < thr
        if below == lo_below:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def clip_domain(pref: Prefactor, clip: float = DEFAULT_CLIP, span=None, scan_n: int = 8193):
    """Contiguous interval around the amplitude maximum where it stays above
    clip * max; scanning is confined to `span` (default: the family window)."""
    lo, hi = pref.window if span is None else span
    lo = max(lo, pref.x_lo)
    hi = min(hi, pref.x_hi)
    if not lo < hi:
        raise ValueError("empty clipping span")
    if clip <= 0.0:
        return lo, hi
    xs = np.linspace(lo, hi, scan_n)
    amp = amplitude(pref, xs)
    i = int(np.argmax(amp))
    a_max = float(amp[i])
    if 0 < i < scan_n - 1:
        # parabolic refinement of the maximum
        y0, y1, y2 = amp[i - 1], amp[i], amp[i + 1]
        denom = y0 - 2.0 * y1 + y2
        if denom < 0.0:
            dx = 0.5 * (y0 - y2) / denom
            x_star = xs[i] + dx * (xs[1] - xs[0])
            if lo < x_star < hi:
                a_max = max(a_max, float(amplitude(pref, np.array([x_star]))[0]))
    thr = clip * a_max
    mask = amp >= thr
    if not mask[i]:
        raise ClipError("amplitude scan inconsistent with its own maximum")
    left = i
    while left > 0 and mask[left - 1]:
        left -= 1
    right = i
    while right < scan_n - 1 and mask[right + 1]:
        right += 1
    c_lo = lo if left == 0 else _bisect_amplitude(pref, thr, xs[left - 1], xs[left], True)
    c_hi = hi if right == scan_n - 1 else _bisect_amplitude(
        pref, thr, xs[right], xs[right + 1], False
    )
    return float(c_lo), float(c_hi)


def default_grid(pref: Prefactor, n: int = 2001, clip: float = DEFAULT_CLIP) -> Grid1D:
    lo, hi = clip_domain(pref, clip)
    return Grid1D(lo, hi, n)


# --- potentials --------------------------------------------------------------


def _potential_from_jet(geometry, C, E, xs, v, d1, d2):
    with np.errstate(all="ignore"):
        V = E + d2 / (2.0 * v)
        if geometry == RADIAL:
            V = V + d1 / (xs * v)
        if C != 0.0:
            if geometry == RADIAL:
                u2 = (xs * v) * (xs * v)
            else:
                u2 = v * v
            V = V - (C * C) / (2.0 * u2 * u2)
    if not np.all(np.isfinite(V)):
        raise ClipError(
            "potential overflow where the amplitude underflows; restrict the "
            "grid to the clipped domain or lower C"
        )
    return V


def potential_line(pref: Prefactor, C: float, E: float, x):
    """V = E + R''/(2R) - C^2/(2 R^4); x may be a float or an ndarray."""
    scalar = np.isscalar(x)
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    v, d1, d2 = pref.eval_many(xs)
    V = _potential_from_jet(LINE, C, E, xs, v, d1, d2)
    return float(V[0]) if scalar else V


def potential_radial(pref: Prefactor, C: float, E: float, r):
    """V = E + R''/(2R) + R'/(rR) - C^2/(2 r^4 R^4) for r > 0."""
    scalar = np.isscalar(r)
    rs = np.atleast_1d(np.asarray(r, dtype=float))
    if not np.all(rs > 0.0):
        raise PrefactorDomainError("radial potential requires r > 0")
    v, d1, d2 = pref.eval_many(rs)
    V = _potential_from_jet(RADIAL, C, E, rs, v, d1, d2)
    return float(V[0]) if scalar else V


# --- grid reconstruction ------------------------------------------------------


def _interval_integrals(pref, xs, quad_tol):
    """Integral of the phase integrand over each grid interval.

    One vectorized Gauss-Kronrod panel per interval; the few intervals whose
    error estimate misses quad_tol relative (+1e-14) are redone adaptively.
    """
    a = xs[:-1]
    b = xs[1:]
    c = 0.5 * (a + b)
    half = 0.5 * (b - a)
    nodes = c[:, None] + half[:, None] * _GK_X[None, :]
    v = pref.eval_many(nodes.ravel())[0].reshape(nodes.shape)
    if not np.all(v > 0.0):
        raise NodalPrefactorError(
            f"{pref.name}: amplitude not strictly positive across the grid"
        )
    if pref.geometry == RADIAL:
        g = 1.0 / (nodes * nodes * v * v)
    else:
        g = 1.0 / (v * v)
    i_k = half * (g @ _GK_W)
    i_g = half * (g[:, 1::2] @ _G_W)
    err = np.abs(i_k - i_g)
    tol = quad_tol * np.abs(i_k) + _ABS_FLOOR
    bad = np.flatnonzero(err > tol)
    if bad.size:
        integrand = _phase_integrand(pref)
        for j in bad:
            i_k[j] = _adaptive(integrand, float(a[j]), float(b[j]), float(tol[j]))
    return i_k


def _phase_on_grid(pref, xs, C, x0, quad_tol):
    increments = _interval_integrals(pref, xs, quad_tol)
    T = np.concatenate(([0.0], np.cumsum(increments)))
    # anchor so that S(x0) = 0: nearest node plus one extra panel to x0
    k = int(np.argmin(np.abs(xs - x0)))
    T_ref = T[k]
    if xs[k] != x0:
        g = _phase_integrand(pref)
        a, b = (xs[k], x0) if xs[k] <= x0 else (x0, xs[k])
        sign = 1.0 if xs[k] <= x0 else -1.0
        coarse, _ = _gk15(g, a, b)
        extra = sign * _adaptive(g, a, b, quad_tol * abs(coarse) + _ABS_FLOOR)
        T_ref = T_ref + extra
    return C * (T - T_ref)


def reconstruct(pref: Prefactor, cfg: ReconstructionConfig) -> ReconstructedState:
    """Sample R, S, V, psi and rho on the grid; current is the constant C.

    The grid (and x0) must sit inside the clipped domain: the contiguous
    region where the amplitude stays above cfg.clip times its maximum.
    Changing E is a pure gauge shift of V; changing x0 multiplies psi by one
    global phase.
    """
    grid = cfg.grid
    xs = grid.points()
    C = float(cfg.C)
    x0 = pref.default_x0 if cfg.x0 is None else float(cfg.x0)
    if cfg.E is not None:
        E = float(cfg.E)
    elif pref.default_E is not None:
        E = pref.default_E
    else:
        E = 0.5 * C * C

    if xs[0] < pref.x_lo or xs[-1] > pref.x_hi:
        raise PrefactorDomainError(
            f"grid [{xs[0]}, {xs[-1]}] outside {pref.name} domain "
            f"({pref.x_lo}, {pref.x_hi})"
        )
    span = (
        min(pref.window[0], xs[0], x0),
        max(pref.window[1], xs[-1], x0),
    )
    c_lo, c_hi = clip_domain(pref, cfg.clip, span=span)
    pad = 1e-9 * (c_hi - c_lo)
    if xs[0] < c_lo - pad or xs[-1] > c_hi + pad:
        raise ClipError(
            f"grid [{xs[0]:.6g}, {xs[-1]:.6g}] leaves the clipped domain "
            f"[{c_lo:.6g}, {c_hi:.6g}] (clip={cfg.clip:g}); shrink the grid or "
            "lower clip"
        )
    if x0 < c_lo - pad or x0 > c_hi + pad:
        raise ClipError(
            f"x0={x0:.6g} outside the clipped domain [{c_lo:.6g}, {c_hi:.6g}]"
        )

    v, d1, d2 = pref.eval_many(xs)
    if C == 0.0:
        S = np.zeros_like(xs)
    else:
        S = _phase_on_grid(pref, xs, C, x0, cfg.quad_tol)
    V = _potential_from_jet(pref.geometry, C, E, xs, v, d1, d2)
    psi = v * np.exp(1j * S)
    rho = v * v
    return ReconstructedState(
        grid=grid,
        geometry=pref.geometry,
        R=v,
        dR=d1,
        d2R=d2,
        S=S,
        V=V,
        psi=psi,
        rho=rho,
        current=C,
        E=E,
    )


# --- current density ----------------------------------------------------------


def fd_first_derivative(y: np.ndarray, h: float) -> np.ndarray:
    """Five-point, fourth-order first derivative; one-sided at the edges."""
    y = np.asarray(y, dtype=float)
    n = y.size
    if n < 5:
        raise ValueError("need at least 5 nodes for the 5-point stencil")
    d = np.empty_like(y)
    d[2:-2] = (y[:-4] - 8.0 * y[1:-3] + 8.0 * y[3:-1] - y[4:]) / (12.0 * h)
    d[0] = (-25.0 * y[0] + 48.0 * y[1] - 36.0 * y[2] + 16.0 * y[3] - 3.0 * y[4]) / (12.0 * h)
    d[1] = (-3.0 * y[0] - 10.0 * y[1] + 18.0 * y[2] - 6.0 * y[3] + y[4]) / (12.0 * h)
    d[-2] = (3.0 * y[-1] + 10.0 * y[-2] - 18.0 * y[-3] + 6.0 * y[-4] - y[-5]) / (12.0 * h)
    d[-1] = (25.0 * y[-1] - 48.0 * y[-2] + 36.0 * y[-3] - 16.0 * y[-4] + 3.0 * y[-5]) / (
        12.0 * h
    )
    return d


def current_density(state: ReconstructedState, mode: str = "analytic") -> np.ndarray:
    """Probability current carried by the state; constant and equal to C.

    Line geometry: j = R^2 S'.  Radial geometry the conserved measure is
    r^2 R^2 S' (the flux through a sphere, up to 4 pi).  The analytic path
    substitutes S' = C / (measure) and is exact by construction; mode="fd"
    differentiates the sampled S with the five-point stencil instead, which
    cross-validates the quadrature.
    """
    if state.geometry == RADIAL:
        xs = state.grid.points()
        measure = (xs * xs) * state.rho
    else:
        measure = state.rho
    if mode == "analytic":
        s1 = state.current / measure
    elif mode == "fd":
        s1 = fd_first_derivative(state.S, state.grid.h)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return measure * s1
