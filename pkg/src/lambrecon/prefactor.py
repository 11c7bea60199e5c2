"""Nodeless prefactor families with exact closed-form derivatives.

A Prefactor bundles the amplitude R together with its domain, geometry
(1D line or spherically symmetric radial), the default energy gauge and the
default phase-integral origin.  Built-ins carry hand-written derivatives so
golden tests are bit-reproducible; user expressions are adapted through the
AD evaluator and screened for nodes by dense sampling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .exprparse import Expr, Jet2, eval_jet

__all__ = [
    "LINE",
    "RADIAL",
    "Prefactor",
    "PrefactorDomainError",
    "NodalPrefactorError",
    "family_free",
    "family_gaussian",
    "family_well",
    "family_hydrogen",
    "from_expression",
    "builtin_families",
    "check_nodeless",
]

LINE = "line"
RADIAL = "radial"

_NODELESS_SAMPLES = 10001
# half-width of the sampling window substituted for an infinite domain endpoint
_INFINITE_WINDOW = 30.0


class PrefactorDomainError(ValueError):
    """Evaluation requested outside the prefactor's domain."""


class NodalPrefactorError(ValueError):
    """The sampled amplitude is not strictly positive.

    Only nodeless amplitudes are admissible: a zero of R makes both the phase
    integrand 1/R**2 and the potential term 1/R**4 singular.
    """


@dataclass(frozen=True)
class Prefactor:
    """Amplitude R with exact (value, d1, d2) evaluation on a declared domain."""

    name: str
    x_lo: float
    x_hi: float
    geometry: str
    default_E: Optional[float]
    default_x0: float
    window: tuple
    jet_fn: Callable = field(compare=False, repr=False)

    def __post_init__(self):
        if self.geometry not in (LINE, RADIAL):
            raise ValueError(f"geometry must be {LINE!r} or {RADIAL!r}")
        if not self.x_lo < self.x_hi:
            raise ValueError("empty domain")
        w_lo, w_hi = self.window
        if not (np.isfinite(w_lo) and np.isfinite(w_hi) and w_lo < w_hi):
            raise ValueError("window must be a finite nonempty interval")

    def eval_many(self, xs) -> tuple:
        """Evaluate (R, R', R'') on an array of points inside the closed domain."""
        xs = np.asarray(xs, dtype=float)
        if xs.size and (np.min(xs) < self.x_lo or np.max(xs) > self.x_hi):
            raise PrefactorDomainError(
                f"{self.name}: points outside domain ({self.x_lo}, {self.x_hi})"
            )
        with np.errstate(all="ignore"):
            v, d1, d2 = self.jet_fn(xs)
        out = tuple(
            np.ascontiguousarray(np.broadcast_to(np.asarray(t, dtype=float), xs.shape))
            for t in (v, d1, d2)
        )
        return out

    def eval(self, x: float) -> Jet2:
        v, d1, d2 = self.eval_many(np.array([float(x)]))
        return Jet2(float(v[0]), float(d1[0]), float(d2[0]))


def family_free() -> Prefactor:
    """Constant amplitude: plane wave e^{iCx} once the phase is attached."""

    def jet(xs):
        return (np.ones_like(xs), np.zeros_like(xs), np.zeros_like(xs))

    return Prefactor(
        name="free",
        x_lo=-math.inf,
        x_hi=math.inf,
        geometry=LINE,
        default_E=None,  # fixed by the current constant: E = C^2/2
        default_x0=0.0,
        window=(-10.0, 10.0),
        jet_fn=jet,
    )


def family_gaussian() -> Prefactor:
    """Normalized Gaussian amplitude; C=0 yields the harmonic oscillator."""
    norm = math.pi ** -0.25

    def jet(xs):
        v = norm * np.exp(-0.5 * xs * xs)
        return (v, -xs * v, (xs * xs - 1.0) * v)

    return Prefactor(
        name="gaussian",
        x_lo=-math.inf,
        x_hi=math.inf,
        geometry=LINE,
        default_E=0.5,
        default_x0=0.0,
        window=(-6.0, 6.0),
        jet_fn=jet,
    )


def family_well() -> Prefactor:
    """Cosine amplitude on (-1, 1); C=0 yields the infinite square well."""
    half_pi = 0.5 * math.pi

    def jet(xs):
        v = np.cos(half_pi * xs)
        return (v, -half_pi * np.sin(half_pi * xs), -(half_pi * half_pi) * v)

    return Prefactor(
        name="well",
        x_lo=-1.0,
        x_hi=1.0,
        geometry=LINE,
        default_E=math.pi ** 2 / 8.0,
        default_x0=0.0,
        window=(-0.95, 0.95),
        jet_fn=jet,
    )


def family_hydrogen() -> Prefactor:
    """Exponential radial amplitude; C=0 yields the Coulomb potential."""
    norm = math.pi ** -0.5

    def jet(xs):
        v = norm * np.exp(-xs)
        return (v, -v, v)

    # window floor 0.1: the 1/r^2 phase derivative below that is not
    # resolvable on default-sized uniform grids
    return Prefactor(
        name="hydrogen",
        x_lo=0.0,
        x_hi=math.inf,
        geometry=RADIAL,
        default_E=-0.5,
        default_x0=1.0,
        window=(0.1, 15.0),
        jet_fn=jet,
    )


_BUILTINS = {
    "free": family_free,
    "gaussian": family_gaussian,
    "well": family_well,
    "hydrogen": family_hydrogen,
}


def builtin_families() -> dict:
    """Fresh instances of the built-in families, keyed by name."""
    return {name: ctor() for name, ctor in _BUILTINS.items()}


def _sampling_window(x_lo, x_hi, x0):
    lo = x_lo if np.isfinite(x_lo) else x0 - _INFINITE_WINDOW
    hi = x_hi if np.isfinite(x_hi) else x0 + _INFINITE_WINDOW
    lo = max(lo, x_lo)
    hi = min(hi, x_hi)
    if not lo < hi:
        raise ValueError("cannot build a finite sampling window inside the domain")
    return lo, hi


def check_nodeless(pref: Prefactor, lo=None, hi=None, samples=_NODELESS_SAMPLES):
    """Sample R on [lo, hi] and raise NodalPrefactorError unless min R > 0."""
    w_lo, w_hi = pref.window
    lo = w_lo if lo is None else lo
    hi = w_hi if hi is None else hi
    # strictly interior points: the domain is open, endpoints may be nodes
    ts = lo + (hi - lo) * (np.arange(samples) + 0.5) / samples
    v = pref.eval_many(ts)[0]
    i = int(np.argmin(v))
    if not v[i] > 0.0:
        raise NodalPrefactorError(
            f"{pref.name}: sampled amplitude is {v[i]:.3g} at x={ts[i]:.6g}; "
            "only strictly positive (nodeless) prefactors are supported"
        )


def from_expression(
    expr: Expr,
    domain: tuple,
    geometry: str = LINE,
    E: float = 0.0,
    x0: float = 0.0,
    name: str = "expr",
) -> Prefactor:
    """Wrap a parsed expression as a Prefactor, rejecting amplitudes with nodes.

    Nodelessness is established by sampling (>= 10^4 uniform interior points),
    not proof; an expression that dips to zero between samples will slip
    through and fail later with a quadrature or overflow error.
    """
    x_lo, x_hi = float(domain[0]), float(domain[1])
    if not x_lo < x_hi:
        raise ValueError(f"empty domain ({x_lo}, {x_hi})")
    if not x_lo <= x0 <= x_hi:
        raise ValueError(f"x0={x0} outside domain ({x_lo}, {x_hi})")

    def jet(xs):
        j = eval_jet(expr, xs)
        return (j.value, j.d1, j.d2)

    pref = Prefactor(
        name=name,
        x_lo=x_lo,
        x_hi=x_hi,
        geometry=geometry,
        default_E=float(E),
        default_x0=float(x0),
        window=_sampling_window(x_lo, x_hi, x0),
        jet_fn=jet,
    )
    check_nodeless(pref)
    return pref
