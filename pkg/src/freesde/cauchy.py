"""Cauchy transforms, spectral densities, and the operations that link them.

The Cauchy transform of a spectral measure mu is

    g(z) = integral mu(dx) / (x - z),

an analytic map of the upper half plane into itself with g(z) ~ -1/z at
infinity.  The density is recovered by the Stieltjes inversion limit
p(x) = (1/pi) * lim_{eps->0} Im g(x + i*eps); here the limit is taken by
two-point Richardson extrapolation over {eps, eps/2}.

Also provided: the principal-value Hilbert transform used by the
free Fokker-Planck residual check, trapezoid moments, and the semicircle
family closed forms that serve as reference solutions throughout.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import (
    ClampExceeded,
    EvaluatorDomain,
    GridMismatch,
    GridTooCoarse,
    NonFinite,
    NotNormalized,
    OrderTooHigh,
)

# Densities below this height are treated as vanished when detecting support.
SUPPORT_FLOOR = 1e-6

# Trapezoid mass of a curve claiming to be a full probability density must
# match 1 within this tolerance.
MASS_TOL = 1e-3

# Clamped (negative, zeroed) density mass beyond this fails the inversion.
CLAMP_MASS_TOL = 1e-3

_FLOAT_FMT = "%.17g"


@dataclass(frozen=True)
class SupportInterval:
    """Closed real interval [lo, hi] carrying a spectral support."""

    lo: float
    hi: float

    def __post_init__(self):
        if not (self.lo <= self.hi):
            raise ValueError(f"support interval needs lo <= hi, got [{self.lo}, {self.hi}]")

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def contains(self, x: float, pad: float = 0.0) -> bool:
        return self.lo - pad <= x <= self.hi + pad

    def widened(self, rel: float) -> "SupportInterval":
        pad = rel * max(self.width, 1e-12)
        return SupportInterval(self.lo - pad, self.hi + pad)


@dataclass
class DensityCurve:
    """Sampled spectral density p(x) on a strictly increasing grid.

    ``mass`` is the trapezoid integral of ``ps`` over ``xs``; a curve only
    *claims* to be a full probability density when the caller checks
    ``assert_normalized``.  ``clamped_points``/``clamped_mass`` record how
    much negative density an inversion zeroed out.
    """

    xs: np.ndarray
    ps: np.ndarray
    support: SupportInterval
    mass: float
    t: float | None = None
    clamped_points: int = 0
    clamped_mass: float = 0.0

    @classmethod
    def from_samples(cls, xs, ps, t: float | None = None,
                     clamped_points: int = 0, clamped_mass: float = 0.0) -> "DensityCurve":
        xs = np.asarray(xs, dtype=float)
        ps = np.asarray(ps, dtype=float)
        if xs.ndim != 1 or xs.size < 2 or ps.shape != xs.shape:
            raise ValueError("need matching 1-d grids with at least two points")
        if not np.all(np.diff(xs) > 0):
            raise ValueError("grid must be strictly increasing")
        if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ps))):
            raise NonFinite("density samples contain NaN/Inf")
        if np.any(ps < 0):
            raise ValueError("density samples must be nonnegative")
        mass = float(np.trapezoid(ps, xs))
        alive = np.nonzero(ps >= SUPPORT_FLOOR)[0]
        if alive.size:
            support = SupportInterval(float(xs[alive[0]]), float(xs[alive[-1]]))
        else:
            support = SupportInterval(float(xs[0]), float(xs[0]))
        return cls(xs=xs, ps=ps, support=support, mass=mass, t=t,
                   clamped_points=clamped_points, clamped_mass=clamped_mass)

    # -- contracts ---------------------------------------------------------

    def assert_normalized(self, tol: float = MASS_TOL) -> None:
        if abs(self.mass - 1.0) > tol:
            raise NotNormalized(f"curve mass {self.mass} not within {tol} of 1")

    def is_uniform(self, rtol: float = 1e-9) -> bool:
        d = np.diff(self.xs)
        return bool(np.max(d) - np.min(d) <= rtol * np.max(d))

    @property
    def step(self) -> float:
        return float(self.xs[1] - self.xs[0])

    # -- serialization -----------------------------------------------------

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("x,p\n")
        for x, p in zip(self.xs, self.ps):
            buf.write(_FLOAT_FMT % x)
            buf.write(",")
            buf.write(_FLOAT_FMT % p)
            buf.write("\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, t: float | None = None) -> "DensityCurve":
        lines = [ln for ln in text.strip().split("\n") if ln]
        if not lines or lines[0].strip() != "x,p":
            raise ValueError("expected header 'x,p'")
        xs, ps = [], []
        for ln in lines[1:]:
            a, b = ln.split(",")
            xs.append(float(a))
            ps.append(float(b))
        return cls.from_samples(xs, ps, t=t)

    def to_json_dict(self) -> dict:
        return {
            "t": self.t,
            "xs": list(map(float, self.xs)),
            "ps": list(map(float, self.ps)),
            "support": {"lo": self.support.lo, "hi": self.support.hi},
            "mass": self.mass,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())


@dataclass(frozen=True)
class CauchyEvaluator:
    """Immutable handle for a time-indexed Cauchy transform g(t, z).

    ``fn`` must accept a float time and a complex ndarray and return the
    transform values elementwise.  ``real_gap`` optionally reports, per
    time, the real segment on which real-axis evaluation is refused.
    """

    fn: Callable[[float, np.ndarray], np.ndarray]
    t_min: float = 0.0
    t_max: float = math.inf
    real_gap: Callable[[float], SupportInterval] | None = None
    name: str = ""

    def __call__(self, t: float, z):
        if not (self.t_min <= t <= self.t_max):
            raise EvaluatorDomain(
                f"{self.name or 'evaluator'}: t={t} outside [{self.t_min}, {self.t_max}]")
        zarr = np.asarray(z, dtype=complex)
        out = np.asarray(self.fn(t, zarr), dtype=complex)
        if not (np.all(np.isfinite(out.real)) and np.all(np.isfinite(out.imag))):
            raise NonFinite(f"{self.name or 'evaluator'}: non-finite transform value")
        if np.isscalar(z) or np.ndim(z) == 0:
            return complex(out.reshape(-1)[0])
        return out


def stieltjes_invert(g: CauchyEvaluator, t: float, xs, eps0: float = 1e-3,
                     clamp_mass_tol: float = CLAMP_MASS_TOL) -> DensityCurve:
    """Recover the density on the grid ``xs`` from a Cauchy transform.

    Evaluates (1/pi) Im g(t, x + i*eps) at eps0 and eps0/2 and Richardson-
    extrapolates the eps -> 0 limit (2*p(eps/2) - p(eps)), which removes the
    O(eps) bias.  With ``eps0 = 0`` the boundary values g(t, x) are used
    directly, for transforms that extend continuously to the real axis.
    Negative extrapolated values are clamped to zero and counted; if the
    clamped mass exceeds ``clamp_mass_tol`` the curve is rejected, since
    systematically negative density signals a wrong transform branch.
    """
    xs = np.asarray(xs, dtype=float)
    if xs.ndim != 1 or xs.size < 2 or not np.all(np.diff(xs) > 0):
        raise ValueError("xs must be a strictly increasing 1-d grid")
    if eps0 < 0:
        raise ValueError("eps0 must be nonnegative")
    if eps0 == 0.0:
        p = np.asarray(g(t, xs + 0j)).imag / np.pi
    else:
        p_full = np.asarray(g(t, xs + 1j * eps0)).imag / np.pi
        p_half = np.asarray(g(t, xs + 0.5j * eps0)).imag / np.pi
        p = 2.0 * p_half - p_full
    neg = p < 0
    clamped_points = int(np.count_nonzero(neg))
    clamped_mass = float(np.trapezoid(np.where(neg, -p, 0.0), xs))
    if clamped_mass > clamp_mass_tol:
        raise ClampExceeded(
            f"clamped density mass {clamped_mass:.3e} exceeds {clamp_mass_tol:.1e}")
    p = np.where(neg, 0.0, p)
    return DensityCurve.from_samples(xs, p, t=t, clamped_points=clamped_points,
                                     clamped_mass=clamped_mass)


def _pair_sums(ps: np.ndarray) -> np.ndarray:
    """All-node PV sums: out[i] = sum_k w_k (p[i+k]-p[i-k])/k, zero-padded."""
    n = ps.size
    pad = np.concatenate([np.zeros(n), ps, np.zeros(n)])
    idx = np.arange(n) + n
    acc = np.zeros(n)
    for k in range(1, n + 1):
        d = (pad[idx + k] - pad[idx - k]) / k
        if k == 1:
            acc += 1.5 * d  # u=0 trapezoid cell, slope estimated from the first pair
        elif k == n:
            acc += 0.5 * d
        else:
            acc += d
    return -acc


def _check_pv_grid(p: DensityCurve) -> None:
    if not p.is_uniform():
        raise ValueError("principal-value scheme needs a uniform grid")
    if np.max(p.ps) < SUPPORT_FLOOR:
        return  # vanished curve transforms to exactly zero
    inside = np.count_nonzero(
        (p.xs >= p.support.lo) & (p.xs <= p.support.hi))
    if inside < 16:
        raise GridTooCoarse(f"only {inside} grid points inside the support")


def hilbert_transform(p: DensityCurve, x: float) -> float:
    """Principal value of integral p(y)/(x - y) dy by symmetric-pair quadrature.

    Pairing y = x +/- k*h cancels the singular cell; samples beyond the grid
    count as zero, so the grid must cover the support.  Accuracy is O(h^2)
    away from the support edges and degrades (but stays finite) at them.
    """
    _check_pv_grid(p)
    if not (p.xs[0] <= x <= p.xs[-1]):
        raise ValueError(f"x={x} outside the grid range")
    h = p.step
    span = p.xs[-1] - p.xs[0]
    K = int(math.ceil(span / h)) + 1
    k = np.arange(1, K + 1)
    right = np.interp(x + k * h, p.xs, p.ps, left=0.0, right=0.0)
    left = np.interp(x - k * h, p.xs, p.ps, left=0.0, right=0.0)
    d = (right - left) / k
    w = np.ones(K)
    w[0] = 1.5
    w[-1] = 0.5
    return float(-np.dot(w, d))


def hilbert_transform_grid(p: DensityCurve) -> np.ndarray:
    """hilbert_transform evaluated at every grid node (shared pair sums)."""
    _check_pv_grid(p)
    return _pair_sums(p.ps)


def density_moment(p: DensityCurve, k: int) -> float:
    """Trapezoid moment integral x^k p(x) dx over the curve's grid."""
    if k < 0 or k != int(k):
        raise ValueError("moment order must be a nonnegative integer")
    if k > 8:
        raise OrderTooHigh(f"moment order {k} > 8: tail truncation dominates")
    return float(np.trapezoid(p.xs ** k * p.ps, p.xs))


def fokker_planck_residual(p_prev: DensityCurve, p_mid: DensityCurve,
                           p_next: DensityCurve, drift: Callable) -> np.ndarray:
    """Residual of dp/dt + d/dx [ p (Hp + a) ] on the interior grid nodes.

    ``drift`` is a(x), callable on the grid array.  The three curves must
    share one uniform grid and be equally spaced in time; time and space
    derivatives are central differences, so the returned array has two
    fewer entries than the grid (endpoints excluded).
    """
    for q in (p_prev, p_next):
        if q.xs.shape != p_mid.xs.shape or not np.allclose(q.xs, p_mid.xs, rtol=0, atol=1e-12):
            raise GridMismatch("density curves are not on a common grid")
    ts = [p_prev.t, p_mid.t, p_next.t]
    if any(v is None for v in ts):
        raise GridMismatch("curves must carry time labels")
    dt1 = p_mid.t - p_prev.t
    dt2 = p_next.t - p_mid.t
    if dt1 <= 0 or abs(dt2 - dt1) > 1e-9 * dt1:
        raise GridMismatch(f"times not equally spaced: {ts}")
    _check_pv_grid(p_mid)
    h = p_mid.step
    flux = p_mid.ps * (hilbert_transform_grid(p_mid) + np.asarray(drift(p_mid.xs), dtype=float))
    dp_dt = (p_next.ps - p_prev.ps) / (2.0 * dt1)
    dflux_dx = (flux[2:] - flux[:-2]) / (2.0 * h)
    return dp_dt[1:-1] + dflux_dx


# -- semicircle family closed forms (reference solutions) -------------------

def semicircle_density(x, variance: float):
    """Semicircle density of the given variance: radius r = 2*sqrt(variance)."""
    r2 = 4.0 * variance
    x = np.asarray(x, dtype=float)
    return np.sqrt(np.maximum(r2 - x * x, 0.0)) / (2.0 * math.pi * variance)


def semicircle_cauchy(z, variance: float):
    """Herglotz branch of the semicircle Cauchy transform.

    The two principal square roots make the product w behave like +z at
    infinity off the cut [-r, r], selecting the branch with Im g > 0 on the
    upper half plane.  The root (-z + w)/(2v) is rewritten as -2/(z + w),
    which avoids the large-|z| cancellation and keeps the g ~ -1/z decay
    accurate to roundoff.
    """
    v = float(variance)
    z = np.asarray(z, dtype=complex)
    if v <= 0.0:
        return -1.0 / z
    r = 2.0 * math.sqrt(v)
    w = np.sqrt(z - r) * np.sqrt(z + r)
    return -2.0 / (z + w)


def semicircle_cdf(x, variance: float):
    """Distribution function of the semicircle law (for histogram distances)."""
    r = 2.0 * math.sqrt(variance)
    x = np.asarray(x, dtype=float)
    xc = np.clip(x, -r, r)
    val = 0.5 + (xc * np.sqrt(r * r - xc * xc) + r * r * np.arcsin(xc / r)) / (math.pi * r * r)
    return np.where(x < -r, 0.0, np.where(x > r, 1.0, val))
