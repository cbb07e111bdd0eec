"""Reduction of polynomial-coefficient evolution equations and their
integration by the method of characteristics.

For a self-adjoint process with polynomial drift a(x) and polynomial noise
product (bc)(x), the time derivative of the Cauchy transform is

    dg/dt = -E(a(X) G^2) + E(bc(X) G) * E(bc(X) G^2),      G = (X - z)^(-1).

Each expectation reduces to closed form in (g, dg/dz) plus moments E(X^j):
dividing f(X) - f(z) by (X - z) (synthetic division, exact per monomial)
gives E(f(X)G) = f(z) g + sum_j e_j(z) E(X^j), and a second division gives
E(f(X)G^2) = f(z) dg + f'(z) g + sum_j d_j(z) E(X^j).  The result is a
quasilinear equation dg/dt + P dg/dz = Q whose characteristic curves
(dz/dt = P, dg/dt = Q) are integrated here with classical RK4.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import (
    MomentsUnavailable,
    OrderTooHigh,
    OutsideSurface,
    StepTooLarge,
    ZeroPolynomial,
)

MAX_DEGREE = 8
BLOWUP_CUTOFF = 1e12


@dataclass(frozen=True)
class Polynomial:
    """Real-coefficient polynomial, lowest degree first, trailing zeros trimmed."""

    coeffs: tuple

    def __init__(self, coeffs: Sequence[float]):
        c = [float(v) for v in coeffs]
        while c and c[-1] == 0.0:
            c.pop()
        if len(c) - 1 > MAX_DEGREE:
            raise OrderTooHigh(f"degree {len(c) - 1} exceeds engine limit {MAX_DEGREE}")
        object.__setattr__(self, "coeffs", tuple(c))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1  # -1 for the zero polynomial

    @property
    def is_zero(self) -> bool:
        return not self.coeffs

    def __call__(self, x):
        x = np.asarray(x)
        dtype = np.result_type(x.dtype, float)
        if self.is_zero:
            return np.zeros(x.shape, dtype=dtype)
        acc = np.full(x.shape, self.coeffs[-1], dtype=dtype)
        for c in self.coeffs[-2::-1]:
            acc = acc * x + c
        return acc

    def derivative(self) -> "Polynomial":
        if self.degree < 1:
            return Polynomial([])
        return Polynomial([j * c for j, c in enumerate(self.coeffs)][1:])


def _synthetic_divide(coeffs: Sequence, z):
    """Divide by (X - z): returns (quotient coeffs lowest-first, remainder).

    Coefficients may be scalars or ndarrays (vectorized over z).
    """
    k = len(coeffs) - 1
    q = [None] * k
    carry = coeffs[k] * np.ones_like(np.asarray(z))
    for j in range(k - 1, -1, -1):
        q[j] = carry
        carry = coeffs[j] + z * carry
    return q, carry


def divided_difference_expand(f: Polynomial, z):
    """Coefficients e_0..e_{k-1} of (f(X) - f(z)) / (X - z), by synthetic division.

    Exact for any polynomial; a constant has an empty expansion.
    """
    if f.is_zero:
        raise ZeroPolynomial("difference quotient of the zero polynomial")
    if f.degree == 0:
        return []
    q, _ = _synthetic_divide(f.coeffs, np.asarray(z, dtype=complex))
    return q


class MomentFunction:
    """Handle j -> (t -> E(X_t^j)) for 0 <= j <= jmax; order zero is always 1."""

    def __init__(self, fn: Callable[[int, float], float], jmax: int):
        self._fn = fn
        self.jmax = int(jmax)

    def __call__(self, j: int, t: float) -> float:
        if j == 0:
            return 1.0
        if j > self.jmax:
            raise MomentsUnavailable(f"moment order {j} > jmax={self.jmax}")
        return float(self._fn(j, t))

    @classmethod
    def from_values(cls, values: Sequence[float]) -> "MomentFunction":
        """Time-constant moments; values[j] is E(X^j) with values[0] == 1."""
        vals = [float(v) for v in values]
        if not vals or vals[0] != 1.0:
            raise ValueError("values[0] must be 1")
        return cls(lambda j, t: vals[j], len(vals) - 1)

    @classmethod
    def none(cls) -> "MomentFunction":
        return cls(lambda j, t: 1.0, 0)


def _reduction_parts(f: Polynomial, z, m: MomentFunction, t: float):
    """(f(z), f'(z), S1, S2) with S1 = sum e_j(z) mu_j, S2 = sum d_j(z) mu_j."""
    zero = np.zeros_like(np.asarray(z, dtype=complex))
    if f.is_zero:
        return zero, zero, zero, zero
    fz = f(np.asarray(z, dtype=complex))
    if f.degree == 0:
        return fz, zero, zero, zero
    e, _ = _synthetic_divide(f.coeffs, np.asarray(z, dtype=complex))
    S1 = zero.copy()
    for j, ej in enumerate(e):
        S1 = S1 + ej * m(j, t)
    d, fprime = _synthetic_divide(e, np.asarray(z, dtype=complex))
    S2 = zero.copy()
    for j, dj in enumerate(d):
        S2 = S2 + dj * m(j, t)
    return fz, fprime, S1, S2


def reduce_resolvent_expectation(f: Polynomial, g, dg, z, m: MomentFunction, t: float):
    """Closed forms for E(f(X) G) and E(f(X) G^2) in terms of g, dg, and moments.

    E(f(X)G)   = f(z) g  + sum_j e_j(z) E(X^j)
    E(f(X)G^2) = f(z) dg + f'(z) g + sum_j d_j(z) E(X^j)

    where e_j come from one synthetic division of f by (X - z) and d_j from a
    second division of that quotient.  Agrees with direct partial-fraction
    expansion monomial by monomial.
    """
    if not f.is_zero and f.degree - 1 > m.jmax:
        raise MomentsUnavailable(
            f"degree {f.degree} reduction needs moments up to {f.degree - 1}")
    fz, fpz, S1, S2 = _reduction_parts(f, z, m, t)
    E_fG = fz * g + S1
    E_fG2 = fz * dg + fpz * g + S2
    return E_fG, E_fG2


@dataclass(frozen=True)
class PdeRightHandSide:
    """Assembled right-hand side dg/dt = -E(aG^2) + E(bcG) E(bcG^2).

    ``advection``/``source`` expose the quasilinear split
    dg/dt + P dg/dz = Q used by the characteristic integrator:

        P = a(z) - bc(z) E(bcG),
        Q = -a'(z) g - S2_a + E(bcG) (bc'(z) g + S2_bc).
    """

    drift: Polynomial
    diffusion: Polynomial  # the product b*c as one polynomial in x
    moments: MomentFunction

    def __call__(self, t: float, z, g, dg):
        E_aG2 = reduce_resolvent_expectation(self.drift, g, dg, z, self.moments, t)[1]
        E_bcG, E_bcG2 = reduce_resolvent_expectation(
            self.diffusion, g, dg, z, self.moments, t)
        return -E_aG2 + E_bcG * E_bcG2

    def advection(self, t: float, z, g):
        az = self.drift(np.asarray(z, dtype=complex)) if not self.drift.is_zero else 0.0
        _, _, S1_bc, _ = _reduction_parts(self.diffusion, z, self.moments, t)
        bcz = self.diffusion(np.asarray(z, dtype=complex)) if not self.diffusion.is_zero else 0.0
        return az - bcz * (bcz * g + S1_bc)

    def source(self, t: float, z, g):
        _, apz, _, S2_a = _reduction_parts(self.drift, z, self.moments, t)
        bcz, bcpz, S1_bc, S2_bc = _reduction_parts(self.diffusion, z, self.moments, t)
        return -(apz * g + S2_a) + (bcz * g + S1_bc) * (bcpz * g + S2_bc)

    @property
    def bc_is_constant(self) -> bool:
        return self.diffusion.degree <= 0


def build_pde(a: Polynomial, bc: Polynomial, m: MomentFunction) -> PdeRightHandSide:
    """Validate degrees/moment coverage and assemble the evolution right-hand side."""
    need = max(a.degree, bc.degree) - 1
    if need > m.jmax:
        raise MomentsUnavailable(f"need moments up to order {need}, have {m.jmax}")
    return PdeRightHandSide(drift=a, diffusion=bc, moments=m)


@dataclass
class CharacteristicSurface:
    """Curves (t, z(s,t), g(s,t)) from real initial labels, on a common time grid.

    Curves that exceed the blow-up cutoff are truncated: ``trunc_index[i]``
    is the last valid time index of curve i (n_t - 1 when untouched) and
    entries beyond it are NaN.
    """

    s_grid: np.ndarray
    t_grid: np.ndarray
    z: np.ndarray  # complex, shape (n_s, n_t)
    g: np.ndarray  # complex, shape (n_s, n_t)
    truncated: np.ndarray  # bool, shape (n_s,)
    trunc_index: np.ndarray  # int, shape (n_s,)

    def to_json(self) -> str:
        return json.dumps({
            "s_grid": list(map(float, self.s_grid)),
            "t_grid": list(map(float, self.t_grid)),
            "z_re": self.z.real.tolist(),
            "z_im": self.z.imag.tolist(),
            "g_re": self.g.real.tolist(),
            "g_im": self.g.imag.tolist(),
            "truncated": [bool(v) for v in self.truncated],
        })

    @classmethod
    def from_json(cls, text: str) -> "CharacteristicSurface":
        d = json.loads(text)
        z = np.asarray(d["z_re"]) + 1j * np.asarray(d["z_im"])
        g = np.asarray(d["g_re"]) + 1j * np.asarray(d["g_im"])
        trunc = np.asarray(d["truncated"], dtype=bool)
        n_t = z.shape[1]
        idx = np.full(z.shape[0], n_t - 1, dtype=int)
        for i in range(z.shape[0]):
            bad = np.nonzero(~np.isfinite(z[i].real))[0]
            if bad.size:
                idx[i] = bad[0] - 1
        return cls(np.asarray(d["s_grid"], dtype=float),
                   np.asarray(d["t_grid"], dtype=float), z, g, trunc, idx)

    def has_shock(self, t_index: int) -> bool:
        """True when the label ordering of Re z inverts at the given time index."""
        x = self.z[:, t_index].real
        ok = np.isfinite(x)
        return bool(np.any(np.diff(x[ok]) < 0))


def integrate_characteristics(rhs: PdeRightHandSide, init, s_grid, t_end: float,
                              dt: float = 1e-3,
                              blowup: float = BLOWUP_CUTOFF) -> CharacteristicSurface:
    """March every characteristic curve with classical fixed-step RK4.

    ``init`` maps the label array to the initial pair (z(s,0), g(s,0)).
    All labels advance together (curves are independent, so the sweep is
    vectorized across them).  A curve whose |z| or |g| passes ``blowup``,
    or that turns non-finite, is truncated and marked.
    """
    if dt <= 0 or t_end < 0:
        raise ValueError("need dt > 0 and t_end >= 0")
    s_grid = np.asarray(s_grid, dtype=float)
    z0, g0 = init(s_grid)
    z0 = np.asarray(z0, dtype=complex) + np.zeros(s_grid.shape, dtype=complex)
    g0 = np.asarray(g0, dtype=complex) + np.zeros(s_grid.shape, dtype=complex)
    n_steps = max(1, int(round(t_end / dt))) if t_end > 0 else 0
    h = t_end / n_steps if n_steps else 0.0
    t_grid = np.linspace(0.0, t_end, n_steps + 1)
    n_s = s_grid.size
    Z = np.full((n_s, n_steps + 1), np.nan + 0j)
    G = np.full((n_s, n_steps + 1), np.nan + 0j)
    Z[:, 0], G[:, 0] = z0, g0
    trunc_index = np.full(n_s, n_steps, dtype=int)
    active = np.ones(n_s, dtype=bool)

    def f(t, z, g):
        return rhs.advection(t, z, g), rhs.source(t, z, g)

    z, g = z0.copy(), g0.copy()
    for n in range(n_steps):
        t = t_grid[n]
        idx = np.nonzero(active)[0]
        if idx.size == 0:
            break
        za, ga = z[idx], g[idx]
        with np.errstate(over="ignore", invalid="ignore"):
            k1z, k1g = f(t, za, ga)
            k2z, k2g = f(t + h / 2, za + h / 2 * k1z, ga + h / 2 * k1g)
            k3z, k3g = f(t + h / 2, za + h / 2 * k2z, ga + h / 2 * k2g)
            k4z, k4g = f(t + h, za + h * k3z, ga + h * k3g)
            zn = za + h / 6 * (k1z + 2 * k2z + 2 * k3z + k4z)
            gn = ga + h / 6 * (k1g + 2 * k2g + 2 * k3g + k4g)
        stages_ok = (np.isfinite(zn.real) & np.isfinite(zn.imag)
                     & np.isfinite(gn.real) & np.isfinite(gn.imag))
        if n == 0 and not np.all(stages_ok):
            raise StepTooLarge("non-finite RK4 stage on the first step; reduce dt")
        alive = stages_ok & (np.abs(zn) < blowup) & (np.abs(gn) < blowup)
        dead = idx[~alive]
        trunc_index[dead] = n
        active[dead] = False
        live = idx[alive]
        z[live], g[live] = zn[alive], gn[alive]
        Z[live, n + 1], G[live, n + 1] = zn[alive], gn[alive]
    return CharacteristicSurface(
        s_grid=s_grid, t_grid=t_grid, z=Z, g=G,
        truncated=trunc_index < n_steps, trunc_index=trunc_index)


def evaluate_on_surface(surf: CharacteristicSurface, t: float, z: complex) -> complex:
    """Interpolate g at (t, z) from the two curves bracketing Re z.

    Curve states are first interpolated linearly in time, then g linearly
    between the bracketing curves (ordered by label).  Queries outside the
    swept region raise OutsideSurface rather than extrapolating.
    """
    tg = surf.t_grid
    if not (tg[0] <= t <= tg[-1]):
        raise OutsideSurface(f"t={t} outside the surface time range")
    j = int(np.searchsorted(tg, t))
    j = max(1, min(j, tg.size - 1))
    w = 0.0 if tg[j] == tg[j - 1] else (t - tg[j - 1]) / (tg[j] - tg[j - 1])
    usable = surf.trunc_index >= j
    if np.count_nonzero(usable) < 2:
        raise OutsideSurface("fewer than two curves reach the query time")
    zt = (1 - w) * surf.z[usable, j - 1] + w * surf.z[usable, j]
    gt = (1 - w) * surf.g[usable, j - 1] + w * surf.g[usable, j]
    order = np.argsort(zt.real)
    xs = zt.real[order]
    x = complex(z).real
    if not (xs[0] <= x <= xs[-1]):
        raise OutsideSurface(f"Re z={x} outside the curve hull [{xs[0]}, {xs[-1]}]")
    i = int(np.searchsorted(xs, x))
    i = max(1, min(i, xs.size - 1))
    x0, x1 = xs[i - 1], xs[i]
    u = 0.0 if x1 == x0 else (x - x0) / (x1 - x0)
    gs = gt[order]
    return complex((1 - u) * gs[i - 1] + u * gs[i])
