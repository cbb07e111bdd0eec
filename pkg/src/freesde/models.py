"""Closed-form spectral transforms for the four worked models.

Conventions: the Cauchy transform is g(t, z) = E[(X_t - z)^(-1)], so the
Herglotz branch has Im g > 0 on the upper half plane and z*g -> -1 at
infinity.  Initial conditions are fixed per model: the Ornstein-Uhlenbeck
process starts at 0, both geometric-Brownian variants at the identity, and
the explosive model at a times the identity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .cauchy import CauchyEvaluator, SupportInterval, semicircle_cauchy
from .characteristics import Polynomial
from .errors import (
    BranchViolation,
    InvalidConfig,
    NewtonDiverged,
    OnSupportReal,
    PastBlowup,
)

_MEPS = float(np.finfo(float).eps)

# Relative guard band below the blow-up time; queries beyond are refused.
BLOWUP_GUARD = 1e-9


@dataclass(frozen=True)
class OrnsteinUhlenbeck:
    """dX = theta X dt + sigma dW, X_0 = 0.

    sigma = 0 is admitted as the degenerate noiseless case (the state stays
    at the origin and the transform is -1/z); negative sigma is rejected.
    """
    theta: float
    sigma: float

    def __post_init__(self):
        if self.sigma < 0:
            raise InvalidConfig("sigma must be nonnegative")


@dataclass(frozen=True)
class GeometricBrownian1:
    """dX = theta X dt + X^(1/2) dW X^(1/2), X_0 = I."""
    theta: float


@dataclass(frozen=True)
class GeometricBrownian2:
    """dX = theta X dt + X dW + dW X, X_0 = I.  Moments only; no transform."""
    theta: float


@dataclass(frozen=True)
class Explosive:
    """dX = k X dW X, X_0 = a I.  Blows up at t = (a k)^(-2)."""
    k: float
    a: float

    def __post_init__(self):
        if self.k <= 0 or self.a <= 0:
            raise InvalidConfig("k and a must be positive")


ModelSpec = Union[OrnsteinUhlenbeck, GeometricBrownian1, GeometricBrownian2, Explosive]

_TAGS = {"ou": OrnsteinUhlenbeck, "gbm1": GeometricBrownian1,
         "gbm2": GeometricBrownian2, "explosive": Explosive}
_FIELDS = {"ou": ("theta", "sigma"), "gbm1": ("theta",),
           "gbm2": ("theta",), "explosive": ("k", "a")}


def model_from_json(d: dict) -> ModelSpec:
    """Parse {"model": tag, ...params}; unknown fields are rejected."""
    if not isinstance(d, dict) or "model" not in d:
        raise InvalidConfig("model object needs a 'model' tag")
    tag = d["model"]
    if tag not in _TAGS:
        raise InvalidConfig(f"unknown model '{tag}' (expected one of {sorted(_TAGS)})")
    fields = _FIELDS[tag]
    extra = set(d) - {"model", *fields}
    if extra:
        raise InvalidConfig(f"unknown fields for model '{tag}': {sorted(extra)}")
    missing = [f for f in fields if f not in d]
    if missing:
        raise InvalidConfig(f"model '{tag}' missing fields: {missing}")
    try:
        return _TAGS[tag](**{f: float(d[f]) for f in fields})
    except (TypeError, ValueError) as exc:
        raise InvalidConfig(f"bad parameter for model '{tag}': {exc}") from exc


def model_tag(spec: ModelSpec) -> str:
    for tag, cls in _TAGS.items():
        if isinstance(spec, cls):
            return tag
    raise InvalidConfig(f"not a model spec: {spec!r}")


def model_to_json(spec: ModelSpec) -> dict:
    tag = model_tag(spec)
    return {"model": tag, **{f: getattr(spec, f) for f in _FIELDS[tag]}}


def initial_value(spec: ModelSpec) -> float:
    """Scalar c with X_0 = c * I."""
    if isinstance(spec, OrnsteinUhlenbeck):
        return 0.0
    if isinstance(spec, Explosive):
        return spec.a
    return 1.0


def sde_polynomials(spec: ModelSpec) -> tuple[Polynomial, Polynomial]:
    """Drift a(x) and noise product (b*c)(x) as polynomials, when they exist."""
    if isinstance(spec, OrnsteinUhlenbeck):
        return Polynomial([0.0, spec.theta]), Polynomial([spec.sigma])
    if isinstance(spec, GeometricBrownian1):
        return Polynomial([0.0, spec.theta]), Polynomial([0.0, 1.0])
    if isinstance(spec, Explosive):
        return Polynomial([]), Polynomial([0.0, 0.0, spec.k])
    raise InvalidConfig("second geometric-Brownian variant has no single b*c product")


# -- Ornstein-Uhlenbeck ------------------------------------------------------

def ou_variance(theta: float, sigma: float, t: float) -> float:
    """Variance sigma^2 (e^(2 theta t) - 1) / (2 theta), with the theta->0 limit."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    if abs(theta * t) < 1e-8:
        return sigma * sigma * t
    return sigma * sigma * math.expm1(2.0 * theta * t) / (2.0 * theta)


def ou_support(theta: float, sigma: float, t: float) -> SupportInterval:
    """Semicircle support interval; three regimes by the sign of theta.

    Growing like e^(theta t) for theta > 0, like sqrt(t) for theta = 0, and
    saturating at sigma * sqrt(2/|theta|) for theta < 0.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    if abs(theta * t) < 1e-8:
        r = 2.0 * sigma * math.sqrt(t)
    elif theta > 0:
        r = math.sqrt(2.0 * sigma * sigma / theta * math.expm1(2.0 * theta * t))
    else:
        r = math.sqrt(2.0 * sigma * sigma / abs(theta) * -math.expm1(2.0 * theta * t))
    return SupportInterval(-r, r)


def ou_cauchy(theta: float, sigma: float, t: float, z):
    """Semicircle transform with the time-dependent variance of the process.

    Solves v g^2 + z g + 1 = 0 on the Herglotz branch, where v is the
    variance at time t; the degenerate v = 0 start returns -1/z (point mass
    at the origin).  Real z strictly inside the support is refused.
    """
    v = ou_variance(theta, sigma, t)
    zarr = np.asarray(z, dtype=complex)
    if v > 0.0:
        r = 2.0 * math.sqrt(v)
        on_axis = zarr.imag == 0.0
        if np.any(on_axis & (np.abs(zarr.real) < r * (1.0 - 1e-12))):
            raise OnSupportReal("real z inside the support; add an imaginary offset")
    out = semicircle_cauchy(zarr, v)
    return out if np.ndim(z) else complex(out)


# -- Geometric Brownian I ----------------------------------------------------

def gbm_support(theta: float, t: float) -> SupportInterval:
    """Support endpoints from the branch points of the transform.

    The products r = z*g at the branch points solve t r^2 + t r - 1 = 0;
    plugging each root into z = r/(1+r) * e^((theta-1-r) t) gives the
    endpoints.  The lower one stays strictly positive for all t > 0.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    alpha = theta - 1.0
    s = math.sqrt(1.0 + 4.0 / t)
    ends = []
    for r in ((-1.0 + s) / 2.0, (-1.0 - s) / 2.0):
        ends.append(r / (1.0 + r) * math.exp((alpha - r) * t))
    return SupportInterval(min(ends), max(ends))


def _gbm_residual(alpha: float, t: float, z, g):
    return z + 1.0 / g - np.exp((alpha - z * g) * t)


def _gbm_newton(alpha: float, t: float, z, g, tol: float,
                max_iter: int = 200, max_halvings: int = 8):
    """Vectorized damped Newton on F(g) = z + 1/g - e^((alpha - z g) t).

    The full step is tried first; only a step that worsens |F| (or leaves
    the finite range) is halved, at most ``max_halvings`` times, after which
    the full step is kept anyway: Newton's path near a fold is not
    |F|-monotone, and the final residual check is the actual gate.  The
    per-point tolerance has an ulp floor proportional to |z| because the
    residual subtracts terms of that size.
    """
    g = g.copy()
    tol_v = np.maximum(tol, 8.0 * _MEPS * np.abs(z))
    F = _gbm_residual(alpha, t, z, g)
    for _ in range(max_iter):
        act = np.abs(F) > tol_v
        if not np.any(act):
            return g, True
        za, ga, Fa = z[act], g[act], F[act]
        E = np.exp((alpha - za * ga) * t)
        dF = -1.0 / ga ** 2 + za * t * E
        step = Fa / dF
        cand = ga - step
        Fc = _gbm_residual(alpha, t, za, cand)
        retry = ~(np.abs(Fc) <= np.abs(Fa)) | ~np.isfinite(Fc)
        if np.any(retry):
            lam = np.ones(step.shape)
            for _ in range(max_halvings):
                lam = np.where(retry, lam / 2.0, lam)
                trial = ga - lam * step
                Ft = _gbm_residual(alpha, t, za, trial)
                improved = (np.abs(Ft) < np.abs(Fa)) & np.isfinite(Ft)
                take = retry & (improved | ~np.isfinite(Fc))
                cand = np.where(take, trial, cand)
                Fc = np.where(take, Ft, Fc)
                retry = retry & ~improved
                if not np.any(retry):
                    break
        g[act], F[act] = cand, Fc
    return g, bool(not np.any(np.abs(F) > tol_v))


def gbm_cauchy(theta: float, t: float, z, tol: float = 1e-12,
               dt_max: float = 0.05, y_safe: float = 0.5):
    """Transform of the first geometric-Brownian variant by Newton continuation.

    Starts from the exact t = 0 transform 1/(1 - z) and advances in time
    steps of at most ``dt_max``, reseeding Newton from the previous solution.
    The time sweep runs at Im z lifted to at least ``y_safe`` (the solution
    is analytic on the upper half plane, while branch points move along the
    real axis); afterwards Im z is lowered geometrically to the query height.
    Every accepted point satisfies the functional-equation residual bound
    and the Herglotz branch condition.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    alpha = theta - 1.0
    zin = np.asarray(z, dtype=complex)
    zf = zin.ravel()
    if t == 0.0:
        out = 1.0 / (1.0 - zf)
        return (out.reshape(zin.shape) if np.ndim(z) else complex(out[0]))
    y_lift = np.maximum(zf.imag, y_safe)
    zl = zf.real + 1j * y_lift
    g = 1.0 / (1.0 - zl)
    n_steps = int(math.ceil(t / dt_max))
    for i in range(1, n_steps + 1):
        g, ok = _gbm_newton(alpha, t * i / n_steps, zl, g, tol)
        if not ok:
            raise NewtonDiverged(f"continuation stalled at t={t * i / n_steps:.4g}")
    y = y_lift.copy()
    target = zf.imag
    while np.any(y > target):
        # geometric descent, jumping to the target height (possibly the real
        # axis itself) once within the 1e-14 floor
        y = np.where(y / 2.0 <= np.maximum(target, 1e-14), target, y / 2.0)
        zl = zf.real + 1j * y
        g, ok = _gbm_newton(alpha, t, zl, g, tol)
        if not ok:
            raise NewtonDiverged(f"descent stalled at Im z={y.min():.3g}")
    upper = zf.imag > 0
    if np.any(upper & (g.imag <= 0)):
        raise BranchViolation("converged root leaves the upper half plane")
    return g.reshape(zin.shape) if np.ndim(z) else complex(g[0])


# -- Geometric Brownian II ---------------------------------------------------

def gbm2_moments(theta: float, t: float) -> tuple[float, float]:
    """Mean e^(theta t) and second moment 2 e^(2(theta+1) t) - e^(2 theta t)."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    return math.exp(theta * t), 2.0 * math.exp(2.0 * (theta + 1.0) * t) - math.exp(2.0 * theta * t)


def gbm2_std_over_mean(t: float) -> float:
    """Ratio of standard deviation to mean: sqrt(2 (e^(2t) - 1)), theta-free."""
    return math.sqrt(2.0 * math.expm1(2.0 * t))


# -- Explosive model ---------------------------------------------------------

def blowup_time(k: float, a: float) -> float:
    """Finite horizon (a k)^(-2) at which the support's upper edge diverges."""
    if k <= 0 or a <= 0:
        raise ValueError("k and a must be positive")
    return 1.0 / (a * k) ** 2


def _check_blowup(k: float, a: float, t: float) -> None:
    if t > blowup_time(k, a) * (1.0 - BLOWUP_GUARD):
        raise PastBlowup(f"t={t} beyond the blow-up guard of {blowup_time(k, a)}")


def explosive_support(k: float, a: float, t: float) -> SupportInterval:
    """Branch points z_pm = a (1 +/- a k sqrt(t))^2 / (1 - a^2 k^2 t)^2."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    _check_blowup(k, a, t)
    tau = (a * k) ** 2 * t
    den = (1.0 - tau) ** 2
    lo = a * (1.0 - a * k * math.sqrt(t)) ** 2 / den
    hi = a * (1.0 + a * k * math.sqrt(t)) ** 2 / den
    return SupportInterval(lo, hi)


def _quadratic_roots(A, B, C):
    """Both roots of A g^2 + B g + C = 0, numerically stable, linear fallback."""
    disc = B * B - 4.0 * A * C
    sq = np.sqrt(disc)
    sq = np.where((np.conj(B) * sq).real < 0.0, -sq, sq)
    q = -0.5 * (B + sq)
    with np.errstate(divide="ignore", invalid="ignore"):
        lin = np.where(B != 0, -C / np.where(B != 0, B, 1.0), np.inf + 0j)
        r1 = np.where(A != 0, q / np.where(A != 0, A, 1.0), lin)
        r2 = np.where(q != 0, C / np.where(q != 0, q, 1.0), lin)
    return r1, r2


def explosive_cauchy(k: float, a: float, t: float, z):
    """Root of the quadratic functional equation of the model,

        k^2 t z^3 g^2 + (z/a - 1 + (a + 2z) z k^2 t) g + 1/a + (z + a) k^2 t = 0,

    on the branch reached by continuity in time from 1/(a - z) at t = 0.

    With complex cubic leading coefficient both roots can lie in the upper
    half plane, so the Herglotz sign alone does not identify the transform;
    the root is tracked through a short time sweep instead (root collisions
    happen only at the real branch points, never along the sweep for
    Im z != 0), and the sign condition is applied afterwards as a check.
    Real z is legitimate: off the support the tracked root stays real, and
    inside it the boundary value with Im g > 0 is returned.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    _check_blowup(k, a, t)
    zarr = np.asarray(z, dtype=complex)
    if t == 0.0:
        out = 1.0 / (a - zarr)
        return out if np.ndim(z) else complex(out)
    g = 1.0 / (a - zarr)
    n_sweep = 40
    r1 = r2 = g
    for j in range(1, n_sweep + 1):
        tj = t * j / n_sweep
        k2t = k * k * tj
        A = k2t * zarr ** 3
        B = zarr / a - 1.0 + (a + 2.0 * zarr) * zarr * k2t
        C = 1.0 / a + (zarr + a) * k2t
        r1, r2 = _quadratic_roots(A, B, C)
        g = np.where(np.abs(r1 - g) <= np.abs(r2 - g), r1, r2)
    on_axis = zarr.imag == 0.0
    if np.any(on_axis):
        # conjugate-pair boundary values inside the support: take Im g >= 0
        pair = np.abs(r1.imag) > 0
        pick_up = np.where(r1.imag >= 0, r1, r2)
        g = np.where(on_axis & pair, pick_up, g)
    if np.any((zarr.imag > 0) & (g.imag <= 0)):
        raise BranchViolation("tracked explosive root left the upper half plane")
    return g if np.ndim(z) else complex(g)


def explosive_density(k: float, a: float, t: float, x):
    """Closed-form density on [z_-, z_+], zero outside.

    In the scaled variables tau = k^2 a^2 t and xi = x/a the density of the
    scaled operator is sqrt(-(1-tau)^2 xi^2 + 2(1+tau) xi - 1) / (2 pi xi^3 tau);
    the returned value includes the 1/a change-of-variables factor.  As
    tau -> 1 this approaches sqrt(4 xi - 1) / (2 pi xi^3) on [1/4, inf).
    """
    if t <= 0:
        raise ValueError("t must be positive")
    _check_blowup(k, a, t)
    tau = (a * k) ** 2 * t
    xi = np.asarray(x, dtype=float) / a
    disc = -((1.0 - tau) ** 2) * xi * xi + 2.0 * (1.0 + tau) * xi - 1.0
    inside = disc > 0.0
    xi_safe = np.where(inside, xi, 1.0)
    val = np.sqrt(np.where(inside, disc, 0.0)) / (2.0 * math.pi * xi_safe ** 3 * tau) / a
    out = np.where(inside, val, 0.0)
    return out if np.ndim(x) else float(out)


# -- evaluator dispatch ------------------------------------------------------

def cauchy_evaluator(spec: ModelSpec) -> CauchyEvaluator:
    """Package a model's transform as an immutable evaluator handle."""
    if isinstance(spec, OrnsteinUhlenbeck):
        return CauchyEvaluator(
            fn=lambda t, z: ou_cauchy(spec.theta, spec.sigma, t, z),
            t_min=0.0, t_max=math.inf,
            real_gap=lambda t: ou_support(spec.theta, spec.sigma, t),
            name="ou")
    if isinstance(spec, GeometricBrownian1):
        return CauchyEvaluator(
            fn=lambda t, z: gbm_cauchy(spec.theta, t, z),
            t_min=0.0, t_max=math.inf,
            real_gap=lambda t: gbm_support(spec.theta, t) if t > 0
            else SupportInterval(1.0, 1.0),
            name="gbm1")
    if isinstance(spec, Explosive):
        horizon = blowup_time(spec.k, spec.a) * (1.0 - BLOWUP_GUARD)
        return CauchyEvaluator(
            fn=lambda t, z: explosive_cauchy(spec.k, spec.a, t, z),
            t_min=0.0, t_max=horizon,
            real_gap=lambda t: explosive_support(spec.k, spec.a, t) if t > 0
            else SupportInterval(spec.a, spec.a),
            name="explosive")
    raise InvalidConfig(
        "no transform available for the second geometric-Brownian variant; "
        "only its moments are known in closed form")


def support_of(spec: ModelSpec, t: float) -> SupportInterval:
    """Spectral support at time t (degenerate {X_0} interval at t = 0)."""
    if isinstance(spec, OrnsteinUhlenbeck):
        return ou_support(spec.theta, spec.sigma, t)
    if isinstance(spec, GeometricBrownian1):
        return gbm_support(spec.theta, t) if t > 0 else SupportInterval(1.0, 1.0)
    if isinstance(spec, Explosive):
        return explosive_support(spec.k, spec.a, t) if t > 0 \
            else SupportInterval(spec.a, spec.a)
    raise InvalidConfig(
        "support of the second geometric-Brownian variant is not known in closed form")
