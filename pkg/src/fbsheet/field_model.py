"""Covariance kernels of the fractional Brownian sheet and its Liouville part.

Everything here is a pure function of its arguments.  Coordinates are given
in the *stored* axis order of the :class:`HurstVector`; the sorted view is
only used by the exponent machinery.

The Liouville sheet integrates the product kernel
``prod_l (t_l - r_l)^(H_l - 1/2)`` against white noise on ``[0, t]``.  Because
the kernel is a product and every region used below is a box, each covariance
factorises into one-dimensional integrals

    I_l(lo, hi; s_l, t_l) = int_lo^hi (s_l - r)^(H_l - 1/2) (t_l - r)^(H_l - 1/2) dr

which :func:`axis_integral` evaluates.
"""

from __future__ import annotations

import functools
import itertools
import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import integrate

from .errors import ArityError, DomainError, NumericalError

DEFAULT_TOL = 1e-10


@dataclass(frozen=True)
class HurstVector:
    """Hurst index ``h`` (stored order) plus the ambient dimension ``d``."""

    h: tuple
    ambient_dim: int = 1
    sort_perm: tuple = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "h", tuple(float(x) for x in self.h))
        perm = tuple(sorted(range(len(self.h)), key=lambda i: (self.h[i], i)))
        object.__setattr__(self, "sort_perm", perm)

    @property
    def n_axes(self) -> int:
        return len(self.h)

    @property
    def sorted(self) -> tuple:
        return tuple(self.h[i] for i in self.sort_perm)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.h, dtype=float)


def validate_hurst(raw: Sequence[float], d: int = 1) -> HurstVector:
    """Check ``raw`` lies in ``(0, 1)^N`` and ``d >= 1``; return a HurstVector."""
    raw = list(raw)
    if not raw:
        raise ArityError("Hurst vector must have at least one axis")
    if int(d) != d or d < 1:
        raise DomainError(f"ambient dimension d must be a positive integer, got {d}")
    for axis, h in enumerate(raw, start=1):
        if not (0.0 < float(h) < 1.0):
            raise DomainError(f"Hurst index on axis {axis} must lie in (0, 1), got {h}")
    return HurstVector(tuple(raw), int(d))


def _hurst_array(H) -> np.ndarray:
    if isinstance(H, HurstVector):
        return H.as_array()
    return np.atleast_1d(np.asarray(H, dtype=float))


def _coords(x, n: int, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.shape[-1] != n:
        raise ArityError(f"{name} has {arr.shape[-1]} coordinates, expected {n}")
    return arr


def fbs_cov(s, t, H):
    """Covariance ``E[B(s) B(t)]`` of the real-valued fractional Brownian sheet.

    ``s`` and ``t`` may be single points or broadcastable arrays of points
    (last axis = coordinates).
    """
    h = _hurst_array(H)
    s = _coords(s, h.size, "s")
    t = _coords(t, h.size, "t")
    if np.any(s < 0) or np.any(t < 0):
        raise DomainError("fractional Brownian sheet is indexed by [0, inf)^N")
    two_h = 2.0 * h
    factors = 0.5 * (s**two_h + t**two_h - np.abs(s - t) ** two_h)
    out = np.prod(factors, axis=-1)
    return float(out) if out.ndim == 0 else out


def kernel_g(h: float, t, s):
    """Moving-average kernel ``((t - s)_+)^(h-1/2) - ((-s)_+)^(h-1/2)``.

    ``h == 0.5`` exactly selects the indicator of ``[0, t)`` (right end open, so
    the value at ``s = t`` is 0 for every h); the power-law
    branch is never used there.
    """
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    if h == 0.5:
        out = ((s >= 0.0) & (s < t)).astype(float)
    else:
        a = h - 0.5
        with np.errstate(divide="ignore", invalid="ignore"):
            first = np.where(t - s > 0.0, np.abs(t - s) ** a, 0.0)
            second = np.where(-s > 0.0, np.abs(s) ** a, 0.0)
        out = first - second
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class KappaValue:
    value: float
    per_axis: tuple
    quad_error: float


def _quad(f, lo, hi, tol, **kw):
    """scipy quad with warnings turned into a (value, error, ok) triple."""
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(f, lo, hi, epsabs=0.0, epsrel=tol, limit=500, **kw)
            ok = True
        except integrate.IntegrationWarning:
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            val, err = integrate.quad(f, lo, hi, epsabs=0.0, epsrel=tol, limit=500, **kw)
            ok = False
    return val, err, ok


def _kernel_tail_sq(a: float, u: float) -> float:
    # ((1+u)^a - u^a)^2 without cancellation for large u
    if u <= 0.0:
        return 0.0
    diff = u**a * math.expm1(a * math.log1p(1.0 / u))
    return diff * diff


@functools.lru_cache(maxsize=256)
def _kappa_axis_sq(h: float, tol: float):
    """Return (kappa_l^2, error) for one axis."""
    if h == 0.5:
        return 1.0, 0.0
    a = h - 0.5
    head = 1.0 / (2.0 * h)  # int_0^1 (1-s)^(2h-1) ds
    # (-inf, 0] part: int_0^inf ((1+u)^a - u^a)^2 du, split at u = 1
    if h < 0.5:
        k = 1.0 / (2.0 * h)

        def near(w):
            # u = w^k; the Jacobian cancels the u^(2a) blow-up exactly
            if w <= 0.0:
                return k
            log_inv_u = -k * math.log(w) + math.log1p(w**k)
            return k * math.expm1(a * log_inv_u) ** 2
    else:
        def near(u):
            return _kernel_tail_sq(a, u)
    v1, e1, _ = _quad(near, 0.0, 1.0, tol / 10)
    # truncation at u = M with a^2 M^(2h-2) / (2 - 2h) <= tol/10 * head
    budget = tol / 10 * head
    log_m = math.log(a * a / ((2.0 - 2.0 * h) * budget)) / (2.0 - 2.0 * h)
    log_m = max(log_m, 1.0)
    tail_bound = a * a * math.exp((2.0 * h - 2.0) * log_m) / (2.0 - 2.0 * h)

    def far(y):
        # u ((1+u)^a - u^a)^2 with u = e^y, kept in log form for huge y
        x = math.exp(-y)
        ratio = math.expm1(a * math.log1p(x)) / x if x > 1e-300 else a
        return math.exp((2.0 * h - 2.0) * y + 2.0 * math.log(abs(ratio)))

    # long, slowly decaying range: fixed-width panels keep quad's estimate honest
    edges = np.append(np.arange(0.0, log_m, 20.0), log_m)
    v2 = e2 = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        v, e, _ = _quad(far, lo, hi, tol / 10)
        v2 += v
        e2 += e
    value = head + v1 + v2
    err = e1 + e2 + tail_bound
    if err > tol * value:
        raise NumericalError(f"kappa quadrature for H={h} did not converge", achieved=err / value)
    return value, err


def kappa(H, tol: float = DEFAULT_TOL) -> KappaValue:
    """Normalisation constant of the moving-average representation.

    The squared constant is a product of one-dimensional integrals
    ``int_{-inf}^1 g_h(1, s)^2 ds``; each is evaluated by adaptive quadrature
    with a certified truncation of the algebraic tail.
    """
    if tol <= 0:
        raise DomainError("tol must be positive")
    h = _hurst_array(H)
    sq, errs = zip(*(_kappa_axis_sq(float(x), float(tol)) for x in h))
    per_axis = tuple(math.sqrt(v) for v in sq)
    value = math.prod(per_axis)
    # relative errors of a product add
    rel = sum(e / v for e, v in zip(errs, sq))
    return KappaValue(value, per_axis, rel * value * value)


@functools.lru_cache(maxsize=1 << 16)
def _axis_integral_cached(h, s, t, lo, hi, tol):
    m = min(s, t)
    delta = abs(t - s)
    v0, v1 = m - hi, m - lo
    if v1 <= v0:
        return 0.0, 0.0
    if h == 0.5:
        return v1 - v0, 0.0
    two_h = 2.0 * h
    if delta == 0.0:
        return (v1**two_h - v0**two_h) / two_h, 0.0
    a = h - 0.5
    if h < 0.5 and v0 == 0.0:
        # u = v^(2h) removes the endpoint singularity
        k = 1.0 / two_h

        def f(u):
            if u <= 0.0:
                return 0.0
            v = u**k
            return k * u ** (k - 1.0 + k * a) * (v + delta) ** a

        val, err, ok = _quad(f, 0.0, v1**two_h, tol)
    else:
        val, err, ok = _quad(lambda v: v**a * (v + delta) ** a, v0, v1, tol)
    if not ok and err > 10 * tol * abs(val):
        raise NumericalError(
            f"axis integral failed (h={h}, s={s}, t={t}, [{lo}, {hi}])", achieved=err
        )
    return val, err


def axis_integral(h: float, s: float, t: float, lo: float, hi: float, tol: float = DEFAULT_TOL):
    """``int_lo^hi (s-r)^(h-1/2) (t-r)^(h-1/2) dr`` for ``0 <= lo <= hi <= min(s, t)``.

    Returns ``(value, error_estimate)``.
    """
    if hi > min(s, t) or lo < 0 or lo > hi:
        raise DomainError(f"need 0 <= lo <= hi <= min(s, t); got [{lo}, {hi}] for s={s}, t={t}")
    return _axis_integral_cached(float(h), float(s), float(t), float(lo), float(hi), float(tol))


def liouville_cov(s, t, H, tol: float = DEFAULT_TOL) -> float:
    """Covariance of the fractional Liouville sheet with index H."""
    h = _hurst_array(H)
    s = _coords(s, h.size, "s")
    t = _coords(t, h.size, "t")
    if np.any(s < 0) or np.any(t < 0):
        raise DomainError("Liouville sheet is indexed by [0, inf)^N")
    out = 1.0
    for hl, sl, tl in zip(h, s, t):
        out *= axis_integral(hl, sl, tl, 0.0, min(sl, tl), tol)[0]
    return out


REGION_KINDS = ("corner", "slab", "remainder", "full")


@dataclass(frozen=True)
class RegionComponent:
    """One independent piece of the Liouville sheet.

    ``kind`` is ``corner`` (white noise on ``[0, eps]^N``), ``slab`` (the box
    where only ``axis`` exceeds ``eps``; ``axis`` is 0-based), ``remainder``
    (everything else inside ``[0, t]``) or ``full``.
    """

    kind: str
    epsilon: float = 0.0
    axis: int | None = None

    def __post_init__(self):
        if self.kind not in REGION_KINDS:
            raise DomainError(f"unknown region kind {self.kind!r}")
        if self.kind != "full" and not self.epsilon > 0:
            raise DomainError("epsilon must be positive")
        if self.kind == "slab" and self.axis is None:
            raise DomainError("slab component needs an axis")


def _slab_value(h, s, t, eps, axis, tol):
    out = 1.0
    for k, (hk, sk, tk) in enumerate(zip(h, s, t)):
        if k == axis:
            out *= axis_integral(hk, sk, tk, eps, min(sk, tk), tol)[0]
        else:
            out *= axis_integral(hk, sk, tk, 0.0, eps, tol)[0]
    return out


def component_cov(region: RegionComponent, s, t, H, tol: float = DEFAULT_TOL) -> float:
    """Covariance of one component of the disjoint-region decomposition."""
    h = _hurst_array(H)
    s = _coords(s, h.size, "s")
    t = _coords(t, h.size, "t")
    if region.kind == "full":
        return liouville_cov(s, t, h, tol)
    eps = region.epsilon
    if np.any(s < eps) or np.any(t < eps):
        raise DomainError(f"epsilon={eps} exceeds a coordinate of s={s} or t={t}")
    if region.kind == "slab":
        if not 0 <= region.axis < h.size:
            raise DomainError(f"slab axis {region.axis} out of range for N={h.size}")
        return _slab_value(h, s, t, eps, region.axis, tol)
    corner = math.prod(axis_integral(hk, sk, tk, 0.0, eps, tol)[0] for hk, sk, tk in zip(h, s, t))
    if region.kind == "corner":
        return corner
    slabs = sum(_slab_value(h, s, t, eps, ax, tol) for ax in range(h.size))
    return liouville_cov(s, t, h, tol) - corner - slabs


def slab_lower_bound(axis: int, eps: float, t_n, t_prev_axis: float, H) -> float:
    """Variance of the slab noise between ``t_prev_axis`` and ``t_n[axis]``.

    This piece of ``Y_axis(t_n)`` is independent of every ``Y_axis(t_j)`` whose
    ``axis`` coordinate is at most ``t_prev_axis``, so it bounds the
    conditional variance from below.
    """
    h = _hurst_array(H)
    t_n = _coords(t_n, h.size, "t_n")
    if not eps < t_n.min():
        raise DomainError("eps must be below every coordinate of t_n")
    if t_prev_axis > t_n[axis]:
        raise DomainError("t_prev_axis must not exceed t_n[axis]")
    if t_prev_axis < eps:
        raise DomainError("t_prev_axis must be at least eps")
    out = 1.0
    for k, (hk, tk) in enumerate(zip(h, t_n)):
        if k == axis:
            out *= (tk - t_prev_axis) ** (2 * hk) / (2 * hk)
        else:
            out *= (tk ** (2 * hk) - (tk - eps) ** (2 * hk)) / (2 * hk)
    return out


@dataclass(frozen=True)
class Box:
    lower: tuple
    upper: tuple

    def __post_init__(self):
        lo = tuple(float(x) for x in self.lower)
        hi = tuple(float(x) for x in self.upper)
        if len(lo) != len(hi):
            raise ArityError("box corners differ in dimension")
        if any(b <= a for a, b in zip(lo, hi)):
            raise DomainError(f"box [{lo}, {hi}] has empty interior")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def volume(self) -> float:
        return math.prod(b - a for a, b in zip(self.lower, self.upper))

    def contains(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        return np.all((p >= self.lower) & (p <= self.upper), axis=-1)


def partition_boxes(eps: float, t) -> list:
    """Split ``[0, t]`` into the corner, the N slabs and the remainder boxes.

    Returns ``(Box, kind)`` pairs; ``kind`` is ``"corner"``, ``("slab", axis)``
    or ``"remainder"``.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if not 0 < eps < t.min():
        raise DomainError(f"eps={eps} must lie in (0, min t)")
    out = []
    for pattern in itertools.product((False, True), repeat=t.size):
        lower = tuple(eps if high else 0.0 for high in pattern)
        upper = tuple(tl if high else eps for high, tl in zip(pattern, t))
        n_high = sum(pattern)
        if n_high == 0:
            kind = "corner"
        elif n_high == 1:
            kind = ("slab", pattern.index(True))
        else:
            kind = "remainder"
        out.append((Box(lower, upper), kind))
    return out
