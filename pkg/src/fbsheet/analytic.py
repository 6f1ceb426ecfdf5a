"""Quadrature-grade local-time moments and the checks built on them.

Moments of ``L(x, T)`` come from the Gaussian characteristic-function
representation with the frequency integral done in closed form::

    E[L(x,T)^n] = (2 pi)^(-nd/2) int_{T^n} det G^(-d/2) exp(-|x|^2 1'G^-1 1 / 2) dt

where ``G`` is the covariance of the sheet at the ``n`` time points.  The
integrand blows up where points coincide; the ``n = 2``, one-parameter case is
integrated in the log of the gap, and the excluded tube around the diagonal
is bounded using the two-point conditional variance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from . import field_model as fm
from .errors import DegenerateInputError, DomainError, InsufficientReplicasError, NumericalError
from .exponents import beta_and_dim
from .field_model import Box
from .gaussian_engine import FBS, CovModel, assemble_cov, conditional_variance
from .report import CheckResult
from .rng import SeedSpec, uniforms

METHODS = ("quadrature", "monte-carlo")


@dataclass
class MomentReport:
    n: int
    x: tuple
    T: Box
    value: float
    quad_error: float
    method: str
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "x": list(self.x),
            "T": {"lower": list(self.T.lower), "upper": list(self.T.upper)},
            "value": self.value,
            "quad_error": self.quad_error,
            "method": self.method,
            **self.extra,
        }


def _x_vector(x, d: int) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.size == 1 and d > 1:
        x = np.full(d, float(x[0]))
    if x.size != d:
        raise DomainError(f"spatial point has {x.size} coordinates, expected {d}")
    return x


def _check_box(T: Box, h: np.ndarray) -> None:
    if len(T.lower) != h.size:
        raise DomainError("box dimension differs from the number of Hurst indices")
    if min(T.lower) < 0:
        raise DomainError("time box must lie in the nonnegative orthant")


def _nquad(f, ranges, tol):
    val, err = integrate.nquad(f, ranges, opts={"epsabs": 0.0, "epsrel": tol, "limit": 200})
    return float(val), float(err)


# --- n = 1 ------------------------------------------------------------------


def _first_moment_x0(T: Box, h: np.ndarray, d: int) -> tuple:
    # v(t)^(-d/2) = prod t_l^(-H_l d): the integral factorises over axes
    out = (2 * math.pi) ** (-d / 2)
    for lo, hi, hl in zip(T.lower, T.upper, h):
        e = 1.0 - hl * d
        if lo == 0 and e <= 0:
            return math.inf, 0.0
        out *= math.log(hi / lo) if abs(e) < 1e-15 else (hi**e - lo**e) / e
    return out, 1e-15 * out


def _first_moment_quad(x: np.ndarray, T: Box, h: np.ndarray, d: int, tol: float) -> tuple:
    xx = float(x @ x)

    def f(*t):
        v = math.prod(tl ** (2 * hl) for tl, hl in zip(t, h))
        return (2 * math.pi * v) ** (-d / 2) * math.exp(-0.5 * xx / v)

    return _nquad(f, list(zip(T.lower, T.upper)), tol)


def first_moment(x, T: Box, H, d: int, tol: float = 1e-10) -> MomentReport:
    """``E[L(x, T)]`` as an integral of the one-point normal density."""
    h = fm._hurst_array(H)
    _check_box(T, h)
    xv = _x_vector(x, d)
    if not np.any(xv):
        val, err = _first_moment_x0(T, h, d)
    else:
        val, err = _first_moment_quad(xv, T, h, d, tol)
    return MomentReport(1, tuple(xv), T, val, err, "quadrature")


def corner_first_moment(x, a, r: float, H, d: int, tol: float = 1e-8) -> MomentReport:
    """``E[L(x + B(a), [a, a + r])]``: the first moment of the field re-centred at the corner.

    The re-centred field has variance ``Var(B(t) - B(a))``, which vanishes at
    the corner.  Each axis is mapped by ``t = a + r w^2`` to soften that
    singularity for the quadrature.
    """
    h = fm._hurst_array(H)
    xv = _x_vector(x, d)
    xx = float(xv @ xv)
    a = np.asarray(a, dtype=float)
    if a.size != h.size or np.any(a <= 0) or r <= 0:
        raise DomainError("corner must be a positive point of matching dimension and r > 0")
    va = float(np.prod(a ** (2 * h)))
    n_axes = h.size

    def f(*w):
        w = np.asarray(w)
        t = a + r * w**2
        vt = float(np.prod(t ** (2 * h)))
        # Var(B(t) - B(a)) = v(t) + v(a) - 2 cov(t, a), with the product written per axis
        cov = float(np.prod(0.5 * (t ** (2 * h) + a ** (2 * h) - (r * w**2) ** (2 * h))))
        var = vt + va - 2 * cov
        if var <= 0:
            return 0.0
        jac = float(np.prod(2 * r * w))
        return jac * (2 * math.pi * var) ** (-d / 2) * math.exp(-0.5 * xx / var)

    val, err = _nquad(f, [(0.0, 1.0)] * n_axes, tol)
    T = Box(tuple(a), tuple(a + r))
    return MomentReport(1, tuple(xv), T, val, err, "quadrature", {"anchor": "corner"})


# --- n = 2, one parameter -----------------------------------------------------


def _pair_terms(t1: float, gap: float, hh: float):
    """``(v1, v2, det, increment variance)`` for fBm at ``t1`` and ``t1 + gap``.

    The determinant is ``v1 w - (c - v1)^2`` with ``w = gap^(2H)``, which keeps
    full relative precision as the gap shrinks.
    """
    two_h = 2 * hh
    v1 = t1**two_h
    rise = v1 * math.expm1(two_h * math.log1p(gap / t1))
    w = gap**two_h
    c_minus_v1 = 0.5 * (rise - w)
    det = v1 * w - c_minus_v1**2
    return v1, v1 + rise, det, w


def _pair_density(t1, gap, hh, d, xx):
    _, _, det, w = _pair_terms(t1, gap, hh)
    if det <= 0:
        return 0.0
    return (2 * math.pi) ** (-d) * det ** (-d / 2) * math.exp(-0.5 * xx * w / det)


def _pair_integral(lo, hi, hh, d, xx, tube, tol):
    """Twice the integral over ``lo <= t1 < t2 <= hi`` with ``t2 - t1 >= tube``."""
    if hi - lo <= tube:
        return 0.0, 0.0

    def inner(t1):
        top = math.log(hi - t1)
        bottom = math.log(tube)
        if top <= bottom:
            return 0.0
        val, _ = integrate.quad(
            lambda y: _pair_density(t1, math.exp(y), hh, d, xx) * math.exp(y),
            bottom, top, epsabs=0.0, epsrel=tol, limit=200,
        )
        return val

    val, err = integrate.quad(inner, lo, hi - tube, epsabs=0.0, epsrel=tol, limit=200)
    return 2 * val, 2 * err


def _tube_constant(lo, hi, hh, tube):
    """Lower bound of ``det / (v1 gap^(2H))`` over gaps up to ``tube``, halved for safety."""
    t1 = np.linspace(lo, hi, 41)
    gaps = np.geomspace(max(tube * 1e-8, 1e-300), max(tube, 1e-300), 41)
    ratios = [
        _pair_terms(a, g, hh)[2] / (a ** (2 * hh) * g ** (2 * hh))
        for a in t1 for g in gaps
    ]
    return 0.5 * min(ratios)


def tube_bound(T: Box, hh: float, d: int, tube: float) -> float:
    """Upper bound on the second-moment mass inside ``|t2 - t1| < tube``."""
    e = 1.0 - hh * d
    if e <= 0:
        return math.inf
    lo, hi = T.lower[0], T.upper[0]
    c = _tube_constant(lo, hi, hh, tube)
    vmin = lo ** (2 * hh)
    if vmin == 0:
        return math.inf
    return 2 * (2 * math.pi) ** (-d) * (hi - lo) * (c * vmin) ** (-d / 2) * tube**e / e


def _choose_tube(T: Box, hh: float, d: int, tol: float, scale: float) -> float:
    e = 1.0 - hh * d
    if e <= 0:
        raise NumericalError("second moment is infinite: H d >= 1 for a single time axis")
    target = tol / 10 * max(scale, 1e-300)
    tube = 1e-3 * (T.upper[0] - T.lower[0])
    for _ in range(400):
        if tube_bound(T, hh, d, tube) <= target:
            return tube
        tube *= 0.1
        if tube < 1e-290:
            break
    raise NumericalError("could not bound the excluded diagonal tube", achieved=tube_bound(T, hh, d, tube))


def second_moment_quad(x, T: Box, H, d: int, tol: float = 1e-8) -> MomentReport:
    """``E[L(x, T)^2]`` for a single time axis by nested quadrature."""
    h = fm._hurst_array(H)
    if h.size != 1:
        raise DomainError("quadrature second moment needs a single time axis")
    _check_box(T, h)
    if T.lower[0] <= 0:
        raise DomainError("time interval must be bounded away from zero")
    xv = _x_vector(x, d)
    xx = float(xv @ xv)
    hh = float(h[0])
    rough, _ = _pair_integral(T.lower[0], T.upper[0], hh, d, xx, 1e-12 * (T.upper[0] - T.lower[0]), 1e-6)
    tube = _choose_tube(T, hh, d, tol, rough)
    val, err = _pair_integral(T.lower[0], T.upper[0], hh, d, xx, tube, tol)
    bound = tube_bound(T, hh, d, tube)
    return MomentReport(2, tuple(xv), T, val + bound / 2, err + bound / 2, "quadrature",
                        {"tube": tube, "tube_bound": bound})


def second_moment_truncated(x, T: Box, H, d: int, tube: float, tol: float = 1e-8) -> float:
    """Second-moment integral with the diagonal tube of width ``tube`` removed and no correction."""
    h = fm._hurst_array(H)
    if h.size != 1:
        raise DomainError("needs a single time axis")
    xv = _x_vector(x, d)
    return _pair_integral(T.lower[0], T.upper[0], float(h[0]), d, float(xv @ xv), tube, tol)[0]


# --- Monte Carlo over T^n ---------------------------------------------------------


def _batched_cov(pts: np.ndarray, h: np.ndarray) -> np.ndarray:
    # pts: (M, n, N) -> (M, n, n)
    s = pts[:, :, None, :]
    t = pts[:, None, :, :]
    return fm.fbs_cov(s, t, h)


def moment_mc(x, T: Box, H, d: int, n: int, samples: int = 200_000, seed: SeedSpec = SeedSpec(0)):
    """Plain Monte Carlo estimate of ``E[L(x,T)^n]`` with uniform time points."""
    h = fm._hurst_array(H)
    _check_box(T, h)
    xv = _x_vector(x, d)
    xx = float(xv @ xv)
    N = h.size
    lo = np.asarray(T.lower)
    span = np.asarray(T.upper) - lo
    u = np.stack([uniforms(seed, samples * n, channel=l) for l in range(N)], axis=-1)
    pts = lo + span * u.reshape(samples, n, N)
    G = _batched_cov(pts, h)
    det = np.linalg.det(G)
    ok = det > 0
    ones = np.ones((samples, n, 1))
    q = np.zeros(samples)
    q[ok] = np.einsum("mi,mi->m", ones[ok, :, 0], np.linalg.solve(G[ok], ones[ok])[..., 0])
    vals = np.zeros(samples)
    vals[ok] = (2 * math.pi) ** (-n * d / 2) * det[ok] ** (-d / 2) * np.exp(-0.5 * xx * q[ok])
    vol = T.volume**n
    mean = float(vals.mean() * vol)
    stderr = float(vals.std(ddof=1) * vol / math.sqrt(samples))
    return MomentReport(n, tuple(xv), T, mean, stderr, "monte-carlo", {"samples": samples})


def exact_moment(x, T: Box, H, d: int, n: int, tol: float = 1e-8, samples: int = 200_000,
                 seed: SeedSpec = SeedSpec(0)) -> MomentReport:
    """``E[L(x, T)^n]`` for ``n <= 3``.

    Quadrature for ``n = 1`` and for ``n = 2`` on a single time axis; other
    cases fall back to Monte Carlo over ``T^n`` with the standard error
    reported as ``quad_error``.
    """
    h = fm._hurst_array(H)
    if not 1 <= n <= 3:
        raise DomainError("moment order must be 1, 2 or 3")
    if h.size * n > 6:
        raise DomainError("N * n must not exceed 6")
    if d < 1:
        raise DomainError("d must be at least 1")
    if n > 1 and d >= np.sum(1.0 / h):
        raise NumericalError("moments of order >= 2 are infinite when d >= sum 1/H")
    if n == 1:
        return first_moment(x, T, h, d, tol)
    if n == 2 and h.size == 1:
        return second_moment_quad(x, T, h, d, tol)
    return moment_mc(x, T, h, d, n, samples, seed)


# --- divergence of the second moment --------------------------------------------


@dataclass
class DivergenceReport:
    tubes: list
    values: list
    increments: list
    increment_ratios: list
    diverges: bool

    def to_json(self) -> dict:
        return {
            "tubes": self.tubes,
            "values": self.values,
            "increments": self.increments,
            "increment_ratios": self.increment_ratios,
            "diverges": self.diverges,
        }


def divergence_check(x, T: Box, H, d: int, tubes=None, tol: float = 1e-8) -> DivergenceReport:
    """Second-moment integral under shrinking diagonal tubes.

    With tubes shrinking geometrically, the mass added at each step shrinks
    geometrically when the integral converges and stays bounded below (or
    grows) when it diverges.  Divergence is declared when the values increase
    monotonically and the successive increments never shrink.
    """
    if tubes is None:
        tubes = [10.0**-k for k in range(2, 12)]
    tubes = sorted(tubes, reverse=True)
    values = [second_moment_truncated(x, T, H, d, w, tol) for w in tubes]
    inc = list(np.diff(values))
    ratios = [b / a for a, b in zip(inc[:-1], inc[1:])]
    monotone = all(i > 0 for i in inc)
    diverges = monotone and all(r >= 1.0 for r in ratios)
    return DivergenceReport(list(tubes), values, inc, ratios, diverges)


# --- increment second moment -----------------------------------------------------


def _pair_density_xy(t1, gap, hh, d, x, y):
    """Integrand of ``E[(L(x) - L(y))^2]`` for one ordered pair of times.

    Each channel contributes ``exp(-q(u,v)/2)`` with ``q`` the quadratic form of
    the inverse covariance; combining the three terms before integration
    avoids subtracting large nearly equal moments.
    """
    v1, v2, det, _ = _pair_terms(t1, gap, hh)
    if det <= 0:
        return 0.0
    c = 0.5 * (v1 + v2 - gap ** (2 * hh))

    def q(a, b):
        return float(np.sum(v2 * a * a - 2 * c * a * b + v1 * b * b)) / det

    combo = math.exp(-0.5 * q(x, x)) - math.exp(-0.5 * q(x, y)) - math.exp(-0.5 * q(y, x)) + math.exp(-0.5 * q(y, y))
    return (2 * math.pi) ** (-d) * det ** (-d / 2) * combo


def increment_moment_two(x, y, T: Box, H, d: int, gamma: float, c: float = 1.0, tol: float = 1e-7):
    """``(E[(L(x,T) - L(y,T))^2], bound)`` for a single time axis.

    ``bound`` is ``c^2 (2!)^(N - beta + (1 + H_tau) gamma) |x-y|^(2 gamma) r^(2(beta - H_tau gamma))``
    with ``r`` the side of ``T`` and ``c`` a caller-supplied constant.
    """
    h = fm._hurst_array(H)
    if h.size != 1:
        raise DomainError("increment moment is implemented for a single time axis")
    prof = beta_and_dim(h, d)
    gmax = min(1.0, prof.alpha_tau / (2 * prof.tau))
    if not 0 < gamma < gmax:
        raise DomainError(f"gamma must lie in (0, {gmax:.6g})")
    xv, yv = _x_vector(x, d), _x_vector(y, d)
    if np.linalg.norm(xv - yv) > 1:
        raise DomainError("|x - y| must be at most 1")
    hh = float(h[0])
    lo, hi = T.lower[0], T.upper[0]
    r = hi - lo
    tube = _choose_tube(T, hh, d, tol, 1e-3)

    def inner(t1):
        top = math.log(hi - t1)
        bottom = math.log(tube)
        if top <= bottom:
            return 0.0
        return integrate.quad(
            lambda s: _pair_density_xy(t1, math.exp(s), hh, d, xv, yv) * math.exp(s),
            bottom, top, epsabs=1e-14, epsrel=tol, limit=200,
        )[0]

    val = 2 * integrate.quad(inner, lo, hi - tube, epsabs=1e-14, epsrel=tol, limit=200)[0]
    if np.array_equal(xv, yv):
        val = 0.0
    N = h.size
    ht = float(np.sort(h)[prof.tau - 1])
    dist = float(np.linalg.norm(xv - yv))
    bound = c**2 * 2.0 ** (N - prof.beta_tau + (1 + ht) * gamma) * dist ** (2 * gamma) * r ** (
        2 * (prof.beta_tau - ht * gamma))
    return max(val, 0.0), bound


# --- Gaussian integral identity ----------------------------------------------------


def cuzick_identity_check(points, model: CovModel, H, gamma: float, tol: float = 1e-9) -> CheckResult:
    """Reduction of a Gaussian-weighted integral to one dimension.

    For ``g(v) = |v|^gamma`` applied to the first frequency::

        int g(v_1) exp(-Var(sum v_j Z_j)/2) dv
            = (2 pi)^((n-1)/2) det^(-1/2) int g(v / sigma_1) exp(-v^2/2) dv

    with ``sigma_1^2`` the conditional variance of ``Z_1`` given the rest.
    The left side is an ``n``-dimensional quadrature, the right side a
    one-dimensional one.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    n = pts.shape[0]
    if n > 2:
        raise DomainError("identity check supports at most two points")
    if gamma < 0:
        raise DomainError("gamma must be nonnegative")
    C = assemble_cov(pts, model, H)
    det = float(np.linalg.det(C))
    if det <= 1e-14 * float(np.max(np.diag(C))) ** n:
        raise DegenerateInputError("random variables are (numerically) linearly dependent")
    sigma1 = math.sqrt(conditional_variance(0, pts, model, H))

    def g(v):
        return abs(v) ** gamma

    if n == 1:
        lhs, e1 = integrate.quad(lambda v: g(v) * math.exp(-0.5 * C[0, 0] * v * v), -np.inf, np.inf,
                                 epsabs=0, epsrel=tol)
    else:
        # integrate v_2 first; it enters only through a Gaussian factor
        def inner(v1):
            return integrate.quad(
                lambda v2: math.exp(-0.5 * (C[0, 0] * v1 * v1 + 2 * C[0, 1] * v1 * v2 + C[1, 1] * v2 * v2)),
                -np.inf, np.inf, epsabs=0, epsrel=tol)[0]

        lhs, e1 = integrate.quad(lambda v1: g(v1) * inner(v1), -np.inf, np.inf, epsabs=0, epsrel=tol, limit=200)
    one_d, e2 = integrate.quad(lambda v: g(v / sigma1) * math.exp(-0.5 * v * v), -np.inf, np.inf,
                               epsabs=0, epsrel=tol)
    pref = (2 * math.pi) ** ((n - 1) / 2) / math.sqrt(det)
    rhs = pref * one_d
    allowed = 1e-6 * max(abs(lhs), abs(rhs)) + e1 + pref * e2
    slack = allowed - abs(lhs - rhs)
    return CheckResult("cuzick-identity", "Gaussian integral reduction to one dimension", lhs, rhs, slack,
                       bool(slack >= 0), True,
                       {"points": pts.tolist(), "model": model.kind, "gamma": gamma})


# --- tail of the local oscillation ---------------------------------------------------


@dataclass
class TailReport:
    u: list
    frequency: list
    threshold: float
    c48: float
    c49: float
    tail_slope: float

    def to_json(self) -> dict:
        return self.__dict__.copy()


def tail_report(sups: np.ndarray, u_grid, h: float, h1: float) -> TailReport:
    """Exceedance frequencies of replica suprema and the smallest Gaussian-tail constant.

    ``c48`` is the replica mean of the supremum divided by ``h^H1``; bounds are
    fitted only for ``u`` above ``c48 h^H1``.  ``c49`` is the smallest ``c`` for
    which ``freq(u) <= exp(-u^2 / (c h^(2 H1)))`` holds at every fitted ``u``.
    ``tail_slope`` regresses ``log(-log freq)`` on ``log u`` there.
    """
    sups = np.asarray(sups, dtype=float)
    u = np.sort(np.asarray(u_grid, dtype=float))
    freq = np.array([np.mean(sups >= ui) for ui in u])
    c48 = float(sups.mean() / h**h1)
    threshold = c48 * h**h1
    mask = (u > threshold) & (freq > 0) & (freq < 1)
    if np.any(mask):
        c49 = float(np.max(u[mask] ** 2 / (h ** (2 * h1) * -np.log(freq[mask]))))
    else:
        c49 = math.nan
    if np.count_nonzero(mask) >= 2:
        slope = float(np.polyfit(np.log(u[mask]), np.log(-np.log(freq[mask])), 1)[0])
    else:
        slope = math.nan
    return TailReport(u.tolist(), freq.tolist(), threshold, c48, c49, slope)


def tail_bound_check(H, s, h: float, u_grid, replicas: int, d: int = 1, cells: int = 32,
                     seed: SeedSpec = SeedSpec(0)) -> TailReport:
    """Simulated ``sup_{t in [s, s + h]} |B(t) - B(s)|`` fed to :func:`tail_report`.

    Each replica samples the sheet on a ``cells``-per-axis vertex grid of the
    cube with corner ``s``; ``s`` itself is a grid point.
    """
    from .gaussian_engine import Grid, kron_factors, sample_field

    hv = fm.validate_hurst(H, d)
    s = np.asarray(s, dtype=float)
    if s.size != hv.n_axes or np.any(s <= 0) or h <= 0:
        raise DomainError("s must be a positive point of matching dimension and h > 0")
    if replicas < 2:
        raise DomainError("need at least two replicas")
    grid = Grid.vertices(tuple(s), tuple(s + h), cells)
    factors = kron_factors(grid, hv)
    sups = np.empty(replicas)
    for i in range(replicas):
        v = sample_field(grid, hv, d, seed.replica(i), factors).values
        inc = v - v[(0,) * hv.n_axes]
        sups[i] = float(np.sqrt(np.max(np.sum(inc * inc, axis=-1))))
    return tail_report(sups, u_grid, h, float(min(hv.h)))


# --- expectation of the grid histogram estimator ---------------------------------------


def histogram_expectation(grid_coords, T: Box, H, d: int, bin_lower, bin_upper) -> float:
    """Exact mean of the histogram estimate for one bin on a given time grid.

    Each grid cell contributes its clipped volume times the probability that
    the (centred, independent-channel) field value at the grid point lands in
    the bin; dividing by the bin volume gives the estimator's expectation.
    The gap between this and the first moment is the discretization bias.
    """
    from scipy.special import ndtr

    from .local_time import axis_cells

    h = fm._hurst_array(H)
    lo = np.broadcast_to(np.asarray(bin_lower, dtype=float), (d,))
    hi = np.broadcast_to(np.asarray(bin_upper, dtype=float), (d,))
    idx, widths = [], []
    for coords, a, b in zip(grid_coords, T.lower, T.upper):
        i, w = axis_cells(np.asarray(coords, dtype=float), a, b)
        idx.append(np.asarray(coords)[i])
        widths.append(w)
    mesh = np.meshgrid(*idx, indexing="ij")
    wmesh = np.meshgrid(*widths, indexing="ij")
    sd = np.prod([m ** hl for m, hl in zip(mesh, h)], axis=0)
    weight = np.prod(wmesh, axis=0)
    prob = np.ones_like(sd)
    for k in range(d):
        prob *= ndtr(hi[k] / sd) - ndtr(lo[k] / sd)
    return float(np.sum(weight * prob) / np.prod(hi - lo))


# --- simulated moment scaling over shrinking boxes --------------------------------------

ANCHORS = ("corner", "fixed")


def moment_scaling_fit(x, H, d: int, n: int, radii, replicas: int, a=None, cells: int = 32,
                       width_factor: float = 0.2, seed: SeedSpec = SeedSpec(0), anchor: str = "corner"):
    """Fit ``E[L(x, [a, a + r])^n] ~ r^slope`` from simulated histogram local times.

    For each radius the sheet is sampled on a ``cells``-per-axis vertex grid of
    ``[a, a + r]`` and ``L`` is read from a bin of side
    ``width_factor * r^min(H)`` centred at ``x``.  With ``anchor="corner"`` the
    field is re-centred at the corner, so the estimate is of ``L(x + B(a))``
    and the slope is compared with ``n * beta``.  ``anchor="fixed"`` keeps the
    level fixed; averaging over where ``B(a)`` lands adds the range scale
    ``r^(H_1 d)``, so that slope is compared with ``n * beta + H_1 d`` (report
    only).  ``a`` defaults to ``(1, ..., 1)``.
    """
    from .fitting import ScalingFit, fit_exponent, slope_sampling_stderr
    from .gaussian_engine import Grid, kron_factors, sample_field
    from .local_time import LatticeSpec, occupation_histogram

    if anchor not in ANCHORS:
        raise DomainError(f"anchor must be one of {ANCHORS}")
    if n < 1 or replicas < 2:
        raise DomainError("need n >= 1 and at least two replicas")
    h = fm._hurst_array(H)
    hv = fm.validate_hurst(h, d)
    xv = _x_vector(x, d)
    a = np.ones(h.size) if a is None else np.asarray(a, dtype=float)
    radii = sorted((float(r) for r in radii), reverse=True)
    means, ses = [], []
    for k, r in enumerate(radii):
        grid = Grid.vertices(tuple(a), tuple(a + r), cells)
        factors = kron_factors(grid, hv)
        T = Box(tuple(a), tuple(a + r))
        w = width_factor * r ** float(h.min())
        lattice = LatticeSpec(w, origin=tuple(xv - w / 2))
        vals = np.empty(replicas)
        for i in range(replicas):
            s = sample_field(grid, hv, d, seed.replica(k * replicas + i), factors)
            if anchor == "corner":
                s.values -= s.values[(0,) * h.size]
            vals[i] = occupation_histogram(s, T, lattice).value_at(xv) ** n
        means.append(float(vals.mean()))
        ses.append(float(vals.std(ddof=1) / math.sqrt(replicas)))
    if min(means) <= 0:
        raise InsufficientReplicasError(f"moment estimate is zero at some radius with {replicas} replicas")
    beta = beta_and_dim(h, d).beta_tau
    expected = n * beta if anchor == "corner" else n * beta + float(h.min()) * d
    fit = fit_exponent(list(zip(radii, means)))
    return ScalingFit(f"moment-n{n}-{anchor}", tuple(radii), tuple(means), fit, expected, "mean",
                      {"standard_errors": ses, "sampling_stderr": slope_sampling_stderr(radii, means, ses),
                       "replicas": replicas, "cells": cells, "anchor": anchor})
