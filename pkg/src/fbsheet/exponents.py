"""Exponent bookkeeping: regime index, Hoelder weights, beta, dimension, gauges.

All functions work on the *sorted* Hurst indices ``H_1 <= ... <= H_N``; the
weights ``p`` are therefore listed in ascending-H order.

The weight construction is recursive.  For one active axis ``p = [1]``.  For
two axes there is an explicit formula (two cases depending on whether the
indices coincide).  For ``tau = n + 1 >= 3`` the first axis is peeled off:
weights for the remaining ``n`` axes at ``q - 1/H_1`` are rescaled by
``1 - 1/(H_1 q) + eta`` and the first weight is ``1/(H_1 q) - eta``.  Every
"small enough" free parameter is set to the midpoint of its admissible
interval.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import integrate, optimize, special

from .errors import DomainError
from .field_model import HurstVector

SUM_TOL = 1e-12


def _sorted_h(H) -> np.ndarray:
    if isinstance(H, HurstVector):
        return np.asarray(H.sorted, dtype=float)
    return np.sort(np.atleast_1d(np.asarray(H, dtype=float)))


def tau_index(H, q: float) -> int:
    """The regime ``tau`` with ``sum_{l<tau} 1/H_l <= q < sum_{l<=tau} 1/H_l``."""
    h = _sorted_h(H)
    if q < 0:
        raise DomainError(f"q must be nonnegative, got {q}")
    partial = np.cumsum(1.0 / h)
    if q >= partial[-1]:
        raise DomainError(
            f"q={q} >= sum 1/H = {partial[-1]:.6g}: no local time regime"
        )
    return int(np.searchsorted(partial, q, side="right")) + 1


def _delta2(h1: float, h2: float, q: float) -> float:
    # largest delta with H1 H2 q (H2 - H1 + delta H1) < (H2 - H1)(H2 + H1 - delta H1)
    if h1 == h2:
        return 1.0
    gap = h2 - h1
    num = gap * (h2 + h1 - h1 * h2 * q)
    den = h1 * h1 * h2 * q + gap * h1
    return min(1.0, num / den)


def delta_threshold(H, q: float) -> float:
    """Upper end of the admissible ``delta`` interval for the regime of ``q``."""
    h = _sorted_h(H)
    tau = tau_index(h, q)
    if tau == 2:
        return _delta2(h[0], h[1], q)
    return 1.0


def _case_two(h1: float, h2: float, q: float, delta: float) -> list:
    x = h1 * q
    if h1 == h2:
        if x == 1.0:
            eta = 1.0  # window is unbounded; any positive value works
        else:
            eta = 0.5 * (2.0 - x) * x / (x - 1.0)
        inv1 = 1.0 / (x + eta)
    else:
        inv1 = (1.0 / x - delta * h2 / (h2 - h1)) / (1.0 - delta)
    return [inv1, 1.0 - inv1]


def _inverse_weights(h: np.ndarray, q: float, delta: float) -> list:
    """1/p_l for the first ``tau`` axes of ``h`` (sorted), recursively."""
    tau = tau_index(h, q)
    if tau == 1:
        return [1.0]
    if tau == 2:
        return _case_two(h[0], h[1], q, delta)
    h1 = h[0]
    x = h1 * q
    rest = h[1:]
    q_rest = q - 1.0 / h1
    delta_sub = delta_threshold(rest, q_rest)
    delta_p = min(delta, delta_sub) / 2.0
    inv_rest = _inverse_weights(rest, q_rest, delta_p)
    # eta must keep every rescaled weight below its cap, keep the first weight
    # positive, and leave room for the (1 - delta) slack
    caps = [1.0 / x]
    for hl, ip in zip(rest, inv_rest):
        caps.append(1.0 / (hl * q * ip) - 1.0 + 1.0 / x)
    caps.append((x - 1.0) / x * (delta - delta_p) / (1.0 - delta))
    eta = 0.5 * min(caps)
    scale = 1.0 - 1.0 / x + eta
    return [1.0 / x - eta] + [ip * scale for ip in inv_rest]


@dataclass(frozen=True)
class HolderWeights:
    """Weights ``p`` (ascending-H order) and the selected index ``ell0``.

    ``ell0`` is 1-based like the construction it comes from.
    """

    p: tuple
    delta: float
    ell0: int
    rho: float
    eta: float
    delta_tau: float
    q: float
    tau: int
    eps: tuple = field(default=())

    @property
    def inv_p(self) -> np.ndarray:
        return 1.0 / np.asarray(self.p)


def construct_weights(H, q: float, delta: float, rho: float | None = None) -> HolderWeights:
    """Build Hoelder weights for regime ``tau(q)`` and pick ``ell0``.

    ``rho`` defaults to ``alpha_tau / (4 tau)``, the midpoint of the allowed
    interval ``(0, alpha_tau / (2 tau))``.
    """
    h = _sorted_h(H)
    tau = tau_index(h, q)
    d_tau = delta_threshold(h, q)
    if not 0.0 < delta < d_tau:
        raise DomainError(f"delta must lie in (0, {d_tau:.12g}), got {delta}")
    inv = np.asarray(_inverse_weights(h, q, delta))
    alpha = float(np.sum(1.0 / h[:tau]) - q)
    if rho is None:
        rho = alpha / (4.0 * tau)
    if not 0.0 < rho < alpha / (2.0 * tau):
        raise DomainError(f"rho must lie in (0, {alpha / (2 * tau):.6g})")
    eps = 1.0 - h[:tau] * q * inv
    threshold = h[:tau] * alpha / tau
    qualifying = np.nonzero(eps >= threshold - 1e-12)[0]
    ell0 = int(qualifying[0]) + 1 if qualifying.size else int(np.argmax(eps / h[:tau])) + 1
    eta = float("nan")
    if tau == 2 and h[0] == h[1]:
        x = h[0] * q
        eta = 1.0 if x == 1.0 else 0.5 * (2.0 - x) * x / (x - 1.0)
    elif tau >= 3:
        eta = 1.0 / (h[0] * q) - inv[0]
    return HolderWeights(
        p=tuple(float(x) for x in 1.0 / inv),
        delta=float(delta),
        ell0=ell0,
        rho=float(rho),
        eta=float(eta),
        delta_tau=float(d_tau),
        q=float(q),
        tau=tau,
        eps=tuple(float(x) for x in eps),
    )


def weight_violations(H, w: HolderWeights) -> list:
    """Names of the weight invariants that fail (empty list when all hold)."""
    h = _sorted_h(H)[: w.tau]
    inv = w.inv_p
    q, tau, delta = w.q, w.tau, w.delta
    bad = []
    if abs(np.sum(inv) - 1.0) > SUM_TOL:
        bad.append("sum 1/p = 1")
    if np.any(np.asarray(w.p) < 1.0 - 1e-12):
        bad.append("p >= 1")
    if np.any(h * q * inv >= 1.0):
        bad.append("H q / p < 1")
    lhs = (1 - delta) * np.sum(h * q * inv)
    rhs = h[-1] * q + tau - np.sum(h[-1] / h)
    if lhs > rhs + 1e-12 * max(1.0, abs(rhs)):
        bad.append("(1 - delta) sum H q / p <= H_tau q + tau - sum H_tau / H")
    l0 = w.ell0 - 1
    if not h[l0] * q * inv[l0] + 2 * h[l0] * w.rho < 1.0:
        bad.append("ell0 margin")
    alpha = np.sum(1.0 / h) - q
    if abs(np.sum(np.asarray(w.eps) / h) - alpha) > 1e-10:
        bad.append("sum eps / H = alpha")
    if w.eps[l0] < h[l0] * alpha / tau - 1e-12:
        bad.append("eps_ell0 >= H alpha / tau")
    return bad


def beta_value(h: np.ndarray, k: int, q: float) -> float:
    """``N - k - H_k q + sum_{l<=k} H_k / H_l`` (1-based ``k``, sorted ``h``)."""
    hk = h[k - 1]
    return float(h.size - k - hk * q + np.sum(hk / h[:k]))


@dataclass(frozen=True)
class ExponentProfile:
    tau: int
    beta_tau: float
    alpha_tau: float
    nu: float
    dim_level_set: float
    q: float
    candidates: tuple = ()

    def to_json(self) -> dict:
        return {
            "tau": self.tau,
            "beta": self.beta_tau,
            "alpha": self.alpha_tau,
            "nu": self.nu,
            "dim_level_set": self.dim_level_set,
            "q": self.q,
            "candidates": list(self.candidates),
        }


def beta_and_dim(H, d: float) -> ExponentProfile:
    """Regime, local-time exponent and level-set dimension for ambient dimension ``d``."""
    h = _sorted_h(H)
    tau = tau_index(h, d)
    cands = tuple(beta_value(h, k, d) for k in range(1, h.size + 1))
    beta = cands[tau - 1]
    dim = min(cands)
    if beta > dim + 1e-12 * max(1.0, abs(dim)):
        raise AssertionError(f"minimum over k is {dim}, not attained at tau={tau} ({beta})")
    alpha = float(np.sum(1.0 / h[:tau]) - d)
    nu = float(d / np.sum(1.0 / h))
    return ExponentProfile(tau, beta, alpha, nu, dim, float(d), cands)


def remark_weights(H) -> np.ndarray:
    """``p_l = sum_i H_l / H_i`` over all axes (sorted order); their reciprocals sum to 1."""
    h = _sorted_h(H)
    return np.array([np.sum(hl / h) for hl in h])


# --- gauge functions -------------------------------------------------------

GAUGE_KINDS = ("phi1", "lil_g")


def _gauge_exponents(kind: str, params) -> tuple:
    if kind == "phi1":
        beta, n = params
        return float(beta), float(n - beta)
    if kind == "lil_g":
        h1, n, d = params
        return float(n - h1 * d), float(h1 * d)
    raise DomainError(f"unknown gauge kind {kind!r}")


def gauge_r_max(kind: str, params) -> float:
    """Largest radius where ``log log 1/r >= 1`` and the gauge is increasing.

    ``r^a (log log 1/r)^b`` increases iff ``a L log L >= b`` with ``L = log 1/r``.
    """
    a, b = _gauge_exponents(kind, params)
    L_min = math.e
    if b > 0:
        if a <= 0:
            raise DomainError("gauge is nowhere increasing")
        f = lambda L: a * L * math.log(L) - b
        if f(L_min) < 0:
            hi = L_min * 2
            while f(hi) < 0:
                hi *= 2
            L_min = optimize.brentq(f, L_min, hi, xtol=1e-14)
    return math.exp(-L_min)


def gauge(kind: str, params, r):
    """``phi1(r) = r^beta (log log 1/r)^(N - beta)`` or ``g(r) = r^(N - H1 d) (log log 1/r)^(H1 d)``.

    ``params`` is ``(beta, N)`` for ``phi1`` and ``(H1, N, d)`` for ``lil_g``.
    """
    a, b = _gauge_exponents(kind, params)
    r_arr = np.asarray(r, dtype=float)
    r_max = gauge_r_max(kind, params)
    if np.any(r_arr <= 0) or np.any(r_arr > r_max):
        raise DomainError(f"gauge argument must lie in (0, {r_max:.6g}]")
    out = r_arr**a * np.log(np.log(1.0 / r_arr)) ** b
    return float(out) if out.ndim == 0 else out


# --- ordered-simplex integral -------------------------------------------------


@dataclass(frozen=True)
class DirichletResult:
    lhs: float
    lhs_error: float
    rhs_exact: float
    rhs_error: float
    rhs_bound: float
    method: str


def _simplex_lhs_quad(n, a, r, s0, alpha):
    b = a + r
    if n == 1:
        val, err = integrate.quad(lambda s: (s - s0) ** -alpha, a, b, epsabs=0, epsrel=1e-12)
        return val, err

    def inner(s1):
        if s1 >= b:
            return 0.0
        # the factor (s2 - s1)^-alpha is carried by the QAWS weight
        v, _ = integrate.quad(lambda s2: 1.0, s1, b, weight="alg", wvar=(-alpha, 0.0), epsabs=0, epsrel=1e-12)
        return (s1 - s0) ** -alpha * v

    return integrate.quad(inner, a, b, epsabs=0, epsrel=1e-11, limit=200)


def _simplex_lhs_mc(n, a, r, s0, alpha, samples, seed):
    rng = np.random.default_rng(seed)
    s = np.sort(rng.uniform(a, a + r, size=(samples, n)), axis=1)
    prev = np.concatenate([np.full((samples, 1), s0), s[:, :-1]], axis=1)
    vals = np.prod((s - prev) ** -alpha, axis=1)
    vol = r**n / math.factorial(n)
    return vol * vals.mean(), vol * vals.std(ddof=1) / math.sqrt(samples)


def dirichlet_rhs_exact(n, a, r, s0, alpha):
    """Closed Gamma-function reduction with the last one-dimensional integral done numerically."""
    const = (
        special.gamma(2 - alpha)
        * special.gamma(1 - alpha) ** (n - 2)
        / special.gamma(1 + (n - 1) * (1 - alpha))
        / (1 - alpha)
    )
    expo = (n - 1) * (1 - alpha)
    # weight (b - s)^expo handled exactly by QAWS
    val, err = integrate.quad(
        lambda s: (s - s0) ** -alpha, a, a + r, weight="alg", wvar=(0.0, expo), epsabs=0, epsrel=1e-12
    )
    return const * val, const * err


def simplex_bound_shape(n, r, alpha):
    """``(n!)^(alpha-1) r^(n (1 - (1 - 1/n) alpha))``, the bound without its constant."""
    return math.factorial(n) ** (alpha - 1) * r ** (n * (1 - (1 - 1 / n) * alpha))


def dirichlet_integral(n: int, a: float, r: float, s0: float, alpha: float, c: float | None = None,
                       samples: int = 200_000, seed: int = 0) -> DirichletResult:
    """Ordered-simplex integral of ``prod_j (s_j - s_{j-1})^(-alpha)`` on ``[a, a + r]``.

    ``lhs`` is by nested adaptive quadrature for ``n <= 2`` and by sorted
    uniform Monte Carlo for ``n`` in {3, 4}.  ``rhs_bound`` uses the constant
    ``c`` (see :func:`calibrate_simplex_constant`); it is ``nan`` when ``c`` is
    not given.
    """
    if not 0 < alpha < 1:
        raise DomainError("alpha must lie in (0, 1)")
    if not 1 <= n <= 4:
        raise DomainError("n must be between 1 and 4")
    if r <= 0 or a <= 0 or not 0 <= s0 <= a / 2:
        raise DomainError("need a, r > 0 and s0 in [0, a/2]")
    if n <= 2:
        lhs, lhs_err = _simplex_lhs_quad(n, a, r, s0, alpha)
        method = "quadrature"
    else:
        lhs, lhs_err = _simplex_lhs_mc(n, a, r, s0, alpha, samples, seed)
        method = "monte-carlo"
    rhs, rhs_err = dirichlet_rhs_exact(n, a, r, s0, alpha)
    bound = float("nan") if c is None else c**n * simplex_bound_shape(n, r, alpha)
    return DirichletResult(lhs, lhs_err, rhs, rhs_err, bound, method)


def calibrate_simplex_constant(inputs: Sequence[tuple]) -> float:
    """Smallest ``c`` with ``exact <= c^n * shape`` on the calibration inputs.

    ``inputs`` are ``(n, a, r, s0, alpha)`` tuples; the exact Gamma reduction
    is used as the integral value.
    """
    best = 0.0
    for n, a, r, s0, alpha in inputs:
        exact, _ = dirichlet_rhs_exact(n, a, r, s0, alpha)
        best = max(best, (exact / simplex_bound_shape(n, r, alpha)) ** (1.0 / n))
    return best
