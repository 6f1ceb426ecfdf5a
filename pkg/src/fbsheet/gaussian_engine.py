"""Finite-dimensional Gaussian machinery for the sheet and its components.

Covariance assembly, exact sampling on tensor grids (the sheet covariance is a
product over axes, so its Cholesky factor is the Kronecker product of the
per-axis factors), Schur-complement conditional variances and the numerical
verification of the variance comparison inequalities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import field_model as fm
from .errors import DegenerateInputError, DomainError, NumericalError
from .report import CheckResult
from .rng import SeedSpec, normals

MODEL_KINDS = ("fbs", "liouville", "corner", "slab", "remainder")

JITTER_START = 1e-12
JITTER_MAX = 1e-8
JITTER_STEP = 100.0


@dataclass(frozen=True)
class CovModel:
    """Which covariance kernel to use.

    ``fbs`` is the fractional Brownian sheet itself, ``liouville`` its
    Liouville part, and ``corner`` / ``slab`` / ``remainder`` the independent
    pieces of the Liouville sheet cut at ``epsilon`` (``axis`` is 0-based).
    """

    kind: str = "fbs"
    epsilon: float = 0.0
    axis: int | None = None
    tol: float = fm.DEFAULT_TOL

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise DomainError(f"unknown covariance model {self.kind!r}")

    def region(self) -> fm.RegionComponent:
        kind = "full" if self.kind == "liouville" else self.kind
        return fm.RegionComponent(kind, self.epsilon, self.axis)


FBS = CovModel("fbs")
LIOUVILLE = CovModel("liouville")


def slab_model(axis: int, eps: float, tol: float = fm.DEFAULT_TOL) -> CovModel:
    return CovModel("slab", eps, axis, tol)


def assemble_cov(points, model: CovModel, H) -> np.ndarray:
    """Covariance matrix of the model at ``points`` (shape ``(n, N)``)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if model.kind == "fbs":
        return fm.fbs_cov(pts[:, None, :], pts[None, :, :], H)
    n = pts.shape[0]
    region = model.region()
    out = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            out[i, j] = out[j, i] = fm.component_cov(region, pts[i], pts[j], H, model.tol)
    return out


def cholesky_jittered(C: np.ndarray):
    """Cholesky factor of ``C``; on failure add relative diagonal jitter.

    Jitter starts at 1e-12 of the mean diagonal and grows by 100 up to 1e-8.
    Returns ``(L, jitter)`` with the relative jitter actually used.
    """
    C = np.asarray(C, dtype=float)
    try:
        return np.linalg.cholesky(C), 0.0
    except np.linalg.LinAlgError:
        pass
    scale = float(np.mean(np.diag(C))) or 1.0
    jitter = JITTER_START
    while jitter <= JITTER_MAX * (1 + 1e-9):
        try:
            return np.linalg.cholesky(C + jitter * scale * np.eye(C.shape[0])), jitter
        except np.linalg.LinAlgError:
            jitter *= JITTER_STEP
    raise NumericalError("covariance not positive definite after maximal jitter", achieved=JITTER_MAX)


@dataclass(frozen=True)
class Grid:
    """Tensor-product grid; ``per_axis[l]`` holds strictly increasing positive coordinates."""

    per_axis: tuple

    def __post_init__(self):
        axes = tuple(np.asarray(a, dtype=float).copy() for a in self.per_axis)
        for l, a in enumerate(axes):
            if a.ndim != 1 or a.size == 0:
                raise DomainError(f"axis {l} coordinates must be a nonempty vector")
            if np.any(a <= 0):
                raise DomainError(f"axis {l} coordinates must be positive")
            if np.any(np.diff(a) <= 0):
                raise DomainError(f"axis {l} coordinates must be strictly increasing")
            a.setflags(write=False)
        object.__setattr__(self, "per_axis", axes)

    @classmethod
    def uniform(cls, lower, upper, cells) -> "Grid":
        """Cell-midpoint grid on the box ``[lower, upper]`` with ``cells`` cells per axis."""
        cells = np.broadcast_to(cells, np.shape(lower))
        axes = []
        for lo, hi, m in zip(lower, upper, cells):
            step = (hi - lo) / m
            axes.append(lo + step * (np.arange(m) + 0.5))
        return cls(tuple(axes))

    @classmethod
    def vertices(cls, lower, upper, cells) -> "Grid":
        """Grid of cell corners: ``cells + 1`` equally spaced coordinates per axis, ends included."""
        cells = np.broadcast_to(cells, np.shape(lower))
        return cls(tuple(np.linspace(lo, hi, m + 1) for lo, hi, m in zip(lower, upper, cells)))

    @property
    def n_axes(self) -> int:
        return len(self.per_axis)

    @property
    def shape(self) -> tuple:
        return tuple(a.size for a in self.per_axis)

    @property
    def size(self) -> int:
        return math.prod(self.shape)

    def points(self) -> np.ndarray:
        mesh = np.meshgrid(*self.per_axis, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)


@dataclass
class FieldSample:
    """Sampled values ``values[i_1, ..., i_N, k]`` of channel ``k`` on ``grid``."""

    grid: Grid
    values: np.ndarray
    hurst: fm.HurstVector
    seed: SeedSpec | None = None

    @property
    def d(self) -> int:
        return self.values.shape[-1]


def kron_factors(grid: Grid, H) -> list:
    """Per-axis Cholesky factors of the one-dimensional fBm covariances."""
    h = fm._hurst_array(H)
    if h.size != grid.n_axes:
        raise DomainError("Hurst vector and grid differ in dimension")
    factors = []
    for hl, coords in zip(h, grid.per_axis):
        c = coords[:, None]
        C = 0.5 * (c ** (2 * hl) + c.T ** (2 * hl) - np.abs(c - c.T) ** (2 * hl))
        factors.append(cholesky_jittered(C)[0])
    return factors


def apply_kron(factors: Sequence[np.ndarray], Z: np.ndarray) -> np.ndarray:
    """Multiply ``Z`` (leading axes = grid axes) by the Kronecker product of ``factors``."""
    X = Z
    for axis, L in enumerate(factors):
        X = np.moveaxis(np.tensordot(L, X, axes=(1, axis)), 0, axis)
    return X


def _deviates(grid: Grid, d: int, seed: SeedSpec) -> np.ndarray:
    Z = np.empty(grid.shape + (d,))
    for k in range(d):
        Z[..., k] = normals(seed, grid.size, channel=k).reshape(grid.shape)
    return Z


def sample_field(grid: Grid, H, d: int, seed: SeedSpec, factors=None) -> FieldSample:
    """Exact sample of the (N, d) sheet on a tensor grid.

    Channel ``k`` uses its own counter-based stream, so the d coordinate fields
    are independent copies.  Pass precomputed ``factors`` to amortise the
    per-axis Cholesky work across replicas.
    """
    hv = H if isinstance(H, fm.HurstVector) else fm.validate_hurst(H, d)
    if factors is None:
        factors = kron_factors(grid, hv)
    Z = _deviates(grid, d, seed)
    return FieldSample(grid, apply_kron(factors, Z), hv, seed)


def sample_field_dense(grid: Grid, H, d: int, seed: SeedSpec) -> FieldSample:
    """Same deviates as :func:`sample_field` but through one dense Cholesky factor."""
    hv = H if isinstance(H, fm.HurstVector) else fm.validate_hurst(H, d)
    C = assemble_cov(grid.points(), FBS, hv)
    L = cholesky_jittered(C)[0]
    Z = _deviates(grid, d, seed).reshape(grid.size, d)
    return FieldSample(grid, (L @ Z).reshape(grid.shape + (d,)), hv, seed)


def sample_points(points, H, d: int, seed: SeedSpec) -> np.ndarray:
    """Exact sample at an arbitrary point set (dense Cholesky); shape ``(n, d)``."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    L = cholesky_jittered(assemble_cov(pts, FBS, H))[0]
    Z = np.stack([normals(seed, len(pts), channel=k) for k in range(d)], axis=-1)
    return L @ Z


def _schur(C: np.ndarray, target: int) -> float:
    others = [i for i in range(C.shape[0]) if i != target]
    var = C[target, target]
    if not others:
        return float(var)
    Coo = C[np.ix_(others, others)]
    cto = C[target, others]
    L, _ = cholesky_jittered(Coo)
    w = np.linalg.solve(L, cto)
    return float(var - w @ w)


def conditional_variance(target_index: int, points, model: CovModel, H) -> float:
    """``Var(Z_target | Z_j, j != target)`` by the Schur complement; clamped at 0."""
    C = assemble_cov(points, model, H)
    v = _schur(C, target_index)
    scale = max(float(np.max(np.diag(C))), 1e-300)
    if v < -1e-10 * scale:
        raise NumericalError(f"negative conditional variance {v}", achieved=v)
    return max(v, 0.0)


def check_axis_distinct(points) -> None:
    """Raise unless every axis has pairwise distinct coordinates."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    for l in range(pts.shape[1]):
        col = np.sort(pts[:, l])
        if np.any(np.diff(col) == 0):
            raise DegenerateInputError(f"repeated coordinate on axis {l}")


def det_dual(C: np.ndarray):
    """Determinant two ways: Cholesky diagonal, and sequential conditional variances.

    The second route solves each leading block with an LU solve, so the two
    numbers share no factorisation.
    """
    C = np.asarray(C, dtype=float)
    try:
        L = np.linalg.cholesky(C)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("covariance is not positive definite") from exc
    det_chol = float(np.prod(np.diag(L)) ** 2)
    det_seq = float(C[0, 0])
    for j in range(1, C.shape[0]):
        block = C[:j, :j]
        c = C[:j, j]
        det_seq *= float(C[j, j] - c @ np.linalg.solve(block, c))
    if not (det_chol > 0 and det_seq > 0):
        raise NumericalError("covariance is numerically singular", achieved=min(det_chol, det_seq))
    return det_chol, det_seq


def det_cov_dual(points, model: CovModel, H):
    check_axis_distinct(points)
    return det_dual(assemble_cov(points, model, H))


def sectorial_ratio(points, H):
    """Conditional variance of the last point vs. the sectorial sum.

    The sum is over axes of the minimal ``|t_l^n - t_l^j|^(2 H_l)`` with the
    origin included as ``t^0``.  Returns ``(lhs, rhs, lhs / rhs)``.
    """
    h = fm._hurst_array(H)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    last = pts[-1]
    earlier = np.vstack([np.zeros(h.size), pts[:-1]])
    gaps = np.abs(last[None, :] - earlier) ** (2 * h)
    rhs = float(np.sum(gaps.min(axis=0)))
    if rhs == 0.0:
        raise DegenerateInputError("last point duplicates an earlier one")
    lhs = conditional_variance(len(pts) - 1, pts, FBS, h)
    return lhs, rhs, lhs / rhs


def _slack_tol(lhs, rhs, quad_tol):
    return (1e-9 + 10 * quad_tol) * max(abs(lhs), abs(rhs), 1.0)


def variance_domination_check(points, weights, H, eps: float, tol: float = fm.DEFAULT_TOL):
    """Both comparison inequalities for one ``(points, weights)`` draw.

    Returns two :class:`CheckResult` objects: the sheet dominating its
    Liouville part (scaled by kappa^-2), and the sheet dominating the sum of
    the slab components.
    """
    h = fm._hurst_array(H)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    u = np.asarray(weights, dtype=float)
    if u.shape != (pts.shape[0],):
        raise DomainError("need one weight per point")
    k2 = fm.kappa(h, tol).value ** 2
    var_b = float(u @ assemble_cov(pts, FBS, h) @ u)
    var_x = float(u @ assemble_cov(pts, CovModel("liouville", tol=tol), h) @ u)
    var_y = sum(float(u @ assemble_cov(pts, slab_model(l, eps, tol), h) @ u) for l in range(h.size))
    inputs = {"points": pts.tolist(), "weights": u.tolist(), "H": h.tolist(), "eps": eps}
    out = []
    for check_id, ref, rhs in (
        ("liouville-domination", "sheet variance dominates kappa^-2 x Liouville variance", var_x / k2),
        ("slab-domination", "sheet variance dominates kappa^-2 x sum of slab variances", var_y / k2),
    ):
        slack = var_b - rhs
        out.append(CheckResult(check_id, ref, var_b, rhs, slack, slack >= -_slack_tol(var_b, rhs, tol), inputs=inputs))
    return out


def det_holder_check(points, H, p, eps: float, C: float | None = None, tol: float = fm.DEFAULT_TOL):
    """Determinant comparison between the sheet and the first ``k`` slab components.

    ``p`` holds the Hoelder exponents for the ``k`` smallest Hurst indices.
    The result reports ``c_min``, the smallest constant for which
    ``det(B)^(-1/2) <= prod_l C^n det(Y_l)^(-1/(2 p_l))`` holds here; a
    supplied ``C`` is compared against it.
    """
    h = fm._hurst_array(H)
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or not 1 <= p.size <= h.size:
        raise DomainError("need between 1 and N exponents p")
    if np.any(p < 1) or abs(np.sum(1.0 / p) - 1.0) > 1e-12:
        raise DomainError("exponents must satisfy p_l >= 1 and sum 1/p_l = 1")
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    check_axis_distinct(pts)
    n, k = pts.shape[0], p.size
    log_lhs = -0.5 * math.log(det_dual(assemble_cov(pts, FBS, h))[0])
    order = np.argsort(h, kind="stable")[:k]
    log_prod = 0.0
    for pl, axis in zip(p, order):
        det_y = np.linalg.det(assemble_cov(pts, slab_model(int(axis), eps, tol), h))
        if not det_y > 0:
            raise DegenerateInputError(f"slab component on axis {axis} has singular covariance")
        log_prod += -math.log(det_y) / (2 * pl)
    c_min = math.exp((log_lhs - log_prod) / (n * k))
    passed = True if C is None else C >= c_min * (1 - 1e-9)
    rhs = math.exp(log_prod + n * k * math.log(C if C is not None else c_min))
    return CheckResult(
        "det-holder",
        "inverse root determinant of the sheet bounded by slab determinants",
        math.exp(log_lhs),
        rhs,
        rhs - math.exp(log_lhs),
        passed,
        asserted=C is not None,
        inputs={"points": pts.tolist(), "H": h.tolist(), "p": p.tolist(), "eps": eps, "C": C},
        extra={"c_min": c_min},
    )
