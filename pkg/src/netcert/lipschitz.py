"""Lipschitz constant estimation from finite slope samples.

Batches of difference quotients are drawn over a box; each batch maximum is
one observation of the slope extreme, and a three-parameter reverse Weibull
distribution fitted to those maxima has a finite upper endpoint (its
location parameter) that estimates the true constant.  Estimates converge
to the exact constant only in the limit of vanishing pair distance and
unbounded batch counts, so any finite configuration can undershoot; callers
record the configuration alongside the estimate to keep that auditable.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.optimize import minimize
from scipy.stats import weibull_max

from .core import (
    IntervalBox,
    InvariantError,
    SubsystemClass,
    eval_template_batch,
)
from .scp import ScpSolution

# target(points) -> values for a batch of points, one row per point
BatchTarget = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class LipschitzConfig:
    """gamma: pair-distance cap; inner_count/outer_count: slopes per batch
    and number of batches; seed: drives pseudo-random pair placement."""

    gamma: float
    inner_count: int
    outer_count: int
    seed: int = 0

    def __post_init__(self):
        if not self.gamma > 0:
            raise InvariantError("gamma must be positive")
        if self.inner_count < 2 or self.outer_count < 2:
            raise InvariantError("inner_count and outer_count must be >= 2 for a usable fit")


@dataclass(frozen=True)
class LipschitzEstimate:
    value: float
    max_slope_samples: tuple[float, ...]
    fit: Optional[tuple[float, float, float]]  # (location, scale, shape)
    fallback_used: bool

    def __post_init__(self):
        if self.max_slope_samples and self.value < max(self.max_slope_samples) - 1e-9:
            raise InvariantError("estimate must dominate every observed batch maximum")


def _draw_pairs(
    box: IntervalBox, count: int, gamma: float, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Base points uniform in the box; partners at distance <= gamma, clipped
    back into the box (clipping is a projection, so the cap survives it).
    Partners that collapse onto their base are redrawn."""
    dim = box.dim
    base = rng.uniform(box.lower, box.upper, size=(count, dim))
    partners = np.empty_like(base)
    pending = np.arange(count)
    for _ in range(100):
        k = pending.size
        if k == 0:
            break
        direction = rng.normal(size=(k, dim))
        norms = np.linalg.norm(direction, axis=1, keepdims=True)
        norms[norms == 0] = 1.0
        radius = rng.uniform(0.0, gamma, size=(k, 1))
        candidate = box.clamp(base[pending] + direction / norms * radius)
        partners[pending] = candidate
        dist = np.linalg.norm(candidate - base[pending], axis=1)
        pending = pending[dist <= 1e-300]
    if pending.size:
        raise InvariantError("could not place distinct partner points; box may be degenerate")
    return base, partners


def slope_batch(
    target: BatchTarget, box: IntervalBox, config: LipschitzConfig, rng: np.random.Generator
) -> np.ndarray:
    """One batch of |target(p) - target(p_hat)| / ||p - p_hat|| quotients."""
    if np.all(box.widths == 0):
        raise InvariantError("slope sampling needs a box with positive volume")
    base, partners = _draw_pairs(box, config.inner_count, config.gamma, rng)
    fb = np.asarray(target(base), float).reshape(-1)
    fp = np.asarray(target(partners), float).reshape(-1)
    dist = np.linalg.norm(base - partners, axis=1)
    return np.abs(fb - fp) / dist


def _fit_reverse_weibull(maxima: np.ndarray) -> Optional[tuple[float, float, float]]:
    """Maximum-likelihood (location, scale, shape) with the location bounded
    below by the sample maximum, so the fitted endpoint dominates the data.
    Returns None when the optimization fails."""
    top = float(np.max(maxima))
    span = float(np.max(maxima) - np.min(maxima))
    spacing = span / maxima.size
    scale0 = max(float(np.std(maxima)), 1e-12)

    def nll(params: np.ndarray) -> float:
        loc, scale, shape = params
        with np.errstate(all="ignore"):
            ll = weibull_max.logpdf(maxima, shape, loc=loc, scale=scale)
        if not np.all(np.isfinite(ll)):
            return 1e30
        return -float(np.sum(ll))

    best = None
    with np.errstate(all="ignore"):  # the penalty wall makes numdiff noisy
        for shape0 in (0.8, 1.5, 3.0):
            res = minimize(
                nll,
                x0=np.array([top + spacing, scale0, shape0]),
                method="L-BFGS-B",
                bounds=[
                    (top + 1e-12 + 1e-9 * max(1.0, abs(top)), top + 10.0 * max(span, scale0)),
                    (1e-12, 100.0 * max(span, scale0)),
                    (0.05, 50.0),
                ],
            )
            if res.success and np.isfinite(res.fun):
                if best is None or res.fun < best.fun:
                    best = res
    if best is None:
        return None
    loc, scale, shape = (float(v) for v in best.x)
    return loc, scale, shape


def estimate_lipschitz(
    target: BatchTarget, box: IntervalBox, config: LipschitzConfig
) -> LipschitzEstimate:
    """Run the batched slope maxima and extract the fitted upper endpoint.

    Degenerate maxima (zero variance, e.g. affine targets) and failed fits
    fall back to the plain maximum, which is still a valid lower estimate.
    """
    rng = np.random.default_rng(config.seed)
    maxima = np.array(
        [float(np.max(slope_batch(target, box, config, rng))) for _ in range(config.outer_count)]
    )
    if float(np.var(maxima)) < 1e-12:
        return LipschitzEstimate(
            value=float(np.max(maxima)),
            max_slope_samples=tuple(maxima),
            fit=None,
            fallback_used=True,
        )
    fit = _fit_reverse_weibull(maxima)
    if fit is None or not np.isfinite(fit[0]) or fit[0] < np.max(maxima):
        return LipschitzEstimate(
            value=float(np.max(maxima)),
            max_slope_samples=tuple(maxima),
            fit=None,
            fallback_used=True,
        )
    return LipschitzEstimate(
        value=float(fit[0]),
        max_slope_samples=tuple(maxima),
        fit=fit,
        fallback_used=False,
    )


def certificate_target(cls: SubsystemClass, solution: ScpSolution) -> BatchTarget:
    """x -> B*(x) over the state box."""

    def target(points: np.ndarray) -> np.ndarray:
        return eval_template_batch(cls.template, solution.coeffs, points)

    return target


def decrease_target(cls: SubsystemClass, solution: ScpSolution) -> BatchTarget:
    """(x, d) -> B*(f(x, d)) - B*(x) over the joint box."""
    if cls.oracle is None:
        raise InvariantError(f"class {cls.id!r} has no oracle for the decrease map")
    n = cls.state_dim

    def target(points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(points)
        x, d = pts[:, :n], pts[:, n:]
        fx = cls.oracle.batch(x, d)
        return eval_template_batch(cls.template, solution.coeffs, fx) - eval_template_batch(
            cls.template, solution.coeffs, x
        )

    return target


def estimate_for_class(
    cls: SubsystemClass, solution: ScpSolution, config: LipschitzConfig
) -> tuple[LipschitzEstimate, LipschitzEstimate]:
    """(L1, L2): slopes of the certificate over X and of the one-step
    decrease map over X x D."""
    if solution.status != "optimal":
        raise InvariantError("Lipschitz estimation needs an optimal certificate solution")
    l1 = estimate_lipschitz(certificate_target(cls, solution), cls.state_box, config)
    l2 = estimate_lipschitz(decrease_target(cls, solution), cls.joint_box, config)
    return l1, l2


def estimate_from_pairs(
    joint_points: np.ndarray,
    values: np.ndarray,
    config: LipschitzConfig,
) -> LipschitzEstimate:
    """Slope maxima from recorded evaluations only (no oracle): every pair of
    recorded points within ``gamma`` of each other contributes a quotient.

    Used for classes whose transitions come from a data file, where the
    decrease map can only be evaluated at the recorded points.
    """
    pts = np.atleast_2d(np.asarray(joint_points, float))
    vals = np.asarray(values, float).reshape(-1)
    if pts.shape[0] != vals.size:
        raise InvariantError("points/values length mismatch")
    rng = np.random.default_rng(config.seed)
    from scipy.spatial import cKDTree

    tree = cKDTree(pts)
    pairs = tree.query_pairs(config.gamma, output_type="ndarray")
    if pairs.shape[0] < config.outer_count:
        raise InvariantError(
            "too few recorded pairs within gamma of each other; increase gamma"
        )
    dist = np.linalg.norm(pts[pairs[:, 0]] - pts[pairs[:, 1]], axis=1)
    keep = dist > 0
    slopes = np.abs(vals[pairs[keep, 0]] - vals[pairs[keep, 1]]) / dist[keep]
    slopes = slopes[rng.permutation(slopes.size)]
    batches = np.array_split(slopes, config.outer_count)
    maxima = np.array([float(np.max(b)) for b in batches if b.size])
    if float(np.var(maxima)) < 1e-12:
        return LipschitzEstimate(float(np.max(maxima)), tuple(maxima), None, True)
    fit = _fit_reverse_weibull(maxima)
    if fit is None or fit[0] < np.max(maxima):
        return LipschitzEstimate(float(np.max(maxima)), tuple(maxima), None, True)
    return LipschitzEstimate(float(fit[0]), tuple(maxima), fit, False)
