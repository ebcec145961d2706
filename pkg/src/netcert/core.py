"""Shared domain types: boxes, safety specs, certificate templates, supply rates.

Everything here is immutable after construction and safe to use from
concurrent workers.  Certificate templates are restricted to monomial
bases, which keeps every downstream optimization linear in the
coefficients.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable, Optional

import numpy as np

SYMMETRY_TOL = 1e-12


class DimensionError(ValueError):
    """An input vector or matrix has the wrong shape for the operation."""


class InvariantError(ValueError):
    """A domain type was constructed with inconsistent field values."""


def _frozen_array(values, dtype=float, ndim=None) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    if ndim is not None and arr.ndim != ndim:
        raise DimensionError(f"expected a {ndim}-d array, got shape {arr.shape}")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class IntervalBox:
    """Axis-aligned box  {v : lower <= v <= upper}  in R^dim."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lower", _frozen_array(self.lower, ndim=1))
        object.__setattr__(self, "upper", _frozen_array(self.upper, ndim=1))
        if self.lower.size < 1:
            raise InvariantError("box dimension must be >= 1")
        if self.lower.shape != self.upper.shape:
            raise InvariantError("lower/upper dimension mismatch")
        if not np.all(np.isfinite(self.lower)) or not np.all(np.isfinite(self.upper)):
            raise InvariantError("box bounds must be finite")
        if np.any(self.lower > self.upper):
            raise InvariantError("lower[k] <= upper[k] must hold for every coordinate")

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def widths(self) -> np.ndarray:
        return self.upper - self.lower

    @property
    def midpoint(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    def contains(self, points: np.ndarray, atol: float = 0.0) -> np.ndarray:
        """Boolean membership per row of ``points`` (shape (N, dim) or (dim,))."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[1] != self.dim:
            raise DimensionError(f"points have dimension {pts.shape[1]}, box has {self.dim}")
        ok = np.all(pts >= self.lower - atol, axis=1) & np.all(pts <= self.upper + atol, axis=1)
        return ok if np.asarray(points).ndim > 1 else bool(ok[0])

    def clamp(self, points: np.ndarray) -> np.ndarray:
        return np.clip(points, self.lower, self.upper)

    def overlaps(self, other: "IntervalBox") -> bool:
        """True iff the two boxes intersect (coordinate-wise interval overlap)."""
        if other.dim != self.dim:
            raise DimensionError("boxes of different dimension cannot overlap")
        return bool(np.all(self.lower <= other.upper) and np.all(other.lower <= self.upper))

    def concat(self, other: "IntervalBox") -> "IntervalBox":
        """The product box, used for joint (state, input) domains."""
        return IntervalBox(
            np.concatenate([self.lower, other.lower]),
            np.concatenate([self.upper, other.upper]),
        )


@dataclass(frozen=True)
class SafetySpec:
    """Initial and unsafe regions of a subsystem.  They must not intersect:
    an initial state inside the unsafe region makes the question vacuous."""

    initial: IntervalBox
    unsafe: IntervalBox

    def __post_init__(self):
        if self.initial.dim != self.unsafe.dim:
            raise InvariantError("initial/unsafe boxes must share a dimension")
        if self.initial.overlaps(self.unsafe):
            raise InvariantError("initial and unsafe boxes must be disjoint")


@dataclass(frozen=True)
class StcTemplate:
    """Monomial basis for a candidate storage certificate.

    ``exponents`` has one row per basis term; row j holds the non-negative
    integer exponent of each state coordinate in term j.  The certificate is
    linear in its coefficient vector for any fixed state.
    """

    state_dim: int
    exponents: np.ndarray

    def __post_init__(self):
        exps = np.array(self.exponents, dtype=int)
        if exps.ndim != 2:
            raise InvariantError("exponents must be a 2-d integer array (terms x state_dim)")
        if exps.shape[0] < 1:
            raise InvariantError("template needs at least one term")
        if exps.shape[1] != self.state_dim:
            raise InvariantError(
                f"every exponent vector must have length {self.state_dim}, got {exps.shape[1]}"
            )
        if np.any(exps < 0):
            raise InvariantError("exponents must be non-negative")
        exps.flags.writeable = False
        object.__setattr__(self, "exponents", exps)

    @property
    def term_count(self) -> int:
        return self.exponents.shape[0]

    def basis_values(self, points: np.ndarray) -> np.ndarray:
        """Evaluate all basis monomials at each row of ``points``.

        Returns an (N, term_count) matrix; column j is the j-th monomial.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[1] != self.state_dim:
            raise DimensionError(
                f"points have dimension {pts.shape[1]}, template expects {self.state_dim}"
            )
        # pts[:, None, :] ** exponents -> (N, terms, dim); product over dim
        return np.prod(pts[:, None, :] ** self.exponents[None, :, :], axis=2)


@dataclass(frozen=True)
class CoefficientVector:
    """Coefficients pairing with a template's basis terms."""

    coeffs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coeffs", _frozen_array(self.coeffs, ndim=1))

    def __len__(self) -> int:
        return self.coeffs.size


def eval_template(
    template: StcTemplate, coeffs: CoefficientVector, x: np.ndarray
) -> float:
    """Value of the certificate sum_j coeffs[j] * prod_k x[k]**e[j,k]."""
    xv = np.asarray(x, dtype=float).reshape(-1)
    if xv.size != template.state_dim:
        raise DimensionError(f"state has dimension {xv.size}, expected {template.state_dim}")
    if len(coeffs) != template.term_count:
        raise DimensionError(
            f"coefficient vector has length {len(coeffs)}, template has {template.term_count} terms"
        )
    return float(template.basis_values(xv[None, :])[0] @ coeffs.coeffs)


def eval_template_batch(
    template: StcTemplate, coeffs: CoefficientVector, points: np.ndarray
) -> np.ndarray:
    """Vectorized ``eval_template`` over rows of ``points``."""
    if len(coeffs) != template.term_count:
        raise DimensionError(
            f"coefficient vector has length {len(coeffs)}, template has {template.term_count} terms"
        )
    return template.basis_values(points) @ coeffs.coeffs


def _check_symmetric(name: str, m: np.ndarray):
    if m.shape[0] != m.shape[1]:
        raise InvariantError(f"{name} must be square")
    if m.size and np.max(np.abs(m - m.T)) > SYMMETRY_TOL:
        raise InvariantError(f"{name} must be symmetric within {SYMMETRY_TOL}")


@dataclass(frozen=True)
class SupplyRate:
    """Quadratic form  [d; x]^T [[s11, s12], [s12^T, s22]] [d; x].

    Only the three independent blocks are stored; the lower-left block is
    always the transpose of ``s12``.
    """

    s11: np.ndarray
    s12: np.ndarray
    s22: np.ndarray

    def __post_init__(self):
        s11 = _frozen_array(np.atleast_2d(self.s11))
        s12 = _frozen_array(np.atleast_2d(self.s12))
        s22 = _frozen_array(np.atleast_2d(self.s22))
        _check_symmetric("s11", s11)
        _check_symmetric("s22", s22)
        if s12.shape != (s11.shape[0], s22.shape[0]):
            raise InvariantError(
                f"s12 must be {s11.shape[0]}x{s22.shape[0]}, got {s12.shape}"
            )
        object.__setattr__(self, "s11", s11)
        object.__setattr__(self, "s12", s12)
        object.__setattr__(self, "s22", s22)

    @property
    def input_dim(self) -> int:
        return self.s11.shape[0]

    @property
    def state_dim(self) -> int:
        return self.s22.shape[0]

    def block_matrix(self) -> np.ndarray:
        top = np.hstack([self.s11, self.s12])
        bottom = np.hstack([self.s12.T, self.s22])
        return np.vstack([top, bottom])

    @staticmethod
    def zero(input_dim: int, state_dim: int) -> "SupplyRate":
        return SupplyRate(
            np.zeros((input_dim, input_dim)),
            np.zeros((input_dim, state_dim)),
            np.zeros((state_dim, state_dim)),
        )


def eval_supply(rate: SupplyRate, d: np.ndarray, x: np.ndarray) -> float:
    """d^T s11 d + 2 d^T s12 x + x^T s22 x."""
    dv = np.asarray(d, dtype=float).reshape(-1)
    xv = np.asarray(x, dtype=float).reshape(-1)
    if dv.size != rate.input_dim:
        raise DimensionError(f"input has dimension {dv.size}, expected {rate.input_dim}")
    if xv.size != rate.state_dim:
        raise DimensionError(f"state has dimension {xv.size}, expected {rate.state_dim}")
    return float(dv @ rate.s11 @ dv + 2.0 * (dv @ rate.s12 @ xv) + xv @ rate.s22 @ xv)


def eval_supply_batch(rate: SupplyRate, d: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Vectorized ``eval_supply`` over matching rows of ``d`` and ``x``."""
    dm = np.atleast_2d(np.asarray(d, dtype=float))
    xm = np.atleast_2d(np.asarray(x, dtype=float))
    if dm.shape[1] != rate.input_dim or xm.shape[1] != rate.state_dim:
        raise DimensionError("batch dimensions do not match the supply rate blocks")
    quad_d = np.einsum("ni,ij,nj->n", dm, rate.s11, dm)
    cross = 2.0 * np.einsum("ni,ij,nj->n", dm, rate.s12, xm)
    quad_x = np.einsum("ni,ij,nj->n", xm, rate.s22, xm)
    return quad_d + cross + quad_x


# A transition oracle maps (state, input) -> next state.  The pipeline only
# ever calls it pointwise and treats it as an opaque black box; concrete
# benchmark oracles live in netcert.blackbox.
OracleFn = Callable[[np.ndarray, np.ndarray], np.ndarray]

if TYPE_CHECKING:  # pragma: no cover
    from .blackbox import TransitionOracle


@dataclass(frozen=True)
class SubsystemClass:
    """One class of identical subsystems: domain boxes, safety spec,
    certificate template, and the black-box transition handle."""

    id: str
    state_dim: int
    input_dim: int
    state_box: IntervalBox
    input_box: IntervalBox
    safety: SafetySpec
    template: StcTemplate
    oracle: Optional["TransitionOracle"] = None

    def __post_init__(self):
        if self.state_box.dim != self.state_dim:
            raise InvariantError("state box dimension mismatch")
        if self.input_box.dim != self.input_dim:
            raise InvariantError("input box dimension mismatch")
        if self.safety.initial.dim != self.state_dim:
            raise InvariantError("safety spec dimension mismatch")
        if self.template.state_dim != self.state_dim:
            raise InvariantError("template dimension mismatch")
        for name, box in (("initial", self.safety.initial), ("unsafe", self.safety.unsafe)):
            inside = np.all(box.lower >= self.state_box.lower - 1e-12) and np.all(
                box.upper <= self.state_box.upper + 1e-12
            )
            if not inside:
                raise InvariantError(f"{name} box must be contained in the state box")

    @property
    def joint_box(self) -> IntervalBox:
        """The (state, input) product domain the certificate is trained on."""
        return self.state_box.concat(self.input_box)
