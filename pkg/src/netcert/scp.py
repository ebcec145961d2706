"""Scenario program assembly and solution.

The sampled storage-certificate conditions form a linear program in the
decision vector (coefficients, level values, supply blocks, slack pair
(eta, beta)).  The constraint system is positively homogeneous, so every
decision variable except the slacks carries a box bound; without it any
strictly negative objective direction could be scaled without limit.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import linprog

from .core import (
    CoefficientVector,
    InvariantError,
    SubsystemClass,
    SupplyRate,
    eval_supply,
    eval_template,
)
from .sampling import CoverageError, SampleSet

ROW_GROUPS = ("initial", "unsafe", "decrease", "supply", "gap")


@dataclass(frozen=True)
class ScpOptions:
    """Normalization knobs for the scenario program.

    coeff_bound      box bound on every non-slack decision variable
    gap              enforced separation phi - sigma >= gap
    feasibility_tol  residual tolerance for declaring a solution valid
    """

    coeff_bound: float = 200.0
    gap: float = 1e-3
    feasibility_tol: float = 1e-8

    def __post_init__(self):
        if not (np.isfinite(self.coeff_bound) and self.coeff_bound > 0):
            raise InvariantError("coeff_bound must be finite and positive")
        if self.gap < 0:
            raise InvariantError("gap must be non-negative")
        if self.feasibility_tol <= 0:
            raise InvariantError("feasibility_tol must be positive")


@dataclass(frozen=True)
class VariableLayout:
    """Column indices of the decision vector.

    Order: certificate coefficients, sigma, phi, upper triangles of s11 and
    s22, full s12 (row-major), eta, beta.
    """

    term_count: int
    state_dim: int
    input_dim: int

    @property
    def theta(self) -> slice:
        return slice(0, self.term_count)

    @property
    def sigma(self) -> int:
        return self.term_count

    @property
    def phi(self) -> int:
        return self.term_count + 1

    @property
    def s11(self) -> slice:
        start = self.term_count + 2
        return slice(start, start + self._tri(self.input_dim))

    @property
    def s12(self) -> slice:
        start = self.s11.stop
        return slice(start, start + self.input_dim * self.state_dim)

    @property
    def s22(self) -> slice:
        start = self.s12.stop
        return slice(start, start + self._tri(self.state_dim))

    @property
    def eta(self) -> int:
        return self.s22.stop

    @property
    def beta(self) -> int:
        return self.s22.stop + 1

    @property
    def size(self) -> int:
        return self.beta + 1

    @staticmethod
    def _tri(n: int) -> int:
        return n * (n + 1) // 2

    @staticmethod
    def _tri_pairs(n: int) -> list[tuple[int, int]]:
        return [(i, j) for i in range(n) for j in range(i, n)]

    def supply_row(self, d: np.ndarray, x: np.ndarray) -> np.ndarray:
        """Coefficients of the supply value d'S11 d + 2 d'S12 x + x'S22 x as a
        linear function of the stored block entries."""
        row = np.zeros(self.size)
        cols = iter(range(self.s11.start, self.s11.stop))
        for i, j in self._tri_pairs(self.input_dim):
            row[next(cols)] = d[i] * d[j] if i == j else 2.0 * d[i] * d[j]
        cols = iter(range(self.s12.start, self.s12.stop))
        for i in range(self.input_dim):
            for j in range(self.state_dim):
                row[next(cols)] = 2.0 * d[i] * x[j]
        cols = iter(range(self.s22.start, self.s22.stop))
        for i, j in self._tri_pairs(self.state_dim):
            row[next(cols)] = x[i] * x[j] if i == j else 2.0 * x[i] * x[j]
        return row

    def unpack(self, v: np.ndarray) -> dict:
        p, n = self.input_dim, self.state_dim
        s11 = np.zeros((p, p))
        for (i, j), val in zip(self._tri_pairs(p), v[self.s11]):
            s11[i, j] = s11[j, i] = val
        s22 = np.zeros((n, n))
        for (i, j), val in zip(self._tri_pairs(n), v[self.s22]):
            s22[i, j] = s22[j, i] = val
        s12 = np.asarray(v[self.s12], float).reshape(p, n)
        return {
            "theta": np.asarray(v[self.theta], float),
            "sigma": float(v[self.sigma]),
            "phi": float(v[self.phi]),
            "supply": SupplyRate(s11, s12, s22),
            "eta": float(v[self.eta]),
            "beta": float(v[self.beta]),
        }


@dataclass
class LinearProgram:
    """min c'v  subject to  a_ub @ v <= b_ub  and per-variable bounds."""

    c: np.ndarray
    a_ub: np.ndarray
    b_ub: np.ndarray
    bounds: list[tuple[Optional[float], Optional[float]]]
    row_groups: list[str] = field(default_factory=list)
    var_names: list[str] = field(default_factory=list)
    layout: Optional[VariableLayout] = None


@dataclass
class LpResult:
    x: Optional[np.ndarray]
    objective: Optional[float]
    status: str  # optimal | infeasible | unbounded
    message: str = ""


def solve_lp(lp: LinearProgram) -> LpResult:
    """Deterministic solve (HiGHS); the fixed row order makes repeated runs
    bit-reproducible."""
    res = linprog(
        lp.c,
        A_ub=lp.a_ub if lp.a_ub.size else None,
        b_ub=lp.b_ub if lp.b_ub.size else None,
        bounds=lp.bounds,
        method="highs",
        options={
            # tighter than the downstream residual tolerance of 1e-8
            "primal_feasibility_tolerance": 1e-10,
            "dual_feasibility_tolerance": 1e-10,
        },
    )
    status = {0: "optimal", 2: "infeasible", 3: "unbounded"}.get(res.status, "failed")
    x = np.asarray(res.x, float) if res.x is not None else None
    fun = float(res.fun) if res.fun is not None else None
    return LpResult(x=x, objective=fun, status=status, message=str(res.message))


def most_violated_group(lp: LinearProgram) -> str:
    """Diagnose an infeasible program: minimize a single elastic slack added
    to every row and report the group of the rows that stay tight."""
    m, nv = lp.a_ub.shape
    a = np.hstack([lp.a_ub, -np.ones((m, 1))])
    c = np.zeros(nv + 1)
    c[-1] = 1.0
    res = linprog(c, A_ub=a, b_ub=lp.b_ub, bounds=lp.bounds + [(0, None)], method="highs")
    if res.x is None:
        return "unknown"
    residuals = lp.a_ub @ res.x[:-1] - lp.b_ub
    return lp.row_groups[int(np.argmax(residuals))]


@dataclass
class ScpSolution:
    """Optimizer of the scenario program for one class."""

    coeffs: CoefficientVector
    sigma: float
    phi: float
    supply: SupplyRate
    eta: float
    beta: float
    objective: float
    status: str
    failed_group: Optional[str] = None

    def __post_init__(self):
        if self.status == "optimal" and abs(self.objective - (self.eta + self.beta)) > 1e-12:
            raise InvariantError("objective must equal eta + beta")


def build_scp(
    cls: SubsystemClass, samples: SampleSet, options: ScpOptions
) -> LinearProgram:
    """Assemble the sampled certificate conditions as an LP.

    Row groups, in fixed order:
      initial   B(x) - sigma <= eta          for samples with x in the initial box
      unsafe   -B(x) + phi   <= eta          for samples with x in the unsafe box
      decrease  B(f(x,d)) - B(x) - supply(d,x) <= eta    for every sample
      supply    supply(d,x) <= beta                       for every sample
      gap       sigma + gap <= phi
    Objective: minimize eta + beta.
    """
    layout = VariableLayout(
        term_count=cls.template.term_count,
        state_dim=cls.state_dim,
        input_dim=cls.input_dim,
    )
    phi_x = cls.template.basis_values(samples.x)
    phi_fx = cls.template.basis_values(samples.fx)
    in_initial = cls.safety.initial.contains(samples.x)
    in_unsafe = cls.safety.unsafe.contains(samples.x)
    if not np.any(in_initial):
        raise CoverageError(
            f"no sampled state lies in the initial box of class {cls.id!r}; "
            "use a denser state grid"
        )
    if not np.any(in_unsafe):
        raise CoverageError(
            f"no sampled state lies in the unsafe box of class {cls.id!r}; "
            "use a denser state grid"
        )

    rows, rhs, groups = [], [], []

    def add(row: np.ndarray, bound: float, group: str):
        rows.append(row)
        rhs.append(bound)
        groups.append(group)

    for i in np.flatnonzero(in_initial):
        row = np.zeros(layout.size)
        row[layout.theta] = phi_x[i]
        row[layout.sigma] = -1.0
        row[layout.eta] = -1.0
        add(row, 0.0, "initial")
    for i in np.flatnonzero(in_unsafe):
        row = np.zeros(layout.size)
        row[layout.theta] = -phi_x[i]
        row[layout.phi] = 1.0
        row[layout.eta] = -1.0
        add(row, 0.0, "unsafe")
    for i in range(samples.count):
        srow = layout.supply_row(samples.d[i], samples.x[i])
        row = -srow
        row[layout.theta] = phi_fx[i] - phi_x[i]
        row[layout.eta] = -1.0
        add(row, 0.0, "decrease")
    for i in range(samples.count):
        row = layout.supply_row(samples.d[i], samples.x[i])
        row[layout.beta] = -1.0
        add(row, 0.0, "supply")
    gap_row = np.zeros(layout.size)
    gap_row[layout.sigma] = 1.0
    gap_row[layout.phi] = -1.0
    add(gap_row, -options.gap, "gap")

    b = options.coeff_bound
    bounds: list[tuple[Optional[float], Optional[float]]] = [(-b, b)] * (layout.size - 2)
    bounds += [(None, None), (None, None)]  # eta, beta are determined by the rows
    c = np.zeros(layout.size)
    c[layout.eta] = 1.0
    c[layout.beta] = 1.0

    names = [f"theta{j}" for j in range(layout.term_count)] + ["sigma", "phi"]
    names += [f"s11_{i}{j}" for i, j in layout._tri_pairs(layout.input_dim)]
    names += [
        f"s12_{i}{j}" for i in range(layout.input_dim) for j in range(layout.state_dim)
    ]
    names += [f"s22_{i}{j}" for i, j in layout._tri_pairs(layout.state_dim)]
    names += ["eta", "beta"]
    return LinearProgram(
        c=c,
        a_ub=np.array(rows),
        b_ub=np.array(rhs),
        bounds=bounds,
        row_groups=groups,
        var_names=names,
        layout=layout,
    )


def solve_scp(lp: LinearProgram) -> ScpSolution:
    """Solve a program built by ``build_scp`` and unpack the optimizer."""
    if lp.layout is None:
        raise InvariantError("solve_scp needs a program built by build_scp")
    result = solve_lp(lp)
    if result.status == "unbounded":
        # box bounds on all non-slack variables preclude this
        raise AssertionError("scenario program reported unbounded despite box bounds")
    layout = lp.layout
    if result.status != "optimal":
        zeros = layout.unpack(np.zeros(layout.size))
        return ScpSolution(
            coeffs=CoefficientVector(zeros["theta"]),
            sigma=0.0,
            phi=0.0,
            supply=zeros["supply"],
            eta=float("nan"),
            beta=float("nan"),
            objective=float("nan"),
            status=result.status,
            failed_group=most_violated_group(lp) if result.status == "infeasible" else None,
        )
    parts = layout.unpack(result.x)
    return ScpSolution(
        coeffs=CoefficientVector(parts["theta"]),
        sigma=parts["sigma"],
        phi=parts["phi"],
        supply=parts["supply"],
        eta=parts["eta"],
        beta=parts["beta"],
        objective=parts["eta"] + parts["beta"],
        status="optimal",
    )


@dataclass
class ResidualReport:
    """Worst constraint violation per row group, recomputed from the domain
    evaluators rather than the assembled matrices."""

    max_violation: dict[str, float]
    tolerance: float

    @property
    def passed(self) -> bool:
        return all(v <= self.tolerance for v in self.max_violation.values())

    @property
    def worst_group(self) -> str:
        return max(self.max_violation, key=self.max_violation.get)


def check_solution(
    solution: ScpSolution,
    cls: SubsystemClass,
    samples: SampleSet,
    options: ScpOptions = ScpOptions(),
) -> ResidualReport:
    """Independent re-substitution of every sampled condition."""
    viol = {g: 0.0 for g in ROW_GROUPS}
    coeffs, rate = solution.coeffs, solution.supply
    for i in range(samples.count):
        x, d, fx = samples.x[i], samples.d[i], samples.fx[i]
        bx = eval_template(cls.template, coeffs, x)
        if cls.safety.initial.contains(x):
            viol["initial"] = max(viol["initial"], bx - solution.sigma - solution.eta)
        if cls.safety.unsafe.contains(x):
            viol["unsafe"] = max(viol["unsafe"], -bx + solution.phi - solution.eta)
        s = eval_supply(rate, d, x)
        bfx = eval_template(cls.template, coeffs, fx)
        viol["decrease"] = max(viol["decrease"], bfx - bx - s - solution.eta)
        viol["supply"] = max(viol["supply"], s - solution.beta)
    viol["gap"] = solution.sigma + options.gap - solution.phi
    return ResidualReport(max_violation=viol, tolerance=options.feasibility_tol)


def export_lp_text(lp: LinearProgram, path) -> None:
    """Write the program in the plain LP interchange format so external
    solvers can cross-check the optimum."""

    def term(coef: float, name: str) -> str:
        sign = "+" if coef >= 0 else "-"
        return f" {sign} {abs(coef):.17g} {name}"

    lines = ["Minimize", " obj:" + "".join(
        term(c, lp.var_names[j]) for j, c in enumerate(lp.c) if c != 0.0
    ), "Subject To"]
    for i in range(lp.a_ub.shape[0]):
        body = "".join(
            term(v, lp.var_names[j]) for j, v in enumerate(lp.a_ub[i]) if v != 0.0
        )
        lines.append(f" {lp.row_groups[i]}_{i}:{body} <= {lp.b_ub[i]:.17g}")
    lines.append("Bounds")
    for name, (lo, hi) in zip(lp.var_names, lp.bounds):
        lo_s = "-inf" if lo is None else f"{lo:.17g}"
        hi_s = "+inf" if hi is None else f"{hi:.17g}"
        lines.append(f" {lo_s} <= {name} <= {hi_s}")
    lines.append("End")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
