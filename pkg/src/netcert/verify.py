"""Independent dense-grid verification of solved certificates and
figure-data emission (level sets, decrease heatmaps, certificate surfaces,
phase portraits).

Everything here recomputes values through the domain evaluators, never
through the optimization matrices, so it cross-checks the solver path.
Grid verification is a strong diagnostic but not a proof over the
continuum; the formal statement is the margin check in ``compose``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .blackbox import Topology, simulate_network
from .core import (
    InvariantError,
    SubsystemClass,
    eval_supply_batch,
    eval_template_batch,
)
from .sampling import grid_samples
from .scp import ScpSolution

_CHUNK = 200_000  # dense joint grids are evaluated in blocks of this many points


@dataclass
class LevelSetReport:
    """Certificate extrema over the initial and unsafe boxes against the
    solved level values."""

    initial_max: float
    initial_argmax: np.ndarray
    unsafe_min: float
    unsafe_argmin: np.ndarray
    sigma: float
    phi: float

    @property
    def initial_ok(self) -> bool:
        return self.initial_max <= self.sigma

    @property
    def unsafe_ok(self) -> bool:
        return self.unsafe_min >= self.phi

    @property
    def gap_ok(self) -> bool:
        return self.phi > self.sigma

    @property
    def passed(self) -> bool:
        return self.initial_ok and self.unsafe_ok and self.gap_ok


def check_level_sets(
    cls: SubsystemClass, solution: ScpSolution, counts: Sequence[int]
) -> LevelSetReport:
    """Evaluate the certificate on dense grids of both safety boxes."""
    if solution.status != "optimal":
        raise InvariantError("level-set check needs an optimal solution")
    init_pts = grid_samples(cls.safety.initial, counts)
    unsafe_pts = grid_samples(cls.safety.unsafe, counts)
    init_vals = eval_template_batch(cls.template, solution.coeffs, init_pts)
    unsafe_vals = eval_template_batch(cls.template, solution.coeffs, unsafe_pts)
    imax = int(np.argmax(init_vals))
    umin = int(np.argmin(unsafe_vals))
    return LevelSetReport(
        initial_max=float(init_vals[imax]),
        initial_argmax=init_pts[imax],
        unsafe_min=float(unsafe_vals[umin]),
        unsafe_argmin=unsafe_pts[umin],
        sigma=solution.sigma,
        phi=solution.phi,
    )


@dataclass
class HeatmapSummary:
    """Max of B(f(x,d)) - B(x) - supply(d,x) over a dense joint grid."""

    max_value: float
    argmax: np.ndarray
    grid_counts: tuple[int, ...]
    point_count: int
    diagnostic_threshold: float  # eta* + L2 * grid dispersion, when available

    @property
    def passed(self) -> bool:
        return self.max_value <= 0.0


def decrease_heatmap(
    cls: SubsystemClass,
    solution: ScpSolution,
    counts: Sequence[int],
    l2: float = 0.0,
    csv_path: Optional[str] = None,
) -> HeatmapSummary:
    """Tabulate the shifted decrease condition over a dense X x D grid.

    Large grids are streamed in chunks; pass ``csv_path`` to also persist
    the full table (x..., d..., value).
    """
    if cls.oracle is None:
        raise InvariantError(f"class {cls.id!r} has no oracle; heatmap unavailable")
    if solution.status != "optimal":
        raise InvariantError("heatmap needs an optimal solution")
    from .sampling import dispersion_of_grid

    joint = cls.joint_box
    pts = grid_samples(joint, counts)
    n = cls.state_dim
    best_val = -np.inf
    best_pt = pts[0]
    writer = None
    fh = None
    if csv_path is not None:
        fh = open(csv_path, "w", newline="")
        writer = csv.writer(fh)
        writer.writerow(
            [f"x{k}" for k in range(n)] + [f"d{k}" for k in range(cls.input_dim)] + ["value"]
        )
    try:
        for start in range(0, pts.shape[0], _CHUNK):
            block = pts[start : start + _CHUNK]
            x, d = block[:, :n], block[:, n:]
            fx = cls.oracle.batch(x, d)
            vals = (
                eval_template_batch(cls.template, solution.coeffs, fx)
                - eval_template_batch(cls.template, solution.coeffs, x)
                - eval_supply_batch(solution.supply, d, x)
            )
            i = int(np.argmax(vals))
            if vals[i] > best_val:
                best_val = float(vals[i])
                best_pt = block[i]
            if writer is not None:
                for row, v in zip(block, vals):
                    writer.writerow([repr(float(c)) for c in row] + [repr(float(v))])
    finally:
        if fh is not None:
            fh.close()
    theta_grid = dispersion_of_grid(joint, counts)
    return HeatmapSummary(
        max_value=best_val,
        argmax=best_pt,
        grid_counts=tuple(int(c) for c in counts),
        point_count=pts.shape[0],
        diagnostic_threshold=solution.eta + l2 * theta_grid,
    )


def surface_data(
    cls: SubsystemClass, solution: ScpSolution, counts: Sequence[int]
) -> tuple[np.ndarray, np.ndarray, float, float]:
    """(points, certificate values, sigma, phi) over the state box, for
    plotting the certificate surface against its level contours."""
    pts = grid_samples(cls.state_box, counts)
    vals = eval_template_batch(cls.template, solution.coeffs, pts)
    return pts, vals, solution.sigma, solution.phi


@dataclass
class PortraitResult:
    """Batch of surrogate trajectories started from a grid of the initial
    box (all copies of a trajectory share the initial point)."""

    initial_points: np.ndarray
    trajectories: list  # list of Trajectory
    unsafe_flags: np.ndarray

    @property
    def unsafe_entries(self) -> int:
        return int(np.sum(self.unsafe_flags))


def phase_portrait(
    cls: SubsystemClass,
    topology: Topology,
    initial_counts: Sequence[int],
    steps: int,
) -> PortraitResult:
    """Simulate from every grid point of the initial box and flag
    trajectories that ever touch the unsafe box."""
    points = grid_samples(cls.safety.initial, initial_counts)
    trajectories = []
    flags = np.zeros(points.shape[0], dtype=bool)
    for i, p in enumerate(points):
        traj = simulate_network(
            cls, topology, np.tile(p, (topology.surrogate_size, 1)), steps
        )
        trajectories.append(traj)
        flags[i] = traj.first_unsafe_step is not None
    return PortraitResult(initial_points=points, trajectories=trajectories, unsafe_flags=flags)


# ---------------------------------------------------------------------------
# CSV emission (headers are fixed; plotting scripts consume these)
# ---------------------------------------------------------------------------


def write_surface_csv(path, cls: SubsystemClass, points: np.ndarray, values: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{k}" for k in range(cls.state_dim)] + ["B"])
        for row, v in zip(points, values):
            writer.writerow([repr(float(c)) for c in row] + [repr(float(v))])


def write_levels_csv(path, report: LevelSetReport) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["quantity", "value"])
        writer.writerow(["initial_max", repr(report.initial_max)])
        writer.writerow(["unsafe_min", repr(report.unsafe_min)])
        writer.writerow(["sigma", repr(report.sigma)])
        writer.writerow(["phi", repr(report.phi)])
        writer.writerow(["initial_ok", str(report.initial_ok).lower()])
        writer.writerow(["unsafe_ok", str(report.unsafe_ok).lower()])


def write_trajectories_csv(path, cls: SubsystemClass, portrait: PortraitResult) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["trajectory", "step", "subsystem"] + [f"x{k}" for k in range(cls.state_dim)]
        )
        for t_idx, traj in enumerate(portrait.trajectories):
            steps, nodes, _ = traj.states.shape
            for s in range(steps):
                for node in range(nodes):
                    writer.writerow(
                        [t_idx, s, node] + [repr(float(v)) for v in traj.states[s, node]]
                    )
