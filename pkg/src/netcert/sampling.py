"""Deterministic grid sampling of oracles and dispersion computation.

Uniform grids make the covering radius of the sample set exact and
closed-form, which is what gives the downstream margin checks their
deterministic character; randomized sampling would only ever give it with
some confidence level.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .core import DimensionError, IntervalBox, InvariantError, SubsystemClass


class DataFaultError(RuntimeError):
    """An oracle returned a non-finite value for a sampled point."""


class CoverageError(ValueError):
    """The sample grid misses a region that a constraint group needs."""


def grid_samples(box: IntervalBox, counts: Sequence[int]) -> np.ndarray:
    """Cartesian grid over ``box`` with ``counts[k]`` points per dimension.

    Endpoints are included; a dimension with a single point gets the
    midpoint.  Rows come out in lexicographic order (first dimension
    slowest), so the result is deterministic and independent of how callers
    later parallelize oracle queries.
    """
    counts = tuple(int(c) for c in counts)
    if len(counts) != box.dim:
        raise DimensionError(f"need {box.dim} per-dimension counts, got {len(counts)}")
    if any(c < 1 for c in counts):
        raise InvariantError("per-dimension counts must be >= 1")
    axes = []
    for lo, hi, c in zip(box.lower, box.upper, counts):
        if c == 1:
            axes.append(np.array([0.5 * (lo + hi)]))
        else:
            if hi == lo:
                raise InvariantError(
                    "cannot place multiple distinct points in a zero-width dimension"
                )
            axes.append(np.linspace(lo, hi, c))
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.reshape(-1) for m in mesh], axis=1)


def _cell_widths(box: IntervalBox, counts: Sequence[int]) -> np.ndarray:
    """Per-dimension grid spacing; a single-point dimension contributes its
    full width (the farthest domain point from the midpoint sample sits at
    half the width, matching the half-diagonal formula below)."""
    counts = tuple(int(c) for c in counts)
    widths = box.widths
    return np.array([w if c == 1 else w / (c - 1) for w, c in zip(widths, counts)])


def dispersion_of_grid(box: IntervalBox, counts: Sequence[int]) -> float:
    """Exact covering radius of the uniform grid: half the Euclidean
    diagonal of one grid cell.  Every point of the box lies within this
    distance of some sample, and a cell center attains it."""
    delta = _cell_widths(box, counts)
    return float(0.5 * np.sqrt(np.sum(delta**2)))


def dispersion_general(
    box: IntervalBox, samples: np.ndarray, probe_counts: Sequence[int]
) -> float:
    """Upper bound on the covering radius of an arbitrary sample set.

    Probes a fine grid, takes the worst nearest-sample distance, and adds
    the probe grid's own half-diagonal so the bound stays valid between
    probe points.  Always >= the true covering radius.
    """
    samples = np.atleast_2d(np.asarray(samples, float))
    if samples.size == 0:
        raise InvariantError("dispersion of an empty sample set is undefined")
    if samples.shape[1] != box.dim:
        raise DimensionError("sample dimension does not match the box")
    probes = grid_samples(box, probe_counts)
    worst = float(cKDTree(samples).query(probes, workers=-1)[0].max())
    return worst + dispersion_of_grid(box, probe_counts)


@dataclass(frozen=True)
class SampleSet:
    """Collected one-step transitions ((x, d), f(x, d)) with their
    dispersion over the joint (state, input) box."""

    x: np.ndarray  # (N, state_dim)
    d: np.ndarray  # (N, input_dim)
    fx: np.ndarray  # (N, state_dim)
    dispersion: float
    grid_spec: Optional[tuple[tuple[int, ...], tuple[int, ...]]] = None

    def __post_init__(self):
        for name in ("x", "d", "fx"):
            arr = np.atleast_2d(np.asarray(getattr(self, name), float))
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if not (self.x.shape[0] == self.d.shape[0] == self.fx.shape[0]):
            raise InvariantError("x, d, fx must have the same number of rows")
        if self.count < 1:
            raise InvariantError("a sample set needs at least one pair")
        if not self.dispersion > 0:
            raise InvariantError("dispersion must be positive for a finite sample set")

    @property
    def count(self) -> int:
        return self.x.shape[0]

    @property
    def joint(self) -> np.ndarray:
        return np.hstack([self.x, self.d])


def collect_pairs(
    cls: SubsystemClass,
    counts_state: Sequence[int],
    counts_input: Sequence[int],
) -> SampleSet:
    """Query the class oracle once per point of the X x D product grid.

    The product grid is itself uniform per dimension, so the dispersion is
    the exact joint-cell half-diagonal.
    """
    if cls.oracle is None:
        raise InvariantError(f"class {cls.id!r} has no oracle; load samples from a file instead")
    xs = grid_samples(cls.state_box, counts_state)
    ds = grid_samples(cls.input_box, counts_input)
    # state-major pairing: all input points for the first state point first
    x_rep = np.repeat(xs, ds.shape[0], axis=0)
    d_rep = np.tile(ds, (xs.shape[0], 1))
    fx = cls.oracle.batch(x_rep, d_rep)
    bad = ~np.all(np.isfinite(fx), axis=1)
    if np.any(bad):
        i = int(np.argmax(bad))
        raise DataFaultError(
            f"oracle returned a non-finite value at x={x_rep[i].tolist()}, d={d_rep[i].tolist()}"
        )
    theta = dispersion_of_grid(cls.joint_box, tuple(counts_state) + tuple(counts_input))
    return SampleSet(
        x=x_rep,
        d=d_rep,
        fx=fx,
        dispersion=theta,
        grid_spec=(tuple(int(c) for c in counts_state), tuple(int(c) for c in counts_input)),
    )


# ---------------------------------------------------------------------------
# CSV interchange so externally collected data can feed the pipeline
# ---------------------------------------------------------------------------


def sample_csv_header(state_dim: int, input_dim: int) -> list[str]:
    return (
        [f"x{k}" for k in range(state_dim)]
        + [f"d{k}" for k in range(input_dim)]
        + [f"fx{k}" for k in range(state_dim)]
    )


def save_samples_csv(path, samples: SampleSet) -> None:
    n, p = samples.x.shape[1], samples.d.shape[1]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(sample_csv_header(n, p))
        for i in range(samples.count):
            row = [repr(float(v)) for v in samples.x[i]]
            row += [repr(float(v)) for v in samples.d[i]]
            row += [repr(float(v)) for v in samples.fx[i]]
            writer.writerow(row)


def load_samples_csv(
    path,
    state_dim: int,
    input_dim: int,
    joint_box: IntervalBox,
    probe_counts: Optional[Sequence[int]] = None,
) -> SampleSet:
    """Read externally collected pairs; dispersion is estimated with
    ``dispersion_general`` since nothing guarantees the data form a grid."""
    expected = sample_csv_header(state_dim, input_dim)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != expected:
            raise DataFaultError(f"expected CSV header {expected}, got {header}")
        rows = [[float(v) for v in row] for row in reader if row]
    if not rows:
        raise DataFaultError(f"no sample rows in {path}")
    data = np.array(rows, float)
    if data.shape[1] != 2 * state_dim + input_dim:
        raise DataFaultError("CSV column count does not match the declared dimensions")
    x = data[:, :state_dim]
    d = data[:, state_dim : state_dim + input_dim]
    fx = data[:, state_dim + input_dim :]
    if probe_counts is None:
        per_dim = max(2, int(np.ceil(data.shape[0] ** (1.0 / joint_box.dim))) * 4)
        probe_counts = (per_dim,) * joint_box.dim
    theta = dispersion_general(joint_box, np.hstack([x, d]), probe_counts)
    return SampleSet(x=x, d=d, fx=fx, dispersion=theta, grid_spec=None)
