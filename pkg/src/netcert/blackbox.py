"""Built-in benchmark dynamics and interconnection operators.

The rest of the pipeline treats the transition maps defined here as opaque
oracles: it only ever queries next states, never inspects coefficients.
The benchmarks are stable affine maps whose trajectories stay inside their
state boxes and away from their unsafe boxes, which is checked by
``validate_benchmark``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .core import (
    DimensionError,
    IntervalBox,
    InvariantError,
    SafetySpec,
    StcTemplate,
    SubsystemClass,
)

TOPOLOGY_KINDS = ("cascade", "ring", "dense-decay")


@dataclass(frozen=True)
class TransitionOracle:
    """Deterministic black-box transition handle.

    ``step`` maps a single (state, input) pair to the next state.
    ``step_batch``, when provided, evaluates many pairs at once; it must
    agree with ``step`` pointwise and exists purely so that dense grid
    diagnostics stay fast.
    """

    step: Callable[[np.ndarray, np.ndarray], np.ndarray]
    step_batch: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None

    def __call__(self, x: np.ndarray, d: np.ndarray) -> np.ndarray:
        return np.asarray(self.step(np.asarray(x, float), np.asarray(d, float)), float)

    def batch(self, x: np.ndarray, d: np.ndarray) -> np.ndarray:
        """Evaluate rows of (x, d); falls back to a pointwise loop."""
        x = np.atleast_2d(np.asarray(x, float))
        d = np.atleast_2d(np.asarray(d, float))
        if self.step_batch is not None:
            return np.asarray(self.step_batch(x, d), float)
        return np.stack([self(x[i], d[i]) for i in range(x.shape[0])])


@dataclass(frozen=True)
class Topology:
    """How internal inputs are assembled from neighbor states.

    cascade      d_i = x_{i-1}              (index 0 wraps to the last node)
    ring         d_i = (x_{i-1} + x_{i+1})/2  with wraparound
    dense-decay  d_i = weighted mean of all other nodes, weight w^|i-j|
    """

    kind: str
    surrogate_size: int
    weight_decay: float = 0.5

    def __post_init__(self):
        if self.kind not in TOPOLOGY_KINDS:
            raise InvariantError(f"topology kind must be one of {TOPOLOGY_KINDS}")
        if self.surrogate_size < 2:
            raise InvariantError("surrogate networks need at least 2 subsystems")
        if not (0.0 < self.weight_decay <= 1.0):
            raise InvariantError("weight_decay must lie in (0, 1]")


# ---------------------------------------------------------------------------
# Benchmark dynamics
# ---------------------------------------------------------------------------

# Room temperature benchmark: scalar state per room, cooler folded into the
# affine constant, neighbor temperature entering through the input term.
ROOM_A = 0.9
ROOM_B = 0.06
ROOM_C = 0.4


def room_step(x: float, d: float, a: float = ROOM_A, b: float = ROOM_B, c: float = ROOM_C) -> float:
    """Next temperature of one room given its own and its neighbors' states."""
    return a * x + b * d + c


# Vehicle platoon benchmark: two states per vehicle, weak neighbor coupling.
PLATOON_A = np.array([[0.9, 0.08], [-0.04, 0.88]])
PLATOON_E = 0.01 * np.eye(2)
PLATOON_C = np.array([0.01, 0.15])


def platoon_step(
    x: np.ndarray,
    d: np.ndarray,
    a: np.ndarray = PLATOON_A,
    e: np.ndarray = PLATOON_E,
    c: np.ndarray = PLATOON_C,
) -> np.ndarray:
    """Next state of one vehicle: A x + E d + c."""
    x = np.asarray(x, float).reshape(2)
    d = np.asarray(d, float).reshape(2)
    return np.asarray(a, float) @ x + np.asarray(e, float) @ d + np.asarray(c, float)


def _affine_oracle(a: np.ndarray, e: np.ndarray, c: np.ndarray) -> TransitionOracle:
    a = np.asarray(a, float)
    e = np.asarray(e, float)
    c = np.asarray(c, float)

    def step(x, d):
        return a @ np.asarray(x, float) + e @ np.asarray(d, float) + c

    def step_batch(x, d):
        return np.atleast_2d(x) @ a.T + np.atleast_2d(d) @ e.T + c

    return TransitionOracle(step=step, step_batch=step_batch)


ROOM_TEMPLATE_EXPONENTS = [[4], [2], [0]]

# Full bivariate quartic: all exponent pairs with total degree <= 4.
PLATOON_TEMPLATE_EXPONENTS = [
    [4, 0], [3, 1], [2, 2], [1, 3], [0, 4],
    [3, 0], [2, 1], [1, 2], [0, 3],
    [2, 0], [1, 1], [0, 2],
    [1, 0], [0, 1],
    [0, 0],
]


def build_room_class(
    a: float = ROOM_A,
    b: float = ROOM_B,
    c: float = ROOM_C,
    template_exponents: Optional[Sequence[Sequence[int]]] = None,
) -> SubsystemClass:
    """Room-temperature class: X = [10, 13], initial [10, 11], unsafe [12, 13].

    The input box equals the state box because internal inputs are neighbor
    temperatures.
    """
    oracle = _affine_oracle(np.array([[a]]), np.array([[b]]), np.array([c]))
    exps = ROOM_TEMPLATE_EXPONENTS if template_exponents is None else template_exponents
    return SubsystemClass(
        id="room",
        state_dim=1,
        input_dim=1,
        state_box=IntervalBox([10.0], [13.0]),
        input_box=IntervalBox([10.0], [13.0]),
        safety=SafetySpec(
            initial=IntervalBox([10.0], [11.0]),
            unsafe=IntervalBox([12.0], [13.0]),
        ),
        template=StcTemplate(state_dim=1, exponents=exps),
        oracle=oracle,
    )


def build_platoon_class(
    a: Optional[np.ndarray] = None,
    e: Optional[np.ndarray] = None,
    c: Optional[np.ndarray] = None,
    template_exponents: Optional[Sequence[Sequence[int]]] = None,
) -> SubsystemClass:
    """Vehicle class: X = [0.8, 1.5] x [0.8, 2], unsafe is the upper band of
    the second state.  Input box equals the state box (neighbor states)."""
    a = PLATOON_A if a is None else np.asarray(a, float)
    e = PLATOON_E if e is None else np.asarray(e, float)
    c = PLATOON_C if c is None else np.asarray(c, float)
    exps = PLATOON_TEMPLATE_EXPONENTS if template_exponents is None else template_exponents
    return SubsystemClass(
        id="platoon",
        state_dim=2,
        input_dim=2,
        state_box=IntervalBox([0.8, 0.8], [1.5, 2.0]),
        input_box=IntervalBox([0.8, 0.8], [1.5, 2.0]),
        safety=SafetySpec(
            initial=IntervalBox([0.8, 0.8], [1.0, 1.0]),
            unsafe=IntervalBox([0.8, 1.5], [1.5, 2.0]),
        ),
        template=StcTemplate(state_dim=2, exponents=exps),
        oracle=_affine_oracle(a, e, c),
    )


BENCHMARKS = {
    "room": build_room_class,
    "platoon": build_platoon_class,
}


# ---------------------------------------------------------------------------
# Interconnection + surrogate simulation
# ---------------------------------------------------------------------------


def internal_inputs(
    states: np.ndarray, topology: Topology, input_box: IntervalBox
) -> tuple[np.ndarray, int]:
    """Internal input of every node from the current network state.

    ``states`` is (n, dim).  Returns (inputs (n, dim), clamp_events) where a
    clamp event is one node whose raw input fell outside the input box and
    was projected back in.
    """
    states = np.atleast_2d(np.asarray(states, float))
    n = states.shape[0]
    if n != topology.surrogate_size:
        raise DimensionError(
            f"got {n} states for a surrogate of size {topology.surrogate_size}"
        )
    if topology.kind == "cascade":
        raw = np.roll(states, 1, axis=0)
    elif topology.kind == "ring":
        raw = 0.5 * (np.roll(states, 1, axis=0) + np.roll(states, -1, axis=0))
    else:  # dense-decay
        idx = np.arange(n)
        weights = topology.weight_decay ** np.abs(idx[:, None] - idx[None, :])
        np.fill_diagonal(weights, 0.0)
        raw = (weights @ states) / weights.sum(axis=1, keepdims=True)
    clamped = input_box.clamp(raw)
    # averaging identical boundary states can land 1 ulp outside the box;
    # only count a clamp when the projection actually moved the point
    moved = np.abs(clamped - raw) > 1e-12 * np.maximum(1.0, np.abs(raw))
    clamp_events = int(np.sum(np.any(moved, axis=1)))
    return clamped, clamp_events


@dataclass
class Trajectory:
    """One surrogate run: states has shape (steps+1, n, dim)."""

    states: np.ndarray
    first_unsafe_step: Optional[int]
    first_exit_step: Optional[int]
    clamp_events: int

    @property
    def safe(self) -> bool:
        return self.first_unsafe_step is None

    @property
    def stayed_in_box(self) -> bool:
        return self.first_exit_step is None


def simulate_network(
    cls: SubsystemClass,
    topology: Topology,
    initial_states: np.ndarray,
    steps: int,
) -> Trajectory:
    """Iterate the closed-loop surrogate network of identical copies.

    Flags (never raises on) the first step at which any node enters the
    unsafe box or leaves the state box.
    """
    if cls.oracle is None:
        raise InvariantError(f"class {cls.id!r} has no oracle to simulate")
    if steps < 0:
        raise InvariantError("steps must be non-negative")
    states = np.atleast_2d(np.asarray(initial_states, float)).copy()
    if states.shape != (topology.surrogate_size, cls.state_dim):
        raise DimensionError(
            f"initial states must be ({topology.surrogate_size}, {cls.state_dim})"
        )
    history = np.empty((steps + 1, topology.surrogate_size, cls.state_dim))
    history[0] = states
    first_unsafe = None
    first_exit = None

    def scan(step_idx: int, current: np.ndarray):
        nonlocal first_unsafe, first_exit
        if first_unsafe is None and np.any(cls.safety.unsafe.contains(current)):
            first_unsafe = step_idx
        if first_exit is None and not np.all(cls.state_box.contains(current)):
            first_exit = step_idx

    scan(0, states)
    clamp_total = 0
    for k in range(1, steps + 1):
        inputs, clamps = internal_inputs(states, topology, cls.input_box)
        clamp_total += clamps
        states = cls.oracle.batch(states, inputs)
        history[k] = states
        scan(k, states)
    return Trajectory(
        states=history,
        first_unsafe_step=first_unsafe,
        first_exit_step=first_exit,
        clamp_events=clamp_total,
    )


@dataclass
class BenchmarkValidation:
    """Result of the pre-pipeline sanity run on one benchmark."""

    class_id: str
    runs: int
    unsafe_entries: int
    box_exits: int
    clamp_events: int

    @property
    def passed(self) -> bool:
        return self.unsafe_entries == 0 and self.box_exits == 0 and self.clamp_events == 0


def validate_benchmark(
    cls: SubsystemClass,
    steps: int = 100,
    grid_per_dim: int = 5,
    surrogate_size: int = 10,
    kinds: Sequence[str] = TOPOLOGY_KINDS,
) -> BenchmarkValidation:
    """Simulate the surrogate from a grid of the initial box and count
    unsafe entries, box exits, and input clamps.  All three must be zero
    before the benchmark may feed the certification pipeline.

    Every run starts all copies at the same initial grid point, which is the
    worst case for symmetric topologies (inputs equal states).
    """
    from .sampling import grid_samples  # local import avoids a cycle

    initial_points = grid_samples(cls.safety.initial, (grid_per_dim,) * cls.state_dim)
    unsafe = exits = clamps = runs = 0
    for kind in kinds:
        topo = Topology(kind=kind, surrogate_size=surrogate_size)
        for point in initial_points:
            traj = simulate_network(cls, topo, np.tile(point, (surrogate_size, 1)), steps)
            runs += 1
            unsafe += traj.first_unsafe_step is not None
            exits += traj.first_exit_step is not None
            clamps += traj.clamp_events
    return BenchmarkValidation(
        class_id=cls.id,
        runs=runs,
        unsafe_entries=unsafe,
        box_exits=exits,
        clamp_events=clamps,
    )
