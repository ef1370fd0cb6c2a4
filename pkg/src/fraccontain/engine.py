"""Closed-loop simulation of the leader/follower network.

Two integrators are provided:

* :func:`run_fractional` integrates the Caputo dynamics of every follower
  with the ABM predictor-corrector, evaluating the coupled field on the whole
  stacked follower state at each stage.
* :func:`run_integer_discrete` applies the explicit convex-combination
  update of the integer-order system and asserts convexity every step.

Both hold leaders fixed, record edge margins and interaction-matrix
diagnostics at every recorded step, and abort (never clamp) when a bond
reaches its breaking point.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import (
    BarrierBreach,
    DegenerateRowError,
    DivergenceError,
    StepSizeError,
    ValidationError,
)
from .frac_calculus import AbmIntegrator, FracOrder, as_order
from .potential import ControllerParams
from .social_graph import (
    NetworkTopology,
    as_states,
    assemble_pi_matrix,
    check_assumption_one,
    edge_margins,
)

log = logging.getLogger(__name__)

# margins below NEAR_BOUNDARY * delta are treated as a breach
NEAR_BOUNDARY = 1e-9
# edge-addition hysteresis: a new edge forms once S_ij <= EDGE_ADD_FRACTION * delta
EDGE_ADD_FRACTION = 0.8


@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    topology: NetworkTopology
    initial_states: np.ndarray
    params: ControllerParams = field(default_factory=ControllerParams)
    alpha: FracOrder = FracOrder(1.0)
    step: float = 1e-3
    horizon: float = 50.0
    edge_addition: bool = False
    memory_window: int | None = None
    seed: int = 0
    record_every: int = 1
    scenario_id: str = "custom"

    def __post_init__(self):
        object.__setattr__(self, "alpha", as_order(self.alpha))
        q = np.array(self.initial_states, dtype=float)
        if q.ndim == 1:
            q = q[:, None]
        q.setflags(write=False)
        object.__setattr__(self, "initial_states", q)
        problems = config_problems(self)
        if problems:
            raise ValidationError(problems)

    @property
    def steps(self) -> int:
        return int(round(self.horizon / self.step))

    @property
    def dim(self) -> int:
        return self.initial_states.shape[1]


def config_problems(config: ScenarioConfig):
    """Load-time checks beyond topology structure: shapes, solver fields,
    positive initial margins and reachability from the leaders."""
    problems = []
    topo = config.topology
    q = config.initial_states
    if q.ndim != 2 or q.shape[0] != topo.n:
        problems.append(("agents", f"expected {topo.n} initial states, got shape {q.shape}"))
        return problems
    if not np.all(np.isfinite(q)):
        problems.append(("agents", "initial states must be finite"))
        return problems
    if not (config.step > 0 and math.isfinite(config.step)):
        problems.append(("solver.step", "step must be positive"))
    if not (config.horizon > 0 and math.isfinite(config.horizon)):
        problems.append(("solver.horizon", "horizon must be positive"))
    elif config.step > 0 and config.steps < 1:
        problems.append(("solver.horizon", "horizon shorter than one step"))
    if config.memory_window is not None and int(config.memory_window) < 1:
        problems.append(("solver.memory_window", "memory window must be a positive integer"))
    if int(config.record_every) < 1:
        problems.append(("output.record_every", "record_every must be >= 1"))
    if not isinstance(config.params.gains, float) and len(config.params.gains) != topo.n:
        problems.append(("agents", f"expected {topo.n} gains, got {len(config.params.gains)}"))

    for idx, ((i, j), b) in enumerate(zip(topo.access_edges, edge_margins(topo, q))):
        if b <= 0:
            problems.append((f"edges[{idx}]", f"initial margin delta - S_ij = {b:.6g} <= 0 on agents[{i}] -> agents[{j}]"))
    unreachable = check_assumption_one(topo)
    if unreachable:
        ids = ", ".join(f"agents[{i}]" for i in sorted(unreachable))
        problems.append(("edges", f"followers not reachable from any leader: {ids}"))
    return problems


@dataclass
class TrajectoryRecord:
    """Recorded states and per-step diagnostics of one run.

    ``margins`` covers the initial edge set in ``edges`` order.
    ``pi_offdiag_min`` is the smallest nonzero off-diagonal entry of the
    follower rows of the interaction matrix and ``pi_rowsum_err`` the largest
    absolute row sum, both per recorded step. ``coef_min`` / ``coef_sum_err``
    are only set for the discrete scheme.
    """

    config: ScenarioConfig
    scheme: str
    times: np.ndarray
    states: np.ndarray
    edges: tuple
    margins: np.ndarray
    min_margin: np.ndarray
    pi_offdiag_min: np.ndarray
    pi_rowsum_err: np.ndarray
    coef_min: np.ndarray | None = None
    coef_sum_err: np.ndarray | None = None
    min_margin_overall: float = math.inf
    added_edges: list = field(default_factory=list)
    completed: bool = False
    failure: dict | None = None

    @property
    def final_states(self) -> np.ndarray:
        return self.states[-1]


class _Network:
    """Flat arrays describing the current edge set for the compiled kernels."""

    def __init__(self, topology: NetworkTopology, params: ControllerParams, edges):
        self.topology = topology
        self.edges = tuple(sorted(edges))
        self.followers = np.array(topology.followers, dtype=np.int64)
        row = {a: r for r, a in enumerate(topology.followers)}
        counts = np.zeros(len(self.followers) + 1, dtype=np.int64)
        for i, _ in self.edges:
            counts[row[i] + 1] += 1
        self.ptr = np.cumsum(counts)
        self.nbr = np.array([j for _, j in self.edges], dtype=np.int64)
        self.gains = params.gain_vector(topology.n)[self.followers].astype(float)
        self.edge_row = np.repeat(np.arange(len(self.followers)), np.diff(self.ptr))
        self.edge_gain = self.gains[self.edge_row]
        self.n_edges = len(self.edges)
        self.margin = np.empty(self.n_edges)
        self.m = np.empty(self.n_edges)


class _Recorder:
    def __init__(self, config, scheme, initial_edges, with_coefs):
        self.config = config
        steps = config.steps
        every = int(config.record_every)
        idx = list(range(0, steps + 1, every))
        if idx[-1] != steps:
            idx.append(steps)
        self.record_at = set(idx)
        size = len(idx)
        n, d = config.initial_states.shape
        self.scheme = scheme
        self.initial_edges = tuple(initial_edges)
        self.times = np.empty(size)
        self.states = np.empty((size, n, d))
        self.margins = np.empty((size, len(initial_edges)))
        self.min_margin = np.empty(size)
        self.offdiag = np.empty(size)
        self.rowsum = np.empty(size)
        self.coef_min = np.empty(size) if with_coefs else None
        self.coef_err = np.empty(size) if with_coefs else None
        self._row = np.empty(n)
        self.count = 0
        self.overall = math.inf
        self.added = []

    def observe(self, step_index, q, net, init_pos, coef=None):
        lowest = net.margin.min()
        if lowest < self.overall:
            self.overall = float(lowest)
        if step_index not in self.record_at:
            return
        r = self.count
        self.times[r] = step_index * self.config.step
        self.states[r] = q
        self.margins[r] = net.margin[init_pos]
        self.min_margin[r] = lowest
        self.offdiag[r], self.rowsum[r] = _kernels.pi_stats(
            q.shape[0], net.followers, net.ptr, net.nbr, net.edge_gain, net.m, self._row
        )
        if coef is not None:
            self.coef_min[r], self.coef_err[r] = coef
        self.count += 1

    def build(self, completed, failure=None):
        c = self.count
        return TrajectoryRecord(
            config=self.config,
            scheme=self.scheme,
            times=self.times[:c].copy(),
            states=self.states[:c].copy(),
            edges=self.initial_edges,
            margins=self.margins[:c].copy(),
            min_margin=self.min_margin[:c].copy(),
            pi_offdiag_min=self.offdiag[:c].copy(),
            pi_rowsum_err=self.rowsum[:c].copy(),
            coef_min=None if self.coef_min is None else self.coef_min[:c].copy(),
            coef_sum_err=None if self.coef_err is None else self.coef_err[:c].copy(),
            min_margin_overall=self.overall,
            added_edges=list(self.added),
            completed=completed,
            failure=failure,
        )


def _evaluate(q, net, k, delta, out_u):
    return _kernels.follower_field(
        q, net.followers, net.ptr, net.nbr, net.gains, k, delta, NEAR_BOUNDARY * delta, out_u, net.margin, net.m
    )


def _breach(recorder, net, bad, step_index, stage):
    i, j = net.edges[bad]
    margin = float(net.margin[bad])
    failure = {"kind": "barrier_breach", "step": step_index, "stage": stage, "edge": [i, j], "margin": margin}
    record = recorder.build(completed=False, failure=failure)
    return BarrierBreach(
        f"bond ({i}, {j}) reached margin {margin:.3g} at step {step_index} ({stage}); "
        "reduce the step size",
        step=step_index,
        edge=(i, j),
        margin=margin,
        trajectory=record,
    )


def _maybe_add_edges(q, net, topology, params, init_edges):
    existing = set(net.edges)
    threshold = EDGE_ADD_FRACTION * topology.delta
    new = []
    for i in topology.followers:
        diff = q - q[i]
        close = np.flatnonzero(np.einsum("ij,ij->i", diff, diff) <= threshold)
        new.extend((i, int(j)) for j in close if j != i and (i, int(j)) not in existing)
    if not new:
        return net, None
    net = _Network(topology, params, list(existing) + new)
    return net, new


def _initial_position(net, init_edges):
    pos = {e: p for p, e in enumerate(net.edges)}
    return np.array([pos[e] for e in init_edges], dtype=np.int64)


def run_fractional(config: ScenarioConfig) -> TrajectoryRecord:
    """Integrate ``D^alpha q_i = -K_i grad phi_i`` for all followers.

    Raises
    ------
    BarrierBreach
        A margin fell to ``<= 1e-9 * delta`` (predicted or corrected state).
    DivergenceError
        A non-finite state appeared.
    Both carry the partial record in ``.trajectory``.
    """
    topo = config.topology
    params = config.params
    k = params.k
    delta = topo.delta
    q = np.array(config.initial_states, dtype=float)
    followers = np.array(topo.followers, dtype=np.int64)
    d = q.shape[1]
    init_edges = topo.access_edges
    net = _Network(topo, params, init_edges)
    init_pos = _initial_position(net, init_edges)
    recorder = _Recorder(config, "fractional", init_edges, with_coefs=False)

    work = q.copy()
    u = np.empty((len(followers), d))

    x0 = q[followers].ravel()
    integ = AbmIntegrator(config.alpha, config.step, config.steps, x0, memory_window=config.memory_window)

    bad = _evaluate(q, net, k, delta, u)
    if bad >= 0:
        raise _breach(recorder, net, bad, 0, "initial")
    recorder.observe(0, q, net, init_pos)
    integ.commit(0, u.ravel())

    for i in range(1, config.steps + 1):
        y_pred = integ.predict(i)
        work[followers] = y_pred.reshape(-1, d)
        bad = _evaluate(work, net, k, delta, u)
        if bad >= 0:
            raise _breach(recorder, net, bad, i, "predictor")
        y = integ.correct(i, u.ravel())
        if not math.isfinite(y.sum()):
            raise DivergenceError(
                f"non-finite follower state at step {i}",
                step=i,
                trajectory=recorder.build(False, {"kind": "divergence", "step": i}),
            )
        q[followers] = y.reshape(-1, d)
        bad = _evaluate(q, net, k, delta, u)
        if bad >= 0:
            raise _breach(recorder, net, bad, i, "corrector")
        if config.edge_addition:
            net2, new = _maybe_add_edges(q, net, topo, params, init_edges)
            if new:
                net = net2
                init_pos = _initial_position(net, init_edges)
                recorder.added.extend({"step": i, "edge": list(e)} for e in new)
                bad = _evaluate(q, net, k, delta, u)
                if bad >= 0:
                    raise _breach(recorder, net, bad, i, "edge-addition")
        recorder.observe(i, q, net, init_pos)
        integ.commit(i, u.ravel())

    return recorder.build(completed=True)


def run_integer_discrete(config: ScenarioConfig) -> TrajectoryRecord:
    """Explicit convex-combination stepping of the ``alpha = 1`` closed loop.

    ``config.alpha`` is ignored. Each follower's update coefficients are
    checked to be nonnegative; their sum deviation from 1 is recorded.

    Raises
    ------
    StepSizeError
        ``1 - T * sum_j pi_ij < 0`` for some follower.
    BarrierBreach
        A margin fell to ``<= 1e-9 * delta``.
    """
    topo = config.topology
    params = config.params
    k = params.k
    delta = topo.delta
    T = float(config.step)
    q = np.array(config.initial_states, dtype=float)
    nxt = q.copy()
    d = q.shape[1]
    init_edges = topo.access_edges
    net = _Network(topo, params, init_edges)
    init_pos = _initial_position(net, init_edges)
    recorder = _Recorder(config, "discrete", init_edges, with_coefs=True)
    u = np.empty((len(net.followers), d))
    coef_min = np.empty(1)
    coef_err = np.empty(1)

    bad = _evaluate(q, net, k, delta, u)
    if bad >= 0:
        raise _breach(recorder, net, bad, 0, "initial")

    for i in range(config.steps + 1):
        # coefficients of the update that leaves step i; recorded with step i
        _kernels.discrete_update(q, net.followers, net.ptr, net.nbr, net.gains, net.m, T, nxt, coef_min, coef_err)
        recorder.observe(i, q, net, init_pos, coef=(coef_min[0], coef_err[0]))
        if i == config.steps:
            break
        if coef_min[0] < 0:
            raise StepSizeError(
                f"update at step {i} is not a convex combination (coefficient {coef_min[0]:.3g}); "
                f"reduce the sampling period below {T:g}",
                step=i,
                trajectory=recorder.build(False, {"kind": "step_size", "step": i, "coefficient": float(coef_min[0])}),
            )
        q, nxt = nxt, q
        if not np.all(np.isfinite(q)):
            raise DivergenceError(
                f"non-finite follower state at step {i + 1}",
                step=i + 1,
                trajectory=recorder.build(False, {"kind": "divergence", "step": i + 1}),
            )
        bad = _evaluate(q, net, k, delta, u)
        if bad >= 0:
            raise _breach(recorder, net, bad, i + 1, "update")
        if config.edge_addition:
            net2, new = _maybe_add_edges(q, net, topo, params, init_edges)
            if new:
                net = net2
                init_pos = _initial_position(net, init_edges)
                recorder.added.extend({"step": i + 1, "edge": list(e)} for e in new)
                _evaluate(q, net, k, delta, u)

    return recorder.build(completed=True)


def max_convex_step(config_or_topology, states=None, params=None) -> float:
    """Largest sampling period ``T`` with ``1 - T sum_j pi_ij >= 0`` at the given states."""
    if isinstance(config_or_topology, ScenarioConfig):
        topo = config_or_topology.topology
        states = config_or_topology.initial_states
        params = config_or_topology.params
    else:
        topo = config_or_topology
    pi = assemble_pi_matrix(topo, states, params, params.k)
    rate = float(np.max(-np.diag(pi.entries[:, list(pi.follower_index)])))
    return math.inf if rate == 0 else 1.0 / rate


def equilibrium_residual(states, topology: NetworkTopology, params: ControllerParams) -> np.ndarray:
    """``||q_i - sum_j (pi_ij / -pi_ii) q_j||`` for every follower (in follower order).

    Zero means ``q_i`` is the convex combination of its neighbors that a
    fixed point of the closed loop requires.
    """
    q = as_states(states)
    pi = assemble_pi_matrix(topology, q, params, params.k)
    out = np.empty(len(pi.follower_index))
    for r, i in enumerate(pi.follower_index):
        row = pi.entries[r]
        diag = row[i]
        if diag == 0:
            raise DegenerateRowError(f"follower {i} has pi_ii = 0 (no active neighbor)")
        weights = row.copy()
        weights[i] = 0.0
        target = weights @ q / -diag
        out[r] = float(np.linalg.norm(q[i] - target))
    return out
