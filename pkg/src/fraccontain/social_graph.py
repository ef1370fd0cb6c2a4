"""Directed leader/follower network with state-dependent edge weights.

An access edge ``(i, j)`` means agent ``i`` reads agent ``j``'s state, so
influence flows ``j -> i``. Agent ids are 0-based in the Python API.
"""
from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ArgumentError, ConstraintViolation, ValidationError


class AgentRole(str, enum.Enum):
    LEADER = "leader"
    FOLLOWER = "follower"


def topology_problems(roles, edges, delta):
    """Structural problems as ``(field_path, message)`` pairs; empty if valid."""
    problems = []
    n = len(roles)
    if n == 0:
        problems.append(("agents", "at least one agent is required"))
    for idx, r in enumerate(roles):
        if not isinstance(r, AgentRole):
            problems.append((f"agents[{idx}].role", f"unknown role {r!r}"))
    if AgentRole.LEADER not in roles:
        problems.append(("agents", "at least one leader is required"))
    if AgentRole.FOLLOWER not in roles:
        problems.append(("agents", "at least one follower is required"))
    try:
        delta_ok = float(delta) > 0 and np.isfinite(float(delta))
    except (TypeError, ValueError):
        delta_ok = False
    if not delta_ok:
        problems.append(("controller.delta", "threshold delta must be a positive finite number"))

    seen = set()
    for idx, edge in enumerate(edges):
        path = f"edges[{idx}]"
        if len(edge) != 2:
            problems.append((path, "an edge is a pair (reader, source)"))
            continue
        i, j = edge
        if not (0 <= i < n and 0 <= j < n):
            problems.append((path, f"endpoint out of range for {n} agents"))
            continue
        if i == j:
            problems.append((path, f"self-loop on agents[{i}]"))
        elif (i, j) in seen:
            problems.append((path, f"duplicate edge agents[{i}] -> agents[{j}]"))
        elif roles[i] is AgentRole.LEADER:
            problems.append((path, f"leader agents[{i}] cannot read another agent's state"))
        seen.add((i, j))

    for i, r in enumerate(roles):
        if r is AgentRole.FOLLOWER and not any(e[0] == i for e in seen):
            problems.append((f"agents[{i}]", "follower has no neighbors"))
    return problems


@dataclass(frozen=True)
class NetworkTopology:
    roles: tuple
    access_edges: tuple
    delta: float

    def __post_init__(self):
        roles = tuple(AgentRole(r) if isinstance(r, str) else r for r in self.roles)
        edges = [tuple(int(x) for x in e) for e in self.access_edges]
        # validate in the given order so that edge paths point at the input
        problems = topology_problems(roles, edges, self.delta)
        if problems:
            raise ValidationError(problems)
        object.__setattr__(self, "roles", roles)
        object.__setattr__(self, "access_edges", tuple(sorted(edges)))
        object.__setattr__(self, "delta", float(self.delta))

    @property
    def n(self) -> int:
        return len(self.roles)

    @property
    def followers(self) -> tuple:
        return tuple(i for i, r in enumerate(self.roles) if r is AgentRole.FOLLOWER)

    @property
    def leaders(self) -> tuple:
        return tuple(i for i, r in enumerate(self.roles) if r is AgentRole.LEADER)

    def is_leader(self, i) -> bool:
        return self.roles[i] is AgentRole.LEADER

    def neighbors(self, i) -> tuple:
        return tuple(j for a, j in self.access_edges if a == i)

    def with_edges(self, edges: Iterable) -> "NetworkTopology":
        return NetworkTopology(self.roles, tuple(edges), self.delta)


def as_states(states) -> np.ndarray:
    q = np.asarray(states, dtype=float)
    if q.ndim == 1:
        q = q[:, None]
    if q.ndim != 2 or q.shape[1] < 1:
        raise ArgumentError("states must be an (n, d) array")
    if not np.all(np.isfinite(q)):
        raise ArgumentError("states must be finite")
    return q


def social_difference(q_i, q_j) -> float:
    """Squared Euclidean distance ``||q_i - q_j||^2``."""
    a = np.atleast_1d(np.asarray(q_i, dtype=float))
    b = np.atleast_1d(np.asarray(q_j, dtype=float))
    if a.shape != b.shape:
        raise ArgumentError(f"dimension mismatch: {a.shape} vs {b.shape}")
    diff = a - b
    return float(np.dot(diff, diff))


def edge_margin(topology: NetworkTopology, states, i, j) -> float:
    """``delta - S_ij`` for an existing access edge; positive while the bond holds."""
    if (i, j) not in topology.access_edges:
        raise ArgumentError(f"({i}, {j}) is not an access edge")
    q = as_states(states)
    return topology.delta - social_difference(q[i], q[j])


def edge_margins(topology: NetworkTopology, states) -> np.ndarray:
    q = as_states(states)
    edges = np.asarray(topology.access_edges, dtype=int)
    diff = q[edges[:, 0]] - q[edges[:, 1]]
    return topology.delta - np.einsum("ij,ij->i", diff, diff)


def check_assumption_one(topology: NetworkTopology) -> frozenset:
    """Followers that no leader can influence; empty means the assumption holds.

    Influence travels against access edges, so this is a breadth-first
    search from the leader set over reversed edges.
    """
    influences = {i: [] for i in range(topology.n)}
    for reader, source in topology.access_edges:
        influences[source].append(reader)
    reached = set(topology.leaders)
    queue = deque(reached)
    while queue:
        v = queue.popleft()
        for w in influences[v]:
            if w not in reached:
                reached.add(w)
                queue.append(w)
    return frozenset(i for i in topology.followers if i not in reached)


@dataclass(frozen=True)
class InteractionMatrix:
    """Follower rows of the closed-loop matrix for ``alpha = 1``.

    ``entries[r]`` is the row of follower ``follower_index[r]``; columns are
    agent ids.
    """

    entries: np.ndarray
    follower_index: tuple

    def embedded(self) -> np.ndarray:
        """Full ``n x n`` matrix with zero rows for the (stationary) leaders."""
        n = self.entries.shape[1]
        full = np.zeros((n, n))
        full[list(self.follower_index)] = self.entries
        return full

    def row_sums(self) -> np.ndarray:
        return self.entries.sum(axis=1)


def is_metzler(matrix, tol=0.0) -> bool:
    m = np.asarray(matrix, dtype=float)
    off = m[~np.eye(m.shape[0], dtype=bool)]
    return bool(np.all(off >= -tol))


def assemble_pi_matrix(topology: NetworkTopology, states, gains, k) -> InteractionMatrix:
    """Interaction matrix ``pi``: ``K_i m_ik`` off the diagonal, minus the row total on it.

    Raises
    ------
    ConstraintViolation
        Some access edge has margin ``<= 0``.
    """
    from .potential import ControllerParams, potential_breakdown

    q = as_states(states)
    params = gains if isinstance(gains, ControllerParams) else ControllerParams(k=k, gains=gains)
    for (i, j), b in zip(topology.access_edges, edge_margins(topology, q)):
        if b <= 0:
            raise ConstraintViolation(f"edge ({i}, {j}) has margin {b:.3g} <= 0", edge=(i, j), margin=b)

    followers = topology.followers
    entries = np.zeros((len(followers), topology.n))
    for r, i in enumerate(followers):
        parts = potential_breakdown(q, topology, params, i)
        gain = params.gain(i)
        for j, m in parts.m_coeffs.items():
            entries[r, j] = gain * m
        entries[r, i] = -sum(gain * m for m in parts.m_coeffs.values())
    return InteractionMatrix(entries=entries, follower_index=followers)


def metzler_laplacian(adjacency: Sequence) -> np.ndarray:
    """``L = A - D`` with ``D = diag(row sums of A)``."""
    a = np.asarray(adjacency, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ArgumentError("adjacency must be square")
    if np.any(a < 0):
        raise ArgumentError("adjacency entries must be nonnegative")
    if np.any(np.diag(a) != 0):
        raise ArgumentError("adjacency must have a zero diagonal")
    lap = a.copy()
    lap[np.diag_indices_from(lap)] = -a.sum(axis=1)
    return lap
