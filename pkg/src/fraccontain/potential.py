"""Decentralized navigation-function influence law.

For follower ``i`` with neighbor set ``N_i``:

* goal ``gamma_i = sum_j 0.5 * ||q_i - q_j||^2``
* constraint ``beta_i = 0.5 * prod_j b_ij`` with margins ``b_ij = delta - S_ij``
* potential ``phi_i = gamma_i / (gamma_i^k + beta_i)^(1/k)``
* input ``u_i = -K_i * grad phi_i = -K_i * sum_j m_ij (q_i - q_j)``
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError, RoleError, UndefinedPointError
from .social_graph import NetworkTopology, as_states, social_difference


@dataclass(frozen=True)
class ControllerParams:
    """Tuning exponent ``k`` and positive gains ``K_i``.

    ``gains`` is either one number applied to every follower or a sequence
    indexed by agent id (entries for leaders are ignored).
    """

    k: float = 2.0
    gains: object = 1.0

    def __post_init__(self):
        if not (float(self.k) > 0 and math.isfinite(float(self.k))):
            raise ArgumentError("tuning exponent k must be positive")
        object.__setattr__(self, "k", float(self.k))
        if np.ndim(self.gains) == 0:
            g = float(self.gains)
            if not g > 0:
                raise ArgumentError("gain K must be positive")
            object.__setattr__(self, "gains", g)
        else:
            gs = tuple(float(g) for g in self.gains)
            if not all(g > 0 for g in gs):
                raise ArgumentError("all gains K_i must be positive")
            object.__setattr__(self, "gains", gs)

    def gain(self, i) -> float:
        return self.gains if isinstance(self.gains, float) else self.gains[i]

    def gain_vector(self, n) -> np.ndarray:
        if isinstance(self.gains, float):
            return np.full(n, self.gains)
        if len(self.gains) != n:
            raise ArgumentError(f"expected {n} gains, got {len(self.gains)}")
        return np.asarray(self.gains)


@dataclass(frozen=True)
class PotentialBreakdown:
    gamma: float
    beta: float
    phi: float
    m_coeffs: dict = field(default_factory=dict)
    gradient: np.ndarray = None


def _follower_neighbors(topology, i):
    if topology.is_leader(i):
        raise RoleError(f"agent {i} is a leader; the potential is defined for followers only")
    nbrs = topology.neighbors(i)
    if not nbrs:
        raise ArgumentError(f"follower {i} has no neighbors")
    return nbrs


def goal_value(states, topology: NetworkTopology, i) -> float:
    q = as_states(states)
    return sum(0.5 * social_difference(q[i], q[j]) for j in _follower_neighbors(topology, i))


def _margins(q, topology, i, nbrs):
    return [topology.delta - social_difference(q[i], q[j]) for j in nbrs]


def constraint_value(states, topology: NetworkTopology, i) -> float:
    """Half the product of neighbor margins. A value ``<= 0`` means a bond broke."""
    q = as_states(states)
    nbrs = _follower_neighbors(topology, i)
    return 0.5 * math.prod(_margins(q, topology, i, nbrs))


def potential_value(gamma, beta, k) -> float:
    if gamma == 0 and beta == 0:
        raise UndefinedPointError("potential undefined at gamma = beta = 0")
    if gamma == 0:
        return 0.0
    return gamma / (gamma**k + beta) ** (1.0 / k)


def m_coefficient(gamma, beta, b_bar, k) -> float:
    """Weight ``m_ij = (k beta + b_bar gamma) / (k (gamma^k + beta)^(1/k + 1))``."""
    base = gamma**k + beta
    if base <= 0:
        raise UndefinedPointError("gamma^k + beta must be positive")
    return (k * beta + b_bar * gamma) / (k * base ** (1.0 / k + 1.0))


def potential_breakdown(states, topology: NetworkTopology, params: ControllerParams, i) -> PotentialBreakdown:
    """All intermediate quantities of follower ``i``'s potential and its gradient."""
    q = as_states(states)
    nbrs = _follower_neighbors(topology, i)
    k = params.k
    gamma = sum(0.5 * social_difference(q[i], q[j]) for j in nbrs)
    margins = _margins(q, topology, i, nbrs)
    beta = 0.5 * math.prod(margins)
    phi = potential_value(gamma, beta, k)
    coeffs = {}
    grad = np.zeros(q.shape[1])
    for pos, j in enumerate(nbrs):
        # empty product is 1 for a single neighbor
        b_bar = math.prod(b for l, b in enumerate(margins) if l != pos)
        m = m_coefficient(gamma, beta, b_bar, k)
        coeffs[j] = m
        grad += m * (q[i] - q[j])
    return PotentialBreakdown(gamma=gamma, beta=beta, phi=phi, m_coeffs=coeffs, gradient=grad)


def potential_gradient(states, topology: NetworkTopology, params: ControllerParams, i) -> np.ndarray:
    return potential_breakdown(states, topology, params, i).gradient


def control_input(states, topology: NetworkTopology, params: ControllerParams, i) -> np.ndarray:
    """``-K_i * grad phi_i`` for followers; leaders get the zero vector."""
    q = as_states(states)
    if topology.is_leader(i):
        return np.zeros(q.shape[1])
    return -params.gain(i) * potential_gradient(q, topology, params, i)
