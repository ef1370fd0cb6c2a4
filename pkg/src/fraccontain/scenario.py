"""Scenario files, presets and config hashing.

A scenario is one JSON document::

    {
      "scenario_id": "karate-standin",
      "agents": [{"id": 1, "role": "follower", "state": [0.1, 0.2], "gain": 1.0}, ...],
      "edges": [[1, 8], ...],
      "controller": {"k": 2.0, "delta": 1.0},
      "solver": {"alpha": 0.5, "step": 0.001, "horizon": 50.0,
                 "memory_window": null, "edge_addition": false, "seed": 0},
      "output": {"record_every": 1}
    }

Agent ids in files are 1-based; an edge ``[i, j]`` means agent ``i`` reads
agent ``j``. In Python everything is 0-based.
"""
from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path

import numpy as np

from .engine import ScenarioConfig
from .errors import ValidationError
from .potential import ControllerParams
from .social_graph import AgentRole, NetworkTopology

# Stand-in for the 10-member karate-club subnetwork: agents 1-7 follow,
# 8-10 lead. Follower cycle 1 -> 2 -> 3 -> 1 reads one leader each, so every
# follower is influenced by all three leaders.
KARATE_EDGES = (
    (1, 8), (1, 2),
    (2, 9), (2, 3),
    (3, 10), (3, 1),
    (4, 1), (4, 2),
    (5, 2), (5, 3), (5, 9),
    (6, 4), (6, 5),
    (7, 6), (7, 10), (7, 3),
)
KARATE_LEADERS = ((0.0, 0.0), (1.0, 0.0), (0.5, math.sqrt(3) / 2))
KARATE_DELTA = 1.0
KARATE_DISK_RADIUS = 0.75
MIN_INITIAL_MARGIN = 0.1


def config_to_dict(config: ScenarioConfig) -> dict:
    topo = config.topology
    gains = config.params.gains
    agents = []
    for i, role in enumerate(topo.roles):
        entry = {"id": i + 1, "role": role.value, "state": [float(x) for x in config.initial_states[i]]}
        if role is AgentRole.FOLLOWER and not isinstance(gains, float):
            entry["gain"] = gains[i]
        agents.append(entry)
    controller = {"k": config.params.k, "delta": topo.delta}
    if isinstance(gains, float):
        controller["gain"] = gains
    return {
        "scenario_id": config.scenario_id,
        "agents": agents,
        "edges": [[i + 1, j + 1] for i, j in topo.access_edges],
        "controller": controller,
        "solver": {
            "alpha": config.alpha.alpha,
            "step": config.step,
            "horizon": config.horizon,
            "memory_window": config.memory_window,
            "edge_addition": config.edge_addition,
            "seed": config.seed,
        },
        "output": {"record_every": config.record_every},
    }


def config_from_dict(doc: dict) -> ScenarioConfig:
    """Build a validated config, collecting every problem with its field path."""
    problems = []

    def need(obj, key, path, kind=None):
        if not isinstance(obj, dict) or key not in obj:
            problems.append((path, "missing"))
            return None
        value = obj[key]
        if kind is not None and not isinstance(value, kind):
            problems.append((path, f"expected {kind.__name__ if isinstance(kind, type) else kind}"))
            return None
        return value

    if not isinstance(doc, dict):
        raise ValidationError([("", "scenario must be a JSON object")])
    agents = need(doc, "agents", "agents", list) or []
    edges_doc = need(doc, "edges", "edges", list) or []
    controller = need(doc, "controller", "controller", dict) or {}
    solver = need(doc, "solver", "solver", dict) or {}
    output = doc.get("output", {}) or {}

    roles, states, gains = [], [], []
    ids = []
    for idx, agent in enumerate(agents):
        path = f"agents[{idx}]"
        if not isinstance(agent, dict):
            problems.append((path, "expected an object"))
            continue
        ids.append(agent.get("id"))
        try:
            roles.append(AgentRole(agent.get("role")))
        except ValueError:
            problems.append((f"{path}.role", f"unknown role {agent.get('role')!r}"))
            roles.append(None)
        state = agent.get("state")
        if not isinstance(state, list) or not state or not all(isinstance(x, (int, float)) for x in state):
            problems.append((f"{path}.state", "expected a nonempty list of numbers"))
            state = [math.nan]
        states.append([float(x) for x in state])
        gains.append(agent.get("gain"))
    if ids != list(range(1, len(agents) + 1)):
        problems.append(("agents", "agent ids must be 1..n in order"))
    if len({len(s) for s in states}) > 1:
        problems.append(("agents", "all states must have the same dimension"))

    edges = []
    for idx, e in enumerate(edges_doc):
        if not (isinstance(e, list) and len(e) == 2 and all(isinstance(x, int) for x in e)):
            problems.append((f"edges[{idx}]", "expected [reader_id, source_id]"))
            continue
        edges.append((e[0] - 1, e[1] - 1))

    uniform = controller.get("gain")
    follower_gains = [g for g, r in zip(gains, roles) if r is AgentRole.FOLLOWER]
    if any(g is not None for g in follower_gains):
        if uniform is not None:
            problems.append(("controller.gain", "give either a uniform gain or per-agent gains, not both"))
        gain_value = [1.0 if g is None else g for g in gains]
    else:
        gain_value = 1.0 if uniform is None else uniform

    if problems:
        raise ValidationError(problems)

    try:
        topology = NetworkTopology(tuple(roles), tuple(edges), controller.get("delta"))
    except ValidationError as exc:
        raise ValidationError(exc.errors) from None
    try:
        params = ControllerParams(k=controller.get("k", 2.0), gains=gain_value)
    except ValueError as exc:
        raise ValidationError([("controller", str(exc))]) from None
    try:
        return ScenarioConfig(
            topology=topology,
            initial_states=np.array(states),
            params=params,
            alpha=solver.get("alpha", 1.0),
            step=float(solver.get("step", 1e-3)),
            horizon=float(solver.get("horizon", 50.0)),
            edge_addition=bool(solver.get("edge_addition", False)),
            memory_window=solver.get("memory_window"),
            seed=int(solver.get("seed", 0)),
            record_every=int(output.get("record_every", 1)),
            scenario_id=str(doc.get("scenario_id", "custom")),
        )
    except ValidationError as exc:
        raise ValidationError([(_file_edge_path(path, topology, edges), msg) for path, msg in exc.errors]) from None
    except ValueError as exc:
        raise ValidationError([("solver", str(exc))]) from None


def _file_edge_path(path, topology, file_edges):
    # the topology keeps edges sorted; report positions as written in the file
    if not path.startswith("edges["):
        return path
    edge = topology.access_edges[int(path[6:-1])]
    return f"edges[{file_edges.index(edge)}]"


def load_scenario(path) -> ScenarioConfig:
    """Parse and validate a scenario file.

    Raises ``ValidationError`` (with per-field messages) for bad content and
    ``ValueError``/``OSError`` subclasses for unreadable or malformed JSON.
    """
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError([("", f"invalid JSON: {exc}")]) from None
    return config_from_dict(doc)


def canonical_json(config: ScenarioConfig) -> str:
    return json.dumps(config_to_dict(config), sort_keys=True, separators=(",", ":"))


def save_scenario(config: ScenarioConfig, path) -> None:
    Path(path).write_text(json.dumps(config_to_dict(config), indent=2, sort_keys=True) + "\n")


def config_hash(config: ScenarioConfig) -> str:
    return hashlib.sha256(canonical_json(config).encode()).hexdigest()


def _karate_topology():
    roles = tuple([AgentRole.FOLLOWER] * 7 + [AgentRole.LEADER] * 3)
    edges = tuple((i - 1, j - 1) for i, j in KARATE_EDGES)
    return NetworkTopology(roles, edges, KARATE_DELTA)


def preset_karate(seed: int = 0, *, alpha=1.0, k=2.0, gain=1.0, delta=None, step=1e-3, horizon=50.0,
                  record_every=1, init="disk") -> ScenarioConfig:
    """Ten-agent stand-in for the karate-club scenario (3 leaders, 7 followers, d = 2).

    Followers are drawn from a seeded generator, uniformly in a disk around
    the leader triangle (``init="disk"``) or inside it (``init="inside"``),
    redrawing until every access edge has margin ``>= 0.1 * delta``.
    """
    topo = _karate_topology()
    if delta is not None:
        topo = NetworkTopology(topo.roles, topo.access_edges, delta)
    leaders = np.array(KARATE_LEADERS)
    centre = leaders.mean(axis=0)
    rng = np.random.default_rng(seed)
    edges = np.array(topo.access_edges)
    n_f = len(topo.followers)
    while True:
        if init == "disk":
            radius = KARATE_DISK_RADIUS * np.sqrt(rng.random(n_f))
            angle = 2 * np.pi * rng.random(n_f)
            followers = centre + np.column_stack([radius * np.cos(angle), radius * np.sin(angle)])
        elif init == "inside":
            followers = rng.dirichlet(np.ones(3), size=n_f) @ leaders
        else:
            raise ValueError(f"unknown init {init!r}")
        q = np.vstack([followers, leaders])
        diff = q[edges[:, 0]] - q[edges[:, 1]]
        if np.all(topo.delta - np.einsum("ij,ij->i", diff, diff) >= MIN_INITIAL_MARGIN * topo.delta):
            break
    return ScenarioConfig(
        topology=topo,
        initial_states=q,
        params=ControllerParams(k=k, gains=gain),
        alpha=alpha,
        step=step,
        horizon=horizon,
        seed=seed,
        record_every=record_every,
        scenario_id="karate-standin" if init == "disk" else f"karate-standin-{init}",
    )


def preset_line(seed: int = 0, *, alpha=1.0, k=2.0, gain=1.0, step=1e-3, horizon=20.0, record_every=1):
    """One follower between two 1-d leaders at -1 and +1, reading both."""
    rng = np.random.default_rng(seed)
    follower = rng.uniform(-1.2, 1.2)
    topo = NetworkTopology(
        (AgentRole.FOLLOWER, AgentRole.LEADER, AgentRole.LEADER), ((0, 1), (0, 2)), 5.0
    )
    return ScenarioConfig(
        topology=topo,
        initial_states=np.array([[follower], [-1.0], [1.0]]),
        params=ControllerParams(k=k, gains=gain),
        alpha=alpha,
        step=step,
        horizon=horizon,
        seed=seed,
        record_every=record_every,
        scenario_id="line",
    )


PRESETS = {"karate": preset_karate, "line": preset_line}
