"""Two-group weighted communication graph and its fault-perturbed snapshots.

Followers split into a leader-connected group (the first ``m`` agents) and a
remote group (the remaining ``N - m``).  Within-group links are undirected
(symmetric weight matrices), cross-group and leader links are directed.
Each declared edge may carry a reference to a disturbance channel; a
:class:`WeightSnapshot` freezes the perturbed weights and every derived
block matrix (degrees, Laplacians, leader-weight diagonals) at one instant.
"""

from dataclasses import dataclass, field

import numpy as np

from .faults import comm_delta

__all__ = [
    "TopologySpec",
    "WeightSnapshot",
    "ValidationReport",
    "validate",
    "effective_weights",
    "adjacency_sum",
    "AssumptionViolation",
]

BLOCKS = ("a11", "a22", "a12", "a21")
VECTOR_BLOCKS = ("g0", "gl")


class AssumptionViolation(RuntimeError):
    """A runtime weight left the regime the design assumptions require."""


@dataclass(frozen=True)
class TopologySpec:
    """Nominal weights of the two-group digraph plus fault-channel wiring.

    ``a11[i, j]`` is the weight on the edge from follower ``j`` to follower
    ``i`` inside group 1 (both zero-based within the group); ``a12`` carries
    group-2 -> group-1 edges and ``a21`` the reverse.  ``g0`` holds
    leader -> follower weights for the first group, ``gl`` the
    follower -> leader weights (the two may differ).  ``fault_refs`` maps an
    edge key, e.g. ``("a11", 0, 1)`` or ``("g0", 2)``, to a disturbance
    channel id.
    """

    m: int
    a11: np.ndarray
    a22: np.ndarray
    a12: np.ndarray
    a21: np.ndarray
    g0: np.ndarray
    gl: np.ndarray
    fault_refs: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("a11", "a22", "a12", "a21", "g0", "gl"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        m, k = self.m, self.a22.shape[0]
        expected = {"a11": (m, m), "a22": (k, k), "a12": (m, k), "a21": (k, m)}
        for name, shape in expected.items():
            got = getattr(self, name).shape
            if got != shape:
                raise ValueError(f"{name} has shape {got}, expected {shape}")
        if self.g0.shape != (m,) or self.gl.shape != (m,):
            raise ValueError("g0/gl must have one entry per group-1 follower")

    @property
    def n_followers(self):
        return self.m + self.a22.shape[0]

    def block(self, name):
        if name not in BLOCKS + VECTOR_BLOCKS:
            raise KeyError(f"unknown block {name!r}")
        return getattr(self, name)


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple  # of (name, passed, detail)

    @property
    def passed(self):
        return all(ok for _, ok, _ in self.checks)

    def failures(self):
        return [(name, detail) for name, ok, detail in self.checks if not ok]


def _leader_reachability(spec):
    """Followers reachable from the leader along directed information flow."""
    n = spec.n_followers
    m = spec.m
    # full follower adjacency: entry [i, j] > 0 means j sends to i
    adj = np.zeros((n, n))
    adj[:m, :m] = spec.a11
    adj[:m, m:] = spec.a12
    adj[m:, :m] = spec.a21
    adj[m:, m:] = spec.a22
    reached = set(np.nonzero(spec.g0 > 0)[0].tolist())
    frontier = list(reached)
    while frontier:
        j = frontier.pop()
        for i in np.nonzero(adj[:, j] > 0)[0]:
            if i not in reached:
                reached.add(int(i))
                frontier.append(int(i))
    return reached


def validate(spec, fault_bounds=None):
    """Check the graph assumptions; returns a report, never raises.

    ``fault_bounds`` maps channel id -> disturbance amplitude and is used to
    confirm that every perturbed weight stays strictly positive
    (nominal weight minus amplitude > 0 on each declared edge).
    """
    fault_bounds = fault_bounds or {}
    checks = []

    # Assumption 1: every follower can be reached from the leader.
    reached = _leader_reachability(spec)
    missing = sorted(set(range(spec.n_followers)) - reached)
    checks.append((
        "assumption1_path_to_leader",
        not missing,
        "all followers reachable" if not missing
        else f"followers without a leader path: {[i + 1 for i in missing]}",
    ))

    # Assumption 2: in-group blocks symmetric with zero diagonal.
    sym_ok = True
    detail = "a11, a22 symmetric with zero diagonal"
    for name in ("a11", "a22"):
        a = spec.block(name)
        if not np.array_equal(a, a.T):
            sym_ok, detail = False, f"{name} is not symmetric"
            break
        if np.any(np.diag(a) != 0):
            sym_ok, detail = False, f"{name} has a nonzero diagonal"
            break
    checks.append(("assumption2_symmetric_groups", sym_ok, detail))

    neg = [
        name for name in BLOCKS + VECTOR_BLOCKS
        if np.any(spec.block(name) < 0)
    ]
    checks.append((
        "nonnegative_weights", not neg,
        "all nominal weights >= 0" if not neg else f"negative weights in {neg}",
    ))

    # Assumption 3: perturbed weights stay strictly positive.
    bad = []
    for key, channel in spec.fault_refs.items():
        block = spec.block(key[0])
        nominal = block[key[1:]] if len(key) > 2 else block[key[1]]
        amplitude = fault_bounds.get(channel, 0.0)
        if nominal > 0 and nominal - amplitude <= 0:
            bad.append((key, float(nominal), float(amplitude)))
    checks.append((
        "assumption3_positive_weights", not bad,
        "all perturbed weights stay positive" if not bad
        else f"edges where weight - amplitude <= 0: {bad}",
    ))

    return ValidationReport(tuple(checks))


def _perturb(nominal, refs, block_name, channels, t):
    out = np.array(nominal, dtype=float)
    if channels:
        it = np.ndindex(out.shape)
        for idx in it:
            if out[idx] <= 0:
                continue
            key = (block_name, *idx)
            cid = refs.get(key)
            if cid is None:
                continue
            spec = channels.get(cid)
            if spec is not None:
                out[idx] += comm_delta(spec, t)
    return out


def effective_weights(spec, channels, t):
    """Fault-perturbed weights and derived block matrices at time ``t``.

    ``channels`` maps channel id -> :class:`~etconsensus.faults.CommFaultSpec`;
    pass ``None`` (or an empty mapping) for a fault-free snapshot.
    """
    channels = channels or {}
    values = {
        name: _perturb(spec.block(name), spec.fault_refs, name, channels, t)
        for name in BLOCKS + VECTOR_BLOCKS
    }
    for name in BLOCKS + VECTOR_BLOCKS:
        nominal = spec.block(name)
        perturbed = values[name]
        declared = nominal > 0
        if np.any(perturbed[declared] <= 0):
            raise AssumptionViolation(
                f"perturbed weight became non-positive in block {name} at t={t}"
            )
    return WeightSnapshot(t=float(t), **values)


@dataclass(frozen=True)
class WeightSnapshot:
    """Effective weights frozen at one instant, with derived matrices."""

    t: float
    a11: np.ndarray
    a22: np.ndarray
    a12: np.ndarray
    a21: np.ndarray
    g0: np.ndarray
    gl: np.ndarray

    @property
    def d1(self):
        return self.a11.sum(axis=1)

    @property
    def d12(self):
        return self.a12.sum(axis=1)

    @property
    def d2(self):
        return self.a22.sum(axis=1)

    @property
    def d21(self):
        return self.a21.sum(axis=1)

    @property
    def laplacian1(self):
        return np.diag(self.d1) - self.a11

    @property
    def laplacian2(self):
        return np.diag(self.d2) - self.a22

    def block(self, name):
        if name not in BLOCKS:
            raise KeyError(f"unknown adjacency block {name!r}")
        return getattr(self, name)


def adjacency_sum(snapshot, block, i, v_i, neighbor_values):
    """Weighted disagreement sum ``sum_j w_ij (v_j - v_i)`` over one block.

    ``neighbor_values`` maps the neighbour index ``j`` (zero-based within the
    sending group) to its vector; a declared neighbour without a value is an
    error, extra values are ignored.
    """
    weights = snapshot.block(block)[i]
    v_i = np.asarray(v_i, dtype=float)
    total = np.zeros_like(v_i)
    for j, w in enumerate(weights):
        if w <= 0:
            continue
        if j not in neighbor_values:
            raise KeyError(f"missing value for neighbour {j} in block {block}")
        total = total + w * (np.asarray(neighbor_values[j], dtype=float) - v_i)
    return total
