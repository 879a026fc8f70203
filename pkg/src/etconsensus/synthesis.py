"""Offline gain synthesis and numeric verification of the design conditions.

For every agent this computes, in order: a stabilising state feedback, the
output-regulation pair (X, Y), the feedforward gain, the actuator-fault /
state observer gains, the matching gains that align the consensus
corrections with the input channel, and a decay-rate certificate for the
combined feedback.  A separate check assembles the stacked
leader-observer network matrix over a sweep of weight snapshots and
verifies a uniform Hurwitz margin, replacing the feasibility argument that
is usually waved through by diagonal dominance.
"""

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from . import numerics, topology
from .triggers import TriggerParams

__all__ = [
    "AgentModel",
    "LeaderModel",
    "AgentGains",
    "GainSet",
    "SynthesisDefaults",
    "SynthesisError",
    "VerificationReport",
    "stabilize",
    "solve_regulator",
    "feedforward",
    "design_fault_observer",
    "solve_matching",
    "verify_decay",
    "verify_observer_network",
    "design_leader_feedback",
    "synthesize_all",
    "controllability_rank",
]

REGULATOR_TOL = 1e-8
MATCHING_TOL = 1e-8


class SynthesisError(RuntimeError):
    pass


@dataclass(frozen=True)
class AgentModel:
    """LTI triple of one follower plus its group membership (1 or 2)."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    group: int

    def __post_init__(self):
        object.__setattr__(self, "a", np.asarray(self.a, dtype=float))
        object.__setattr__(self, "b", np.asarray(self.b, dtype=float))
        object.__setattr__(self, "c", np.asarray(self.c, dtype=float))
        n = self.a.shape[0]
        if self.a.shape != (n, n):
            raise ValueError("a must be square")
        if self.b.shape[0] != n or self.c.shape[1] != n:
            raise ValueError("b/c dimensions inconsistent with a")
        if self.group not in (1, 2):
            raise ValueError("group must be 1 or 2")

    @property
    def n(self):
        return self.a.shape[0]

    @property
    def p(self):
        return self.b.shape[1]

    @property
    def q(self):
        return self.c.shape[0]


@dataclass(frozen=True)
class LeaderModel:
    """Reference model: autonomous, or driven by its direct followers."""

    a0: np.ndarray
    c0: np.ndarray
    mode: str = "crm"  # "crm" | "orm"
    kappa: float = 0.2

    def __post_init__(self):
        object.__setattr__(self, "a0", np.asarray(self.a0, dtype=float))
        object.__setattr__(self, "c0", np.asarray(self.c0, dtype=float))
        if self.mode not in ("crm", "orm"):
            raise ValueError("mode must be 'crm' or 'orm'")

    @property
    def n0(self):
        return self.a0.shape[0]

    def observability_rank(self):
        n0 = self.n0
        blocks = [self.c0]
        for _ in range(n0 - 1):
            blocks.append(blocks[-1] @ self.a0)
        return int(np.linalg.matrix_rank(np.vstack(blocks)))

    def spectrum_on_imaginary_axis(self, tol=1e-9):
        eigs = np.linalg.eigvals(self.a0)
        return bool(
            np.all(np.abs(eigs.real) <= tol) and np.all(np.abs(eigs) > tol)
        )


def controllability_rank(a, b):
    n = a.shape[0]
    blocks = [b]
    for _ in range(n - 1):
        blocks.append(a @ blocks[-1])
    return int(np.linalg.matrix_rank(np.hstack(blocks)))


def stabilize(a, b, target_poles):
    """Feedback ``t1`` placing the eigenvalues of ``a + b @ t1``.

    Invertible ``b`` admits the exact deterministic solution
    ``b^{-1} (diag(poles) - a)``; otherwise the Tits-Yang placement from
    scipy is used.  All target poles must have negative real part.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    poles = np.sort(np.asarray(target_poles, dtype=float))
    n = a.shape[0]
    if poles.shape[0] != n:
        raise SynthesisError(f"need {n} target poles, got {poles.shape[0]}")
    if np.any(poles >= 0):
        raise SynthesisError("target poles must be strictly negative")
    if controllability_rank(a, b) < n:
        raise SynthesisError("(a, b) is not controllable")
    if b.shape[0] == b.shape[1] and abs(np.linalg.det(b)) > 1e-12:
        t1 = np.linalg.solve(b, np.diag(poles) - a)
    else:
        from scipy.signal import place_poles

        t1 = -place_poles(a, b, poles).gain_matrix
    margin = numerics.hurwitz_margin(a + b @ t1)
    if margin > poles.max() + 1e-6:
        raise SynthesisError(
            f"pole placement missed target: margin {margin:+.3e}"
        )
    return t1


def solve_regulator(a, b, c, a0, c0, label=None, tol=REGULATOR_TOL):
    """Minimum-norm (X, Y) with ``X a0 = a X + b Y`` and ``c X = c0``.

    The two matrix equations are stacked into one Kronecker-vectorised
    linear system and solved for the minimum-norm solution; a residual
    above ``tol`` means the regulator equations are unsolvable for this
    agent.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    a0 = np.asarray(a0, dtype=float)
    c0 = np.asarray(c0, dtype=float)
    n, p, n0 = a.shape[0], b.shape[1], a0.shape[0]
    q = c.shape[0]
    eye_n0 = np.eye(n0)
    # rows: vec(X a0 - a X - b Y) = 0  and  vec(c X) = vec(c0)
    top = np.hstack([
        np.kron(a0.T, np.eye(n)) - np.kron(eye_n0, a),
        -np.kron(eye_n0, b),
    ])
    bottom = np.hstack([np.kron(eye_n0, c), np.zeros((q * n0, p * n0))])
    system = np.vstack([top, bottom])
    rhs = np.concatenate([np.zeros(n * n0), numerics.vec(c0)])
    z, residual = numerics.solve_least_norm(system, rhs)
    if residual > tol:
        who = f" for agent {label}" if label is not None else ""
        raise SynthesisError(
            f"regulator equations unsolvable{who} (residual {residual:.3e})"
        )
    x = numerics.mat(z[: n * n0], n, n0)
    y = numerics.mat(z[n * n0:], p, n0)
    return x, y, residual


def feedforward(t1, x, y):
    """Feedforward gain ``t2 = y - t1 @ x``."""
    t1 = np.asarray(t1, dtype=float)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if t1.shape[1] != x.shape[0] or y.shape != (t1.shape[0], x.shape[1]):
        raise numerics.DimensionError("feedforward shape mismatch")
    return y - t1 @ x


@dataclass(frozen=True)
class FaultObserverGains:
    w: np.ndarray
    n11: np.ndarray
    n12: np.ndarray
    q: np.ndarray
    appendix_value: float  # alpha2 + alpha3*n11_scale - n11_scale, must be < 0


def design_fault_observer(a, b, observer_poles, n11_scale=5.0,
                          alpha2=1.0, alpha3=0.5):
    """Observer/estimator gains for the actuator-fault observer.

    ``w = a - diag(poles)`` places the state-error dynamics exactly at the
    requested poles; ``q`` is the Lyapunov certificate of ``a - w``, the
    injection gain is ``b^T q`` (the transpose convention that makes the
    cross terms in the stability argument cancel), and the estimator leak
    is ``n11_scale * I``.  The scalar inequality
    ``alpha2 + alpha3*n11_scale - n11_scale < 0`` is evaluated and recorded.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    poles = np.asarray(observer_poles, dtype=float)
    if poles.shape[0] != a.shape[0]:
        raise SynthesisError("observer pole count must match state dimension")
    if np.any(poles >= 0):
        raise SynthesisError("observer poles must be strictly negative")
    if n11_scale <= 0:
        raise SynthesisError("n11_scale must be positive")
    w = a - np.diag(poles)
    q = numerics.lyapunov_solve(a - w, np.eye(a.shape[0]))
    n12 = b.T @ q
    n11 = n11_scale * np.eye(b.shape[1])
    value = alpha2 + alpha3 * n11_scale - n11_scale
    return FaultObserverGains(w=w, n11=n11, n12=n12, q=q, appendix_value=value)


def solve_matching(x, m11, m12, m1, g1_entry, b, group, tol=MATCHING_TOL):
    """Matching gains aligning observer corrections with the input channel.

    Group 1 solves ``b n3 = x m11 m12`` and ``b n4 = -x m11 m1 * g1_entry``
    (nominal leader weight); group 2 solves only the first equation.
    Returns ``(n3, n4, residuals)`` with ``n4 = None`` for group 2.
    """
    x = np.asarray(x, dtype=float)
    b = np.asarray(b, dtype=float)
    n0 = x.shape[1]
    p = b.shape[1]

    def least_norm_matrix(rhs):
        system = np.kron(np.eye(n0), b)
        sol, residual = numerics.solve_least_norm(system, numerics.vec(rhs))
        return numerics.mat(sol, p, n0), residual

    n3, r3 = least_norm_matrix(x @ m11 @ m12)
    residuals = [r3]
    n4 = None
    if group == 1:
        n4, r4 = least_norm_matrix(-(x @ m11 @ m1) * float(g1_entry))
        residuals.append(r4)
    if max(residuals) > tol:
        raise SynthesisError(
            f"matching equations infeasible (residuals {residuals}); "
            "consider rescaling the observer M gains"
        )
    return n3, n4, residuals


def verify_decay(a, b, t1, m3):
    """Decay-rate certificate of the combined feedback ``t1 + m3``.

    Returns ``(alpha_tilde, p2)`` where ``alpha_tilde = -2 * margin`` of
    ``a + b (t1 + m3)`` and ``p2`` its Lyapunov certificate.
    """
    acl = np.asarray(a, dtype=float) + np.asarray(b, dtype=float) @ (
        np.asarray(t1, dtype=float) + np.asarray(m3, dtype=float)
    )
    margin = numerics.hurwitz_margin(acl)
    if margin >= 0:
        raise SynthesisError(
            f"combined feedback is not stabilising (margin {margin:+.3e})"
        )
    p2 = numerics.lyapunov_solve(acl, np.eye(acl.shape[0]))
    return -2.0 * margin, p2


def observer_network_matrix(snapshot, gains_group1, a0):
    """Stacked group-1 leader-observer system matrix for one snapshot."""
    m = len(gains_group1)
    n0 = a0.shape[0]
    lap = snapshot.laplacian1
    d12 = snapshot.d12
    e1 = np.zeros((m * n0, m * n0))
    for i, g in enumerate(gains_group1):
        rows = slice(i * n0, (i + 1) * n0)
        e1[rows, rows] = (
            a0
            - g.m11 @ g.m1 * snapshot.g0[i]
            - g.m11 @ g.m13 * d12[i]
            - g.m11 @ g.m12 * lap[i, i]
        )
        for j in range(m):
            if j == i:
                continue
            cols = slice(j * n0, (j + 1) * n0)
            e1[rows, cols] = -g.m11 @ g.m12 * lap[i, j]
    return e1


def verify_observer_network(snapshots, gains_group1, a0, margin_min=0.1):
    """Worst Hurwitz margin of the stacked observer matrix over snapshots.

    Passes when the margin stays below ``-margin_min`` at every sample.
    """
    margins = [
        numerics.hurwitz_margin(observer_network_matrix(s, gains_group1, a0))
        for s in snapshots
    ]
    worst = max(margins)
    return {
        "margin": worst,
        "margin_min": margin_min,
        "samples": len(margins),
        "passed": bool(worst <= -margin_min),
    }


def design_leader_feedback(x_j, kappa):
    """Leader feedback gain ``kappa * pinv(X_j)``; ``kappa = 0`` disables it."""
    if kappa < 0:
        raise SynthesisError("kappa must be >= 0")
    if kappa == 0.0:
        x_j = np.asarray(x_j, dtype=float)
        return np.zeros((x_j.shape[1], x_j.shape[0]))
    return kappa * np.linalg.pinv(np.asarray(x_j, dtype=float))


@dataclass
class AgentGains:
    """Every synthesized gain of one agent, plus its model matrices."""

    index: int            # global one-based agent id
    group: int
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    t1: np.ndarray
    t2: np.ndarray
    x: np.ndarray
    y: np.ndarray
    w: np.ndarray
    n11: np.ndarray
    n12: np.ndarray
    q: np.ndarray
    m11: np.ndarray
    m12: np.ndarray
    m13: np.ndarray      # group 1: cross-group weight; group 2: leader-link weight
    m1: np.ndarray       # group 1 only (zeros for group 2)
    m3: np.ndarray
    n3: np.ndarray
    n4: np.ndarray       # group 1 only (zeros for group 2)
    phi2_gain: float     # group 2 leader-matrix estimator gain (0 for group 1)

    def to_dict(self):
        out = {"index": self.index, "group": self.group,
               "phi2_gain": self.phi2_gain}
        for name in ("a", "b", "c", "t1", "t2", "x", "y", "w", "n11", "n12",
                     "q", "m11", "m12", "m13", "m1", "m3", "n3", "n4"):
            out[name] = np.asarray(getattr(self, name)).tolist()
        return out

    @classmethod
    def from_dict(cls, d):
        kwargs = {"index": d["index"], "group": d["group"],
                  "phi2_gain": d["phi2_gain"]}
        for name in ("a", "b", "c", "t1", "t2", "x", "y", "w", "n11", "n12",
                     "q", "m11", "m12", "m13", "m1", "m3", "n3", "n4"):
            kwargs[name] = np.asarray(d[name], dtype=float)
        return cls(**kwargs)


@dataclass
class GainSet:
    """Bundle of all per-agent gains, leader gains and trigger parameters."""

    agents: list
    a0: np.ndarray
    c0: np.ndarray
    mode: str
    kappa: float
    leader_k: dict                 # one-based agent id -> K_j
    trigger1: TriggerParams
    trigger2: TriggerParams
    trigger3: TriggerParams

    def group1(self):
        return [g for g in self.agents if g.group == 1]

    def group2(self):
        return [g for g in self.agents if g.group == 2]

    def to_dict(self):
        return {
            "agents": [g.to_dict() for g in self.agents],
            "a0": self.a0.tolist(),
            "c0": self.c0.tolist(),
            "mode": self.mode,
            "kappa": self.kappa,
            "leader_k": {str(k): v.tolist() for k, v in self.leader_k.items()},
            "trigger1": self.trigger1.to_dict(),
            "trigger2": self.trigger2.to_dict(),
            "trigger3": self.trigger3.to_dict(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            agents=[AgentGains.from_dict(g) for g in d["agents"]],
            a0=np.asarray(d["a0"], dtype=float),
            c0=np.asarray(d["c0"], dtype=float),
            mode=d["mode"],
            kappa=float(d["kappa"]),
            leader_k={int(k): np.asarray(v, dtype=float)
                      for k, v in d["leader_k"].items()},
            trigger1=TriggerParams.from_dict(d["trigger1"]),
            trigger2=TriggerParams.from_dict(d["trigger2"]),
            trigger3=TriggerParams.from_dict(d["trigger3"]),
        )

    def gain_hash(self):
        payload = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class SynthesisDefaults:
    """Free design constants.

    The observer poles sit well left of the controller poles so the state
    estimate settles before regulation relies on it.  The scalar multiples
    of the identity used for the observer M gains keep the matching
    equations exactly solvable whenever B is invertible.
    """

    controller_poles: tuple = (-2.0, -3.0)
    observer_poles: tuple = (-5.0, -6.0)
    n11_scale: float = 5.0
    alpha2: float = 1.0
    alpha3: float = 0.5
    m11_scale: float = 1.0
    m12_scale: float = 2.0
    m1_scale: float = 2.0
    m13_scale: float = 0.5
    m21_scale: float = 1.0
    m22_scale: float = 2.0
    m23_scale: float = 0.5
    m3_poles: tuple = None  # combined-feedback poles; None leaves m3 at zero
    kappa: float = 0.2
    phi2_gain: float = 10.0
    network_margin_min: float = 0.1
    trigger1: TriggerParams = field(default_factory=lambda: TriggerParams(family=1))
    trigger2: TriggerParams = field(default_factory=lambda: TriggerParams(family=2))
    trigger3: TriggerParams = field(default_factory=lambda: TriggerParams(family=3))


@dataclass
class VerificationReport:
    agents: dict            # one-based id -> per-agent numbers
    network: dict
    passed: bool
    errors: list

    def to_dict(self):
        return {
            "agents": self.agents,
            "network": self.network,
            "passed": self.passed,
            "errors": self.errors,
        }


def synthesize_all(models, leader, topo, defaults=None, channels=None,
                   horizon=20.0, n_network_samples=100):
    """Run the full gain pipeline for every agent and verify it.

    Returns ``(GainSet, VerificationReport)``.  Any per-agent failure is
    collected in the report (with the offending agent named) and flips the
    overall flag; an exception is raised only for malformed inputs.
    """
    defaults = defaults or SynthesisDefaults()
    report_agents = {}
    errors = []
    agents = []
    n0 = leader.n0

    vr = topology.validate(topo)
    if not vr.passed:
        raise SynthesisError(f"topology validation failed: {vr.failures()}")
    if leader.observability_rank() < n0:
        errors.append("leader pair (a0, c0) is not observable")
    if not leader.spectrum_on_imaginary_axis():
        errors.append("leader spectrum is not purely imaginary and nonzero")

    nominal = topology.effective_weights(topo, None, 0.0)

    for idx, model in enumerate(models, start=1):
        entry = {"group": model.group}
        try:
            if controllability_rank(model.a, model.b) < model.n:
                raise SynthesisError(f"agent {idx}: (a, b) not controllable")
            t1 = stabilize(model.a, model.b, defaults.controller_poles)
            x, y, reg_res = solve_regulator(
                model.a, model.b, model.c, leader.a0, leader.c0, label=idx
            )
            t2 = feedforward(t1, x, y)
            fo = design_fault_observer(
                model.a, model.b, defaults.observer_poles,
                defaults.n11_scale, defaults.alpha2, defaults.alpha3,
            )
            eye0 = np.eye(n0)
            if model.group == 1:
                m11 = defaults.m11_scale * eye0
                m12 = defaults.m12_scale * eye0
                m13 = defaults.m13_scale * eye0
                m1 = defaults.m1_scale * eye0
                g_entry = nominal.g0[idx - 1]
            else:
                m11 = defaults.m21_scale * eye0
                m12 = defaults.m22_scale * eye0
                m13 = defaults.m23_scale * eye0
                m1 = np.zeros((n0, n0))
                g_entry = 0.0
            if defaults.m3_poles is not None:
                # extra feedback deepening the combined decay rate
                m3 = stabilize(model.a, model.b, defaults.m3_poles) - t1
            else:
                m3 = np.zeros((model.p, model.n))
            n3, n4, match_res = solve_matching(
                x, m11, m12, m1, g_entry, model.b, model.group
            )
            if n4 is None:
                n4 = np.zeros((model.p, n0))
            alpha_tilde, _ = verify_decay(model.a, model.b, t1, m3)

            entry.update({
                "regulator_residual": reg_res,
                "matching_residuals": match_res,
                "controller_margin": numerics.hurwitz_margin(
                    model.a + model.b @ t1),
                "observer_margin": numerics.hurwitz_margin(model.a - fo.w),
                "appendix_value": fo.appendix_value,
                "alpha_tilde": alpha_tilde,
                "ok": fo.appendix_value < 0,
            })
            if fo.appendix_value >= 0:
                errors.append(
                    f"agent {idx}: estimator leak inequality not satisfied"
                )
            agents.append(AgentGains(
                index=idx, group=model.group,
                a=model.a, b=model.b, c=model.c,
                t1=t1, t2=t2, x=x, y=y,
                w=fo.w, n11=fo.n11, n12=fo.n12, q=fo.q,
                m11=m11, m12=m12, m13=m13, m1=m1, m3=m3,
                n3=n3, n4=n4,
                phi2_gain=defaults.phi2_gain if model.group == 2 else 0.0,
            ))
        except (SynthesisError, numerics.NotHurwitzError,
                numerics.DimensionError) as exc:
            entry.update({"ok": False, "error": str(exc)})
            errors.append(f"agent {idx}: {exc}")
        report_agents[idx] = entry

    network = {"margin": np.nan, "passed": False, "samples": 0}
    if not errors or all("agent" not in e.split(":")[0] for e in errors):
        g1 = [g for g in agents if g.group == 1]
        times = np.linspace(0.0, horizon, n_network_samples)
        snaps = [topology.effective_weights(topo, channels, t) for t in times]
        network = verify_observer_network(
            snaps, g1, leader.a0, defaults.network_margin_min
        )
        if not network["passed"]:
            errors.append(
                f"observer network margin {network['margin']:+.3e} "
                f"above -{defaults.network_margin_min}"
            )

    leader_k = {}
    for idx, model in enumerate(models, start=1):
        if model.group == 1 and topo.gl[idx - 1] > 0:
            gains = next((g for g in agents if g.index == idx), None)
            if gains is not None:
                kappa = leader.kappa if leader.mode == "crm" else 0.0
                leader_k[idx] = design_leader_feedback(gains.x, kappa)

    gain_set = GainSet(
        agents=agents, a0=leader.a0, c0=leader.c0,
        mode=leader.mode, kappa=leader.kappa, leader_k=leader_k,
        trigger1=defaults.trigger1, trigger2=defaults.trigger2,
        trigger3=defaults.trigger3,
    )
    report = VerificationReport(
        agents=report_agents, network=network,
        passed=not errors, errors=errors,
    )
    return gain_set, report
