"""Per-agent continuous dynamics: plants, observers, estimators, controllers.

These are the scalar-path reference semantics: pure functions of the state,
the frozen broadcast values and one weight snapshot.  The production
integrator evaluates the same formulas over stacked arrays; the tests pin
the two paths against each other.

Broadcast containers hold one row per agent, group-local: ``z1`` are the
group-1 leader observations (flowed between fires), ``z2`` the group-2 ones
(held), ``ah`` the group-2 leader-matrix estimates (held, column-stacked).
Group-2 functions never receive the leader state or the leader matrix; the
remote group only ever sees broadcasts, relayed constants and its own
estimates.
"""

from dataclasses import dataclass

import numpy as np

from . import numerics

__all__ = [
    "Broadcasts",
    "plant_deriv",
    "plant_output",
    "fault_observer_deriv",
    "leader_deriv",
    "zeta1_deriv",
    "ahat_deriv",
    "zeta2_deriv",
    "control1",
    "control2",
    "psi_zeta1",
    "psi_zeta2",
    "psi_ahat",
]


@dataclass
class Broadcasts:
    """Current broadcast values, group-local rows."""

    z1: np.ndarray   # (m, n0)
    z2: np.ndarray   # (N - m, n0)
    ah: np.ndarray   # (N - m, n0*n0)


def plant_deriv(model, x, u_cmd, u_a):
    """Plant dynamics; the actuator fault adds to the commanded input."""
    if x.shape[0] != model.a.shape[0] or u_cmd.shape[0] != model.b.shape[1]:
        raise numerics.DimensionError("plant dimension mismatch")
    return model.a @ x + model.b @ (u_cmd + u_a)


def plant_output(model, x):
    return model.c @ x


def fault_observer_deriv(gains, x, xh, uh, u_cmd):
    """Joint actuator-fault estimator and state observer.

    The estimator integrates the state-estimation error through the
    injection gain with a proportional leak; the observer runs the plant
    model driven by the command plus the *estimated* fault.
    """
    err = x - xh
    duh = -gains.n11 @ uh + gains.n12 @ err
    dxh = gains.a @ xh + gains.b @ u_cmd + gains.b @ uh + gains.w @ err
    return dxh, duh


def leader_deriv(a0, mode, x0, direct=()):
    """Leader dynamics, autonomous or with direct-follower feedback.

    ``direct`` lists ``(x_j, x_gain_j, g_j0, k_j)`` tuples for every direct
    follower when the closed-loop mode is active.
    """
    dx0 = a0 @ x0
    if mode == "crm":
        for x_j, x_gain, g_j0, k_j in direct:
            dx0 = dx0 + k_j @ (g_j0 * (x_j - x_gain @ x0))
    return dx0


def psi_zeta1(i, bc, snapshot):
    """Group-1 broadcast disagreement sum for agent ``i`` (group-local)."""
    w = snapshot.a11[i]
    return (w[:, None] * (bc.z1 - bc.z1[i])).sum(axis=0)


def psi_zeta2(i, bc, snapshot):
    """Group-2 broadcast disagreement sum for agent ``i`` (group-local)."""
    w = snapshot.a22[i]
    return (w[:, None] * (bc.z2 - bc.z2[i])).sum(axis=0)


def psi_ahat(i, bc, snapshot, a_r):
    """Leader-matrix estimator consensus drive for group-2 agent ``i``."""
    w2 = snapshot.a22[i]
    w21 = snapshot.a21[i]
    own = bc.ah[i]
    s = (w2[:, None] * (bc.ah - own)).sum(axis=0)
    s = s + w21.sum() * (a_r - own)
    return s


def zeta1_deriv(gains, i, zeta_i, x0, bc, snapshot, a0):
    """Leader-state observer of a group-1 agent.

    The consensus correction compares broadcasts; the leader injection uses
    the continuous estimate and the true leader state (the first group reads
    the leader directly) through the perturbed leader weight.
    """
    cross = (snapshot.a12[i][:, None] * (bc.z2 - bc.z1[i])).sum(axis=0)
    xi = (
        gains.m12 @ psi_zeta1(i, bc, snapshot)
        + snapshot.g0[i] * (gains.m1 @ (x0 - zeta_i))
        + gains.m13 @ cross
    )
    return a0 @ zeta_i + gains.m11 @ xi


def ahat_deriv(phi2_gain, i, bc, snapshot, a_r):
    """Leader-matrix estimate dynamics of a group-2 agent.

    Driven entirely by held broadcasts: neighbour estimates within the
    group, and the exact vectorised leader matrix relayed over the
    group-1 links.  Constant between trigger commits.
    """
    return phi2_gain * psi_ahat(i, bc, snapshot, a_r)


def zeta2_deriv(gains, i, zeta_i, ah_i, bc, snapshot):
    """Leader-state observer of a group-2 agent.

    The drift matrix is rebuilt from the agent's own leader-matrix estimate
    at every evaluation; corrections mix group-2 held broadcasts and the
    flowed group-1 broadcasts.
    """
    n0 = zeta_i.shape[0]
    a_tilde = numerics.mat(ah_i, n0, n0)
    cross = (snapshot.a21[i][:, None] * (bc.z1 - bc.z2[i])).sum(axis=0)
    xi = gains.m12 @ psi_zeta2(i, bc, snapshot) + gains.m13 @ cross
    return a_tilde @ zeta_i + gains.m11 @ xi


def control1(gains, i, xh, zeta_i, x0, uh, bc, snapshot):
    """Group-1 control law.

    Fault cancellation, stabilising feedback, feedforward along the leader
    estimate, regulation of the observer mismatch, and two consensus
    corrections: the broadcast disagreement and the direct leader error.
    """
    return (
        -uh
        + gains.t1 @ xh
        + gains.t2 @ zeta_i
        + gains.m3 @ (xh - gains.x @ zeta_i)
        + gains.n3 @ psi_zeta1(i, bc, snapshot)
        + gains.n4 @ (zeta_i - x0)
    )


def control2(gains, i, xh, zeta_i, uh, bc, snapshot):
    """Group-2 control law; no direct leader access."""
    return (
        -uh
        + gains.t1 @ xh
        + gains.t2 @ zeta_i
        + gains.m3 @ (xh - gains.x @ zeta_i)
        + gains.n3 @ psi_zeta2(i, bc, snapshot)
    )
