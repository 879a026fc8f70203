"""Event-trigger machinery: dynamic thresholds, firing predicates, broadcasts.

Three trigger families share one structure and differ in details:

* family 1 -- leader-state observers of the leader-connected group.  The
  broadcast is *flowed*: between fires the last sample is propagated by the
  leader dynamics, so the neighbours compare against ``e^{A0 (t - t_k)} z(t_k)``.
  The threshold's disagreement weight is adaptive (reciprocal in-degree).
* family 2 -- leader-matrix estimates of the remote group.  Held broadcast;
  the late-time floor term enters as a plain constant.
* family 3 -- leader-state observers of the remote group.  Held broadcast.

Every machine fires mandatorily at t = 0.  The threshold state ``phi`` obeys
an ODE driven by the measurement error, the neighbourhood disagreement and
two positive floor terms; while the predicate stays quiet, ``phi`` admits the
lower bound ``phi(0) * exp(-(beta + 1/omega) t)``.
"""

from dataclasses import dataclass

import numpy as np

from . import numerics

__all__ = [
    "TriggerParams",
    "TriggerMachine",
    "ZenoReport",
    "phi_deriv",
    "phi_tail",
    "theta_adaptive",
    "predicate",
    "zeno_guard",
]

FAMILIES = (1, 2, 3)


@dataclass(frozen=True)
class TriggerParams:
    """Parameters of one trigger family (positive unless noted).

    ``theta`` is ignored by family 1, whose disagreement weight is the
    reciprocal of the (time-varying) in-degree.  ``h`` is the quadratic
    weight on the measurement error; ``None`` means identity.  Family 2
    ignores ``sigma_hat`` (its floor term is the constant ``tau_hat``).
    """

    family: int
    beta: float = 1.0
    gamma: float = 1.0
    tau: float = 0.1
    delta: float = 1.0
    sigma: float = 1.0
    tau_hat: float = 0.1
    sigma_hat: float = 1.0
    omega: float = 1.0
    theta: float = 1.0
    phi0: float = 1.0
    h: tuple = None  # nested tuple for hashability; None = identity

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"family must be one of {FAMILIES}")
        for name in ("beta", "gamma", "tau", "delta", "sigma",
                     "tau_hat", "sigma_hat", "omega", "theta"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        if self.phi0 <= 0:
            raise ValueError("phi0 must be > 0")
        if self.beta + 1.0 / self.omega <= 0:
            raise ValueError("beta + 1/omega must be > 0")

    def h_matrix(self, dim):
        if self.h is None:
            return np.eye(dim)
        return np.asarray(self.h, dtype=float)

    def decay_rate(self):
        """Exponent of the guaranteed threshold floor."""
        return self.beta + 1.0 / self.omega

    def to_dict(self):
        d = {
            "family": self.family, "beta": self.beta, "gamma": self.gamma,
            "tau": self.tau, "delta": self.delta, "sigma": self.sigma,
            "tau_hat": self.tau_hat, "sigma_hat": self.sigma_hat,
            "omega": self.omega, "theta": self.theta, "phi0": self.phi0,
        }
        if self.h is not None:
            d["h"] = [list(row) for row in self.h]
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "h" in d and d["h"] is not None:
            d["h"] = tuple(tuple(row) for row in d["h"])
        return cls(**d)


def theta_adaptive(d_i):
    """Adaptive disagreement weight of family 1: reciprocal in-degree."""
    if d_i <= 0:
        raise ValueError(f"agent degree must be positive, got {d_i}")
    return 1.0 / d_i


def phi_tail(params, t):
    """The two positive floor terms of the threshold dynamics at time ``t``."""
    slow = params.tau * np.exp(-params.delta / (params.sigma + t))
    if params.family == 2:
        fast = params.tau_hat
    else:
        fast = params.tau_hat / (params.sigma_hat + t)
    return slow + fast


def _quad(params, e_v):
    e_v = np.asarray(e_v, dtype=float)
    h = params.h_matrix(e_v.shape[0])
    return float(e_v @ h @ e_v)


def phi_deriv(params, phi, e_v, psi, t, theta=None):
    """Right-hand side of the threshold ODE.

    ``theta`` overrides the stored disagreement weight (family 1 passes the
    reciprocal degree here); it must be positive.
    """
    th = params.theta if theta is None else theta
    if th <= 0:
        raise ValueError("disagreement weight theta must be positive")
    psi = np.asarray(psi, dtype=float)
    return (
        -params.beta * phi
        - params.gamma * _quad(params, e_v)
        + float(psi @ psi) / th
        + phi_tail(params, t)
    )


def predicate(params, phi, e_v, psi, t, theta=None):
    """True when the machine must fire.

    Fires when the weighted measurement error outruns the disagreement term,
    the floor terms and the dynamic threshold.  The disagreement coefficient
    is ``1/theta`` in all families, mirroring its sign-reversed appearance in
    the threshold ODE.
    """
    th = params.theta if theta is None else theta
    if th <= 0:
        raise ValueError("disagreement weight theta must be positive")
    psi = np.asarray(psi, dtype=float)
    lhs = params.omega * (
        params.gamma * _quad(params, e_v)
        - float(psi @ psi) / th
        - phi_tail(params, t)
    )
    return bool(lhs >= phi)


class TriggerMachine:
    """Trigger state of one agent: threshold, last fire, broadcast snapshot.

    This object is the behavioural reference used by the tests and by the
    slow simulation path; the production integrator keeps the same state in
    flat arrays.
    """

    def __init__(self, family, params, dim):
        if params.family != family:
            raise ValueError("params family mismatch")
        self.family = family
        self.params = params
        self.dim = dim
        self.phi = params.phi0
        self.t_last = None
        self.snapshot = None
        self.event_log = []

    @property
    def fired(self):
        return self.t_last is not None

    def fire(self, current_value, t):
        """Install ``current_value`` as the broadcast snapshot at time ``t``."""
        if self.fired:
            if t <= self.t_last:
                raise ValueError(
                    f"fire times must be strictly increasing: {t} after {self.t_last}"
                )
        current_value = np.asarray(current_value, dtype=float)
        if current_value.shape != (self.dim,):
            raise ValueError("snapshot dimension mismatch")
        self.snapshot = current_value.copy()
        self.t_last = float(t)
        self.event_log.append(float(t))

    def broadcast_value(self, a0, t):
        """Value the neighbours see at time ``t``.

        Family 1 flows the snapshot with the leader dynamics; families 2 and
        3 hold it.
        """
        if not self.fired:
            raise RuntimeError("machine has not fired yet")
        if t < self.t_last:
            raise ValueError(f"t={t} precedes last fire at {self.t_last}")
        if self.family == 1:
            return numerics.expm(a0, t - self.t_last) @ self.snapshot
        return self.snapshot.copy()

    def measurement_error(self, current_value, a0, t):
        """Deviation between broadcast and current value.

        Families 1 and 3 report broadcast minus current; family 2 reports
        current minus broadcast.  Only the magnitude enters the predicate.
        """
        current_value = np.asarray(current_value, dtype=float)
        b = self.broadcast_value(a0, t)
        if self.family == 2:
            return current_value - b
        return b - current_value


@dataclass(frozen=True)
class ZenoReport:
    machines: dict  # key -> stats dict
    dt: float
    horizon: float

    @property
    def passed(self):
        return all(s["ok"] for s in self.machines.values())


def zeno_guard(event_logs, dt, horizon):
    """Inter-event statistics and grid-consistency checks per machine.

    ``event_logs`` maps a machine key to its sorted fire times.  A machine
    passes when its fire times are strictly increasing with gaps >= dt; a
    single-event log reports the horizon as its (vacuous) minimum gap.
    """
    stats = {}
    for key, times in event_logs.items():
        times = list(times)
        count = len(times)
        if count >= 2:
            gaps = np.diff(times)
            min_gap = float(gaps.min())
            mean_gap = float(gaps.mean())
            increasing = bool(np.all(gaps > 0))
            ok = increasing and min_gap >= dt - 1e-12
        else:
            min_gap = float(horizon)
            mean_gap = float(horizon)
            increasing = True
            ok = True
        stats[key] = {
            "count": count,
            "min_gap": min_gap,
            "mean_gap": mean_gap,
            "strictly_increasing": increasing,
            "ok": ok,
        }
    return ZenoReport(machines=stats, dt=dt, horizon=horizon)
