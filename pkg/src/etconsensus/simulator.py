"""Deterministic fixed-step simulation of the full closed loop.

A :class:`Scenario` bundles everything a run needs: topology, agent models,
synthesized gains, fault channels with resolved frequencies, integration
settings and seeded initial conditions.  :func:`run` advances the coupled
leader/plant/observer/threshold system with classical fourth-order
Runge-Kutta steps; trigger predicates are evaluated on the integration grid
after each committed step, so inter-event times are bounded below by the
step size and the whole run is a pure function of the scenario.

The hot loop lives in :mod:`etconsensus._kernel`; :func:`reference_step`
implements the same semantics through the per-agent functions of
:mod:`etconsensus.runtime` and is used to cross-check the kernel.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import numerics, runtime, topology
from ._kernel import STATUS_OK, run_kernel
from .faults import PRNG_ID, actuator_fault

__all__ = [
    "Scenario",
    "WorldState",
    "SimTrace",
    "DivergenceError",
    "run",
    "step",
    "initial_world",
    "reference_step",
]

VERSION = "0.1.0"


class DivergenceError(RuntimeError):
    def __init__(self, t, state_name):
        super().__init__(
            f"state norm exceeded the divergence cap at t={t:.6f} "
            f"(first offending state: {state_name})"
        )
        self.t = t
        self.state_name = state_name


@dataclass
class Scenario:
    """Immutable description of one run."""

    topo: "topology.TopologySpec"
    models: list
    leader: object            # synthesis.LeaderModel
    gains: object             # synthesis.GainSet
    report: object            # synthesis.VerificationReport
    comm_channels: dict       # id -> CommFaultSpec (frequencies resolved)
    actuator_specs: list      # per agent ActuatorFaultSpec
    x0_init: np.ndarray
    x_init: np.ndarray
    dt: float = 1e-3
    t_end: float = 20.0
    seed: int = 42
    record_stride: int = 1
    comm_enabled: bool = True
    actuator_enabled: bool = True
    divergence_cap: float = 1e6
    name: str = "custom"
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.t_end < self.dt:
            raise ValueError("t_end must be at least one step")
        if self.record_stride < 1:
            raise ValueError("record_stride must be >= 1")
        dims = {(mdl.n, mdl.p, mdl.q) for mdl in self.models}
        if len(dims) != 1:
            raise ValueError(
                "the integrator requires all agents to share state/input/"
                "output dimensions"
            )

    @property
    def m(self):
        return self.topo.m

    @property
    def n_followers(self):
        return self.topo.n_followers

    @property
    def n_steps(self):
        return int(math.ceil(self.t_end / self.dt - 1e-12))

    def dims(self):
        mdl = self.models[0]
        return mdl.n, mdl.p, mdl.q, self.leader.n0

    def metadata(self):
        return {
            "name": self.name,
            "seed": self.seed,
            "prng": PRNG_ID,
            "dt": self.dt,
            "t_end": self.t_end,
            "record_stride": self.record_stride,
            "mode": self.gains.mode,
            "kappa": self.gains.kappa,
            "comm_faults": self.comm_enabled,
            "actuator_faults": self.actuator_enabled,
            "gain_hash": self.gains.gain_hash(),
            "version": VERSION,
            "actuator_signals": [
                {"waveforms": list(s.waveforms),
                 "amplitudes": list(s.amplitudes),
                 "frequencies": list(s.frequencies)}
                for s in self.actuator_specs
            ],
        }


class _Layout:
    """Offsets of the packed state vector."""

    def __init__(self, m, nm, n, p, n0):
        self.m, self.nm, self.n, self.p, self.n0 = m, nm, n, p, n0
        big_n = m + nm
        sizes = [
            ("x0", n0), ("x", big_n * n), ("xh", big_n * n),
            ("uh", big_n * p), ("z1", m * n0), ("z2", nm * n0),
            ("ah", nm * n0 * n0), ("phi1", m), ("phi2", nm), ("phi3", nm),
        ]
        self.slices = {}
        off = 0
        for name, size in sizes:
            self.slices[name] = slice(off, off + size)
            off += size
        self.dim = off

    def view(self, y, name):
        m, nm, n, p, n0 = self.m, self.nm, self.n, self.p, self.n0
        big_n = m + nm
        shapes = {
            "x0": (n0,), "x": (big_n, n), "xh": (big_n, n),
            "uh": (big_n, p), "z1": (m, n0), "z2": (nm, n0),
            "ah": (nm, n0 * n0), "phi1": (m,), "phi2": (nm,), "phi3": (nm,),
        }
        return y[self.slices[name]].reshape(shapes[name])

    def state_name(self, idx):
        for name, sl in self.slices.items():
            if sl.start <= idx < sl.stop:
                return f"{name}[{idx - sl.start}]"
        return f"state[{idx}]"


def _layout(scenario):
    n, p, _, n0 = scenario.dims()
    m = scenario.m
    nm = scenario.n_followers - m
    return _Layout(m, nm, n, p, n0)


@dataclass
class WorldState:
    """Packed continuous state plus trigger-machine state at one instant."""

    t: float
    y: np.ndarray
    z1b: np.ndarray
    z2b: np.ndarray
    ahb: np.ndarray
    tl1: np.ndarray
    tl2: np.ndarray
    tl3: np.ndarray
    events: list

    def copy(self):
        return WorldState(
            t=self.t, y=self.y.copy(), z1b=self.z1b.copy(),
            z2b=self.z2b.copy(), ahb=self.ahb.copy(),
            tl1=self.tl1.copy(), tl2=self.tl2.copy(), tl3=self.tl3.copy(),
            events=list(self.events),
        )


def initial_world(scenario):
    """World at t = 0 with the mandatory initial fire of every machine."""
    lay = _layout(scenario)
    y = np.zeros(lay.dim)
    lay.view(y, "x0")[:] = scenario.x0_init
    lay.view(y, "x")[:] = scenario.x_init
    lay.view(y, "phi1")[:] = scenario.gains.trigger1.phi0
    lay.view(y, "phi2")[:] = scenario.gains.trigger2.phi0
    lay.view(y, "phi3")[:] = scenario.gains.trigger3.phi0
    m, nm = lay.m, lay.nm
    events = [(i + 1, 1, 0.0) for i in range(m)]
    events += [(m + i + 1, 2, 0.0) for i in range(nm)]
    events += [(m + i + 1, 3, 0.0) for i in range(nm)]
    return WorldState(
        t=0.0,
        y=y,
        z1b=lay.view(y, "z1").copy(),
        z2b=lay.view(y, "z2").copy(),
        ahb=lay.view(y, "ah").copy(),
        tl1=np.zeros(m), tl2=np.zeros(nm), tl3=np.zeros(nm),
        events=events,
    )


def _pack_gains(scenario, lay):
    gains = scenario.gains
    n, p, q, n0 = scenario.dims()
    m, nm = lay.m, lay.nm
    big_n = m + nm
    arr = {}
    for name, shape in [
        ("a", (big_n, n, n)), ("b", (big_n, n, p)), ("c", (big_n, q, n)),
        ("t1", (big_n, p, n)), ("t2", (big_n, p, n0)), ("x", (big_n, n, n0)),
        ("m3", (big_n, p, n)), ("w", (big_n, n, n)), ("n11", (big_n, p, p)),
        ("n12", (big_n, p, n)), ("n3", (big_n, p, n0)), ("n4", (big_n, p, n0)),
    ]:
        out = np.zeros(shape)
        for k, g in enumerate(gains.agents):
            out[k] = getattr(g, name)
        arr[name] = out
    g1 = gains.group1()
    g2 = gains.group2()
    arr["m11m12"] = np.stack([g.m11 @ g.m12 for g in g1]) if g1 else np.zeros((0, n0, n0))
    arr["m11m1"] = np.stack([g.m11 @ g.m1 for g in g1]) if g1 else np.zeros((0, n0, n0))
    arr["m11m13"] = np.stack([g.m11 @ g.m13 for g in g1]) if g1 else np.zeros((0, n0, n0))
    arr["m21m22"] = np.stack([g.m11 @ g.m12 for g in g2]) if g2 else np.zeros((0, n0, n0))
    arr["m21m23"] = np.stack([g.m11 @ g.m13 for g in g2]) if g2 else np.zeros((0, n0, n0))
    arr["phi2g"] = np.array([g.phi2_gain for g in g2], dtype=float)
    kg = np.zeros((m, n0, n))
    direct = np.zeros(m, dtype=np.int64)
    for idx, kmat in gains.leader_k.items():
        kg[idx - 1] = kmat
        direct[idx - 1] = 1
    arr["kg"] = kg
    arr["direct"] = direct
    return arr


def _pack_channels(scenario):
    """Sorted channel table plus per-edge channel index maps."""
    topo = scenario.topo
    ids = sorted(scenario.comm_channels)
    index = {cid: k for k, cid in enumerate(ids)}
    kindmap = {"sin": 0, "cos": 1}
    camp = np.array([scenario.comm_channels[c].amplitude for c in ids])
    cfreq = np.array([scenario.comm_channels[c].frequency for c in ids])
    ckind = np.array(
        [kindmap[scenario.comm_channels[c].waveform] for c in ids],
        dtype=np.int64,
    )
    cphase = np.array([scenario.comm_channels[c].phase for c in ids])

    def block_map(name, shape):
        out = -np.ones(shape, dtype=np.int64)
        for key, cid in topo.fault_refs.items():
            if key[0] != name or cid not in index:
                continue
            out[key[1:] if len(key) > 2 else key[1]] = index[cid]
        return out

    m = topo.m
    nm = topo.n_followers - m
    return {
        "camp": camp, "cfreq": cfreq, "ckind": ckind, "cphase": cphase,
        "ch11": block_map("a11", (m, m)),
        "ch22": block_map("a22", (nm, nm)),
        "ch12": block_map("a12", (m, nm)),
        "ch21": block_map("a21", (nm, m)),
        "chg0": block_map("g0", (m,)),
        "chgl": block_map("gl", (m,)),
    }


def _pack_actuator(scenario):
    n, p, _, _ = scenario.dims()
    big_n = scenario.n_followers
    kindmap = {"sin": 0, "cos": 1, "const": 2}
    amp = np.zeros((big_n, p))
    freq = np.zeros((big_n, p))
    kind = np.zeros((big_n, p), dtype=np.int64)
    phase = np.zeros((big_n, p))
    for i, spec in enumerate(scenario.actuator_specs):
        for j in range(spec.channels):
            amp[i, j] = spec.amplitudes[j]
            freq[i, j] = spec.frequencies[j]
            kind[i, j] = kindmap[spec.waveforms[j]]
            phase[i, j] = spec.phases[j]
    return amp, freq, kind, phase


def _tp_vector(params):
    return np.array([
        params.beta, params.gamma, params.tau, params.delta, params.sigma,
        params.tau_hat, params.sigma_hat, params.omega, params.theta,
    ])


def _kernel_args(scenario, lay):
    gains = scenario.gains
    n, p, q, n0 = scenario.dims()
    topo = scenario.topo
    arr = _pack_gains(scenario, lay)
    ch = _pack_channels(scenario)
    aamp, afreq, akind, aphase = _pack_actuator(scenario)
    return dict(
        a0=gains.a0.copy(),
        e_dt=numerics.expm(gains.a0, scenario.dt),
        ar=numerics.vec(gains.a0),
        c0=gains.c0.copy(),
        ag=arr["a"], bg=arr["b"], cg=arr["c"], t1g=arr["t1"], t2g=arr["t2"],
        xgg=arr["x"], m3g=arr["m3"], wgg=arr["w"], n11g=arr["n11"],
        n12g=arr["n12"], n3g=arr["n3"], n4g=arr["n4"],
        m11m12=arr["m11m12"], m11m1=arr["m11m1"], m11m13=arr["m11m13"],
        m21m22=arr["m21m22"], m21m23=arr["m21m23"],
        phi2g=arr["phi2g"], kg=arr["kg"], direct_mask=arr["direct"],
        a11n=topo.a11.copy(), a22n=topo.a22.copy(),
        a12n=topo.a12.copy(), a21n=topo.a21.copy(),
        g0n=topo.g0.copy(), gln=topo.gl.copy(),
        ch11=ch["ch11"], ch22=ch["ch22"], ch12=ch["ch12"], ch21=ch["ch21"],
        chg0=ch["chg0"], chgl=ch["chgl"],
        camp=ch["camp"], cfreq=ch["cfreq"], ckind=ch["ckind"],
        cphase=ch["cphase"],
        aamp=aamp, afreq=afreq, akind=akind, aphase=aphase,
        tp1=_tp_vector(gains.trigger1),
        tp2=_tp_vector(gains.trigger2),
        tp3=_tp_vector(gains.trigger3),
        h1=gains.trigger1.h_matrix(n0),
        h3=gains.trigger3.h_matrix(n0),
    )


def _advance(scenario, world, n_steps, stride):
    """Run the kernel for ``n_steps`` from ``world`` (not mutated)."""
    lay = _layout(scenario)
    args = _kernel_args(scenario, lay)
    w = world.copy()
    n_rec = n_steps // stride + 1
    big_n = lay.m + lay.nm
    rec_t = np.zeros(n_rec)
    rec_y = np.zeros((n_rec, lay.dim))
    rec_u = np.zeros((n_rec, big_n, lay.p))
    max_events = (lay.m + 2 * lay.nm) * (n_steps + 1) + 1
    events = np.zeros((max_events, 3))
    status, bad_step, n_events, got_rec = run_kernel(
        n_steps, scenario.dt, stride, scenario.divergence_cap,
        1 if scenario.gains.mode == "crm" else 0,
        scenario.comm_enabled, scenario.actuator_enabled,
        world.t,
        **args,
        y=w.y, z1b=w.z1b, z2b=w.z2b, ahb=w.ahb,
        tl1=w.tl1, tl2=w.tl2, tl3=w.tl3,
        rec_t=rec_t, rec_y=rec_y, rec_u=rec_u,
        events=events,
    )
    new_events = [
        (int(events[k, 0]), int(events[k, 1]), float(events[k, 2]))
        for k in range(n_events)
    ]
    w.events = w.events + new_events
    w.t = world.t + bad_step * scenario.dt
    if status != STATUS_OK:
        # re-run the guard on the committed state to name the offender
        bad = np.nonzero(~np.isfinite(w.y)
                         | (np.abs(w.y) > scenario.divergence_cap))[0]
        name = lay.state_name(int(bad[0])) if bad.size else "unknown"
        raise DivergenceError(w.t, name)
    return w, rec_t[:got_rec], rec_y[:got_rec], rec_u[:got_rec]


def step(world, scenario):
    """One committed integration step; pure in (world, scenario)."""
    new_world, _, _, _ = _advance(scenario, world, 1, 2)
    return new_world


@dataclass
class SimTrace:
    """Time-indexed record of one run."""

    t: np.ndarray
    x0: np.ndarray
    y0: np.ndarray
    x: np.ndarray
    y: np.ndarray
    u: np.ndarray
    xh: np.ndarray
    uh: np.ndarray
    zeta: np.ndarray
    ah: np.ndarray
    phi1: np.ndarray
    phi2: np.ndarray
    phi3: np.ndarray
    events: list
    meta: dict
    gains: object = None

    @property
    def n_agents(self):
        return self.x.shape[1]

    @property
    def m(self):
        return self.phi1.shape[1]

    @property
    def n_steps(self):
        return int(round(self.meta["t_end"] / self.meta["dt"]))

    def machine_events(self):
        """Events grouped per machine key (agent one-based, family)."""
        out = {}
        for agent, family, t in self.events:
            out.setdefault((agent, family), []).append(t)
        return out

    def dims(self):
        s, big_n, n = self.x.shape
        return {
            "agents": big_n, "m": int(self.m), "n": n,
            "p": self.u.shape[2], "q": self.y.shape[2],
            "n0": self.x0.shape[1], "samples": s,
        }

    def to_csv_dir(self, out_dir):
        """Write states.csv, observers.csv and events.csv under ``out_dir``.

        Times carry 12 significant digits; reruns of the same scenario
        produce byte-identical files.
        """
        import os

        os.makedirs(out_dir, exist_ok=True)
        d = self.dims()
        big_n, n, p, q, n0 = d["agents"], d["n"], d["p"], d["q"], d["n0"]
        m = d["m"]

        cols = ["t"]
        data = [self.t[:, None]]
        cols += [f"x0_{r + 1}" for r in range(n0)]
        data.append(self.x0)
        cols += [f"y0_{r + 1}" for r in range(q)]
        data.append(self.y0)
        for k in range(big_n):
            cols += [f"a{k + 1}_x{r + 1}" for r in range(n)]
            data.append(self.x[:, k, :])
            cols += [f"a{k + 1}_y{r + 1}" for r in range(q)]
            data.append(self.y[:, k, :])
            cols += [f"a{k + 1}_u{r + 1}" for r in range(p)]
            data.append(self.u[:, k, :])
        _write_csv(os.path.join(out_dir, "states.csv"), cols, data)

        cols = ["t"]
        data = [self.t[:, None]]
        for k in range(big_n):
            cols += [f"a{k + 1}_xh{r + 1}" for r in range(n)]
            data.append(self.xh[:, k, :])
            cols += [f"a{k + 1}_uh{r + 1}" for r in range(p)]
            data.append(self.uh[:, k, :])
            cols += [f"a{k + 1}_z{r + 1}" for r in range(n0)]
            data.append(self.zeta[:, k, :])
        for k in range(m):
            cols.append(f"a{k + 1}_phi1")
            data.append(self.phi1[:, k][:, None])
        for j in range(big_n - m):
            k = m + j
            cols += [f"a{k + 1}_ah{r + 1}" for r in range(n0 * n0)]
            data.append(self.ah[:, j, :])
            cols.append(f"a{k + 1}_phi2")
            data.append(self.phi2[:, j][:, None])
            cols.append(f"a{k + 1}_phi3")
            data.append(self.phi3[:, j][:, None])
        _write_csv(os.path.join(out_dir, "observers.csv"), cols, data)

        ev = np.array(
            [[a, f, t] for a, f, t in self.events], dtype=float
        ).reshape(-1, 3)
        _write_csv(os.path.join(out_dir, "events.csv"),
                   ["agent_id", "family", "fire_time"], [ev])

    @classmethod
    def from_csv_dir(cls, out_dir, meta, gains=None):
        """Rebuild a trace from :meth:`to_csv_dir` output plus metadata."""
        import os

        d = meta["dims"]
        big_n, n, p, q, n0, m = (d["agents"], d["n"], d["p"], d["q"],
                                 d["n0"], d["m"])
        nm = big_n - m
        states = _read_csv(os.path.join(out_dir, "states.csv"))
        observers = _read_csv(os.path.join(out_dir, "observers.csv"))
        events_raw = _read_csv(os.path.join(out_dir, "events.csv"))

        def grab(table, names):
            return np.stack([table[name] for name in names], axis=1)

        t = states["t"]
        x0 = grab(states, [f"x0_{r + 1}" for r in range(n0)])
        y0 = grab(states, [f"y0_{r + 1}" for r in range(q)])
        x = np.stack([grab(states, [f"a{k + 1}_x{r + 1}" for r in range(n)])
                      for k in range(big_n)], axis=1)
        y = np.stack([grab(states, [f"a{k + 1}_y{r + 1}" for r in range(q)])
                      for k in range(big_n)], axis=1)
        u = np.stack([grab(states, [f"a{k + 1}_u{r + 1}" for r in range(p)])
                      for k in range(big_n)], axis=1)
        xh = np.stack([grab(observers, [f"a{k + 1}_xh{r + 1}" for r in range(n)])
                       for k in range(big_n)], axis=1)
        uh = np.stack([grab(observers, [f"a{k + 1}_uh{r + 1}" for r in range(p)])
                       for k in range(big_n)], axis=1)
        zeta = np.stack([grab(observers, [f"a{k + 1}_z{r + 1}" for r in range(n0)])
                         for k in range(big_n)], axis=1)
        phi1 = grab(observers, [f"a{k + 1}_phi1" for k in range(m)]) \
            if m else np.zeros((t.size, 0))
        if nm:
            ah = np.stack(
                [grab(observers,
                      [f"a{m + j + 1}_ah{r + 1}" for r in range(n0 * n0)])
                 for j in range(nm)], axis=1)
            phi2 = grab(observers, [f"a{m + j + 1}_phi2" for j in range(nm)])
            phi3 = grab(observers, [f"a{m + j + 1}_phi3" for j in range(nm)])
        else:
            ah = np.zeros((t.size, 0, n0 * n0))
            phi2 = np.zeros((t.size, 0))
            phi3 = np.zeros((t.size, 0))
        events = [
            (int(a), int(f), float(ft))
            for a, f, ft in zip(events_raw["agent_id"], events_raw["family"],
                                events_raw["fire_time"])
        ]
        return cls(t=t, x0=x0, y0=y0, x=x, y=y, u=u, xh=xh, uh=uh,
                   zeta=zeta, ah=ah, phi1=phi1, phi2=phi2, phi3=phi3,
                   events=events, meta=meta["meta"], gains=gains)


def _write_csv(path, cols, blocks):
    data = np.hstack(blocks) if blocks else np.zeros((0, len(cols)))
    with open(path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        np.savetxt(fh, data, fmt="%.12g", delimiter=",")


def _read_csv(path):
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if data.size == 0:
        data = data.reshape(0, len(header))
    return {name: data[:, k] for k, name in enumerate(header)}


def run(scenario):
    """Simulate the scenario from the seeded initial world."""
    world = initial_world(scenario)
    n_steps = scenario.n_steps
    world, rec_t, rec_y, rec_u = _advance(
        scenario, world, n_steps, scenario.record_stride
    )
    lay = _layout(scenario)
    n, p, q, n0 = scenario.dims()
    s = rec_t.shape[0]
    big_n = lay.m + lay.nm

    def series(name):
        sl = lay.slices[name]
        m, nm = lay.m, lay.nm
        shapes = {
            "x0": (s, n0), "x": (s, big_n, n), "xh": (s, big_n, n),
            "uh": (s, big_n, p), "z1": (s, m, n0), "z2": (s, nm, n0),
            "ah": (s, nm, n0 * n0), "phi1": (s, m), "phi2": (s, nm),
            "phi3": (s, nm),
        }
        return rec_y[:, sl].reshape(shapes[name])

    x = series("x")
    zeta = np.concatenate([series("z1"), series("z2")], axis=1)
    cg = np.stack([g.c for g in scenario.gains.agents])
    y = np.einsum("kqn,skn->skq", cg, x)
    x0 = series("x0")
    y0 = x0 @ scenario.gains.c0.T
    return SimTrace(
        t=rec_t, x0=x0, y0=y0, x=x, y=y, u=rec_u,
        xh=series("xh"), uh=series("uh"), zeta=zeta, ah=series("ah"),
        phi1=series("phi1"), phi2=series("phi2"), phi3=series("phi3"),
        events=world.events, meta=scenario.metadata(), gains=scenario.gains,
    )


# ---------------------------------------------------------------------------
# readable reference path (used by the tests to pin the kernel semantics)

def _reference_rhs(scenario, lay, y, t, bc, snap, frozen):
    gains = scenario.gains
    a0 = gains.a0
    m, nm = lay.m, lay.nm
    dy = np.zeros_like(y)
    x0 = lay.view(y, "x0")
    xs = lay.view(y, "x")
    xhs = lay.view(y, "xh")
    uhs = lay.view(y, "uh")
    z1 = lay.view(y, "z1")
    z2 = lay.view(y, "z2")
    ah = lay.view(y, "ah")
    phi = {1: lay.view(y, "phi1"), 2: lay.view(y, "phi2"),
           3: lay.view(y, "phi3")}

    ua = np.zeros((m + nm, lay.p))
    if scenario.actuator_enabled:
        for k, spec in enumerate(scenario.actuator_specs):
            ua[k] = actuator_fault(spec, t)

    direct = []
    for idx, kmat in gains.leader_k.items():
        g = gains.agents[idx - 1]
        direct.append((xs[idx - 1], g.x, snap.gl[idx - 1], kmat))
    lay.view(dy, "x0")[:] = runtime.leader_deriv(a0, gains.mode, x0, direct)

    for gi in range(m + nm):
        g = gains.agents[gi]
        if g.group == 1:
            li = gi
            zeta = z1[li]
            u = runtime.control1(g, li, xhs[gi], zeta, x0, uhs[gi], bc, snap)
            lay.view(dy, "z1")[li] = runtime.zeta1_deriv(
                g, li, zeta, x0, bc, snap, a0)
        else:
            li = gi - m
            zeta = z2[li]
            u = runtime.control2(g, li, xhs[gi], zeta, uhs[gi], bc, snap)
            lay.view(dy, "z2")[li] = runtime.zeta2_deriv(
                g, li, zeta, ah[li], bc, snap)
            lay.view(dy, "ah")[li] = runtime.ahat_deriv(
                g.phi2_gain, li, bc, snap, numerics.vec(a0))
        lay.view(dy, "x")[gi] = runtime.plant_deriv(g, xs[gi], u, ua[gi])
        dxh, duh = runtime.fault_observer_deriv(
            g, xs[gi], xhs[gi], uhs[gi], u)
        lay.view(dy, "xh")[gi] = dxh
        lay.view(dy, "uh")[gi] = duh

    from .triggers import phi_deriv
    for fam, params in ((1, gains.trigger1), (2, gains.trigger2),
                        (3, gains.trigger3)):
        dphi = lay.view(dy, f"phi{fam}")
        for li in range(m if fam == 1 else nm):
            e_v, psi, theta = frozen[(fam, li)]
            dphi[li] = phi_deriv(params, phi[fam][li], e_v, psi, t,
                                 theta=theta)
    return dy


def _reference_frozen(scenario, lay, y, bc, snap):
    """Measurement errors and disagreement sums held during one step."""
    gains = scenario.gains
    m, nm = lay.m, lay.nm
    z1 = lay.view(y, "z1")
    z2 = lay.view(y, "z2")
    ah = lay.view(y, "ah")
    a_r = numerics.vec(gains.a0)
    frozen = {}
    for li in range(m):
        e_v = bc.z1[li] - z1[li]
        psi = runtime.psi_zeta1(li, bc, snap)
        frozen[(1, li)] = (e_v, psi, 1.0 / snap.d1[li])
    for li in range(nm):
        frozen[(2, li)] = (ah[li] - bc.ah[li],
                           runtime.psi_ahat(li, bc, snap, a_r), None)
        frozen[(3, li)] = (bc.z2[li] - z2[li],
                           runtime.psi_zeta2(li, bc, snap), None)
    return frozen


def reference_step(scenario, world):
    """Pure-python replica of one kernel step, for testing."""
    from .triggers import predicate

    lay = _layout(scenario)
    gains = scenario.gains
    w = world.copy()
    y = w.y
    t = w.t
    dt = scenario.dt
    snap = topology.effective_weights(
        scenario.topo,
        scenario.comm_channels if scenario.comm_enabled else None, t)
    bc = runtime.Broadcasts(z1=w.z1b, z2=w.z2b, ah=w.ahb)
    frozen = _reference_frozen(scenario, lay, y, bc, snap)

    k1 = _reference_rhs(scenario, lay, y, t, bc, snap, frozen)
    k2 = _reference_rhs(scenario, lay, y + 0.5 * dt * k1, t + 0.5 * dt,
                        bc, snap, frozen)
    k3 = _reference_rhs(scenario, lay, y + 0.5 * dt * k2, t + 0.5 * dt,
                        bc, snap, frozen)
    k4 = _reference_rhs(scenario, lay, y + dt * k3, t + dt, bc, snap, frozen)
    w.y = y + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    t_next = t + dt

    e_dt = numerics.expm(gains.a0, dt)
    w.z1b = w.z1b @ e_dt.T
    snap2 = topology.effective_weights(
        scenario.topo,
        scenario.comm_channels if scenario.comm_enabled else None, t_next)
    bc2 = runtime.Broadcasts(z1=w.z1b, z2=w.z2b, ah=w.ahb)
    frozen2 = _reference_frozen(scenario, lay, w.y, bc2, snap2)

    fires = []
    for fam, params in ((1, gains.trigger1), (2, gains.trigger2),
                        (3, gains.trigger3)):
        for li in range(lay.m if fam == 1 else lay.nm):
            e_v, psi, theta = frozen2[(fam, li)]
            if predicate(params, lay.view(w.y, f"phi{fam}")[li],
                         e_v, psi, t_next, theta=theta):
                fires.append((fam, li))
    for fam, li in fires:
        if fam == 1:
            w.z1b[li] = lay.view(w.y, "z1")[li].copy()
            w.tl1[li] = t_next
            w.events.append((li + 1, 1, t_next))
        elif fam == 2:
            w.ahb[li] = lay.view(w.y, "ah")[li].copy()
            w.tl2[li] = t_next
            w.events.append((lay.m + li + 1, 2, t_next))
        else:
            w.z2b[li] = lay.view(w.y, "z2")[li].copy()
            w.tl3[li] = t_next
            w.events.append((lay.m + li + 1, 3, t_next))
    w.t = t_next
    return w
