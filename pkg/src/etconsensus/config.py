"""Scenario configuration: a single JSON document describing one experiment.

All numeric data appears as nested arrays of reals, so configs diff cleanly
and round-trip exactly.  Fault-channel frequencies may be given numerically
or as the string ``"seeded"``; seeded draws come from one PCG64 stream in a
documented order (communication channels in sorted id order, actuator
channels in agent order, follower initial states last), so a scenario is a
pure function of its config.
"""

import json

import numpy as np

from . import synthesis, topology
from .faults import ActuatorFaultSpec, CommFaultSpec
from .simulator import Scenario
from .triggers import TriggerParams

__all__ = [
    "ConfigError",
    "load_config",
    "scenario_from_config",
    "auto_fault_refs",
]


class ConfigError(ValueError):
    pass


def load_config(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: parse error at line {exc.lineno}: {exc.msg}")


def auto_fault_refs(topo_cfg):
    """Default channel wiring for every declared edge.

    Undirected in-group edges share one channel per pair so the perturbed
    weight matrices stay symmetric.  Receivers in group 1 get cosine
    channels, receivers in group 2 sine channels; leader->follower weights
    perturb with sines, follower->leader weights with cosines (matching the
    waveform split of the reference experiment).  Ids use one-based global
    agent numbers.
    """
    m = topo_cfg["m"]
    a11 = np.asarray(topo_cfg["a11"], dtype=float)
    a22 = np.asarray(topo_cfg["a22"], dtype=float)
    a12 = np.asarray(topo_cfg["a12"], dtype=float)
    a21 = np.asarray(topo_cfg["a21"], dtype=float)
    g0 = np.asarray(topo_cfg["g0"], dtype=float)
    gl = np.asarray(topo_cfg["gl"], dtype=float)
    refs = {}
    waveforms = {}
    for i in range(a11.shape[0]):
        for j in range(i + 1, a11.shape[1]):
            if a11[i, j] > 0:
                cid = f"a11:{i + 1}-{j + 1}"
                refs[("a11", i, j)] = cid
                refs[("a11", j, i)] = cid
                waveforms[cid] = "cos"
    for i in range(a22.shape[0]):
        for j in range(i + 1, a22.shape[1]):
            if a22[i, j] > 0:
                cid = f"a22:{m + i + 1}-{m + j + 1}"
                refs[("a22", i, j)] = cid
                refs[("a22", j, i)] = cid
                waveforms[cid] = "sin"
    for i in range(a12.shape[0]):
        for j in range(a12.shape[1]):
            if a12[i, j] > 0:
                cid = f"a12:{i + 1}<{m + j + 1}"
                refs[("a12", i, j)] = cid
                waveforms[cid] = "cos"
    for i in range(a21.shape[0]):
        for j in range(a21.shape[1]):
            if a21[i, j] > 0:
                cid = f"a21:{m + i + 1}<{j + 1}"
                refs[("a21", i, j)] = cid
                waveforms[cid] = "sin"
    for i in range(g0.shape[0]):
        if g0[i] > 0:
            cid = f"g0:{i + 1}"
            refs[("g0", i)] = cid
            waveforms[cid] = "sin"
    for i in range(gl.shape[0]):
        if gl[i] > 0:
            cid = f"gl:{i + 1}"
            refs[("gl", i)] = cid
            waveforms[cid] = "cos"
    return refs, waveforms


def _build_topology(cfg):
    topo_cfg = cfg["topology"]
    refs_cfg = topo_cfg.get("fault_refs")
    if refs_cfg is None:
        refs, _ = auto_fault_refs(topo_cfg)
    else:
        refs = {}
        for key, cid in refs_cfg.items():
            block, idx = key.split(":")
            parts = tuple(int(v) for v in idx.split(","))
            refs[(block, *parts)] = cid
    return topology.TopologySpec(
        m=int(topo_cfg["m"]),
        a11=topo_cfg["a11"], a22=topo_cfg["a22"],
        a12=topo_cfg["a12"], a21=topo_cfg["a21"],
        g0=topo_cfg["g0"], gl=topo_cfg["gl"],
        fault_refs=refs,
    )


def _comm_channel_plan(cfg, topo):
    """Ordered channel list: (id, waveform, amplitude, frequency|None)."""
    faults_cfg = cfg.get("faults", {})
    amplitude = float(faults_cfg.get("comm_amplitude", 0.25))
    explicit = faults_cfg.get("comm_channels")
    _, waveforms = auto_fault_refs(cfg["topology"])
    plan = []
    ids = sorted(set(topo.fault_refs.values()))
    for cid in ids:
        entry = (explicit or {}).get(cid, {})
        wf = entry.get("waveform", waveforms.get(cid, "cos"))
        amp = float(entry.get("amplitude", amplitude))
        freq = entry.get("frequency", "seeded")
        plan.append((cid, wf, amp, None if freq == "seeded" else float(freq)))
    return plan


def _actuator_plan(cfg, n_agents, p):
    faults_cfg = cfg.get("faults", {})
    spec = faults_cfg.get(
        "actuator",
        {"waveforms": ["sin", "cos"], "amplitudes": [0.3, 0.4],
         "frequencies": "seeded"},
    )
    specs = spec if isinstance(spec, list) else [spec] * n_agents
    if len(specs) != n_agents:
        raise ConfigError("faults.actuator list must have one entry per agent")
    plan = []
    for entry in specs:
        wf = tuple(entry["waveforms"])
        if len(wf) != p:
            raise ConfigError(
                f"actuator fault must declare {p} channels, got {len(wf)}"
            )
        amps = tuple(float(v) for v in entry["amplitudes"])
        freqs = entry.get("frequencies", "seeded")
        plan.append((wf, amps, None if freqs == "seeded" else tuple(freqs)))
    return plan


def _synthesis_defaults(cfg):
    syn = dict(cfg.get("synthesis", {}))
    trig = {}
    for fam in (1, 2, 3):
        entry = dict(syn.pop(f"trigger{fam}", {}))
        entry["family"] = fam
        trig[fam] = TriggerParams.from_dict(entry)
    for key in ("controller_poles", "observer_poles", "m3_poles"):
        if key in syn and syn[key] is not None:
            syn[key] = tuple(float(v) for v in syn[key])
    return synthesis.SynthesisDefaults(
        trigger1=trig[1], trigger2=trig[2], trigger3=trig[3], **syn
    )


def scenario_from_config(cfg, overrides=None):
    """Validate a config document and assemble a runnable scenario.

    ``overrides`` may replace the top-level scalars (seed, dt, t_end, mode,
    kappa, record_stride, comm/actuator enable flags) before assembly.
    """
    cfg = json.loads(json.dumps(cfg))  # deep copy; also rejects non-JSON data
    for key, value in (overrides or {}).items():
        if value is not None:
            cfg[key] = value

    for key in ("agents", "leader", "topology"):
        if key not in cfg:
            raise ConfigError(f"config is missing the {key!r} section")

    topo = _build_topology(cfg)
    models = [
        synthesis.AgentModel(
            a=entry["a"], b=entry["b"], c=entry["c"],
            group=1 if idx < topo.m else 2,
        )
        for idx, entry in enumerate(cfg["agents"])
    ]
    if len(models) != topo.n_followers:
        raise ConfigError(
            f"{len(models)} agent models for {topo.n_followers} followers"
        )
    leader = synthesis.LeaderModel(
        a0=cfg["leader"]["a0"], c0=cfg["leader"]["c0"],
        mode=cfg.get("mode", "crm"),
        kappa=float(cfg.get("kappa", 0.2)),
    )

    comm_plan = _comm_channel_plan(cfg, topo)
    act_plan = _actuator_plan(cfg, len(models), models[0].p)

    bounds = {cid: amp for cid, _, amp, _ in comm_plan}
    report = topology.validate(topo, bounds)
    if not report.passed:
        names = ", ".join(f"{n} ({d})" for n, d in report.failures())
        raise ConfigError(f"topology validation failed: {names}")

    # seeded draws, in documented order
    seed = int(cfg.get("seed", 42))
    gen = np.random.Generator(np.random.PCG64(seed))
    channels = {}
    for cid, wf, amp, freq in comm_plan:
        drawn = gen.random() if freq is None else freq
        channels[cid] = CommFaultSpec(
            amplitude=amp, frequency=float(drawn), waveform=wf)
    actuator_specs = []
    for wf, amps, freqs in act_plan:
        drawn = tuple(gen.random(len(wf))) if freqs is None else freqs
        actuator_specs.append(ActuatorFaultSpec(
            waveforms=wf, amplitudes=amps, frequencies=tuple(drawn)))

    n = models[0].n
    init_cfg = cfg.get("init", {})
    followers = init_cfg.get("followers", "seeded")
    if followers == "seeded":
        x_init = gen.uniform(-1.0, 1.0, size=(len(models), n))
    else:
        x_init = np.asarray(followers, dtype=float)
        if x_init.shape != (len(models), n):
            raise ConfigError("init.followers has the wrong shape")
    x0_init = np.asarray(
        cfg["leader"].get("x0_init", [1.0] + [0.0] * (leader.n0 - 1)),
        dtype=float,
    )

    defaults = _synthesis_defaults(cfg)
    t_end = float(cfg.get("t_end", 20.0))
    gains, syn_report = synthesis.synthesize_all(
        models, leader, topo, defaults,
        channels=channels if cfg.get("comm_enabled", True) else None,
        horizon=t_end,
    )
    if not syn_report.passed:
        raise ConfigError(
            "gain synthesis failed verification: " + "; ".join(syn_report.errors)
        )

    return Scenario(
        topo=topo, models=models, leader=leader,
        gains=gains, report=syn_report,
        comm_channels=channels, actuator_specs=actuator_specs,
        x0_init=x0_init, x_init=x_init,
        dt=float(cfg.get("dt", 1e-3)),
        t_end=t_end,
        seed=seed,
        record_stride=int(cfg.get("record_stride", 1)),
        comm_enabled=bool(cfg.get("comm_enabled", True)),
        actuator_enabled=bool(cfg.get("actuator_enabled", True)),
        divergence_cap=float(cfg.get("divergence_cap", 1e6)),
        name=str(cfg.get("name", "custom")),
        config=cfg,
    )
