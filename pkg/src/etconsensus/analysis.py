"""Post-run metrics: tracking and estimation errors, trigger statistics,
ultimate-boundedness checks and reference-model comparisons.

All metrics are pure functions over an immutable trace.  Boundedness is a
tail property, so the default check window is the final fifth of the
horizon; bounds ship as a calibrated defaults file produced by the
committed reference run.
"""

import json
from importlib import resources

import numpy as np

from . import numerics

__all__ = [
    "tracking_errors",
    "estimation_errors",
    "trigger_stats",
    "uub_check",
    "compare_crm_orm",
    "default_bounds",
    "tail_window",
    "window_mask",
    "metric_table",
]


def tail_window(trace, fraction=0.2):
    """Default check window: the final ``fraction`` of the horizon."""
    t_end = trace.meta["t_end"]
    return (1.0 - fraction) * t_end, t_end


def window_mask(trace, window):
    lo, hi = window
    return (trace.t >= lo - 1e-12) & (trace.t <= hi + 1e-12)


def tracking_errors(trace):
    """Per-agent output tracking error norms, (samples, agents)."""
    diff = trace.y - trace.y0[:, None, :]
    return np.linalg.norm(diff, axis=2)


def estimation_errors(trace):
    """The five estimation error families, each (samples, agents) shaped.

    ``xbar``   plant-state observer error,
    ``utilde`` actuator-fault estimate error (defined when the trace was run
               with known fault specs; reconstructed from metadata signals
               is not attempted -- the stored estimate is compared against
               the commanded fault series when available, else NaN),
    ``xtilde`` leader-observer error (estimate minus leader state),
    ``eps``    regulated mismatch between state estimate and the leader
               estimate mapped through the regulation gain,
    ``ahat``   leader-matrix estimate error (remote agents only).
    """
    gains = trace.gains
    if gains is None:
        raise ValueError("trace carries no gains; attach them before analysis")
    xbar = np.linalg.norm(trace.x - trace.xh, axis=2)
    xtilde = np.linalg.norm(trace.zeta - trace.x0[:, None, :], axis=2)
    xg = np.stack([g.x for g in gains.agents])
    mapped = np.einsum("knz,skz->skn", xg, trace.zeta)
    eps = np.linalg.norm(trace.xh - mapped, axis=2)
    a_r = numerics.vec(gains.a0)
    ahat = np.linalg.norm(trace.ah - a_r[None, None, :], axis=2)
    utilde = _fault_estimate_errors(trace)
    return {
        "xbar": xbar, "utilde": utilde, "xtilde": xtilde,
        "eps": eps, "ahat": ahat,
    }


def _fault_estimate_errors(trace):
    """norm(true fault - estimate) when the fault signals are in metadata."""
    specs = trace.meta.get("actuator_signals")
    true = np.zeros_like(trace.uh)
    if specs is not None and trace.meta.get("actuator_faults", True):
        t = trace.t[:, None]
        for k, spec in enumerate(specs):
            for j, (wf, amp, freq) in enumerate(zip(
                    spec["waveforms"], spec["amplitudes"],
                    spec["frequencies"])):
                if wf == "sin":
                    true[:, k, j] = amp * np.sin(freq * trace.t)
                elif wf == "cos":
                    true[:, k, j] = amp * np.cos(freq * trace.t)
                else:
                    true[:, k, j] = amp
    return np.linalg.norm(true - trace.uh, axis=2)


def trigger_stats(trace, window=None):
    """Per-machine event counts, gap statistics and communication savings.

    ``comm_savings`` is one minus the ratio of fires to integration steps
    inside the window (the fraction of grid instants with no broadcast).
    """
    dt = trace.meta["dt"]
    t_end = trace.meta["t_end"]
    lo, hi = window if window is not None else (0.0, t_end)
    steps_in_window = max(int(round((hi - lo) / dt)), 1)
    machines = {}
    for key, times in trace.machine_events().items():
        times = np.asarray(times)
        inside = times[(times >= lo - 1e-12) & (times <= hi + 1e-12)]
        gaps = np.diff(times) if times.size >= 2 else np.array([])
        machines[key] = {
            "count": int(times.size),
            "count_window": int(inside.size),
            "min_gap": float(gaps.min()) if gaps.size else float(t_end),
            "mean_gap": float(gaps.mean()) if gaps.size else float(t_end),
            "comm_savings": 1.0 - inside.size / steps_in_window,
            "strictly_increasing": bool(np.all(gaps > 0)) if gaps.size else True,
        }
    by_family = {}
    for (agent, family), stats in machines.items():
        fam = by_family.setdefault(family, {"count": 0, "count_window": 0})
        fam["count"] += stats["count"]
        fam["count_window"] += stats["count_window"]
    return {"machines": machines, "families": by_family,
            "window": (lo, hi), "steps_in_window": steps_in_window}


def uub_check(metrics, bounds, window, times):
    """Tail-boundedness report: sup of each metric over the window vs bound.

    ``metrics`` maps name -> (samples,) or (samples, agents) array aligned
    with ``times``; ``bounds`` maps name -> scalar.  Pass iff every named
    metric stays at or below its bound; the report lists sup values,
    margins, and the first offending time for failures.
    """
    lo, hi = window
    mask = (times >= lo - 1e-12) & (times <= hi + 1e-12)
    entries = {}
    ok = True
    for name, bound in bounds.items():
        series = np.asarray(metrics[name])
        segment = series[mask]
        if segment.ndim == 1:
            segment = segment[:, None]
        sup = float(segment.max()) if segment.size else 0.0
        passed = sup <= bound
        entry = {"bound": float(bound), "sup": sup,
                 "margin": float(bound - sup), "passed": bool(passed)}
        if not passed:
            t_win = times[mask]
            flat = segment.max(axis=1)
            idx = int(np.argmax(flat > bound))
            entry["first_violation_t"] = float(t_win[idx])
            ok = False
        entries[name] = entry
    return {"window": (float(lo), float(hi)), "metrics": entries,
            "passed": ok}


def compare_crm_orm(trace_fb, trace_ol, transient_window=(0.0, 2.0)):
    """Transient peak and tail sup of tracking error for both leader modes.

    Informational: reports the ratios (closed-loop over open-loop), no
    thresholds.  Both traces must come from the same scenario apart from
    the leader feedback gain.
    """
    for key in ("seed", "dt", "t_end"):
        if trace_fb.meta[key] != trace_ol.meta[key]:
            raise ValueError(f"traces differ in {key}; comparison undefined")
    out = {}
    for label, trace in (("crm", trace_fb), ("orm", trace_ol)):
        err = tracking_errors(trace)
        lo, hi = transient_window
        tmask = (trace.t >= lo) & (trace.t <= hi)
        wmask = window_mask(trace, tail_window(trace))
        out[label] = {
            "transient_peak": float(err[tmask].max()),
            "tail_sup": float(err[wmask].max()),
            "mode": trace.meta["mode"],
        }
    out["ratio_transient"] = out["crm"]["transient_peak"] / out["orm"]["transient_peak"]
    out["ratio_tail"] = out["crm"]["tail_sup"] / out["orm"]["tail_sup"]
    return out


def default_bounds():
    """Calibrated tail bounds committed from the reference run."""
    with resources.files("etconsensus.data").joinpath("uub_bounds.json").open() as fh:
        return json.load(fh)


def metric_table(trace):
    """Flat name -> series mapping used by the boundedness check and CSV."""
    est = estimation_errors(trace)
    table = {"tracking": tracking_errors(trace)}
    table.update(est)
    return table
