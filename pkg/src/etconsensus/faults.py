"""Time-varying communication and actuator fault signals.

Communication faults are sinusoidal perturbations added to individual link
weights; actuator faults are per-channel sinusoids (or constants) added to
the control input.  Frequencies are drawn uniformly from [0, 1] rad/s with
a seeded PCG64 stream so every run is bit-reproducible.
"""

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "PRNG_ID",
    "WAVEFORMS",
    "CommFaultSpec",
    "ActuatorFaultSpec",
    "sample_frequencies",
    "comm_delta",
    "actuator_fault",
    "actuator_fault_rate",
]

# Generator recorded in run metadata; PCG64 has a documented small state and
# produces identical streams on every platform numpy supports.
PRNG_ID = "numpy-PCG64"

WAVEFORMS = ("sin", "cos", "const")


def sample_frequencies(seed, count):
    """Draw ``count`` uniform values in [0, 1], deterministically from ``seed``."""
    if count < 0:
        raise ValueError("count must be non-negative")
    gen = np.random.Generator(np.random.PCG64(int(seed)))
    return gen.random(int(count))


@dataclass(frozen=True)
class CommFaultSpec:
    """One additive disturbance channel on a communication weight."""

    amplitude: float
    frequency: float
    waveform: str = "cos"
    phase: float = 0.0

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValueError("amplitude must be >= 0")
        if self.waveform not in ("sin", "cos"):
            raise ValueError(f"waveform must be sin or cos, got {self.waveform!r}")


def comm_delta(spec, t):
    """Evaluate a communication disturbance at time ``t``."""
    arg = spec.frequency * t + spec.phase
    if spec.waveform == "cos":
        return spec.amplitude * np.cos(arg)
    return spec.amplitude * np.sin(arg)


@dataclass(frozen=True)
class ActuatorFaultSpec:
    """Per-channel actuator fault: sin/cos sinusoids or a constant offset.

    Both the signal and its time derivative are bounded by construction,
    which is the boundedness assumption the observers rely on.
    """

    waveforms: tuple
    amplitudes: tuple
    frequencies: tuple
    phases: tuple = field(default=None)

    def __post_init__(self):
        k = len(self.waveforms)
        if len(self.amplitudes) != k or len(self.frequencies) != k:
            raise ValueError("per-channel lists must share a length")
        for w in self.waveforms:
            if w not in WAVEFORMS:
                raise ValueError(f"unknown waveform {w!r}")
        if self.phases is None:
            object.__setattr__(self, "phases", tuple(0.0 for _ in range(k)))

    @property
    def channels(self):
        return len(self.waveforms)


def actuator_fault(spec, t):
    """Evaluate the actuator fault vector at time ``t``."""
    out = np.empty(spec.channels)
    for i, (w, a, f, p) in enumerate(
        zip(spec.waveforms, spec.amplitudes, spec.frequencies, spec.phases)
    ):
        if w == "sin":
            out[i] = a * np.sin(f * t + p)
        elif w == "cos":
            out[i] = a * np.cos(f * t + p)
        else:
            out[i] = a
    return out


def actuator_fault_rate(spec, t):
    """Time derivative of :func:`actuator_fault`; used as a test oracle."""
    out = np.empty(spec.channels)
    for i, (w, a, f, p) in enumerate(
        zip(spec.waveforms, spec.amplitudes, spec.frequencies, spec.phases)
    ):
        if w == "sin":
            out[i] = a * f * np.cos(f * t + p)
        elif w == "cos":
            out[i] = -a * f * np.sin(f * t + p)
        else:
            out[i] = 0.0
    return out
