"""Bounded piecewise-constant control fields along x.

Two representations are used: :class:`PulseSequence` (arbitrary segment
lengths, for the analytic sequences) and :class:`ControlGrid` (``n`` equal
steps, for gradient optimization). Both expose ``breakpoints`` and
``amplitudes`` so the evolution code treats them alike.
"""

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .su2 import IDENTITY, propagator_step
from .validation import check_amplitudes, check_count, check_positive

PULSE_FILE_VERSION = 1


def _readonly(arr):
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class PulseSequence:
    durations: np.ndarray
    amplitudes: np.ndarray
    a_max: float = 1.0

    def __post_init__(self):
        a_max = check_positive(self.a_max, "a_max")
        durations = _readonly(self.durations)
        amplitudes = _readonly(check_amplitudes(self.amplitudes, a_max))
        if durations.ndim != 1 or durations.shape != amplitudes.shape:
            raise ValueError("durations and amplitudes must be 1-d arrays of equal length")
        if durations.size == 0 or np.any(durations <= 0) or not np.all(np.isfinite(durations)):
            raise ValueError("a pulse needs at least one segment and positive durations")
        object.__setattr__(self, "a_max", a_max)
        object.__setattr__(self, "durations", durations)
        object.__setattr__(self, "amplitudes", amplitudes)

    @classmethod
    def from_segments(cls, segments, a_max=1.0):
        segments = np.asarray(segments, dtype=float).reshape(-1, 2)
        return cls(segments[:, 0], segments[:, 1], a_max)

    @property
    def segments(self):
        return list(zip(self.durations.tolist(), self.amplitudes.tolist()))

    @property
    def duration(self):
        return float(self.breakpoints[-1])

    @property
    def breakpoints(self):
        return np.concatenate([[0.0], np.cumsum(self.durations)])

    def __eq__(self, other):
        if not isinstance(other, PulseSequence):
            return NotImplemented
        return (
            self.a_max == other.a_max
            and np.array_equal(self.durations, other.durations)
            and np.array_equal(self.amplitudes, other.amplitudes)
        )


@dataclass(frozen=True, eq=False)
class ControlGrid:
    amplitudes: np.ndarray
    dt: float
    a_max: float = 1.0

    def __post_init__(self):
        a_max = check_positive(self.a_max, "a_max")
        amplitudes = _readonly(check_amplitudes(self.amplitudes, a_max))
        if amplitudes.size == 0:
            raise ValueError("a control grid needs at least one step")
        object.__setattr__(self, "a_max", a_max)
        object.__setattr__(self, "dt", check_positive(self.dt, "dt"))
        object.__setattr__(self, "amplitudes", amplitudes)

    @classmethod
    def constant(cls, T, n, value, a_max=1.0):
        n = check_count(n, "n")
        return cls(np.full(n, float(value)), check_positive(T, "T") / n, a_max)

    @property
    def n(self):
        return int(self.amplitudes.size)

    @property
    def duration(self):
        return self.n * self.dt

    @property
    def breakpoints(self):
        return self.dt * np.arange(self.n + 1)

    @property
    def durations(self):
        return np.full(self.n, self.dt)

    def with_amplitudes(self, amplitudes):
        return ControlGrid(amplitudes, self.dt, self.a_max)

    def __eq__(self, other):
        if not isinstance(other, ControlGrid):
            return NotImplemented
        return (
            self.a_max == other.a_max
            and self.dt == other.dt
            and np.array_equal(self.amplitudes, other.amplitudes)
        )


def pi_pulse(a_max=1.0):
    """Time-optimal pi rotation: full amplitude for ``pi / a_max``."""
    return PulseSequence.from_segments([(np.pi / a_max, a_max)], a_max)


def corpse(a_max=1.0):
    """CORPSE in the order +60, -300, +420 degrees of rotation."""
    t = np.pi / (3.0 * a_max)
    return PulseSequence.from_segments([(t, a_max), (5 * t, -a_max), (7 * t, a_max)], a_max)


def scorpse(a_max=1.0):
    """Short CORPSE: -60, +300, -60 degrees of rotation."""
    t = np.pi / (3.0 * a_max)
    return PulseSequence.from_segments([(t, -a_max), (5 * t, a_max), (t, -a_max)], a_max)


ANALYTIC_PULSES = {"pi": pi_pulse, "corpse": corpse, "scorpse": scorpse}


def analytic_pulse(name, a_max=1.0):
    try:
        return ANALYTIC_PULSES[name](a_max)
    except KeyError:
        raise ValueError(f"unknown pulse {name!r}; choose from {sorted(ANALYTIC_PULSES)}") from None


def to_grid(pulse, n):
    """Resample ``pulse`` on ``n`` equal steps by duration-weighted averaging.

    The pulse area on every step is preserved, so the result is exact when the
    segment boundaries fall on grid points.
    """
    n = check_count(n, "n")
    T = pulse.duration
    edges = pulse.breakpoints
    area = np.concatenate([[0.0], np.cumsum(pulse.durations * pulse.amplitudes)])
    dt = T / n
    grid_points = dt * np.arange(n + 1)
    grid_points[-1] = edges[-1]
    # cumulative area is piecewise linear between segment edges
    amps = np.diff(np.interp(grid_points, edges, area)) / dt
    # rounding can push an average of bounded values over the bound
    amps = np.clip(amps, -pulse.a_max, pulse.a_max)
    return ControlGrid(amps, dt, pulse.a_max)


def to_segments(grid):
    """Express a grid as a :class:`PulseSequence` with one segment per step."""
    return PulseSequence(grid.durations, grid.amplitudes, grid.a_max)


def pad_with_zero(pulse, T):
    """Prepend a zero-field segment so the total duration becomes ``T``."""
    extra = T - pulse.duration
    if extra < -1e-12 * max(1.0, T):
        raise ValueError(f"cannot pad a pulse of duration {pulse.duration} to T={T}")
    if extra <= 0:
        return pulse
    if isinstance(pulse, ControlGrid):
        pulse = to_segments(pulse)
    return PulseSequence(
        np.concatenate([[extra], pulse.durations]),
        np.concatenate([[0.0], pulse.amplitudes]),
        pulse.a_max,
    )


def noiseless_unitary(pulse):
    """Net propagator of ``pulse`` with the noise switched off."""
    U = IDENTITY.copy()
    for d, a in zip(pulse.durations, pulse.amplitudes):
        U = propagator_step(a, 0.0, d) @ U
    return U


def pulse_to_dict(pulse):
    if isinstance(pulse, ControlGrid):
        return {
            "version": PULSE_FILE_VERSION,
            "a_max": pulse.a_max,
            "kind": "grid",
            "n": pulse.n,
            "dt": pulse.dt,
            "amplitudes": pulse.amplitudes.tolist(),
        }
    return {
        "version": PULSE_FILE_VERSION,
        "a_max": pulse.a_max,
        "kind": "segments",
        "segments": [list(s) for s in pulse.segments],
    }


def pulse_from_dict(data):
    """Build a pulse from its JSON form; bound violations raise ``ValueError``."""
    if not isinstance(data, dict):
        raise ValueError("pulse file must contain a JSON object")
    if data.get("version") != PULSE_FILE_VERSION:
        raise ValueError(f"unsupported pulse file version {data.get('version')!r}")
    a_max = data.get("a_max", 1.0)
    kind = data.get("kind")
    try:
        if kind == "segments":
            return PulseSequence.from_segments(data["segments"], a_max)
        if kind == "grid":
            amplitudes = data["amplitudes"]
            if "n" in data and data["n"] != len(amplitudes):
                raise ValueError(f"grid declares n={data['n']} but has {len(amplitudes)} amplitudes")
            return ControlGrid(amplitudes, data["dt"], a_max)
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed pulse file: {exc}") from exc
    raise ValueError(f"unknown pulse kind {kind!r}")


def save_pulse(pulse, path):
    Path(path).write_text(json.dumps(pulse_to_dict(pulse), indent=2) + "\n")


def load_pulse(path):
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: not valid JSON ({exc})") from exc
    return pulse_from_dict(data)
