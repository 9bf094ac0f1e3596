"""Random telegraph noise: sampling and querying of individual realizations.

A realization is stored as its initial sign and the explicit list of jump
times, so evolution can be partitioned exactly at the jumps. Sojourn times are
``-tau_c * log(p)`` with ``p`` uniform on (0, 1).
"""

import math
from collections.abc import Sequence
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .validation import check_count, check_positive


@dataclass(frozen=True)
class RtnParams:
    """Noise strength ``delta`` and correlation time ``tau_c`` (dimensionless)."""

    delta: float
    tau_c: float

    def __post_init__(self):
        object.__setattr__(self, "delta", check_positive(self.delta, "delta", strict=False))
        object.__setattr__(self, "tau_c", check_positive(self.tau_c, "tau_c"))


def _frozen(values, dtype):
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class NoiseTrajectory:
    initial_sign: int
    jump_times: np.ndarray
    horizon: float

    def __post_init__(self):
        if self.initial_sign not in (1, -1):
            raise ValueError(f"initial_sign must be +1 or -1, got {self.initial_sign}")
        jumps = _frozen(self.jump_times, float)
        if jumps.ndim != 1:
            raise ValueError("jump_times must be one-dimensional")
        if jumps.size and (jumps[0] < 0 or np.any(np.diff(jumps) <= 0)):
            raise ValueError("jump_times must be non-negative and strictly increasing")
        if jumps.size and jumps[-1] >= self.horizon:
            raise ValueError("jump_times must lie before the horizon")
        object.__setattr__(self, "initial_sign", int(self.initial_sign))
        object.__setattr__(self, "jump_times", jumps)

    def __eq__(self, other):
        if not isinstance(other, NoiseTrajectory):
            return NotImplemented
        return (
            self.initial_sign == other.initial_sign
            and self.horizon == other.horizon
            and np.array_equal(self.jump_times, other.jump_times)
        )

    @property
    def n_jumps(self):
        return int(self.jump_times.size)


def child_rng(master_seed, index):
    """Generator for trajectory ``index``, derived only from ``(master_seed, index)``."""
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(index,)))


def _open_unit(u):
    # Generator.random is on [0, 1); p = 0 would give an infinite sojourn
    return np.where(u > 0.0, u, 2.0**-54)


def _draw(params, horizon, rng):
    sign = 1 if rng.random() < 0.5 else -1
    mean = horizon / params.tau_c
    block = max(16, int(mean + 4.0 * math.sqrt(mean)) + 4)
    times = np.empty(0)
    last = 0.0
    # the stream is consumed sequentially, so any horizon sees the same prefix
    while last < horizon:
        sojourns = -params.tau_c * np.log(_open_unit(np.asarray(rng.random(block), dtype=float)))
        chunk = last + np.cumsum(sojourns)
        times = np.concatenate([times, chunk])
        last = chunk[-1]
    return sign, times[times < horizon]


def sample_trajectory(params, horizon, rng):
    """Draw one realization on ``[0, horizon)`` from the stream ``rng``."""
    horizon = check_positive(horizon, "horizon")
    sign, times = _draw(params, horizon, rng)
    return NoiseTrajectory(sign, times, horizon)


def eta_at(traj, params, t):
    """Noise amplitude ``(-1)^(#jumps <= t) * initial_sign * delta``."""
    if not 0 <= t <= traj.horizon:
        raise ValueError(f"t={t} outside [0, {traj.horizon}]")
    flips = int(np.searchsorted(traj.jump_times, t, side="right"))
    return traj.initial_sign * (-1) ** flips * params.delta


def segments(traj, params, start, stop):
    """Partition ``[start, stop]`` at the jump times.

    Returns a list of ``(duration, eta)`` pairs with constant noise on each
    piece. Durations are differences of consecutive breakpoints, so they add
    up to ``stop - start`` up to rounding.
    """
    if not 0 <= start <= stop <= traj.horizon:
        raise ValueError(f"invalid window [{start}, {stop}] for horizon {traj.horizon}")
    lo = int(np.searchsorted(traj.jump_times, start, side="right"))
    hi = int(np.searchsorted(traj.jump_times, stop, side="left"))
    breaks = [start, *traj.jump_times[lo:hi].tolist(), stop]
    sign = traj.initial_sign * (-1) ** lo
    out = []
    for t0, t1 in zip(breaks[:-1], breaks[1:]):
        out.append((t1 - t0, sign * params.delta))
        sign = -sign
    return out


class TrajectoryBatch(Sequence):
    """Immutable batch of realizations in compressed (offsets + flat times) form.

    Indexing yields :class:`NoiseTrajectory` objects; the flat arrays are what
    the evolution kernels consume.
    """

    def __init__(self, initial_signs, offsets, jump_times, horizon, tau_c, seed=None):
        self.initial_signs = _frozen(initial_signs, np.int8)
        self.offsets = _frozen(offsets, np.int64)
        self.jump_times = _frozen(jump_times, float)
        self.horizon = float(horizon)
        self.tau_c = float(tau_c)
        self.seed = seed
        if self.offsets.shape != (self.initial_signs.size + 1,):
            raise ValueError("offsets must have one more entry than initial_signs")

    def __len__(self):
        return int(self.initial_signs.size)

    def __getitem__(self, k):
        if isinstance(k, slice):
            return [self[i] for i in range(*k.indices(len(self)))]
        if k < 0:
            k += len(self)
        if not 0 <= k < len(self):
            raise IndexError(k)
        jumps = self.jump_times[self.offsets[k] : self.offsets[k + 1]]
        return NoiseTrajectory(int(self.initial_signs[k]), jumps, self.horizon)

    @property
    def jump_counts(self):
        return np.diff(self.offsets)

    @classmethod
    def from_trajectories(cls, trajectories, tau_c, seed=None):
        trajectories = list(trajectories)
        if not trajectories:
            raise ValueError("empty trajectory list")
        horizon = trajectories[0].horizon
        if any(t.horizon != horizon for t in trajectories):
            raise ValueError("all trajectories must share one horizon")
        counts = [t.n_jumps for t in trajectories]
        offsets = np.concatenate([[0], np.cumsum(counts)])
        flat = np.concatenate([t.jump_times for t in trajectories]) if offsets[-1] else np.empty(0)
        signs = [t.initial_sign for t in trajectories]
        return cls(signs, offsets, flat, horizon, tau_c, seed)


@lru_cache(maxsize=16)
def _cached_batch(tau_c, horizon, n, master_seed):
    params = RtnParams(0.0, tau_c)
    signs = np.empty(n, dtype=np.int8)
    counts = np.empty(n, dtype=np.int64)
    chunks = []
    for k in range(n):
        signs[k], times = _draw(params, horizon, child_rng(master_seed, k))
        counts[k] = times.size
        chunks.append(times)
    offsets = np.concatenate([[0], np.cumsum(counts)])
    return TrajectoryBatch(signs, offsets, np.concatenate(chunks), horizon, tau_c, master_seed)


def sample_batch(params, horizon, n, master_seed):
    """Sample ``n`` realizations; trajectory ``k`` uses ``child_rng(master_seed, k)``.

    Jump times do not depend on ``delta``, so batches are shared between noise
    strengths with the same ``tau_c``.
    """
    horizon = check_positive(horizon, "horizon")
    n = check_count(n, "n")
    return _cached_batch(params.tau_c, horizon, n, int(master_seed))
