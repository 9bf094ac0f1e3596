"""Monte Carlo evaluation of pulses under random telegraph noise.

Every trajectory is evolved exactly: each control interval is split at the
noise jumps and the closed-form propagators of the pieces are multiplied.
Estimates are plain sample means over a deterministic trajectory batch and
carry their standard error.
"""

import csv
from dataclasses import asdict, dataclass

import numpy as np

from . import _kernels
from .rtn import NoiseTrajectory, RtnParams, TrajectoryBatch, sample_batch
from .su2 import IDENTITY, SIGMA_X, SIGMA_Y, SIGMA_Z, ket_density, propagator_step
from .validation import check_count, check_density, check_operator, check_unitary

PAULIS = np.stack([SIGMA_X, SIGMA_Y, SIGMA_Z])

# bit flip: south pole |1><1| to north pole |0><0|
BITFLIP_RHO0 = ket_density(1)
BITFLIP_RHOF = ket_density(0)
NOT_GATE = SIGMA_X

# horizons and durations are compared with this relative slack
_TIME_RTOL = 1e-12


@dataclass(frozen=True)
class FidelityEstimate:
    mean: float
    stderr: float
    n_traj: int
    seed: object = None

    @classmethod
    def from_samples(cls, samples, seed=None):
        samples = np.asarray(samples, dtype=float)
        n = samples.size
        stderr = float(np.std(samples, ddof=1) / np.sqrt(n)) if n > 1 else 0.0
        return cls(float(np.mean(samples)), stderr, int(n), seed)

    @property
    def error(self):
        return 1.0 - self.mean


@dataclass(frozen=True)
class EvolutionRecord:
    """Per-interval propagators of one trajectory and the running products."""

    unitaries: np.ndarray
    cumulative: np.ndarray
    index: int = 0

    @property
    def total(self):
        return self.cumulative[-1]


def _check_horizon(horizon, duration):
    if horizon < duration * (1 - _TIME_RTOL):
        raise ValueError(f"trajectory horizon {horizon} is shorter than the pulse ({duration})")


def _as_batch(traj):
    if isinstance(traj, TrajectoryBatch):
        return traj
    if isinstance(traj, NoiseTrajectory):
        return TrajectoryBatch.from_trajectories([traj], tau_c=np.nan)
    return TrajectoryBatch.from_trajectories(traj, tau_c=np.nan)


def _schedule(pulse):
    edges = np.ascontiguousarray(pulse.breakpoints, dtype=float)
    amps = np.ascontiguousarray(pulse.amplitudes, dtype=float)
    return edges, amps


def batch_propagators(pulse, batch, delta):
    """Net propagator of ``pulse`` for each trajectory, shape ``(N, 2, 2)``."""
    batch = _as_batch(batch)
    _check_horizon(batch.horizon, pulse.duration)
    edges, amps = _schedule(pulse)
    alpha, beta = _kernels.evolve_totals(
        edges, amps, float(delta), batch.initial_signs, batch.offsets, batch.jump_times
    )
    return _kernels.to_matrices(alpha, beta)


def interval_propagators(pulse, batch, delta):
    """Propagator of every control interval, shape ``(N, n, 2, 2)``."""
    batch = _as_batch(batch)
    _check_horizon(batch.horizon, pulse.duration)
    edges, amps = _schedule(pulse)
    alpha, beta = _kernels.evolve_intervals(
        edges, amps, float(delta), batch.initial_signs, batch.offsets, batch.jump_times
    )
    return _kernels.to_matrices(alpha, beta)


def evolve_trajectory(pulse, traj, params, index=0):
    """Exact evolution of ``pulse`` along one noise realization."""
    _check_horizon(traj.horizon, pulse.duration)
    steps = interval_propagators(pulse, traj, params.delta)[0]
    cumulative = np.empty_like(steps)
    U = IDENTITY
    for m, step in enumerate(steps):
        U = step @ U
        cumulative[m] = U
    return EvolutionRecord(steps, cumulative, index)


def state_fidelity_samples(U, rho0, rhof):
    """``Re tr(rhof^dagger U rho0 U^dagger)`` for a stack of propagators."""
    evolved = U @ rho0 @ np.conj(np.swapaxes(U, -1, -2))
    return np.real(np.einsum("ij,...ij->...", np.conj(rhof), evolved))


def gate_fidelity_samples(U, Uf):
    """Per-trajectory ``1/2 + (1/12) sum_j tr(Uf s_j Uf^dagger U s_j U^dagger)``."""
    Ud = np.conj(np.swapaxes(U, -1, -2))
    total = np.zeros(U.shape[:-2])
    for s in PAULIS:
        target = Uf @ s @ Uf.conj().T
        evolved = U @ s @ Ud
        total = total + np.real(np.einsum("ij,...ji->...", target, evolved))
    return 0.5 + total / 12.0


def _resolve_batch(pulse, params, n_traj, seed, batch):
    if batch is None:
        n_traj = check_count(n_traj, "n_traj", minimum=2)
        return sample_batch(params, pulse.duration, n_traj, seed)
    if len(batch) < 2:
        raise ValueError("at least two trajectories are needed for a standard error")
    return batch


def state_fidelity(pulse, rho0, rhof, params, n_traj=None, seed=0, batch=None):
    """Trajectory-averaged state fidelity ``tr(rhof^dagger rho(T))``.

    Pass ``batch`` to evaluate on a given set of realizations (common random
    numbers); otherwise ``n_traj`` realizations are drawn from ``seed``.
    """
    rho0 = check_density(rho0, "rho0")
    rhof = check_density(rhof, "rhof")
    batch = _resolve_batch(pulse, params, n_traj, seed, batch)
    U = batch_propagators(pulse, batch, params.delta)
    return FidelityEstimate.from_samples(state_fidelity_samples(U, rho0, rhof), batch.seed)


def gate_fidelity(pulse, Uf, params, n_traj=None, seed=0, batch=None):
    """Fidelity averaged over all pure initial states, via the Pauli trace form."""
    Uf = check_unitary(Uf, "Uf")
    batch = _resolve_batch(pulse, params, n_traj, seed, batch)
    U = batch_propagators(pulse, batch, params.delta)
    return FidelityEstimate.from_samples(gate_fidelity_samples(U, Uf), batch.seed)


def random_bloch_vectors(n, rng):
    """``n`` points distributed uniformly on the unit sphere."""
    v = rng.standard_normal((n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def gate_fidelity_bloch_oracle(pulse, Uf, params, n_traj=None, n_states=8, seed=0, batch=None, states=None):
    """Brute-force gate fidelity: state fidelities of random pure inputs.

    Each trajectory is scored on ``n_states`` initial states drawn uniformly on
    the Bloch sphere, independent of the trajectory streams. A fixed set of
    Bloch vectors can be supplied instead through ``states``.
    """
    Uf = check_unitary(Uf, "Uf")
    batch = _resolve_batch(pulse, params, n_traj, seed, batch)
    U = batch_propagators(pulse, batch, params.delta)
    n = len(batch)
    if states is None:
        n_states = check_count(n_states, "n_states")
        rng = np.random.default_rng(np.random.SeedSequence([int(batch.seed or 0), 0xB10C]))
        vectors = random_bloch_vectors(n * n_states, rng).reshape(n, n_states, 3)
    else:
        states = np.asarray(states, dtype=float).reshape(-1, 3)
        vectors = np.broadcast_to(states, (n,) + states.shape)
    rho0 = 0.5 * (IDENTITY + np.einsum("...i,ijk->...jk", vectors, PAULIS))
    target = Uf @ rho0 @ Uf.conj().T
    Ue = U[:, None]
    evolved = Ue @ rho0 @ np.conj(np.swapaxes(Ue, -1, -2))
    values = np.real(np.einsum("...ij,...ij->...", np.conj(target), evolved))
    return FidelityEstimate.from_samples(values.mean(axis=1), batch.seed)


def static_propagator(pulse, eta):
    """Propagator of ``pulse`` under a constant noise value ``eta``."""
    U = IDENTITY.copy()
    for d, a in zip(pulse.durations, pulse.amplitudes):
        U = propagator_step(a, eta, d) @ U
    return U


def static_limit_fidelity(pulse, delta, rho0=None, rhof=None, Uf=None):
    """Infinite correlation time: average over the two constant drifts ``+-delta``.

    Scores a state transfer (``rho0``, ``rhof``; bit flip by default) or, when
    ``Uf`` is given, the gate fidelity.
    """
    values = []
    for eta in (delta, -delta):
        U = static_propagator(pulse, eta)
        if Uf is not None:
            values.append(float(gate_fidelity_samples(U, check_unitary(Uf))))
        else:
            r0 = BITFLIP_RHO0 if rho0 is None else check_operator(rho0)
            rf = BITFLIP_RHOF if rhof is None else check_operator(rhof)
            values.append(float(state_fidelity_samples(U, r0, rf)))
    return 0.5 * (values[0] + values[1])


KINDS = ("state", "gate")


@dataclass(frozen=True)
class SweepRow:
    pulse_name: str
    tau_c: float
    delta: float
    kind: str
    fidelity: float
    stderr: float
    n_traj: int
    seed: int


SWEEP_COLUMNS = tuple(SweepRow.__dataclass_fields__)


def fidelity_sweep(pulses, tau_cs, deltas, kind="state", n_traj=10_000, seed=0, rho0=None, rhof=None, Uf=None):
    """Evaluate named pulses over a grid of correlation times and strengths.

    ``pulses`` maps names to pulses. At every ``tau_c`` all pulses and noise
    strengths share one trajectory batch (long enough for the longest pulse),
    so differences between rows carry little Monte Carlo noise.
    """
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}, got {kind!r}")
    tau_cs = list(tau_cs)
    deltas = list(deltas)
    if not pulses or not tau_cs or not deltas:
        raise ValueError("pulse list, tau_c grid and delta grid must be nonempty")
    rho0 = BITFLIP_RHO0 if rho0 is None else rho0
    rhof = BITFLIP_RHOF if rhof is None else rhof
    Uf = NOT_GATE if Uf is None else Uf
    horizon = max(p.duration for p in pulses.values())
    rows = []
    for tau_c in tau_cs:
        batch = sample_batch(RtnParams(0.0, tau_c), horizon, n_traj, seed)
        for delta in deltas:
            params = RtnParams(delta, tau_c)
            for name, pulse in pulses.items():
                if kind == "state":
                    est = state_fidelity(pulse, rho0, rhof, params, batch=batch)
                else:
                    est = gate_fidelity(pulse, Uf, params, batch=batch)
                rows.append(SweepRow(name, float(tau_c), float(delta), kind, est.mean, est.stderr, est.n_traj, int(seed)))
    return rows


def write_sweep_csv(rows, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SWEEP_COLUMNS)
        for row in rows:
            writer.writerow([format_value(v) for v in asdict(row).values()])


def format_value(v):
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)
