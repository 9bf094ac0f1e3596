"""Noise-averaged gradient ascent pulse engineering with bounded controls.

The objective is the trajectory-averaged fidelity over a fixed batch of
noise realizations, so the line search compares like with like. Gradients use
the first-order expression per control interval,

    d phi / d a_m = -(i dt / 2) <tr(lambda_m^dagger [X, rho_m])>,

where ``rho_m`` is the forward-propagated initial state after interval ``m``
and ``lambda_m`` the backward-propagated target. The gate fidelity is handled
as a weighted sum of three such state objectives with Pauli operators as
"states".
"""

import csv
import logging
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from . import _kernels
from .fidelity import (
    BITFLIP_RHO0,
    BITFLIP_RHOF,
    NOT_GATE,
    PAULIS,
    FidelityEstimate,
    _as_batch,
    _check_horizon,
    batch_propagators,
    format_value,
    interval_propagators,
    state_fidelity_samples,
)
from .pulses import ControlGrid
from .rtn import RtnParams, sample_batch
from .validation import check_count, check_operator, check_positive, check_unitary

logger = logging.getLogger(__name__)

DEFAULT_DT = np.pi / 30


@dataclass(frozen=True)
class Target:
    """Objective ``offset + weight * sum_j phi(rhof_j, rho0_j)``."""

    pairs: tuple
    weight: float = 1.0
    offset: float = 0.0
    name: str = "custom"

    @classmethod
    def state(cls, rho0, rhof, name="state"):
        return cls(((check_operator(rho0), check_operator(rhof)),), 1.0, 0.0, name)

    @classmethod
    def gate(cls, Uf, name="gate"):
        Uf = check_unitary(Uf)
        pairs = tuple((s, Uf @ s @ Uf.conj().T) for s in PAULIS)
        return cls(pairs, 1.0 / 12.0, 0.5, name)

    @property
    def is_gate(self):
        return self.offset != 0.0


def make_target(target):
    """Resolve ``'bitflip'``, ``'notgate'`` or a :class:`Target`."""
    if isinstance(target, Target):
        return target
    if target == "bitflip":
        return Target.state(BITFLIP_RHO0, BITFLIP_RHOF, "bitflip")
    if target == "notgate":
        return Target.gate(NOT_GATE, "notgate")
    raise ValueError(f"unknown target {target!r}; use 'bitflip', 'notgate' or a Target")


def _dagger(A):
    return np.conj(np.swapaxes(A, -1, -2))


def _sweeps(steps, rho0, rhof):
    """Forward states and backward targets for stacked interval propagators.

    ``steps`` has shape ``(..., n, 2, 2)``; entry ``m`` of the returned arrays
    is the state after interval ``m`` and the target pulled back through the
    intervals after it.
    """
    n = steps.shape[-3]
    rhos = np.empty_like(steps)
    lams = np.empty_like(steps)
    rho = np.broadcast_to(rho0, steps.shape[:-3] + (2, 2))
    for m in range(n):
        U = steps[..., m, :, :]
        rho = U @ rho @ _dagger(U)
        rhos[..., m, :, :] = rho
    lam = np.broadcast_to(rhof, steps.shape[:-3] + (2, 2))
    for m in range(n - 1, -1, -1):
        lams[..., m, :, :] = lam
        U = steps[..., m, :, :]
        lam = _dagger(U) @ lam @ U
    return rhos, lams


def forward_backward(grid, traj, params, rho0, rhof):
    """Forward-propagated states and backward-propagated targets of one trajectory."""
    steps = interval_propagators(grid, traj, params.delta)[0]
    return _sweeps(steps, check_operator(rho0), check_operator(rhof))


def _target_gradient(grid, batch, params, target):
    batch = _as_batch(batch)
    _check_horizon(batch.horizon, grid.duration)
    rho0s = np.ascontiguousarray([p[0] for p in target.pairs], dtype=complex)
    rhofs = np.ascontiguousarray([p[1] for p in target.pairs], dtype=complex)
    traces = _kernels.gradient_traces(
        np.ascontiguousarray(grid.breakpoints),
        np.ascontiguousarray(grid.amplitudes),
        float(params.delta),
        batch.initial_signs,
        batch.offsets,
        batch.jump_times,
        rho0s,
        rhofs,
    )
    # trajectories on axis 0, control intervals on axis 1
    return target.weight * np.real(-0.5j * grid.dt * traces.mean(axis=0))


def gradient_state(grid, batch, params, rho0, rhof):
    """Gradient of the batch-averaged state fidelity w.r.t. each grid amplitude."""
    return _target_gradient(grid, batch, params, Target.state(rho0, rhof))


def gradient_gate(grid, batch, params, Uf):
    """Gradient of the batch-averaged gate fidelity w.r.t. each grid amplitude."""
    return _target_gradient(grid, batch, params, Target.gate(Uf))


def objective_samples(pulse, batch, params, target):
    """Per-trajectory value of ``target`` for ``pulse`` on ``batch``."""
    U = batch_propagators(pulse, batch, params.delta)
    total = 0.0
    for rho0, rhof in target.pairs:
        total = total + state_fidelity_samples(U, rho0, rhof)
    return target.offset + target.weight * total


def evaluate(pulse, batch, params, target):
    return FidelityEstimate.from_samples(objective_samples(pulse, batch, params, target), batch.seed)


def ascent_step(grid, gradient, step):
    """Move along ``gradient`` by ``step`` and clip into ``[-a_max, a_max]``."""
    amps = np.clip(grid.amplitudes + step * np.asarray(gradient, dtype=float), -grid.a_max, grid.a_max)
    return grid.with_amplitudes(amps)


@dataclass(frozen=True)
class GrapeConfig:
    target: object = "bitflip"
    delta: float = 0.125
    tau_c: float = 5.0
    n: int = None
    dt: float = DEFAULT_DT
    n_batch: int = 1000
    seed: int = 0
    max_iter: int = 2000
    initial_step: float = 50.0
    backtrack: float = 0.5
    min_step: float = 1e-6
    tol: float = 1e-7
    patience: int = 10
    a_max: float = 1.0
    rescore_factor: int = 10
    resample: bool = False

    def __post_init__(self):
        check_positive(self.delta, "delta", strict=False)
        check_positive(self.tau_c, "tau_c")
        check_positive(self.dt, "dt")
        check_count(self.n_batch, "n_batch")
        check_count(self.max_iter, "max_iter")
        check_positive(self.initial_step, "initial_step")
        check_positive(self.min_step, "min_step")
        check_positive(self.tol, "tol")
        check_count(self.patience, "patience")
        check_positive(self.a_max, "a_max")
        check_count(self.rescore_factor, "rescore_factor", minimum=10)
        if self.n is not None:
            check_count(self.n, "n")
        if not 0 < self.backtrack < 1:
            raise ValueError(f"backtrack must be in (0, 1), got {self.backtrack}")
        make_target(self.target)

    @property
    def params(self):
        return RtnParams(self.delta, self.tau_c)

    def grid_size(self, T):
        return self.n if self.n is not None else max(1, int(round(T / self.dt)))

    @property
    def rescore_seed(self):
        return int(np.random.SeedSequence([self.seed, 0x5C0E]).generate_state(1)[0])


@dataclass(frozen=True)
class HistoryRow:
    iter: int
    batch_fidelity: float
    step: float
    grad_norm: float


HISTORY_COLUMNS = tuple(HistoryRow.__dataclass_fields__)


@dataclass
class GrapeRun:
    T: float
    initial: ControlGrid
    final: ControlGrid
    history: list = field(default_factory=list)
    batch_fidelity: float = np.nan
    rescore: FidelityEstimate = None
    converged: bool = False
    status: str = ""

    @property
    def fidelity(self):
        return self.rescore.mean


def initial_grid(config, T, init="constant"):
    """Starting controls: ``'constant'`` (``a_max / 2``), a number, an array or a grid."""
    n = config.grid_size(T)
    if isinstance(init, ControlGrid):
        if abs(init.duration - T) > 1e-9 * max(1.0, T):
            raise ValueError(f"initial grid has duration {init.duration}, expected {T}")
        return init
    if isinstance(init, str):
        if init != "constant":
            raise ValueError(f"unknown initialization {init!r}")
        return ControlGrid.constant(T, n, 0.5 * config.a_max, config.a_max)
    init = np.asarray(init, dtype=float)
    if init.ndim == 0:
        return ControlGrid.constant(T, n, float(init), config.a_max)
    return ControlGrid(init, T / init.size, config.a_max)


def _batch(config, T, iteration=0):
    seed = config.seed
    if config.resample and iteration:
        seed = int(np.random.SeedSequence([config.seed, iteration]).generate_state(1)[0])
    return sample_batch(config.params, T, config.n_batch, seed)


def rescore(config, grid, target=None):
    """Score ``grid`` on a fresh batch ``rescore_factor`` times the ascent batch."""
    target = make_target(config.target) if target is None else target
    batch = sample_batch(config.params, grid.duration, config.rescore_factor * config.n_batch, config.rescore_seed)
    return evaluate(grid, batch, config.params, target)


def optimize(config, T, init="constant"):
    """Projected gradient ascent with backtracking for operation time ``T``.

    The search stops when ``patience`` consecutive accepted steps each improve
    the batch fidelity by less than ``tol``, when no step above ``min_step``
    improves it, or after ``max_iter`` iterations. The result is re-scored on
    an independent, larger batch.
    """
    T = check_positive(T, "T")
    target = make_target(config.target)
    params = config.params
    grid = initial_grid(config, T, init)
    start = grid
    batch = _batch(config, T)
    f = float(np.mean(objective_samples(grid, batch, params, target)))
    history = [HistoryRow(0, f, 0.0, 0.0)]
    small = 0
    converged = False
    status = "max_iter"
    for it in range(1, config.max_iter + 1):
        if config.resample:
            batch = _batch(config, T, it)
            f = float(np.mean(objective_samples(grid, batch, params, target)))
        grad = _target_gradient(grid, batch, params, target)
        gnorm = float(np.linalg.norm(grad))
        step = config.initial_step
        accepted = None
        while step >= config.min_step:
            trial = ascent_step(grid, grad, step)
            f_trial = float(np.mean(objective_samples(trial, batch, params, target)))
            if f_trial > f:
                accepted = trial
                break
            step *= config.backtrack
        if accepted is None:
            # no step above min_step improves the batch objective
            status = "stationary"
            converged = True
            break
        small = small + 1 if f_trial - f < config.tol else 0
        grid, f = accepted, f_trial
        history.append(HistoryRow(it, f, step, gnorm))
        if small >= config.patience:
            status = "converged"
            converged = True
            break
    if not converged:
        logger.warning("GRAPE stopped without converging (%s) at T=%g", status, T)
    return GrapeRun(T, start, grid, history, f, rescore(config, grid, target), converged, status)


def random_inits(config, T, count, seed_offset=0):
    """``count`` uncorrelated initial grids: uniform constants and uniform random grids."""
    n = config.grid_size(T)
    inits = []
    for r in range(count):
        rng = np.random.default_rng(np.random.SeedSequence([config.seed, 0x1417, seed_offset, r]))
        if r % 2 == 0:
            inits.append(ControlGrid.constant(T, n, rng.uniform(-config.a_max, config.a_max), config.a_max))
        else:
            inits.append(ControlGrid(rng.uniform(-config.a_max, config.a_max, n), T / n, config.a_max))
    return inits


@dataclass
class TimeSearch:
    T_grid: list
    best_per_T: list
    all_runs: list

    @property
    def best(self):
        return max(self.best_per_T, key=lambda run: run.fidelity)

    @property
    def best_T(self):
        return self.best.T

    @property
    def curve(self):
        return [(run.T, run.rescore.mean, run.rescore.stderr) for run in self.best_per_T]


def optimize_time(config, T_grid, restarts=1, extra_inits=()):
    """Optimize at every operation time in ``T_grid`` and keep the best restart.

    Each ``T`` starts from the constant field ``a_max / 2`` plus
    ``restarts - 1`` random initializations; ``extra_inits`` (grids or
    callables ``T -> grid``) are added as further starting points.
    """
    T_grid = [check_positive(T, "T") for T in T_grid]
    if not T_grid:
        raise ValueError("T grid must be nonempty")
    restarts = check_count(restarts, "restarts")
    best, runs = [], []
    for i, T in enumerate(T_grid):
        inits = ["constant", *random_inits(config, T, restarts - 1, seed_offset=i)]
        inits += [init(T) if callable(init) else init for init in extra_inits]
        candidates = [optimize(config, T, init) for init in inits]
        runs.append(candidates)
        best.append(max(candidates, key=lambda run: run.fidelity))
    return TimeSearch(T_grid, best, runs)


def write_history_csv(run, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(HISTORY_COLUMNS)
        for row in run.history:
            writer.writerow([format_value(v) for v in (row.iter, row.batch_fidelity, row.step, row.grad_norm)])


class GrapeOptimizer(BaseEstimator):
    """Estimator-style wrapper around :func:`optimize` and :func:`optimize_time`.

    Constructor arguments mirror :class:`GrapeConfig`. ``fit`` takes the
    operation time (a number, or a sequence to search over) and stores the
    optimized pulse in ``grid_``.

    Examples
    --------
    >>> opt = GrapeOptimizer(delta=0.0, n=10, n_batch=2, max_iter=50)
    >>> opt.fit(np.pi).fidelity_ > 0.999
    True
    """

    def __init__(
        self,
        target="bitflip",
        delta=0.125,
        tau_c=5.0,
        n=None,
        dt=DEFAULT_DT,
        n_batch=1000,
        seed=0,
        max_iter=2000,
        initial_step=50.0,
        backtrack=0.5,
        min_step=1e-6,
        tol=1e-7,
        patience=10,
        a_max=1.0,
        rescore_factor=10,
        resample=False,
        restarts=1,
    ):
        self.target = target
        self.delta = delta
        self.tau_c = tau_c
        self.n = n
        self.dt = dt
        self.n_batch = n_batch
        self.seed = seed
        self.max_iter = max_iter
        self.initial_step = initial_step
        self.backtrack = backtrack
        self.min_step = min_step
        self.tol = tol
        self.patience = patience
        self.a_max = a_max
        self.rescore_factor = rescore_factor
        self.resample = resample
        self.restarts = restarts

    def _config(self):
        params = self.get_params()
        params.pop("restarts")
        return GrapeConfig(**params)

    def fit(self, T, init="constant"):
        config = self._config()
        if np.ndim(T) == 0:
            self.run_ = optimize(config, float(T), init)
            self.search_ = None
        else:
            extra = () if isinstance(init, str) else (init,)
            self.search_ = optimize_time(config, list(T), self.restarts, extra)
            self.run_ = self.search_.best
        self.grid_ = self.run_.final
        self.T_ = self.run_.T
        self.history_ = self.run_.history
        self.fidelity_ = self.run_.fidelity
        self.converged_ = self.run_.converged
        return self

    def _check_fitted(self):
        if not hasattr(self, "grid_"):
            from sklearn.exceptions import NotFittedError

            raise NotFittedError("call fit before using the optimizer")

    def score(self, n_traj=None, seed=None):
        """Fidelity of the fitted pulse on a fresh batch (re-score by default)."""
        self._check_fitted()
        config = self._config()
        if n_traj is None and seed is None:
            return self.run_.rescore.mean
        n_traj = config.rescore_factor * config.n_batch if n_traj is None else n_traj
        seed = config.rescore_seed if seed is None else seed
        batch = sample_batch(config.params, self.grid_.duration, n_traj, seed)
        return evaluate(self.grid_, batch, config.params, make_target(config.target)).mean

