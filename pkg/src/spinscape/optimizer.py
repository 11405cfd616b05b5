"""Multistart quasi-Newton design of bias controllers.

The search runs in the reduced coordinates of the reflection symmetry
between the input and output node (one value per symmetry orbit), which
both shrinks the problem to roughly N/2 parameters and enforces the
eigenvector signature structure that optimal transfer relies on.  Each
restart starts from a randomized landscape shaped like a constant, a
single peak or a single trough on each of the two arcs between the nodes
(quenching the ring towards a chain), with the initial time drawn from
the transfer-peak times of the matching uniform chain.

Ascent is scipy's L-BFGS-B (memory 10) on the exact analytic gradients;
in joint mode the transfer time is an extra coordinate, box-bounded.
Every restart is seeded independently from (seed, restart index), so runs
are reproducible and restarts can execute in parallel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize

from . import dynamics, gradients
from .network import (
    RING,
    SpinNetwork,
    expand_symmetric_bias,
    orbit_indices,
    symmetry_orbits,
)

INSTANTANEOUS = "instantaneous"
WINDOWED = "windowed"
LOCALIZATION = "localization"

_DEFAULT_THRESHOLDS = {INSTANTANEOUS: 0.999, WINDOWED: 0.99, LOCALIZATION: 0.99}


def default_threshold(objective_kind: str) -> float:
    """Fastest-solution fidelity threshold used when none is configured."""
    return _DEFAULT_THRESHOLDS[objective_kind]


@dataclass(frozen=True)
class TransferTask:
    """Excitation transfer from node m to node n (0-based).

    `t` fixes the readout time; leave it None to optimize the time inside
    `t_bounds`.  A positive `delta_t` switches the objective to the average
    fidelity over the window [t - delta_t, t + delta_t].
    """

    m: int
    n: int
    t: float | None = None
    t_bounds: tuple[float, float] = (0.1, 30.0)
    delta_t: float | None = None

    def __post_init__(self):
        lo, hi = self.t_bounds
        if lo < 0 or hi <= lo:
            raise ValueError(f"bad time bounds {self.t_bounds}")
        if self.t is not None and self.t <= 0:
            raise ValueError("fixed time must be positive")
        if self.delta_t is not None and self.delta_t <= 0:
            raise ValueError("delta_t must be positive")

    @property
    def fixed_time(self) -> bool:
        return self.t is not None


@dataclass(frozen=True)
class OptimizationConfig:
    restarts: int = 100
    time_mode: str = "auto"            # auto | fixed | free | joint
    symmetry: bool = True
    bias_init: str = "random-mix"      # constant | peaks | troughs | random-mix
    rng_seed: int = 42
    gradient_tol: float = 1e-9
    max_iterations: int = 1000
    fidelity_threshold: float | None = None
    bias_bound: float | None = None    # optional |D_k| <= bound
    n_jobs: int = 1
    lbfgs_memory: int = 10

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.time_mode not in ("auto", "fixed", "free", "joint"):
            raise ValueError(f"unknown time_mode {self.time_mode!r}")
        if self.bias_init not in ("constant", "peaks", "troughs", "random-mix"):
            raise ValueError(f"unknown bias_init {self.bias_init!r}")

    def threshold_for(self, objective_kind: str) -> float:
        if self.fidelity_threshold is not None:
            return self.fidelity_threshold
        return _DEFAULT_THRESHOLDS[objective_kind]


@dataclass(frozen=True)
class Provenance:
    seed: int
    restart_index: int
    iterations: int
    converged: bool


@dataclass(frozen=True)
class Controller:
    """One optimized bias landscape with its achieved metrics."""

    bias: np.ndarray = field(repr=False)
    time: float
    fidelity: float
    infidelity: float
    provenance: Provenance
    sensitivity_norm: float | None = None

    def __post_init__(self):
        b = np.asarray(self.bias, dtype=float)
        b.flags.writeable = False
        object.__setattr__(self, "bias", b)


@dataclass(frozen=True)
class ControllerSet:
    """All restart results of one design run, sorted by infidelity."""

    m: int
    n: int
    objective_kind: str
    delta_t: float | None
    controllers: tuple[Controller, ...]

    @property
    def best(self) -> Controller:
        return self.controllers[0]

    def __len__(self) -> int:
        return len(self.controllers)


def fastest_above_threshold(cset: ControllerSet, threshold: float) -> Controller | None:
    """Minimum-time controller with fidelity >= threshold, or None."""
    qualifying = [c for c in cset.controllers if c.fidelity >= threshold]
    if not qualifying:
        return None
    return min(qualifying, key=lambda c: (c.time, c.infidelity, c.provenance.restart_index))


# ---------------------------------------------------------------------------
# parametrization and initial guesses
# ---------------------------------------------------------------------------

def _uses_symmetry(net: SpinNetwork, task: TransferTask, config: OptimizationConfig) -> bool:
    if not config.symmetry:
        return False
    if net.topology == RING:
        return True
    # A chain only has the reflection symmetry when m, n mirror its center.
    return task.m + task.n == net.n_spins - 1


def _arc_orbits(net: SpinNetwork, m: int, n: int) -> tuple[list[int], list[int]]:
    """Orbit ids strictly between m and n, one list per arc of the ring."""
    N = net.n_spins
    orbits = symmetry_orbits(N, m, n)
    d = (n - m) % N
    arc1_nodes = {(m + j) % N for j in range(1, d)}
    arc1, arc2 = [], []
    for o, nodes in enumerate(orbits):
        if m in nodes or n in nodes:
            continue
        (arc1 if set(nodes) & arc1_nodes else arc2).append(o)
    return arc1, arc2


def _styles_for(config: OptimizationConfig, rng: np.random.Generator, n_arcs: int) -> list[str]:
    if config.bias_init == "random-mix":
        return [("constant", "peaks", "troughs")[rng.integers(0, 3)] for _ in range(n_arcs)]
    return [config.bias_init] * n_arcs


def _guess_bias(net: SpinNetwork, task: TransferTask, config: OptimizationConfig,
                rng: np.random.Generator, n_params: int, symmetric: bool) -> np.ndarray:
    x = _raw_guess_bias(net, task, config, rng, n_params, symmetric)
    if config.bias_bound is not None:
        x = np.clip(x, -config.bias_bound, config.bias_bound)
    return x


def _raw_guess_bias(net: SpinNetwork, task: TransferTask, config: OptimizationConfig,
                    rng: np.random.Generator, n_params: int, symmetric: bool) -> np.ndarray:
    x = np.zeros(n_params)
    if not symmetric:
        # Unreduced search: same style vocabulary applied to raw node values.
        style = _styles_for(config, rng, 1)[0]
        amp = 10.0 ** rng.uniform(-1.0, 2.0)
        if style == "constant":
            x[:] = amp
        else:
            x[rng.integers(0, n_params)] = amp if style == "peaks" else -amp
        return x

    arc1, arc2 = _arc_orbits(net, task.m, task.n)
    styles = _styles_for(config, rng, 2)
    for arc, style in zip((arc1, arc2), styles):
        if not arc:
            continue
        amp = 10.0 ** rng.uniform(-1.0, 2.0)
        if style == "constant":
            for o in arc:
                x[o] = amp
        elif style == "peaks":
            x[arc[len(arc) // 2]] = amp
        else:
            x[arc[len(arc) // 2]] = -amp
    return x


def _time_pool(net: SpinNetwork, task: TransferTask) -> tuple[float, ...]:
    dist = max(net.distance(task.m, task.n), 1)
    lo, hi = task.t_bounds
    peaks = dynamics.chain_transfer_peaks(dist, t_max=hi)
    pool = tuple(t for t in peaks if lo <= t <= hi)
    if not pool:
        pool = (min(max(peaks[0], lo), hi),)
    return pool


def _restart_rng(seed_path: tuple[int, ...], restart: int) -> np.random.Generator:
    return np.random.default_rng([*seed_path, restart])


def initial_guesses(net: SpinNetwork, task: TransferTask, config: OptimizationConfig,
                    seed_path: tuple[int, ...] | None = None):
    """Deterministic stream of (bias parameters, initial time) per restart."""
    symmetric = _uses_symmetry(net, task, config)
    n_params = (len(symmetry_orbits(net.n_spins, task.m, task.n))
                if symmetric else net.n_spins)
    pool = None if task.fixed_time else _time_pool(net, task)
    path = seed_path if seed_path is not None else (config.rng_seed,)
    for r in range(config.restarts):
        rng = _restart_rng(path, r)
        half = _guess_bias(net, task, config, rng, n_params, symmetric)
        t0 = task.t if task.fixed_time else float(pool[rng.integers(0, len(pool))])
        yield half, t0


# ---------------------------------------------------------------------------
# the ascent itself
# ---------------------------------------------------------------------------

def _objective_kind(task: TransferTask) -> str:
    if task.delta_t is None:
        return INSTANTANEOUS
    return LOCALIZATION if task.m == task.n else WINDOWED


def _run_restart(net: SpinNetwork, task: TransferTask, config: OptimizationConfig,
                 restart: int, x0_bias: np.ndarray, t0: float,
                 symmetric: bool) -> Controller:
    N = net.n_spins
    base = net.couplings.copy()
    if net.kappa != 0.0:
        base[np.diag_indices(N)] = -net.kappa * net.couplings.sum(axis=1)
    oidx = orbit_indices(N, task.m, task.n) if symmetric else np.arange(N)
    n_params = x0_bias.shape[0]
    joint = not task.fixed_time
    m, n, dT = task.m, task.n, task.delta_t

    def fg(x: np.ndarray):
        d_full = x[:n_params][oidx]
        t = x[n_params] if joint else task.t
        h = base.copy()
        h[np.diag_indices(N)] += d_full
        eig = dynamics.eigensystem(h)
        if dT is None:
            p = dynamics.fidelity(eig, m, n, t)
            g_bias = gradients.grad_fidelity_bias(eig, m, n, t)
            g_t = gradients.grad_fidelity_time(eig, m, n, t) if joint else None
        else:
            p = dynamics.avg_fidelity(eig, m, n, t, dT)
            g_bias, g_t = gradients.grad_avg_fidelity(eig, m, n, t, dT)
        g = np.bincount(oidx, weights=g_bias, minlength=n_params)
        if joint:
            g = np.concatenate([g, [g_t]])
        return -p, -g

    bb = config.bias_bound
    bounds = [(-bb, bb) if bb is not None else (None, None)] * n_params
    x0 = x0_bias
    if joint:
        bounds.append(task.t_bounds)
        x0 = np.concatenate([x0_bias, [t0]])
    elif bb is None:
        bounds = None

    converged = False
    iterations = 0
    try:
        res = minimize(
            fg, x0, jac=True, method="L-BFGS-B", bounds=bounds,
            options=dict(
                maxcor=config.lbfgs_memory,
                maxiter=config.max_iterations,
                gtol=config.gradient_tol,
                ftol=0.0,
            ),
        )
        x = res.x
        iterations = int(res.nit)
        if not np.all(np.isfinite(x)):
            x = x0
        else:
            # L-BFGS-B also stops when it cannot strictly decrease f, so its
            # success flag overstates convergence; recheck the first-order
            # condition against the exact gradient at the final iterate.
            pg = np.asarray(res.jac, dtype=float).copy()
            if bounds is not None:
                for i, (lo, hi) in enumerate(bounds):
                    if lo is not None and x[i] <= lo + 1e-12:
                        pg[i] = min(pg[i], 0.0)
                    if hi is not None and x[i] >= hi - 1e-12:
                        pg[i] = max(pg[i], 0.0)
            converged = bool(np.max(np.abs(pg)) <= config.gradient_tol)
    except (np.linalg.LinAlgError, ValueError):
        x = x0

    d_full = x[:n_params][oidx]
    t_final = float(x[n_params]) if joint else float(task.t)
    h = base.copy()
    h[np.diag_indices(N)] += d_full
    eig = dynamics.eigensystem(h)
    if dT is None:
        p = dynamics.fidelity(eig, m, n, t_final)
    else:
        p = dynamics.avg_fidelity(eig, m, n, t_final, dT)
    if not math.isfinite(p):
        p, converged = 0.0, False
    return Controller(
        bias=d_full,
        time=t_final,
        fidelity=float(p),
        infidelity=1.0 - float(p),
        provenance=Provenance(
            seed=config.rng_seed, restart_index=restart,
            iterations=iterations, converged=converged,
        ),
    )


def maximize(net: SpinNetwork, task: TransferTask, config: OptimizationConfig,
             seed_path: tuple[int, ...] | None = None) -> ControllerSet:
    """Run every restart and return all results sorted by infidelity."""
    if not 0 <= task.m < net.n_spins or not 0 <= task.n < net.n_spins:
        raise ValueError("task nodes out of range for this network")
    if config.time_mode == "fixed" and not task.fixed_time:
        raise ValueError("time_mode 'fixed' requires task.t")
    symmetric = _uses_symmetry(net, task, config)
    guesses = list(initial_guesses(net, task, config, seed_path=seed_path))

    def run(r: int) -> Controller:
        half, t0 = guesses[r]
        return _run_restart(net, task, config, r, half, t0, symmetric)

    if config.n_jobs != 1:
        from joblib import Parallel, delayed
        controllers = Parallel(n_jobs=config.n_jobs)(
            delayed(run)(r) for r in range(config.restarts)
        )
    else:
        controllers = [run(r) for r in range(config.restarts)]

    ordered = tuple(sorted(
        controllers,
        key=lambda c: (math.isnan(c.infidelity), c.infidelity, c.provenance.restart_index),
    ))
    return ControllerSet(
        m=task.m, n=task.n, objective_kind=_objective_kind(task),
        delta_t=task.delta_t, controllers=ordered,
    )


def localize(net: SpinNetwork, node: int, t_hold: float,
             config: OptimizationConfig) -> ControllerSet:
    """Maximize the average probability of staying at `node` over [0, t_hold]."""
    if t_hold <= 0:
        raise ValueError("t_hold must be positive")
    task = TransferTask(m=node, n=node, t=t_hold / 2.0, delta_t=t_hold / 2.0)
    return maximize(net, task, config)


def sweep_fixed_times(net: SpinNetwork, task: TransferTask, config: OptimizationConfig,
                      times: np.ndarray) -> list[ControllerSet]:
    """Independent multistart runs at each fixed readout time.

    Restart r of grid point i is seeded from (seed, i, r), so the sweep is
    reproducible and each grid point is statistically independent.
    """
    tasks = [replace(task, t=float(t)) for t in times]

    def run(i: int) -> ControllerSet:
        sub = replace(config, n_jobs=1)
        return maximize(net, tasks[i], sub, seed_path=(config.rng_seed, i))

    if config.n_jobs != 1:
        from joblib import Parallel, delayed
        return list(Parallel(n_jobs=config.n_jobs)(
            delayed(run)(i) for i in range(len(tasks))
        ))
    return [run(i) for i in range(len(tasks))]


def refine(net: SpinNetwork, task: TransferTask, config: OptimizationConfig,
           ctrl: Controller) -> Controller:
    """Re-polish a controller with a fresh L-BFGS run from its own landscape."""
    symmetric = _uses_symmetry(net, task, config)
    if symmetric:
        orbits = symmetry_orbits(net.n_spins, task.m, task.n)
        x0 = np.array([ctrl.bias[nodes[0]] for nodes in orbits])
        full = expand_symmetric_bias(x0, task.m, task.n, net.n_spins)
        if np.max(np.abs(full - ctrl.bias)) > 1e-9:
            raise ValueError("controller bias is not symmetric; refine with symmetry=False")
    else:
        x0 = np.asarray(ctrl.bias, dtype=float)
    t0 = ctrl.time if not task.fixed_time else task.t
    out = _run_restart(net, task, config, ctrl.provenance.restart_index, x0, t0, symmetric)
    return replace(out, provenance=replace(out.provenance, seed=ctrl.provenance.seed))
