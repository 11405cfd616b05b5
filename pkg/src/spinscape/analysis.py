"""Numerical verification of the eigenstructure and robustness theory.

Checks implemented here:

* superoptimality: the transfer reaches the projection bound
  sum_k |<n|Pi_k|m>| = 1 with every T lam_k - phi an even (positive
  overlap) or odd (negative overlap) multiple of pi;
* the zero-sum identity sum_k <n|Pi_k|m> = 0 for m != n and its sign
  corollary;
* the signature symmetry (v_k)_{m+l} = s_k (v_k)_{n-l} of eigenvectors
  under reflection-symmetric biases, including the vanishing component at
  reflection fixed points for antisymmetric eigenvectors;
* vanishing first-order sensitivity at (super)optimal controllers, via the
  norm of the coupling-uncertainty sensitivity vector;
* rank concordance between infidelity and sensitivity across a set of
  optimized controllers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import stats

from . import dynamics, gradients
from .errors import InsufficientDataError
from .network import CHAIN, RING, SpinNetwork, reflection_permutation, single_excitation_hamiltonian
from .optimizer import Controller, ControllerSet

DARK_TOL = 1e-10


# ---------------------------------------------------------------------------
# superoptimality / zero sum
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SuperoptimalityReport:
    projection_sum: float
    projection_residual: float
    phase_residuals: tuple[float, ...]   # one per non-dark eigenspace
    dark_states: tuple[int, ...]         # group indices with negligible overlap
    global_phase: float
    epsilon: float
    is_superoptimal: bool

    @property
    def max_phase_residual(self) -> float:
        return max(self.phase_residuals, default=0.0)


def check_superoptimality(eig: dynamics.EigenSystem, m: int, n: int, t: float,
                          epsilon: float = 1e-6,
                          dark_tol: float = DARK_TOL) -> SuperoptimalityReport:
    """Check the two optimality conditions at time t.

    Condition (i): the non-dark projector overlaps sum to 1 in absolute
    value.  Condition (ii): t*lam_k - phi sits on an even multiple of pi
    where the overlap is positive and an odd multiple where negative, with
    phi the tracking-error-minimizing global phase.
    """
    c = dynamics.overlaps(eig, m, n)
    lam_g = eig.group_eigenvalues
    projection_sum = float(np.sum(np.abs(c)))
    phi = dynamics.minimizing_phase(eig, m, n, t)

    dark = tuple(int(k) for k in np.flatnonzero(np.abs(c) < dark_tol))
    residuals = []
    for k in range(eig.n_groups):
        if k in dark:
            continue
        theta = t * lam_g[k] - phi
        # distance to the nearest even / odd multiple of pi
        target = 0.0 if c[k] > 0 else math.pi
        r = abs(math.remainder(theta - target, 2.0 * math.pi))
        residuals.append(float(r))

    projection_residual = abs(1.0 - projection_sum)
    is_super = projection_residual < epsilon and max(residuals, default=0.0) < epsilon
    return SuperoptimalityReport(
        projection_sum=projection_sum,
        projection_residual=projection_residual,
        phase_residuals=tuple(residuals),
        dark_states=dark,
        global_phase=phi,
        epsilon=epsilon,
        is_superoptimal=is_super,
    )


@dataclass(frozen=True)
class ZeroSumReport:
    residual: float
    signs: tuple[int, ...]          # signs of the non-dark overlaps
    both_signs_present: bool


def check_zero_sum(eig: dynamics.EigenSystem, m: int, n: int,
                   dark_tol: float = DARK_TOL) -> ZeroSumReport:
    """|sum_k <n|Pi_k|m>| for m != n, plus the sign corollary.

    The overlaps resolve <n|m> = 0, so they must cancel; in particular the
    non-dark ones cannot all share a sign.
    """
    if m == n:
        raise ValueError("zero-sum check applies to distinct nodes only")
    c = dynamics.overlaps(eig, m, n)
    live = c[np.abs(c) >= dark_tol]
    signs = tuple(int(np.sign(x)) for x in live)
    return ZeroSumReport(
        residual=float(abs(c.sum())),
        signs=signs,
        both_signs_present=len(set(signs)) == 2,
    )


# ---------------------------------------------------------------------------
# signature symmetry
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SignatureReport:
    max_violation: float
    signs: tuple[int, ...]
    fixed_points: tuple[int, ...]
    midpoint_violation: float | None    # max |v_k[fixed]| over s_k = -1 vectors
    inconclusive: bool                  # degenerate spectrum: premise unmet


def check_signature(eig: dynamics.EigenSystem, m: int, n: int, bias: np.ndarray,
                    topology: str = RING, bias_tol: float = 1e-12,
                    dark_tol: float = DARK_TOL) -> SignatureReport:
    """Verify the eigenvector signature symmetry under a symmetric bias.

    Requires the bias to satisfy D[sigma(x)] = D[x] for the reflection
    sigma swapping m and n (raised otherwise), and a non-degenerate
    spectrum (otherwise the result is flagged inconclusive).
    """
    N = eig.n_sites
    bias = np.asarray(bias, dtype=float)
    if topology == CHAIN and m + n != N - 1:
        raise ValueError(
            f"chain reflection through ({m},{n}) is not a symmetry; need m + n = N - 1"
        )
    sigma = reflection_permutation(N, m, n)
    if np.max(np.abs(bias - bias[sigma])) > bias_tol:
        raise ValueError("bias does not satisfy the reflection symmetry between m and n")

    fixed = tuple(int(x) for x in np.flatnonzero(sigma == np.arange(N)))
    if eig.is_degenerate:
        return SignatureReport(
            max_violation=float("nan"), signs=(), fixed_points=fixed,
            midpoint_violation=None, inconclusive=True,
        )

    V = eig.vectors
    signs = []
    violations = []
    mid_violation = None
    for k in range(N):
        v = V[:, k]
        w = v[sigma]
        prod = v[n] * v[m]
        if abs(prod) >= dark_tol * dark_tol:
            s = 1 if prod > 0 else -1
        else:
            s = 1 if np.max(np.abs(w - v)) <= np.max(np.abs(w + v)) else -1
        signs.append(s)
        violations.append(float(np.max(np.abs(w - s * v))))
        if s == -1 and fixed:
            worst = float(np.max(np.abs(v[list(fixed)])))
            mid_violation = worst if mid_violation is None else max(mid_violation, worst)

    return SignatureReport(
        max_violation=max(violations),
        signs=tuple(signs),
        fixed_points=fixed,
        midpoint_violation=mid_violation,
        inconclusive=False,
    )


# ---------------------------------------------------------------------------
# speed limits
# ---------------------------------------------------------------------------

_SPEED_LIMITS = {1: math.pi / 2.0, 2: math.pi / math.sqrt(2.0)}


def speed_limit(distance: int) -> float | None:
    """Exact minimum transfer time for node distance 1 or 2; None beyond.

    Distance 1 reduces to a resonant two-spin flip (T = pi/2); distance 2
    to the zero-bias three-chain (T = pi/sqrt(2)).  No closed form is
    available for larger distances; see chain_peak_heuristic.
    """
    if distance < 1:
        raise ValueError("distance must be >= 1")
    return _SPEED_LIMITS.get(distance)


def chain_peak_heuristic(distance: int) -> float:
    """First transfer peak of the matching uniform chain (heuristic, not a bound)."""
    return dynamics.chain_transfer_peaks(distance)[0]


# ---------------------------------------------------------------------------
# sensitivity
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SensitivityReport:
    structures: tuple[tuple[str, int, int], ...]
    values: tuple[float, ...]
    norm: float
    fd_residual: float | None


def sensitivity_report(net: SpinNetwork, bias: np.ndarray, t: float, m: int, n: int,
                       delta_t: float | None = None, fd_check: bool = True,
                       fd_step: float = 1e-6) -> SensitivityReport:
    """Sensitivities of the controller's objective to every coupling uncertainty.

    One structured perturbation per nearest-neighbour edge; the report
    carries the vector, its Euclidean norm and (optionally) the worst
    deviation from a central finite difference of the perturbed evolution.
    """
    h = single_excitation_hamiltonian(net, bias)
    eig = dynamics.eigensystem(h)
    values = []
    fd_res = 0.0 if fd_check else None
    structures = []
    for (k, l) in net.edges:
        S = gradients.coupling_structure(k, l, net.n_spins)
        if delta_t is None:
            val = gradients.sensitivity(eig, m, n, t, S)
        else:
            val = gradients.sensitivity_avg(eig, m, n, t, delta_t, S)
        values.append(float(val))
        structures.append(("coupling", k, l))
        if fd_check:
            fd = gradients.fd_sensitivity(h, m, n, t, S, step=fd_step, delta_t=delta_t)
            fd_res = max(fd_res, abs(val - fd))
    return SensitivityReport(
        structures=tuple(structures),
        values=tuple(values),
        norm=float(np.linalg.norm(values)),
        fd_residual=fd_res,
    )


def controller_sensitivity(net: SpinNetwork, cset: ControllerSet, ctrl: Controller,
                           fd_check: bool = False) -> SensitivityReport:
    """Sensitivity report for a controller's own objective (point or windowed)."""
    return sensitivity_report(
        net, ctrl.bias, ctrl.time, cset.m, cset.n,
        delta_t=cset.delta_t, fd_check=fd_check,
    )


def attach_sensitivity_norms(net: SpinNetwork, cset: ControllerSet,
                             fd_check: bool = False) -> ControllerSet:
    """Return a copy of the set with every controller's sensitivity norm filled."""
    updated = tuple(
        replace(c, sensitivity_norm=controller_sensitivity(net, cset, c, fd_check=fd_check).norm)
        for c in cset.controllers
    )
    return replace(cset, controllers=updated)


# ---------------------------------------------------------------------------
# concordance
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConcordanceReport:
    tau: float
    n_used: int
    all_tied: bool
    top_decile_median: float
    bottom_decile_median: float


def concordance(cset: ControllerSet, fidelity_floor: float = 0.1,
                min_controllers: int = 10) -> ConcordanceReport:
    """Kendall tau between infidelity and sensitivity norm over a controller set.

    Controllers at or below `fidelity_floor` are dropped, mirroring how the
    optimization studies discard outright failures.  Decile medians of the
    sensitivity norm (by infidelity rank) quantify the spread between the
    best and worst surviving controllers.
    """
    usable = [c for c in cset.controllers
              if c.fidelity > fidelity_floor and c.sensitivity_norm is not None]
    if len(usable) < min_controllers:
        raise InsufficientDataError(
            f"need at least {min_controllers} controllers above fidelity "
            f"{fidelity_floor}, have {len(usable)}"
        )
    usable.sort(key=lambda c: c.infidelity)
    infid = np.array([c.infidelity for c in usable])
    norms = np.array([c.sensitivity_norm for c in usable])

    tau, _ = stats.kendalltau(infid, norms)
    all_tied = bool(np.isnan(tau))
    decile = max(1, len(usable) // 10)
    return ConcordanceReport(
        tau=0.0 if all_tied else float(tau),
        n_used=len(usable),
        all_tied=all_tied,
        top_decile_median=float(np.median(norms[:decile])),
        bottom_decile_median=float(np.median(norms[-decile:])),
    )
