"""Exact first derivatives of the transfer objectives.

Everything is built on the spectral perturbation identity for the
probability p(T) = |<n|U(T)|m>|^2 under H -> H + delta * S with S real
symmetric:

    dp/ddelta = -2T sum_{k,l} <n|Pi_k S Pi_l|m> sinc(T w_kl / 2)
                    * sum_j <m|Pi_j|n> sin(T (w_kj + w_lj) / 2)

with w_kl = lam_k - lam_l.  The k = l terms are covered by the sinc(0) = 1
convention, so the formula is smooth through degeneracies.  The j-sum
factors through the transfer amplitude a = sum_j c_j exp(-i T lam_j):

    sum_j c_j sin(T (lam_k + lam_l)/2 - T lam_j) = Im(a e^{i T (lam_k+lam_l)/2})

which makes each evaluation O(N^2) given the eigensystem.

For the windowed average fidelity the same derivation goes through with
cos(w T) replaced by its window average h(w) = cos(w T) sinc(w dT); the
resulting pair kernel is a divided difference of h, computed with a
midpoint-derivative guard where it becomes 0/0.

Finite-difference oracles for all derivatives live at the bottom; they
deliberately go through fresh eigendecompositions of the perturbed
Hamiltonian rather than any of the analytic machinery above.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import EigenSystem, avg_fidelity, eigensystem, fidelity, sinc, sinc_prime


@dataclass(frozen=True)
class PerturbationStructure:
    """Real symmetric direction S of a structured Hamiltonian perturbation."""

    kind: str                      # "bias" or "coupling"
    sites: tuple[int, ...]
    matrix: np.ndarray = field(repr=False)


def bias_structure(mu: int, n_sites: int) -> PerturbationStructure:
    """S = |mu><mu|: uncertainty in the on-site bias D_mu."""
    S = np.zeros((n_sites, n_sites))
    S[mu, mu] = 1.0
    return PerturbationStructure(kind="bias", sites=(mu,), matrix=S)


def coupling_structure(k: int, l: int, n_sites: int) -> PerturbationStructure:
    """S = |k><l| + |l><k|: uncertainty in the coupling J_{kl}."""
    if k == l:
        raise ValueError("coupling structure needs two distinct sites")
    S = np.zeros((n_sites, n_sites))
    S[k, l] = S[l, k] = 1.0
    return PerturbationStructure(kind="coupling", sites=(min(k, l), max(k, l)), matrix=S)


def _as_matrix(structure: PerturbationStructure | np.ndarray) -> np.ndarray:
    S = structure.matrix if isinstance(structure, PerturbationStructure) else np.asarray(structure, dtype=float)
    if not np.array_equal(S, S.T):
        raise ValueError("perturbation structure must be symmetric")
    return S


# ---------------------------------------------------------------------------
# instantaneous fidelity
# ---------------------------------------------------------------------------

def _pair_kernel(eig: EigenSystem, m: int, n: int, t: float) -> np.ndarray:
    """K[k,l] = -2t sinc(t w_kl / 2) Im(a e^{i t (lam_k + lam_l) / 2})."""
    lam = eig.eigenvalues
    c = eig.vectors[n] * eig.vectors[m]
    a = np.sum(c * np.exp(-1j * t * lam))
    om = lam[:, None] - lam[None, :]
    x = 0.5 * t * (lam[:, None] + lam[None, :])
    g = a.real * np.sin(x) + a.imag * np.cos(x)
    return -2.0 * t * sinc(0.5 * t * om) * g


def _contract(eig: EigenSystem, m: int, n: int, kernel: np.ndarray,
              structure: PerturbationStructure | np.ndarray) -> float:
    S = _as_matrix(structure)
    W = eig.vectors.T @ S @ eig.vectors
    return float(eig.vectors[n] @ (W * kernel) @ eig.vectors[m])


def _contract_all_biases(eig: EigenSystem, m: int, n: int, kernel: np.ndarray) -> np.ndarray:
    # For S = |mu><mu| the eigenbasis matrix W factors as an outer product of
    # row mu of V, so all N bias directions contract in one pass.
    A = eig.vectors * eig.vectors[n]
    B = eig.vectors * eig.vectors[m]
    return ((A @ kernel) * B).sum(axis=1)


def sensitivity(eig: EigenSystem, m: int, n: int, t: float,
                structure: PerturbationStructure | np.ndarray) -> float:
    """d p / d delta at delta = 0 for H -> H + delta * S."""
    return _contract(eig, m, n, _pair_kernel(eig, m, n, t), structure)


def grad_fidelity_bias(eig: EigenSystem, m: int, n: int, t: float) -> np.ndarray:
    """dp/dD_mu for every bias entry, at the current Hamiltonian."""
    return _contract_all_biases(eig, m, n, _pair_kernel(eig, m, n, t))


def grad_fidelity_time(eig: EigenSystem, m: int, n: int, t: float) -> float:
    """dp/dt of the instantaneous fidelity."""
    lam = eig.eigenvalues
    c = eig.vectors[n] * eig.vectors[m]
    phases = np.exp(-1j * t * lam)
    a = np.sum(c * phases)
    return float(2.0 * np.imag(np.conj(a) * np.sum(lam * c * phases)))


# ---------------------------------------------------------------------------
# windowed average fidelity
# ---------------------------------------------------------------------------

def _window_kernel(eig: EigenSystem, m: int, n: int, t: float, delta_t: float) -> np.ndarray:
    """Window-averaged analogue of _pair_kernel.

    With h(w) = cos(w t) sinc(w dT) and u = h(W) c, the off-diagonal entries
    are divided differences 2 (u_k - u_l) / w_kl; near-degenerate pairs
    switch to the symmetrized derivative h'(W) c, which matches the divided
    difference to second order in the gap.
    """
    lam = eig.eigenvalues
    c = eig.vectors[n] * eig.vectors[m]
    om = lam[:, None] - lam[None, :]
    h = np.cos(om * t) * sinc(om * delta_t)
    hp = -t * np.sin(om * t) * sinc(om * delta_t) + delta_t * np.cos(om * t) * sinc_prime(om * delta_t)
    u = h @ c
    w = hp @ c
    gap_floor = 1e-5 / max(1.0, t + delta_t)
    near = np.abs(om) <= gap_floor
    om_safe = np.where(near, 1.0, om)
    dd = 2.0 * (u[:, None] - u[None, :]) / om_safe
    return np.where(near, w[:, None] + w[None, :], dd)


def sensitivity_avg(eig: EigenSystem, m: int, n: int, t: float, delta_t: float,
                    structure: PerturbationStructure | np.ndarray) -> float:
    """d pbar / d delta at delta = 0 for the windowed average fidelity."""
    if delta_t <= 0:
        raise ValueError("delta_t must be positive")
    return _contract(eig, m, n, _window_kernel(eig, m, n, t, delta_t), structure)


def grad_avg_fidelity(eig: EigenSystem, m: int, n: int, t: float,
                      delta_t: float) -> tuple[np.ndarray, float]:
    """(d pbar/dD, d pbar/dT) of the windowed average fidelity."""
    if delta_t <= 0:
        raise ValueError("delta_t must be positive")
    g_bias = _contract_all_biases(eig, m, n, _window_kernel(eig, m, n, t, delta_t))
    lam = eig.eigenvalues
    c = eig.vectors[n] * eig.vectors[m]
    om = lam[:, None] - lam[None, :]
    g_time = float(c @ (-om * np.sin(om * t) * sinc(om * delta_t)) @ c)
    return g_bias, g_time


# ---------------------------------------------------------------------------
# finite-difference oracles
# ---------------------------------------------------------------------------

def _fd(value, x0: float, step: float, richardson: bool) -> float:
    def central(h):
        return (value(x0 + h) - value(x0 - h)) / (2.0 * h)

    if not richardson:
        return central(step)
    # Extrapolate with step and 2*step: cancels the O(h^2) truncation term
    # without shrinking the step into the roundoff floor.
    return (4.0 * central(step) - central(2.0 * step)) / 3.0


def fd_sensitivity(h: np.ndarray, m: int, n: int, t: float,
                   structure: PerturbationStructure | np.ndarray,
                   step: float = 1e-6, richardson: bool = False,
                   delta_t: float | None = None) -> float:
    """Central-difference sensitivity from fresh diagonalizations of H + delta*S.

    With `delta_t` set, differentiates the windowed average fidelity instead.
    """
    S = _as_matrix(structure)

    def value(delta: float) -> float:
        eig = eigensystem(_sym(h + delta * S))
        if delta_t is None:
            return fidelity(eig, m, n, t)
        return avg_fidelity(eig, m, n, t, delta_t)

    return _fd(value, 0.0, step, richardson)


def fd_grad_bias(h: np.ndarray, m: int, n: int, t: float, step: float = 1e-6,
                 richardson: bool = False, delta_t: float | None = None) -> np.ndarray:
    """Finite-difference gradient of the fidelity w.r.t. every bias entry."""
    n_sites = h.shape[0]
    return np.array([
        fd_sensitivity(h, m, n, t, bias_structure(mu, n_sites), step=step,
                       richardson=richardson, delta_t=delta_t)
        for mu in range(n_sites)
    ])


def fd_grad_time(h: np.ndarray, m: int, n: int, t: float, step: float = 1e-6,
                 richardson: bool = False, delta_t: float | None = None) -> float:
    """Finite-difference time derivative of the (windowed) fidelity."""
    eig = eigensystem(h)

    def value(tt: float) -> float:
        if delta_t is None:
            return fidelity(eig, m, n, tt)
        return avg_fidelity(eig, m, n, tt, delta_t)

    return _fd(value, t, step, richardson)


def _sym(a: np.ndarray) -> np.ndarray:
    # Re-symmetrize bitwise after float arithmetic on a symmetric matrix.
    return 0.5 * (a + a.T)
