"""Eigendecomposition and closed-form transfer dynamics.

All evolution quantities are evaluated spectrally: with H = V diag(lam) V^T
the transfer amplitude from node m to node n is

    a(t) = sum_k exp(-i t lam_k) V[n,k] V[m,k]

and the windowed average fidelity over [T-dT, T+dT] has the closed form

    pbar = sum_{k,l} c_k c_l cos((lam_k-lam_l) T) sinc((lam_k-lam_l) dT)

with c_k = V[n,k] V[m,k].  No ODE integration anywhere; for these
time-invariant Hamiltonians the spectral forms are exact.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError

# Unnormalized sinc and its derivative switch to Taylor series near 0 to
# avoid 0/0 at (near-)degenerate frequency differences.
_SINC_SMALL = 1e-4


def sinc(x: np.ndarray | float) -> np.ndarray | float:
    """sin(x)/x with sinc(0) = 1 (not numpy's normalized sinc)."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < _SINC_SMALL
    xs = np.where(small, 1.0, x)
    out = np.where(small, 1.0 - x * x / 6.0 + x ** 4 / 120.0, np.sin(xs) / xs)
    return out if out.ndim else float(out)


def sinc_prime(x: np.ndarray | float) -> np.ndarray | float:
    """Derivative of sin(x)/x."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < _SINC_SMALL
    xs = np.where(small, 1.0, x)
    out = np.where(
        small,
        -x / 3.0 + x ** 3 / 30.0,
        (xs * np.cos(xs) - np.sin(xs)) / (xs * xs),
    )
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class EigenSystem:
    """Spectral data of a real symmetric Hamiltonian.

    Eigenvalues ascend; eigenvectors are real, orthonormal columns of
    `vectors`, each sign-fixed so its largest-magnitude entry is positive.
    `groups` partitions the indices into clusters degenerate within
    `degeneracy_tol`.
    """

    eigenvalues: np.ndarray = field(repr=False)
    vectors: np.ndarray = field(repr=False)
    groups: tuple[tuple[int, ...], ...]
    degeneracy_tol: float

    @property
    def n_sites(self) -> int:
        return self.eigenvalues.shape[0]

    @property
    def n_groups(self) -> int:
        return len(self.groups)

    @property
    def group_eigenvalues(self) -> np.ndarray:
        """One representative eigenvalue (cluster mean) per degenerate group."""
        return np.array([self.eigenvalues[list(g)].mean() for g in self.groups])

    @property
    def is_degenerate(self) -> bool:
        return any(len(g) > 1 for g in self.groups)

    def projector(self, k: int) -> np.ndarray:
        """Rank-|group k| projector onto the k-th eigenspace."""
        V = self.vectors[:, list(self.groups[k])]
        return V @ V.T


def eigensystem(h: np.ndarray, degeneracy_tol: float | None = None) -> EigenSystem:
    """Diagonalize a real symmetric Hamiltonian and cluster degeneracies.

    Adjacent eigenvalues are grouped when their gap is at most
    `degeneracy_tol` (default 1e-9 * max(1, spectral radius)).
    """
    h = np.asarray(h, dtype=float)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {h.shape}")
    if not np.array_equal(h, h.T):
        raise ValueError("Hamiltonian must be exactly symmetric")
    try:
        lam, V = np.linalg.eigh(h)
    except np.linalg.LinAlgError as exc:
        scale = float(np.max(np.abs(h))) if h.size else 0.0
        raise NumericalError(
            f"eigendecomposition failed for {h.shape[0]}x{h.shape[0]} matrix "
            f"(max |entry| = {scale:g}): {exc}"
        ) from exc

    # Deterministic sign convention: largest-magnitude entry positive.
    piv = np.argmax(np.abs(V), axis=0)
    flip = V[piv, np.arange(V.shape[1])] < 0
    V = V * np.where(flip, -1.0, 1.0)

    if degeneracy_tol is None:
        radius = float(np.max(np.abs(lam))) if lam.size else 0.0
        degeneracy_tol = 1e-9 * max(1.0, radius)
    groups: list[tuple[int, ...]] = []
    current = [0]
    for i in range(1, lam.shape[0]):
        if lam[i] - lam[i - 1] <= degeneracy_tol:
            current.append(i)
        else:
            groups.append(tuple(current))
            current = [i]
    groups.append(tuple(current))

    lam.flags.writeable = False
    V = np.ascontiguousarray(V)
    V.flags.writeable = False
    return EigenSystem(
        eigenvalues=lam, vectors=V, groups=tuple(groups), degeneracy_tol=degeneracy_tol
    )


def overlaps(eig: EigenSystem, m: int, n: int) -> np.ndarray:
    """Projector overlaps <n|Pi_k|m> per degenerate group (real)."""
    c = eig.vectors[n] * eig.vectors[m]
    return np.array([c[list(g)].sum() for g in eig.groups])


def transfer_amplitude(eig: EigenSystem, m: int, n: int, t: float) -> complex:
    """<n| exp(-i H t) |m>."""
    c = eig.vectors[n] * eig.vectors[m]
    return complex(np.sum(c * np.exp(-1j * t * eig.eigenvalues)))


def fidelity(eig: EigenSystem, m: int, n: int, t: float) -> float:
    """Transfer probability |<n|U(t)|m>|^2, clipped to [0, 1]."""
    p = abs(transfer_amplitude(eig, m, n, t)) ** 2
    return min(p, 1.0)


def avg_fidelity(eig: EigenSystem, m: int, n: int, t: float, delta_t: float) -> float:
    """Mean of the fidelity over the readout window [t - delta_t, t + delta_t]."""
    if delta_t <= 0:
        raise ValueError("delta_t must be positive; use fidelity() for a point readout")
    lam = eig.eigenvalues
    c = eig.vectors[n] * eig.vectors[m]
    om = lam[:, None] - lam[None, :]
    kernel = np.cos(om * t) * sinc(om * delta_t)
    p = float(c @ kernel @ c)
    return min(max(p, 0.0), 1.0)


def localization_objective(eig: EigenSystem, m: int, t_hold: float) -> float:
    """Average probability of remaining at node m over [0, t_hold]."""
    if t_hold <= 0:
        raise ValueError("t_hold must be positive")
    return avg_fidelity(eig, m, m, t_hold / 2.0, t_hold / 2.0)


def minimizing_phase(eig: EigenSystem, m: int, n: int, t: float) -> float:
    """Global phase phi minimizing the tracking error; 0 for a dark amplitude.

    With a = <n|U(t)|m>, the error || |n> - e^{i phi} U(t)|m> ||^2 is
    minimized by phi = -arg(a), where it equals 2 - 2|a|.
    """
    a = transfer_amplitude(eig, m, n, t)
    if abs(a) < 1e-300:
        return 0.0
    return float(-np.angle(a))


def tracking_error(
    eig: EigenSystem, m: int, n: int, t: float, phase: float | None = None
) -> float:
    """Projective tracking error || |n> - e^{i phase} U(t)|m> ||^2.

    When `phase` is omitted the minimizing phase is used, giving
    2 - 2 |<n|U(t)|m>|.
    """
    if phase is None:
        a = transfer_amplitude(eig, m, n, t)
        return max(2.0 - 2.0 * abs(a), 0.0)
    vn = eig.vectors[n]
    vm = eig.vectors[m]
    rot = np.exp(-1j * (t * eig.eigenvalues - phase))
    return float(np.sum(np.abs(vn - rot * vm) ** 2))


def propagator(eig: EigenSystem, t: float) -> np.ndarray:
    """Full unitary exp(-i H t)."""
    phases = np.exp(-1j * t * eig.eigenvalues)
    return (eig.vectors * phases) @ eig.vectors.T


@functools.lru_cache(maxsize=64)
def chain_transfer_peaks(distance: int, t_max: float = 30.0) -> tuple[float, ...]:
    """Times of the end-to-end transfer peaks of a uniform chain.

    For a zero-bias chain of `distance`+1 spins, returns the local maxima
    of |<last|U(t)|first>|^2 on (0, t_max] that reach at least a quarter of
    the best peak, refined by parabolic interpolation.  The first entry is
    the canonical minimum transfer time for that distance (pi/2 for
    distance 1, pi/sqrt(2) for distance 2).
    """
    if distance < 1:
        raise ValueError("distance must be >= 1")
    size = distance + 1
    # Known spectrum of the uniform open chain.
    j = np.arange(1, size + 1)
    lam = 2.0 * np.cos(j * np.pi / (size + 1))
    V = np.sqrt(2.0 / (size + 1)) * np.sin(np.outer(np.arange(1, size + 1), j) * np.pi / (size + 1))
    c = V[size - 1] * V[0]

    horizon = max(t_max, 4.0 + 2.0 * distance)
    dt = 0.002
    ts = np.arange(dt, horizon + dt, dt)
    p = np.abs(np.exp(-1j * np.outer(ts, lam)) @ c) ** 2
    floor = 0.25 * p.max()
    peaks = []
    for i in range(1, len(ts) - 1):
        if p[i] > p[i - 1] and p[i] >= p[i + 1] and p[i] >= floor:
            # Parabolic refinement through the three samples around the peak.
            denom = p[i - 1] - 2.0 * p[i] + p[i + 1]
            shift = 0.0 if denom == 0 else 0.5 * (p[i - 1] - p[i + 1]) / denom
            peaks.append(float(ts[i] + shift * dt))
    return tuple(peaks)
