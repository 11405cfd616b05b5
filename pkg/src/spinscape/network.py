"""Spin networks in the single-excitation picture.

A network is a ring or chain of spins with symmetric couplings J_{kl}.
In the single-excitation subspace the Hamiltonian is the real symmetric
matrix with the couplings off the diagonal and the on-site biases D_k
(plus an optional kappa-dependent shift) on the diagonal.  Units are
hbar = J = 1 throughout; node indices are 0-based internally.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

RING = "ring"
CHAIN = "chain"
TOPOLOGIES = (RING, CHAIN)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class SpinNetwork:
    """Immutable network topology: size, coupling matrix, coupling type."""

    n_spins: int
    topology: str
    couplings: np.ndarray = field(repr=False)
    kappa: float = 0.0

    def __post_init__(self):
        n = self.n_spins
        if n < 2:
            raise ValueError(f"network needs at least 2 spins, got {n}")
        if self.topology not in TOPOLOGIES:
            raise ValueError(f"unknown topology {self.topology!r}")
        J = np.asarray(self.couplings, dtype=float)
        if J.shape != (n, n):
            raise ValueError(f"couplings must be {n}x{n}, got {J.shape}")
        if not np.array_equal(J, J.T):
            raise ValueError("couplings must be symmetric")
        if np.any(J < 0) or not np.all(np.isfinite(J)):
            raise ValueError("couplings must be finite and nonnegative")
        if np.any(np.diag(J) != 0):
            raise ValueError("couplings must have zero diagonal")
        mask = ~self._edge_mask(n, self.topology)
        if np.any(J[mask] != 0):
            raise ValueError(f"couplings outside the {self.topology} edge pattern")
        object.__setattr__(self, "couplings", _frozen(J))

    @staticmethod
    def _edge_mask(n: int, topology: str) -> np.ndarray:
        k = np.arange(n)
        mask = np.abs(k[:, None] - k[None, :]) == 1
        if topology == RING:
            mask[0, n - 1] = mask[n - 1, 0] = True
        return mask

    @property
    def edges(self) -> tuple[tuple[int, int], ...]:
        """Nearest-neighbour edges (k, l) with k < l, ring closure last."""
        e = [(k, k + 1) for k in range(self.n_spins - 1)]
        if self.topology == RING:
            e.append((0, self.n_spins - 1))
        return tuple(e)

    def distance(self, m: int, n: int) -> int:
        """Graph distance between two nodes."""
        d = abs(m - n)
        if self.topology == RING:
            d = min(d, self.n_spins - d)
        return d


def build_network(n_spins: int, topology: str = RING, kappa: float = 0.0) -> SpinNetwork:
    """Uniform nearest-neighbour network with coupling strength J = 1."""
    if n_spins < 2:
        raise ValueError(f"network needs at least 2 spins, got {n_spins}")
    J = np.zeros((n_spins, n_spins))
    for k in range(n_spins - 1):
        J[k, k + 1] = J[k + 1, k] = 1.0
    if topology == RING:
        J[0, n_spins - 1] = J[n_spins - 1, 0] = 1.0
    return SpinNetwork(n_spins=n_spins, topology=topology, couplings=J, kappa=kappa)


def single_excitation_hamiltonian(net: SpinNetwork, bias: np.ndarray) -> np.ndarray:
    """Real symmetric Hamiltonian: couplings off-diagonal, D_k (+ kappa shift) on it.

    For kappa != 0 the diagonal picks up kappa * J_k with J_k = -sum_l J_{kl}
    (the single-excitation reduction of the ZZ part, up to an irrelevant
    uniform offset).  kappa = 0 gives diagonal exactly D_k.
    """
    d = np.asarray(bias, dtype=float)
    if d.shape != (net.n_spins,):
        raise ValueError(f"bias must have length {net.n_spins}, got shape {d.shape}")
    if not np.all(np.isfinite(d)):
        raise ValueError("bias entries must be finite")
    h = net.couplings.copy()
    diag = d.copy()
    if net.kappa != 0.0:
        diag = diag - net.kappa * net.couplings.sum(axis=1)
    h[np.diag_indices_from(h)] = diag
    return h


def reflection_permutation(n_spins: int, m: int, n: int) -> np.ndarray:
    """The node map sigma(x) = (m + n - x) mod N that swaps m and n."""
    _check_node(n_spins, m)
    _check_node(n_spins, n)
    return (m + n - np.arange(n_spins)) % n_spins


def symmetry_orbits(n_spins: int, m: int, n: int) -> tuple[tuple[int, ...], ...]:
    """Orbits of the reflection sigma(m+j) = n-j, walked outward from {m, n}.

    Orbit 0 always contains m and n; subsequent orbits pair (m+j, n-j) for
    growing j.  Fixed points of sigma give singleton orbits.
    """
    sigma = reflection_permutation(n_spins, m, n)
    seen: set[int] = set()
    orbits: list[tuple[int, ...]] = []
    for j in range(n_spins):
        a = (m + j) % n_spins
        if a in seen:
            continue
        b = int(sigma[a])
        orbit = (a,) if a == b else (min(a, b), max(a, b))
        seen.update(orbit)
        orbits.append(orbit)
    return tuple(orbits)


def orbit_indices(n_spins: int, m: int, n: int) -> np.ndarray:
    """Map node -> orbit id for the reflection symmetry of (m, n)."""
    idx = np.empty(n_spins, dtype=np.intp)
    for o, nodes in enumerate(symmetry_orbits(n_spins, m, n)):
        for x in nodes:
            idx[x] = o
    return idx


def expand_symmetric_bias(half: np.ndarray, m: int, n: int, n_spins: int) -> np.ndarray:
    """Expand per-orbit values into a full bias vector with D[sigma(x)] = D[x].

    `half` must have one entry per symmetry orbit (see symmetry_orbits);
    that is ceil(N/2) orbits for odd N and N/2 or N/2 + 1 for even N,
    depending on whether the reflection has fixed nodes.
    """
    half = np.asarray(half, dtype=float)
    idx = orbit_indices(n_spins, m, n)
    n_orbits = int(idx.max()) + 1
    if half.shape != (n_orbits,):
        raise ValueError(
            f"expected {n_orbits} orbit values for N={n_spins}, (m,n)=({m},{n}); "
            f"got shape {half.shape}"
        )
    return half[idx]


def _check_node(n_spins: int, k: int) -> None:
    if not 0 <= k < n_spins:
        raise ValueError(f"node {k} out of range for {n_spins} spins")
