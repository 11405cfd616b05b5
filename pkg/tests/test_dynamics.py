"""Tests for the spectral dynamics layer."""

import numpy as np
import pytest
from scipy.integrate import quad

from spinscape.dynamics import (
    avg_fidelity,
    chain_transfer_peaks,
    eigensystem,
    fidelity,
    localization_objective,
    minimizing_phase,
    overlaps,
    propagator,
    sinc,
    sinc_prime,
    tracking_error,
    transfer_amplitude,
)
from spinscape.network import build_network, single_excitation_hamiltonian


def _eig(n, topology, bias):
    net = build_network(n, topology)
    return eigensystem(single_excitation_hamiltonian(net, np.asarray(bias, dtype=float)))


def _random_eig(rng, n=None, topology=None):
    n = n or int(rng.integers(3, 10))
    topology = topology or ("ring" if rng.random() < 0.7 else "chain")
    return _eig(n, topology, rng.normal(0, 2, n)), n


def test_sinc_matches_reference():
    xs = np.array([-3.0, -1e-3, -1e-5, 0.0, 1e-6, 2e-4, 0.5, 10.0])
    for x in xs:
        ref = 1.0 if x == 0 else np.sin(x) / x
        assert abs(sinc(x) - ref) < 1e-14
    # derivative against central differences
    for x in xs:
        h = 1e-6
        fd = (sinc(x + h) - sinc(x - h)) / (2 * h)
        assert abs(sinc_prime(x) - fd) < 1e-8


def test_three_chain_spectrum():
    eig = _eig(3, "chain", [0, 0, 0])
    assert np.allclose(eig.eigenvalues, [-np.sqrt(2), 0.0, np.sqrt(2)], atol=1e-12)


def test_biased_rabi_pair_spectrum():
    c = 0.7
    eig = _eig(2, "chain", [c, c])
    assert np.allclose(eig.eigenvalues, [c - 1.0, c + 1.0], atol=1e-12)


def test_five_ring_degenerate_groups():
    eig = _eig(5, "ring", np.zeros(5))
    # circulant spectrum 2 cos(2 pi k / 5): one simple + two double eigenvalues
    expected = np.sort(2.0 * np.cos(2.0 * np.pi * np.arange(5) / 5))
    assert np.allclose(eig.eigenvalues, expected, atol=1e-10)
    assert eig.n_groups == 3
    assert sorted(len(g) for g in eig.groups) == [1, 2, 2]


def test_eigensystem_orthonormal_and_reconstructs():
    rng = np.random.default_rng(3)
    for _ in range(25):
        n = int(rng.integers(2, 12))
        net = build_network(n, "ring" if rng.random() < 0.5 else "chain")
        h = single_excitation_hamiltonian(net, rng.normal(0, 3, n))
        eig = eigensystem(h)
        V = eig.vectors
        assert np.max(np.abs(V.T @ V - np.eye(n))) < 1e-12
        assert np.max(np.abs((V * eig.eigenvalues) @ V.T - h)) < 1e-10
        assert np.all(np.diff(eig.eigenvalues) >= 0)


def test_eigensystem_rejects_asymmetric():
    with pytest.raises(ValueError):
        eigensystem(np.array([[0.0, 1.0], [1.0 + 1e-12, 0.0]]))


def test_eigensolver_failure_is_wrapped():
    from spinscape.errors import NumericalError

    h = np.full((3, 3), np.inf)
    h[0, 1] = h[1, 0] = 1.0
    with pytest.raises(NumericalError):
        eigensystem(h)


def test_amplitude_at_time_zero():
    eig, n = _random_eig(np.random.default_rng(5))
    assert transfer_amplitude(eig, 1, 1, 0.0) == pytest.approx(1.0, abs=1e-12)
    assert abs(transfer_amplitude(eig, 0, 1, 0.0)) < 1e-12
    assert fidelity(eig, 0, 1, 0.0) < 1e-12


def test_resonant_pair_full_transfer():
    eig = _eig(2, "chain", [0.4, 0.4])
    assert abs(transfer_amplitude(eig, 0, 1, np.pi / 2)) == pytest.approx(1.0, abs=1e-12)


def test_two_spin_rabi_closed_form():
    rng = np.random.default_rng(11)
    for _ in range(30):
        d1, d2 = rng.normal(0, 3, 2)
        t = rng.uniform(0, 12)
        eig = _eig(2, "chain", [d1, d2])
        omega = np.sqrt((d2 - d1) ** 2 + 4.0)
        expected = (2.0 / omega) ** 2 * np.sin(omega * t / 2.0) ** 2
        assert fidelity(eig, 0, 1, t) == pytest.approx(expected, abs=1e-12)


def test_three_chain_sin4_closed_form():
    eig = _eig(3, "chain", [0, 0, 0])
    for t in np.linspace(0.1, 8.0, 40):
        expected = np.sin(np.sqrt(2) * t / 2.0) ** 4
        assert fidelity(eig, 0, 2, t) == pytest.approx(expected, abs=1e-12)
    assert fidelity(eig, 0, 2, np.pi / np.sqrt(2)) >= 1.0 - 1e-12


def test_avg_fidelity_window_collapse():
    rng = np.random.default_rng(23)
    for _ in range(10):
        eig, n = _random_eig(rng)
        m, nn = rng.choice(n, 2, replace=False)
        t = rng.uniform(0.5, 10)
        assert avg_fidelity(eig, m, nn, t, 1e-6) == pytest.approx(
            fidelity(eig, m, nn, t), abs=1e-9)


def test_avg_fidelity_against_quadrature():
    rng = np.random.default_rng(29)
    for _ in range(25):
        eig, n = _random_eig(rng, n=4, topology="ring")
        m, nn = rng.choice(4, 2, replace=False)
        t = rng.uniform(0.5, 12)
        dt = rng.uniform(0.01, 2.0)
        closed = avg_fidelity(eig, m, nn, t, dt)
        num, _ = quad(lambda s: fidelity(eig, m, nn, s), t - dt, t + dt,
                      epsabs=1e-13, epsrel=1e-13, limit=400)
        assert closed == pytest.approx(num / (2 * dt), abs=1e-9)


def test_avg_fidelity_rejects_bad_window():
    eig = _eig(3, "chain", [0, 0, 0])
    with pytest.raises(ValueError):
        avg_fidelity(eig, 0, 2, 1.0, 0.0)
    with pytest.raises(ValueError):
        avg_fidelity(eig, 0, 2, 1.0, -0.5)


def test_localization_two_spin_long_window():
    # Unbiased pair oscillates; the long-window hold probability tends to 1/2.
    eig = _eig(2, "chain", [0.0, 0.0])
    val = localization_objective(eig, 0, 4000.0)
    num, _ = quad(lambda s: fidelity(eig, 0, 0, s), 0.0, 4000.0, limit=4000)
    assert val == pytest.approx(num / 4000.0, abs=1e-6)
    assert val == pytest.approx(0.5, abs=1e-3)
    c = overlaps(eig, 0, 0)
    assert np.sum(c ** 2) == pytest.approx(0.5, abs=1e-12)


def test_localization_deep_well():
    net = build_network(5, "ring")
    bias = np.zeros(5)
    bias[1] = 1e3
    eig = eigensystem(single_excitation_hamiltonian(net, bias))
    hold = 50.0
    val = localization_objective(eig, 1, hold)
    # chunked quadrature: the integrand oscillates at the well frequency
    edges = np.linspace(0.0, hold, 201)
    num = sum(quad(lambda s: fidelity(eig, 1, 1, s), a, b, epsabs=1e-12, limit=200)[0]
              for a, b in zip(edges[:-1], edges[1:]))
    assert val == pytest.approx(num / hold, abs=1e-9)
    assert val > 0.999


def test_tracking_error_perfect_transfer():
    eig = _eig(3, "chain", [0, 0, 0])
    t = np.pi / np.sqrt(2)
    phi = minimizing_phase(eig, 0, 2, t)
    assert tracking_error(eig, 0, 2, t, phi) < 1e-10
    assert tracking_error(eig, 0, 2, t) < 1e-10


def test_tracking_error_orthogonal_states():
    eig, n = _random_eig(np.random.default_rng(31))
    for phi in (0.0, 0.7, -2.0):
        assert tracking_error(eig, 0, 1, 0.0, phi) == pytest.approx(2.0, abs=1e-12)


def test_tracking_error_phase_identity():
    rng = np.random.default_rng(37)
    for _ in range(20):
        eig, n = _random_eig(rng)
        m, nn = rng.choice(n, 2, replace=False)
        t = rng.uniform(0, 10)
        p = fidelity(eig, m, nn, t)
        err = tracking_error(eig, m, nn, t)
        assert err == pytest.approx(2.0 - 2.0 * np.sqrt(p), abs=1e-12)
        # explicit minimizing phase agrees
        phi = minimizing_phase(eig, m, nn, t)
        assert tracking_error(eig, m, nn, t, phi) == pytest.approx(err, abs=1e-12)


def test_propagator_unitary():
    rng = np.random.default_rng(41)
    for _ in range(10):
        eig, n = _random_eig(rng)
        t = rng.uniform(0, 20)
        U = propagator(eig, t)
        assert np.max(np.abs(U @ U.conj().T - np.eye(n))) < 1e-10


def test_chain_peak_times():
    assert chain_transfer_peaks(1)[0] == pytest.approx(np.pi / 2, abs=1e-6)
    assert chain_transfer_peaks(2)[0] == pytest.approx(np.pi / np.sqrt(2), abs=1e-6)
    # the pair's peaks repeat every pi
    p1 = chain_transfer_peaks(1)
    assert p1[1] == pytest.approx(3 * np.pi / 2, abs=1e-5)
