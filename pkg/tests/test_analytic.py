"""Closed-form two-level model, checked against hand values and a partial-trace oracle."""

import math

import numpy as np
import pytest

from grovertn import analytic
from grovertn.errors import ValidationError

from conftest import two_level_state_vector


def test_grover_angle_small_cases():
    assert analytic.grover_angle(2, 0) == pytest.approx(math.pi / 6, abs=1e-15)
    assert analytic.grover_angle(2, 1) == pytest.approx(math.pi / 2, abs=1e-15)


def test_grover_angle_large_case():
    # 51 * asin(1/32), evaluated independently
    assert analytic.grover_angle(10, 25) == pytest.approx(51 * math.asin(1 / 32), abs=0)
    assert analytic.grover_angle(10, 25) == pytest.approx(1.5940095134742530, abs=1e-12)


def test_grover_angle_domain():
    with pytest.raises(ValidationError):
        analytic.grover_angle(1, 0)
    with pytest.raises(ValidationError):
        analytic.grover_angle(4, -1)


def test_ideal_success_probability():
    assert analytic.ideal_success_probability(2, 1) == pytest.approx(1.0, abs=1e-15)
    assert analytic.ideal_success_probability(2, 0) == pytest.approx(0.25, abs=1e-15)
    assert analytic.ideal_success_probability(10, 25) == pytest.approx(0.9994612447444079, abs=1e-12)


def test_optimal_iterations():
    assert analytic.optimal_iterations(4) == 3
    assert analytic.optimal_iterations(16) == 201
    assert analytic.optimal_iterations(24) == 3216


def test_near_unity_peak():
    for n in range(4, 25):
        peak = analytic.ideal_success_probability(n, analytic.optimal_iterations(n))
        assert peak >= 1.0 - 2.0 ** (-n / 2)


def test_reduced_dm_elements_pure_target():
    alpha, beta, gamma = analytic.reduced_dm_elements(4, math.pi / 2)
    assert alpha == pytest.approx(1.0, abs=1e-15)
    assert beta == pytest.approx(0.0, abs=1e-15)
    assert gamma == pytest.approx(0.0, abs=1e-15)


def test_reduced_dm_elements_known_point():
    alpha, beta, gamma = analytic.reduced_dm_elements(4, math.pi / 4)
    assert alpha == pytest.approx(0.6, abs=1e-12)
    assert beta == pytest.approx(0.22909944487358058, abs=1e-12)
    assert gamma == pytest.approx(2.0 / 15.0, abs=1e-12)


def test_reduced_dm_trace_identity():
    for n in (2, 4, 8, 16, 40):
        root_n = 2.0 ** (n / 2)
        for theta in np.linspace(0.0, math.pi / 2, 17):
            alpha, _, gamma = analytic.reduced_dm_elements(n, theta)
            assert alpha + (root_n - 1.0) * gamma == pytest.approx(1.0, abs=1e-13)


def test_reduced_dm_odd_n_rejected():
    with pytest.raises(ValidationError):
        analytic.reduced_dm_elements(5, 0.3)
    with pytest.raises(ValidationError):
        analytic.two_level_entropy(7, 0.3)


def test_elements_match_numeric_partial_trace():
    # Independent oracle: build the two-level state densely, trace out half,
    # and read alpha/beta/gamma directly off the reduced matrix.
    for n in (2, 4, 6, 8):
        half = 2 ** (n // 2)
        for theta in (0.2, math.pi / 4, 1.3):
            psi = two_level_state_vector(n, theta, omega_index=0)
            coeff = psi.reshape(half, half)
            reduced = (coeff @ coeff.conj().T).real
            alpha, beta, gamma = analytic.reduced_dm_elements(n, theta)
            assert reduced[0, 0] == pytest.approx(alpha, abs=1e-13)
            assert reduced[0, 1] == pytest.approx(beta, abs=1e-13)
            assert reduced[1, 1] == pytest.approx(gamma, abs=1e-13)
            if half > 2:
                assert reduced[1, 2] == pytest.approx(gamma, abs=1e-13)


def test_eigenvalues_match_numeric_partial_trace():
    for n in (2, 4, 6, 8):
        half = 2 ** (n // 2)
        for theta in (0.2, math.pi / 4, 1.3):
            for omega_index in (0, 2**n - 1):
                psi = two_level_state_vector(n, theta, omega_index)
                coeff = psi.reshape(half, half)
                eigs = np.sort(np.linalg.eigvalsh((coeff @ coeff.conj().T).real))[::-1]
                lam_plus, lam_minus = analytic.reduced_eigenvalues(n, theta)
                assert eigs[0] == pytest.approx(lam_plus, abs=1e-12)
                assert eigs[1] == pytest.approx(lam_minus, abs=1e-12)
                if eigs.size > 2:
                    assert abs(eigs[2]) < 1e-12  # Schmidt rank 2


def test_eigenvalues_known_point():
    lam_plus, lam_minus = analytic.reduced_eigenvalues(4, math.pi / 4)
    assert lam_plus == pytest.approx(0.9092183609323369, abs=1e-12)
    assert lam_minus == pytest.approx(0.0907816390676631, abs=1e-12)


def test_eigenvalues_sum_to_one():
    for n in (2, 4, 10, 40):
        for theta in np.linspace(0.0, math.pi / 2, 13):
            lam_plus, lam_minus = analytic.reduced_eigenvalues(n, theta)
            assert lam_plus + lam_minus == pytest.approx(1.0, abs=1e-13)
            assert 0.0 <= lam_minus <= lam_plus <= 1.0


def test_large_n_limit():
    lam_plus, lam_minus = analytic.reduced_eigenvalues(40, math.pi / 4)
    assert abs(lam_plus - 0.5) < 1e-3
    assert abs(lam_minus - 0.5) < 1e-3
    assert abs(analytic.two_level_entropy(40, math.pi / 4) - 1.0) < 1e-2


def test_entropy_known_values():
    assert analytic.two_level_entropy(4, math.pi / 2) == pytest.approx(0.0, abs=1e-12)
    assert analytic.two_level_entropy(4, math.pi / 4) == pytest.approx(0.4390734592267136, abs=1e-12)


def test_entropy_bounded_by_one_bit():
    for n in (2, 4, 8, 20, 40):
        for theta in np.linspace(0.0, math.pi / 2, 29):
            assert 0.0 <= analytic.two_level_entropy(n, theta) <= 1.0 + 1e-12
