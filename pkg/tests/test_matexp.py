import math

import numpy as np
import pytest

from tacfit.errors import DimensionError, DomainError
from tacfit.matexp import as_matrix, build_block, conv_step, directional_derivs, expm


def test_expm_matches_scalar_and_nilpotent_cases():
    np.testing.assert_allclose(expm(np.diag([0.5, -2.0])), np.diag(np.exp([0.5, -2.0])), rtol=1e-14)
    np.testing.assert_allclose(expm(np.array([[0.0, 1.0], [0.0, 0.0]])), [[1.0, 1.0], [0.0, 1.0]], atol=1e-15)
    np.testing.assert_array_equal(expm(np.zeros((3, 3))), np.eye(3))


def test_expm_semigroup():
    rng = np.random.default_rng(7)
    for k in (2, 8, 32):
        A = rng.standard_normal((k, k)) / math.sqrt(k)
        s, t = 0.3, 1.1
        np.testing.assert_allclose(expm(s * A) @ expm(t * A), expm((s + t) * A), rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("bad, error", [
    (np.ones((2, 3)), DimensionError),
    (np.array([[1.0, np.nan], [0.0, 1.0]]), DomainError),
])
def test_as_matrix_rejects(bad, error):
    with pytest.raises(error):
        as_matrix(bad, "A", square=True)


@pytest.mark.parametrize("order", [0, 1, 2, 3])
def test_build_block_shape_and_corner(order):
    A = np.array([[1.0, 2.0], [3.0, 4.0]])
    V = np.eye(2)
    M = build_block(A, V, order)
    n = 2 * (order + 1)
    assert M.shape == (n, n)
    np.testing.assert_array_equal(M[:2, :2], A)
    np.testing.assert_array_equal(M[-2:, -2:], A)
    if order:
        np.testing.assert_array_equal(M[:2, 2:4], V)


def test_build_block_rejects_mismatched_direction():
    with pytest.raises(DimensionError):
        build_block(np.eye(2), np.eye(3), 1)
    with pytest.raises(DomainError):
        build_block(np.eye(2), np.eye(2), -1)


def test_directional_derivs_order_zero_is_expm():
    A = np.array([[-1.0, 0.3], [0.2, -0.5]])
    stack = directional_derivs(A, np.eye(2), 0.7, 0)
    assert stack.order == 0
    np.testing.assert_allclose(stack.blocks[0], expm(0.7 * A), rtol=1e-13)


@pytest.mark.parametrize("order", [1, 2, 3])
def test_directional_derivs_commuting_direction(order):
    # d^j/dh^j exp(u (A + h A)) at h = 0 is u^j A^j exp(u A)
    A = np.array([[-1.0, 0.4], [0.1, -0.6]])
    u = 0.8
    stack = directional_derivs(A, A, u, order)
    expected = u ** order * np.linalg.matrix_power(A, order) @ expm(u * A)
    np.testing.assert_allclose(stack.blocks[order], expected, rtol=1e-10, atol=1e-13)


@pytest.mark.parametrize("k", [4, 32])
def test_directional_derivs_match_central_differences(k):
    rng = np.random.default_rng(1000 + k)
    h = 1e-6
    for _ in range(100):
        A = rng.standard_normal((k, k)) / math.sqrt(k)
        V = rng.standard_normal((k, k)) / math.sqrt(k)
        u = rng.uniform(0.1, 1.5)

        stack = directional_derivs(A, V, u, 1)
        fd = (expm(u * (A + h * V)) - expm(u * (A - h * V))) / (2 * h)
        scale = np.max(np.abs(stack.blocks[1]))
        assert np.max(np.abs(stack.blocks[1] - fd)) <= 1e-6 * scale


def test_conv_step_scalar_closed_form():
    a, dt = -0.8, 0.35
    phi, psi = conv_step(np.array([[a]]), np.array([[2.0]]), dt)
    assert phi[0, 0] == pytest.approx(math.exp(a * dt), rel=1e-14)
    assert psi[0, 0] == pytest.approx(2.0 * (math.exp(a * dt) - 1.0) / a, rel=1e-13)


def test_conv_step_singular_matrix():
    # A = 0: the input integral is just dt * b
    b = np.array([[1.0], [3.0]])
    phi, psi = conv_step(np.zeros((2, 2)), b, 0.25)
    np.testing.assert_allclose(phi, np.eye(2), atol=1e-15)
    np.testing.assert_allclose(psi, 0.25 * b, rtol=1e-14)


def test_conv_step_zero_length():
    phi, psi = conv_step(np.array([[1.0, 2.0], [0.0, 3.0]]), np.ones((2, 1)), 0.0)
    np.testing.assert_array_equal(phi, np.eye(2))
    np.testing.assert_array_equal(psi, np.zeros((2, 1)))


@pytest.mark.parametrize("k", [2, 8, 32])
def test_conv_step_is_additive_over_split_intervals(k):
    rng = np.random.default_rng(300 + k)
    A = rng.standard_normal((k, k)) / math.sqrt(k)
    b = rng.standard_normal((k, 1))
    first, second = 0.15, 0.4
    phi1, psi1 = conv_step(A, b, first)
    phi2, psi2 = conv_step(A, b, second)
    phi, psi = conv_step(A, b, first + second)
    np.testing.assert_allclose(phi2 @ phi1, phi, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(phi2 @ psi1 + psi2, psi, rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("b, dt, error", [
    (np.ones((3, 1)), 0.1, DimensionError),
    (np.ones((2, 1)), -0.1, DomainError),
    (np.ones((2, 1)), float("inf"), DomainError),
])
def test_conv_step_rejects(b, dt, error):
    with pytest.raises(error):
        conv_step(np.eye(2), b, dt)
