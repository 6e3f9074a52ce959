import numpy as np
import pytest

from musicfusion.channel import (
    add_estimation_noise,
    bistatic_delay,
    generate_coefficients,
    synthesize_channel,
)
from musicfusion.geometry import SPEED_OF_LIGHT as C, AnglePair, angles_for_target, joint_steering_vector, steering_matrix

from conftest import make_pair


def test_bistatic_delay_examples():
    mono = make_pair(tx=(0, 0), rx=(0, 0))
    assert bistatic_delay(mono, (0, C / 2)) == pytest.approx(1.0)
    assert bistatic_delay(make_pair(tx=(-1, 0), rx=(1, 0)), (0, 0)) == pytest.approx(2 / C)
    assert bistatic_delay(mono, (3, 4)) == pytest.approx(10 / C)


def test_integer_delay_product_gives_constant_coefficients(rng):
    # delay of exactly 1/df: phase wraps every subcarrier
    df = 1e5
    p = make_pair(tx=(0, 0), rx=(0, 0), df=df, Q=16)
    target = (0.0, C / (2 * df))
    alpha = generate_coefficients(p, [target], "unit", rng)
    np.testing.assert_allclose(alpha, alpha[0, 0], atol=1e-9)


def test_unit_model_modulus(rng, pair):
    alpha = generate_coefficients(pair, [(1.0, 8.0)], "unit", rng)
    np.testing.assert_allclose(np.abs(alpha), 1.0, atol=1e-12)


def test_quarter_turn_phase_step(rng):
    df, tau = 1e5, 2.5e-6
    p = make_pair(tx=(0, 0), rx=(0, 0), df=df, Q=4)
    target = (0.0, tau * C / 2)
    assert bistatic_delay(p, target) == pytest.approx(tau)
    alpha = generate_coefficients(p, [target], "unit", rng)[:, 0]
    rel = np.angle(alpha / alpha[0])
    expected = np.angle(np.exp(1j * np.array([0, -np.pi / 2, -np.pi, -3 * np.pi / 2])))
    np.testing.assert_allclose(rel, expected, atol=1e-9)


@pytest.mark.parametrize("model", ["unit", "inverse_product"])
def test_phase_is_linear_across_subcarriers(rng, pair, model):
    alpha = generate_coefficients(pair, [(1.0, 8.0), (-3.0, 12.0)], model, rng)
    phase = np.unwrap(np.angle(alpha), axis=0)
    np.testing.assert_allclose(np.diff(phase, 2, axis=0), 0.0, atol=1e-9)


def test_inverse_product_strongest_is_unity(rng, pair):
    alpha = generate_coefficients(pair, [(1.0, 5.0), (-3.0, 12.0)], "inverse_product", rng)
    mod = np.abs(alpha[0])
    assert mod.max() == pytest.approx(1.0)
    assert mod[1] < mod[0]


def test_random_complex_amplitudes_vary(rng, pair):
    alpha = generate_coefficients(pair, [(1.0, 5.0), (-3.0, 12.0)], "random_complex", rng)
    assert not np.allclose(np.abs(alpha[0]), 1.0)


def test_synthesize_simple_cases(pair):
    A = steering_matrix([AnglePair(0, 0)], pair)
    ones = synthesize_channel(pair, A, np.ones((pair.subcarriers, 1)))
    np.testing.assert_allclose(ones, 1.0)
    zero = synthesize_channel(pair, A, np.zeros((pair.subcarriers, 1)))
    assert not zero.any()


def test_synthesize_matches_loop_oracle(rng, pair):
    targets = [(1.0, 8.0), (-3.0, 12.0)]
    angles = [angles_for_target(pair, t) for t in targets]
    alpha = generate_coefficients(pair, targets, "unit", rng)
    H = synthesize_channel(pair, steering_matrix(angles, pair), alpha)
    for q in range(pair.subcarriers):
        expect = np.zeros(pair.dim, dtype=complex)
        for k, ang in enumerate(angles):
            a = joint_steering_vector(ang, pair)
            for i in range(pair.dim):
                expect[i] += a[i] * alpha[q, k]
        np.testing.assert_allclose(H[q], expect, atol=1e-12)


def test_synthesize_dimension_mismatch(pair):
    with pytest.raises(ValueError):
        synthesize_channel(pair, np.ones((pair.dim, 2)), np.ones((pair.subcarriers, 3)))


def test_noiseless_rows_in_steering_span(rng, pair):
    targets = [(1.0, 8.0), (-3.0, 12.0), (4.0, 6.0)]
    A = steering_matrix([angles_for_target(pair, t) for t in targets], pair)
    H = synthesize_channel(pair, A, generate_coefficients(pair, targets, "unit", rng))
    P = A @ np.linalg.pinv(A)
    resid = H.T - P @ H.T
    assert np.linalg.norm(resid) / np.linalg.norm(H) < 1e-10


def test_noise_limit_and_determinism():
    clean = np.ones((8, 4), dtype=complex)
    tiny = add_estimation_noise(clean, 1e-30, np.random.default_rng(0))
    np.testing.assert_allclose(tiny.h_tilde, clean, atol=1e-12)
    a = add_estimation_noise(clean, 1.0, np.random.default_rng(5)).h_tilde
    b = add_estimation_noise(clean, 1.0, np.random.default_rng(5)).h_tilde
    assert a.tobytes() == b.tobytes()


def test_noise_variance_statistics():
    sigma2 = 2.5
    clean = np.zeros(100_000, dtype=complex)
    n = add_estimation_noise(clean, sigma2, np.random.default_rng(7)).h_tilde
    assert np.mean(np.abs(n) ** 2) == pytest.approx(sigma2, rel=0.05)
    assert np.var(n.real) == pytest.approx(sigma2 / 2, rel=0.05)
    assert np.var(n.imag) == pytest.approx(sigma2 / 2, rel=0.05)


def test_noise_is_unbiased():
    clean = np.full((4, 4), 1 + 2j)
    rng = np.random.default_rng(3)
    mean = np.mean([add_estimation_noise(clean, 1.0, rng).h_tilde for _ in range(4000)], axis=0)
    np.testing.assert_allclose(mean, clean, atol=0.05)


def test_noise_rejects_nonpositive_variance():
    with pytest.raises(ValueError):
        add_estimation_noise(np.ones(3), 0.0, np.random.default_rng(0))
