import numpy as np
import pytest

from grainforge.nn import AdamHyper, AdamState, adam_step


def hand_adam(theta, grads, alpha=0.1, b1=0.9, b2=0.999, eps=1e-8):
    """Plain-python unrolling of the update rule, the oracle for the real one."""
    m = v = 0.0
    t = 0
    trace = []
    for g in grads:
        t += 1
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        m_hat = m / (1 - b1**t)
        v_hat = v / (1 - b2**t)
        theta = theta - alpha * m_hat / (v_hat**0.5 + eps)
        trace.append(theta)
    return trace


class TestAdam:
    def test_zero_gradient_keeps_params(self):
        theta = np.array([1.5, -2.0])
        state = AdamState.for_param(theta)
        adam_step(theta, np.zeros(2), state, AdamHyper(alpha=0.1))
        assert np.array_equal(theta, [1.5, -2.0])
        assert state.t == 1

    def test_first_step_scalar_value(self):
        theta = np.array([0.0])
        state = AdamState.for_param(theta)
        adam_step(theta, np.array([1.0]), state, AdamHyper(alpha=0.1))
        # m_hat = 1, v_hat = 1 -> theta = -0.1 / (1 + 1e-8)
        assert theta[0] == pytest.approx(-0.1 / (1 + 1e-8), abs=1e-15)
        assert theta[0] == pytest.approx(-0.0999999990, abs=1e-9)

    def test_two_identical_steps_match_hand_trace(self):
        theta = np.array([0.0])
        state = AdamState.for_param(theta)
        hyper = AdamHyper(alpha=0.1)
        got = []
        for _ in range(2):
            adam_step(theta, np.array([1.0]), state, hyper)
            got.append(theta[0])
        expected = hand_adam(0.0, [1.0, 1.0])
        assert np.allclose(got, expected, rtol=0, atol=1e-12)

    def test_five_step_hand_unrolled_trace(self):
        grads = [1.0, -0.5, 2.0, 0.25, -1.0]
        theta = np.array([0.3])
        state = AdamState.for_param(theta)
        hyper = AdamHyper(alpha=0.1)
        got = []
        for g in grads:
            adam_step(theta, np.array([g]), state, hyper)
            got.append(theta[0])
        expected = hand_adam(0.3, grads)
        assert np.allclose(got, expected, rtol=0, atol=1e-12)

    def test_timestep_increments_by_one(self):
        theta = np.zeros(3)
        state = AdamState.for_param(theta)
        hyper = AdamHyper()
        for expected_t in range(1, 6):
            adam_step(theta, np.ones(3), state, hyper)
            assert state.t == expected_t

    def test_invalid_betas_rejected(self):
        with pytest.raises(ValueError):
            AdamHyper(beta1=1.0)
        with pytest.raises(ValueError):
            AdamHyper(beta2=-0.1)
