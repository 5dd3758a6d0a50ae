import numpy as np
import pytest

from peftt.exceptions import OptimizerError
from peftt.tensor import Tensor
from peftt.training.optim import Adam, AdamState, adam_step


class TestAdam:
    def test_first_step_moves_by_lr(self):
        """Bias correction makes the first update lr * sign(grad)."""
        param = Tensor([1.0, -2.0, 0.5], requires_grad=True, dtype=np.float64)
        state = AdamState.for_parameters([param])
        adam_step([param], [np.array([0.3, -4.0, 1e-2])], state, lr=0.1)
        np.testing.assert_allclose(param.data, [0.9, -1.9, 0.4], rtol=1e-5)
        assert state.step == 1

    def test_matches_reference_update(self):
        """Several steps agree with the textbook recurrences."""
        rng = np.random.default_rng(0)
        param = Tensor(rng.normal(size=4), requires_grad=True, dtype=np.float64)
        expected = param.data.copy()
        m = np.zeros(4)
        v = np.zeros(4)
        state = AdamState.for_parameters([param])
        for t in range(1, 6):
            grad = rng.normal(size=4)
            adam_step([param], [grad], state, lr=0.01)
            m = 0.9 * m + 0.1 * grad
            v = 0.999 * v + 0.001 * grad**2
            expected -= 0.01 * (m / (1 - 0.9**t)) / (np.sqrt(v / (1 - 0.999**t)) + 1e-8)
        np.testing.assert_allclose(param.data, expected, rtol=1e-10)

    def test_frozen_and_missing_gradients(self):
        """Frozen tensors and tensors without a gradient stay put."""
        frozen = Tensor([1.0], dtype=np.float64)
        idle = Tensor([2.0], requires_grad=True, dtype=np.float64)
        state = AdamState.for_parameters([frozen, idle])
        adam_step([frozen, idle], [np.array([1.0]), None], state, lr=0.1)
        assert frozen.data.tolist() == [1.0]
        assert idle.data.tolist() == [2.0]

    def test_non_finite_gradient(self):
        """A NaN gradient aborts the step before any parameter moves."""
        a = Tensor([1.0], requires_grad=True, dtype=np.float64)
        b = Tensor([1.0], requires_grad=True, dtype=np.float64, name="b")
        state = AdamState.for_parameters([a, b])
        with pytest.raises(OptimizerError, match="non-finite gradient in b"):
            adam_step([a, b], [np.array([1.0]), np.array([np.nan])], state, lr=0.1)
        assert a.data.tolist() == [1.0]
        assert state.step == 0

    def test_mismatched_inputs(self):
        """Parameters, gradients and moments must line up."""
        a = Tensor([1.0, 2.0], requires_grad=True)
        state = AdamState.for_parameters([a])
        with pytest.raises(OptimizerError):
            adam_step([a], [], state, lr=0.1)
        with pytest.raises(OptimizerError):
            adam_step([a], [np.ones(3)], state, lr=0.1)

    def test_adam_object(self):
        """The bound optimizer reads and clears tensor gradients."""
        param = Tensor([1.0], requires_grad=True, dtype=np.float64)
        optimizer = Adam([param], lr=0.5)
        param.grad = np.array([2.0])
        optimizer.step()
        optimizer.zero_grad()
        assert param.data.tolist() == pytest.approx([0.5])
        assert param.grad is None
        with pytest.raises(OptimizerError):
            Adam([param], lr=0.0)
