import numpy as np
import pytest

from emg_teleop.subspace import HandMap


class StubClassifier:
    """Returns a scripted label sequence, one per call, or a batch."""

    def __init__(self, labels):
        self.labels = list(labels)
        self.i = 0

    def predict(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 2:
            out = np.array(self.labels[self.i : self.i + x.shape[0]], dtype=object)
            self.i += x.shape[0]
            return out
        label = self.labels[self.i]
        self.i += 1
        return label


class StubRegressor:
    """Returns a fixed output vector, or scripted rows for batches."""

    def __init__(self, value):
        self.value = np.asarray(value, dtype=float)

    def predict(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 2:
            if self.value.ndim == 2:
                return self.value[: x.shape[0]]
            return np.tile(self.value, (x.shape[0], 1))
        return self.value


@pytest.fixture
def toy_map():
    """3-joint hand with A = identity, delta* = 2, o = 0.1, wide limits."""
    return HandMap(
        name="toy",
        A=np.eye(3),
        o=np.full(3, 0.1),
        delta_star=np.full(3, 2.0),
        delta=np.full(3, 0.5),
        joint_limits=np.array([[-5.0, 5.0]] * 3),
    )


@pytest.fixture
def tight_map():
    """Toy hand whose limits clamp every joint for any psi above ~0.2."""
    return HandMap(
        name="tight",
        A=np.eye(3),
        o=np.zeros(3),
        delta_star=np.full(3, 2.0),
        delta=np.full(3, 0.5),
        joint_limits=np.array([[-0.4, 0.4]] * 3),
    )
