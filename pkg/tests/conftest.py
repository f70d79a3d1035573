import numpy as np
import pytest

from tssqp import least_squares_multiplier, solve_step


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Trigger jit compilation once so timed tests measure the math, not the compiler."""
    H = np.eye(3)
    J = np.array([[1.0, 0.0, 0.0]])
    solve_step(H, J, np.array([0.0, 1.0, 0.0]), np.array([0.5]))
    least_squares_multiplier(J, np.array([1.0, 2.0, 3.0]))
