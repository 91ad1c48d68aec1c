import numpy as np
import pytest

from oedg.benchmark import TopologyConfig, build_line
from oedg.problem import GroundTruth, OverlappingProblem


def chain_problem(x):
    return (x[0] - x[1]) ** 2 + (x[1] - x[2]) ** 2


@pytest.fixture
def chain3():
    """(x1-x2)^2 + (x2-x3)^2 on [-1, 1]^3: two subcomponents sharing x2."""
    truth = GroundTruth.from_subcomponents([{0, 1}, {1, 2}])
    return OverlappingProblem(3, [-1.0] * 3, [1.0] * 3, chain_problem, truth)


@pytest.fixture
def separable5():
    """sum x_i^2 on [-1, 1]^5: five singleton subcomponents."""
    truth = GroundTruth.from_subcomponents([{i} for i in range(5)])
    return OverlappingProblem(5, [-1.0] * 5, [1.0] * 5,
                              lambda x: float(np.dot(x, x)), truth)


@pytest.fixture
def toy_line():
    """Rotated 4x6 line with overlap 2 (18 variables)."""
    cfg = TopologyConfig(topology="line", sizes=(6, 6, 6, 6), overlap=2,
                         seed=3, name="toy-line")
    return build_line(cfg)


def groups_as_sets(result):
    return sorted(tuple(sorted(s)) for s in result.subcomponents)


def truth_as_sets(problem):
    return sorted(tuple(sorted(s)) for s in problem.ground_truth.subcomponents)
