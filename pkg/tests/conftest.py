"""Shared fixtures."""

import numpy as np
import pytest

from app.models.hypothesis import HypothesisClass, Instance, Marginal
from app.models.learner import AlgorithmParams
from app.services.instance_service import instance_service


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def thresholds10():
    return instance_service.gen_thresholds(10)


@pytest.fixture
def figure1():
    return instance_service.gen_figure1()


@pytest.fixture
def three_point():
    """Two hypotheses over three uniform points."""
    labels = np.array([[1, 1, 0], [0, 1, 1]])
    return Instance(HypothesisClass(labels), Marginal.uniform(3), name="three-point")


@pytest.fixture
def practical_params():
    def make(**overrides):
        values = dict(eta=0.0, epsilon=0.05, delta=0.1, c4=3.0, c5=0.25, practical=True)
        values.update(overrides)
        return AlgorithmParams(**values)
    return make
