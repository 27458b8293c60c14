import pytest

from roughwalk.graph import GraphPoint, cubic_model, rotating_model


@pytest.fixture
def rotating09():
    return rotating_model(0.9)


@pytest.fixture
def cubic09():
    return cubic_model(0.9)


@pytest.fixture
def origin2():
    return GraphPoint((0, 0), 0)


@pytest.fixture
def origin3():
    return GraphPoint((0, 0, 0), 0)
