import pytest

from peftt.tensor import current_tape


@pytest.fixture
def anyio_backend():
    return "asyncio"


@pytest.fixture(autouse=True)
def empty_tape():
    current_tape().clear()
    yield
    current_tape().clear()
