import pytest

from colormapgan import cmapfig


@pytest.fixture(autouse=True)
def fresh_config():
    """Every test starts from the default options."""
    cmapfig.reset()
    yield
    cmapfig.reset()
