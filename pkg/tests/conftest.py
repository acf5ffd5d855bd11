import pytest

from semtab.fusion import default_kb_path, load_kb


@pytest.fixture(scope="session")
def kb():
    return load_kb(default_kb_path())
