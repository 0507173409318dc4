import shutil

import pytest


def find_cc():
    for name in ("gcc", "cc", "clang"):
        path = shutil.which(name)
        if path:
            return path
    return None


@pytest.fixture(scope="session")
def cc():
    """Path to a C compiler; tests in the end-to-end tier skip without one."""
    path = find_cc()
    if path is None:
        pytest.skip("no C compiler available; skipping end-to-end tier")
    return path
