import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from teamform.adversary import make_policy  # noqa: E402
from teamform.kernel import Simulator  # noqa: E402


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: long-running acceptance criteria")


def pytest_terminal_summary(terminalreporter):
    from workloads import ACCEPTANCE
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[num]
        terminalreporter.write_line(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def make_sim():
    """Simulator factory with a uniform-random adversary and no fragile nodes."""

    def _make(n=4, policy="uniform_random", seed=0, **kw):
        kw.setdefault("epsilon", 1.0)
        return Simulator(n, make_policy(policy, n, seed=seed, **kw))

    return _make
