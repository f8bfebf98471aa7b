import sys

import pytest

from gridvpe.infrastructure import load_testbed
from gridvpe.vpe import create_vpe, load_demo_vpe_spec
from gridvpe.workflow import load_demo_workflow


@pytest.fixture(scope="session")
def testbed():
    return load_testbed()


@pytest.fixture(scope="session")
def demo_graph():
    return load_demo_workflow()


@pytest.fixture(scope="session")
def demo_vpe(testbed):
    return create_vpe(testbed, load_demo_vpe_spec())


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[num])
