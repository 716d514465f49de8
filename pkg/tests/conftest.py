import json
from pathlib import Path

import pytest

from unlbench.datagen import DatasetSpec, ForgetTarget, generate, split_forget
from unlbench.nncore import Architecture, TrainConfig, train

ROOT = Path(__file__).resolve().parents[1]
DESK_CONFIG = ROOT / "configs" / "desk.json"

_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, text): acceptance criterion")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    marker = _criteria.get(report.nodeid)
    if marker is not None:
        marker["outcome"] = report.outcome


def pytest_collection_modifyitems(items):
    for item in items:
        m = item.get_closest_marker("criterion")
        if m is not None:
            _criteria[item.nodeid] = {"n": m.args[0], "text": m.args[1], "outcome": "not run"}


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for info in sorted(_criteria.values(), key=lambda c: c["n"]):
        status = {"passed": "PASS", "failed": "FAIL"}.get(info["outcome"], info["outcome"].upper())
        terminalreporter.write_line(f"[{status}] criterion {info['n']}: {info['text']}")


@pytest.fixture(scope="session")
def desk_doc():
    return json.loads(DESK_CONFIG.read_text())


@pytest.fixture(scope="session")
def desk_data():
    return generate(DatasetSpec(), 0)


@pytest.fixture(scope="session")
def arch():
    return Architecture(8, (32, 32), 4)


@pytest.fixture(scope="session")
def cfg():
    return TrainConfig()


@pytest.fixture(scope="session")
def full_split(desk_data):
    return split_forget(*desk_data, ForgetTarget("full_class", 0))


@pytest.fixture(scope="session")
def sub_split(desk_data):
    return split_forget(*desk_data, ForgetTarget("sub_class", 0))


@pytest.fixture(scope="session")
def trained(desk_data, arch, cfg):
    return train(arch, desk_data[0], cfg, seed=11)
