import os

import pytest

from latentscope.cli import main

ACCEPTANCE_LINES = []


def _run_sweep(out):
    code = main(["sweep", "--out-dir", str(out), "--seed", "0"])
    assert code == 0, f"default sweep exited with {code}"
    return str(out)


@pytest.fixture(scope="session")
def sweep_runner():
    return _run_sweep


@pytest.fixture(scope="session")
def pipeline_dir(tmp_path_factory):
    """Default pipeline (k in 1..32, 32x64x48 field, 5% sampling), run once per session.

    Set LATENTSCOPE_PIPELINE_DIR to reuse the output directory of an earlier
    ``latentscope sweep --seed 0`` run.
    """
    reuse = os.environ.get("LATENTSCOPE_PIPELINE_DIR")
    if reuse and os.path.exists(os.path.join(reuse, "manifest.json")):
        return reuse
    return _run_sweep(tmp_path_factory.mktemp("pipeline"))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
