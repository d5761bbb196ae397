import numpy as np
import pytest

from motifsift import synth


@pytest.fixture(scope="session")
def chevron():
    return synth.generate_motif(synth.MotifSpec(synth.Family.CHEVRON))


@pytest.fixture(scope="session")
def diamond():
    return synth.generate_motif(synth.MotifSpec(synth.Family.SYMMETRIC_DIAMOND))


@pytest.fixture(scope="session")
def small_motif():
    return synth.generate_motif(synth.MotifSpec(synth.Family.SYMMETRIC_DIAMOND, width=200, height=150))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def gaussian_blob(size=128, sigma=4.0, centre=None, amplitude=1.0):
    c = (size - 1) / 2.0 if centre is None else centre
    ys, xs = np.mgrid[0:size, 0:size].astype(float)
    return amplitude * np.exp(-((xs - c) ** 2 + (ys - c) ** 2) / (2 * sigma * sigma))


# one line per acceptance criterion, printed after the run
ACCEPTANCE = {}


def record_acceptance(name, ok, detail):
    ACCEPTANCE[name] = (bool(ok), detail)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, (ok, detail) in ACCEPTANCE.items():
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
