import numpy as np
import pytest

from musicfusion.geometry import ArraySpec, RadarPairConfig


def make_pair(M=4, N=4, Q=64, tx=(-5.0, 0.0), rx=(0.0, 0.0), sigma2=1.0, df=78125.0, pair_id=1):
    return RadarPairConfig(
        tx=ArraySpec(tx, (0.0, 1.0), M),
        rx=ArraySpec(rx, (0.0, 1.0), N),
        subcarriers=Q,
        subcarrier_spacing=df,
        carrier_freq=5.89e9,
        noise_variance=sigma2,
        pair_id=pair_id,
    )


@pytest.fixture
def pair():
    return make_pair()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import VERDICTS
    except ImportError:
        return
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(VERDICTS, key=lambda s: int(s.split("criterion ")[1].split()[0])):
            terminalreporter.write_line(line)
