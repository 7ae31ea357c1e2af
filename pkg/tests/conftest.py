import pytest

from spfl.spectral import FilterSpec, SpectralConfig

LAMBDA_P0 = 1547.5
ALPHA = 0.0435
BETA2 = -0.02175
L1, L2 = 3.0, 1.0

ACCEPTANCE_LINES: list[str] = []


def setup_spectral(**kw) -> SpectralConfig:
    shape = kw.pop("shape", "rectangular")
    base = dict(
        lambda_p0=LAMBDA_P0,
        pump_filter=FilterSpec(LAMBDA_P0, 0.9, shape),
        signal_filter=FilterSpec(LAMBDA_P0, 0.7, shape),
        idler_filter=FilterSpec(LAMBDA_P0, 0.7, shape),
        port_b_filter=FilterSpec(LAMBDA_P0, 1.3, shape),
        alpha=ALPHA, xi_same=29.5, xi_diff=32.3,
    )
    base.update(kw)
    return SpectralConfig(**base)


@pytest.fixture
def spec_cfg():
    return setup_spectral()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
