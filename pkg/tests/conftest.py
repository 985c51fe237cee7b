import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from osc_spectra import assemble, build_enclosure, truncation_trust_index, v_norm_profile
from osc_spectra.potential import Potential
from osc_spectra.projections import SpectralContext

settings.register_profile("repo", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")


@pytest.fixture(scope="session")
def zero_ctx():
    """b = 0 at N = 64 with its (degenerate) enclosure."""
    op = assemble(Potential.zero(), 64)
    region = build_enclosure(np.zeros(64))
    return SpectralContext(op, region)


@pytest.fixture(scope="session")
def gaussian_setup():
    """b(x) = exp(-x^2)/10 at N = 256, certified trust index."""
    b = Potential.gaussian(0.1, 1.0)
    op = assemble(b, 256)
    profile = v_norm_profile(b, 255)
    region = build_enclosure(profile)
    trust = truncation_trust_index(op, certify=True, return_report=True)
    ctx = SpectralContext(op, region, n_trust=trust.n_trust)
    return {"b": b, "op": op, "profile": profile, "region": region, "trust": trust, "ctx": ctx}


@pytest.fixture(scope="session")
def small_smooth_ctx():
    """b(x) = 0.03 exp(-x^2) at N = 64 (default trust rule)."""
    b = Potential.gaussian(0.03, 1.0)
    op = assemble(b, 64)
    region = build_enclosure(v_norm_profile(b, 63))
    return SpectralContext(op, region)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
