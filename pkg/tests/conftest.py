import numpy as np
import pytest

from ndscausal.generator import GenProfile, gen_subsystem, sample_well_posed_phi
from ndscausal.model import NdsModel, Scm, Subsystem

# (criterion number, passed, detail) collected by the acceptance suite
ACCEPTANCE_LINES = []


def micro_subsystem(a_zx=(0.0, 1.0)):
    """E = diag(1, 0) with one internal input and output."""
    return Subsystem.build(
        E=np.diag([1.0, 0.0]),
        A_xx=[[1.0, 0.0], [0.0, 0.0]],
        A_xv=[[0.0], [1.0]],
        A_zx=[list(a_zx)],
        A_zv=[[0.0]],
    )


def micro_model(phi=1.0, a_zx=(0.0, 1.0)):
    return NdsModel((micro_subsystem(a_zx),), Scm.from_dense([[phi]]))


def mixed_model(N, rng, profiles, max_dim=4, max_cond=1e3):
    """Subsystems drawn from a random choice of `profiles`, joined by a well-posed phi."""
    subs = []
    for _ in range(N):
        name = profiles[int(rng.integers(0, len(profiles)))]
        subs.append(gen_subsystem(GenProfile(name, max_dim=max_dim), rng))
    model = NdsModel(tuple(subs), Scm.zeros(0, 0))
    return model.with_phi(sample_well_posed_phi(model, rng, max_cond))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for num, ok, detail in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
