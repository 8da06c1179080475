import time

import numpy as np
import pytest

from ndscausal.constructibility import cor1_subsystem, report, thm3_subsystem, thm4_subsystem
from ndscausal.generator import (PROFILES, GenerationError, GenProfile, gen_benchmark_model,
                                 gen_model, gen_subsystem)
from ndscausal.lumped import well_posed
from ndscausal.model import dumps, validate
from ndscausal.scalable import cert_i, cert_ii


def fits(name, sub):
    d = sub.dims
    return {
        "generic": True,
        "square": d.n_e == d.n_x,
        "rectangular": d.n_e != d.n_x,
        "independent-I": cert_i(sub).in_s_i,
        "independent-II": cert_ii(sub).in_s_ii and d.n_e == d.n_x,
        "thm3-violating": not thm3_subsystem(sub) and not cert_i(sub).in_s_i,
        "thm4-violating": not thm4_subsystem(sub),
        "cor1-rescuable": not thm3_subsystem(sub) and cor1_subsystem(sub),
        "d2-blocked": not thm4_subsystem(sub) and d.n_e == d.n_x,
    }[name]


@pytest.mark.parametrize("name", PROFILES)
def test_profile_fidelity(name, rng):
    for _ in range(200):
        sub = gen_subsystem(name, rng)
        assert fits(name, sub)
        assert max(sub.dims.n_x, sub.dims.n_e) <= 4


def test_independent_i_thousand_draws(rng):
    assert all(cert_i(gen_subsystem("independent-I", rng)).in_s_i for _ in range(1000))


@pytest.mark.parametrize("name", PROFILES)
def test_models_valid_and_well_posed(name, rng):
    for N in (1, 6):
        model = gen_model(N, name, rng)
        assert model.N == N and validate(model) == [] and well_posed(model)


def test_single_subsystem_phi_shape(rng):
    model = gen_model(1, "generic", rng)
    s = model.subsystems[0]
    assert model.phi.shape == (s.dims.n_v, s.dims.n_z)


def test_d2_blocked_has_one_blocked_subsystem(rng):
    for _ in range(20):
        rep = report(gen_model(4, "d2-blocked", rng))
        assert len(rep.d_ii) >= 1 and rep.square


def test_square_aggregate(rng):
    d = gen_model(10, "square", rng).dims
    assert d.n_e == d.n_x


def test_deterministic_given_seed():
    a = dumps(gen_model(5, "generic", 99))
    b = dumps(gen_model(5, "generic", np.random.default_rng(99)))
    assert a == b
    assert dumps(gen_model(5, "generic", 100)) != a


def test_large_square_model_is_fast():
    t0 = time.perf_counter()
    model = gen_model(50, "square", 3)
    assert time.perf_counter() - t0 < 1.0
    assert model.dims.n_x <= 200


def test_bad_profiles():
    with pytest.raises(ValueError, match="unknown profile"):
        GenProfile("bogus")
    with pytest.raises(ValueError):
        gen_model(0, "generic", 0)
    with pytest.raises(ValueError):
        GenProfile("rectangular", max_dim=1)


def test_rejection_budget_names_profile(monkeypatch):
    import ndscausal.generator as gen
    monkeypatch.setattr(gen, "_fits", lambda p, sub: False)
    monkeypatch.setattr(gen, "REJECTION_BUDGET", 5)
    with pytest.raises(GenerationError, match="cor1-rescuable"):
        gen_subsystem("cor1-rescuable", 0)


def test_benchmark_model_shape():
    model = gen_benchmark_model(16, 4, 0)
    d = model.dims
    assert (d.n_x, d.n_e, d.n_v, d.n_z) == (64, 64, 16, 16)
    assert model.phi.nnz == 32 and well_posed(model)
