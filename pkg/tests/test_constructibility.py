import numpy as np
import pytest

from conftest import micro_model, micro_subsystem, mixed_model
from ndscausal.constructibility import (FeedbackGain, cor1_subsystem, feedback_null_dim,
                                        feedback_rescues_thm3, lemma2_exists, lemma4_check,
                                        report, thm3_subsystem, thm4_subsystem)
from ndscausal.generator import gen_model, gen_subsystem
from ndscausal.linalg import is_fcr
from ndscausal.lumped import condition_i_lumped, lumped_lft, well_posed
from ndscausal.model import NdsModel, Scm, Subsystem
from ndscausal.scalable import cert_i, theorem1_check
from ndscausal.synthesis import apply_feedback


def test_lemma2_examples():
    assert lemma2_exists(np.zeros((2, 1)), [[1.0]])
    assert not lemma2_exists(np.zeros((1, 2)), np.eye(2))
    assert not lemma2_exists([[0.0, 1.0]], [[1.0, 0.0]])
    with pytest.raises(ValueError):
        lemma2_exists(np.zeros((2, 2)), np.zeros((1, 3)))


def test_lemma2_example_never_fcr_by_sampling(rng):
    A, B = np.array([[0.0, 1.0]]), np.array([[1.0, 0.0]])
    assert not any(is_fcr(A + rng.standard_normal((1, 1)) @ B) for _ in range(100))


def test_thm3_examples():
    assert thm3_subsystem(micro_subsystem((0.0, 1.0)))
    assert not thm3_subsystem(micro_subsystem((1.0, 0.0)))
    sub = Subsystem.build(E=np.vstack([np.eye(2), np.zeros((1, 2))]), A_xx=np.zeros((3, 2)))
    assert thm3_subsystem(sub)


def test_thm4_examples():
    assert thm4_subsystem(Subsystem.build(E=np.array([[1.0, 0.0]]), A_xx=np.zeros((1, 2))))
    base = dict(E=np.diag([1.0, 0.0]), A_xx=np.zeros((2, 2)), B_x=np.zeros((2, 1)))
    assert thm4_subsystem(Subsystem.build(**base, A_xv=[[0.0], [1.0]]))
    assert not thm4_subsystem(Subsystem.build(**base, A_xv=np.zeros((2, 1))))


def test_cor1_examples():
    bad = micro_subsystem((1.0, 0.0))
    assert cor1_subsystem(bad.replace(C_x=np.array([[0.0, 1.0]])))
    assert not cor1_subsystem(bad.replace(C_x=np.zeros((1, 2))))


def test_thm3_implies_cor1(rng):
    for name in ("generic", "thm3-violating", "cor1-rescuable", "rectangular"):
        for _ in range(100):
            sub = gen_subsystem(name, rng)
            assert not thm3_subsystem(sub) or cor1_subsystem(sub)


def test_lemma4_trivial_cases():
    assert lemma4_check(Subsystem.build(E=np.vstack([np.eye(2), np.zeros((1, 2))]),
                                        A_xx=np.zeros((3, 2))))[0]
    assert lemma4_check(Subsystem.build(E=np.array([[1.0, 0.0]]), A_xx=np.zeros((1, 2))))[1]


def test_lemma4_second_predicate_empirical_rates(rng):
    """Report how often ``[U_E1, B_x]`` is FRR for members of S_I and of S_II.

    Membership of S_II forces it (the stacked input matrix has full row
    rank), membership of S_I does not.
    """
    hits = {"S_I": [0, 0], "S_II": [0, 0]}
    for _ in range(2000):
        sub = gen_subsystem(["independent-I", "independent-II", "generic"][rng.integers(0, 3)], rng)
        frr_ok = lemma4_check(sub)[1]
        from ndscausal.scalable import cert_ii
        if cert_i(sub).in_s_i:
            hits["S_I"][0] += frr_ok
            hits["S_I"][1] += 1
        if cert_ii(sub).in_s_ii:
            hits["S_II"][0] += frr_ok
            hits["S_II"][1] += 1
    print({k: f"{a}/{b}" for k, (a, b) in hits.items()})
    assert hits["S_II"][0] == hits["S_II"][1] > 0
    assert hits["S_I"][0] < hits["S_I"][1]


def test_report_all_s_i_exists_vacuously(rng):
    rep = report(gen_model(3, "independent-I", rng))
    assert rep.exists_phi_for_i and rep.dims_ok_i


def test_report_thm3_failure_and_feedback():
    sub = micro_subsystem((1.0, 0.0))
    rep = report(NdsModel((sub,), Scm.zeros(1, 1)))
    assert not rep.exists_phi_for_i and rep.d_i == [0]
    assert not rep.feedback_can_fix_i


def test_report_d_ii_blocks_feedback(rng):
    for _ in range(20):
        rep = report(gen_model(3, "d2-blocked", rng))
        assert rep.d_ii and not rep.feedback_can_fix_ii and not rep.exists_phi_for_ii


def test_report_invariants(rng):
    for _ in range(200):
        model = mixed_model(int(rng.integers(1, 5)), rng,
                            ["generic", "square", "thm3-violating", "thm4-violating",
                             "independent-I", "cor1-rescuable"])
        rep = report(model)
        recs = rep.subsystems
        assert all(r.in_d_i == (not r.thm3_ok) for r in recs)
        assert all(r.in_d_ii == (not r.thm4_ok) for r in recs)
        assert rep.exists_phi_for_i == (rep.dims_ok_i and all(r.thm3_ok for r in recs if not r.in_s_i))
        assert not rep.d_ii or not rep.feedback_can_fix_ii
        assert rep.joint_existence == "unknown"
        assert all(not (r.in_s_i and r.in_d_i) for r in recs)


def test_dimension_shortfall_blocks_existence(rng):
    """Every local rank test passes, but there are no internal inputs to fill the gap."""
    sub = Subsystem.build(E=np.diag([1.0, 0.0]), A_xx=np.zeros((2, 2)), A_zx=[[0.0, 1.0]],
                          n_v=0)
    assert thm3_subsystem(sub) and not cert_i(sub).in_s_i
    rep = report(NdsModel((sub,), Scm.zeros(0, 1)))
    assert not rep.dims_ok_i and not rep.exists_phi_for_i
    model = NdsModel((sub,), Scm.zeros(0, 1))
    assert not theorem1_check(model).verdict
    assert not condition_i_lumped(lumped_lft(model)).verdict


def test_no_input_path_means_feedback_cannot_help(rng):
    sub = Subsystem.build(E=np.diag([1.0, 0.0]), A_xx=np.zeros((2, 2)), A_xv=np.zeros((2, 1)),
                          A_zx=[[1.0, 0.0]], A_zv=[[0.0]], B_x=np.zeros((2, 1)),
                          B_z=np.zeros((1, 1)), C_x=[[0.0, 1.0]])
    assert not thm3_subsystem(sub) and cor1_subsystem(sub)
    assert not feedback_rescues_thm3(sub)
    model = NdsModel((sub,), Scm.zeros(1, 1))
    assert not report(model).feedback_can_fix_i
    for _ in range(50):
        closed = apply_feedback(model, FeedbackGain((rng.standard_normal((1, 1)),)))
        assert not thm3_subsystem(closed.subsystems[0])


def test_feedback_null_dim_matches_sampling(rng):
    for _ in range(80):
        sub = gen_subsystem(["generic", "cor1-rescuable", "thm3-violating"][rng.integers(0, 3)], rng)
        model = NdsModel((sub,), Scm.zeros(sub.dims.n_v, sub.dims.n_z))
        best = min(
            cert_i(apply_feedback(model, FeedbackGain((rng.standard_normal((sub.dims.n_u, sub.dims.n_y)),))).subsystems[0]).k
            for _ in range(5))
        assert best == feedback_null_dim(sub)


def test_feedback_rescue_matches_sampling(rng):
    for _ in range(80):
        sub = gen_subsystem(["thm3-violating", "cor1-rescuable"][rng.integers(0, 2)], rng)
        model = NdsModel((sub,), Scm.zeros(sub.dims.n_v, sub.dims.n_z))
        rescued = any(
            thm3_subsystem(apply_feedback(model, FeedbackGain((rng.standard_normal((sub.dims.n_u, sub.dims.n_y)),))).subsystems[0])
            for _ in range(5))
        assert rescued == feedback_rescues_thm3(sub)


def test_no_phi_found_when_existence_fails(rng):
    count = 0
    while count < 10:
        model = mixed_model(int(rng.integers(1, 4)), rng, ["generic", "thm3-violating", "square"])
        if report(model).exists_phi_for_i:
            continue
        count += 1
        for _ in range(500):
            m = model.with_phi(rng.standard_normal(model.phi.shape))
            assert not theorem1_check(m).verdict


def test_feedback_gain_json_round_trip(rng):
    model = gen_model(3, "generic", rng)
    gain = FeedbackGain(tuple(rng.standard_normal((s.dims.n_u, s.dims.n_y)) for s in model.subsystems))
    again = FeedbackGain.from_json(gain.to_json(), model)
    assert all(np.array_equal(a, b) for a, b in zip(gain.blocks, again.blocks))
    assert gain.dense().shape == (model.dims.n_u, model.dims.n_y)
