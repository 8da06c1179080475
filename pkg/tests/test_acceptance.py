"""Acceptance criteria 1-11, each at its stated tolerance and sample size.

Every test appends one (criterion, passed, detail) line that the terminal
summary prints, then asserts the criterion.
"""

import time

import numpy as np

from conftest import ACCEPTANCE_LINES, micro_model, mixed_model
from ndscausal.cli import loglog_slope, run_benchmark
from ndscausal.constructibility import FeedbackGain, lemma2_exists, lemma4_check, report
from ndscausal.generator import GenProfile, gen_model, gen_subsystem
from ndscausal.linalg import is_fcr, numeric_rank
from ndscausal.lumped import condition_i_lumped, condition_ii_lumped, lumped_lft, well_posed
from ndscausal.scalable import (cert_i, cert_ii, omega_matrix, pi_matrix, reduced_subsystems_i,
                                reduced_subsystems_ii, theorem1_check, theorem2_check)
from ndscausal.synthesis import FeedbackInapplicableError, apply_feedback, synthesize_phi

MIXED = ["generic", "square", "rectangular", "thm3-violating", "thm4-violating",
         "cor1-rescuable", "independent-I"]


def record(num, ok, detail):
    ACCEPTANCE_LINES.append((num, bool(ok), detail))
    print(f"criterion {num}: {'PASS' if ok else 'FAIL'}  {detail}")
    return ok


def random_well_posed(model, rng):
    while True:
        m = model.with_phi(rng.standard_normal(model.phi.shape))
        if well_posed(m):
            return m


def test_criterion_01_condition_i_oracle_equivalence():
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    n = agree = hard = 0
    verdicts = [0, 0]
    for k in range(1000):
        N = int(rng.integers(1, 7))
        if k % (len(MIXED) + 1) == len(MIXED):
            model = mixed_model(N, rng, MIXED, max_dim=5)
        else:
            model = gen_model(N, GenProfile(MIXED[k % (len(MIXED) + 1)], max_dim=5), rng)
        sub = theorem1_check(model)
        lump = condition_i_lumped(lumped_lft(model))
        n += 1
        verdicts[sub.verdict] += 1
        if sub.verdict == lump.verdict:
            agree += 1
        elif min(sub.gap_ratio, lump.gap_ratio) > 1e3:
            hard += 1
    elapsed = time.perf_counter() - t0
    ok = agree == n and hard == 0 and elapsed < 60
    assert record(1, ok, f"{agree}/{n} agree (true/false {verdicts[1]}/{verdicts[0]}), "
                         f"{hard} well-separated disagreements, {elapsed:.1f}s"), "criterion 1"


def test_criterion_02_condition_ii_oracle_equivalence():
    rng = np.random.default_rng(202)
    t0 = time.perf_counter()
    n = agree = hard = 0
    verdicts = [0, 0]
    for _ in range(1000):
        model = gen_model(int(rng.integers(1, 7)), GenProfile("square", max_dim=5), rng)
        sub = theorem2_check(model)
        lump = condition_ii_lumped(lumped_lft(model))
        n += 1
        verdicts[sub.verdict] += 1
        if sub.verdict == lump.verdict:
            agree += 1
        elif min(sub.gap_ratio, lump.gap_ratio) > 1e3:
            hard += 1
    elapsed = time.perf_counter() - t0
    ok = agree == n and hard == 0 and elapsed < 60
    assert record(2, ok, f"{agree}/{n} agree (true/false {verdicts[1]}/{verdicts[0]}), "
                         f"{elapsed:.1f}s"), "criterion 2"


def test_criterion_03_pi_omega_chain():
    rng = np.random.default_rng(303)
    n = agree = 0
    for k in range(500):
        model = gen_model(int(rng.integers(1, 7)), GenProfile(MIXED[k % len(MIXED)], max_dim=5), rng)
        a = is_fcr(omega_matrix(model))
        b = is_fcr(pi_matrix(model))
        c = theorem1_check(model).verdict
        n += 1
        agree += a == b == c
    assert record(3, agree == n, f"{agree}/{n} three-way agreement"), "criterion 3"


def _lemma2_pair(rng):
    m, n, p = int(rng.integers(0, 6)), int(rng.integers(1, 5)), int(rng.integers(0, 5))
    A, B = rng.standard_normal((m, n)), rng.standard_normal((p, n))
    if rng.random() < 0.35:
        # shared null vector: [A; B] loses full column rank
        w = rng.standard_normal(n)
        w /= np.linalg.norm(w)
        A, B = A - np.outer(A @ w, w), B - np.outer(B @ w, w)
    return A, B


def test_criterion_04_lemma2_property():
    rng = np.random.default_rng(404)
    true_n = true_ok = false_n = false_ok = 0
    for _ in range(1000):
        A, B = _lemma2_pair(rng)
        if lemma2_exists(A, B):
            true_n += 1
            true_ok += any(is_fcr(A + rng.standard_normal((A.shape[0], B.shape[0])) @ B)
                           for _ in range(5))
        else:
            false_n += 1
            false_ok += not any(is_fcr(A + rng.standard_normal((A.shape[0], B.shape[0])) @ B)
                                for _ in range(100))
    rate = true_ok / true_n
    ok = rate >= 0.999 and false_ok == false_n and true_n > 0 and false_n > 0
    assert record(4, ok, f"exists: {true_ok}/{true_n} found FCR in 5 draws; "
                         f"not exists: {false_ok}/{false_n} never FCR in 100 draws"), "criterion 4"


def test_criterion_05_connection_independence():
    rng = np.random.default_rng(505)
    ok_i = ok_ii = trials = 0
    for _ in range(100):
        model_i = gen_model(int(rng.integers(1, 7)), "independent-I", rng)
        model_ii = gen_model(int(rng.integers(1, 7)), "independent-II", rng)
        for _ in range(200):
            trials += 1
            ok_i += theorem1_check(random_well_posed(model_i, rng)).verdict
            ok_ii += theorem2_check(random_well_posed(model_ii, rng)).verdict
    ok = ok_i == trials == ok_ii
    assert record(5, ok, f"independent-I {ok_i}/{trials}, independent-II {ok_ii}/{trials}"), \
        "criterion 5"


def test_criterion_06_constructive_phi():
    rng = np.random.default_rng(606)
    models = found = reverified = 0
    while models < 500:
        model = mixed_model(int(rng.integers(1, 7)), rng,
                            ["generic", "square", "rectangular", "independent-I"])
        rep = report(model)
        if not rep.exists_phi_for_i or all(r.in_s_i for r in rep.subsystems):
            continue
        models += 1
        res = synthesize_phi(model, cond_i=True, attempts=32, seed=models)
        if res.status == "found":
            found += 1
            reverified += condition_i_lumped(lumped_lft(model.with_phi(res.phi))).verdict
    ok = found >= 0.99 * models and reverified == found
    assert record(6, ok, f"found {found}/{models}, lumped re-verified {reverified}/{found}"), \
        "criterion 6"


def test_criterion_07_feedback_futility_for_condition_ii():
    rng = np.random.default_rng(707)
    successes = trials = 0
    for _ in range(100):
        model = gen_model(int(rng.integers(1, 7)), "d2-blocked", rng)
        done = 0
        while done < 200:
            gain = FeedbackGain(tuple(rng.standard_normal((s.dims.n_u, s.dims.n_y))
                                      for s in model.subsystems))
            try:
                closed = apply_feedback(model, gain)
            except FeedbackInapplicableError:
                continue
            closed = closed.with_phi(rng.standard_normal(model.phi.shape))
            if not well_posed(closed):
                continue
            done += 1
            trials += 1
            successes += (condition_ii_lumped(lumped_lft(closed)).verdict
                          or theorem2_check(closed).verdict)
    assert record(7, successes == 0, f"{successes} successes in {trials} trials"), "criterion 7"


def test_criterion_08_lemma4_first_bullet():
    rng = np.random.default_rng(808)
    members = counter = 0
    names = ["independent-I", "generic", "square", "rectangular", "thm3-violating"]
    for k in range(10_000):
        sub = gen_subsystem(names[k % len(names)], rng)
        if cert_i(sub).in_s_i:
            members += 1
            counter += not lemma4_check(sub)[0]
    assert record(8, counter == 0 and members > 0,
                  f"{counter} counterexamples among {members} S_I members of 10000 subsystems"), \
        "criterion 8"


def test_criterion_09_reduction_soundness():
    rng = np.random.default_rng(909)
    instances = agree = 0
    while instances < 500:
        model = mixed_model(int(rng.integers(2, 7)), rng,
                            ["independent-I", "independent-II", "square", "thm3-violating",
                             "thm4-violating"])
        s1, s2 = reduced_subsystems_i(model), reduced_subsystems_ii(model)
        if not (s1 or s2):
            continue
        instances += 1
        same = theorem1_check(model).verdict == theorem1_check(model, reduce=False).verdict
        same &= is_fcr(pi_matrix(model, exclude=s1)) == is_fcr(pi_matrix(model))
        if model.dims.n_x == model.dims.n_e:
            same &= theorem2_check(model).verdict == theorem2_check(model, reduce=False).verdict
        agree += same
    assert record(9, agree == instances, f"{agree}/{instances} instances agree"), "criterion 9"


def test_criterion_10_scaling():
    t0 = time.perf_counter()
    rows = run_benchmark([8, 16, 32, 64, 128], dims=4, seed=0, repeats=3)
    elapsed = time.perf_counter() - t0
    ns = [r[0] for r in rows]
    s_sub = loglog_slope(ns, [r[1] for r in rows])
    s_lump = loglog_slope(ns, [r[2] for r in rows])
    ratio = rows[-1][2] / rows[-1][1]
    ok = s_sub <= 1.6 and s_lump >= 2.3 and ratio >= 10 and elapsed < 180
    table = " ".join(f"N={n}:{a:.2f}/{b:.2f}ms" for n, a, b in rows)
    assert record(10, ok, f"slope subsystem {s_sub:.2f} (<=1.6), lumped {s_lump:.2f} (>=2.3), "
                          f"ratio@128 {ratio:.1f} (>=10), {elapsed:.1f}s; {table}"), "criterion 10"


def test_criterion_11_worked_micro_example():
    model = micro_model(1.0)
    ok = theorem1_check(model).verdict and np.array_equal(lumped_lft(model).A, np.eye(2))
    for c in (0.0, 1.0, -2.0, 10.0):
        variant = micro_model(c, a_zx=(1.0, 0.0))
        ok &= not theorem1_check(variant).verdict
        ok &= not condition_i_lumped(lumped_lft(variant)).verdict
    assert record(11, ok, "condition I true with A = I; blind-output variant false for "
                          "phi in {0, 1, -2, 10}"), "criterion 11"
