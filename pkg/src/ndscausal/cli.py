"""Command-line interface: ``nds analyze|construct|benchmark|generate``.

Exit codes
----------
0  success (analysis completed, connection found, file written)
2  invalid or unreadable model, bad arguments
3  construction certified impossible
4  lumped cross-check disagrees with the subsystem-wise verdict
5  construction search exhausted without a certificate
"""

from __future__ import annotations

import argparse
import json
import os
import statistics
import sys
import time
from pathlib import Path
from typing import List, Optional

import numpy as np

from .constructibility import FeedbackGain, report
from .generator import PROFILES, GenProfile, GenerationError, gen_benchmark_model, gen_model
from .linalg import DEFAULT_TOL, Tol, is_fcr, is_frr
from .lumped import (IllPosedError, condition_i_lumped, condition_ii_lumped, lumped_from_stacked,
                     lumped_lft, regularity_probe, well_posed)
from .model import (ModelFormatError, ModelValidationError, NdsModel, check, load, save,
                    scm_from_json, scm_to_json, stack)
from .scalable import (NotApplicableError, cert_i, cert_ii, theorem1_check, theorem1_matrix,
                       theorem2_check, theorem2_matrix)
from .synthesis import apply_feedback, synthesize_feedback, synthesize_phi

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_IMPOSSIBLE = 3
EXIT_DISAGREE = 4
EXIT_EXHAUSTED = 5

_STATUS_EXIT = {"found": EXIT_OK, "certified-impossible": EXIT_IMPOSSIBLE,
                "exhausted": EXIT_EXHAUSTED}


def _tol(args) -> Tol:
    rtol = args.tol
    if rtol is None:
        env = os.environ.get("NDS_TOL")
        rtol = float(env) if env else DEFAULT_TOL.rank_rtol
    return Tol(rank_rtol=rtol)


def _load_model(path: str, phi_path: Optional[str] = None) -> NdsModel:
    model = load(path)
    if phi_path:
        frag = json.loads(Path(phi_path).read_text())
        if "phi" not in frag:
            raise ModelFormatError(f"{phi_path}: missing key 'phi'")
        model = model.with_phi(scm_from_json(frag["phi"]))
        if frag.get("feedback") is not None:
            model = apply_feedback(model, FeedbackGain.from_json(frag["feedback"], model))
    return model


def _err(msg: str) -> None:
    print(f"nds: {msg}", file=sys.stderr)


# -- analyze ----------------------------------------------------------------

def _analysis(model: NdsModel, tol: Tol, oracle: bool, time_domain: str) -> dict:
    d = model.dims
    posed = well_posed(model, tol)
    ci = theorem1_check(model, tol)
    try:
        cii = theorem2_check(model, tol).to_dict()
    except NotApplicableError as exc:
        cii = {"verdict": None, "not_applicable": str(exc)}
    out = {
        "schema_version": SCHEMA_VERSION,
        "model": {"N": model.N, "dims": d.as_dict(), "phi_nnz": model.phi.nnz},
        "well_posed": posed,
        "tolerances": {"rank_rtol": tol.rank_rtol, "rank_atol": tol.rank_atol},
        "time_domain": time_domain,
        "condition_i": ci.to_dict(),
        "condition_ii": cii,
        "warnings": [],
    }
    if not posed:
        out["warnings"].append("I - A_zv*phi is singular: the interconnection is ill posed")
    regular = None
    if posed and d.n_x == d.n_e:
        try:
            regular = regularity_probe(lumped_lft(model, tol), tol=tol).regular
        except IllPosedError:
            regular = None
    dims_ok = d.n_e >= d.n_x
    out["verdicts"] = {
        "impulse_free_continuous": (dims_ok and ci.verdict) if posed else None,
        "causal_discrete_lemma1_path": (bool(regular and cii["verdict"] and ci.verdict)
                                        if posed else None),
        "regular": regular,
    }
    out["constructibility"] = report(model, tol).to_dict()
    if oracle:
        out["oracle"] = _oracle(model, tol, ci.verdict, cii["verdict"])
    return out


def _oracle(model: NdsModel, tol: Tol, v1: bool, v2: Optional[bool]) -> dict:
    try:
        lumped = lumped_lft(model, tol)
    except IllPosedError as exc:
        return {"ill_posed": True, "message": str(exc), "agree": None}
    l1 = condition_i_lumped(lumped, tol).verdict
    l2 = condition_ii_lumped(lumped, tol).verdict
    agree_i = l1 == v1
    agree_ii = None if v2 is None else l2 == v2
    return {
        "ill_posed": False,
        "condition_i": l1,
        "condition_ii": l2,
        "agree_condition_i": agree_i,
        "agree_condition_ii": agree_ii,
        "agree": agree_i and agree_ii is not False,
        "interconnection_cond": lumped.cond,
    }


def _fmt(v) -> str:
    return {True: "yes", False: "no", None: "n/a"}[v]


def _print_analysis(out: dict) -> None:
    m = out["model"]
    d = m["dims"]
    print(f"network: N={m['N']} n_x={d['n_x']} n_e={d['n_e']} n_v={d['n_v']} "
          f"n_z={d['n_z']} n_u={d['n_u']} n_y={d['n_y']} phi_nnz={m['phi_nnz']}")
    print(f"well posed: {_fmt(out['well_posed'])}")
    for w in out["warnings"]:
        print(f"warning: {w}")
    ci = out["condition_i"]
    print(f"condition I:  {_fmt(ci['verdict'])}  (M_I {ci['test_matrix_dims'][0]}x"
          f"{ci['test_matrix_dims'][1]}, rank {ci['rank']}, "
          f"reduced subsystems {ci['reduced_subsystems']})")
    cii = out["condition_ii"]
    if cii.get("not_applicable"):
        print(f"condition II: n/a ({cii['not_applicable']})")
    else:
        print(f"condition II: {_fmt(cii['verdict'])}  (M_II {cii['test_matrix_dims'][0]}x"
              f"{cii['test_matrix_dims'][1]}, rank {cii['rank']}, "
              f"reduced subsystems {cii['reduced_subsystems']})")
    v = out["verdicts"]
    print(f"impulse free (continuous): {_fmt(v['impulse_free_continuous'])}")
    print(f"causal via regular + conditions I, II (discrete): "
          f"{_fmt(v['causal_discrete_lemma1_path'])}")
    c = out["constructibility"]
    print(f"some phi gives condition I: {_fmt(c['exists_phi_for_i'])}; "
          f"condition II: {_fmt(c['exists_phi_for_ii'])}; D_I={c['D_I']} D_II={c['D_II']}")
    if "oracle" in out:
        o = out["oracle"]
        if o["ill_posed"]:
            print(f"lumped check: ill posed ({o['message']})")
        else:
            print(f"lumped check: condition I {_fmt(o['condition_i'])}, "
                  f"condition II {_fmt(o['condition_ii'])}, agree {_fmt(o['agree'])}")


def cmd_analyze(args) -> int:
    tol = _tol(args)
    model = _load_model(args.path, args.phi)
    out = _analysis(model, tol, args.oracle, args.time_domain)
    if args.json:
        print(json.dumps(out, indent=2))
    else:
        _print_analysis(out)
    if args.oracle and out["oracle"]["agree"] is False:
        _err("lumped model disagrees with the subsystem-wise verdict")
        return EXIT_DISAGREE
    return EXIT_OK


# -- construct --------------------------------------------------------------

def cmd_construct(args) -> int:
    tol = _tol(args)
    model = _load_model(args.path)
    cond_i = args.target in ("i", "both")
    cond_ii = args.target in ("ii", "both")
    if args.feedback:
        res = synthesize_feedback(model, cond_i, cond_ii, args.attempts, args.seed, tol)
    else:
        res = synthesize_phi(model, cond_i, cond_ii, args.attempts, args.seed, tol)
    out = {"schema_version": SCHEMA_VERSION, "target": args.target, **res.to_dict()}
    if cond_i and cond_ii:
        out["joint_existence"] = "confirmed-by-search" if res.status == "found" else "unknown"
    print(json.dumps(out, indent=2))
    if res.status == "found" and args.out:
        frag = {"schema_version": SCHEMA_VERSION, "phi": scm_to_json(res.phi)}
        if res.feedback is not None:
            frag["feedback"] = res.feedback.to_json()
        Path(args.out).write_text(json.dumps(frag, indent=2) + "\n")
    if res.status == "certified-impossible":
        _err(f"certified impossible: {res.certificate}")
    return _STATUS_EXIT[res.status]


# -- benchmark --------------------------------------------------------------

def subsystem_pipeline(model: NdsModel, tol: Tol = DEFAULT_TOL) -> tuple:
    """Both subsystem-wise verdicts from scratch.

    Cached certificates are dropped first, so every call pays for all local
    SVDs; within a call each ``E(i)`` is factored once and shared by both
    conditions.
    """
    for s in model.subsystems:
        s._cache.clear()
    certs1 = [cert_i(s, tol) for s in model.subsystems]
    certs2 = [cert_ii(s, tol) for s in model.subsystems]
    v1 = is_fcr(theorem1_matrix(model, tol, certs1), tol)
    v2 = is_frr(theorem2_matrix(model, tol, certs2), tol)
    return v1, v2


def lumped_pipeline(model: NdsModel, tol: Tol = DEFAULT_TOL) -> tuple:
    """The discrete-time test on the lumped model: LFT, regularity, conditions I and II."""
    st = stack(model, validate_first=False)
    lumped = lumped_from_stacked(st, model.phi.to_dense(), tol)
    regular = regularity_probe(lumped, tol=tol).regular
    return (regular, condition_i_lumped(lumped, tol).verdict,
            condition_ii_lumped(lumped, tol).verdict)


def _median_ms(fn, repeats: int) -> float:
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append((time.perf_counter() - t0) * 1e3)
    return statistics.median(times)


def loglog_slope(ns, ts) -> float:
    return float(np.polyfit(np.log(ns), np.log(ts), 1)[0])


def run_benchmark(n_list: List[int], dims: int = 4, seed: int = 0, repeats: int = 3,
                  tol: Tol = DEFAULT_TOL) -> List[tuple]:
    """Rows ``(N, t_subsystem_ms, t_lumped_ms)``; the two paths must agree."""
    rows = []
    for N in n_list:
        model = check(gen_benchmark_model(N, dims, np.random.default_rng([seed, N])))
        a, b = subsystem_pipeline(model, tol), lumped_pipeline(model, tol)[1:]
        if a != b:
            raise RuntimeError(f"N={N}: subsystem verdicts {a} differ from lumped {b}")
        ts = _median_ms(lambda: subsystem_pipeline(model, tol), repeats)
        tl = _median_ms(lambda: lumped_pipeline(model, tol), repeats)
        rows.append((N, ts, tl))
    return rows


def cmd_benchmark(args) -> int:
    try:
        n_list = [int(x) for x in args.n_list.split(",") if x.strip()]
    except ValueError:
        _err(f"--n-list must be comma-separated integers, got {args.n_list!r}")
        return EXIT_INVALID
    if not n_list or min(n_list) < 1 or args.dims < 1 or args.repeats < 1:
        _err("--n-list, --dims and --repeats must be positive")
        return EXIT_INVALID
    rows = run_benchmark(n_list, args.dims, args.seed, args.repeats, _tol(args))
    print("N,t_subsystem_pipeline_ms,t_lumped_ms")
    for N, ts, tl in rows:
        print(f"{N},{ts:.4f},{tl:.4f}")
    if len(rows) >= 2:
        ns = [r[0] for r in rows]
        s1 = loglog_slope(ns, [r[1] for r in rows])
        s2 = loglog_slope(ns, [r[2] for r in rows])
        print(f"# slope_subsystem={s1:.3f},slope_lumped={s2:.3f},"
              f"ratio_at_max_N={rows[-1][2] / rows[-1][1]:.2f}")
    return EXIT_OK


# -- generate ---------------------------------------------------------------

def cmd_generate(args) -> int:
    if args.profile not in PROFILES:
        _err(f"unknown profile {args.profile!r}; choose from {', '.join(PROFILES)}")
        return EXIT_INVALID
    if args.subsystems < 1:
        _err("--subsystems must be at least 1")
        return EXIT_INVALID
    profile = GenProfile(args.profile, max_dim=args.max_dim)
    try:
        model = gen_model(args.subsystems, profile, np.random.default_rng(args.seed))
    except GenerationError as exc:
        _err(str(exc))
        return EXIT_INVALID
    save(model, args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nds",
        description="Subsystem-wise causality and impulse-freeness analysis of networked "
                    "descriptor systems.",
        epilog="exit codes: 0 ok/found, 2 invalid input, 3 certified impossible, "
               "4 lumped cross-check disagreement, 5 search exhausted. "
               "NDS_TOL overrides the default relative rank tolerance.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def tol_flag(p):
        p.add_argument("--tol", type=float, default=None,
                       help="relative rank tolerance (default 1e-9 or $NDS_TOL)")

    p = sub.add_parser("analyze", help="test conditions I and II for a model file")
    p.add_argument("path")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.add_argument("--oracle", action="store_true",
                   help="cross-check against the lumped model; disagreement exits 4")
    p.add_argument("--time-domain", choices=["continuous", "discrete"], default="continuous")
    p.add_argument("--phi", default=None,
                   help="fragment file from 'construct --out' replacing phi (and applying F)")
    tol_flag(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("construct", help="search for a connection matrix (and feedback)")
    p.add_argument("path")
    p.add_argument("--target", choices=["i", "ii", "both"], default="i")
    p.add_argument("--feedback", action="store_true",
                   help="also search decentralized static output feedback gains")
    p.add_argument("--attempts", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="write the found phi (and F) here")
    tol_flag(p)
    p.set_defaults(func=cmd_construct)

    p = sub.add_parser("benchmark", help="time subsystem-wise vs lumped analysis (CSV)")
    p.add_argument("--n-list", default="8,16,32,64,128")
    p.add_argument("--dims", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--repeats", type=int, default=3)
    tol_flag(p)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("generate", help="write a random model file")
    p.add_argument("--subsystems", type=int, required=True)
    p.add_argument("--profile", required=True, help=", ".join(PROFILES))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-dim", type=int, default=4)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (ModelFormatError, ModelValidationError, OSError, ValueError) as exc:
        _err(str(exc))
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
