"""Command-line entry point.

One process, one command, one report.  Every report opens with a
metadata block (package version, the fully resolved configuration, and
the named constants) followed by the command's result; JSON is the
default format and ``--format csv`` renders the result's point table
with the metadata as leading ``#`` comment lines.  The ``scales``
command defaults to CSV (its output IS a table) and ``tower`` to the
bare serialization, so it composes in shell pipelines.

Exit codes: 0 on success, 2 on a precondition violation (bad flags, bad
law file, parameter out of range -- also the no-argument usage case),
3 when ``--strict`` is set and the verdict came back inconclusive.

Determinism: the seed comes from ``--seed``, else ``RWRE_SEED``, else 0,
and all randomness is counter-based, so reports are byte-identical
across reruns and ``--threads`` settings.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .conditions import (
    DEFAULT_A_GRID,
    INCONCLUSIVE,
    check_polynomial,
    direction_neighborhood,
    effective_criterion,
    fit_gamma,
)
from .env import law_from_json
from .geometry import box_spec
from .renorm import (
    ALPHA,
    CASE_TWO,
    ScaleParams,
    V,
    build_scales,
    case_scales,
    check_G,
    check_refined_bound,
    gamma_effective,
    hypothesis_phi0,
    propagate_phi,
)
from .solver import SolverError, exact_exit
from .towermath import (
    DOWN,
    NEAREST,
    UP,
    TowerReal,
    tower_add,
    tower_compare,
    tower_div,
    tower_exp,
    tower_from_real,
    tower_from_string,
    tower_ln,
    tower_mul,
    tower_pow,
    tower_pow_tower,
    tower_sub,
    tower_to_string,
)
from .walk import mc_slab_estimate

# ---------------------------------------------------------------------------
# argument parsing helpers


def _parse_vec(text: str) -> tuple:
    return tuple(float(c) for c in text.split(","))


def _parse_ivec(text: str) -> tuple:
    return tuple(int(c) for c in text.split(","))


def _parse_grid(text: str) -> list:
    return [float(c) for c in text.split(",")]


def _parse_tower(text: str) -> TowerReal:
    if "T(" in text:
        return tower_from_string(text)
    return tower_from_real(float(text))


def _default_seed() -> int:
    return int(os.environ.get("RWRE_SEED", "0"))


def _load_law(path: str):
    return law_from_json(Path(path).read_text())


# ---------------------------------------------------------------------------
# report rendering


def _json_default(o):
    if isinstance(o, TowerReal):
        return tower_to_string(o)
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON-serializable: {type(o).__name__}")


def _cell(v) -> str:
    if isinstance(v, np.generic):
        v = v.item()
    if isinstance(v, TowerReal):
        return tower_to_string(v)
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return format(v, ".17g")
    if v is None:
        return ""
    return str(v)


def _render(doc: dict, fmt: str) -> str:
    if fmt == "raw" and "value" in doc["result"]:
        return _cell(doc["result"]["value"]) + "\n"
    if fmt in ("json", "raw"):
        return json.dumps(doc, indent=2, default=_json_default) + "\n"
    # csv: scalars as comment lines, the point table as the body
    result = dict(doc["result"])
    points = result.pop("points", None)
    if points is None:
        points = [result]
        result = {}
    buf = io.StringIO()
    for key in ("version", "command", "config", "constants"):
        buf.write(f"# {key}: {json.dumps(doc[key], default=_json_default)}\n")
    for key, val in result.items():
        buf.write(f"# {key}: {json.dumps(val, default=_json_default)}\n")
    if points:
        writer = csv.DictWriter(buf, fieldnames=list(points[0].keys()))
        writer.writeheader()
        for row in points:
            writer.writerow({k: _cell(v) for k, v in row.items()})
    return buf.getvalue()


def _stock_constants(d: int, c15: float = 1.0, C_result: float = 1.0) -> dict:
    return {
        "v": V,
        "alpha": ALPHA,
        "c1": math.sqrt(d),
        "c2": 7.0,
        "c3": 2.0,
        "c4": 2.0,
        "c5": 8.0,
        "c15": c15,
        "C_result": C_result,
    }


def _config_of(args) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k not in ("func", "format_default")}
    return json.loads(json.dumps(cfg, default=_json_default))


# ---------------------------------------------------------------------------
# command handlers: each returns (result dict, constants dict, verdict|None)


def _cmd_simulate_slab(args):
    law = _load_law(args.law)
    stats = mc_slab_estimate(
        law,
        _parse_vec(args.l),
        args.L,
        args.replicas,
        mode=args.mode,
        cap=args.cap,
        seed=args.seed,
        env_count=args.env_count,
        walks_per_env=args.walks_per_env,
        threads=args.threads,
    )
    result = {
        "p_hat": stats.p_hat,
        "ci_low": stats.ci_low,
        "ci_high": stats.ci_high,
        "successes": stats.successes,
        "replicas": stats.replicas,
        "cap_hits": stats.cap_hits,
        "unreliable": stats.unreliable,
    }
    if "per_env" in stats.metadata:
        result["points"] = stats.metadata["per_env"]
    return result, _stock_constants(law.d), None


def _cmd_exit_exact(args):
    law = _load_law(args.law)
    env = law.realize(args.realization)
    B = box_spec(_parse_vec(args.l), args.l_minus, args.l_plus, args.l_tilde)
    start = _parse_ivec(args.start) if args.start else (0,) * law.d
    sol = exact_exit(env, B, start, method=args.method)
    result = {
        "p": sol.p,
        "q": sol.q,
        "rho": sol.rho,
        "residual": sol.residual,
        "interior_size": sol.interior_size,
    }
    return result, _stock_constants(law.d), None


def _cmd_polynomial(args):
    law = _load_law(args.law)
    widths = _parse_grid(args.ltilde) if args.ltilde else [70.0 * args.L**3]
    rep = check_polynomial(
        law,
        _parse_vec(args.l),
        args.L,
        args.M,
        widths,
        args.replicas,
        seed=args.seed,
        cap=args.cap,
        threads=args.threads,
    )
    result = {
        "condition": rep.condition,
        "verdict": rep.verdict,
        "threshold": rep.evidence["threshold"],
        "points": rep.evidence["points"],
    }
    return result, _stock_constants(law.d), rep.verdict


def _verdict_worst(verdicts) -> str:
    if any(v == "fail" for v in verdicts):
        return "fail"
    if any(v == INCONCLUSIVE for v in verdicts):
        return INCONCLUSIVE
    return "pass"


def _cmd_fit_gamma(args):
    law = _load_law(args.law)
    l = _parse_vec(args.l)
    grid = _parse_grid(args.grid)
    directions = direction_neighborhood(l, args.angle) if args.neighborhood else [np.asarray(l)]
    rows, summaries = [], []
    for i, lp in enumerate(directions):
        rep = fit_gamma(
            law, lp, grid, args.replicas, seed=args.seed, cap=args.cap, threads=args.threads
        )
        summaries.append(
            {
                "direction": i,
                "l": [float(c) for c in lp],
                "verdict": rep.verdict,
                "gamma_hat": rep.evidence.get("gamma_hat"),
                "gamma_lo": rep.evidence.get("gamma_lo"),
                "gamma_hi": rep.evidence.get("gamma_hi"),
                "n_dropped": rep.evidence["n_dropped"],
            }
        )
        for point in rep.evidence["points"]:
            rows.append({"direction": i, **point})
    verdict = _verdict_worst([s["verdict"] for s in summaries])
    result = {"verdict": verdict, "fits": summaries, "points": rows}
    return result, _stock_constants(law.d), verdict


def _cmd_effective_criterion(args):
    law = _load_law(args.law)
    params = ScaleParams(
        d=law.d,
        kappa=law.kappa,
        L0=args.L0,
        Ltilde0=args.ltilde0,
        c15=args.c15,
        C_result=args.C_result,
    )
    rep = effective_criterion(
        law,
        _parse_vec(args.l),
        args.L0,
        args.ltilde0,
        a_grid=_parse_grid(args.a_grid) if args.a_grid else DEFAULT_A_GRID,
        env_count=args.env_count,
        params=params,
        seed=args.seed,
        threads=args.threads,
    )
    ev = rep.evidence
    result = {
        "condition": rep.condition,
        "verdict": rep.verdict,
        "prefactor": ev["prefactor"],
        "a_star": ev["a_star"],
        "inf_left": ev["inf_left"],
        "inf_left_lo": ev["inf_left_lo"],
        "inf_left_hi": ev["inf_left_hi"],
        "points": ev["points"],
    }
    return result, params.metadata(), rep.verdict


def _scale_params(args) -> ScaleParams:
    return ScaleParams(
        d=args.d,
        kappa=args.kappa,
        L0=args.l0,
        Ltilde0=args.ltilde0,
        a0=args.a0,
        C_result=getattr(args, "C_result", 1.0),
    )


def _cmd_scales(args):
    params = _scale_params(args)
    seq = build_scales(params, args.kmax)
    points = [
        {
            "k": k,
            "N_k": seq.N[k],
            "L_k": seq.L[k],
            "Ltilde_k": seq.Lt[k],
            "u_k": tower_from_real(params.u(k)),
            "a_k": tower_from_real(params.a(k)),
        }
        for k in range(args.kmax + 1)
    ]
    return {"points": points}, params.metadata(), None


def _cmd_check_g(args):
    params = _scale_params(args)
    seq = build_scales(params, args.kmax)
    rep = check_G(seq, params)
    points = [
        {"k": it.k, "g1": it.g1, "g2": it.g2, "g1_margin": it.g1_margin, "g2_margin": it.g2_margin}
        for it in rep.items
    ]
    result = {"ok": rep.ok, "first_failure": rep.first_failure(), "points": points}
    return result, params.metadata(), None


def _cmd_propagate_phi(args):
    params = _scale_params(args)
    # the bound at index k needs the scales and tower factors at k+2
    seq = build_scales(params, min(args.kmax + 2, 64))
    phi0 = _parse_tower(args.phi0) if args.phi0 else hypothesis_phi0(params)
    rep = propagate_phi(phi0, seq, params, k_max=args.kmax)
    points = [
        {
            "k": k,
            "bound": rep.bounds[k],
            "target": rep.targets[k],
            "verdict": rep.verdicts[k],
            "margin": rep.margins[k],
        }
        for k in range(len(rep.bounds))
    ]
    result = {
        "ok": rep.ok,
        "first_failure": rep.first_failure,
        "phi0": phi0,
        "points": points,
    }
    return result, params.metadata(), None


def _length_arg(args) -> TowerReal:
    if args.log8 is not None:
        return tower_pow(tower_from_real(8.0), args.log8, NEAREST)
    if args.L is None:
        raise ValueError("need --L or --log8")
    return _parse_tower(args.L)


def _cmd_gamma(args):
    params = _scale_params(args)
    seq = build_scales(params, args.kmax)
    rep = gamma_effective(_length_arg(args), params, seq)
    result = {
        "gamma_paper": rep.gamma_paper,
        "gamma_sznitman": rep.gamma_sznitman,
        "gamma_T": rep.gamma_T,
        "gap_paper": rep.gap_paper,
        "gap_sznitman": rep.gap_sznitman,
        "gap_T": rep.gap_T,
        "k": rep.k,
        "n_L": rep.n_L,
        "iterlog": rep.iterlog,
    }
    return result, params.metadata(), None


def _cmd_case_scales(args):
    params = _scale_params(args)
    seq = build_scales(params, args.kmax)
    cs = case_scales(_length_arg(args), seq, params)
    result = {
        "k": cs.k,
        "case": cs.case,
        "m_k": cs.m_k,
        "S1": cs.S1,
        "S1tilde": cs.S1tilde,
        "S2": cs.S2,
        "S2tilde": cs.S2tilde,
    }
    if args.refined:
        if cs.case != CASE_TWO:
            raise ValueError("--refined needs a case-two length")
        ref = check_refined_bound(cs, seq, params)
        result["refined_ok"] = ref.ok
        result["refined_failed"] = ref.failed
        result["links"] = {
            name: {"ok": ok, "margin": margin} for name, (ok, margin) in ref.links.items()
        }
    return result, params.metadata(), None


_TOWER_BINOPS = {
    "mul": tower_mul,
    "div": tower_div,
    "add": tower_add,
    "sub": tower_sub,
}

_TOWER_UNOPS = {"ln": tower_ln, "exp": tower_exp}


def _cmd_tower(args):
    mode = {"nearest": NEAREST, "up": UP, "down": DOWN}[args.mode]
    op = args.op
    operands = [_parse_tower(t) for t in args.operands]

    def need(n):
        if len(operands) != n:
            raise ValueError(f"tower {op} takes {n} operand(s), got {len(operands)}")

    if op == "pow":
        need(2)
        base, p = operands
        # plain-float exponents take the cheaper path
        try:
            pf = float(args.operands[1])
        except ValueError:
            pf = None
        value = tower_pow(base, pf, mode) if pf is not None else tower_pow_tower(base, p, mode)
    elif op == "compare":
        need(2)
        value = tower_compare(*operands)
    elif op in _TOWER_BINOPS:
        need(2)
        value = _TOWER_BINOPS[op](*operands, mode)
    elif op in _TOWER_UNOPS:
        need(1)
        value = _TOWER_UNOPS[op](operands[0], mode)
    else:  # pragma: no cover - argparse choices guard this
        raise ValueError(f"unknown tower op {op!r}")
    return {"value": value}, _stock_constants(2), None


# ---------------------------------------------------------------------------
# parser assembly


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--seed", type=int, default=_default_seed(), help="RNG seed (default: $RWRE_SEED or 0)")
    shared.add_argument("--threads", type=int, default=None, help="worker threads (default: hardware)")
    shared.add_argument("--strict", action="store_true", help="exit 3 on an inconclusive verdict")
    shared.add_argument("--out", type=str, default=None, help="write the report here instead of stdout")
    shared.add_argument("--format", choices=("csv", "json", "raw"), default=None, help="report format")

    scale_shared = argparse.ArgumentParser(add_help=False)
    scale_shared.add_argument("--d", type=int, default=2)
    scale_shared.add_argument("--kappa", type=float, default=0.25)
    scale_shared.add_argument("--l0", type=float, default=1000.0, help="L_0")
    scale_shared.add_argument("--ltilde0", type=float, default=None, help="Ltilde_0 (default: L_0^3)")
    scale_shared.add_argument("--a0", type=float, default=1.0)

    p = argparse.ArgumentParser(prog="rwre", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version=f"rwre {__version__}")
    sub = p.add_subparsers(dest="command", metavar="command")

    q = sub.add_parser("simulate-slab", parents=[shared], help="Monte Carlo slab back-exit probability")
    q.add_argument("--law", required=True, help="law JSON file")
    q.add_argument("--l", default="1,0", help="direction, comma-separated")
    q.add_argument("--L", type=float, required=True)
    q.add_argument("--replicas", type=int, required=True)
    q.add_argument("--mode", choices=("annealed", "quenched"), default="annealed")
    q.add_argument("--env-count", type=int, default=1)
    q.add_argument("--walks-per-env", type=int, default=None)
    q.add_argument("--cap", type=int, default=None)
    q.set_defaults(func=_cmd_simulate_slab)

    q = sub.add_parser("exit-exact", parents=[shared], help="exact box exit split for one environment")
    q.add_argument("--law", required=True)
    q.add_argument("--realization", type=int, default=0)
    q.add_argument("--l", default="1,0")
    q.add_argument("--l-minus", type=float, required=True)
    q.add_argument("--l-plus", type=float, required=True)
    q.add_argument("--l-tilde", type=float, required=True)
    q.add_argument("--start", default=None, help="start site, comma-separated integers")
    q.add_argument("--method", choices=("auto", "direct", "relax"), default="auto")
    q.set_defaults(func=_cmd_exit_exact)

    q = sub.add_parser("polynomial", parents=[shared], help="polynomial condition at order M")
    q.add_argument("--law", required=True)
    q.add_argument("--l", default="1,0")
    q.add_argument("--L", type=float, required=True)
    q.add_argument("--M", type=float, required=True)
    q.add_argument("--ltilde", default=None, help="widths to try, comma-separated (default: 70 L^3)")
    q.add_argument("--replicas", type=int, required=True)
    q.add_argument("--cap", type=int, default=None)
    q.set_defaults(func=_cmd_polynomial)

    q = sub.add_parser("fit-gamma", parents=[shared], help="empirical decay exponent from a scale grid")
    q.add_argument("--law", required=True)
    q.add_argument("--l", default="1,0")
    q.add_argument("--grid", required=True, help="L values, comma-separated, increasing")
    q.add_argument("--replicas", type=int, required=True)
    q.add_argument("--neighborhood", action="store_true", help="also fit the perturbed directions")
    q.add_argument("--angle", type=float, default=0.05)
    q.add_argument("--cap", type=int, default=None)
    q.set_defaults(func=_cmd_fit_gamma)

    q = sub.add_parser("effective-criterion", parents=[shared], help="prefactor times inf_a E[rho^a] against 1")
    q.add_argument("--law", required=True)
    q.add_argument("--l", default="1,0")
    q.add_argument("--L0", type=float, required=True)
    q.add_argument("--ltilde0", type=float, required=True)
    q.add_argument("--a-grid", default=None, help="moment exponents (default: 0.05,...,1.0)")
    q.add_argument("--env-count", type=int, default=100)
    q.add_argument("--c15", type=float, default=1.0)
    q.add_argument("--C-result", type=float, default=1.0)
    q.set_defaults(func=_cmd_effective_criterion)

    q = sub.add_parser("scales", parents=[shared, scale_shared], help="the renormalization scale table")
    q.add_argument("--kmax", type=int, default=10)
    q.set_defaults(func=_cmd_scales, format_default="csv")

    q = sub.add_parser("check-g", parents=[shared, scale_shared], help="certified growth-condition check")
    q.add_argument("--kmax", type=int, default=40)
    q.set_defaults(func=_cmd_check_g)

    q = sub.add_parser("propagate-phi", parents=[shared, scale_shared], help="certified exit-bound recursion")
    q.add_argument("--kmax", type=int, default=40)
    q.add_argument("--phi0", default=None, help="seed bound in (0,1], float or tower (default: the boundary hypothesis)")
    q.set_defaults(func=_cmd_propagate_phi)

    q = sub.add_parser("gamma", parents=[shared, scale_shared], help="effective decay exponents at a length")
    q.add_argument("--kmax", type=int, default=40)
    q.add_argument("--L", default=None, help="length, float or tower serialization")
    q.add_argument("--log8", type=float, default=None, help="give the length as 8^this instead")
    q.add_argument("--C-result", dest="C_result", type=float, default=1.0)
    q.set_defaults(func=_cmd_gamma)

    q = sub.add_parser("case-scales", parents=[shared, scale_shared], help="between-scale case split and S-scales")
    q.add_argument("--kmax", type=int, default=40)
    q.add_argument("--L", default=None)
    q.add_argument("--log8", type=float, default=None)
    q.add_argument("--refined", action="store_true", help="also certify the case-two refined chain")
    q.set_defaults(func=_cmd_case_scales)

    q = sub.add_parser("tower", parents=[shared], help="tower arithmetic scratchpad")
    q.add_argument("op", choices=sorted({"pow", "compare", *_TOWER_BINOPS, *_TOWER_UNOPS}))
    q.add_argument("operands", nargs="+", help="floats or T(h;m) serializations")
    q.add_argument("--mode", choices=("nearest", "up", "down"), default="nearest")
    q.set_defaults(func=_cmd_tower, format_default="raw")

    return p


def dispatch(argv=None) -> int:
    parser = build_parser()
    if argv is None:
        argv = sys.argv[1:]
    if not argv:
        parser.print_usage(sys.stderr)
        return 2
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 2
    if not hasattr(args, "func"):
        parser.print_usage(sys.stderr)
        return 2

    try:
        result, constants, verdict = args.func(args)
    except (ValueError, ArithmeticError, SolverError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    fmt = args.format or getattr(args, "format_default", "json")
    doc = {
        "version": __version__,
        "command": args.command,
        "config": _config_of(args),
        "constants": constants,
        "result": result,
    }
    text = _render(doc, fmt)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    if args.strict and verdict == INCONCLUSIVE:
        return 3
    return 0


def main():  # console entry point
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
