"""Command line front end.

Usage::

    picone-lab SUBCOMMAND CONFIG.json [--out PREFIX]

Each run reads one JSON configuration, writes its files under ``PREFIX`` and
prints one summary line. Exit status: 0 success, 2 configuration error,
3 solver error, 4 failed report (audit violation or blowup).
"""

import argparse
import json
import math
import os
import sys

import numpy as np

from . import elliptic, lotka_volterra as lv, picone, scalar_branch as sb
from .config import parse_config
from .errors import ConfigurationError, LabError, PreconditionError
from .grid import Field, fmt, integrate, sample

SUBCOMMANDS = ("eigen", "picone", "direction", "branch", "window", "lv-solve", "lv-classify", "evolve")


def dumps(obj, indent=0):
    """JSON text with every real written to 17 significant digits.

    Non-finite reals become ``null``.
    """
    pad = "  " * (indent + 1)
    end = "  " * indent
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt(obj) if math.isfinite(obj) else "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, Field):
        obj = obj.values
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(x, (int, float, np.floating)) and not isinstance(x, bool) for x in obj):
            return "[" + ", ".join(dumps(x) for x in obj) + "]"
        return "[\n" + ",\n".join(pad + dumps(x, indent + 1) for x in obj) + "\n" + end + "]"
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{dumps(str(k))}: {dumps(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


class Result:
    def __init__(self, summary, files, status=0):
        self.summary = summary
        self.files = files
        self.status = status


def _require(cfg, *sections):
    for s in sections:
        cfg.section(s)


# ---------------------------------------------------------------------------
# subcommands


def cmd_eigen(cfg):
    _require(cfg, "domain", "operator")
    op = cfg.operator()
    V = sample(op.grid, cfg.data["eigen"]["potential"]).values
    ep = elliptic.principal_eigenpair(op.with_potential(V), cfg.solver["tol"], cfg.solver["residual_tol"])
    sigma_v = elliptic.principal_eigenvalue_with_potential(op, V, cfg.solver["tol"])
    # (L + V + m) phi = (sigma + m) phi for any admissible shift m
    m = 1.0 + max(0.0, -ep.sigma)
    shifted = elliptic.solve_shifted(op.with_potential(V), m, (ep.sigma + m) * ep.phi.values)
    out = {
        "sigma": ep.sigma,
        "sigma_check": sigma_v,
        "residual": ep.residual,
        "shifted_solve_error": float(np.abs(shifted.values - ep.phi.values).max()),
        "iterations": ep.iterations,
        "strongly_positive": ep.strongly_positive(op),
        "x": op.grid.x,
        "phi": ep.phi,
    }
    return Result(f"sigma0 = {fmt(ep.sigma)}", {"eigen.json": dumps(out) + "\n", "phi.csv": ep.phi.to_csv()})


def cmd_picone(cfg):
    _require(cfg, "domain", "operator", "picone")
    op = cfg.operator()
    pc = cfg.section("picone")
    rep = picone.picone_check(op, sample(op.grid, pc["u"]), sample(op.grid, pc["v"]), pc["g"], pc["g_prime"])
    return Result(f"picone residual = {fmt(rep.residual)}", {"picone.json": dumps(rep.to_dict()) + "\n"})


def cmd_direction(cfg):
    _require(cfg, "domain", "operator", "scalar")
    problem = cfg.scalar_problem()
    p_req = cfg.section("scalar")["p"]
    expo, limit = problem.f.leading_term()
    D = sb.bifurcation_direction(problem, p_req)
    ep = elliptic.principal_eigenpair(problem.op)
    phi_sup = ep.phi.values / ep.phi.values.max()
    sup_integral = limit * integrate(Field(problem.grid, problem.a.values * phi_sup ** (expo + 1)))
    out = {
        "p": expo,
        "limit": limit,
        "sigma0": ep.sigma,
        "D_p": D,
        "integral_sup_normalized": sup_integral,
        "direction": "supercritical" if D > 0 else ("subcritical" if D < 0 else "degenerate"),
    }
    if problem.f.form == "PowerLaw" and problem.f.p > 1:
        out["certificate"] = sb.nonexistence_certificate(problem)
    if np.any(problem.a.values < 0):
        out["lambda_star_bound"] = sb.lambda_star_bound(problem)
    summary = f"D_p = {fmt(D)} (sup-normalized integral {fmt(sup_integral)}, {out['direction']})"
    return Result(summary, {"direction.json": dumps(out) + "\n"})


def cmd_branch(cfg):
    _require(cfg, "domain", "operator", "scalar")
    problem = cfg.scalar_problem()
    bc = cfg.data["branch"]
    window = bc["lambda_window"] or [-math.inf, math.inf]
    seed = sb.seed_branch(problem, bc["eps"], cfg.solver["newton_tol"])
    br = sb.continue_branch(
        problem,
        seed,
        bc["step"],
        bc["max_points"],
        window,
        bc["blowup"],
        cfg.solver["newton_tol"],
        cfg.solver["fold_tol"],
    )
    folds = []
    for pt in br.folds():
        entry = {"s": pt.s, "lambda": pt.lam, "stability_sigma": pt.stability_sigma, "u_max": pt.u_max}
        try:
            entry["curvature"] = sb.fold_curvature(problem, pt.lam, pt.u.values, cfg.solver["fold_tol"])
        except PreconditionError:
            entry["curvature"] = None
        folds.append(entry)
    report = None
    status = 0
    if problem.f.form == "PowerLaw" and problem.f.p >= 2:
        rep = sb.verify_stable_branch(br)
        report = rep.to_dict()
        status = 0 if rep.passed else 4
    # independent re-check of the last point at fixed lambda
    last = br.points[-1]
    polished = sb.newton_solve(problem, last.lam, last.u.values, cfg.solver["newton_tol"])
    out = {
        "sigma0": br.sigma0,
        "points": len(br.points),
        "max_residual": max(float(np.abs(sb.residual(problem, pt.lam, pt.u.values).values).max()) for pt in br.points),
        "endpoint_recheck": float(np.abs(polished.values - last.u.values).max()),
        "terminal": br.terminal,
        "events": [{"kind": k, "index": i} for k, i in br.events],
        "folds": folds,
        "lambda_min": min(pt.lam for pt in br.points),
        "lambda_max": max(pt.lam for pt in br.points),
        "stable_branch_report": report,
    }
    summary = f"branch: {len(br.points)} points, {len(folds)} folds, terminal {br.terminal}"
    return Result(summary, {"branch.csv": br.to_csv(), "branch.json": dumps(out) + "\n"}, status)


def _window_dict(system):
    try:
        w = lv.stability_window(system)
    except PreconditionError:
        return None
    return w.to_dict()


def cmd_window(cfg):
    _require(cfg, "domain", "system")
    system = cfg.system()
    w = lv.stability_window(system)
    out = {
        "lower": w.lower,
        "upper": w.upper,
        "feasible": w.feasible,
        "xi": w.xi,
        "kappa_max": float(system.kappa.max()),
        "z_pm_at_kappa_max": list(lv.z_pm(min(1.0, float(system.kappa.max())))),
        "low_interaction": system.low_interaction,
        "uniqueness_condition": lv.uniqueness_condition(system),
    }
    summary = f"window [{fmt(w.lower)}, {fmt(w.upper)}] {'feasible' if w.feasible else 'infeasible'}"
    return Result(summary, {"window.json": dumps(out) + "\n"})


def _lv_overrides(cfg):
    block = cfg.data["lv_solve"]
    return block["lambda"], block["mu"]


def cmd_lv_solve(cfg):
    _require(cfg, "domain", "system")
    system = cfg.system()
    lam, mu = _lv_overrides(cfg)
    st = lv.coexistence(system, lam, mu)
    solved = system.with_rates(lam, mu)
    out = {
        "u": st.u,
        "v": st.v,
        "residual": st.residual,
        "linearization_sigma": st.linearization_sigma,
        "sigma_check": lv.linearization_sigma(solved, st),
        "window": _window_dict(system),
    }
    return Result(f"linearization sigma = {fmt(st.linearization_sigma)}", {"coexistence.json": dumps(out) + "\n"})


def cmd_lv_classify(cfg):
    _require(cfg, "domain", "system", "scan")
    system = cfg.system()
    sc = cfg.section("scan")
    labels = lv.region_scan(system, sc["lambda_range"], sc["mu_range"], sc["steps"], sc["tol"])
    counts = {}
    for r in labels:
        counts[r.label] = counts.get(r.label, 0) + 1
    summary = "labels: " + ", ".join(f"{k}={counts[k]}" for k in sorted(counts))
    return Result(summary, {"regions.csv": lv.region_csv(labels)})


def cmd_evolve(cfg):
    _require(cfg, "domain", "system", "evolve")
    system = cfg.system()
    ev = cfg.section("evolve")
    grid = system.grid
    reference = None
    if ev["reference"] == "coexistence":
        st = lv.coexistence(system)
        reference = (st.u.values, st.v.values)
    if ev["initial"] == "random":
        starts = lv.random_initial_conditions(grid, ev["count"], ev["seed"], ev["scale"])
    elif ev["initial"] == "expression":
        if ev["u0"] is None or ev["v0"] is None:
            raise ConfigurationError("evolve.u0 and evolve.v0 are required for initial = 'expression'")
        starts = [(sample(grid, ev["u0"]).values, sample(grid, ev["v0"]).values)]
    else:
        st = lv.coexistence(system)
        starts = [(st.u.values, st.v.values)]
    files = {}
    finals = []
    status = 0
    for k, (u0, v0) in enumerate(starts):
        tr = lv.evolve(system, u0, v0, ev["dt"], ev["t_end"], reference, ev["stride"])
        name = "trajectory.csv" if len(starts) == 1 else f"trajectory_{k}.csv"
        files[name] = tr.to_csv()
        finals.append({"status": tr.status, "final_distance": tr.dist[-1], "u_max": tr.u_max[-1], "v_max": tr.v_max[-1]})
        if tr.status == "blowup":
            status = 4
    files["evolve.json"] = dumps({"runs": finals}) + "\n"
    worst = max((f["final_distance"] for f in finals), default=float("nan"))
    summary = f"final distance = {fmt(worst)}" if reference is not None else f"runs: {len(finals)}"
    if status:
        summary += " (blowup)"
    return Result(summary, files, status)


# which subcommand exercises each module operation
OPERATIONS = {
    "make_grid": "eigen",
    "sample": "eigen",
    "integrate": "direction",
    "assemble": "eigen",
    "solve_shifted": "eigen",
    "principal_eigenpair": "eigen",
    "principal_eigenvalue_with_potential": "eigen",
    "picone_check": "picone",
    "residual": "branch",
    "newton_solve": "branch",
    "bifurcation_direction": "direction",
    "seed_branch": "branch",
    "continue_branch": "branch",
    "stability": "branch",
    "fold_curvature": "branch",
    "nonexistence_certificate": "direction",
    "lambda_star_bound": "direction",
    "verify_stable_branch": "branch",
    "F_pm": "window",
    "z_pm": "window",
    "stability_window": "window",
    "logistic_state": "lv-solve",
    "coexistence": "lv-solve",
    "linearization_sigma": "lv-solve",
    "classify_region": "lv-classify",
    "region_scan": "lv-classify",
    "evolve": "evolve",
    "parse_config": "all",
    "run": "all",
}

COMMANDS = {
    "eigen": cmd_eigen,
    "picone": cmd_picone,
    "direction": cmd_direction,
    "branch": cmd_branch,
    "window": cmd_window,
    "lv-solve": cmd_lv_solve,
    "lv-classify": cmd_lv_classify,
    "evolve": cmd_evolve,
}


def run(subcommand, cfg, prefix=None):
    """Run one subcommand; write its files and return ``(status, summary, paths)``."""
    if subcommand not in COMMANDS:
        raise ConfigurationError(f"unknown subcommand {subcommand!r}")
    result = COMMANDS[subcommand](cfg)
    prefix = prefix or cfg.prefix
    paths = []
    directory = os.path.dirname(prefix)
    if directory:
        os.makedirs(directory, exist_ok=True)
    for name, text in result.files.items():
        path = f"{prefix}_{name}"
        with open(path, "w", newline="\n", encoding="utf-8") as fh:
            fh.write(text)
        paths.append(path)
    return result.status, result.summary, paths


def main(argv=None):
    parser = argparse.ArgumentParser(prog="picone-lab", description=__doc__.split("\n\n")[0])
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("config", help="JSON configuration file")
    parser.add_argument("--out", help="output path prefix (overrides output.prefix)")
    args = parser.parse_args(argv)
    try:
        with open(args.config, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        print(f"error: cannot read {args.config}: {exc.strerror}", file=sys.stderr)
        return 2
    try:
        cfg = parse_config(text)
        status, summary, _ = run(args.subcommand, cfg, args.out)
    except LabError as exc:
        print(f"error [{args.subcommand}]: {exc}", file=sys.stderr)
        return exc.exit_code
    print(summary)
    return status


if __name__ == "__main__":
    sys.exit(main())
