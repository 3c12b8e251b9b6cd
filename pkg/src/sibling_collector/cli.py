"""Command-line front end: ``sibling-collector <command> [options]``.

Commands
    compute     E[U_j^N] by quadrature or exact rationals
    simulate    Monte Carlo means and standard errors
    asympt      three-term large-N expansion
    limit       N -> infinity analysis of a growing family
    compare     all applicable engines side by side
    experiment  random probability vectors against the equal case

Exit codes: 0 success, 2 configuration error, 3 quadrature non-convergence,
4 diagnosed divergence.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from . import __version__, asymptotics, exact, limits, quadrature, simulator
from .families import FamilySpec, Kind, ProbVector, normalize, probabilities

CSV_HEADER = "# sibling-collector v1"
EXIT_OK, EXIT_CONFIG, EXIT_NONCONVERGENCE, EXIT_DIVERGENT = 0, 2, 3, 4
EXPERIMENT_MAX_N = 200


class ConfigError(ValueError):
    pass


@dataclass
class Table:
    columns: list[str]
    rows: list[dict[str, Any]]
    meta: dict[str, Any]


# engines -------------------------------------------------------------------


def _fmt(v: Any) -> Any:
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else str(v)
    return "" if v is None else v


def _quad(p: ProbVector, j: int, cfg: quadrature.QuadratureConfig, threads: int | None):
    return quadrature.expected_unfilled(p, j, cfg, threads=threads)


def compare(
    spec: FamilySpec,
    Ns: Sequence[int],
    j: int,
    *,
    reps: int = 2000,
    seed: int = 0,
    cfg: quadrature.QuadratureConfig | None = None,
    threads: int | None = None,
) -> list[dict[str, Any]]:
    """One row per N: exact, quadrature, asymptotic and simulated values plus deltas.

    Engines that do not apply to the family leave their cells as None.
    """
    cfg = cfg or quadrature.QuadratureConfig()
    rows = []
    for N in Ns:
        p = probabilities(spec, N)
        row: dict[str, Any] = {"family": spec.label(), "N": N, "j": j}
        row["exact"] = float(exact.hyperharmonic(N, j)) if spec.kind is Kind.EQUAL else None
        q = _quad(p, j, cfg, threads)
        row["quadrature"], row["quad_err"] = q.value, q.error_estimate
        row["asymptotic"] = None
        if spec.is_decaying:
            try:
                row["asymptotic"] = asymptotics.theorem1(spec, N, j).value
            except asymptotics.DomainTooSmall:
                pass
        elif spec.kind is Kind.EQUAL and N >= 2:
            row["asymptotic"] = asymptotics.equal_leading(N, j)
        row["sim_mean"] = row["sim_se"] = None
        if reps >= 2:
            est = simulator.estimate(p, j, reps, seed, threads=threads)
            row["sim_mean"], row["sim_se"] = est.mean_u[j], est.se_u[j]
        q = row["quadrature"]
        row["d_quad_exact"] = None if row["exact"] is None else q - row["exact"]
        row["d_quad_asympt"] = None if row["asymptotic"] is None else q - row["asymptotic"]
        row["d_sim_quad"] = None if row["sim_mean"] is None else row["sim_mean"] - q
        rows.append(row)
    return rows


def experiment_conjecture(
    N: int,
    j: int,
    trials: int,
    seed: int,
    cfg: quadrature.QuadratureConfig | None = None,
) -> dict[str, Any]:
    """Compare E[U_j^N] at equal probabilities with `trials` Dirichlet(1) samples.

    A violation is a sample whose value exceeds the equal-probability value
    by more than the two quadrature error estimates combined.
    """
    if not 1 <= N <= EXPERIMENT_MAX_N:
        raise ConfigError(f"experiment needs 1 <= N <= {EXPERIMENT_MAX_N}")
    if trials < 1:
        raise ConfigError("trials must be >= 1")
    cfg = cfg or quadrature.QuadratureConfig()
    uni = quadrature.expected_unfilled(ProbVector(np.full(N, 1.0 / N)), j, cfg, threads=1)
    rng = np.random.default_rng(seed)
    best, best_margin, violations = -math.inf, -math.inf, 0
    for _ in range(trials):
        if N == 1:
            val, err = uni.value, uni.error_estimate
        else:
            r = quadrature.expected_unfilled(normalize(rng.dirichlet(np.ones(N))), j, cfg, threads=1)
            val, err = r.value, r.error_estimate
        margin = val - uni.value
        if margin > err + uni.error_estimate:
            violations += 1
        best = max(best, val)
        best_margin = max(best_margin, margin)
    return {
        "N": N,
        "j": j,
        "trials": trials,
        "seed": seed,
        "uniform": uni.value,
        "max_sampled": best,
        "max_excess": best_margin,
        "violations": violations,
    }


# argument handling ---------------------------------------------------------


def _int_list(text: str) -> list[int]:
    """'10,100,1000' or '2-5' or '2:5' (inclusive)."""
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        for sep in ("-", ":"):
            if sep in part[1:]:
                a, b = part.split(sep, 1)
                out += list(range(int(float(a)), int(float(b)) + 1))
                break
        else:
            out.append(int(float(part)))
    return out


def _family(args) -> FamilySpec:
    if not args.family:
        raise ConfigError("--family is required")
    try:
        return FamilySpec.from_json(args.family)
    except (OSError, ValueError, TypeError) as exc:
        raise ConfigError(f"bad --family: {exc}") from None


def _Ns(args) -> list[int]:
    if args.Nlist:
        Ns = _int_list(args.Nlist)
    elif args.N is not None:
        Ns = _int_list(args.N)
    else:
        raise ConfigError("--N or --Nlist is required")
    if any(n < 1 for n in Ns):
        raise ConfigError("N must be >= 1")
    if Ns != sorted(Ns):
        raise ConfigError("N-list must be sorted ascending")
    return Ns


def _js(args) -> list[int]:
    js = _int_list(args.j)
    if any(j < 2 for j in js):
        raise ConfigError("j must be >= 2")
    return js


def _cfg(args) -> quadrature.QuadratureConfig:
    kw: dict[str, Any] = {}
    if args.tol is not None:
        kw.update(rel_tol=args.tol, abs_tol=min(1e-12, args.tol))
    if args.max_doublings is not None:
        kw.update(max_panel_doublings=args.max_doublings)
    try:
        return quadrature.QuadratureConfig(**kw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _threads(args) -> int | None:
    if args.threads is not None:
        return args.threads
    env = os.environ.get("SIBLING_THREADS")
    return int(env) if env else None


# commands ------------------------------------------------------------------


def cmd_compute(args) -> Table:
    spec, Ns, js, cfg = _family(args), _Ns(args), _js(args), _cfg(args)
    method = args.method or "quadrature"
    rows = []
    for N in Ns:
        p = None
        for j in js:
            if method == "exact":
                if spec.kind is not Kind.EQUAL:
                    raise ConfigError("exact values exist only for the equal family")
                res = exact.evaluate(N, j, exact.Formula.RECURSION)
                d = res.to_dict()
                d.update(value=d["value_float"], err=0.0, nodes=0)
            else:
                if p is None:
                    p = probabilities(spec, N)
                if method == "quadrature":
                    res = quadrature.expected_unfilled(p, j, cfg, threads=_threads(args))
                elif method == "unit_interval":
                    res = quadrature.expected_unfilled_on_unit_interval(p, j, cfg)
                else:
                    raise ConfigError(f"unknown --method {method}")
                d = res.to_dict(timing=args.timing)
                d.update(err=d.pop("error_estimate"), nodes=d.pop("nodes_used"))
            d["family"] = spec.label()
            rows.append(d)
    cols = ["method", "family", "N", "j", "value", "err", "nodes", "ms"]
    if method == "exact":
        cols += ["value_num", "value_den"]
    return Table(cols, rows, {"command": "compute"})


def cmd_simulate(args) -> Table:
    spec, Ns = _family(args), _Ns(args)
    jmax = args.jmax or max(_js(args))
    rows = []
    for N in Ns:
        est = simulator.estimate(probabilities(spec, N), jmax, args.reps, args.seed, threads=_threads(args))
        base = {"family": spec.label(), "N": N, "reps": est.reps, "seed": est.seed}
        rows.append({**base, "j": "T", "mean": est.mean_t, "se": est.se_t, "var": est.var_t})
        for j in range(2, jmax + 1):
            rows.append({**base, "j": j, "mean": est.mean_u[j], "se": est.se_u[j], "var": est.var_u[j]})
    return Table(["family", "N", "j", "mean", "se", "var", "reps", "seed"], rows, {"command": "simulate"})


def cmd_asympt(args) -> Table:
    spec, Ns, js = _family(args), _Ns(args), _js(args)
    try:
        fam = asymptotics.SmoothFamily.from_spec(spec)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    params = ";".join(f"{k}={v}" for k, v in spec.to_dict().items() if k in ("p", "q"))
    rows = []
    for N in Ns:
        for j in js:
            try:
                t = asymptotics.theorem1(fam, N, j)
            except asymptotics.DomainTooSmall as exc:
                raise ConfigError(str(exc)) from None
            rows.append(
                {
                    "family": spec.kind.value,
                    "params": params,
                    "N": N,
                    "j": j,
                    "delta": t.delta,
                    "term0": t.term0,
                    "term1": t.term1,
                    "term2": t.term2,
                    "value": t.value,
                }
            )
    cols = ["family", "params", "N", "j", "delta", "term0", "term1", "term2", "value"]
    return Table(cols, rows, {"command": "asympt"})


def cmd_limit(args) -> Table:
    spec = _family(args)
    rows = []
    divergent = False
    for j in _js(args):
        try:
            prof = limits.growth_profile(spec)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        diag = limits.finiteness_diagnostic(spec, j)
        row = {
            "family": spec.label(),
            "j": j,
            "x_alpha": prof.x_alpha,
            "s_at_x_alpha": prof.s_at_x_alpha.value,
            "verdict": diag.verdict.value,
            "nu_hat": diag.nu_hat,
            "I_value": None,
            "tail_bound": None,
            "quad_error": None,
        }
        if diag.verdict is limits.Verdict.DIVERGENT_BY_PROP2:
            divergent = True
            row["note"] = "diagnosed, not proven"
            row["witness"] = diag.witness[-1]
        else:
            res = limits.limit_integral_I(spec, j, _cfg(args))
            row.update(I_value=res.value, tail_bound=res.tail_bound, quad_error=res.quad_error)
        rows.append(row)
    cols = ["family", "j", "x_alpha", "s_at_x_alpha", "verdict", "nu_hat", "I_value", "tail_bound",
            "quad_error", "witness", "note"]
    return Table(cols, rows, {"command": "limit", "exit": EXIT_DIVERGENT if divergent else EXIT_OK})


def cmd_compare(args) -> Table:
    spec, Ns = _family(args), _Ns(args)
    rows = []
    for j in _js(args):
        rows += compare(spec, Ns, j, reps=args.reps, seed=args.seed, cfg=_cfg(args), threads=_threads(args))
    cols = ["family", "N", "j", "exact", "quadrature", "quad_err", "asymptotic", "sim_mean", "sim_se",
            "d_quad_exact", "d_quad_asympt", "d_sim_quad"]
    return Table(cols, rows, {"command": "compare"})


def cmd_experiment(args) -> Table:
    Ns = _Ns(args)
    rows = [
        experiment_conjecture(N, j, args.trials, args.seed, _cfg(args)) for N in Ns for j in _js(args)
    ]
    cols = ["N", "j", "trials", "seed", "uniform", "max_sampled", "max_excess", "violations"]
    return Table(cols, rows, {"command": "experiment", "violations": sum(r["violations"] for r in rows)})


COMMANDS = {
    "compute": cmd_compute,
    "simulate": cmd_simulate,
    "asympt": cmd_asympt,
    "limit": cmd_limit,
    "compare": cmd_compare,
    "experiment": cmd_experiment,
}


# output --------------------------------------------------------------------


def render(table: Table, fmt: str) -> str:
    if fmt == "json":
        meta = {k: v for k, v in table.meta.items() if k != "exit"}
        payload = {"version": __version__, **meta, "rows": table.rows}
        return json.dumps(payload, indent=2, sort_keys=False, default=_json_default) + "\n"
    buf = io.StringIO()
    buf.write(CSV_HEADER + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(table.columns)
    for row in table.rows:
        w.writerow([_fmt(row.get(c)) for c in table.columns])
    return buf.getvalue()


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    raise TypeError(type(o).__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sibling-collector", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--family", help='JSON object or path, e.g. {"kind": "zipf", "p": 1.0}')
        sp.add_argument("--N", help="N, or a comma list / inclusive range")
        sp.add_argument("--Nlist", help="ascending comma list of N")
        sp.add_argument("--j", default="2", help="j, or a comma list / inclusive range")
        sp.add_argument("--jmax", type=int)
        sp.add_argument("--reps", type=int, default=2000 if name == "compare" else 10**4)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--trials", type=int, default=1000)
        sp.add_argument("--tol", type=float, help="relative quadrature tolerance")
        sp.add_argument("--max-doublings", type=int, help="panel bisection budget (default 16)")
        sp.add_argument("--method", choices=["quadrature", "unit_interval", "exact"])
        sp.add_argument("--format", choices=["csv", "json"], default="csv")
        sp.add_argument("--out", help="output file (default stdout)")
        sp.add_argument("--threads", type=int, help="worker threads (env SIBLING_THREADS)")
        sp.add_argument("--timing", action="store_true", help="fill the ms column")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        table = COMMANDS[args.command](args)
    except (ConfigError, ValueError, OverflowError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except quadrature.NonConvergence as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except limits.DiagnosedDivergent as exc:
        print(f"diverges: {exc}", file=sys.stderr)
        return EXIT_DIVERGENT
    text = render(table, args.format)
    if args.out:
        try:
            with open(args.out, "w", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            print(f"error: cannot write {args.out}: {exc}", file=sys.stderr)
            return EXIT_CONFIG
    else:
        sys.stdout.write(text)
    return table.meta.get("exit", EXIT_OK)


if __name__ == "__main__":
    sys.exit(main())
