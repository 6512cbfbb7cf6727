"""Batch command-line front end.

Commands: params | verify-sia | verify-alignment | verify-rank |
dof-table | simulate.  Every run echoes its full configuration into a
machine-readable report (JSON; CSV for dof-table) so it can be
reproduced exactly.  Exit codes: 0 all checks pass, 1 a check failed,
2 invalid input, 3 a resource bound was exceeded.

Reports are byte-identical for identical (config, version) regardless
of the worker count; wall-clock timings are therefore only included
when explicitly requested with --timings.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import __version__
from .channel import (build_params, identity_channels, sample_channels,
                      DEFAULT_MATERIALIZATION_BOUND)
from .errors import DegenerateChannelError, ResourceBoundError
from .precoding import (DEFAULT_ENUMERATION_BOUND, build_all_bases,
                        check_alignment, extract_generators)
from .rings import ScalarRing
from .sia import cramer_check, sia_run, stack_decoder
from .verifier import (DEFAULT_MEMORY_BUDGET, assemble_full_matrix,
                       check_rank_conditions, dof_table)
from .linksim import run_link
from .rings import rank as matrix_rank

EXIT_PASS = 0
EXIT_CHECK_FAILED = 1
EXIT_INVALID = 2
EXIT_RESOURCE = 3

MEMORY_BUDGET_ENV = "SIACOOP_MEMORY_BUDGET"

COMMANDS = ("params", "verify-sia", "verify-alignment", "verify-rank",
            "dof-table", "simulate")


@dataclass
class RunConfig:
    command: str
    K: int
    M: int
    n: int = 1
    n_max: int | None = None
    ring: str = "primefield"
    prime: int | None = None
    seed: int = 0
    trials: int = 1
    rank_policy: str = "exact"
    tau: float = 1e-10
    memory_budget: int = DEFAULT_MEMORY_BUDGET
    enumeration_bound: int = DEFAULT_ENUMERATION_BOUND
    materialization_bound: int = DEFAULT_MATERIALIZATION_BOUND
    snr_db: tuple = (40.0, 45.0, 50.0, 55.0, 60.0)
    noise_realizations: int = 20
    workers: int = 1
    output: str | None = None
    format: str = "json"
    timings: bool = False
    identity_channels: bool = False
    ablate_slot: int | None = None
    full_matrix: bool = False

    def scalar_ring(self):
        return ScalarRing.from_name(self.ring, self.prime)

    def echo(self):
        """Serializable config image embedded in every report.  The
        worker count is execution detail, not experiment identity, and
        is deliberately left out so reports stay byte-identical."""
        d = {
            "command": self.command,
            "K": self.K, "M": self.M, "n": self.n,
            "ring": self.ring,
            "seed": self.seed, "trials": self.trials,
            "rank_policy": self.rank_policy,
            "tau": _fmt(self.tau),
            "memory_budget": self.memory_budget,
            "enumeration_bound": self.enumeration_bound,
            "materialization_bound": self.materialization_bound,
        }
        if self.prime is not None:
            d["prime"] = str(self.prime)
        if self.command == "dof-table":
            d["n_max"] = self.n_max
        if self.command == "simulate":
            d["snr_db"] = [_fmt(s) for s in self.snr_db]
            d["noise_realizations"] = self.noise_realizations
        if self.identity_channels:
            d["identity_channels"] = True
        if self.ablate_slot is not None:
            d["ablate_slot"] = self.ablate_slot
        if self.full_matrix:
            d["full_matrix"] = True
        return d


def _fmt(x):
    """17-significant-digit decimal string for floats; exact strings
    for ints and rationals."""
    if isinstance(x, Fraction):
        return f"{x.numerator}/{x.denominator}"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="siacoop",
        description="Exact and float verification of the K = M + 2 "
                    "receiver-cooperation alignment scheme.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_n=True):
        p.add_argument("--K", type=int, required=True)
        p.add_argument("--M", type=int, required=True)
        if needs_n:
            p.add_argument("--n", type=int, default=1)
        p.add_argument("--ring", choices=("primefield", "real", "complex"),
                       default="primefield")
        p.add_argument("--prime", type=int, default=None,
                       help="prime modulus for --ring primefield")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--trials", type=int, default=1)
        p.add_argument("--rank-policy", choices=("exact", "float"),
                       default=None)
        p.add_argument("--tau", type=float, default=1e-10,
                       help="float rank pivot threshold, relative")
        p.add_argument("--memory-budget", type=int, default=None,
                       help=f"bytes; env {MEMORY_BUDGET_ENV} overrides "
                            "the default")
        p.add_argument("--enumeration-bound", type=int,
                       default=DEFAULT_ENUMERATION_BOUND)
        p.add_argument("--materialization-bound", type=int,
                       default=DEFAULT_MATERIALIZATION_BOUND)
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--output", "-o", default=None)
        p.add_argument("--timings", action="store_true")

    p = sub.add_parser("params", help="extension arithmetic only")
    common(p)

    p = sub.add_parser("verify-sia", help="elimination structure and "
                                          "Cramer oracle")
    common(p)

    p = sub.add_parser("verify-alignment", help="containment conditions "
                                                "as column identities")
    common(p)
    p.add_argument("--ablate-slot", type=int, default=None,
                   help="diagnostic: pin one exponent slot to zero")

    p = sub.add_parser("verify-rank", help="decodability rank conditions")
    common(p)
    p.add_argument("--identity-channels", action="store_true",
                   help="diagnostic: fully degenerate all-ones channels")
    p.add_argument("--full-matrix", action="store_true",
                   help="also rank-check the stacked block matrix")

    p = sub.add_parser("dof-table", help="exact rational DoF accounting")
    common(p, needs_n=False)
    p.add_argument("--n-max", type=int, default=10)
    p.add_argument("--format", choices=("json", "csv"), default="json")

    p = sub.add_parser("simulate", help="finite-SNR link simulation")
    common(p)
    p.add_argument("--snr-db", default="40,45,50,55,60",
                   help="comma-separated SNR points in dB")
    p.add_argument("--noise-realizations", type=int, default=20)

    return parser


def parse_config(argv):
    """Parse and validate; raises SystemExit(2) on invalid parameters."""
    parser = _build_parser()
    ns = parser.parse_args(argv)
    budget = ns.memory_budget
    if budget is None:
        budget = int(os.environ.get(MEMORY_BUDGET_ENV,
                                    DEFAULT_MEMORY_BUDGET))
    policy = ns.rank_policy
    if policy is None:
        policy = "exact" if ns.ring == "primefield" else "float"
    cfg = RunConfig(
        command=ns.command, K=ns.K, M=ns.M,
        n=getattr(ns, "n", 1),
        n_max=getattr(ns, "n_max", None),
        ring=ns.ring, prime=ns.prime, seed=ns.seed, trials=ns.trials,
        rank_policy=policy, tau=ns.tau, memory_budget=budget,
        enumeration_bound=ns.enumeration_bound,
        materialization_bound=ns.materialization_bound,
        workers=ns.workers, output=ns.output,
        format=getattr(ns, "format", "json"),
        timings=ns.timings,
        identity_channels=getattr(ns, "identity_channels", False),
        ablate_slot=getattr(ns, "ablate_slot", None),
        full_matrix=getattr(ns, "full_matrix", False),
    )
    if cfg.command == "simulate":
        cfg.snr_db = tuple(float(s) for s in ns.snr_db.split(","))
        cfg.noise_realizations = ns.noise_realizations
    try:
        build_params(cfg.K, cfg.M, 1)
        cfg.scalar_ring()
        if cfg.rank_policy == "exact" and cfg.ring != "primefield":
            raise ValueError("exact rank policy requires --ring primefield")
        if cfg.rank_policy == "float" and cfg.ring == "primefield":
            raise ValueError("float rank policy requires a float ring")
        if cfg.command == "simulate" and cfg.ring == "primefield":
            raise ValueError("simulate requires --ring real or complex")
        if cfg.trials < 1:
            raise ValueError("--trials must be positive")
    except ValueError as exc:
        parser.exit(EXIT_INVALID, f"siacoop: error: {exc}\n")
    return cfg


# -- command bodies ----------------------------------------------------------


def _pipeline(cfg, seed):
    """channels -> SIA -> generators -> bases, shared by several commands."""
    params = build_params(cfg.K, cfg.M, cfg.n, cfg.materialization_bound)
    ring = cfg.scalar_ring()
    if cfg.identity_channels:
        channels = identity_channels(params, ring)
    else:
        channels = sample_channels(params, ring, seed)
    processed = {k: sia_run(stack_decoder(channels, k))
                 for k in range(1, params.K + 1)}
    generators = extract_generators(processed)
    bases = build_all_bases(generators, params,
                            bound=cfg.enumeration_bound,
                            omit_slot=cfg.ablate_slot)
    return params, channels, processed, generators, bases


def _cmd_params(cfg):
    params = build_params(cfg.K, cfg.M, cfg.n, cfg.materialization_bound)
    checks = [{
        "name": f"params K={cfg.K} M={cfg.M} n={cfg.n}",
        "status": "pass",
        "details": {
            "l": str(params.l), "mu_n": str(params.mu_n),
            "mu_n1": str(params.mu_n1), "lambda_n": str(params.lambda_n),
            "P": str(params.P),
            "dof_total": _fmt(params.dof_total),
            "dof_limit": _fmt(params.dof_limit),
            "materializable": params.materializable,
        },
    }]
    return checks


def _cmd_verify_sia(cfg):
    checks = []
    params = build_params(cfg.K, cfg.M, cfg.n, cfg.materialization_bound)
    ring = cfg.scalar_ring()
    for t in range(cfg.trials):
        seed = cfg.seed + t
        channels = sample_channels(params, ring, seed)
        for k in range(1, params.K + 1):
            state = stack_decoder(channels, k)
            processed = sia_run(state)  # raises on structural violation
            ok = cramer_check(state, processed)
            checks.append({
                "name": f"sia decoder={k} seed={seed}",
                "status": "pass" if ok else "fail",
                "details": {"step_count": processed.step_count,
                            "cramer_consistent": ok},
            })
    return checks


def _cmd_verify_alignment(cfg):
    checks = []
    for t in range(cfg.trials):
        seed = cfg.seed + t
        _, _, _, generators, bases = _pipeline(cfg, seed)
        params = build_params(cfg.K, cfg.M, cfg.n,
                              cfg.materialization_bound)
        report = check_alignment(bases, generators, params)
        for c in report.conditions:
            detail = {"slot": f"{c.slot.kind}[k={c.slot.k},{c.slot.idx}]",
                      "stream": c.j}
            if not c.passed:
                detail["failure_mode"] = c.failure_mode
                detail["first_counterexample"] = list(c.counterexample)
            checks.append({
                "name": f"alignment seed={seed} j={c.j} "
                        f"slot={c.slot_index}",
                "status": "pass" if c.passed else "fail",
                "details": detail,
            })
    return checks


def _cmd_verify_rank(cfg):
    checks = []
    for t in range(cfg.trials):
        seed = cfg.seed + t
        params, _, _, generators, bases = _pipeline(cfg, seed)
        for k in range(1, params.K + 1):
            report = check_rank_conditions(
                k, bases, generators, params, policy=cfg.rank_policy,
                tol=cfg.tau, memory_budget=cfg.memory_budget)
            for res in report.results:
                checks.append({
                    "name": f"rank seed={seed} decoder={k} subspace={res.j}",
                    "status": "pass" if res.passed else "fail",
                    "details": {"rank": res.rank, "required": res.required,
                                "policy": res.policy},
                })
            if cfg.full_matrix:
                full = assemble_full_matrix(k, bases, generators, params,
                                            cfg.memory_budget)
                r = matrix_rank(full, policy=cfg.rank_policy, tol=cfg.tau)
                need = params.M * params.lambda_n
                checks.append({
                    "name": f"rank-full seed={seed} decoder={k}",
                    "status": "pass" if r == need else "fail",
                    "details": {"rank": r, "required": need,
                                "policy": cfg.rank_policy},
                })
    return checks


def _cmd_dof_table(cfg):
    n_max = cfg.n_max or 10
    report = dof_table(cfg.K, cfg.M, range(1, n_max + 1))
    checks = []
    prev = None
    for row in report.rows:
        ok = row.dof_total < row.dof_limit and (
            prev is None or row.dof_total > prev)
        prev = row.dof_total
        checks.append({
            "name": f"dof n={row.n}",
            "status": "pass" if ok else "fail",
            "details": {
                "n": row.n, "mu_n": str(row.mu_n),
                "mu_n1": str(row.mu_n1), "lambda_n": str(row.lambda_n),
                "dof_total": _fmt(row.dof_total),
                "dof_total_decimal": _fmt(float(row.dof_total)),
                "dof_limit": _fmt(row.dof_limit),
            },
        })
    return checks


def _dof_csv(cfg):
    n_max = cfg.n_max or 10
    report = dof_table(cfg.K, cfg.M, range(1, n_max + 1))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["n", "mu_n", "mu_n1", "lambda_n", "dof_total",
                     "dof_limit"])
    for row in report.rows:
        writer.writerow([row.n, row.mu_n, row.mu_n1, row.lambda_n,
                         _fmt(row.dof_total), _fmt(row.dof_limit)])
    return buf.getvalue()


def _cmd_simulate(cfg):
    checks = []
    params, channels, _, generators, bases = _pipeline(cfg, cfg.seed)
    report = run_link(params, channels, bases, generators,
                      list(cfg.snr_db), cfg.seed,
                      noise_realizations=cfg.noise_realizations)
    for p in report.snr_points:
        checks.append({
            "name": f"rate snr_db={_fmt(p.snr_db)}",
            "status": "pass" if not p.flagged else "fail",
            "details": {
                "sum_rate": _fmt(p.sum_rate),
                "per_user": {str(k): _fmt(v)
                             for k, v in sorted(p.per_user.items())},
                "realizations": p.realizations,
            },
        })
    slope_ok = (abs(report.slope - report.target_slope)
                <= 0.1 * report.target_slope)
    checks.append({
        "name": "dof-slope",
        "status": "pass" if slope_ok else "fail",
        "details": {"slope": _fmt(report.slope),
                    "residual": _fmt(report.slope_residual),
                    "target": _fmt(report.target_slope)},
    })
    leak_ok = report.leakage <= 1e-10
    checks.append({
        "name": "interference-nulling",
        "status": "pass" if leak_ok else "fail",
        "details": {"post_projection_energy_ratio": _fmt(report.leakage)},
    })
    return checks


_BODIES = {
    "params": _cmd_params,
    "verify-sia": _cmd_verify_sia,
    "verify-alignment": _cmd_verify_alignment,
    "verify-rank": _cmd_verify_rank,
    "dof-table": _cmd_dof_table,
    "simulate": _cmd_simulate,
}


def execute(cfg):
    """Run one parsed config; returns the process exit code."""
    t0 = time.perf_counter()
    try:
        if cfg.command == "dof-table" and cfg.format == "csv":
            text = _dof_csv(cfg)
            _write_output(cfg, text)
            return EXIT_PASS
        checks = _BODIES[cfg.command](cfg)
    except ResourceBoundError as exc:
        _write_output(cfg, _render_report(cfg, [{
            "name": "resource-bound", "status": "fail",
            "details": {"error": str(exc)}}], None))
        return EXIT_RESOURCE
    except (ValueError, DegenerateChannelError) as exc:
        sys.stderr.write(f"siacoop: error: {exc}\n")
        return EXIT_INVALID
    elapsed = time.perf_counter() - t0 if cfg.timings else None
    _write_output(cfg, _render_report(cfg, checks, elapsed))
    return (EXIT_PASS if all(c["status"] == "pass" for c in checks)
            else EXIT_CHECK_FAILED)


def _render_report(cfg, checks, elapsed):
    report = {
        "config": cfg.echo(),
        "version": __version__,
        "checks": checks,
    }
    if elapsed is not None:
        report["timings"] = {"total_seconds": _fmt(elapsed)}
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def _write_output(cfg, text):
    if cfg.output:
        with open(cfg.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None):
    cfg = parse_config(sys.argv[1:] if argv is None else argv)
    return execute(cfg)


if __name__ == "__main__":
    sys.exit(main())
