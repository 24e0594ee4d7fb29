"""Command line entry point.

Exit codes: 0 success, 1 fidelity below threshold, 2 usage error,
3 numerical guard (truncation or register size) tripped.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import cavity, teleport
from .qstate import EngineError, ForcedOutcomes, SeededSampler, SizeGuardError
from .transcript import fmt_float

SEED_ENV = "GHZNET_SEED"
TELEPORT_THRESHOLD = 1 - 1e-9

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_GUARD = 0, 1, 2, 3

_TOKENS = {"+": 0, "-": 1, "zero": 0, "nonzero": 1}


class UsageError(Exception):
    pass


def parse_outcome_tokens(text: str) -> list[int]:
    """One outcome per line: an integer index, '+'/'-' or 'zero'/'nonzero'."""
    out = []
    for raw in text.splitlines():
        tok = raw.split("#", 1)[0].strip()
        if not tok:
            continue
        if tok in _TOKENS:
            out.append(_TOKENS[tok])
        else:
            try:
                out.append(int(tok))
            except ValueError:
                raise UsageError(f"bad outcome token {tok!r}") from None
    return out


def _clean(obj):
    if isinstance(obj, float):
        return fmt_float(obj)
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def render(report: dict, fmt: str, rows_key: str | None = None) -> str:
    if fmt == "json":
        return json.dumps(_clean(report), indent=2) + "\n"
    rows = report[rows_key] if rows_key else [report]
    buf = io.StringIO()
    if rows:
        fields = list(rows[0].keys())
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(fields)
        for row in _clean(rows):
            w.writerow(["" if row[f] is None else row[f] for f in fields])
    return buf.getvalue()


def _default_seed() -> int:
    value = os.environ.get(SEED_ENV)
    if value is None:
        return 0
    try:
        return int(value)
    except ValueError:
        raise UsageError(f"{SEED_ENV}={value!r} is not an integer") from None


def _teleport_row(idx: int, scheme: str, cfg, info, source) -> dict:
    res = teleport.run_teleport(scheme, cfg, info, source)
    hadamard = [e.detail["outcome"] for e in res.transcript.of_kind("measurement") if e.detail["name"] == "hadamard"]
    return {
        "trial": idx,
        "p": res.outcome.p,
        "hadamard": "".join(map(str, hadamard)),
        "parity": None if res.parity is None else "".join(str(r % 2) for r in res.parity.r),
        "correction": str(res.correction),
        "bits": "".join(map(str, res.correction.bits())),
        "fidelity": res.fidelity,
    }


def cmd_teleport(args) -> int:
    scheme = args.scheme.upper()
    try:
        cfg = teleport.NetworkConfig(args.n, args.i, args.m)
    except (teleport.ConfigError, SizeGuardError) as exc:
        raise UsageError(str(exc)) from None
    if args.trials < 1:
        raise UsageError("--trials must be positive")
    seed = args.seed

    def info_for(idx: int):
        return teleport.InfoState.random(cfg.m, np.random.default_rng([seed, idx]))

    if args.force_outcomes == "all":
        n_bits = cfg.m * len(cfg.others) if scheme == "B" else 0
        branches = [list(h) + [p] for h in itertools.product((0, 1), repeat=n_bits) for p in range(4**cfg.m)]
        rows = [_teleport_row(k, scheme, cfg, info_for(k), ForcedOutcomes(b)) for k, b in enumerate(branches)]
    elif args.force_outcomes:
        try:
            with open(args.force_outcomes) as fh:
                tokens = parse_outcome_tokens(fh.read())
        except OSError as exc:
            raise UsageError(f"cannot read outcomes file: {exc}") from None
        source = ForcedOutcomes(tokens)
        rows = [_teleport_row(k, scheme, cfg, info_for(k), source) for k in range(args.trials)]
    else:
        def one(k):
            return _teleport_row(k, scheme, cfg, info_for(k), SeededSampler([seed, k, 1]))
        with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
            rows = list(pool.map(one, range(args.trials)))

    fids = [r["fidelity"] for r in rows]
    passed = min(fids) >= TELEPORT_THRESHOLD
    report = {
        "command": "teleport",
        "scheme": scheme,
        "n": cfg.n,
        "i": cfg.i,
        "m": cfg.m,
        "seed": seed,
        "forced": args.force_outcomes,
        "rows": rows,
        "summary": {"count": len(rows), "min_fidelity": min(fids), "mean_fidelity": float(np.mean(fids)),
                    "pass": passed},
    }
    args.out.write(render(report, args.format, "rows"))
    return EXIT_OK if passed else EXIT_FAIL


def _ghz_label(N: int, mask, sign: int) -> str:
    b = "".join(map(str, mask)) if mask else "0" * N
    nb = "".join("1" if c == "0" else "0" for c in b)
    return f"(|{b}>{'+' if sign > 0 else '-'}|{nb}>)/sqrt2"


def cmd_ghz(args) -> int:
    if args.N < 2:
        raise UsageError("--N must be at least 2")
    if args.alpha < 0 or args.cutoff < 1:
        raise UsageError("--alpha must be >= 0 and --cutoff positive")
    params = cavity.CavityParams(alpha=args.alpha, cutoff=args.cutoff)
    p_error = math.exp(-4 * args.alpha**2)
    warning = None
    if args.alpha == 0:
        warning = "alpha=0: zero and nonzero photon counts cannot be discriminated (p_error = 1)"
        print(f"warning: {warning}", file=sys.stderr)
    source = SeededSampler(args.seed)
    gen = cavity.generate_ghz_single_cavity if args.method == "single" else cavity.generate_ghz_multi_cavity
    res = gen(args.N, params, source)
    tol = min(0.1, max(1e-6, 10 * p_error))
    report = {
        "command": "ghz",
        "method": args.method,
        "N": args.N,
        "alpha": args.alpha,
        "cutoff": args.cutoff,
        "seed": args.seed,
        "branch": res.branch,
        "zero_count": res.zero_count,
        "parity": res.parity,
        "atom_outcomes": "".join(map(str, res.atom_outcomes)) or None,
        "state_label": _ghz_label(args.N, res.flip_mask, res.branch_sign * (-1) ** args.N),
        "probability": res.probability,
        "predicted_fidelity": res.predicted_fidelity,
        "fidelity": res.fidelity,
        "p_error": p_error,
        "threshold": 1 - tol,
        "warning": warning,
    }
    args.out.write(render(report, args.format))
    return EXIT_OK if res.fidelity >= 1 - tol else EXIT_FAIL


def cmd_feasibility(args) -> int:
    try:
        timing = cavity.TimingParams(t=args.t, T=args.T, T_D=args.Td, budget=args.budget)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    rep = cavity.feasibility_max_atoms(timing)
    report = {
        "command": "feasibility",
        "T": timing.T,
        "t": timing.t,
        "Td": timing.T_D,
        "budget": timing.budget,
        "n_max": rep.n_max,
        "flight_time": rep.flight_time,
        "budget_too_small": rep.budget_too_small,
        "multi_cavity_interaction_time": cavity.multi_cavity_interaction_time(timing),
    }
    args.out.write(render(report, args.format))
    return EXIT_OK


def cmd_sweep(args) -> int:
    if any(a < 0 for a in args.alpha):
        raise UsageError("--alpha values must be non-negative")
    rows = cavity.pcm_error_sweep(args.alpha, args.N)
    report = {
        "command": "sweep",
        "N": args.N,
        "rows": [{"alpha": r.alpha, "p_error": r.p_error, "p_error_sim": r.p_error_sim,
                  "infidelity": r.infidelity, "cutoff": r.cutoff} for r in rows],
    }
    args.out.write(render(report, args.format, "rows"))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ghznet", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--format", choices=("json", "csv"), default="json")

    p = sub.add_parser("teleport", help="run teleportation sessions")
    p.add_argument("--scheme", choices=("a", "b", "A", "B"), required=True)
    p.add_argument("--n", type=int, required=True, help="number of receivers")
    p.add_argument("--i", type=int, required=True, help="target receiver (1-based)")
    p.add_argument("--m", type=int, default=1, help="payload qubits")
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--force-outcomes", default=None, metavar="FILE|all")
    p.add_argument("--jobs", type=int, default=1)
    common(p)
    p.set_defaults(func=cmd_teleport)

    p = sub.add_parser("ghz", help="generate a GHZ state with cavity QED")
    p.add_argument("--method", choices=("single", "multi"), default="single")
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--alpha", type=float, default=2.0)
    p.add_argument("--cutoff", type=int, default=56)
    p.add_argument("--seed", type=int, default=None)
    common(p)
    p.set_defaults(func=cmd_ghz)

    p = sub.add_parser("feasibility", help="maximum atom count for a flight-time budget")
    p.add_argument("--T", type=float, default=1e-3, help="cavity transit time (s)")
    p.add_argument("--t", type=float, default=1e-4, help="atom-field interaction time (s)")
    p.add_argument("--Td", type=float, default=1.0, help="cavity damping time (s)")
    p.add_argument("--budget", type=float, default=0.1, help="allowed total flight time (s)")
    common(p)
    p.set_defaults(func=cmd_feasibility)

    p = sub.add_parser("sweep", help="photon-counting misclassification versus alpha")
    p.add_argument("--alpha", type=float, nargs="+", default=[1.0, 1.5, 2.0])
    p.add_argument("--N", type=int, default=3)
    common(p)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None, out=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    args.out = out or sys.stdout
    try:
        if getattr(args, "seed", "n/a") is None:
            args.seed = _default_seed()
        return args.func(args)
    except UsageError as exc:
        print(f"ghznet: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (cavity.TruncationError, SizeGuardError) as exc:
        print(f"ghznet: numerical guard: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except EngineError as exc:
        print(f"ghznet: error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
