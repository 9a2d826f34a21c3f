"""``negdep`` command line.

Every subcommand prints one JSON report on stdout::

    {"command": [...], "seed": s, "version": v, "wall_time": t,
     "result": {...}, "warnings": [...]}

and a one-line summary on stderr. ``result`` is the library return value
serialized as-is and is reproducible for a fixed seed; ``wall_time`` is not.

Exit codes: 0 holds / success, 1 fails, 2 usage or input error,
3 inconclusive. Coordinates on the command line are 1-based.
Inputs are file paths, ``-`` for stdin, or ``gallery:<name>``.
"""
from __future__ import annotations

import argparse
import json
import secrets
import sys
import time
from typing import Sequence

import numpy as np

from negdep import __version__, gallery
from negdep.coupling import scp_check
from negdep.diagnostics import decorrelation_bound, max_event_covariance, row_sum_profile
from negdep.errors import NegDepError
from negdep.gaussian import (
    canonical_correlation,
    orthant_probability,
    tail_projection_profile,
    threshold_covariance,
    threshold_law,
    validate_spec,
)
from negdep.kernels import MAX_EVENT_PAIR_BITS
from negdep.model import (
    FAILS,
    HOLDS,
    INCONCLUSIVE,
    BernoulliLaw,
    GaussianSpec,
    Verdict,
    covariance_matrix,
    law_from_json,
    to_jsonable,
)
from negdep.na import NA_TOLERANCE, check_na_exact
from negdep.stable import Budget, check_strongly_rayleigh

EXIT_OK, EXIT_FAILS, EXIT_USAGE, EXIT_INCONCLUSIVE = 0, 1, 2, 3
_EXIT_FOR = {HOLDS: EXIT_OK, FAILS: EXIT_FAILS, INCONCLUSIVE: EXIT_INCONCLUSIVE}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# -- input resolution -----------------------------------------------------------

class Source:
    """A decoded input: raw JSON plus, for gallery inputs, the entry."""

    def __init__(self, name: str, obj, entry=None, family=None):
        self.name = name
        self.obj = obj
        self.entry = entry
        self.family = family


def _read(source: str) -> Source:
    if source.startswith("gallery:"):
        name = source.split(":", 1)[1]
        fam = gallery.family(name)
        entry = gallery.get(name)
        return Source(source, entry.to_json(), entry, fam)
    try:
        text = sys.stdin.read() if source == "-" else open(source, encoding="utf-8").read()
    except OSError as exc:
        raise UsageError(f"cannot read {source}: {exc.strerror}") from None
    try:
        return Source(source, json.loads(text))
    except json.JSONDecodeError as exc:
        raise UsageError(f"malformed JSON in {source}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def _law(src: Source) -> BernoulliLaw:
    if src.entry is not None and src.entry.kind == "bernoulli_law":
        return src.entry.payload
    if isinstance(src.obj, dict) and "pmf" in src.obj:
        return law_from_json(src.obj)
    raise UsageError(f"{src.name} is not a law (expected an object with 'pmf')")


def _spec(src: Source) -> GaussianSpec:
    if src.entry is not None and src.entry.kind == "gaussian_spec":
        return validate_spec(src.entry.payload)
    if isinstance(src.obj, dict) and "cov" in src.obj:
        return validate_spec(GaussianSpec.from_json(src.obj))
    raise UsageError(f"{src.name} is not a Gaussian spec (expected an object with 'cov')")


def _indices(text: str, what: str) -> list[int]:
    try:
        out = [int(t) - 1 for t in text.split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"{what} must be a comma-separated list of 1-based indices") from None
    if not out:
        raise UsageError(f"{what} is empty")
    return out


# -- subcommands ------------------------------------------------------------------
# each returns (result, status or None, warnings)

def _cmd_check_na(args, seed):
    src = _read(args.input)
    law = _law(src)
    tol = args.tolerance
    warnings = []
    if tol is None:
        tol = src.entry.na_tolerance if src.entry is not None else NA_TOLERANCE
        if tol != NA_TOLERANCE:
            warnings.append(f"Monte Carlo fixture: using its covariance tolerance {tol!r}")
    v = check_na_exact(law, tol)
    result = v.to_json()
    result["pairs_checked"] = v.budget_spent["pairs_checked"]
    result["tolerance"] = tol
    return result, v.status, warnings + list(v.notes)


def _cmd_check_sr(args, seed):
    law = _law(_read(args.input))
    budget = Budget.parse(args.budget)
    v = check_strongly_rayleigh(law, budget, seed)
    return v.to_json(), v.status, []


def _spec_warnings(spec):
    return ["near-singular covariance (eigenvalue floor applied)"] if spec.near_singular else []


def _cmd_threshold_law(args, seed):
    spec = _spec(_read(args.input))
    res = threshold_law(spec, precision=args.precision, seed=seed, method=args.method)
    return res.to_json(), None, _spec_warnings(spec)


def _cmd_orthant(args, seed):
    spec = _spec(_read(args.input))
    res = orthant_probability(spec, args.pattern, method=args.method, precision=args.precision, seed=seed)
    return res.to_json(), None, _spec_warnings(spec)


def _cmd_maxcorr(args, seed):
    spec = _spec(_read(args.input))
    res = canonical_correlation(spec, _indices(args.blockA, "--blockA"), _indices(args.blockB, "--blockB"))
    return res.to_json(), None, _spec_warnings(spec)


def _gram(src: Source) -> np.ndarray:
    obj = src.obj
    if src.entry is not None and src.entry.kind == "gaussian_spec":
        return src.entry.payload.cov
    if isinstance(obj, dict):
        for key in ("gram", "cov"):
            if key in obj:
                return np.asarray(obj[key], dtype=np.float64)
        raise UsageError(f"{src.name}: expected a 'gram' matrix")
    return np.asarray(obj, dtype=np.float64)


def _cmd_tailprofile(args, seed):
    src = _read(args.input)
    cuts = [int(c) for c in args.cuts.split(",") if c.strip()]
    res = tail_projection_profile(_gram(src), args.head, cuts)
    return res.to_json(), None, []


def _cmd_diagnose_cov(args, seed):
    i = args.index - 1
    name = args.input.split(":", 1)[1] if args.input.startswith("gallery:") else None
    fam = gallery.family(name) if name else None
    warnings = []
    if fam is not None:
        build, nested = fam
        if args.nmax is None:
            raise UsageError(f"--nmax is required for the family {name!r}")
        if nested:
            cov = threshold_covariance(build(args.nmax))
            prof = row_sum_profile(cov, i, args.nmax)
        else:
            prof = row_sum_profile(lambda n: threshold_covariance(build(n)), i, args.nmax, nested=False)
            warnings.append("family is not nested: each size uses its own matrix")
    else:
        src = _read(args.input)
        if src.entry is not None and src.entry.kind == "bernoulli_law" or "pmf" in (src.obj or {}):
            cov = covariance_matrix(_law(src))
        else:
            cov = threshold_covariance(_spec(src))
        nmax = cov.shape[0] if args.nmax is None else args.nmax
        prof = row_sum_profile(cov, i, nmax)
    return prof.to_json(), None, warnings


def _cmd_decorrelation(args, seed):
    law = _law(_read(args.input))
    A = _indices(args.A, "--A")
    N = args.N - 1
    bound = decorrelation_bound(law, A, N)
    result = {"A": [a + 1 for a in A], "N": args.N, "bound": bound}
    if N < law.n:
        tail = list(range(N, law.n))
        if (1 << len(A)) + (1 << len(tail)) <= MAX_EVENT_PAIR_BITS:
            result["event_max"] = max_event_covariance(law, A, tail)
    return result, None, []


def _cmd_scp(args, seed):
    law = _law(_read(args.input))
    v = scp_check(law, _indices(args.B, "--B"))
    return v.to_json(), v.status, list(v.notes)


def _cmd_gallery(args, seed):
    if args.action == "list":
        return {"fixtures": gallery.list_entries()}, None, []
    if not args.name:
        raise UsageError("gallery emit needs a fixture name")
    entry = gallery.get(args.name, args.n)
    return entry.to_json(), None, []


COMMANDS = {
    "check-na": _cmd_check_na,
    "check-sr": _cmd_check_sr,
    "threshold-law": _cmd_threshold_law,
    "orthant": _cmd_orthant,
    "maxcorr": _cmd_maxcorr,
    "tailprofile": _cmd_tailprofile,
    "diagnose-cov": _cmd_diagnose_cov,
    "decorrelation": _cmd_decorrelation,
    "scp": _cmd_scp,
    "gallery": _cmd_gallery,
}


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="negdep", description="Negative dependence checkers for small laws and Gaussian specs.")
    p.add_argument("--version", action="version", version=f"negdep {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, help_text, input_help=None):
        sp = sub.add_parser(name, help=help_text)
        if input_help:
            sp.add_argument("input", help=input_help)
        sp.add_argument("--seed", type=int, default=None, help="RNG seed (drawn and reported when omitted)")
        sp.add_argument("--out", default=None, help="also write the report to this file")
        return sp

    law_help = "law JSON path, '-' or gallery:<name>"
    spec_help = "Gaussian spec JSON path, '-' or gallery:<name>"

    sp = add("check-na", "exact negative association check", law_help)
    sp.add_argument("--tolerance", type=float, default=None)

    sp = add("check-sr", "strong Rayleigh check", law_help)
    sp.add_argument("--budget", default="default", help="starts per pair, or 'default'")

    for name, text in (("threshold-law", "law of the threshold indicators"), ("orthant", "one orthant probability")):
        sp = add(name, text, spec_help)
        sp.add_argument("--precision", type=float, default=1e-4 if name == "threshold-law" else 1e-3)
        sp.add_argument("--method", choices=("auto", "closed_form", "monte_carlo"), default="auto")
        if name == "orthant":
            sp.add_argument("--pattern", required=True, help="0/1 string, character k is coordinate k+1")

    sp = add("maxcorr", "canonical correlation between two blocks", spec_help)
    sp.add_argument("--blockA", required=True)
    sp.add_argument("--blockB", required=True)

    sp = add("tailprofile", "tail projection profile of a Gram matrix", "Gram JSON path ({'gram': [[..]]}), '-' or gallery:<spec>")
    sp.add_argument("--head", type=int, required=True)
    sp.add_argument("--cuts", required=True)

    sp = add("diagnose-cov", "partial absolute covariance sums and growth class", "law/spec JSON, or gallery:<name|family>")
    sp.add_argument("--index", type=int, default=1)
    sp.add_argument("--nmax", type=int, default=None)

    sp = add("decorrelation", "covariance decorrelation bound", law_help)
    sp.add_argument("--A", required=True)
    sp.add_argument("--N", type=int, required=True)

    sp = add("scp", "stochastic covering property", law_help)
    sp.add_argument("--B", required=True)

    sp = add("gallery", "list or emit fixtures")
    sp.add_argument("action", choices=("list", "emit"))
    sp.add_argument("name", nargs="?")
    sp.add_argument("--n", type=int, default=None)
    return p


def _report(argv, seed, result, warnings, wall) -> dict:
    return {
        "command": list(argv),
        "seed": seed,
        "version": __version__,
        "wall_time": wall,
        "result": to_jsonable(result),
        "warnings": list(warnings),
    }


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    t0 = time.perf_counter()
    seed = None
    try:
        args = build_parser().parse_args(argv)
        seed = args.seed if args.seed is not None else secrets.randbelow(2**32)
        if args.seed is None:
            print(f"negdep: no --seed given, using seed {seed}", file=sys.stderr)
        result, status, warnings = COMMANDS[args.command](args, seed)
    except (UsageError, NegDepError, ValueError) as exc:
        kind = type(exc).__name__
        print(json.dumps({"command": argv, "seed": seed, "version": __version__, "error": {"type": kind, "message": str(exc)}}))
        print(f"negdep: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    report = _report(argv, seed, result, warnings, time.perf_counter() - t0)
    text = json.dumps(report)
    print(text)
    if args.out:
        if args.command == "gallery" and args.action == "emit":
            text = json.dumps(report["result"])
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    code = _EXIT_FOR[status] if status is not None else EXIT_OK
    summary = status if status is not None else "ok"
    print(f"negdep {args.command}: {summary} (seed {seed}, {report['wall_time']:.3f}s)", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
