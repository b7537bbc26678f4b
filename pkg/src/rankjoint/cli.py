"""``rankjoint`` command-line interface.

Exit codes: 0 success, 1 usage error, 2 data/validation error, 3 numerical
error (e.g. a rank-deficient design).  Diagnostics go to stderr; results go
to ``--out`` or stdout as JSON.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .consistency import (
    RetestKind,
    load_conditions_csv,
    load_retest_csv,
    refit_excluding_violators,
    summarize_violations,
)
from .data import Mode, load_dataset_csv, load_schema, write_dataset_csv
from .efficiency import (
    attribute_importance,
    efficiency_table,
    empirical_se_comparison,
    precision_per_time,
    relative_precision_per_time,
)
from .estimator import AmceFit, estimate_amce, z_test_coefficients
from .exceptions import DataError, RankDeficiencyError, RankjointError, SchemaError
from .expansion import expand_dataset
from .simulation import DEFAULT_GAMMA_GRID, SimDesign, corruption_sensitivity, power_comparison, simulate_dataset

log = logging.getLogger("rankjoint")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


class _Run:
    """Collects the manifest for one subcommand invocation."""

    _SKIP = {"func", "canonical", "verbose"}
    _VOLATILE = {"threads"}

    def __init__(self, args):
        self.args = args
        self.start = time.perf_counter()
        self.inputs = {}

    def input(self, path):
        if path is not None:
            self.inputs[str(path)] = _sha256(path)
        return path

    def manifest(self) -> dict:
        canonical = getattr(self.args, "canonical", False)
        options = {k: v for k, v in sorted(vars(self.args).items())
                   if k not in self._SKIP and not (canonical and k in self._VOLATILE)}
        m = {
            "subcommand": self.args.command,
            "options": options,
            "inputs": dict(sorted(self.inputs.items())),
            "seed": getattr(self.args, "seed", None),
            "version": __version__,
        }
        if not canonical:
            m["duration_seconds"] = round(time.perf_counter() - self.start, 6)
            m["timestamp"] = _dt.datetime.now(_dt.timezone.utc).isoformat()
        return m

    def emit(self, payload: dict, out=None):
        payload = dict(payload)
        payload["manifest"] = self.manifest()
        text = json.dumps(_jsonable(payload), indent=2, sort_keys=True, allow_nan=False) + "\n"
        if out:
            Path(out).write_text(text, encoding="utf-8")
            log.info("wrote %s", out)
        else:
            sys.stdout.write(text)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return _jsonable(obj.item())
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    return obj


def _require_seed(args):
    if args.seed is None:
        raise UsageError(f"{args.command}: --seed is required for stochastic subcommands")


def _load_fit(path) -> AmceFit:
    with open(path, encoding="utf-8") as fh:
        try:
            return AmceFit.from_dict(json.load(fh))
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise DataError(f"{path}: not a fit JSON ({exc})") from None


def _load_config(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: invalid JSON ({exc})") from None


def _design_from_config(run, path, seed) -> SimDesign:
    doc = _load_config(run.input(path)) if path else {}
    doc["seed"] = seed
    try:
        return SimDesign.from_dict(doc)
    except (ValueError, TypeError) as exc:
        raise DataError(f"{path}: {exc}") from None


# -- subcommands ---------------------------------------------------------------

def cmd_expand(args, run):
    schema = load_schema(run.input(args.schema))
    d = load_dataset_csv(run.input(args.input), schema, Mode.RANKED, invert_ranks=args.invert_ranks)
    pairs = expand_dataset(d)
    out = open(args.out, "w", newline="", encoding="utf-8") if args.out else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["subject", "task", "focal_position", "opponent_position"] + schema.names + ["y"])
        tables = [a.levels for a in schema.attributes]
        for i in range(len(pairs)):
            w.writerow([pairs.subject[i], pairs.task[i], int(pairs.focal_position[i]),
                        int(pairs.opponent_position[i])]
                       + [tables[j][c] for j, c in enumerate(pairs.levels[i])] + [int(pairs.y[i])])
    finally:
        if args.out:
            out.close()
    log.info("expanded %d profiles into %d pairwise rows", len(d), len(pairs))


def cmd_fit(args, run):
    schema = load_schema(run.input(args.schema))
    d = load_dataset_csv(run.input(args.input), schema, args.mode, invert_ranks=args.invert_ranks)
    fit = estimate_amce(d, schema, vcov=args.vcov, cluster=args.cluster, alpha=args.alpha,
                        outcome=args.outcome, use_t=args.t)
    run.emit(fit.to_dict(), args.out)


def cmd_efficiency(args, run):
    payload = {}
    if args.k:
        payload["theoretical"] = [r.to_dict() for r in efficiency_table(args.k)]
    if args.fit_a or args.fit_b:
        if not (args.fit_a and args.fit_b):
            raise UsageError("efficiency: --fit-a and --fit-b go together")
        a, b = _load_fit(run.input(args.fit_a)), _load_fit(run.input(args.fit_b))
        payload["empirical"] = _compare_fits(a, b, args.time_a, args.time_b, args.aggregate)
    if not payload:
        raise UsageError("efficiency: give --k and/or --fit-a/--fit-b")
    run.emit(payload, args.out)


def _compare_fits(a: AmceFit, b: AmceFit, time_a, time_b, aggregate="mean") -> dict:
    out = {
        "se_comparison": empirical_se_comparison(a, b).to_dict(),
        "z_tests": [r._asdict() for r in z_test_coefficients(a, b)],
        "attribute_importance": {"a": attribute_importance(a), "b": attribute_importance(b)},
    }
    if (time_a is None) != (time_b is None):
        raise UsageError("completion times must be given for both fits")
    if time_a is not None:
        out["precision_per_time"] = {
            "aggregate": aggregate,
            "a": precision_per_time(a, time_a, aggregate),
            "b": precision_per_time(b, time_b, aggregate),
            "relative": relative_precision_per_time(a, time_a, b, time_b, aggregate),
        }
    return out


def cmd_test_consistency(args, run):
    records = load_retest_csv(run.input(args.retest))
    conditions = load_conditions_csv(run.input(args.conditions))
    opts = dict(continuity_correction=args.continuity_correction, adjust=args.adjust)
    payload = {}
    for kind in RetestKind:
        subset = [r for r in records if r.kind is kind]
        if subset:
            payload[kind.value] = summarize_violations(subset, conditions, **opts).to_dict()
    if args.main:
        if not args.schema:
            raise UsageError("test-consistency: --main needs --schema")
        schema = load_schema(run.input(args.schema))
        d = load_dataset_csv(run.input(args.main), schema, args.mode)
        payload["refit"] = refit_excluding_violators(d, records, schema, vcov=args.vcov).to_dict()
    run.emit(payload, args.out)


def cmd_simulate_power(args, run):
    _require_seed(args)
    design = _design_from_config(run, args.config, args.seed)
    grid = args.gamma_grid or DEFAULT_GAMMA_GRID
    res = power_comparison(grid, design, reps=args.reps, alpha=args.alpha, n_attributes=args.n_attributes,
                           oracle_pairs=args.oracle_pairs, threads=args.threads)
    run.emit(res.to_dict(), args.out)


def cmd_simulate_data(args, run):
    _require_seed(args)
    design = _design_from_config(run, args.config, args.seed)
    d = simulate_dataset(design, args.mode)
    write_dataset_csv(d, args.out or sys.stdout)
    if args.schema_out:
        Path(args.schema_out).write_text(json.dumps(design.schema.to_dict(), indent=2) + "\n", encoding="utf-8")


def cmd_sensitivity(args, run):
    _require_seed(args)
    schema = load_schema(run.input(args.schema))
    d = load_dataset_csv(run.input(args.input), schema, Mode.RANKED, invert_ranks=args.invert_ranks)
    grid = args.p if args.p else [round(0.05 * i, 2) for i in range(11)]
    res = corruption_sensitivity(d, grid, iters=args.iters, seed=args.seed, method=args.method,
                                 threads=args.threads)
    run.emit(res, args.out)


def cmd_report(args, run):
    fits = {Path(p).stem: _load_fit(run.input(p)) for p in args.fits or []}
    if args.times and len(args.times) != len(fits):
        raise UsageError("report: give one --times value per fit")
    payload = {"fits": {name: f.to_dict(include_vcov=False)["coefficients"] for name, f in fits.items()}}
    names = list(fits)
    if len(names) >= 2:
        base = fits[names[0]]
        comps = {}
        for i, name in enumerate(names[1:], start=1):
            try:
                comps[name] = _compare_fits(base, fits[name],
                                            args.times[0] if args.times else None,
                                            args.times[i] if args.times else None)
            except ValueError as exc:
                raise DataError(f"report: {names[0]} and {name} are incompatible ({exc})") from None
        payload["baseline"] = names[0]
        payload["comparisons"] = comps
    for path in args.consistency or []:
        payload.setdefault("consistency", {})[Path(path).stem] = _strip_manifest(_load_config(run.input(path)))
    if args.k:
        payload["theoretical_efficiency"] = [r.to_dict() for r in efficiency_table(args.k)]
    if not (fits or args.consistency or args.k):
        raise UsageError("report: nothing to report")
    if args.text:
        sys.stdout.write(_text_report(fits, payload))
    run.emit(payload, args.out)


def _strip_manifest(doc):
    return {k: v for k, v in doc.items() if k != "manifest"}


def _text_report(fits, payload) -> str:
    lines = []
    for name, fit in fits.items():
        lines.append(f"== {name} ({fit.vcov_type.value}, n_obs={fit.n_obs}, clusters={fit.n_clusters})")
        lines.append(f"{'attribute':<24}{'level':<24}{'estimate':>10}{'se':>10}")
        for (attr, level), b, s in zip(fit.labels, fit.beta, fit.se):
            lines.append(f"{attr:<24}{level:<24}{b:>10.4f}{s:>10.4f}")
        lines.append("")
    for name, comp in payload.get("comparisons", {}).items():
        se = comp["se_comparison"]
        lines.append(f"{name} vs {payload['baseline']}: mean SE ratio {se['mean_se_ratio']:.3f}, "
                     f"reduction {100 * se['se_reduction']:.1f}%")
    return "\n".join(lines) + "\n"


# -- parser ----------------------------------------------------------------------

def _common(p, *, stochastic=False):
    p.add_argument("--version", action="version", version=f"rankjoint {__version__}")
    p.add_argument("--canonical", action="store_true",
                   help="omit timestamps, durations and thread counts from the manifest")
    p.add_argument("-v", "--verbose", action="store_true")
    if stochastic:
        p.add_argument("--seed", type=int, help="random seed (required)")
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads (default: $RANKJOINT_THREADS or CPU count)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rankjoint", description="Ranked-choice conjoint analysis.")
    parser.add_argument("--version", action="version", version=f"rankjoint {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("expand", help="expand rankings into pairwise rows")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--out")
    p.add_argument("--invert-ranks", action="store_true", help="input uses 1 = least preferred")
    _common(p)
    p.set_defaults(func=cmd_expand)

    p = sub.add_parser("fit", help="estimate AMCEs")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--mode", choices=["ranked", "forced-choice", "forced_choice"], default="ranked")
    p.add_argument("--vcov", type=str.upper, choices=["CR0", "CR1", "CR2"], default="CR2")
    p.add_argument("--cluster", choices=["subject", "task", "observation"], default="subject")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--outcome", choices=["pair", "normalized-rank"], default="pair")
    p.add_argument("--t", action="store_true", help="t(G-1) critical values instead of normal")
    p.add_argument("--invert-ranks", action="store_true")
    p.add_argument("--out")
    _common(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("efficiency", help="theoretical and empirical efficiency")
    p.add_argument("--k", type=int, nargs="+")
    p.add_argument("--fit-a")
    p.add_argument("--fit-b")
    p.add_argument("--time-a", type=float)
    p.add_argument("--time-b", type=float)
    p.add_argument("--aggregate", choices=["mean", "median", "mean_se"], default="mean")
    p.add_argument("--out")
    _common(p)
    p.set_defaults(func=cmd_efficiency)

    p = sub.add_parser("test-consistency", help="transitivity and IIA violation tests")
    p.add_argument("--main")
    p.add_argument("--retest", required=True)
    p.add_argument("--schema")
    p.add_argument("--conditions", required=True)
    p.add_argument("--mode", choices=["ranked", "forced-choice", "forced_choice"], default="ranked")
    p.add_argument("--vcov", type=str.upper, choices=["CR0", "CR1", "CR2"], default="CR2")
    p.add_argument("--continuity-correction", action="store_true")
    p.add_argument("--adjust", choices=["none", "bonferroni", "holm"], default="none")
    p.add_argument("--out")
    _common(p)
    p.set_defaults(func=cmd_test_consistency)

    p = sub.add_parser("simulate-power", help="ranked vs forced-choice power simulation")
    p.add_argument("--config")
    p.add_argument("--reps", type=int, default=1000)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--gamma-grid", type=float, nargs="+")
    p.add_argument("--n-attributes", type=int, default=6)
    p.add_argument("--oracle-pairs", type=int, default=1_000_000)
    p.add_argument("--out")
    _common(p, stochastic=True)
    p.set_defaults(func=cmd_simulate_power)

    p = sub.add_parser("simulate-data", help="write a synthetic dataset CSV")
    p.add_argument("--config")
    p.add_argument("--mode", choices=["ranked", "forced-choice", "forced_choice"], default="ranked")
    p.add_argument("--out")
    p.add_argument("--schema-out", help="also write the design's schema JSON")
    _common(p, stochastic=True)
    p.set_defaults(func=cmd_simulate_data)

    p = sub.add_parser("sensitivity", help="AMCE sensitivity to corrupted pairwise comparisons")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--p", type=float, nargs="+")
    p.add_argument("--iters", type=int, default=200)
    p.add_argument("--method", choices=["fixed", "bernoulli"], default="fixed")
    p.add_argument("--invert-ranks", action="store_true")
    p.add_argument("--out")
    _common(p, stochastic=True)
    p.set_defaults(func=cmd_sensitivity)

    p = sub.add_parser("report", help="merge fit and consistency artifacts")
    p.add_argument("--fits", nargs="+")
    p.add_argument("--times", type=float, nargs="+", help="mean completion seconds, one per fit")
    p.add_argument("--consistency", nargs="+")
    p.add_argument("--k", type=int, nargs="+", help="include the theoretical efficiency table")
    p.add_argument("--text", action="store_true", help="also print a plain-text table to stdout")
    p.add_argument("--out")
    _common(p)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="rankjoint: %(message)s", stream=sys.stderr)
    run = _Run(args)
    try:
        args.func(args, run)
    except UsageError as exc:
        print(f"rankjoint: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except RankDeficiencyError as exc:
        print(f"rankjoint: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except np.linalg.LinAlgError as exc:
        print(f"rankjoint: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, SchemaError, RankjointError, FileNotFoundError, ValueError) as exc:
        print(f"rankjoint: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


def entrypoint():
    sys.exit(main())
