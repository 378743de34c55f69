"""Command-line interface: ``mutakill {fisher,analyze,audit,simulate}``.

Exit codes: 0 success (a monotonicity violation is a finding, not a failure),
1 usage error, 2 data-format error, 3 internal invariant failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .killdefs import (
    DEFINITIONS,
    KillParams,
    KillVerdict,
    kd1_from_matrices,
    kd2_killed,
    kd3_killed_class,
    kd4_killed,
    kdf_killed,
    mutation_score,
)
from .matrixio import DataFormatError, correctness, file_digest, load_predictions, write_predictions, write_truth
from .monotonicity import AuditConfig, AuditConfigError, audit
from .simgen import Block, ScenarioSpec, adversarial_kd1, generate, to_predictions
from .stats import ContingencyTable, fisher_exact

SCHEMA_VERSION = "1"

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class InvariantError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _json_number(x):
    if x is None:
        return None
    if isinstance(x, float) and math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def _threads() -> int | None:
    raw = os.environ.get("MUTAKILL_THREADS", "").strip()
    if not raw:
        return None
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"MUTAKILL_THREADS must be an integer, got {raw!r}")
    if n < 0:
        raise UsageError("MUTAKILL_THREADS must be >= 0")
    return n or None


def _add_kill_params(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("kill parameters")
    g.add_argument("--alpha", type=float, default=0.05, help="significance level (default 0.05)")
    g.add_argument("--beta", type=float, default=0.2, help="minimum Cohen's d for KD1 (default 0.2)")
    g.add_argument("--tau", type=int, default=1, help="killing inputs required by KDF (default 1)")
    g.add_argument("--ttest", choices=("pooled", "welch"), default="pooled")
    g.add_argument("--one-sided", action="store_true", help="one-sided Fisher test (original better)")
    g.add_argument("--bonferroni", action="store_true", help="divide alpha by the number of inputs for KDF")
    g.add_argument(
        "--no-directional", dest="directional", action="store_false",
        help="do not require the original to have the higher mean accuracy under KD1",
    )


def _params(args) -> KillParams:
    try:
        return KillParams(
            alpha=args.alpha,
            beta=args.beta,
            tau=args.tau,
            directional=args.directional,
            ttest_variant=args.ttest,
            one_sided=args.one_sided,
            bonferroni=args.bonferroni,
        )
    except ValueError as exc:
        raise UsageError(str(exc))


def _params_echo(params: KillParams) -> dict:
    return {
        "alpha": params.alpha,
        "beta": params.beta,
        "tau": params.tau,
        "directional": params.directional,
        "ttest": params.ttest_variant,
        "one_sided": params.one_sided,
        "bonferroni": params.bonferroni,
    }


def _verdict_json(v: KillVerdict) -> dict:
    out = {"killed": v.killed}
    for name in ("p_value", "statistic", "effect_size", "nki", "class_score"):
        value = getattr(v, name)
        if value is not None:
            out[name] = _json_number(value)
    if v.killing_input_ids is not None:
        out["killing_input_ids"] = list(v.killing_input_ids)
    if v.per_class is not None:
        out["per_class"] = dict(v.per_class)
    return out


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------- fisher


def cmd_fisher(args) -> int:
    if min(args.a, args.b, args.c, args.d) < 0:
        raise UsageError("counts must be non-negative")
    try:
        table = ContingencyTable(args.a, args.b, args.c, args.d)
    except ValueError as exc:
        raise UsageError(str(exc))
    if not 0 < args.alpha < 1:
        raise UsageError("alpha must lie in (0, 1)")
    res = fisher_exact(table, "greater" if args.one_sided else "two-sided")
    print(f"p = {res.p_value:.6f}")
    print(f"killed: {'true' if res.p_value < args.alpha else 'false'}")
    return EXIT_OK


# ---------------------------------------------------------------- analyze


def _analyze_mutant(orig_pm, mut_pm, gt, definitions, params, all_pairs):
    orig_cm, mut_cm = correctness(orig_pm, gt), correctness(mut_pm, gt)
    verdicts: dict[str, KillVerdict] = {}
    extra: dict[str, dict] = {}
    n_pairs = min(orig_pm.instance_count, mut_pm.instance_count)

    def pairwise(fn):
        v = fn(0, 0)
        if all_pairs:
            killed = sum(fn(i, i).killed for i in range(n_pairs))
            extra[v.definition] = {"pair_kill_fraction": killed / n_pairs, "pairs": n_pairs}
        return v

    for d in definitions:
        if d == "KD1":
            verdicts[d] = kd1_from_matrices(orig_cm, mut_cm, None, params)
        elif d == "KD2":
            verdicts[d] = pairwise(lambda i, j: kd2_killed(orig_cm.bits[i], mut_cm.bits[j], gt.input_ids))
        elif d == "KD3":
            verdicts[d] = pairwise(
                lambda i, j: kd3_killed_class(orig_pm.predictions[i], mut_pm.predictions[j], gt)
            )
        elif d == "KD4":
            verdicts[d] = pairwise(
                lambda i, j: kd4_killed(orig_pm.predictions[i], mut_pm.predictions[j], gt.input_ids)
            )
        elif d == "KDF":
            verdicts[d] = kdf_killed(orig_cm, mut_cm, None, params)
    return verdicts, extra


def _parse_definitions(raw: str) -> list[str]:
    defs = [d.strip().upper() for d in raw.split(",") if d.strip()]
    bad = [d for d in defs if d not in DEFINITIONS]
    if bad or not defs:
        raise UsageError(f"unknown kill definition(s) {bad}; choose from {','.join(DEFINITIONS)}")
    return [d for d in DEFINITIONS if d in defs]


def build_report(args) -> dict:
    definitions = _parse_definitions(args.definitions)
    params = _params(args)
    gt, matrices = load_predictions(args.predictions, args.truth)
    by_id = {pm.model_id: pm for pm in matrices}
    if args.original not in by_id:
        raise UsageError(f"original model {args.original!r} not found; have {sorted(by_id)}")
    mutants = [pm for pm in matrices if pm.model_id != args.original]
    if not mutants:
        raise DataFormatError("no mutant models besides the original", args.predictions)
    orig = by_id[args.original]

    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        results = list(
            pool.map(
                lambda m: _analyze_mutant(orig, m, gt, definitions, params, args.all_pairs), mutants
            )
        )

    per_mutant = {}
    for pm, (verdicts, extra) in zip(mutants, results):
        entry = {"instance_count": pm.instance_count, "verdicts": {}}
        for d, v in verdicts.items():
            entry["verdicts"][d] = _verdict_json(v) | extra.get(d, {})
        if "KDF" in verdicts:
            entry["nki"] = verdicts["KDF"].nki
            entry["killing_input_ids"] = list(verdicts["KDF"].killing_input_ids)
        per_mutant[pm.model_id] = entry

    scores = {d: mutation_score([res[0][d] for res in results]) for d in definitions}
    class_scores = None
    if "KD3" in definitions:
        class_scores = sum(res[0]["KD3"].class_score for res in results) / len(results)

    report = {
        "schema_version": SCHEMA_VERSION,
        "tool": {"name": "mutakill", "version": __version__},
    }
    if not args.no_timestamp:
        report["timestamp"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
    report |= {
        "inputs": {
            "predictions": {"path": str(args.predictions), "sha256": file_digest(args.predictions)},
            "truth": {"path": str(args.truth), "sha256": file_digest(args.truth)},
            "n_inputs": len(gt),
        },
        "params": _params_echo(params) | {"definitions": definitions, "all_pairs": args.all_pairs},
        "original_model_id": args.original,
        "original_instance_count": orig.instance_count,
        "mutants": per_mutant,
        "mutation_score": scores,
    }
    if class_scores is not None:
        report["kd3_mean_class_score"] = class_scores
    check_report(report)
    return report


def check_report(report: dict) -> None:
    """Recompute each mutation score from the per-mutant verdicts in the report."""
    mutants = report["mutants"]
    for d, score in report["mutation_score"].items():
        killed = sum(m["verdicts"][d]["killed"] for m in mutants.values())
        if killed / len(mutants) != score:
            raise InvariantError(f"mutation score for {d} does not match its verdicts")


def cmd_analyze(args) -> int:
    report = build_report(args)
    _emit(json.dumps(report, indent=2, allow_nan=False) + "\n", args.out)
    return EXIT_OK


# ---------------------------------------------------------------- audit


def _fixture_pair(args):
    if args.fixture == "adversarial":
        orig, mut = adversarial_kd1(args.r, args.k_strong, args.k_noise)
    else:
        orig, mut = generate(ScenarioSpec.from_json(args.scenario))
    if args.definition in ("KD3", "KD4"):
        gt, (po, pm) = to_predictions([orig, mut])
        return gt, po, [pm]
    return None, orig, [mut]


def cmd_audit(args) -> int:
    params = _params(args)
    try:
        cfg = AuditConfig(
            definition=args.definition.upper(),
            params=params,
            start=args.start,
            step=args.step,
            end=args.end,
            pair=(args.pair[0], args.pair[1]),
            shuffle_seed=args.shuffle_seed,
        )
    except AuditConfigError as exc:
        raise UsageError(str(exc))

    if args.fixture or args.scenario:
        if args.scenario:
            args.fixture = "scenario"
        try:
            gt, orig, mutants = _fixture_pair(args)
        except (ValueError, KeyError) as exc:
            raise UsageError(f"invalid fixture: {exc}")
    else:
        if not (args.predictions and args.truth and args.original):
            raise UsageError("audit needs --predictions, --truth and --original, or --fixture/--scenario")
        gt, matrices = load_predictions(args.predictions, args.truth)
        by_id = {pm.model_id: pm for pm in matrices}
        if args.original not in by_id:
            raise UsageError(f"original model {args.original!r} not found")
        orig = by_id[args.original]
        if args.mutant:
            if args.mutant not in by_id:
                raise UsageError(f"mutant {args.mutant!r} not found")
            mutants = [by_id[args.mutant]]
        else:
            mutants = [pm for pm in matrices if pm.model_id != args.original]
        if not mutants:
            raise DataFormatError("no mutant models besides the original", args.predictions)

    try:
        traces = {m.model_id: audit(orig, m, cfg, gt) for m in mutants}
    except AuditConfigError as exc:
        raise UsageError(str(exc))

    if args.trace:
        if len(traces) != 1:
            raise UsageError("--trace takes a single mutant; use --trace-dir for several")
        Path(args.trace).write_text(next(iter(traces.values())).to_csv(), encoding="utf-8")
    if args.trace_dir:
        out_dir = Path(args.trace_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        for mid, tr in traces.items():
            (out_dir / f"{mid}.csv").write_text(tr.to_csv(), encoding="utf-8")

    summary = {
        "schema_version": SCHEMA_VERSION,
        "definition": cfg.definition,
        "params": _params_echo(params),
        "original_model_id": orig.model_id,
        "monotone": all(tr.monotone for tr in traces.values()),
        "mutants": {
            mid: tr.summary()
            | {
                "sizes": tr.sizes,
                "killed": tr.killed,
                "p_value": [_json_number(p) for p in tr.p_values],
                "effect_size": [_json_number(d) for d in tr.effect_sizes],
                "nki": tr.nki,
            }
            for mid, tr in traces.items()
        },
    }
    _emit(json.dumps(summary, indent=2, allow_nan=False) + "\n", args.out)
    return EXIT_OK


# ---------------------------------------------------------------- simulate


def _parse_block(raw: str) -> Block:
    try:
        w, po, pm = raw.split(",")
        return Block(int(w), float(po), float(pm))
    except ValueError:
        raise argparse.ArgumentTypeError(f"block must be WIDTH,P_ORIG,P_MUT, got {raw!r}")


def cmd_simulate(args) -> int:
    try:
        if args.adversarial:
            orig, mut = adversarial_kd1(args.r, args.k_strong, args.k_noise, args.orig_id, args.mut_id)
        else:
            if args.spec:
                spec = ScenarioSpec.from_json(args.spec)
            else:
                if not args.block:
                    raise UsageError("simulate needs --spec, --block or --adversarial")
                n = sum(b.width for b in args.block)
                spec = ScenarioSpec(n, args.r_orig, args.r_mut, tuple(args.block), args.seed)
            orig, mut = generate(spec, args.orig_id, args.mut_id)
    except (ValueError, KeyError) as exc:
        raise UsageError(f"invalid scenario: {exc}")
    gt, matrices = to_predictions([orig, mut], args.n_classes)
    write_truth(gt, args.truth_out)
    write_predictions(matrices, args.predictions_out)
    return EXIT_OK


# ---------------------------------------------------------------- entry


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mutakill", description="Statistical mutation-kill analysis for DNN prediction matrices.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fisher", help="Fisher's exact test on one 2x2 table")
    for name in "abcd":
        p.add_argument(name, type=int)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--one-sided", action="store_true")
    p.set_defaults(func=cmd_fisher)

    p = sub.add_parser("analyze", help="kill verdicts and mutation scores for every mutant")
    p.add_argument("--predictions", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--original", required=True, help="model_id of the original model")
    p.add_argument("--definitions", default=",".join(DEFINITIONS), help="comma-separated subset of KD1..KD4,KDF")
    p.add_argument("--all-pairs", action="store_true", help="also report KD2-4 kill fraction over aligned instance pairs")
    p.add_argument("--out", help="write the JSON report here instead of stdout")
    p.add_argument("--no-timestamp", action="store_true")
    _add_kill_params(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("audit", help="kill status over cumulative prefixes of the test set")
    p.add_argument("--predictions")
    p.add_argument("--truth")
    p.add_argument("--original")
    p.add_argument("--mutant", help="audit only this mutant")
    p.add_argument("--fixture", choices=("adversarial",), help="audit a generated fixture instead of files")
    p.add_argument("--scenario", help="audit matrices generated from a scenario JSON file")
    p.add_argument("--r", type=int, default=20)
    p.add_argument("--k-strong", type=int, default=100)
    p.add_argument("--k-noise", type=int, default=9900)
    p.add_argument("--definition", default="KD1", type=str.upper, choices=DEFINITIONS)
    p.add_argument("--start", type=int, default=100)
    p.add_argument("--step", type=int, default=100)
    p.add_argument("--end", type=int)
    p.add_argument("--pair", type=int, nargs=2, default=(0, 0), metavar=("ORIG", "MUT"))
    p.add_argument("--shuffle-seed", type=int)
    p.add_argument("--trace", help="CSV trace path (single mutant)")
    p.add_argument("--trace-dir", help="directory for one CSV trace per mutant")
    p.add_argument("--out", help="write the JSON summary here instead of stdout")
    _add_kill_params(p)
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("simulate", help="write synthetic matrices in the predictions/truth CSV formats")
    p.add_argument("--spec", help="scenario JSON file")
    p.add_argument("--block", type=_parse_block, action="append", help="WIDTH,P_ORIG,P_MUT (repeatable)")
    p.add_argument("--r-orig", type=int, default=20)
    p.add_argument("--r-mut", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--adversarial", action="store_true", help="write the KD1 monotonicity-violation fixture")
    p.add_argument("--r", type=int, default=20)
    p.add_argument("--k-strong", type=int, default=100)
    p.add_argument("--k-noise", type=int, default=9900)
    p.add_argument("--n-classes", type=int, default=10)
    p.add_argument("--orig-id", default="original")
    p.add_argument("--mut-id", default="mutant")
    p.add_argument("--predictions-out", required=True)
    p.add_argument("--truth-out", required=True)
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"mutakill: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataFormatError, OSError) as exc:
        print(f"mutakill: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (InvariantError, AssertionError) as exc:
        print(f"mutakill: internal invariant failure: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
