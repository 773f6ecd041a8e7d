"""Command-line entry points: simulation runs, teacher sweeps, analysis,
rule extraction, and the live session server.

Every run echoes its configuration into the artifact directory. The
artifact root defaults to --out and can be overridden with the
RULELOOP_ARTIFACT_ROOT environment variable.
"""

from __future__ import annotations

import argparse
import json
import os
import signal
import statistics
import sys
from pathlib import Path

from .analysis import fit_pc_weights, read_pc_records, sweep_teachers, write_pc_records, write_weights_table
from .corpus import Corpus, CorpusError, ingest_sidecar, load_corpus, load_templates
from .features import annotate_ngrams, build_index
from .rulegen import extract_candidates
from .rules import compute_stats, load_rules, save_rules
from .session import SessionConfig, run_session, simulated_oracle, write_session_artifacts
from .student import StudentHyper

ARTIFACT_ROOT_ENV = "RULELOOP_ARTIFACT_ROOT"


def add_corpus_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--corpus", required=True, help="corpus record file (JSONL)")
    parser.add_argument(
        "--sidecar", action="append", default=[], help="feature sidecar file (repeatable)"
    )
    parser.add_argument("--rules", help="expert rules file")
    parser.add_argument("--templates", help="prompt template declaration file")
    parser.add_argument("--classes", type=int, required=True, help="number of classes K")
    parser.add_argument("--class-names", help="comma-separated class names (defaults to 1..K)")
    parser.add_argument("--ngram-max", type=int, default=3, help="n-gram length extracted from text")


def add_session_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--budget", type=float, default=100.0)
    parser.add_argument("--ti", type=float, default=1.0, help="cost of an instance query")
    parser.add_argument("--tr", type=float, default=1.0, help="cost of a rule query")
    parser.add_argument("--beta", type=int, default=1, help="max rules queried per instance")
    parser.add_argument("--batch", type=int, default=10, help="instances per iteration")
    parser.add_argument("--tcov", type=int, default=100, help="min unlabeled coverage for mined rules")
    parser.add_argument("--tprec", type=float, default=0.75, help="min labeled precision for mined rules")
    parser.add_argument("--tlen", type=int, default=3, help="max predicate conjunction length")
    parser.add_argument("--toracle", type=float, default=0.75, help="simulated-oracle accept threshold")
    parser.add_argument("--teacher", default="dawid_skene", choices=["dawid_skene", "majority_vote"])
    parser.add_argument("--sampler", default="hierarchical",
                        choices=["hierarchical", "uncertainty", "random"])
    parser.add_argument("--lambda", dest="lam", type=float, default=1.0,
                        help="weight of the weak loss term")
    parser.add_argument("--lr", type=float, default=0.1)
    parser.add_argument("--epochs", type=int, default=200)
    parser.add_argument("--patience", type=int, default=10,
                        help="early-stopping patience (0 disables)")


def load_inputs(args) -> tuple[Corpus, object]:
    class_names = args.class_names.split(",") if args.class_names else None
    templates = load_templates(args.templates) if args.templates else frozenset()
    corpus = load_corpus(args.corpus, args.classes, class_names, templates)
    for sidecar in args.sidecar:
        ingest_sidecar(corpus, sidecar)
    if args.ngram_max > 0:
        annotate_ngrams(corpus, args.ngram_max)
    return corpus, build_index(corpus)


def session_config(args, seed: int) -> SessionConfig:
    return SessionConfig(
        teacher=args.teacher,
        sampler=args.sampler,
        budget=args.budget,
        cost_instance=args.ti,
        cost_rule=args.tr,
        batch_size=args.batch,
        min_coverage=args.tcov,
        min_precision=args.tprec,
        max_predicate_len=args.tlen,
        beta=args.beta,
        t_oracle=args.toracle,
        lam=args.lam,
        learning_rate=args.lr,
        epochs=args.epochs,
        early_stop_patience=args.patience if args.patience > 0 else None,
        ngram_max=args.ngram_max,
        seed=seed,
    )


def artifact_dir(args) -> Path:
    root = os.environ.get(ARTIFACT_ROOT_ENV)
    out = Path(root) / Path(args.out).name if root else Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def echo_config(out: Path, payload: dict) -> None:
    with open(out / "run_config.json", "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, default=str)
        fh.write("\n")


def cmd_simulate(args) -> int:
    corpus, index = load_inputs(args)
    initial_rules = (
        load_rules(args.rules, corpus.num_classes, corpus.template_names) if args.rules else []
    )
    out = artifact_dir(args)
    seeds = list(range(args.seeds)) if args.seeds else [args.seed]
    echo_config(out, {"command": "simulate", **vars(args), "resolved_seeds": seeds})

    rows = []
    for seed in seeds:
        config = session_config(args, seed)
        oracle = simulated_oracle(corpus, config.t_oracle, index)
        result = run_session(config, corpus, oracle, index, initial_rules)
        write_session_artifacts(result, out / f"seed-{seed}")
        final = result.metrics[-1]
        rows.append((seed, final))
        print(
            f"seed={seed}\tmacro_f1={final['test_macro_f1']:.4f}"
            f"\tlabeled={final['labeled_size']}\trules={final['accepted_rules']}"
            f"\tspent={final['spent']:g}"
        )

    f1s = [final["test_macro_f1"] for _, final in rows]
    mean = statistics.mean(f1s)
    std = statistics.stdev(f1s) if len(f1s) > 1 else 0.0
    print(f"aggregate\tmean_f1={mean:.4f}\tstd={std:.4f}\truns={len(f1s)}")
    with open(out / "summary.tsv", "w", encoding="utf-8") as fh:
        fh.write("seed\tmacro_f1\tlabeled\trules\tspent\n")
        for seed, final in rows:
            fh.write(
                f"{seed}\t{final['test_macro_f1']:.6f}\t{final['labeled_size']}"
                f"\t{final['accepted_rules']}\t{final['spent']:g}\n"
            )
        fh.write(f"mean\t{mean:.6f}\t\t\t\n")
        fh.write(f"std\t{std:.6f}\t\t\t\n")
    return 0


def cmd_sweep(args) -> int:
    corpus, index = load_inputs(args)
    rules = load_rules(args.rules, corpus.num_classes, corpus.template_names)
    if not rules:
        print("error: rule file is empty", file=sys.stderr)
        return 2
    out = artifact_dir(args)
    fractions = [float(x) for x in args.fractions.split(",")]
    teachers = args.teachers.split(",")
    seeds = list(range(args.seeds))
    echo_config(out, {"command": "sweep", **vars(args), "resolved_seeds": seeds})

    hyper = StudentHyper(
        lam=args.lam, learning_rate=args.lr, epochs=args.epochs,
        early_stop_patience=args.patience if args.patience > 0 else None,
    )
    records = sweep_teachers(corpus, rules, fractions, teachers, seeds, hyper)
    write_pc_records(records, out / "pc_records.tsv")
    weights = fit_pc_weights(records, args.grid_step)
    write_weights_table(weights, out / "pc_weights.tsv")
    print(
        f"records={len(records)}\tw_precision={weights.w_precision:.2f}"
        f"\tw_coverage={weights.w_coverage:.2f}\tmse={weights.fit_error:.6f}"
    )
    return 0


def cmd_analyze(args) -> int:
    out = artifact_dir(args)
    if args.records:
        records = read_pc_records(args.records)
        weights = fit_pc_weights(records, args.grid_step)
        write_weights_table(weights, out / "pc_weights.tsv")
        echo_config(out, {"command": "analyze", **vars(args)})
        print(
            f"w_precision={weights.w_precision:.2f}\tw_coverage={weights.w_coverage:.2f}"
            f"\tmse={weights.fit_error:.6f}"
        )
        return 0
    if args.run:
        metrics_path = Path(args.run) / "metrics.jsonl"
        rows = [json.loads(line) for line in metrics_path.read_text().splitlines() if line]
        for row in rows:
            print(json.dumps(row))
        return 0
    print("error: provide --records or --run", file=sys.stderr)
    return 2


def cmd_extract_rules(args) -> int:
    corpus, index = load_inputs(args)
    out = artifact_dir(args)
    echo_config(out, {"command": "extract-rules", **vars(args)})
    config = session_config(args, args.seed)
    params = config.rulegen_params()

    if args.anchor:
        anchor = corpus.get(args.anchor)
        if anchor.gold_label is None and args.anchor_label is None:
            print("error: anchor has no gold label; pass --anchor-label", file=sys.stderr)
            return 2
        anchors = [(anchor, args.anchor_label or anchor.gold_label)]
    else:
        anchors = [(inst, inst.gold_label) for inst in corpus.split_instances("labeled")]

    seen = set()
    mined = []
    for anchor, label in anchors:
        for rule in extract_candidates(anchor, label, index, corpus, params, seen):
            seen.add(rule.key())
            mined.append(rule)
    save_rules(mined, out / "candidates.jsonl")
    with open(out / "candidate_stats.tsv", "w", encoding="utf-8") as fh:
        fh.write("id\tpredicate\tlabel\tcoverage_unlabeled\tprecision_labeled\n")
        for rule in mined:
            stats = compute_stats(rule, corpus, index)
            precision = "" if stats.precision_labeled is None else f"{stats.precision_labeled:.4f}"
            fh.write(
                f"{rule.id}\t{rule.render()}\t{rule.label}"
                f"\t{stats.coverage_unlabeled}\t{precision}\n"
            )
    print(f"candidates={len(mined)}")
    return 0


def cmd_serve(args) -> int:
    from .api import SessionManager, serve

    corpus, index = load_inputs(args)
    initial_rules = (
        load_rules(args.rules, corpus.num_classes, corpus.template_names) if args.rules else []
    )
    out = artifact_dir(args)
    echo_config(out, {"command": "serve", **vars(args)})
    manager = SessionManager(out)
    name = args.name or Path(args.corpus).stem
    manager.register_corpus(name, corpus, index, initial_rules)
    resumed = manager.recover_sessions()
    if resumed:
        print(f"resumed sessions: {', '.join(resumed)}")

    static_dir = Path(args.ui).resolve() if args.ui else None
    try:
        server = serve(manager, args.port, args.host, static_dir)
    except OSError as exc:
        print(f"error: cannot bind port {args.port}: {exc}", file=sys.stderr)
        return 2

    def handle_signal(signum, frame):
        # shutdown() must not run on the serve_forever thread.
        import threading

        threading.Thread(target=server.shutdown, daemon=True).start()

    signal.signal(signal.SIGTERM, handle_signal)
    signal.signal(signal.SIGINT, handle_signal)
    print(f"serving corpus {name!r} on http://{args.host}:{args.port} (artifacts in {out})")
    server.serve_forever()
    server.server_close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ruleloop",
        description="Interactive weak supervision: mine labeling rules and spend "
        "an expert budget on instance and rule queries.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run budgeted sessions against the simulated oracle")
    add_corpus_flags(p_sim)
    add_session_flags(p_sim)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--seeds", type=int, help="run seeds 0..N-1 and aggregate")
    p_sim.add_argument("--out", default="runs/simulate")
    p_sim.set_defaults(fn=cmd_simulate)

    p_sweep = sub.add_parser("sweep", help="teacher precision/coverage sweep and weight fit")
    add_corpus_flags(p_sweep)
    p_sweep.add_argument("--fractions", default="0.25,0.5,1.0")
    p_sweep.add_argument("--teachers", default="majority_vote,dawid_skene")
    p_sweep.add_argument("--seeds", type=int, default=10)
    p_sweep.add_argument("--grid-step", type=float, default=0.01)
    p_sweep.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p_sweep.add_argument("--lr", type=float, default=0.1)
    p_sweep.add_argument("--epochs", type=int, default=200)
    p_sweep.add_argument("--patience", type=int, default=10)
    p_sweep.add_argument("--out", default="runs/sweep")
    p_sweep.set_defaults(fn=cmd_sweep)

    p_an = sub.add_parser("analyze", help="fit weights from records or summarize a run")
    p_an.add_argument("--records", help="pc_records.tsv from a sweep")
    p_an.add_argument("--run", help="session artifact directory")
    p_an.add_argument("--grid-step", type=float, default=0.01)
    p_an.add_argument("--out", default="runs/analyze")
    p_an.set_defaults(fn=cmd_analyze)

    p_ex = sub.add_parser("extract-rules", help="mine candidate rules offline")
    add_corpus_flags(p_ex)
    add_session_flags(p_ex)
    p_ex.add_argument("--anchor", help="anchor instance id (default: all labeled instances)")
    p_ex.add_argument("--anchor-label", type=int, help="label to mine for the anchor")
    p_ex.add_argument("--seed", type=int, default=0)
    p_ex.add_argument("--out", default="runs/extract")
    p_ex.set_defaults(fn=cmd_extract_rules)

    p_srv = sub.add_parser("serve", help="host live expert sessions over HTTP")
    add_corpus_flags(p_srv)
    add_session_flags(p_srv)
    p_srv.add_argument("--port", type=int, default=8765)
    p_srv.add_argument("--host", default="127.0.0.1")
    p_srv.add_argument("--name", help="corpus registration name (default: file stem)")
    p_srv.add_argument("--ui", help="static directory with the built workbench")
    p_srv.add_argument("--seed", type=int, default=0)
    p_srv.add_argument("--out", default="runs/serve")
    p_srv.set_defaults(fn=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (CorpusError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
