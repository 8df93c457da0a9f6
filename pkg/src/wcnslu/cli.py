"""Command line entry point: ``wcnslu {wcn,nbest,eval,report}``.

Exit codes: 0 success, 1 usage, 2 data error, 3 backend error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import harness
from .confnet import WcnRenderOptions, build_wcn, dump_wcn, filter_options, flatten_wcn
from .lattice import LatticeError, nbest, parse_lattice
from .llm import BackendError
from .prompting import RenderConfig, TranscriptSource, load_templates

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_BACKEND = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _probability(text: str) -> float:
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"{text} is not in [0, 1]")
    return value


def _read_lattice(path: str):
    text = sys.stdin.read() if path == "-" else Path(path).read_text(encoding="utf-8")
    return parse_lattice(text)


def cmd_wcn(args) -> int:
    lat = _read_lattice(args.lattice)
    cn = build_wcn(lat, acoustic_scale=args.acoustic_scale, lm_scale=args.lm_scale)
    if args.dump:
        sys.stdout.write(dump_wcn(cn))
        return EXIT_OK
    opts = WcnRenderOptions(args.separator, args.threshold, args.order)
    print(flatten_wcn(filter_options(cn, opts.threshold), opts))
    return EXIT_OK


def cmd_nbest(args) -> int:
    lat = _read_lattice(args.lattice)
    for hyp in nbest(lat, args.k, args.acoustic_scale, args.lm_scale, unique_words=args.unique):
        print(f"{hyp.score:.6f}\t{hyp.text}")
    return EXIT_OK


def _sources(values: list[str]) -> tuple[TranscriptSource, ...]:
    out = []
    for v in values:
        for part in v.split(","):
            if part.strip():
                out.append(TranscriptSource.parse(part))
    if not out:
        raise UsageError("no transcript sources given")
    return tuple(dict.fromkeys(out))


def cmd_eval(args) -> int:
    cfg = harness.load_config(args.config)
    try:
        sources = _sources(args.sources)
        override = TranscriptSource.parse(args.icl_source_override) if args.icl_source_override else None
    except ValueError as e:
        raise UsageError(str(e)) from None
    labels = harness.read_labels(args.labels) if args.labels else None
    examples = harness.load_dataset(args.data, args.task, labels)
    train = harness.load_dataset(args.train, args.task, labels) if args.train else None
    settings = harness.EvalSettings(
        task=args.task, sources=sources, shots=args.shots,
        wcn_instruction={"on": True, "off": False, "auto": None}[args.wcn_instruction],
        icl_source_override=override, seed=args.seed, labels=labels,
        render=RenderConfig(cfg.acoustic_scale, cfg.lm_scale, cfg.nbest_k),
        templates=load_templates(cfg.templates) if cfg.templates else None,
        model_id=cfg.model, max_tokens=cfg.max_tokens, temperature=cfg.temperature)
    client = harness.make_client(cfg)
    records, summary = harness.run_eval(examples, settings, client, train)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "records.jsonl").write_text(harness.dump_records(records), encoding="utf-8")
    rows = harness.summary_rows(summary)
    harness.emit_report(rows, out / "summary.csv", columns=harness.SUMMARY_COLUMNS)
    harness.emit_report(rows, out / "summary.json", columns=harness.SUMMARY_COLUMNS)
    meta = {"task": args.task, "sources": [s.label for s in sources], "shots": args.shots,
            "seed": args.seed, "wcn_instruction": args.wcn_instruction,
            "icl_source_override": override.label if override else None,
            "model": cfg.model, "posteriors_renormalized_after_filtering": False}
    (out / "run.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n",
                                  encoding="utf-8")
    json.dump(summary, sys.stdout, indent=2, sort_keys=True)
    print()
    return EXIT_OK


def cmd_report(args) -> int:
    records = harness.load_records(args.records)
    try:
        edges = [float(x) for x in args.bins.split(",")] if args.bins else harness.DEFAULT_BIN_EDGES
    except ValueError:
        raise UsageError(f"bad --bins value {args.bins!r}") from None
    out = Path(args.out)
    bins = harness.wer_bin_report(records, edges)
    harness.emit_report(harness.long_format(bins), out / "wer_bins.csv", columns=harness.BIN_COLUMNS)
    harness.emit_report(harness.long_format(bins), out / "wer_bins.json", columns=harness.BIN_COLUMNS)
    split = harness.error_split(records)
    harness.emit_report(split, out / "error_split.csv")
    harness.emit_report(split, out / "error_split.json")
    for row in split:
        metrics = {k: round(v, 4) for k, v in row.items()
                   if k in ("f1", "em", "accuracy") and v is not None}
        print(f"{row['source']:<14} {row['subset']:<18} n={row['count']:<5} {metrics}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="wcnslu", description="Word confusion networks for LLM-based SLU.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def scales(sp):
        sp.add_argument("--acoustic-scale", type=float, default=1.0)
        sp.add_argument("--lm-scale", type=float, default=1.0)

    w = sub.add_parser("wcn", help="lattice -> flattened confusion network string")
    w.add_argument("lattice", help="SLF file, or - for stdin")
    w.add_argument("--separator", choices=["/", "|"], default="|")
    w.add_argument("--threshold", type=_probability, default=0.0)
    w.add_argument("--order", choices=["lattice", "posterior"], default="lattice")
    w.add_argument("--dump", action="store_true", help="print word:posterior bins instead")
    scales(w)
    w.set_defaults(func=cmd_wcn)

    n = sub.add_parser("nbest", help="k best paths of a lattice")
    n.add_argument("lattice")
    n.add_argument("--k", type=int, default=10)
    n.add_argument("--unique", action="store_true", help="collapse duplicate word sequences")
    scales(n)
    n.set_defaults(func=cmd_nbest)

    e = sub.add_parser("eval", help="run an SQA or IC evaluation")
    e.add_argument("--task", choices=["sqa", "ic"], required=True)
    e.add_argument("--data", required=True, help="JSON-lines dataset")
    e.add_argument("--train", help="JSON-lines pool for the one-shot example")
    e.add_argument("--labels", help="intent label file, one per line")
    e.add_argument("--sources", nargs="+", default=["gt"],
                   help="gt, 1best, oracle, wcn:SEP[:THRESHOLD]; comma or space separated")
    e.add_argument("--shots", type=int, choices=[0, 1], default=0)
    e.add_argument("--wcn-instruction", choices=["on", "off", "auto"], default="auto")
    e.add_argument("--icl-source-override")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--config")
    e.add_argument("--out", default="runs/latest")
    e.set_defaults(func=cmd_eval)

    r = sub.add_parser("report", help="WER-bin and error-split tables from records.jsonl")
    r.add_argument("records")
    r.add_argument("--bins", help="comma-separated bin edges, default 0,10,...,100")
    r.add_argument("--out", default="runs/report")
    r.set_defaults(func=cmd_report)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as e:
        print(f"wcnslu: {e}", file=sys.stderr)
        return EXIT_USAGE
    except BackendError as e:
        print(f"wcnslu: backend error: {e}", file=sys.stderr)
        return EXIT_BACKEND
    except (LatticeError, harness.SchemaError, harness.EmptyRecords, OSError, ValueError) as e:
        print(f"wcnslu: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
