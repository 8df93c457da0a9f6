"""Experiment harness: datasets, the (example x transcript source) run matrix, and reports."""

from __future__ import annotations

import configparser
import csv
import io
import json
import logging
import math
import random
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .confnet import build_wcn, filter_options, wcn_stats
from .lattice import Lattice, LatticeError, best_path, parse_lattice
from .llm import (AuthError, BackendError, CacheMiss, CompletionRequest, HttpBackend, LLMClient,
                  MockBackend, ReplayBackend, ResponseCache)
from .metrics import best_over_golds, match_intent, tokenize_transcript, wer
from .prompting import (GROUND_TRUTH, WCN, InContextExample, IcTask, PromptSpec, RenderConfig,
                        SqaTask, TranscriptSource, build_prompt, render_transcript)

log = logging.getLogger(__name__)

SQA, IC = "sqa", "ic"
DEFAULT_BIN_EDGES = tuple(range(0, 101, 10))
SUMMARY_COLUMNS = ("source", "n", "errors", "f1", "em", "accuracy", "mean_question_wer",
                   "options_per_word")
BIN_COLUMNS = ("source", "bin", "lo", "hi", "count", "metric", "value")


class SchemaError(ValueError):
    pass


class EmptyRecords(ValueError):
    pass


# --- datasets ------------------------------------------------------------------

@dataclass(frozen=True)
class SqaExample:
    id: str
    context: str
    question: str
    answers: tuple[str, ...]
    lattice: Lattice | None = None

    @property
    def gold(self) -> str:
        return self.question


@dataclass(frozen=True)
class IcExample:
    id: str
    command: str
    intent: str
    lattice: Lattice | None = None

    @property
    def gold(self) -> str:
        return self.command


def _read_lattice(value: str, base: Path) -> Lattice:
    if "\n" in value:
        return parse_lattice(value)
    return parse_lattice((base / value).read_text(encoding="utf-8"))


def _require(obj: dict, key: str, kind, lineno: int):
    if key not in obj:
        raise SchemaError(f"line {lineno}: missing field {key!r}")
    if not isinstance(obj[key], kind):
        raise SchemaError(f"line {lineno}: field {key!r} has the wrong type")
    return obj[key]


def read_labels(path: str | Path) -> tuple[str, ...]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return tuple(sorted({ln.strip() for ln in lines if ln.strip() and not ln.startswith("#")}))


def load_dataset(path: str | Path, task: str,
                 labels: Sequence[str] | None = None) -> list[SqaExample] | list[IcExample]:
    """Read a JSON-lines dataset.

    ``lattice`` is either inline SLF text or a path relative to the dataset file.
    For intent classification the label set comes from ``labels``, else from a
    ``labels.txt`` beside the dataset, else from the intents present.
    """
    path = Path(path)
    if task not in (SQA, IC):
        raise ValueError(f"unknown task {task!r}")
    rows = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise SchemaError(f"line {lineno}: invalid JSON ({e.msg})") from None
        if not isinstance(obj, dict):
            raise SchemaError(f"line {lineno}: expected an object")
        rows.append((lineno, obj))

    if task == IC and labels is None:
        sidecar = path.parent / "labels.txt"
        labels = read_labels(sidecar) if sidecar.exists() else None
    label_set = set(labels) if labels is not None else None

    seen = set()
    out = []
    for lineno, obj in rows:
        ex_id = str(_require(obj, "id", (str, int), lineno))
        if ex_id in seen:
            raise SchemaError(f"line {lineno}: duplicate id {ex_id!r}")
        seen.add(ex_id)
        lat = None
        if obj.get("lattice") is not None:
            try:
                lat = _read_lattice(_require(obj, "lattice", str, lineno), path.parent)
            except LatticeError as e:
                raise type(e)(f"example {ex_id}: {e}") from e
            except OSError as e:
                raise SchemaError(f"line {lineno}: cannot read lattice ({e})") from None
        if task == SQA:
            answers = _require(obj, "answers", list, lineno)
            if not answers or not all(isinstance(a, str) for a in answers):
                raise SchemaError(f"line {lineno}: 'answers' must be a nonempty list of strings")
            out.append(SqaExample(ex_id, _require(obj, "context", str, lineno),
                                  _require(obj, "question", str, lineno), tuple(answers), lat))
        else:
            intent = _require(obj, "intent", str, lineno)
            if label_set is not None and intent not in label_set:
                raise SchemaError(f"line {lineno}: intent {intent!r} not in the label set")
            out.append(IcExample(ex_id, _require(obj, "command", str, lineno), intent, lat))
    return out


def label_set_for(examples: Sequence[IcExample], labels: Sequence[str] | None = None) -> tuple[str, ...]:
    return tuple(sorted(set(labels) if labels is not None else {e.intent for e in examples}))


# --- records -------------------------------------------------------------------

@dataclass
class EvalRecord:
    id: str
    source: str
    shots: int
    rendered_input: str
    prediction: str
    metrics: dict
    question_wer: float
    options_per_word: float | None = None
    icl_id: str | None = None
    error: str | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "EvalRecord":
        return cls(**d)


def dump_records(records: Iterable[EvalRecord]) -> str:
    return "".join(json.dumps(r.to_dict(), sort_keys=True, ensure_ascii=False) + "\n"
                   for r in records)


def load_records(path: str | Path) -> list[EvalRecord]:
    text = Path(path).read_text(encoding="utf-8")
    return [EvalRecord.from_dict(json.loads(ln)) for ln in text.splitlines() if ln.strip()]


# --- mock responder ------------------------------------------------------------

_STOP = {"a", "an", "the", "of", "in", "on", "to", "did", "do", "does", "is", "was", "what",
         "who", "when", "where", "which", "how", "many", "much", "for", "by", "and", "his",
         "her", "their", "these", "not", "me", "i", "show", "from", "what's", "are", "with"}


def _words(text: str) -> list[str]:
    return [w for w in re.split(r"[\s/|]+", re.sub(r"[^\w\s/|']", " ", text.lower())) if w]


def _last_field(prompt: str, name: str) -> str:
    hits = re.findall(rf"^{name}: (.*)$", prompt, re.M)
    return hits[-1] if hits else ""


def overlap_responder(req: CompletionRequest) -> str:
    """Cheap deterministic stand-in for an LLM, driven by word overlap.

    Intent prompts: the label whose ``_``-separated parts best match the command.
    QA prompts: from the context sentence sharing most content words with the
    question, the longest run (up to four words) of words absent from the question.
    Separator-joined alternatives all count as question words.
    """
    prompt = req.prompt
    if re.search(r"^Intent:", prompt, re.M):
        m = re.search(r"are: (.*?)\. Reply", prompt)
        labels = m.group(1).split(", ") if m else []
        cmd = set(_words(_last_field(prompt, "Command")))

        def score(label):
            return sum(any(w.startswith(part[:5]) for w in cmd) for part in label.split("_"))

        best = max(labels, key=lambda lb: (score(lb), [-ord(c) for c in lb]), default="")
        return f" {best}" if best and score(best) else " unknown"
    context = _last_field(prompt, "Context")
    question = set(_words(_last_field(prompt, "Question"))) - _STOP
    sentences = [s for s in re.split(r"(?<=[.!?])\s+", context) if s]
    if not sentences:
        return ""
    best = max(sentences, key=lambda s: len(question & set(_words(s))))
    run, longest = [], []
    for w in _words(best):
        if w in question or w in _STOP and not run:
            run = []
            continue
        run.append(w)
        if len(run) > len(longest):
            longest = list(run)
    return " " + " ".join(longest[:4])


# --- evaluation ----------------------------------------------------------------

@dataclass
class EvalSettings:
    task: str = SQA
    sources: tuple[TranscriptSource, ...] = (TranscriptSource(GROUND_TRUTH),)
    shots: int = 0
    wcn_instruction: bool | None = None  # None: on for one-shot, off for zero-shot
    icl_source_override: TranscriptSource | None = None
    seed: int = 0
    labels: tuple[str, ...] | None = None
    render: RenderConfig = field(default_factory=RenderConfig)
    templates: dict | None = None
    model_id: str = "mock"
    max_tokens: int = 32
    temperature: float = 0.0
    normalize_answers: bool = True
    intent_substring: bool = True

    def __post_init__(self):
        if self.shots not in (0, 1):
            raise ValueError("shots must be 0 or 1")
        if self.task not in (SQA, IC):
            raise ValueError(f"unknown task {self.task!r}")


def _question(text: str) -> str:
    return text if text.rstrip().endswith("?") else text.rstrip() + "?"


def _render(ex, source: TranscriptSource, settings: EvalSettings) -> str:
    text = render_transcript(source, gold=ex.gold, lattice=ex.lattice, config=settings.render)
    return _question(text) if settings.task == SQA else text


def _hypothesis_wer(ex, source: TranscriptSource, rendered: str, settings: EvalSettings) -> float:
    ref = tokenize_transcript(ex.gold)
    if source.kind == GROUND_TRUTH:
        return 0.0
    if source.kind == WCN:
        # WCN rows are binned by the example's 1-best WER so they line up with the baseline
        hyp = tokenize_transcript(best_path(ex.lattice, settings.render.acoustic_scale,
                                            settings.render.lm_scale).text)
    else:
        hyp = tokenize_transcript(rendered)
    return wer(hyp, ref)


def pick_icl_example(pool: Sequence, test_id: str, seed: int):
    """One seeded pick per run; the next candidate stands in when it is the test item itself."""
    if not pool:
        return None
    order = list(range(len(pool)))
    random.Random(seed).shuffle(order)
    for i in order:
        if pool[i].id != test_id:
            return pool[i]
    return None


def _score(ex, prediction: str, settings: EvalSettings, labels) -> dict:
    if settings.task == SQA:
        f1, em = best_over_golds(prediction, ex.answers, normalize=settings.normalize_answers)
        return {"f1": f1, "em": em}
    guess = match_intent(prediction, labels, substring=settings.intent_substring)
    return {"correct": int(guess == ex.intent)}


def _zero_metrics(task: str) -> dict:
    return {"f1": 0.0, "em": 0} if task == SQA else {"correct": 0}


def _evaluate_one(ex, source: TranscriptSource, settings: EvalSettings, client: LLMClient,
                  pool: Sequence, labels) -> EvalRecord:
    rendered, prediction, opw, icl_id = "", "", None, None
    try:
        rendered = _render(ex, source, settings)
        q_wer = _hypothesis_wer(ex, source, rendered, settings)
        if source.kind == WCN:
            cn = filter_options(build_wcn(ex.lattice, acoustic_scale=settings.render.acoustic_scale,
                                          lm_scale=settings.render.lm_scale), source.threshold)
            opw = wcn_stats(cn)["options_per_word"]
        example = None
        if settings.shots == 1:
            icl = pick_icl_example(pool, ex.id, settings.seed)
            if icl is not None:
                icl_id = icl.id
                icl_src = settings.icl_source_override or source
                if settings.task == SQA:
                    example = InContextExample(_render(icl, icl_src, settings), icl.answers[0],
                                               icl.context)
                else:
                    example = InContextExample(_render(icl, icl_src, settings), icl.intent)
        use_instr = settings.wcn_instruction
        if use_instr is None:
            use_instr = settings.shots == 1
        instr = source.separator if use_instr and source.kind == WCN else None
        task = SqaTask(ex.context) if settings.task == SQA else IcTask(labels)
        prompt = build_prompt(PromptSpec(task, rendered, instr, example, settings.templates))
        req = CompletionRequest(prompt, settings.model_id, settings.max_tokens,
                                settings.temperature)
        prediction = client.complete(req).text
        return EvalRecord(ex.id, source.label, settings.shots, rendered, prediction,
                          _score(ex, prediction, settings, labels), q_wer, opw, icl_id)
    except (AuthError, CacheMiss):
        raise  # the whole run is misconfigured, not this example
    except (ValueError, BackendError) as e:
        log.warning("example %s / %s failed: %s", ex.id, source.label, e)
        try:
            q_wer = _hypothesis_wer(ex, source, rendered, settings)
        except (ValueError, LatticeError, AttributeError, TypeError):
            q_wer = math.nan
        return EvalRecord(ex.id, source.label, settings.shots, rendered, prediction,
                          _zero_metrics(settings.task), q_wer, opw, icl_id,
                          f"{type(e).__name__}: {e}")


def run_eval(examples: Sequence, settings: EvalSettings, client: LLMClient,
             train: Sequence | None = None) -> tuple[list[EvalRecord], dict]:
    """Evaluate every (example, source) pair; returns ordered records and a per-source summary.

    One-shot runs draw their demonstration from ``train`` (or, failing that,
    from the other test examples) with ``settings.seed``.
    """
    labels = None
    if settings.task == IC:
        labels = label_set_for(examples, settings.labels)
    pool = list(train) if train else list(examples)
    jobs = [(ex, src) for ex in examples for src in settings.sources]
    with ThreadPoolExecutor(max_workers=client.max_in_flight) as pool_exec:
        records = list(pool_exec.map(
            lambda job: _evaluate_one(job[0], job[1], settings, client, pool, labels), jobs))
    rank = {s.label: i for i, s in enumerate(settings.sources)}
    records.sort(key=lambda r: (r.id, rank[r.source]))
    return records, summarize(records, settings.sources)


def _mean(values: list[float]) -> float | None:
    return math.fsum(values) / len(values) if values else None


def summarize(records: Sequence[EvalRecord], sources: Sequence[TranscriptSource] | None = None) -> dict:
    labels = [s.label for s in sources] if sources else sorted({r.source for r in records})
    out = {}
    for label in labels:
        rs = [r for r in records if r.source == label]
        row = {"n": len(rs), "errors": sum(r.error is not None for r in rs)}
        for metric in ("f1", "em"):
            if rs and metric in rs[0].metrics:
                row[metric] = _mean([float(r.metrics[metric]) for r in rs])
        if rs and "correct" in rs[0].metrics:
            row["accuracy"] = _mean([float(r.metrics["correct"]) for r in rs])
        row["mean_question_wer"] = _mean([r.question_wer for r in rs
                                          if not math.isnan(r.question_wer)])
        opw = [r.options_per_word for r in rs if r.options_per_word is not None]
        row["options_per_word"] = _mean(opw)
        out[label] = row
    return out


# --- reports -------------------------------------------------------------------

def _bin_of(value: float, edges: Sequence[float]) -> tuple[str, float, float]:
    if value <= edges[0]:
        return (f"{edges[0]:g}", edges[0], edges[0])
    for lo, hi in zip(edges, edges[1:]):
        if lo < value <= hi:
            return (f"({lo:g},{hi:g}]", lo, hi)
    return (f">{edges[-1]:g}", edges[-1], math.inf)


def _metric_means(rs: Sequence[EvalRecord]) -> dict:
    out = {}
    keys = ("f1", "em") if "f1" in rs[0].metrics else ("correct",)
    for k in keys:
        out["accuracy" if k == "correct" else k] = _mean([float(r.metrics[k]) for r in rs])
    opw = [r.options_per_word for r in rs if r.options_per_word is not None]
    out["options_per_word"] = _mean(opw)
    return out


def wer_bin_report(records: Sequence[EvalRecord],
                   bin_edges: Sequence[float] = DEFAULT_BIN_EDGES) -> list[dict]:
    """Per source and question-WER bin: count and mean metrics.

    Bins are ``{edges[0]}``, ``(edges[i], edges[i+1]]`` and an overflow bin.
    Only populated bins are listed.
    """
    if not records:
        raise EmptyRecords("no records to report")
    edges = sorted(bin_edges)
    groups: dict[tuple, list[EvalRecord]] = {}
    for r in records:
        if math.isnan(r.question_wer):
            continue
        name, lo, hi = _bin_of(r.question_wer, edges)
        groups.setdefault((r.source, lo, hi, name), []).append(r)
    order = {s: i for i, s in enumerate(dict.fromkeys(r.source for r in records))}
    rows = []
    for (source, lo, hi, name), rs in sorted(groups.items(),
                                             key=lambda kv: (order[kv[0][0]], kv[0][1], kv[0][2])):
        rows.append({"source": source, "bin": name, "lo": lo, "hi": hi, "count": len(rs),
                     **_metric_means(rs)})
    return rows


def error_split(records: Sequence[EvalRecord]) -> list[dict]:
    """Two rows per source: examples whose question WER is zero, and the rest."""
    if not records:
        raise EmptyRecords("no records to report")
    rows = []
    for source in dict.fromkeys(r.source for r in records):
        rs = [r for r in records if r.source == source]
        for name, part in (("w/out ASR errors", [r for r in rs if r.question_wer == 0.0]),
                           ("w/ ASR errors", [r for r in rs if r.question_wer != 0.0])):
            row = {"source": source, "subset": name, "count": len(part)}
            if part:
                row.update(_metric_means(part))
            rows.append(row)
    return rows


def long_format(rows: Sequence[dict]) -> list[dict]:
    """Bin rows reshaped to one (source, bin, metric, value) row each, for plotting."""
    out = []
    for row in rows:
        for metric in ("f1", "em", "accuracy", "options_per_word"):
            if row.get(metric) is not None:
                out.append({"source": row["source"], "bin": row["bin"], "lo": row["lo"],
                            "hi": row["hi"], "count": row["count"], "metric": metric,
                            "value": row[metric]})
    return out


def summary_rows(summary: dict) -> list[dict]:
    return [{"source": src, **vals} for src, vals in summary.items()]


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return "inf" if v == math.inf else repr(v)
    return str(v)


def emit_report(rows: Sequence[dict], path: str | Path, fmt: str | None = None,
                columns: Sequence[str] | None = None) -> Path:
    """Write rows as CSV (fixed column order) or JSON; format defaults to the file suffix."""
    path = Path(path)
    fmt = fmt or path.suffix.lstrip(".").lower()
    if not rows:
        raise EmptyRecords("nothing to write")
    if columns is None:
        columns = list(dict.fromkeys(k for row in rows for k in row))
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_cell(row.get(c)) for c in columns])
        text = buf.getvalue()
    elif fmt == "json":
        clean = [{c: (None if row.get(c) == math.inf else row.get(c)) for c in columns}
                 for row in rows]
        text = json.dumps(clean, indent=2, sort_keys=True, ensure_ascii=False) + "\n"
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return path


def load_report(path: str | Path) -> list[dict]:
    return json.loads(Path(path).read_text(encoding="utf-8"))


# --- config --------------------------------------------------------------------

@dataclass
class HarnessConfig:
    backend: str = "mock"
    base_url: str = ""
    model: str = "mock"
    api_key_env: str = "OPENAI_API_KEY"
    max_in_flight: int = 4
    requests_per_minute: float | None = None
    max_attempts: int = 4
    max_tokens: int = 32
    temperature: float = 0.0
    acoustic_scale: float = 1.0
    lm_scale: float = 1.0
    nbest_k: int = 10
    templates: Path | None = None
    cache: Path | None = None


def load_config(path: str | Path | None) -> HarnessConfig:
    """Read an INI config with ``[backend]``, ``[lattice]`` and ``[paths]`` sections."""
    cfg = HarnessConfig()
    if path is None:
        return cfg
    path = Path(path)
    parser = configparser.ConfigParser(interpolation=None)
    if not parser.read(path, encoding="utf-8"):
        raise FileNotFoundError(path)
    b = parser["backend"] if parser.has_section("backend") else {}
    cfg.backend = b.get("kind", cfg.backend)
    cfg.base_url = b.get("base_url", cfg.base_url)
    cfg.model = b.get("model", cfg.model)
    cfg.api_key_env = b.get("api_key_env", cfg.api_key_env)
    cfg.max_in_flight = int(b.get("max_in_flight", cfg.max_in_flight))
    rpm = b.get("requests_per_minute")
    cfg.requests_per_minute = float(rpm) if rpm else None
    cfg.max_attempts = int(b.get("max_attempts", cfg.max_attempts))
    cfg.max_tokens = int(b.get("max_tokens", cfg.max_tokens))
    cfg.temperature = float(b.get("temperature", cfg.temperature))
    if parser.has_section("lattice"):
        lat = parser["lattice"]
        cfg.acoustic_scale = float(lat.get("acoustic_scale", cfg.acoustic_scale))
        cfg.lm_scale = float(lat.get("lm_scale", cfg.lm_scale))
        cfg.nbest_k = int(lat.get("nbest_k", cfg.nbest_k))
    if parser.has_section("paths"):
        p = parser["paths"]
        if p.get("templates"):
            cfg.templates = path.parent / p["templates"]
        if p.get("cache"):
            cfg.cache = path.parent / p["cache"]
    if cfg.backend not in ("mock", "replay", "http"):
        raise ValueError(f"unknown backend kind {cfg.backend!r}")
    return cfg


def make_client(cfg: HarnessConfig) -> LLMClient:
    cache = ResponseCache(cfg.cache) if cfg.cache else None
    if cfg.backend == "mock":
        backend = MockBackend(responder=overlap_responder)
    elif cfg.backend == "replay":
        if cache is None:
            raise ValueError("replay backend needs [paths] cache")
        backend = ReplayBackend(cache)
    else:
        backend = HttpBackend(cfg.base_url, api_key_env=cfg.api_key_env,
                              max_attempts=cfg.max_attempts,
                              requests_per_minute=cfg.requests_per_minute)
    return LLMClient(backend, cache, cfg.max_in_flight)
