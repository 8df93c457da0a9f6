"""Transcript rendering and prompt construction for spoken QA and intent classification."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Sequence

from .confnet import SEPARATORS, WcnRenderOptions, build_wcn, filter_options, flatten_wcn
from .lattice import Lattice, best_path, nbest
from .metrics import select_oracle, tokenize_transcript

GROUND_TRUTH = "ground_truth"
ONE_BEST = "one_best"
NBEST_ORACLE = "nbest_oracle"
WCN = "wcn"

_SHORT_NAMES = {"gt": GROUND_TRUTH, "ground_truth": GROUND_TRUTH, "1best": ONE_BEST,
                "one_best": ONE_BEST, "oracle": NBEST_ORACLE, "nbest_oracle": NBEST_ORACLE}


class MissingLattice(ValueError):
    pass


class MissingReference(ValueError):
    pass


class UnsortedLabels(ValueError):
    pass


@dataclass(frozen=True)
class TranscriptSource:
    """Which rendering of the spoken input goes into the prompt."""

    kind: str
    separator: str | None = None
    threshold: float = 0.0

    def __post_init__(self):
        if self.kind not in (GROUND_TRUTH, ONE_BEST, NBEST_ORACLE, WCN):
            raise ValueError(f"unknown transcript source {self.kind!r}")
        if self.kind == WCN:
            if self.separator not in SEPARATORS:
                raise ValueError(f"WCN separator must be one of {SEPARATORS}")
            if not 0.0 <= self.threshold <= 1.0:
                raise ValueError("WCN threshold must lie in [0, 1]")
        elif self.separator is not None or self.threshold:
            raise ValueError("only WCN sources take a separator or threshold")

    @classmethod
    def wcn(cls, separator: str = "|", threshold: float = 0.0) -> "TranscriptSource":
        return cls(WCN, separator, threshold)

    @classmethod
    def parse(cls, text: str) -> "TranscriptSource":
        """Parse ``gt``, ``1best``, ``oracle``, ``wcn:|`` or ``wcn:/:0.3``."""
        text = text.strip()
        if text in _SHORT_NAMES:
            return cls(_SHORT_NAMES[text])
        m = re.fullmatch(r"wcn:([/|])(?::([0-9.]+))?", text)
        if not m:
            raise ValueError(f"cannot parse transcript source {text!r}")
        return cls.wcn(m.group(1), float(m.group(2) or 0.0))

    @property
    def label(self) -> str:
        if self.kind == GROUND_TRUTH:
            return "gt"
        if self.kind == ONE_BEST:
            return "1best"
        if self.kind == NBEST_ORACLE:
            return "oracle"
        if self.threshold:
            return f"wcn:{self.separator}:{self.threshold:g}"
        return f"wcn:{self.separator}"

    def __str__(self) -> str:
        return self.label


@dataclass(frozen=True)
class RenderConfig:
    acoustic_scale: float = 1.0
    lm_scale: float = 1.0
    nbest_k: int = 10
    option_order: str = "lattice"


def render_transcript(source: TranscriptSource, *, gold: str | None = None,
                      lattice: Lattice | None = None,
                      config: RenderConfig = RenderConfig()) -> str:
    if source.kind == GROUND_TRUTH:
        if gold is None:
            raise MissingReference("ground-truth rendering needs the gold transcript")
        return gold
    if lattice is None:
        raise MissingLattice(f"{source.label} rendering needs a lattice")
    scales = dict(acoustic_scale=config.acoustic_scale, lm_scale=config.lm_scale)
    if source.kind == ONE_BEST:
        return best_path(lattice, **scales).text
    if source.kind == NBEST_ORACLE:
        if gold is None:
            raise MissingReference("n-best oracle needs the gold transcript")
        hyps = nbest(lattice, config.nbest_k, unique_words=True, **scales)
        return select_oracle(hyps, tokenize_transcript(gold)).text
    cn = filter_options(build_wcn(lattice, **scales), source.threshold)
    return flatten_wcn(cn, WcnRenderOptions(source.separator, source.threshold,
                                            config.option_order))


# --- templates ---------------------------------------------------------------

_SECTION = re.compile(r"^=== (\w+) ===$", re.M)


def parse_templates(text: str) -> dict[str, str]:
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    text = "\n".join(lines)
    parts = _SECTION.split(text)
    return {name: body.strip("\n") for name, body in zip(parts[1::2], parts[2::2])}


@lru_cache(maxsize=None)
def _packaged_templates() -> dict[str, str]:
    return parse_templates(resources.files("wcnslu").joinpath("templates/default.txt")
                           .read_text(encoding="utf-8"))


def load_templates(path: str | Path | None = None) -> dict[str, str]:
    if path is None:
        return dict(_packaged_templates())
    return parse_templates(Path(path).read_text(encoding="utf-8"))


def wcn_instruction_text(separator: str, templates: dict[str, str] | None = None) -> str:
    if separator not in SEPARATORS:
        raise ValueError(f"separator must be one of {SEPARATORS}")
    return (templates or _packaged_templates())["wcn_instruction"].format(separator=separator)


# --- prompt specs --------------------------------------------------------------

@dataclass(frozen=True)
class SqaTask:
    context: str


@dataclass(frozen=True)
class IcTask:
    labels: tuple[str, ...]

    def __post_init__(self):
        labels = tuple(self.labels)
        object.__setattr__(self, "labels", labels)
        if any(a >= b for a, b in zip(labels, labels[1:])):
            raise UnsortedLabels("intent labels must be unique and alphabetically sorted")


@dataclass(frozen=True)
class InContextExample:
    input: str
    answer: str
    context: str | None = None  # SQA only


@dataclass(frozen=True)
class PromptSpec:
    task: SqaTask | IcTask
    test_input: str
    wcn_instruction: str | None = None  # separator to explain, or None
    example: InContextExample | None = None
    templates: dict[str, str] | None = field(default=None, compare=False, hash=False)


def build_prompt(spec: PromptSpec) -> str:
    t = spec.templates or _packaged_templates()
    instruction = ""
    if spec.wcn_instruction is not None:
        instruction = wcn_instruction_text(spec.wcn_instruction, t) + "\n\n"
    if isinstance(spec.task, SqaTask):
        block = ""
        if spec.example is not None:
            if spec.example.context is None:
                raise ValueError("SQA in-context example needs a context")
            block = t["sqa_example"].format(context=spec.example.context,
                                            question=spec.example.input,
                                            answer=spec.example.answer) + "\n\n"
        return t["sqa"].format(wcn_instruction=instruction, example_block=block,
                               context=spec.task.context, question=spec.test_input)
    if isinstance(spec.task, IcTask):
        IcTask(spec.task.labels)
        block = ""
        if spec.example is not None:
            block = t["ic_example"].format(command=spec.example.input,
                                           answer=spec.example.answer) + "\n\n"
        return t["ic"].format(wcn_instruction=instruction, example_block=block,
                              labels=", ".join(spec.task.labels), command=spec.test_input)
    raise TypeError(f"unknown task {spec.task!r}")


def sorted_labels(labels: Sequence[str]) -> tuple[str, ...]:
    return tuple(sorted(set(labels)))
