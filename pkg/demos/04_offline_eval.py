"""
An offline evaluation run
=========================

The bundled fixtures run end to end with the heuristic mock backend.  The
same settings work against a real endpoint through ``HttpBackend``.
"""

import tempfile
from importlib import resources
from pathlib import Path

from wcnslu.harness import (EvalSettings, error_split, load_dataset, overlap_responder,
                            run_eval, wer_bin_report)
from wcnslu.llm import LLMClient, MockBackend, ReplayBackend, ResponseCache
from wcnslu.prompting import TranscriptSource

fixtures = Path(str(resources.files("wcnslu").joinpath("data/fixtures")))
test = load_dataset(fixtures / "sqa.jsonl", "sqa")
train = load_dataset(fixtures / "sqa_train.jsonl", "sqa")
sources = tuple(TranscriptSource.parse(s) for s in ("gt", "1best", "oracle", "wcn:|:0.3"))

cache_path = Path(tempfile.mkdtemp()) / "cache.jsonl"
cache = ResponseCache(cache_path)
client = LLMClient(MockBackend(responder=overlap_responder), cache)
settings = EvalSettings(task="sqa", sources=sources, shots=1, seed=0)
records, summary = run_eval(test, settings, client, train)

for src, row in summary.items():
    print(f"{src:<10} F1={row['f1']:.3f} EM={row['em']:.3f} WER={row['mean_question_wer']:.1f}")

# a single rendered test input per source
for r in records[:4]:
    print(f"{r.source:<10} {r.rendered_input}")

for row in error_split(records):
    print(row["source"], row["subset"], row["count"], round(row.get("f1") or 0.0, 3))

print(len(wer_bin_report(records)), "populated WER bins")

# the cache replays the run without the backend
replayed, _ = run_eval(test, settings, LLMClient(ReplayBackend(cache), cache), train)
print("replay identical:", replayed == records)
