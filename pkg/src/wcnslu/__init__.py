"""Word confusion networks from ASR lattices, rendered for LLM prompts, plus an SLU eval harness."""

from .confnet import (ConfusionNetwork, WcnOption, WcnRenderOptions, build_wcn, filter_options,
                      flatten_wcn, render_wcn, wcn_stats)
from .lattice import (Lattice, ScoredHypothesis, arc_posteriors, best_path, nbest, parse_lattice,
                      render_lattice)
from .metrics import (edit_align, exact_match, match_intent, normalize_answer, select_oracle,
                      unigram_f1, wer)
from .prompting import PromptSpec, TranscriptSource, build_prompt, render_transcript

__version__ = "0.1.0"
