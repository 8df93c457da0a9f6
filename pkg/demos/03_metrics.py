"""
Scoring transcripts and answers
===============================
"""

from wcnslu import edit_align, exact_match, match_intent, select_oracle, unigram_f1, wer
from wcnslu.lattice import ScoredHypothesis

ref = "how many total yards did denver gain".split()
hyp = "how many towel yards did denver game".split()
al = edit_align(hyp, ref)
print(al, f"WER={wer(hyp, ref):.2f}%")

# the oracle is the n-best entry closest to the reference
cands = [ScoredHypothesis(tuple(hyp), -1.0, ()),
         ScoredHypothesis(tuple("how many total yards did denver game".split()), -1.2, ())]
print("oracle:", select_oracle(cands, ref).text)

print(unigram_f1("the New England Patriots", "new england patriots"))
print(exact_match("Teach by rote.", "teach by rote"))
print(unigram_f1("in nineteen hundred", "nineteen hundred"))

labels = ["airfare", "flight", "flight_time"]
print(match_intent(" flight_time", labels), match_intent("It is a flight.", labels))
