"""
Posteriors, 1-best and n-best
=============================
"""

import math
from importlib import resources

from wcnslu import arc_posteriors, best_path, nbest, parse_lattice

lat = parse_lattice(resources.files("wcnslu").joinpath("data/denver.slf").read_text())

post = arc_posteriors(lat)
for arc in lat.arcs:
    if arc.word is not None and post[arc.id] < 0.99:
        print(f"{arc.src:>2} -> {arc.dst:<2} {arc.word:<6} {post[arc.id]:.3f}")

# Viterbi picks the single heaviest path, even when a split word has more total mass
print("1-best:", best_path(lat).text)

for hyp in nbest(lat, 5, unique_words=True):
    print(f"{hyp.score:8.3f}  p={math.exp(hyp.score):.3f}  {hyp.text}")

# scaling the LM part changes the ranking
print("lm x3 :", best_path(lat, acoustic_scale=1.0, lm_scale=3.0).text)
