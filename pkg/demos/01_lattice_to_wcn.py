"""
From a word lattice to a prompt-ready confusion network
=======================================================

Load the bundled sports-question lattice, look at its arc posteriors, build
the confusion network and flatten it at a few thresholds.
"""

from importlib import resources

from wcnslu import build_wcn, filter_options, flatten_wcn, parse_lattice, wcn_stats
from wcnslu.confnet import WcnRenderOptions, dump_wcn

slf = resources.files("wcnslu").joinpath("data/denver.slf").read_text()
lat = parse_lattice(slf)
print(f"{len(lat.nodes)} nodes, {len(lat.arcs)} arcs")

# each bin lists word:posterior pairs in lattice order
cn = build_wcn(lat)
print(dump_wcn(cn))

# the raw network keeps every option; a threshold keeps only confident ones
for t in (0.0, 0.2, 0.3, 0.5):
    kept = filter_options(cn, t)
    text = flatten_wcn(kept, WcnRenderOptions("|"))
    print(f"t={t:.1f}  {wcn_stats(kept)['options_per_word']:.3f} options/word  {text}")

# the slash separator reads the same way
print(flatten_wcn(filter_options(cn, 0.3), WcnRenderOptions("/")))
