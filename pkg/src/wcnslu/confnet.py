"""Word confusion networks built from lattice arc posteriors.

Construction is a consensus-style clustering over word arcs.  Two clusters may
merge only when no lattice path passes through both (they are *incomparable*
in the path order), which keeps the cluster graph acyclic: its topological
order is the bin order, and every lattice path crosses each bin at most once.

Merging happens in two passes:

1. same-word clusters whose spans overlap;
2. any overlapping clusters, pivoting on the highest-posterior cluster first.

Spans come from node times when every node has one, otherwise from the
longest word-count distance of each node from the start.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple

from .lattice import EmptyLattice, Lattice, arc_posteriors, path_logsum

BIN_SUM_TOL = 1e-6
THRESHOLD_TOL = 1e-9  # posteriors carry log-domain rounding
EPSILON_TEXT = "<eps>"
SEPARATORS = ("/", "|")


class EpsilonPresent(ValueError):
    """Raised when an operation needs a network with null options removed."""


class EmptyNetwork(ValueError):
    pass


class WcnOption(NamedTuple):
    word: str | None  # None is the epsilon / null alternative
    posterior: float


@dataclass(frozen=True)
class ConfusionNetwork:
    """Ordered bins of competing word options.

    Options in a bin keep lattice order: ordered by the smallest id of the
    arcs that produced them, with the epsilon option last.  Use
    :meth:`by_posterior` for the posterior ranking.
    """

    bins: tuple[tuple[WcnOption, ...], ...]

    def __len__(self) -> int:
        return len(self.bins)

    @property
    def has_epsilon(self) -> bool:
        return any(o.word is None for b in self.bins for o in b)

    def by_posterior(self) -> "ConfusionNetwork":
        return ConfusionNetwork(tuple(tuple(_rank(b)) for b in self.bins))

    def best_words(self) -> tuple[str, ...]:
        """Consensus hypothesis: top option of each bin, skipping null winners."""
        out = []
        for b in self.bins:
            top = _rank(b)[0]
            if top.word is not None:
                out.append(top.word)
        return tuple(out)


def _rank(options: Iterable[WcnOption]) -> list[WcnOption]:
    return sorted(options, key=lambda o: (-o.posterior, o.word is None, o.word or ""))


# --- construction ---------------------------------------------------------------

def _node_positions(lat: Lattice) -> dict[int, float]:
    if all(n.time is not None for n in lat.nodes):
        return {n.id: float(n.time) for n in lat.nodes}
    depth = {n: 0 for n in lat.node_ids}
    for n in lat.topo_order:
        for a in lat.out_arcs[n]:
            step = 0 if a.word is None else 1
            depth[a.dst] = max(depth[a.dst], depth[n] + step)
    return {n: float(d) for n, d in depth.items()}


def _overlap(s1: tuple[float, float], s2: tuple[float, float]) -> float:
    """Overlap length of two spans; zero-width spans overlap if they touch the interior."""
    lo, hi = max(s1[0], s2[0]), min(s1[1], s2[1])
    if hi > lo:
        return hi - lo
    if lo == hi and (s1[0] < lo < s1[1] or s2[0] < lo < s2[1] or s1 == s2):
        return 0.0
    return -1.0


class _Cluster:
    __slots__ = ("id", "arcs", "span", "mass", "words")

    def __init__(self, cid, arc, span, post):
        self.id = cid
        self.arcs = [arc]
        self.span = span
        self.mass = post
        self.words = {arc.word}


class _Clustering:
    """Clusters of word arcs with transitive precedence maintained incrementally."""

    def __init__(self, lat: Lattice, post: dict[int, float]):
        pos = _node_positions(lat)
        words = [a for a in lat.arcs if a.word is not None]
        self.post = post
        self.clusters = {a.id: _Cluster(a.id, a, (pos[a.src], pos[a.dst]), post[a.id])
                         for a in words}
        # after[c]: clusters some path visits after c; before[c]: the converse
        self.after = {a.id: set() for a in words}
        self.before = {a.id: set() for a in words}
        for x in words:
            for y in words:
                if x.id != y.id and lat.reaches(x.dst, y.src):
                    self.after[x.id].add(y.id)
                    self.before[y.id].add(x.id)

    def comparable(self, c1: int, c2: int) -> bool:
        return c1 == c2 or c2 in self.after[c1] or c2 in self.before[c1]

    def merge(self, keep: int, gone: int) -> None:
        a, b = self.clusters[keep], self.clusters.pop(gone)
        a.arcs.extend(b.arcs)
        a.span = (min(a.span[0], b.span[0]), max(a.span[1], b.span[1]))
        a.mass += b.mass
        a.words |= b.words
        after = (self.after.pop(gone) | self.after[keep]) - {keep, gone}
        before = (self.before.pop(gone) | self.before[keep]) - {keep, gone}
        for c in self.after.values():
            c.discard(gone)
        for c in self.before.values():
            c.discard(gone)
        self.after[keep], self.before[keep] = after, before
        for x in before:
            self.after[x] |= after | {keep}
        for y in after:
            self.before[y] |= before | {keep}

    def order(self) -> list[_Cluster]:
        """Topological order of clusters; ties broken by mean span, then smallest arc id."""
        def key(c):
            mid = sum(self.post[a.id] * (c.span[0] + c.span[1]) / 2 for a in c.arcs)
            return (mid / c.mass if c.mass > 0 else c.span[0], min(a.id for a in c.arcs))

        remaining = set(self.clusters)
        emitted: set[int] = set()
        out = []
        while remaining:
            ready = [c for c in remaining if self.before[c] <= emitted]
            nxt = min(ready, key=lambda c: key(self.clusters[c]))
            out.append(self.clusters[nxt])
            emitted.add(nxt)
            remaining.discard(nxt)
        return out


def _try_merges(cl: _Clustering, same_word: bool) -> None:
    changed = True
    while changed:
        changed = False
        pivots = sorted(cl.clusters.values(), key=lambda c: (-c.mass, c.id))
        for pivot in pivots:
            if pivot.id not in cl.clusters:
                continue
            for other in sorted(cl.clusters.values(), key=lambda c: (-c.mass, c.id)):
                if other.id == pivot.id or cl.comparable(pivot.id, other.id):
                    continue
                if same_word and not (pivot.words & other.words):
                    continue
                if _overlap(pivot.span, other.span) < 0:
                    continue
                cl.merge(pivot.id, other.id)
                changed = True


def build_wcn(lat: Lattice, post: dict[int, float] | None = None, *,
              acoustic_scale: float = 1.0, lm_scale: float = 1.0) -> ConfusionNetwork:
    """Collapse a lattice into a confusion network.

    ``post`` defaults to :func:`arc_posteriors` at the given scales, which must
    match the scales passed here.  A bin gets an epsilon option carrying the
    mass of the paths that skip it, whenever such paths exist.
    """
    if not lat.arcs:
        raise EmptyLattice("lattice has no arcs")
    if post is None:
        post = arc_posteriors(lat, acoustic_scale, lm_scale)
    cl = _Clustering(lat, post)
    _try_merges(cl, same_word=True)
    _try_merges(cl, same_word=False)

    log_z = path_logsum(lat, acoustic_scale, lm_scale)
    bins = []
    for c in cl.order():
        mass: dict[str, float] = {}
        first: dict[str, int] = {}
        for a in sorted(c.arcs, key=lambda a: a.id):
            mass[a.word] = mass.get(a.word, 0.0) + post[a.id]
            first.setdefault(a.word, a.id)
        options = [WcnOption(w, mass[w]) for w in sorted(mass, key=first.__getitem__)]
        # null mass is the weight of the paths that skip this bin, computed directly
        # rather than as 1 - sum(words) so tiny skip probabilities survive
        skip = path_logsum(lat, acoustic_scale, lm_scale, frozenset(a.id for a in c.arcs))
        if skip > -math.inf:
            options.append(WcnOption(None, min(1.0, math.exp(skip - log_z))))
        bins.append(tuple(options))
    return ConfusionNetwork(tuple(bins))


# --- filtering and rendering -------------------------------------------------

def filter_options(cn: ConfusionNetwork, threshold: float) -> ConfusionNetwork:
    """Delete null options, then drop words whose posterior is below ``threshold``
    (up to ``THRESHOLD_TOL``).

    A bin whose words all fall below the threshold keeps its single best word;
    a bin that held only the null option disappears.  Posteriors are not
    renormalized.
    """
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must lie in [0, 1]")
    bins = []
    for b in cn.bins:
        words = [o for o in b if o.word is not None]
        if not words:
            continue
        kept = [o for o in words if o.posterior >= threshold - THRESHOLD_TOL]
        if not kept:
            kept = [_rank(words)[0]]
        bins.append(tuple(kept))
    return ConfusionNetwork(tuple(bins))


@dataclass(frozen=True)
class WcnRenderOptions:
    separator: str = "|"
    threshold: float = 0.0
    order: str = "lattice"  # or "posterior"

    def __post_init__(self):
        if self.separator not in SEPARATORS:
            raise ValueError(f"separator must be one of {SEPARATORS}, got {self.separator!r}")
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError("threshold must lie in [0, 1]")
        if self.order not in ("lattice", "posterior"):
            raise ValueError("order must be 'lattice' or 'posterior'")


def flatten_wcn(cn: ConfusionNetwork, opts: WcnRenderOptions = WcnRenderOptions()) -> str:
    """Render a filtered network as ``word word|word word``.  ``opts.threshold`` is not applied here."""
    if cn.has_epsilon:
        raise EpsilonPresent("filter the network before flattening")
    parts = []
    for b in cn.bins:
        options = _rank(b) if opts.order == "posterior" else b
        parts.append(opts.separator.join(o.word for o in options))
    return " ".join(parts)


def render_wcn(lat: Lattice, opts: WcnRenderOptions = WcnRenderOptions(), *,
               acoustic_scale: float = 1.0, lm_scale: float = 1.0) -> str:
    """Lattice to LLM-ready string: build, filter at ``opts.threshold``, flatten."""
    cn = build_wcn(lat, acoustic_scale=acoustic_scale, lm_scale=lm_scale)
    return flatten_wcn(filter_options(cn, opts.threshold), opts)


def wcn_stats(cn: ConfusionNetwork) -> dict:
    if not cn.bins:
        raise EmptyNetwork("network has no bins")
    if cn.has_epsilon:
        raise EpsilonPresent("filter the network before computing statistics")
    sizes = [len(b) for b in cn.bins]
    return {"options_per_word": sum(sizes) / len(sizes), "bins": len(sizes),
            "max_bin_size": max(sizes)}


# --- debug serialization ------------------------------------------------------

def dump_wcn(cn: ConfusionNetwork) -> str:
    """One bin per line, ``word:posterior`` pairs with 6 decimals."""
    lines = []
    for b in cn.bins:
        lines.append(" ".join(f"{EPSILON_TEXT if o.word is None else o.word}:{o.posterior:.6f}"
                              for o in b))
    return "\n".join(lines) + ("\n" if lines else "")


def load_wcn(text: str) -> ConfusionNetwork:
    bins = []
    for line in text.splitlines():
        if not line.strip():
            continue
        opts = []
        for tok in line.split():
            word, _, p = tok.rpartition(":")
            opts.append(WcnOption(None if word == EPSILON_TEXT else word, float(p)))
        bins.append(tuple(opts))
    return ConfusionNetwork(tuple(bins))
