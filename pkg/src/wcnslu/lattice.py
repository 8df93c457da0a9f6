"""Word lattices: SLF parsing, forward-backward posteriors, 1-best and n-best paths.

A lattice is a DAG whose arcs carry words and natural-log acoustic/LM weights.
Node 0 is the start node; every node without outgoing arcs is an end node.
Epsilon arcs (``W=!NULL`` in SLF) have ``word is None``.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, NamedTuple

EPSILON_SLF = "!NULL"
PROB_TOL = 1e-9


class LatticeError(ValueError):
    """Base class for lattice parse/validation failures."""


class MalformedHeader(LatticeError):
    pass


class DanglingArc(LatticeError):
    pass


class CycleDetected(LatticeError):
    pass


class NoPathToEnd(LatticeError):
    pass


class EmptyLattice(LatticeError):
    pass


class Node(NamedTuple):
    id: int
    time: float | None = None


class Arc(NamedTuple):
    id: int
    src: int
    dst: int
    word: str | None
    acoustic: float
    lm: float

    def weight(self, acoustic_scale: float = 1.0, lm_scale: float = 1.0) -> float:
        return acoustic_scale * self.acoustic + lm_scale * self.lm


class ScoredHypothesis(NamedTuple):
    words: tuple[str, ...]
    score: float
    arcs: tuple[int, ...] = ()

    @property
    def text(self) -> str:
        return " ".join(self.words)


def logaddexp(a: float, b: float) -> float:
    if a == -math.inf:
        return b
    if b == -math.inf:
        return a
    if a > b:
        return a + math.log1p(math.exp(b - a))
    return b + math.log1p(math.exp(a - b))


@dataclass(frozen=True)
class Lattice:
    """Validated, immutable word lattice.

    Build one with :func:`parse_lattice` or :meth:`Lattice.from_arcs`; both
    check acyclicity and arc endpoints and drop nodes unreachable from the start.
    """

    nodes: tuple[Node, ...]
    arcs: tuple[Arc, ...]
    start: int = 0

    def __post_init__(self):
        ids = {n.id for n in self.nodes}
        if len(ids) != len(self.nodes):
            raise MalformedHeader("duplicate node ids")
        if self.start not in ids:
            raise MalformedHeader(f"start node {self.start} not defined")
        arc_ids = {a.id for a in self.arcs}
        if len(arc_ids) != len(self.arcs):
            raise MalformedHeader("duplicate arc ids")
        for a in self.arcs:
            if a.src not in ids or a.dst not in ids:
                raise DanglingArc(f"arc J={a.id} references missing node "
                                  f"{a.src if a.src not in ids else a.dst}")
            if not (math.isfinite(a.acoustic) and math.isfinite(a.lm)):
                raise LatticeError(f"arc J={a.id} has a non-finite score")
        self.topo_order  # raises CycleDetected
        times = {n.id: n.time for n in self.nodes}
        for a in self.arcs:
            t0, t1 = times[a.src], times[a.dst]
            if t0 is not None and t1 is not None and t0 > t1:
                raise LatticeError(f"arc J={a.id} goes backwards in time")
        if self.arcs and not self.out_arcs[self.start]:
            raise NoPathToEnd("start node has no outgoing arcs")

    @classmethod
    def from_arcs(cls, arcs: Iterable[tuple], times: dict[int, float] | None = None,
                  start: int = 0) -> "Lattice":
        """Build a lattice from ``(src, dst, word, acoustic[, lm])`` tuples.

        Arc ids are assigned in iteration order; nodes are inferred.
        """
        built = []
        for i, spec in enumerate(arcs):
            src, dst, word, ac = spec[:4]
            lm = spec[4] if len(spec) > 4 else 0.0
            built.append(Arc(i, src, dst, word, float(ac), float(lm)))
        node_ids = {start} | {a.src for a in built} | {a.dst for a in built}
        if times:
            node_ids |= set(times)
        nodes = tuple(Node(n, (times or {}).get(n)) for n in sorted(node_ids))
        return cls(nodes, tuple(built), start).pruned()

    @cached_property
    def node_ids(self) -> tuple[int, ...]:
        return tuple(n.id for n in self.nodes)

    @cached_property
    def out_arcs(self) -> dict[int, tuple[Arc, ...]]:
        out: dict[int, list[Arc]] = {n: [] for n in self.node_ids}
        for a in self.arcs:
            out[a.src].append(a)
        return {n: tuple(v) for n, v in out.items()}

    @cached_property
    def in_arcs(self) -> dict[int, tuple[Arc, ...]]:
        inc: dict[int, list[Arc]] = {n: [] for n in self.node_ids}
        for a in self.arcs:
            inc[a.dst].append(a)
        return {n: tuple(v) for n, v in inc.items()}

    @cached_property
    def end_nodes(self) -> frozenset[int]:
        return frozenset(n for n in self.node_ids if not self.out_arcs[n])

    @cached_property
    def arc_by_id(self) -> dict[int, Arc]:
        return {a.id: a for a in self.arcs}

    @cached_property
    def topo_order(self) -> tuple[int, ...]:
        indeg = {n: len(self.in_arcs[n]) for n in self.node_ids}
        ready = [n for n in self.node_ids if indeg[n] == 0]
        heapq.heapify(ready)
        order = []
        while ready:
            n = heapq.heappop(ready)
            order.append(n)
            for a in self.out_arcs[n]:
                indeg[a.dst] -= 1
                if indeg[a.dst] == 0:
                    heapq.heappush(ready, a.dst)
        if len(order) != len(self.nodes):
            raise CycleDetected("lattice contains a cycle")
        return tuple(order)

    @cached_property
    def reachable_from(self) -> dict[int, int]:
        """Bitmask (over node index) of nodes reachable from each node, reflexive."""
        index = {n: i for i, n in enumerate(self.node_ids)}
        reach: dict[int, int] = {}
        for n in reversed(self.topo_order):
            mask = 1 << index[n]
            for a in self.out_arcs[n]:
                mask |= reach[a.dst]
            reach[n] = mask
        return reach

    @cached_property
    def node_index(self) -> dict[int, int]:
        return {n: i for i, n in enumerate(self.node_ids)}

    def reaches(self, a: int, b: int) -> bool:
        return bool(self.reachable_from[a] >> self.node_index[b] & 1)

    def pruned(self) -> "Lattice":
        """Drop nodes and arcs not reachable from the start node."""
        mask = self.reachable_from[self.start]
        keep = {n for n in self.node_ids if mask >> self.node_index[n] & 1}
        if len(keep) == len(self.nodes):
            return self
        return Lattice(tuple(n for n in self.nodes if n.id in keep),
                       tuple(a for a in self.arcs if a.src in keep), self.start)

    def paths(self) -> Iterable[tuple[Arc, ...]]:
        """Enumerate every start-to-end arc sequence. Exponential; for tests and tiny lattices."""
        def walk(n, prefix):
            if not self.out_arcs[n]:
                yield prefix
                return
            for a in self.out_arcs[n]:
                yield from walk(a.dst, prefix + (a,))
        yield from walk(self.start, ())


def _require_arcs(lat: Lattice) -> None:
    if not lat.arcs:
        raise EmptyLattice("lattice has no arcs")


# --- SLF ---------------------------------------------------------------------

def _fields(line: str, lineno: int) -> dict[str, str]:
    out = {}
    for tok in line.split():
        key, eq, value = tok.partition("=")
        if not eq:
            raise MalformedHeader(f"line {lineno}: expected key=value, got {tok!r}")
        out[key] = value
    return out


def parse_lattice(text: str) -> Lattice:
    """Parse the SLF subset: ``N=``/``L=`` header, ``I=`` node lines, ``J=`` arc lines."""
    header: dict[str, str] = {}
    nodes: list[Node] = []
    arcs: list[Arc] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        f = _fields(line, lineno)
        try:
            if "I" in f:
                t = f.get("t")
                nodes.append(Node(int(f["I"]), float(t) if t is not None else None))
            elif "J" in f:
                word = f["W"]
                arcs.append(Arc(int(f["J"]), int(f["S"]), int(f["E"]),
                                None if word == EPSILON_SLF else word,
                                float(f.get("a", 0.0)), float(f.get("l", 0.0))))
            else:
                header.update(f)
        except KeyError as e:
            raise MalformedHeader(f"line {lineno}: missing field {e.args[0]}") from None
        except ValueError as e:
            raise MalformedHeader(f"line {lineno}: {e}") from None
    try:
        n_nodes, n_arcs = int(header["N"]), int(header["L"])
    except (KeyError, ValueError):
        raise MalformedHeader("header must define integer N= and L=") from None
    if n_nodes != len(nodes) or n_arcs != len(arcs):
        raise MalformedHeader(f"header declares N={n_nodes} L={n_arcs}, "
                              f"found {len(nodes)} nodes and {len(arcs)} arcs")
    if n_nodes == 0:
        raise MalformedHeader("lattice has no nodes")
    return Lattice(tuple(nodes), tuple(arcs), 0).pruned()


def _fmt(x: float) -> str:
    return repr(float(x))


def render_lattice(lat: Lattice) -> str:
    """Debug serializer; :func:`parse_lattice` reads it back exactly."""
    lines = [f"N={len(lat.nodes)} L={len(lat.arcs)}"]
    for n in lat.nodes:
        lines.append(f"I={n.id}" + (f" t={_fmt(n.time)}" if n.time is not None else ""))
    for a in lat.arcs:
        w = EPSILON_SLF if a.word is None else a.word
        lines.append(f"J={a.id} S={a.src} E={a.dst} W={w} a={_fmt(a.acoustic)} l={_fmt(a.lm)}")
    return "\n".join(lines) + "\n"


# --- dynamic programming ------------------------------------------------------

def forward_backward(lat: Lattice, acoustic_scale: float = 1.0,
                     lm_scale: float = 1.0) -> tuple[dict[int, float], dict[int, float], float]:
    """Return (alpha, beta, logZ) in the log domain."""
    _require_arcs(lat)
    alpha = {n: -math.inf for n in lat.node_ids}
    beta = dict(alpha)
    alpha[lat.start] = 0.0
    for n in lat.topo_order:
        for a in lat.out_arcs[n]:
            alpha[a.dst] = logaddexp(alpha[a.dst], alpha[n] + a.weight(acoustic_scale, lm_scale))
    for n in reversed(lat.topo_order):
        if n in lat.end_nodes:
            beta[n] = 0.0
            continue
        for a in lat.out_arcs[n]:
            beta[n] = logaddexp(beta[n], beta[a.dst] + a.weight(acoustic_scale, lm_scale))
    return alpha, beta, beta[lat.start]


def path_logsum(lat: Lattice, acoustic_scale: float = 1.0, lm_scale: float = 1.0,
                 exclude: frozenset[int] = frozenset()) -> float:
    """Log of the summed weight of all start-to-end paths that avoid the ``exclude`` arc ids."""
    alpha = {n: -math.inf for n in lat.node_ids}
    alpha[lat.start] = 0.0
    total = -math.inf
    for n in lat.topo_order:
        if n in lat.end_nodes:
            total = logaddexp(total, alpha[n])
        for a in lat.out_arcs[n]:
            if a.id not in exclude:
                alpha[a.dst] = logaddexp(alpha[a.dst], alpha[n] + a.weight(acoustic_scale, lm_scale))
    return total


def arc_posteriors(lat: Lattice, acoustic_scale: float = 1.0,
                   lm_scale: float = 1.0) -> dict[int, float]:
    """Posterior probability of traversing each arc, keyed by arc id."""
    if acoustic_scale < 0 or lm_scale < 0:
        raise ValueError("scales must be nonnegative")
    alpha, beta, log_z = forward_backward(lat, acoustic_scale, lm_scale)
    post = {}
    for a in lat.arcs:
        lp = alpha[a.src] + a.weight(acoustic_scale, lm_scale) + beta[a.dst] - log_z
        post[a.id] = min(1.0, math.exp(lp))
    return post


def path_score(lat: Lattice, arc_ids: Iterable[int], acoustic_scale: float = 1.0,
               lm_scale: float = 1.0) -> float:
    """Combined weight of an arc sequence, summed in path order."""
    return math.fsum(lat.arc_by_id[i].weight(acoustic_scale, lm_scale) for i in arc_ids)


def _path_key(score: float, words: tuple, arcs: tuple) -> tuple:
    return (-score, words, arcs)


def _best_suffixes(lat: Lattice, acoustic_scale: float, lm_scale: float) -> dict[int, tuple]:
    # best[n] = (score, words, arc_ids) of the best completion from n
    best: dict[int, tuple] = {}
    for n in reversed(lat.topo_order):
        if n in lat.end_nodes:
            best[n] = (0.0, (), ())
            continue
        cands = []
        for a in lat.out_arcs[n]:
            s, w, ids = best[a.dst]
            words = w if a.word is None else (a.word,) + w
            cands.append((s + a.weight(acoustic_scale, lm_scale), words, (a.id,) + ids))
        best[n] = min(cands, key=lambda c: _path_key(*c))
    return best


def best_path(lat: Lattice, acoustic_scale: float = 1.0,
              lm_scale: float = 1.0) -> ScoredHypothesis:
    """Highest-weight path; ties go to the smaller word sequence, then arc-id sequence."""
    _require_arcs(lat)
    _, words, ids = _best_suffixes(lat, acoustic_scale, lm_scale)[lat.start]
    return ScoredHypothesis(words, path_score(lat, ids, acoustic_scale, lm_scale), ids)


def nbest(lat: Lattice, k: int, acoustic_scale: float = 1.0, lm_scale: float = 1.0,
          unique_words: bool = False) -> list[ScoredHypothesis]:
    """Top-``k`` paths by descending weight.

    Best-first search over path prefixes, ranked by prefix weight plus the exact
    best completion weight, so complete paths pop in the same total order that
    :func:`best_path` uses.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    _require_arcs(lat)
    suffix = _best_suffixes(lat, acoustic_scale, lm_scale)

    def entry(prefix_score, prefix_words, prefix_arcs, node):
        s, w, ids = suffix[node]
        key = _path_key(prefix_score + s, prefix_words + w, prefix_arcs + ids)
        return (key, prefix_score, prefix_words, prefix_arcs, node)

    heap = [entry(0.0, (), (), lat.start)]
    out: list[ScoredHypothesis] = []
    seen: set[tuple[str, ...]] = set()
    while heap and len(out) < k:
        _, ps, pw, pa, node = heapq.heappop(heap)
        if node in lat.end_nodes:
            if unique_words:
                if pw in seen:
                    continue
                seen.add(pw)
            out.append(ScoredHypothesis(pw, path_score(lat, pa, acoustic_scale, lm_scale), pa))
            continue
        for a in lat.out_arcs[node]:
            words = pw if a.word is None else pw + (a.word,)
            heapq.heappush(heap, entry(ps + a.weight(acoustic_scale, lm_scale), words,
                                       pa + (a.id,), a.dst))
    return out
