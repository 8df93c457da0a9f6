import math
import sys
from importlib import resources
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from wcnslu.lattice import Lattice, parse_lattice  # noqa: E402

DATA = Path(str(resources.files("wcnslu").joinpath("data")))
FIXTURES = DATA / "fixtures"


@pytest.fixture
def denver_lattice() -> Lattice:
    return parse_lattice((DATA / "denver.slf").read_text())


def diamond(p_game=0.4, p_gain=0.6) -> Lattice:
    return Lattice.from_arcs([(0, 1, "game", math.log(p_game)), (0, 1, "gain", math.log(p_gain))])


def chain(*words) -> Lattice:
    return Lattice.from_arcs([(i, i + 1, w, 0.0) for i, w in enumerate(words)])


LADDER_WORDS = ("show", "me", "the", "cheapest", "flights", "from", "boston", "today")
LADDER_RIVALS = ("so", "may", "a", "cheap", "flight", "for", "austin", "to")


def ladder(level: int, n: int = 8) -> Lattice:
    """Chain over LADDER_WORDS where the first ``level`` slots also carry a rival.

    Each rival outscores its gold word (0.55 vs 0.45), so 1-best WER and the
    filtered options-per-word both grow with ``level``.
    """
    specs = []
    for i, w in enumerate(LADDER_WORDS[:n]):
        if i < level:
            specs.append((i, i + 1, w, math.log(0.45)))
            specs.append((i, i + 1, LADDER_RIVALS[i], math.log(0.55)))
        else:
            specs.append((i, i + 1, w, 0.0))
    return Lattice.from_arcs(specs)
