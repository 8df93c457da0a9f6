"""Regenerate the bundled fixture lattices and datasets under src/wcnslu/data/.

Each utterance is a list of segments.  A plain string is a certain word; a list
of ``(text, prob)`` pairs is a confusion set where ``text`` may be several words
(an alternative segmentation) or ``""`` (a deletion, written as a !NULL arc).
Log-probabilities are split 70/30 between the acoustic and LM fields, written
at full precision, so the combined weight at unit scales is the
log-probability itself.

    python tools/make_fixtures.py
"""

import json
import math
from pathlib import Path

DATA = Path(__file__).resolve().parents[1] / "src" / "wcnslu" / "data"
FIX = DATA / "fixtures"
STEP = 0.4


def lattice_from_segments(segments):
    nodes = {0: 0.0}
    arcs = []
    next_node = 1
    boundary = 0
    t = 0.0
    for seg in segments:
        alts = [(seg, 1.0)] if isinstance(seg, str) else seg
        end = next_node
        next_node += 1
        nodes[end] = round(t + STEP, 3)
        for text, prob in alts:
            words = text.split()
            lp = math.log(prob)
            ac, lm = 0.7 * lp, lp - 0.7 * lp
            if not words:
                arcs.append((boundary, end, "!NULL", ac, lm))
                continue
            src = boundary
            for i, w in enumerate(words):
                if i == len(words) - 1:
                    dst = end
                else:
                    dst = next_node
                    next_node += 1
                    nodes[dst] = round(t + STEP * (i + 1) / len(words), 3)
                arcs.append((src, dst, w, ac if i == 0 else 0.0, lm if i == 0 else 0.0))
                src = dst
        boundary = end
        t += STEP
    return nodes, arcs


def slf(nodes, arcs, comment=None):
    lines = []
    if comment:
        lines.append(f"# {comment}")
    lines.append(f"N={len(nodes)} L={len(arcs)}")
    for n in sorted(nodes):
        lines.append(f"I={n} t={nodes[n]:.2f}")
    for j, (s, e, w, a, l) in enumerate(arcs):
        lines.append(f"J={j} S={s} E={e} W={w} a={a!r} l={l!r}")
    return "\n".join(lines) + "\n"


def denver():
    """The worked example: 'total' carries the most mass but is split over two
    time alignments, so the Viterbi 1-best picks 'towel'."""
    L = math.log
    nodes = {0: 0.0, 1: 0.25, 2: 0.55, 3: 0.95, 4: 1.4, 5: 1.6, 6: 2.1, 7: 2.5, 8: 1.0}
    arcs = [(0, 1, "how", 0.0, 0.0), (1, 2, "many", 0.0, 0.0),
            (2, 3, "towel", L(.25), 0.0), (2, 3, "two", L(.15), 0.0),
            (2, 3, "total", L(.22), 0.0), (2, 8, "total", L(.18), 0.0),
            (2, 3, "tow", L(.12), 0.0), (2, 3, "tall", L(.08), 0.0),
            (3, 4, "yards", 0.0, 0.0), (8, 4, "yards", 0.0, 0.0),
            (4, 5, "did", 0.0, 0.0), (5, 6, "denver", 0.0, 0.0),
            (6, 7, "game", L(.45), 0.0), (6, 7, "gain", L(.55), 0.0)]
    return slf(nodes, arcs, "how many total yards did denver gain")


C = lambda *pairs: list(pairs)  # noqa: E731

SQA = [
    ("denver", "Denver's defense held New England to 240 total yards. Denver gained 194 yards in the game.",
     "how many total yards did denver gain?", ["194"], None),
    ("teachers", "Montessori teachers guide children through hands-on work. These teachers do not teach by rote.",
     "what do these teachers not do?", ["teach by rote"],
     ["what", "do", "these", "teachers", C(("not", .62), ("knocked", .2), ("knock", .18)),
      C(("do", .7), ("to", .2), ("due", .1))]),
    ("century", "Tesla wrote several essays. His article on increasing human energy was published in Century Magazine in nineteen hundred.",
     "when was his article published in century magazine?", ["nineteen hundred"],
     [C(("one", .55), ("when", .45)), "was", "his", "article", "published", "in",
      C(("century", .6), ("sanctary", .4)), C(("magaz", .5), ("magazine", .4), ("", .1))]),
    ("afc", "Denver beat the New England Patriots in the AFC Championship. They then won the Super Bowl.",
     "who did denver beat in the afc championship?", ["the new england patriots", "new england patriots"],
     ["who", "did", C(("them for", .55), ("denver", .45)), C(("beating", .5), ("beat", .3), ("beat in", .2)),
      C(("the", .6), ("in the", .4)), C(("a f sea", .4), ("aye f i see", .3), ("afc", .3)),
      C(("champions", .55), ("championship", .45))]),
    ("amazon", "The Amazon rainforest covers much of the Amazon basin. The basin spans seven million square kilometres.",
     "how large is the amazon basin?", ["seven million square kilometres"],
     ["how", C(("large", .7), ("march", .3)), "is", "the", C(("amazon", .8), ("amazing", .2)), "basin"]),
    ("normans", "The Normans were descended from Norse raiders. They settled in Normandy in the tenth century.",
     "in what century did the normans settle in normandy?", ["tenth century", "tenth"],
     ["in", "what", "century", "did", "the", C(("normans", .45), ("norman", .35), ("nor mans", .2)),
      "settle", "in", "normandy"]),
    ("steam", "James Watt improved the steam engine. His separate condenser greatly reduced wasted heat.",
     "what did james watt improve?", ["the steam engine", "steam engine"],
     ["what", "did", C(("james", .9), ("jane's", .1)), C(("what", .55), ("watt", .45)),
      C(("improve", .65), ("approve", .35))]),
    ("oxygen", "Oxygen was discovered by Carl Wilhelm Scheele. Joseph Priestley published his findings first.",
     "who discovered oxygen?", ["carl wilhelm scheele"],
     ["who", C(("discovered", .75), ("this covered", .25)), C(("oxygen", .6), ("ox again", .4))]),
    ("nile", "The Nile flows north into the Mediterranean Sea. It is about six thousand kilometres long.",
     "where does the nile flow into?", ["mediterranean sea", "the mediterranean sea"],
     ["where", "does", "the", C(("nile", .5), ("nail", .3), ("mile", .2)), "flow", "into"]),
    ("victoria", "Queen Victoria reigned for sixty three years. Her reign began in eighteen thirty seven.",
     "when did queen victoria's reign begin?", ["eighteen thirty seven"],
     ["when", "did", "queen", C(("victoria's", .6), ("victoria", .4)), C(("rain", .5), ("reign", .5)),
      C(("begin", .8), ("began", .2))]),
    ("piano", "The piano was invented by Bartolomeo Cristofori. He worked in Florence around seventeen hundred.",
     "who invented the piano?", ["bartolomeo cristofori"],
     ["who", "invented", "the", C(("piano", .85), ("pie and oh", .15))]),
    ("mercury", "Mercury is the smallest planet. It orbits closest to the sun.",
     "which planet is the smallest?", ["mercury"],
     ["which", C(("planet", .55), ("plan it", .45)), "is", "the", "smallest"]),
    ("everest", "Mount Everest rises on the border of Nepal and China. Its summit is the highest point on Earth.",
     "what is the highest point on earth?", ["mount everest", "everest"],
     ["what", "is", "the", C(("highest", .5), ("high", .3), ("hi", .2)), "point", "on", "earth"]),
    ("penicillin", "Alexander Fleming discovered penicillin in nineteen twenty eight. It was the first antibiotic.",
     "what did alexander fleming discover?", ["penicillin"],
     ["what", "did", "alexander", C(("flaming", .6), ("fleming", .4)), C(("discover", .7), ("this cover", .3))]),
    ("rome", "Rome was founded on the Palatine Hill. Legend credits Romulus with its founding.",
     "who is credited with founding rome?", ["romulus"],
     ["who", "is", C(("credited", .65), ("created", .35)), "with", C(("founding", .5), ("finding", .5)),
      C(("rome", .7), ("roam", .3))]),
    ("pacific", "The Pacific is the largest ocean. It covers about a third of the Earth's surface.",
     "what is the largest ocean?", ["the pacific", "pacific"],
     ["what", "is", "the", "largest", C(("ocean", .9), ("motion", .1))]),
    ("gutenberg", "Johannes Gutenberg introduced the printing press to Europe. His press used movable metal type.",
     "what kind of type did gutenberg's press use?", ["movable metal type"],
     ["what", C(("kind", .8), ("kinda", .2)), "of", "type", "did", C(("gutenberg's", .45), ("good and bergs", .3),
                                                                   ("gutenberg", .25)), "press", "use"]),
    ("beethoven", "Beethoven composed nine symphonies. He became deaf late in life.",
     "how many symphonies did beethoven compose?", ["nine"],
     ["how", "many", C(("symphonies", .75), ("symphony's", .25)), "did", C(("beethoven", .55), ("bait oven", .45)),
      "compose"]),
    ("canberra", "Canberra is the capital of Australia. It was chosen as a compromise between Sydney and Melbourne.",
     "what is the capital of australia?", ["canberra"],
     ["what", "is", "the", C(("capital", .6), ("capitol", .4)), "of", "australia"]),
    ("darwin", "Charles Darwin sailed on the Beagle. His voyage lasted five years.",
     "how long did darwin's voyage last?", ["five years"],
     ["how", "long", "did", C(("darwin's", .5), ("darwin", .3), ("darling", .2)), C(("voyage", .6), ("boy age", .4)),
      "last"]),
    ("silk", "The Silk Road linked China with the Mediterranean. Merchants traded silk and spices along it.",
     "what did merchants trade along the silk road?", ["silk and spices"],
     ["what", "did", C(("merchants", .7), ("merchant", .3)), "trade", "along", "the",
      C(("silk", .55), ("sulk", .45)), "road"]),
    ("apollo", "Apollo eleven landed on the Moon in nineteen sixty nine. Neil Armstrong was the first to walk there.",
     "who first walked on the moon?", ["neil armstrong"],
     ["who", "first", C(("walked", .6), ("walk", .4)), "on", "the", C(("moon", .95), ("mood", .05))]),
]

SQA_TRAIN = [
    ("train-light", "Light travels at about three hundred thousand kilometres per second. Nothing travels faster.",
     "how fast does light travel?", ["three hundred thousand kilometres per second"],
     ["how", "fast", "does", C(("light", .6), ("right", .4)), "travel"]),
    ("train-paris", "The Eiffel Tower stands in Paris. It was completed in eighteen eighty nine.",
     "when was the eiffel tower completed?", ["eighteen eighty nine"],
     ["when", "was", "the", C(("eiffel", .55), ("i fell", .45)), "tower", "completed"]),
    ("train-shakespeare", "Shakespeare wrote Hamlet around sixteen hundred. The play is set in Denmark.",
     "where is hamlet set?", ["denmark"],
     ["where", "is", C(("hamlet", .7), ("ham let", .3)), "set"]),
]

LABELS = ["abbreviation", "aircraft", "airfare", "airline", "airport", "capacity", "city",
          "day_name", "distance", "flight", "flight_no", "flight_time", "ground_fare",
          "ground_service", "meal", "quantity", "restriction"]

IC = [
    ("ic01", "show me flights from boston to denver", "flight",
     ["show", "me", C(("flights", .6), ("lights", .4)), "from", "boston", "to", "denver"]),
    ("ic02", "what is the fare from dallas to atlanta", "airfare",
     ["what", "is", "the", C(("fair", .55), ("fare", .45)), "from", "dallas", "to", "atlanta"]),
    ("ic03", "what does the abbreviation ua mean", "abbreviation",
     ["what", "does", "the", "abbreviation", C(("u a", .5), ("ua", .3), ("you a", .2)), "mean"]),
    ("ic04", "which airline flies to pittsburgh", "airline",
     ["which", C(("airline", .7), ("air line", .3)), "flies", "to", "pittsburgh"]),
    ("ic05", "what ground transportation is available in denver", "ground_service",
     ["what", C(("ground", .65), ("round", .35)), "transportation", "is", "available", "in", "denver"]),
    ("ic06", "what type of aircraft is used on this flight", "aircraft",
     ["what", "type", "of", C(("aircraft", .6), ("air craft", .4)), "is", "used", "on", "this", "flight"]),
    ("ic07", "how far is the airport from downtown", "distance",
     ["how", C(("far", .7), ("fa", .3)), "is", "the", "airport", "from", "downtown"]),
    ("ic08", "what meal is served on the morning flight", "meal",
     ["what", C(("meal", .5), ("mail", .5)), "is", "served", "on", "the", "morning", "flight"]),
    ("ic09", "how many passengers does a boeing seven four seven hold", "capacity",
     ["how", "many", C(("passengers", .8), ("passenger", .2)), "does", "a", "boeing", "seven", "four",
      "seven", "hold"]),
    ("ic10", "what is the flight number of the last flight to boston", "flight_no",
     ["what", "is", "the", "flight", C(("number", .75), ("numbers", .25)), "of", "the", "last", "flight",
      "to", "boston"]),
    ("ic11", "what time does the flight to oakland leave", "flight_time",
     ["what", C(("time", .6), ("dime", .4)), "does", "the", "flight", "to", C(("oakland", .5), ("auckland", .5)),
      "leave"]),
    ("ic12", "how much is a taxi fare in washington", "ground_fare",
     ["how", "much", "is", "a", C(("taxi", .7), ("tax he", .3)), C(("fare", .5), ("fair", .5)), "in",
      "washington"]),
    ("ic13", "which airport is closest to the city center", "airport",
     ["which", C(("airport", .85), ("air port", .15)), "is", "closest", "to", "the", "city", "center"]),
    ("ic14", "what cities does delta serve", "city",
     ["what", C(("cities", .6), ("city's", .4)), "does", C(("delta", .7), ("del to", .3)), "serve"]),
    ("ic15", "what are the restrictions on the cheapest fare", "restriction",
     ["what", "are", "the", C(("restrictions", .55), ("restriction", .45)), "on", "the", "cheapest", "fare"]),
    ("ic16", "how many flights go to san francisco", "quantity",
     ["how", "many", C(("flights", .5), ("fights", .5)), "go", "to", "san", "francisco"]),
    ("ic17", "list flights on saturday from miami", "flight",
     [C(("list", .6), ("least", .4)), "flights", "on", "saturday", "from", "miami"]),
    ("ic18", "show me the cheapest airfare to seattle", "airfare",
     ["show", "me", "the", "cheapest", C(("airfare", .5), ("air fair", .5)), "to", "seattle"]),
    ("ic19", "i need a flight tomorrow to chicago", "flight",
     ["i", "need", "a", C(("flight", .55), ("fight", .45)), "tomorrow", "to", "chicago"]),
    ("ic20", "what day of the week does the flight leave", "day_name",
     ["what", C(("day", .7), ("they", .3)), "of", "the", "week", "does", "the", "flight", "leave"]),
]

IC_TRAIN = [
    ("ic-train1", "list the airlines that fly to boston", "airline",
     ["list", "the", C(("airlines", .6), ("air lines", .4)), "that", "fly", "to", "boston"]),
]


def write_lattice(name, segments, gold):
    if segments is None:
        return "../denver.slf"
    nodes, arcs = lattice_from_segments(segments)
    rel = f"lattices/{name}.slf"
    (FIX / rel).write_text(slf(nodes, arcs, gold), encoding="utf-8")
    return rel


def main():
    (FIX / "lattices").mkdir(parents=True, exist_ok=True)
    (DATA / "denver.slf").write_text(denver(), encoding="utf-8")

    def sqa_rows(items):
        for ex_id, ctx, q, answers, segs in items:
            yield {"id": ex_id, "context": ctx, "question": q, "answers": answers,
                   "lattice": write_lattice(ex_id, segs, q)}

    def ic_rows(items):
        for ex_id, cmd, intent, segs in items:
            yield {"id": ex_id, "command": cmd, "intent": intent,
                   "lattice": write_lattice(ex_id, segs, cmd)}

    for name, rows in (("sqa.jsonl", sqa_rows(SQA)), ("sqa_train.jsonl", sqa_rows(SQA_TRAIN)),
                       ("ic.jsonl", ic_rows(IC)), ("ic_train.jsonl", ic_rows(IC_TRAIN))):
        (FIX / name).write_text("".join(json.dumps(r) + "\n" for r in rows), encoding="utf-8")
    (FIX / "labels.txt").write_text("\n".join(LABELS) + "\n", encoding="utf-8")


if __name__ == "__main__":
    main()
