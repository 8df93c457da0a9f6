import json
import math
import random

import pytest

from conftest import FIXTURES, LADDER_WORDS, ladder
from oracles import random_lattice
from wcnslu.harness import (EmptyRecords, EvalRecord, EvalSettings, IcExample, SchemaError,
                            SqaExample, dump_records, emit_report, error_split, load_config,
                            load_dataset, load_records, long_format, make_client,
                            overlap_responder, pick_icl_example, run_eval, summarize,
                            summary_rows, wer_bin_report)
from wcnslu.lattice import DanglingArc, best_path
from wcnslu.llm import AuthError, CompletionRequest, LLMClient, MockBackend
from wcnslu.prompting import TranscriptSource, wcn_instruction_text

SLF = "N=2 L=1\nI=0\nI=1\nJ=0 S=0 E=1 W=hello a=0.0 l=0.0\n"
GT, ONE, ORACLE = (TranscriptSource.parse(s) for s in ("gt", "1best", "oracle"))
WCN = TranscriptSource.wcn("|", 0.3)
ALL = (GT, ONE, ORACLE, WCN)


def write_jsonl(path, rows):
    path.write_text("".join(json.dumps(r) + "\n" for r in rows))
    return path


def gold_client(examples):
    """Mock that answers every prompt with the gold answer of the example it mentions."""
    def responder(req):
        for ex in examples:
            if f"Context: {ex.context}\n" in req.prompt:
                return ex.answers[0]
        return ""
    return LLMClient(MockBackend(responder=responder))


def test_load_two_line_sqa(tmp_path):
    rows = [{"id": "a", "context": "c", "question": "q", "answers": ["x"], "lattice": SLF},
            {"id": "b", "context": "c", "question": "q", "answers": ["y", "z"]}]
    exs = load_dataset(write_jsonl(tmp_path / "d.jsonl", rows), "sqa")
    assert [e.id for e in exs] == ["a", "b"]
    assert best_path(exs[0].lattice).text == "hello"
    assert exs[1].lattice is None and exs[1].answers == ("y", "z")


@pytest.mark.parametrize("bad, line", [
    ({"id": "b", "context": "c", "question": "q"}, 2),
    ({"id": "b", "context": "c", "question": "q", "answers": []}, 2),
    ({"id": "a", "context": "c", "question": "q", "answers": ["x"]}, 2),
])
def test_sqa_schema_errors(tmp_path, bad, line):
    good = {"id": "a", "context": "c", "question": "q", "answers": ["x"]}
    with pytest.raises(SchemaError, match=f"line {line}"):
        load_dataset(write_jsonl(tmp_path / "d.jsonl", [good, bad]), "sqa")


def test_invalid_json_reports_line(tmp_path):
    path = tmp_path / "d.jsonl"
    path.write_text('{"id": "a", "command": "x", "intent": "flight"}\n{oops\n')
    with pytest.raises(SchemaError, match="line 2"):
        load_dataset(path, "ic")


def test_intent_outside_label_set(tmp_path):
    rows = [{"id": "1", "command": "show flights", "intent": "flight"},
            {"id": "2", "command": "fares", "intent": "cheap"}]
    path = write_jsonl(tmp_path / "d.jsonl", rows)
    with pytest.raises(SchemaError, match="line 2"):
        load_dataset(path, "ic", labels=["airfare", "flight"])
    (tmp_path / "labels.txt").write_text("flight\nairfare\n")
    with pytest.raises(SchemaError):
        load_dataset(path, "ic")


def test_lattice_errors_name_the_example(tmp_path):
    broken = "N=2 L=1\nI=0\nI=1\nJ=0 S=0 E=5 W=x a=0 l=0\n"
    path = write_jsonl(tmp_path / "d.jsonl", [{"id": "q7", "command": "x", "intent": "f",
                                               "lattice": broken}])
    with pytest.raises(DanglingArc, match="q7"):
        load_dataset(path, "ic")
    path = write_jsonl(tmp_path / "e.jsonl", [{"id": "q8", "command": "x", "intent": "f",
                                               "lattice": "missing.slf"}])
    with pytest.raises(SchemaError, match="line 1"):
        load_dataset(path, "ic")


def test_bundled_fixtures_load():
    sqa = load_dataset(FIXTURES / "sqa.jsonl", "sqa")
    ic = load_dataset(FIXTURES / "ic.jsonl", "ic")
    assert len(sqa) >= 20 and len(ic) >= 20
    assert all(e.lattice is not None for e in sqa + ic)


def test_gold_mock_scores_perfectly():
    ex = SqaExample("x", "Denver gained 194 yards.", "how many yards did denver gain",
                    ("194",), ladder(0))
    records, summary = run_eval([ex], EvalSettings(sources=ALL), gold_client([ex]))
    assert all(r.metrics == {"f1": 1.0, "em": 1} for r in records)
    assert summary["gt"]["f1"] == 1.0 and summary["gt"]["em"] == 1.0


def test_record_matrix_and_summary_means():
    exs = load_dataset(FIXTURES / "sqa.jsonl", "sqa")
    client = LLMClient(MockBackend(responder=overlap_responder))
    records, summary = run_eval(exs, EvalSettings(sources=ALL), client)
    assert len(records) == len(exs) * len(ALL)
    assert [(r.id, r.source) for r in records] == [
        (i, s.label) for i in sorted(e.id for e in exs) for s in ALL]
    assert all(r.question_wer == 0.0 for r in records if r.source == "gt")
    assert all(r.options_per_word is None for r in records if r.source != WCN.label)
    assert all(set(r.metrics) == {"f1", "em"} for r in records)
    for src in ALL:
        rs = [r for r in records if r.source == src.label]
        assert summary[src.label]["n"] == len(rs)
        assert summary[src.label]["f1"] == pytest.approx(math.fsum(r.metrics["f1"] for r in rs) / len(rs), abs=1e-9)
        assert summary[src.label]["mean_question_wer"] == pytest.approx(
            math.fsum(r.question_wer for r in rs) / len(rs), abs=1e-9)
    assert summary["oracle"]["mean_question_wer"] <= summary["1best"]["mean_question_wer"]


def test_oracle_wer_never_above_one_best_on_random_fixtures():
    rng = random.Random(5)
    exs = []
    for i in range(40):
        lat = random_lattice(rng)
        ref = " ".join(rng.choice(["a", "b", "game", "gain", "two"]) for _ in range(rng.randint(1, 4)))
        exs.append(IcExample(f"e{i:02d}", ref, "flight", lat))
    records, summary = run_eval(exs, EvalSettings(task="ic", sources=(ONE, ORACLE)),
                                LLMClient(MockBackend(default="flight")))
    by_id = {}
    for r in records:
        by_id.setdefault(r.id, {})[r.source] = r.question_wer
    assert all(d["oracle"] <= d["1best"] for d in by_id.values())
    assert summary["oracle"]["mean_question_wer"] <= summary["1best"]["mean_question_wer"]


def test_ic_metrics_and_labels():
    exs = load_dataset(FIXTURES / "ic.jsonl", "ic")
    seen = []

    def responder(req):
        seen.append(req.prompt)
        return " flight"
    records, summary = run_eval(exs, EvalSettings(task="ic", sources=(GT,)),
                                LLMClient(MockBackend(responder=responder)))
    assert all(set(r.metrics) == {"correct"} for r in records)
    expected = sum(e.intent == "flight" for e in exs) / len(exs)
    assert summary["gt"]["accuracy"] == pytest.approx(expected)
    labels = (FIXTURES / "labels.txt").read_text().split()
    assert ", ".join(sorted(labels)) in seen[0]


def test_icl_override_mixes_sources():
    exs = load_dataset(FIXTURES / "sqa.jsonl", "sqa")
    train = load_dataset(FIXTURES / "sqa_train.jsonl", "sqa")
    prompts = []
    client = LLMClient(MockBackend(responder=lambda r: prompts.append(r.prompt) or ""))
    settings = EvalSettings(sources=(WCN,), shots=1, icl_source_override=GT, seed=3)
    records, _ = run_eval(exs[:1], settings, client, train)
    icl = next(t for t in train if t.id == records[0].icl_id)
    prompt = prompts[0]
    assert f"Question: {icl.question}\nAnswer: {icl.answers[0]}" in prompt
    assert f"Question: {records[0].rendered_input}\nAnswer:" in prompt
    assert "|" in records[0].rendered_input
    assert wcn_instruction_text("|") in prompt


def test_instruction_defaults():
    ex = load_dataset(FIXTURES / "sqa.jsonl", "sqa")[:1]
    for shots, flag, present in [(0, None, False), (1, None, True), (0, True, True), (1, False, False)]:
        prompts = []
        client = LLMClient(MockBackend(responder=lambda r: prompts.append(r.prompt) or ""))
        run_eval(ex, EvalSettings(sources=(WCN,), shots=shots, wcn_instruction=flag), client,
                 load_dataset(FIXTURES / "sqa_train.jsonl", "sqa"))
        assert (wcn_instruction_text("|") in prompts[0]) == present


def test_icl_pick_is_seeded_and_skips_self():
    pool = [SqaExample(str(i), "c", "q", ("a",)) for i in range(5)]
    picks = {pick_icl_example(pool, "x", s).id for s in range(30)}
    assert len(picks) > 1
    assert pick_icl_example(pool, "x", 7) == pick_icl_example(pool, "x", 7)
    for s in range(30):
        first = pick_icl_example(pool, "x", s)
        assert pick_icl_example(pool, first.id, s).id != first.id
    assert pick_icl_example(pool[:1], "0", 0) is None


def test_errors_recorded_not_fatal():
    ok = SqaExample("ok", "c.", "q", ("a",), ladder(0))
    bad = SqaExample("bad", "c.", "q", ("a",), None)
    records, summary = run_eval([ok, bad], EvalSettings(sources=(ONE,)),
                                LLMClient(MockBackend(default="a")))
    by_id = {r.id: r for r in records}
    assert by_id["ok"].error is None and by_id["ok"].metrics["em"] == 1
    assert "MissingLattice" in by_id["bad"].error and by_id["bad"].metrics["em"] == 0
    assert summary["1best"]["errors"] == 1


def test_auth_error_aborts():
    def deny(req):
        raise AuthError("no key")
    ex = SqaExample("x", "c.", "q", ("a",))
    with pytest.raises(AuthError):
        run_eval([ex], EvalSettings(), LLMClient(MockBackend(responder=deny)))


def record(source, wer_, f1, opw=None):
    return EvalRecord("i", source, 0, "", "", {"f1": f1, "em": int(f1 == 1)}, wer_, opw)


def test_bins_all_zero():
    rows = wer_bin_report([record("gt", 0.0, 1.0), record("gt", 0.0, 0.0)])
    assert len(rows) == 1
    assert rows[0]["bin"] == "0" and rows[0]["count"] == 2 and rows[0]["f1"] == 0.5


def test_bin_edges_and_overflow():
    rows = wer_bin_report([record("1best", w, 1.0) for w in (0.0, 5.0, 10.0, 10.5, 150.0)])
    assert [(r["bin"], r["count"]) for r in rows] == [("0", 1), ("(0,10]", 2), ("(10,20]", 1),
                                                      (">100", 1)]
    with pytest.raises(EmptyRecords):
        wer_bin_report([])


def test_error_split_shape():
    recs = [record("1best", w, f) for w, f in [(0, 1), (0, 0), (25, 0), (50, 1), (12.5, 0)]]
    rows = error_split(recs)
    assert [(r["subset"], r["count"]) for r in rows] == [("w/out ASR errors", 2), ("w/ ASR errors", 3)]
    assert rows[0]["f1"] == 0.5 and rows[1]["f1"] == pytest.approx(1 / 3)


def test_emit_report_csv_and_json(tmp_path):
    summary = summarize([record("gt", 0.0, 1.0), record("1best", 20.0, 0.5)])
    rows = summary_rows(summary)
    csv_path = emit_report(rows, tmp_path / "s.csv")
    assert len(csv_path.read_text().splitlines()) == 1 + 2
    json_path = emit_report(rows, tmp_path / "s.json")
    assert json.loads(json_path.read_text()) == rows
    with pytest.raises(ValueError):
        emit_report(rows, tmp_path / "s.xml")
    with pytest.raises(EmptyRecords):
        emit_report([], tmp_path / "e.csv")


def test_long_format_one_row_per_metric():
    bins = wer_bin_report([record("wcn:|:0.3", 10.0, 1.0, 1.5)])
    rows = long_format(bins)
    assert {r["metric"] for r in rows} == {"f1", "em", "options_per_word"}
    assert all(r["bin"] == "(0,10]" for r in rows)


def test_records_round_trip(tmp_path):
    recs = [record("gt", 0.0, 1.0, None), record("wcn:/", 12.5, 0.25, 1.25)]
    (tmp_path / "r.jsonl").write_text(dump_records(recs))
    assert load_records(tmp_path / "r.jsonl") == recs


def test_options_per_word_grows_with_ambiguity():
    exs = [IcExample(f"l{k}", " ".join(LADDER_WORDS), "flight", ladder(k)) for k in range(0, 9, 2)]
    records, _ = run_eval(exs, EvalSettings(task="ic", sources=(WCN,)),
                          LLMClient(MockBackend(default="flight")))
    rows = wer_bin_report(records)
    opw = [r["options_per_word"] for r in rows]
    assert len(rows) == 5
    assert opw == sorted(opw) and opw[0] == 1.0 and opw[-1] == 2.0


def test_config_and_client(tmp_path):
    (tmp_path / "c.ini").write_text(
        "[backend]\nkind = mock\nmodel = m1\nmax_in_flight = 2\n"
        "[lattice]\nlm_scale = 0.5\n[paths]\ncache = cache.jsonl\n")
    cfg = load_config(tmp_path / "c.ini")
    assert (cfg.model, cfg.max_in_flight, cfg.lm_scale) == ("m1", 2, 0.5)
    assert cfg.cache == tmp_path / "cache.jsonl"
    client = make_client(cfg)
    assert client.complete(CompletionRequest("Intent:\nare: flight. Reply")).text == " unknown"
    (tmp_path / "bad.ini").write_text("[backend]\nkind = carrier_pigeon\n")
    with pytest.raises(ValueError):
        load_config(tmp_path / "bad.ini")
    with pytest.raises(FileNotFoundError):
        load_config(tmp_path / "none.ini")


def test_replay_miss_aborts(tmp_path):
    from wcnslu.llm import CacheMiss, ReplayBackend, ResponseCache
    cache = ResponseCache(tmp_path / "c.jsonl")
    ex = SqaExample("x", "c.", "q", ("a",))
    with pytest.raises(CacheMiss):
        run_eval([ex], EvalSettings(), LLMClient(ReplayBackend(cache), cache))


def test_wcn_rows_share_one_best_wer():
    exs = load_dataset(FIXTURES / "sqa.jsonl", "sqa")
    records, _ = run_eval(exs, EvalSettings(sources=(ONE, WCN)), LLMClient(MockBackend()))
    by_id = {}
    for r in records:
        by_id.setdefault(r.id, {})[r.source] = r.question_wer
    assert all(d["1best"] == d[WCN.label] for d in by_id.values())
