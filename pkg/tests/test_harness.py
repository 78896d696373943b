"""Cross-validation harness, metrics, sweep, and report tests."""

import json
import random

import pytest

from fdkit.alignment import SenecaVerdict
from fdkit.crowd import AggregatedLabel
from fdkit.features import fit_feature_space
from fdkit.harness import (EvalReport, TASK_CI, TASK_PO, CorpusItem,
                           block_combinations, cross_validate, dataset_tag,
                           eval_seneca, make_corpus, metrics, render_table,
                           stratified_folds, sweep)
from fdkit.store import EntityRecord, EntityStore


# -- metrics ------------------------------------------------------------------


def test_metrics_perfect_predictions():
    per_class, avg = metrics(["C", "I", "C"], ["C", "I", "C"], labels=("C", "I"))
    for m in per_class.values():
        assert (m.precision, m.recall, m.f1) == (1.0, 1.0, 1.0)
    assert avg == 1.0


def test_metrics_direct_formula_case():
    # class C: TP=3, FP=1, FN=1
    gold = ["C", "C", "C", "C", "I", "I", "I"]
    pred = ["C", "C", "C", "I", "C", "I", "I"]
    per_class, avg = metrics(pred, gold, labels=("C", "I"))
    assert per_class["C"].precision == pytest.approx(0.75)
    assert per_class["C"].recall == pytest.approx(0.75)
    assert per_class["C"].f1 == pytest.approx(0.75)


def test_metrics_zero_denominators():
    per_class, avg = metrics(["I", "I"], ["C", "I"], labels=("C", "I"))
    assert per_class["C"].precision == 0.0
    assert per_class["C"].recall == 0.0
    assert per_class["C"].f1 == 0.0


def test_metrics_length_mismatch_errors():
    with pytest.raises(ValueError, match="mismatch"):
        metrics(["C"], ["C", "I"])


def test_metrics_match_confusion_oracle():
    rng = random.Random(41)
    for _ in range(200):
        n = rng.randrange(1, 60)
        gold = [rng.choice("CI") for _ in range(n)]
        pred = [rng.choice("CI") for _ in range(n)]
        per_class, avg = metrics(pred, gold, labels=("C", "I"))
        f1s = []
        for label in ("C", "I"):
            tp = sum(p == g == label for p, g in zip(pred, gold))
            fp = sum(p == label != g for p, g in zip(pred, gold))
            fn = sum(g == label != p for p, g in zip(pred, gold))
            prec = tp / (tp + fp) if tp + fp else 0.0
            rec = tp / (tp + fn) if tp + fn else 0.0
            f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
            assert per_class[label].precision == pytest.approx(prec)
            assert per_class[label].recall == pytest.approx(rec)
            assert per_class[label].f1 == pytest.approx(f1)
            f1s.append(f1)
        assert avg == pytest.approx(sum(f1s) / 2)


def test_metrics_symmetric_under_relabeling():
    gold = ["C", "C", "I", "C", "I"]
    pred = ["C", "I", "I", "C", "C"]
    pc1, avg1 = metrics(pred, gold, labels=("C", "I"))
    swap = {"C": "I", "I": "C"}
    pc2, avg2 = metrics([swap[p] for p in pred], [swap[g] for g in gold],
                        labels=("C", "I"))
    assert pc1["C"] == pc2["I"] and pc1["I"] == pc2["C"]
    assert avg1 == avg2


# -- synthetic corpus ----------------------------------------------------------


def toy_corpus(n=60, seed=0, noise=0.0):
    """Separable two-class corpus: distinctive tokens, URI shape, predicates."""
    rng = random.Random(seed)
    items = []
    for i in range(n):
        positive = i % 2 == 0
        flip = rng.random() < noise
        label = "C" if positive else "I"
        if positive:
            name = f"Gadget_{i:03d}"
            abstract = f"A gadget is a handy device typically used for task {i}."
            out = {"http://p/material": rng.randrange(1, 4)}
        else:
            name = f"Metropolis_{i:03d}"
            abstract = f"Metropolis {i:03d} is a large city in region {i}."
            out = {"http://p/locatedIn": 1}
        rec = EntityRecord(f"http://e/{name}", abstract=abstract, out_degree=out,
                           in_degree={})
        verdict = SenecaVerdict(rec.iri,
                                ("C" if positive else "I") if not flip else
                                ("I" if positive else "C"),
                                "PO")
        items.append(CorpusItem(rec, verdict, label, rng.uniform(0.8, 1.0)))
    return items


# -- fold assignment -------------------------------------------------------------


def test_each_entity_held_out_exactly_once():
    items = toy_corpus(100, seed=1)
    assignment = stratified_folds(items, folds=10, seed=4)
    assert len(assignment) == 100
    assert set(assignment) == set(range(10))
    # partition property: each index appears in exactly one fold by construction
    per_fold = [assignment.count(f) for f in range(10)]
    assert sum(per_fold) == 100


def test_folds_are_stratified():
    items = toy_corpus(100, seed=2)
    assignment = stratified_folds(items, folds=10, seed=9)
    for f in range(10):
        fold_labels = [it.label for it, a in zip(items, assignment) if a == f]
        assert fold_labels.count("C") == 5 and fold_labels.count("I") == 5


def test_too_few_examples_for_folds():
    with pytest.raises(ValueError, match="folds"):
        stratified_folds(toy_corpus(6), folds=10, seed=0)


def test_fold_assignment_follows_seed_not_order():
    items = toy_corpus(40, seed=3)
    a1 = stratified_folds(items, 5, seed=7)
    by_entity_1 = {it.record.iri: f for it, f in zip(items, a1)}
    shuffled = list(items)
    random.Random(99).shuffle(shuffled)
    a2 = stratified_folds(shuffled, 5, seed=7)
    by_entity_2 = {it.record.iri: f for it, f in zip(shuffled, a2)}
    assert by_entity_1 == by_entity_2
    a3 = stratified_folds(items, 5, seed=8)
    assert a3 != a1


# -- cross-validation -------------------------------------------------------------


def test_cv_separable_data_high_f1():
    items = toy_corpus(100, seed=5)
    report = cross_validate(items, TASK_CI, "svm", ["A", "U", "E"], folds=10, seed=3)
    assert report.avg_f1 >= 0.95
    assert report.folds == 10 and report.method == "svm"


def test_cv_deterministic_reports():
    items = toy_corpus(60, seed=6)
    r1 = cross_validate(items, TASK_CI, "svm", ["A", "E"], folds=5, seed=11)
    r2 = cross_validate(items, TASK_CI, "svm", ["A", "E"], folds=5, seed=11)
    assert r1.to_json() == r2.to_json()


def test_cv_requires_verdicts_for_d():
    items = toy_corpus(30, seed=7)
    stripped = [CorpusItem(it.record, None, it.label, it.weight) for it in items]
    with pytest.raises(ValueError, match="verdict"):
        cross_validate(stripped, TASK_CI, "svm", ["A", "D"], folds=5, seed=0)


def test_cv_no_leakage_fold_dictionary_independent_of_test_entities():
    for case in range(20):
        items = toy_corpus(24, seed=100 + case)
        folds = 4
        assignment = stratified_folds(items, folds, seed=case)
        fold = case % folds
        train_items = [it for it, f in zip(items, assignment) if f != fold]
        test_items = [it for it, f in zip(items, assignment) if f == fold]
        space = fit_feature_space([it.record for it in train_items], ["A"])
        # deleting any single held-out entity must not change the fitted dictionary
        for removed in test_items:
            remaining = [it for it in items if it is not removed]
            assignment2 = [f for it, f in zip(items, assignment) if it is not removed]
            train2 = [it for it, f in zip(remaining, assignment2) if f != fold]
            space2 = fit_feature_space([it.record for it in train2], ["A"])
            assert space2.sha256() == space.sha256()


# -- sweep -------------------------------------------------------------------------


def test_block_combinations_table_order():
    combos = block_combinations(("A", "U", "E", "D"))
    assert combos == [
        ("A",), ("U",), ("E",),
        ("A", "U"), ("A", "E"), ("A", "D"), ("U", "E"), ("U", "D"), ("E", "D"),
        ("A", "U", "E"), ("A", "U", "D"), ("A", "E", "D"), ("U", "E", "D"),
        ("A", "U", "E", "D"),
    ]
    assert len(combos) == 14
    assert block_combinations(("A",)) == [("A",)]


def test_sweep_produces_distinct_block_reports():
    items = toy_corpus(40, seed=8)
    reports = sweep(items, TASK_CI, "svm", folds=5, seed=2)
    assert len(reports) == 14
    assert len({r.blocks for r in reports}) == 14


def test_sweep_multinomial_nb_excludes_d():
    items = toy_corpus(40, seed=9)
    reports = sweep(items, TASK_CI, "multinomial_nb", folds=5, seed=2)
    assert len(reports) == 7
    assert all("D" not in r.blocks for r in reports)


# -- seneca evaluation ----------------------------------------------------------


def _gold(labels):
    return [AggregatedLabel(f"http://e/{i:02d}", lab, 1.0, "expert")
            for i, lab in enumerate(labels)]


def test_eval_seneca_perfect():
    gold = _gold(["C"] * 5 + ["I"] * 5)
    verdicts = {g.entity: SenecaVerdict(g.entity, g.label, "PO") for g in gold}
    report = eval_seneca(verdicts, gold, TASK_CI)
    assert report.avg_f1 == 1.0 and report.method == "SENECA"


def test_eval_seneca_hand_confusion():
    # 20 entities: 12 C, 8 I; verdicts err on 2 C (as I) and 1 I (as C)
    gold = _gold(["C"] * 12 + ["I"] * 8)
    verdicts = {}
    for i, g in enumerate(gold):
        label = g.label
        if i in (0, 1):
            label = "I"
        if i == 12:
            label = "C"
        verdicts[g.entity] = SenecaVerdict(g.entity, label, "NPO")
    report = eval_seneca(verdicts, gold, TASK_CI)
    # hand-filled confusion matrix: C: TP=10 FP=1 FN=2; I: TP=7 FP=2 FN=1
    assert report.per_class["C"].precision == pytest.approx(10 / 11)
    assert report.per_class["C"].recall == pytest.approx(10 / 12)
    assert report.per_class["I"].precision == pytest.approx(7 / 9)
    assert report.per_class["I"].recall == pytest.approx(7 / 8)
    f1c = 2 * (10 / 11) * (10 / 12) / ((10 / 11) + (10 / 12))
    f1i = 2 * (7 / 9) * (7 / 8) / ((7 / 9) + (7 / 8))
    assert report.avg_f1 == pytest.approx((f1c + f1i) / 2)


def test_eval_seneca_missing_verdicts_default_negative():
    gold = _gold(["C", "I"])
    report = eval_seneca({}, gold, TASK_CI)
    assert report.per_class["I"].recall == 1.0   # everything predicted I
    assert report.per_class["C"].recall == 0.0
    po_report = eval_seneca({}, [AggregatedLabel("e", "NPO", 1.0)], TASK_PO)
    assert po_report.per_class["NPO"].recall == 1.0


def test_eval_seneca_mini_fixture(mini_verdicts, manifest):
    gold = [AggregatedLabel(iri, ci, 1.0, "expert")
            for iri, (ci, po) in manifest["expected_verdicts"].items()]
    # against its own verdicts as gold, the score is perfect
    assert eval_seneca(mini_verdicts, gold, TASK_CI).avg_f1 == 1.0


# -- corpus and reports -----------------------------------------------------------


def test_make_corpus_joins_and_validates():
    recs = {"http://e/a": EntityRecord("http://e/a", abstract="x"),
            "http://e/b": EntityRecord("http://e/b", abstract="y")}
    store = EntityStore(recs)
    labels = [AggregatedLabel("http://e/a", "C", 0.9),
              AggregatedLabel("http://e/b", "I", 0.8),
              AggregatedLabel("http://e/missing", "C", 1.0)]
    items = make_corpus(store, None, labels, TASK_CI)
    assert [it.record.iri for it in items] == ["http://e/a", "http://e/b"]
    assert [it.weight for it in items] == [0.9, 0.8]
    with pytest.raises(ValueError, match="label"):
        make_corpus(store, None, [AggregatedLabel("http://e/a", "PO", 1.0)], TASK_CI)
    # expert-sourced labels always train at weight 1
    expert = [AggregatedLabel("http://e/a", "C", 0.7, "expert")]
    assert make_corpus(store, None, expert, TASK_CI)[0].weight == 1.0


def test_dataset_tag():
    assert dataset_tag([AggregatedLabel("a", "C", 1.0, "expert")]) == "E"
    assert dataset_tag([AggregatedLabel("a", "C", 1.0, "expert"),
                        AggregatedLabel("b", "C", 0.9, "crowd")]) == "C"


def test_report_json_round_trip_and_config_hash():
    items = toy_corpus(30, seed=10)
    report = cross_validate(items, TASK_CI, "logreg", ["U", "E"], folds=5, seed=6)
    blob = report.to_dict()
    assert blob["config_hash"] == report.config_hash
    again = EvalReport.from_dict(json.loads(json.dumps(blob)))
    assert again.to_dict() == blob
    corrupted = dict(blob)
    corrupted["config_hash"] = "0" * 64
    with pytest.raises(ValueError, match="hash"):
        EvalReport.from_dict(corrupted)


def test_render_table_shape():
    items = toy_corpus(30, seed=11)
    reports = [cross_validate(items, TASK_CI, "svm", blocks, folds=5, seed=1)
               for blocks in (("A",), ("A", "D"))]
    table = render_table(reports)
    lines = table.splitlines()
    assert lines[1].split()[:5] == ["A", "U", "E", "D", "method"]
    assert lines[2].split()[:4] == ["x", ".", ".", "."]
    assert lines[3].split()[:4] == ["x", ".", ".", "x"]
    assert "avgF1" in lines[1]
