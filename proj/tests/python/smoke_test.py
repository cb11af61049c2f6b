"""Smoke tests for the python bindings: exercise each exposed operation once."""

import math
import os
import sys
import tempfile

import wchamfer as wc


def approx(a, b, tol=1e-9):
    assert abs(a - b) <= tol, f"{a} != {b} within {tol}"


def test_scoring():
    q = wc.MultiVecRecord("q", [1, 2], [1.0, 0.0, 0.0, 1.0], 2)
    d = wc.MultiVecRecord("d", [9], [0.0, -1.0], 2)
    assert wc.chamfer(q, q) == 0.0
    approx(wc.chamfer(q, d), (math.sqrt(2.0) + 2.0) / 2.0)

    feats = wc.extract_features(q, d)
    assert feats.query_len == 2
    approx(feats.get(1), math.sqrt(2.0) / 2.0)
    approx(feats.get(2), 1.0)

    ones = wc.WeightTable([1.0] * 10)
    approx(wc.weighted_chamfer(feats, ones), wc.chamfer(q, d))

    dists = wc.min_dists(q, d)
    approx(dists[0], math.sqrt(2.0))
    approx(dists[1], 2.0)


def test_store_roundtrip():
    store = wc.EmbeddingStore(dim=2, vocab_size=10)
    store.add(wc.MultiVecRecord("a", [3], [1.0, 0.0], 2))
    store.add(wc.MultiVecRecord("b", [4, 5], [0.0, 1.0, -1.0, 0.0], 2))
    assert wc.validate_store(store).ok()

    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "store.mvst")
        wc.save_store(store, path)
        reloaded = wc.load_store(path)
        assert len(reloaded) == 2
        assert reloaded.at("b").token_ids == [4, 5]

    try:
        store.add(wc.MultiVecRecord("a", [3], [1.0, 0.0], 2))
    except ValueError as e:
        assert "duplicate" in str(e)
    else:
        raise AssertionError("duplicate item_id must raise")


def test_weights():
    corpus = [wc.TokenizedDoc("d1", [0, 1]), wc.TokenizedDoc("d2", [1]),
              wc.TokenizedDoc("d3", [1])]
    df = wc.count_doc_freq(corpus, 3)
    assert df.corpus_size == 3
    assert df.doc_count == [1, 3, 0]

    idf = wc.compute_idf(df, wc.Vocab(3), wc.SpecialPolicy.one)
    v0, v1 = math.log(8.0 / 3.0), math.log(8.0 / 7.0)
    approx(idf.w[0] / idf.w[1], v0 / v1, 1e-12)
    assert idf.w[2] == 0.0
    assert idf.provenance == wc.Provenance.idf

    norm = wc.normalize_sum(wc.WeightTable([3.0, 1.0]))
    assert norm.w == [0.75, 0.25]

    learned = wc.WeightTable([0.6, 0.4, 0.0], wc.Provenance.learned)
    table = wc.WeightTable([0.2, 0.3, 0.5], wc.Provenance.idf)
    filled = wc.backfill_unseen(learned, table, [0, 1])
    approx(filled.w[0], 0.3, 1e-12)
    approx(filled.w[1], 0.2, 1e-12)
    assert filled.w[2] == 0.5


def test_trainer():
    cfg = wc.TrainConfig()
    assert wc.cosine_lr(0, cfg) == 1e-4
    assert wc.cosine_lr(100, cfg) == 1e-8

    def feats(value):
        q = wc.MultiVecRecord("q", [0], [1.0, 0.0], 2)
        # Build a feature vector through a record pair at an exact distance.
        angle = math.acos(1.0 - value * value / 2.0)
        d = wc.MultiVecRecord("d", [0], [math.cos(angle), math.sin(angle)], 2)
        return wc.extract_features(q, d)

    query = wc.TrainQuery("q1", ["pos"], ["neg"],
                          {"pos": feats(0.2), "neg": feats(0.8)})
    w = wc.WeightTable([1.0])
    loss = wc.ce_loss(query, ["neg"], w)
    assert loss > 0.0
    grad = wc.ce_grad(query, ["neg"], w)
    assert len(grad) == 1 and grad[0] < 0.0  # pushing the weight up helps

    equal = wc.TrainQuery("q2", ["pos"], ["neg"],
                          {"pos": feats(0.5), "neg": feats(0.5)})
    approx(wc.ce_loss(equal, ["neg"], w), math.log(2.0), 1e-6)

    l1, l2 = wc.mine_hard_negatives(query, w, 1, 1)
    assert l1 == ["neg"] and l2 == ["neg"]

    result = wc.train([query], cfg, wc.uniform_weights(1))
    assert len(result.log) == cfg.iterations
    assert result.log[-1].loss <= result.log[0].loss
    approx(sum(result.weights.w), 1.0)


def test_retrieval_eval():
    corpus = [wc.TokenizedDoc("d1", [0, 1]), wc.TokenizedDoc("d2", [0])]
    index = wc.build_index(corpus)
    top = wc.bm25_topk(index, [1], 10)
    assert [item.item_id for item in top] == ["d1"]
    approx(top[0].score, 0.24110, 1e-4)

    qrels = {"q1": {"d1": 1, "d3": 1}}
    run = {"q1": wc.bm25_topk(index, [1], 10)}
    report = wc.evaluate(run, qrels, [10])
    approx(report.mean["recall"][10], 0.5)
    assert "recall,10,ALL,0.5" in report.to_csv()


def test_theory_harness():
    spec = wc.SyntheticSpec()
    spec.vocab_size = 24
    spec.dim = 8
    spec.n_queries = 120
    spec.n_docs = 30
    spec.query_len = wc.LenRange(4, 10)
    spec.seed = 7
    data = wc.generate_synthetic(spec)
    assert len(data.pairs) == 120

    features = [wc.extract_features(data.store.at(q), data.store.at(d))
                for q, d in data.pairs]
    report = wc.recover_weights(features, data.scores, spec.vocab_size,
                                truth=data.planted.w)
    assert not report.rank_deficient
    assert report.max_abs_err <= 1e-6

    probe = wc.convexity_probe_ce(dim=8, trials=500, seed=3)
    assert probe.violations == 0

    rows = wc.sample_complexity_sweep(spec, [8, 64], 5)
    assert len(rows) == 10
    assert wc.sweep_success_rate(rows, 64) >= wc.sweep_success_rate(rows, 8)


def main():
    tests = [v for k, v in sorted(globals().items()) if k.startswith("test_")]
    for test in tests:
        test()
        print(f"ok {test.__name__}")
    print(f"{len(tests)} smoke tests passed")


if __name__ == "__main__":
    sys.exit(main())
