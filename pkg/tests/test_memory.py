import numpy as np
import pytest

from hdspeckle.errors import ConfigError, DimensionError
from hdspeckle.hv import Hypervector, bundle, complement, hamming, random_hypervector
from hdspeckle.memory import (
    ClassificationResult,
    PrototypeMemory,
    classify,
    evaluate,
    recalibrate,
    similarity_profile,
    train,
)
from hdspeckle.rng import key_words, philox_stream

# ---------------------------------------------------------------------------
# independent brute-force reference (plain 0/1 arrays, no packing)


def brute_train(samples):
    protos = {}
    for bits, label in samples:
        protos.setdefault(label, []).append(bits.astype(int))
    out = {}
    for label, rows in protos.items():
        counts = np.sum(rows, axis=0)
        out[label] = (2 * counts >= len(rows)).astype(np.uint8)
    return out  # insertion order = first appearance


def brute_classify(protos, query_bits):
    best_label, best_dist = None, None
    for label, proto in protos.items():
        d = int(np.sum(proto != query_bits))
        if best_dist is None or d < best_dist:
            best_label, best_dist = label, d
    return best_label


def hv_from(bits):
    return Hypervector.from_bits(np.asarray(bits, dtype=np.uint8))


# ---------------------------------------------------------------------------
# train


def test_train_single_class_unanimous():
    a = random_hypervector(128, 1)
    mem = train([(a, "x"), (a, "x"), (a, "x")])
    assert mem.labels == ("x",)
    assert mem.entry("x").prototype == a
    assert mem.entry("x").n_samples == 3
    assert not mem.entry("x").merged


def test_train_five_labels_eighty_each():
    samples = []
    for li, label in enumerate(["L1", "L2", "R1", "R2", "None"]):
        samples.extend(
            (random_hypervector(256, 1000 * li + k), label) for k in range(80)
        )
    mem = train(samples)
    assert mem.labels == ("L1", "L2", "R1", "R2", "None")
    assert all(mem.entry(lb).n_samples == 80 for lb in mem.labels)
    assert mem.dim == 256


def test_train_complementary_classes_give_complementary_prototypes():
    # odd sample count: with ties impossible, majority commutes with complement
    base = [random_hypervector(200, s) for s in range(5)]
    samples = [(hv, "pos") for hv in base] + [(complement(hv), "neg") for hv in base]
    mem = train(samples)
    assert mem.entry("neg").prototype == complement(mem.entry("pos").prototype)


def test_train_rejects_empty_and_mismatched():
    with pytest.raises(ConfigError):
        train([])
    with pytest.raises(DimensionError):
        train([(random_hypervector(64, 0), "a"), (random_hypervector(65, 0), "a")])


def test_train_is_order_independent_within_label():
    hvs = [random_hypervector(96, s) for s in range(9)]
    mem1 = train([(hv, "a") for hv in hvs])
    mem2 = train([(hv, "a") for hv in reversed(hvs)])
    assert mem1.entry("a").prototype == mem2.entry("a").prototype
    assert mem1 == mem2


def test_registration_order_is_first_appearance():
    a, b = random_hypervector(64, 1), random_hypervector(64, 2)
    mem = train([(a, "z"), (b, "a"), (a, "z")])
    assert mem.labels == ("z", "a")


# ---------------------------------------------------------------------------
# classify


def test_classify_exact_prototype_hit():
    a, b = random_hypervector(512, 1), random_hypervector(512, 2)
    mem = train([(a, "L1"), (b, "L2")])
    res = classify(mem, a)
    assert res.predicted_label == "L1"
    assert res.distances[0] == 0
    assert res.normalized[0] == 0.0


def test_classify_small_perturbation_stays_home():
    d = 10_000
    mem = train([(random_hypervector(d, 1), "one"), (random_hypervector(d, 2), "two")])
    bits = mem.entry("one").prototype.to_bits().copy()
    bits[:100] ^= 1  # flip 100 known positions
    res = classify(mem, hv_from(bits))
    assert res.predicted_label == "one"
    assert res.distances[0] == 100


def test_classify_tie_breaks_by_registration_order():
    a = hv_from([0, 0])
    b = hv_from([1, 1])
    q = hv_from([0, 1])  # distance 1 to both
    mem = train([(a, "a"), (b, "b")])
    assert classify(mem, q).predicted_label == "a"
    mem_rev = train([(b, "b"), (a, "a")])
    assert classify(mem_rev, q).predicted_label == "b"


def test_classify_errors():
    mem = train([(random_hypervector(64, 0), "a")])
    with pytest.raises(DimensionError):
        classify(mem, random_hypervector(65, 0))
    with pytest.raises(ConfigError):
        classify(PrototypeMemory(64, []), random_hypervector(64, 0))


# ---------------------------------------------------------------------------
# similarity_profile


def test_similarity_profile_single_class():
    a = random_hypervector(128, 5)
    mem = train([(a, "only")])
    prof = similarity_profile(mem, a)
    assert prof == [("only", 0.0)]


def test_similarity_profile_sorted_and_self_first():
    d = 10_000
    samples = [(random_hypervector(d, s), f"c{s}") for s in range(5)]
    mem = train(samples)
    prof = similarity_profile(mem, samples[2][0])
    assert prof[0] == ("c2", 0.0)
    assert [v for _, v in prof] == sorted(v for _, v in prof)


def test_similarity_profile_random_query_near_half():
    d = 10_000
    mem = train([(random_hypervector(d, s), f"c{s}") for s in range(5)])
    prof = similarity_profile(mem, random_hypervector(d, 999))
    for _, v in prof:
        assert 0.485 <= v <= 0.515


# ---------------------------------------------------------------------------
# evaluate


def test_evaluate_single_class_perfect():
    a = random_hypervector(64, 3)
    mem = train([(a, "x")])
    report = evaluate(mem, [(a, "x"), (a, "x")])
    assert report.accuracy == 1.0
    assert report.confusion.tolist() == [[2]]


def test_evaluate_confusion_structure():
    d = 4096
    protos = {f"c{i}": random_hypervector(d, i) for i in range(4)}
    mem = train([(hv, lb) for lb, hv in protos.items()])
    rng = philox_stream(42)
    test = []
    for i, (lb, proto) in enumerate(protos.items()):
        for k in range(10 + i):  # unbalanced counts on purpose
            bits = proto.to_bits().copy()
            flip = rng.choice(d, size=50, replace=False)
            bits[flip] ^= 1
            test.append((hv_from(bits), lb))
    report = evaluate(mem, test)
    assert report.confusion.sum() == len(test)
    assert np.array_equal(report.per_label_counts, report.confusion.sum(axis=1))
    assert report.per_label_counts.tolist() == [10, 11, 12, 13]
    assert report.accuracy == np.trace(report.confusion) / len(test)
    assert report.accuracy == 1.0  # 50 flips out of 4096 cannot cross classes


def test_evaluate_unknown_label_rejected():
    mem = train([(random_hypervector(64, 0), "a")])
    with pytest.raises(ConfigError):
        evaluate(mem, [(random_hypervector(64, 1), "mystery")])


# ---------------------------------------------------------------------------
# recalibrate


def _mem_and_fresh(d=2048, n_labels=3, n_new=5):
    mem = train([(random_hypervector(d, s), f"c{s}") for s in range(n_labels)])
    new = [
        (random_hypervector(d, 10_000 + 100 * li + k), f"c{li}")
        for li in range(n_labels)
        for k in range(n_new)
    ]
    return mem, new


def test_recalibrate_p_zero_is_identity_on_prototypes():
    mem, new = _mem_and_fresh()
    out = recalibrate(mem, new, 0.0, seed=1)
    for lb in mem.labels:
        assert out.entry(lb).prototype == mem.entry(lb).prototype
        assert out.entry(lb).merged


def test_recalibrate_p_one_equals_fresh_bundle():
    mem, new = _mem_and_fresh()
    out = recalibrate(mem, new, 1.0, seed=1)
    for lb in mem.labels:
        fresh = bundle([hv for hv, l in new if l == lb])
        assert out.entry(lb).prototype == fresh


def test_recalibrate_untouched_labels_unchanged():
    mem, new = _mem_and_fresh()
    only_c1 = [(hv, lb) for hv, lb in new if lb == "c1"]
    out = recalibrate(mem, only_c1, 0.5, seed=3)
    assert out.entry("c0").prototype == mem.entry("c0").prototype
    assert not out.entry("c0").merged
    assert out.entry("c1").merged
    assert out.entry("c1").prototype != mem.entry("c1").prototype


def test_recalibrate_disjoint_subsets_commute():
    mem, new = _mem_and_fresh()
    sub_a = [(hv, lb) for hv, lb in new if lb == "c0"]
    sub_b = [(hv, lb) for hv, lb in new if lb == "c2"]
    ab = recalibrate(recalibrate(mem, sub_a, 0.5, 7), sub_b, 0.5, 7)
    ba = recalibrate(recalibrate(mem, sub_b, 0.5, 7), sub_a, 0.5, 7)
    assert ab == ba


def test_recalibrate_errors():
    mem, new = _mem_and_fresh()
    with pytest.raises(ConfigError):
        recalibrate(mem, [(random_hypervector(2048, 1), "ghost")], 0.5, 1)
    with pytest.raises(ConfigError):
        recalibrate(mem, new, 1.5, 1)
    with pytest.raises(ConfigError):
        recalibrate(mem, [], 0.5, 1)


def test_recalibrate_does_not_mutate_input_memory():
    mem, new = _mem_and_fresh()
    before = [mem.entry(lb).prototype for lb in mem.labels]
    recalibrate(mem, new, 0.5, seed=5)
    assert [mem.entry(lb).prototype for lb in mem.labels] == before
    assert all(not mem.entry(lb).merged for lb in mem.labels)


# ---------------------------------------------------------------------------
# end-to-end brute-force oracle (D=32, L=3, N_s=5)


def test_pipeline_matches_bruteforce_oracle():
    d, n_labels, n_s = 32, 3, 5
    rng = philox_stream(2024)
    for _ in range(1000):
        sample_bits = rng.integers(0, 2, size=(n_labels, n_s, d)).astype(np.uint8)
        query_bits = rng.integers(0, 2, size=d).astype(np.uint8)
        samples = [
            (hv_from(sample_bits[li, k]), f"c{li}")
            for li in range(n_labels)
            for k in range(n_s)
        ]
        mem = train(samples)
        got = classify(mem, hv_from(query_bits)).predicted_label

        protos = brute_train(
            [(sample_bits[li, k], f"c{li}") for li in range(n_labels) for k in range(n_s)]
        )
        assert got == brute_classify(protos, query_bits)
        # prototypes must agree bit-for-bit as well
        for li in range(n_labels):
            assert np.array_equal(
                mem.entry(f"c{li}").prototype.to_bits(), protos[f"c{li}"]
            )
