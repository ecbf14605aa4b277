import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from genuine import features
from genuine.corpus import ParsedToken, SentenceParse, GenerationRecord
from genuine.features import (FeatureError, TokenFeatures, aggregate,
                              align_subwords, build_node_features, entropy)
from genuine.graphs import document_graph


class TestEntropy:
    def test_one_hot(self):
        assert entropy([1.0, 0.0, 0.0]) == 0.0

    def test_uniform_four(self):
        assert entropy([0.25] * 4) == pytest.approx(math.log(4))

    def test_hand_sum(self):
        # direct summation oracle: -(0.5 ln 0.5 + 2 * 0.25 ln 0.25)
        expected = -(0.5 * math.log(0.5) + 0.5 * math.log(0.25))
        assert entropy([0.5, 0.25, 0.25]) == pytest.approx(expected)
        assert expected == pytest.approx(1.0397, abs=1e-4)

    def test_negative_entry(self):
        with pytest.raises(FeatureError):
            entropy([1.1, -0.1])

    def test_sum_deviation(self):
        with pytest.raises(FeatureError):
            entropy([0.5, 0.4])

    @given(st.lists(st.floats(min_value=1e-9, max_value=1.0), min_size=1, max_size=20))
    @settings(max_examples=100, deadline=None)
    def test_nonneg_and_uniform_maximizes(self, weights):
        p = np.array(weights) / np.sum(weights)
        h = entropy(p)
        assert h >= 0.0
        assert h <= math.log(len(p)) + 1e-9


class TestAggregate:
    def test_hand_arithmetic(self):
        toks = [TokenFeatures(prob=p, entropy=0.5) for p in (0.2, 0.4, 0.6)]
        agg = aggregate(toks)
        assert agg.avg_prob == pytest.approx(0.4)
        assert agg.max_prob == pytest.approx(0.6)
        assert agg.min_prob == pytest.approx(0.2)
        assert agg.std_prob == pytest.approx(0.2)   # n-1 denominator

    def test_single_token(self):
        agg = aggregate([TokenFeatures(prob=0.7, entropy=1.1)])
        assert agg.max_prob == agg.min_prob == agg.avg_prob == 0.7
        assert agg.std_prob == 0.0 and agg.std_ent == 0.0

    def test_constant_sequence(self):
        agg = aggregate([TokenFeatures(prob=0.5, entropy=2.0)] * 5)
        assert agg.std_ent == pytest.approx(0.0)

    def test_empty_error(self):
        with pytest.raises(FeatureError):
            aggregate([])

    @given(st.lists(st.tuples(st.floats(min_value=0.01, max_value=1.0),
                              st.floats(min_value=0.0, max_value=5.0)),
                    min_size=1, max_size=30))
    @settings(max_examples=100, deadline=None)
    def test_min_avg_max_order(self, pairs):
        agg = aggregate([TokenFeatures(prob=p, entropy=h) for p, h in pairs])
        assert agg.min_prob <= agg.avg_prob <= agg.max_prob
        assert agg.min_ent <= agg.avg_ent <= agg.max_ent
        assert agg.std_prob >= 0.0 and agg.std_ent >= 0.0


class TestAlignSubwords:
    def test_singleton_identity(self):
        out = align_subwords([(0, 1), (1, 2)], [0.5, 0.9], [1.0, 2.0])
        assert [t.prob for t in out] == pytest.approx([0.5, 0.9])
        assert [t.entropy for t in out] == pytest.approx([1.0, 2.0])

    def test_geometric_mean_prob(self):
        out = align_subwords([(0, 2)], [0.25, 1.0], [0.0, 0.0])
        assert out[0].prob == pytest.approx(0.5)

    def test_mean_entropy(self):
        out = align_subwords([(0, 2)], [1.0, 1.0], [1.0, 3.0])
        assert out[0].entropy == pytest.approx(2.0)

    def test_gap_rejected(self):
        with pytest.raises(FeatureError):
            align_subwords([(0, 1), (2, 3)], [0.5, 0.5, 0.5], [0, 0, 0])

    def test_overlap_rejected(self):
        with pytest.raises(FeatureError):
            align_subwords([(0, 2), (1, 3)], [0.5, 0.5, 0.5], [0, 0, 0])

    def test_uncovered_tail_rejected(self):
        with pytest.raises(FeatureError):
            align_subwords([(0, 1)], [0.5, 0.5], [0, 0])

    @given(st.lists(st.floats(min_value=0.05, max_value=1.0), min_size=1, max_size=10))
    @settings(max_examples=60, deadline=None)
    def test_all_singletons_identity(self, probs):
        spans = [(i, i + 1) for i in range(len(probs))]
        out = align_subwords(spans, probs, [0.5] * len(probs))
        assert [t.prob for t in out] == pytest.approx(probs)


def _record(probs, ents, embeddings=None):
    heads = [0] + [1] * (len(probs) - 1)
    tokens = tuple(ParsedToken(index=i + 1, surface=f"w{i}", head=h)
                   for i, h in enumerate(heads))
    return GenerationRecord(
        id="r0", task="qa", prompt="p", response=" ".join(f"w{i}" for i in range(len(probs))),
        reference="ref", sentences=(SentenceParse(tokens),),
        token_probs=list(probs), token_entropies=list(ents),
        embeddings=embeddings)


class TestNodeFeatures:
    def test_grey_shape_and_order(self):
        rec = _record([0.9, 0.8, 0.7], [0.1, 0.2, 0.3])
        g = document_graph(rec, "dpt")
        nf = build_node_features(rec, g)
        assert nf.x_grey.shape == (3, 2)
        assert np.allclose(nf.x_grey[:, 0], [0.9, 0.8, 0.7])
        assert np.allclose(nf.x_grey[:, 1], [0.1, 0.2, 0.3])
        assert nf.x_white is None

    def test_white_present_iff_embeddings(self):
        emb = [[float(i + j) for j in range(8)] for i in range(3)]
        rec = _record([0.9, 0.8, 0.7], [0.1, 0.2, 0.3], embeddings=emb)
        nf = build_node_features(rec, document_graph(rec, "dpt"))
        assert nf.x_white.shape == (3, 8)

    def test_count_mismatch(self):
        rec = _record([0.9, 0.8, 0.7], [0.1, 0.2, 0.3])
        small = document_graph(_record([0.9, 0.8], [0.1, 0.2]), "dpt")
        with pytest.raises(FeatureError):
            build_node_features(rec, small)

    def test_all_finite(self):
        rec = _record([0.9, 0.8, 0.7], [0.1, 0.2, 0.3])
        nf = build_node_features(rec, document_graph(rec, "dpt"))
        assert np.all(np.isfinite(nf.x_grey))
