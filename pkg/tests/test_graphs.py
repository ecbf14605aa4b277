import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from genuine import graphs
from genuine.corpus import CorpusError, ParsedToken, SentenceParse, parse_conllu


def _parse(heads):
    tokens = tuple(ParsedToken(index=i + 1, surface=f"w{i}", head=h)
                   for i, h in enumerate(heads))
    return SentenceParse(tokens)


@st.composite
def random_tree(draw):
    n = draw(st.integers(min_value=1, max_value=25))
    heads = [0]
    for i in range(2, n + 1):
        heads.append(draw(st.integers(min_value=1, max_value=i - 1)))
    return _parse(heads)


class TestBuildDpt:
    def test_white_sea_adjacency(self):
        g = graphs.build_dpt(_parse([3, 3, 0]))
        expected = np.array([[0, 0, 1], [0, 0, 1], [1, 1, 0]], dtype=float)
        assert np.array_equal(g.adjacency, expected)
        assert g.roots == [2]
        assert [m.depth for m in g.node_meta] == [1, 1, 0]

    def test_single_token(self):
        g = graphs.build_dpt(_parse([0]))
        assert g.n == 1 and np.array_equal(g.adjacency, np.zeros((1, 1)))

    def test_chain(self):
        g = graphs.build_dpt(_parse([2, 3, 0]))
        expected = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=float)
        assert np.array_equal(g.adjacency, expected)
        assert [m.depth for m in g.node_meta] == [2, 1, 0]

    @given(random_tree())
    @settings(max_examples=80, deadline=None)
    def test_tree_properties(self, parse):
        g = graphs.build_dpt(parse)
        t = len(parse.tokens)
        assert g.edge_count() == t - 1
        assert np.array_equal(g.adjacency, g.adjacency.T)
        assert np.all(np.diag(g.adjacency) == 0)
        # connected: depths were assigned by BFS, so every node was reached
        assert all(m.depth >= 0 for m in g.node_meta)


class TestBuildNtg:
    def test_three_token_path(self):
        g = graphs.build_ntg(3)
        expected = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=float)
        assert np.array_equal(g.adjacency, expected)

    def test_single(self):
        assert np.array_equal(graphs.build_ntg(1).adjacency, np.zeros((1, 1)))

    def test_two(self):
        g = graphs.build_ntg(2)
        assert g.edge_count() == 1 and g.roots == [0]


class TestMerge:
    def test_single_sentence_unchanged(self):
        g = graphs.build_dpt(_parse([3, 3, 0]))
        merged = graphs.merge_document([g])
        assert np.array_equal(merged.adjacency, g.adjacency)

    def test_two_singletons(self):
        merged = graphs.merge_document([graphs.build_dpt(_parse([0])),
                                        graphs.build_dpt(_parse([0]))])
        assert merged.n == 2 and merged.edge_count() == 1

    def test_chain_adds_k_minus_1_edges(self):
        parts = [graphs.build_dpt(_parse([0, 1])),
                 graphs.build_dpt(_parse([2, 0])),
                 graphs.build_dpt(_parse([0]))]
        merged = graphs.merge_document(parts)
        total_part_edges = sum(p.edge_count() for p in parts)
        assert merged.edge_count() == total_part_edges + 2
        r1, r2, r3 = merged.roots
        assert merged.adjacency[r1, r2] == 1 and merged.adjacency[r2, r3] == 1
        assert merged.adjacency[r1, r3] == 0

    def test_clique_link(self):
        parts = [graphs.build_dpt(_parse([0])) for _ in range(3)]
        merged = graphs.merge_document(parts, link="clique")
        assert merged.edge_count() == 3

    def test_empty_error(self):
        with pytest.raises(CorpusError):
            graphs.merge_document([])

    @given(st.lists(random_tree(), min_size=1, max_size=5))
    @settings(max_examples=50, deadline=None)
    def test_merge_edge_count_property(self, parses):
        parts = [graphs.build_dpt(p) for p in parses]
        merged = graphs.merge_document(parts)
        assert merged.edge_count() == sum(p.edge_count() for p in parts) + len(parts) - 1
        assert np.array_equal(merged.adjacency, merged.adjacency.T)
        assert np.all(np.diag(merged.adjacency) == 0)
        assert len(merged.roots) == len(parts)


class TestNormalize:
    def test_single_node(self):
        assert np.array_equal(graphs.normalize(np.zeros((1, 1))), np.ones((1, 1)))

    def test_two_node_edge(self):
        a = np.array([[0.0, 1.0], [1.0, 0.0]])
        assert np.allclose(graphs.normalize(a), 0.5 * np.ones((2, 2)))

    @given(random_tree())
    @settings(max_examples=50, deadline=None)
    def test_symmetry_and_identity(self, parse):
        a = graphs.build_dpt(parse).adjacency
        ahat = graphs.normalize(a)
        assert np.allclose(ahat, ahat.T, atol=0)
        # D^{1/2} Ahat D^{1/2} must reproduce (A + I) row sums
        d = (a + np.eye(len(a))).sum(axis=1)
        recon = np.sqrt(d)[:, None] * ahat * np.sqrt(d)[None, :]
        assert np.max(np.abs(recon.sum(axis=1) - d)) < 1e-12


class TestDensity:
    def test_path(self):
        assert graphs.density(graphs.build_ntg(3)) == pytest.approx(2 / 3)

    def test_complete(self):
        g = graphs.build_ntg(4)
        g.adjacency = np.ones((4, 4)) - np.eye(4)
        assert graphs.density(g) == 1.0

    def test_single_node(self):
        assert graphs.density(graphs.build_ntg(1)) == 0.0


def test_document_graph_from_conllu():
    text = ("1\tThe\t_\t_\t_\t_\t3\tdet\t_\t_\n"
            "2\tWhite\t_\t_\t_\t_\t3\tamod\t_\t_\n"
            "3\tSea\t_\t_\t_\t_\t0\troot\t_\t_\n")

    class Rec:
        sentences = tuple(parse_conllu(text))

    g = graphs.document_graph(Rec(), "dpt")
    assert np.array_equal(g.adjacency,
                          np.array([[0, 0, 1], [0, 0, 1], [1, 1, 0]], dtype=float))
    n = graphs.document_graph(Rec(), "ntg")
    assert np.array_equal(n.adjacency,
                          np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=float))


def test_edge_list_export():
    g = graphs.build_ntg(3)
    assert graphs.to_edge_list(g) == "0 1\n1 2\n"
