import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from cfbench.dataset import (DatasetSplit, InteractionMatrix, ParseError, load_interactions,
                             load_matrix, make_split, read_id_map, save_matrix, split_holdout,
                             transpose, write_id_map)

from conftest import ML100K, as_matrix, random_binary


def write(tmp_path, text, name="ratings.txt"):
    p = tmp_path / name
    p.write_text(text)
    return p


class TestInteractionMatrix:
    def test_binarizes_and_deduplicates(self):
        csr = sp.csr_matrix(np.array([[0, 3, 0], [2, 0, 5]], dtype=float))
        m = InteractionMatrix(csr)
        np.testing.assert_array_equal(m.csr.data, 1.0)
        assert m.nnz == 3
        dup = InteractionMatrix.from_pairs([0, 0, 1], [1, 1, 2], (2, 3))
        assert dup.nnz == 2

    def test_indices_sorted_within_rows(self, rng):
        m = as_matrix(random_binary(rng, 30, 40))
        for r in range(m.num_rows):
            cols = m.row(r)
            assert np.all(np.diff(cols) > 0)
            assert np.all(cols < m.num_cols)

    def test_transpose(self):
        m = InteractionMatrix.from_pairs([2], [5], (3, 7))
        t = transpose(m)
        assert t.shape == (7, 3)
        assert t.pairs()[0].tolist() == [5] and t.pairs()[1].tolist() == [2]
        assert transpose(t) == m

    def test_counts(self):
        m = as_matrix([[1, 1, 0], [0, 1, 1]])
        np.testing.assert_array_equal(m.row_lengths(), [2, 2])
        np.testing.assert_array_equal(m.col_counts(), [1, 2, 1])

    def test_immutable_data(self):
        m = as_matrix([[1, 0], [0, 1]])
        with pytest.raises(ValueError):
            m.csr.data[0] = 5.0


class TestLoader:
    def test_threshold_admits_all(self, tmp_path):
        p = write(tmp_path, "1\t10\t5\t0\n2\t10\t3\t0\n1\t20\t1\t0\n3\t30\t4\t0\n")
        m = load_interactions(p, "tab", 1.0)
        assert m.nnz == 4
        assert m.shape == (3, 3)

    def test_threshold_filters_but_keeps_index_space(self, tmp_path):
        p = write(tmp_path, "1\t10\t5\n2\t11\t1\n")
        m = load_interactions(p, "tab", 4.0)
        assert m.shape == (2, 2)
        assert m.nnz == 1

    def test_first_appearance_reindexing(self, tmp_path):
        p = write(tmp_path, "u9::i7::5::1\nu2::i7::4::1\nu9::i1::3::2\n")
        m = load_interactions(p, "double-colon")
        assert list(m.row_ids) == ["u9", "u2"]
        assert list(m.col_ids) == ["i7", "i1"]
        np.testing.assert_array_equal(m.dense_rows([0, 1]), [[1, 1], [1, 0]])

    def test_malformed_line_reports_lineno(self, tmp_path):
        p = write(tmp_path, "1\t2\t3\n1\t2\n")
        with pytest.raises(ParseError) as err:
            load_interactions(p, "tab")
        assert err.value.lineno == 2

    def test_non_numeric_rating(self, tmp_path):
        p = write(tmp_path, "1\t2\tfive\n")
        with pytest.raises(ParseError, match=":1:"):
            load_interactions(p, "tab")

    def test_empty_file(self, tmp_path):
        with pytest.raises(ValueError, match="no records"):
            load_interactions(write(tmp_path, "\n\n"), "tab")

    def test_unknown_layout(self, tmp_path):
        with pytest.raises(ValueError):
            load_interactions(write(tmp_path, "1 2 3\n"), "csv")

    def test_idempotent(self, tmp_path):
        p = write(tmp_path, "1 2 3\n4 5 1\n1 5 2\n", "w.txt")
        assert load_interactions(p, "whitespace") == load_interactions(p, "whitespace")

    def test_id_map_round_trip(self, tmp_path):
        p = write(tmp_path, "a\tx\t1\nb\ty\t1\nc\tx\t1\n")
        m = load_interactions(p, "tab")
        write_id_map(tmp_path / "rows.txt", m.row_ids, header="users")
        decoded = read_id_map(tmp_path / "rows.txt")
        np.testing.assert_array_equal(decoded, m.row_ids)

    @pytest.mark.skipif(not __import__("os").path.exists(ML100K), reason="ML100K not available")
    def test_ml100k_shape(self):
        m = load_interactions(ML100K, "tab")
        assert m.shape == (943, 1682)
        assert m.nnz == 100_000
        assert transpose(m).shape == (1682, 943)


class TestSplits:
    def test_exact_count(self, rng):
        m = InteractionMatrix.from_pairs(np.arange(10) % 3, np.arange(10), (3, 10))
        train, hold = split_holdout(m, 0.8, seed=3)
        assert (train.nnz, hold.nnz) == (8, 2)

    def test_rounding_boundary(self):
        m = InteractionMatrix.from_pairs(np.zeros(10, int), np.arange(10), (1, 10))
        train, hold = split_holdout(m, 0.9999, seed=0)
        assert (train.nnz, hold.nnz) == (10, 0)

    def test_deterministic(self, rng):
        m = as_matrix(random_binary(rng, 20, 30))
        a = split_holdout(m, 0.8, 7)
        b = split_holdout(m, 0.8, 7)
        assert a[0] == b[0] and a[1] == b[1]

    @pytest.mark.parametrize("ratio", [0.0, 1.0, -0.2, 1.5])
    def test_bad_ratio(self, ratio):
        with pytest.raises(ValueError):
            split_holdout(as_matrix([[1, 1]]), ratio, 0)

    def test_empty_matrix(self):
        with pytest.raises(ValueError):
            split_holdout(as_matrix(np.zeros((2, 2))), 0.5, 0)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10_000), st.floats(0.05, 0.95), st.integers(1, 12), st.integers(1, 12))
    def test_partition_property(self, seed, ratio, n_rows, n_cols):
        rng = np.random.default_rng(seed)
        m = as_matrix(random_binary(rng, n_rows, n_cols, 0.5))
        train, hold = split_holdout(m, ratio, seed)
        assert train.shape == hold.shape == m.shape
        assert train.nnz + hold.nnz == m.nnz
        a = set(zip(*map(list, train.pairs())))
        b = set(zip(*map(list, hold.pairs())))
        assert not a & b
        assert a | b == set(zip(*map(list, m.pairs())))

    def test_three_way_split_disjoint(self, rng):
        m = as_matrix(random_binary(rng, 40, 50))
        s = make_split(m, 0.8, 0.8, seed=5)
        sets = [set(zip(*map(list, x.pairs()))) for x in (s.train, s.validation, s.test)]
        assert not sets[0] & sets[1] and not sets[0] & sets[2] and not sets[1] & sets[2]
        assert sum(len(x) for x in sets) == m.nnz
        assert s.train_full().nnz == s.train.nnz + s.validation.nnz

    def test_split_shape_mismatch(self):
        with pytest.raises(ValueError):
            DatasetSplit(as_matrix([[1, 0]]), as_matrix([[1, 0, 0]]))

    def test_save_load_round_trip(self, tmp_path, rng):
        m = as_matrix(random_binary(rng, 9, 11))
        save_matrix(tmp_path / "m.npz", m, seed=4, config_hash="abc")
        back, meta = load_matrix(tmp_path / "m.npz")
        assert back == m
        assert meta == {"seed": "4", "config_hash": "abc"}
