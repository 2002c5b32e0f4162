import numpy as np
import pytest

from easecf import (
    EmptyDatasetError,
    IngestError,
    InteractionMatrix,
    ingest,
    load_matrix,
    read_interactions,
    save_matrix,
)
from easecf.interactions import Vocabulary

from conftest import random_binary_matrix


class TestReadInteractions:
    def test_comma_and_tab_autodetect(self):
        csv = ["a,x,2.0", "b,y"]
        tsv = ["a\tx\t2.0", "b\ty"]
        assert list(read_interactions(csv)) == list(read_interactions(tsv))
        assert list(read_interactions(csv)) == [("a", "x", 2.0), ("b", "y", 1.0)]

    def test_header_detected_by_name(self):
        lines = ["userId,movieId,rating,timestamp", "1,10,4.0,999"]
        assert list(read_interactions(lines)) == [("1", "10", 4.0)]

    def test_header_detected_by_nonnumeric_value(self):
        lines = ["alice,bob,score", "alice,bob,3"]
        assert list(read_interactions(lines)) == [("alice", "bob", 3.0)]

    def test_no_header_two_columns(self):
        assert list(read_interactions(["a,x", "b,y"])) == [
            ("a", "x", 1.0),
            ("b", "y", 1.0),
        ]

    def test_timestamp_ignored(self):
        assert list(read_interactions(["a,x,2.5,1234567"])) == [("a", "x", 2.5)]

    def test_explicit_delimiter(self):
        assert list(read_interactions(["a|b,c"], delimiter="|")) == [("a", "b,c", 1.0)]

    def test_blank_lines_skipped(self):
        assert list(read_interactions(["a,x", "", "b,y", "   "])) == [
            ("a", "x", 1.0),
            ("b", "y", 1.0),
        ]

    @pytest.mark.parametrize(
        "lines,bad_line",
        [
            (["a,x", "justonefield"], 2),
            (["a,x", "b,y,notanumber"], 2),
            (["a,x,1,2,3"], 1),
            (["a,x,-1.0"], 1),
            (["a,x,0"], 1),
            (["a,x", ",x"], 2),
            (["a,x,inf"], 1),
        ],
    )
    def test_malformed_line_reports_number(self, lines, bad_line):
        with pytest.raises(IngestError) as exc:
            list(read_interactions(lines))
        assert exc.value.line_no == bad_line
        assert f"line {bad_line}" in str(exc.value)

    def test_reads_from_path(self, tmp_path):
        path = tmp_path / "data.csv"
        path.write_text("a,x\nb,y\n")
        assert list(read_interactions(path)) == [("a", "x", 1.0), ("b", "y", 1.0)]


class TestIngest:
    def test_passthrough(self):
        records = [("u1", "a"), ("u1", "b"), ("u2", "b"), ("u2", "c")]
        m = ingest(records)
        assert (m.n_users, m.n_items, m.nnz) == (2, 3, 4)

    def test_vocab_first_appearance_order(self):
        m = ingest([("u2", "b"), ("u1", "a"), ("u2", "a")])
        assert m.users.ids == ("u2", "u1")
        assert m.items.ids == ("b", "a")

    def test_duplicates_keep_max(self):
        m = ingest([("u", "a", 1.0), ("u", "a", 3.0), ("u", "a", 2.0)])
        assert m.nnz == 1
        assert m.row(0)[1].tolist() == [3.0]

    def test_duplicate_collapse_is_order_independent(self):
        a = ingest([("u", "a", 1.0), ("u", "a", 3.0)])
        b = ingest([("u", "a", 3.0), ("u", "a", 1.0)])
        assert a == b

    def test_binarize(self):
        m = ingest([("u", "a", 5.0), ("v", "b", 2.0)], binarize=True)
        assert np.array_equal(m.csr.data, [1.0, 1.0])

    def test_value_threshold(self):
        m = ingest(
            [("u", "a", 4.0), ("u", "b", 3.5), ("v", "a", 5.0)],
            value_threshold=4.0,
        )
        assert m.nnz == 2
        assert m.items.ids == ("a",)

    def test_min_user_activity_removes_user_and_vocab(self):
        records = [("busy", f"i{k}") for k in range(5)] + [("quiet", "i0")]
        m = ingest(records, min_user_activity=5)
        assert m.users.ids == ("busy",)
        assert m.n_users == 1

    def test_filter_fixpoint_cascade(self):
        # dropping item c starves u3, dropping u3 keeps a and b alive
        records = [
            ("u1", "a"), ("u1", "b"),
            ("u2", "a"), ("u2", "b"),
            ("u3", "c"),
        ]
        m = ingest(records, min_user_activity=2, min_item_activity=2)
        assert m.users.ids == ("u1", "u2")
        assert m.items.ids == ("a", "b")
        assert np.all(m.user_counts() >= 2)
        assert np.all(m.item_counts() >= 2)

    def test_filter_cascade_to_empty(self):
        records = [("u1", "a"), ("u1", "b"), ("u2", "a"), ("u3", "b"), ("u4", "c")]
        with pytest.raises(EmptyDatasetError):
            ingest(records, min_user_activity=2, min_item_activity=3)

    def test_fixpoint_property_random(self, rng):
        for _ in range(20):
            n = int(rng.integers(10, 60))
            records = [
                (f"u{rng.integers(0, 12)}", f"i{rng.integers(0, 8)}")
                for _ in range(n)
            ]
            min_u = int(rng.integers(1, 4))
            min_i = int(rng.integers(1, 4))
            try:
                m = ingest(records, min_user_activity=min_u, min_item_activity=min_i)
            except EmptyDatasetError:
                continue
            assert np.all(m.user_counts() >= min_u)
            assert np.all(m.item_counts() >= min_i)

    def test_empty_input(self):
        with pytest.raises(EmptyDatasetError):
            ingest([])

    def test_negative_threshold_rejected(self):
        with pytest.raises(ValueError):
            ingest([("u", "a")], min_user_activity=-1)


class TestInvariants:
    def test_rows_sorted_and_positive(self, rng):
        for _ in range(10):
            m = random_binary_matrix(rng, 15, 8, density=0.4)
            for u in range(m.n_users):
                idx, vals = m.row(u)
                assert np.all(np.diff(idx) > 0)
                assert np.all(vals > 0)

    def test_vocab_bijection(self, rng):
        m = random_binary_matrix(rng, 10, 6)
        assert len(set(m.users.ids)) == m.n_users
        assert len(set(m.items.ids)) == m.n_items
        for j, item in enumerate(m.items.ids):
            assert m.items.index[item] == j

    def test_nonpositive_values_rejected(self):
        import scipy.sparse as sp

        bad = sp.csr_matrix(np.array([[1.0, -2.0], [0.0, 1.0]]))
        with pytest.raises(ValueError):
            InteractionMatrix(bad, Vocabulary(("u0", "u1")), Vocabulary(("a", "b")))


class TestCanonicalFormat:
    def test_round_trip_binary(self, rng, tmp_path):
        m = random_binary_matrix(rng, 12, 7)
        save_matrix(m, tmp_path / "m")
        assert load_matrix(tmp_path / "m") == m

    def test_round_trip_weighted_bit_exact(self, tmp_path):
        m = ingest([
            ("u1", "a", 0.1), ("u1", "b", 1.0 / 3.0),
            ("u2", "a", 7.25), ("u2", "c", 1e-17),
        ])
        save_matrix(m, tmp_path / "m")
        loaded = load_matrix(tmp_path / "m")
        assert loaded == m
        assert np.array_equal(loaded.csr.data, m.csr.data)

    def test_header_line(self, tmp_path, tiny_matrix):
        save_matrix(tiny_matrix, tmp_path / "m")
        first = (tmp_path / "m" / "interactions.txt").read_text().splitlines()[0]
        assert first == "# users=2 items=2 nnz=3"

    def test_ingest_idempotent_through_format(self, rng, tmp_path):
        m = random_binary_matrix(rng, 20, 9)
        save_matrix(m, tmp_path / "a")
        again = load_matrix(tmp_path / "a")
        save_matrix(again, tmp_path / "b")
        assert load_matrix(tmp_path / "b") == m
