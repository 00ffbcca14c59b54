"""
Unit tests for loading, splitting and sampling interaction data.
"""

import numpy as np
import pytest
from scipy import stats

from transfair.dataset import (
    InteractionDataset,
    NegativeSampler,
    attach_sensitive,
    cold_start_split,
    dataset_stats,
    leave_one_out,
    load_interactions,
    load_sensitive,
    make_planted_dataset,
    minibatches,
    read_split,
    sample_negatives,
    subsample_users,
    two_gaussian_toy,
    write_split,
)
from transfair.errors import (
    ConfigError,
    CoverageError,
    DataError,
    DataFormatError,
    DomainError,
    EmptyDatasetError,
    PoolExhaustedError,
    ProtocolError,
    ShapeError,
)

RATINGS = "1::10::5::978300760\n1::20::3::978302109\n2::10::4::978301968\n2::30::1::978300275\n1::10::2::978824291\n"
USERS = "1::F::1::10::48067\n2::M::56::16::70072\n"


def _tiny_dataset() -> InteractionDataset:
    return InteractionDataset(
        user_ids=("a", "b", "c"),
        item_ids=("x", "y", "z", "w"),
        users=np.array([0, 0, 1, 2, 2, 2]),
        items=np.array([1, 0, 2, 0, 1, 3]),
    )


class TestLoaders:
    """Test cases for interaction and attribute readers."""

    def test_ml1m_ratings(self, tmp_path):
        path = tmp_path / "ratings.dat"
        path.write_text(RATINGS, encoding="latin-1")
        ds = load_interactions(path, "ml1m")
        assert ds.user_ids == ("1", "2")
        assert ds.item_ids == ("10", "20", "30")
        # the repeated (1, 10) rating collapses into one implicit positive
        assert ds.n_interactions == 4
        assert ds.items_of(0).tolist() == [0, 1]

    def test_tsv_with_header(self, tmp_path):
        path = tmp_path / "plays.tsv"
        path.write_text("user\titem\tcount\nu1\tartist9\t12\nu2\tartist9\t3\n", encoding="utf-8")
        ds = load_interactions(path, "tsv", header=True)
        assert ds.n_users == 2
        assert ds.n_items == 1

    def test_max_id_index_space(self, tmp_path):
        path = tmp_path / "ratings.dat"
        path.write_text(RATINGS, encoding="latin-1")
        ds = load_interactions(path, "ml1m", index_space="max_id")
        assert ds.n_items == 30
        assert ds.item_ids[9] == "10"
        assert ds.items_of(1).tolist() == [9, 29]

    def test_bad_line_reports_line_number(self, tmp_path):
        path = tmp_path / "ratings.dat"
        path.write_text("1::10::5::1\n1::20\n", encoding="latin-1")
        with pytest.raises(DataFormatError) as excinfo:
            load_interactions(path, "ml1m")
        assert excinfo.value.line_number == 2
        assert ":2:" in str(excinfo.value)

    def test_non_numeric_value(self, tmp_path):
        path = tmp_path / "plays.tsv"
        path.write_text("u1\ti1\tmany\n", encoding="utf-8")
        with pytest.raises(DataFormatError, match="not a number"):
            load_interactions(path, "tsv")

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.tsv"
        path.write_text("\n\n", encoding="utf-8")
        with pytest.raises(EmptyDatasetError):
            load_interactions(path, "tsv")

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError) as excinfo:
            load_interactions(tmp_path / "absent.dat", "ml1m")
        assert excinfo.value.exit_code == 3

    def test_sensitive_labels(self, tmp_path):
        path = tmp_path / "users.dat"
        path.write_text(USERS, encoding="latin-1")
        assert load_sensitive(path, "ml1m_users") == {"1": 1, "2": 0}

    def test_unknown_sensitive_token(self, tmp_path):
        path = tmp_path / "users.tsv"
        path.write_text("u1\tX\n", encoding="utf-8")
        with pytest.raises(DataFormatError, match="unknown sensitive token"):
            load_sensitive(path, "tsv")

    def test_custom_token_table(self, tmp_path):
        path = tmp_path / "users.tsv"
        path.write_text("u1\tyes\nu2\tno\n", encoding="utf-8")
        assert load_sensitive(path, "tsv", token_table={"yes": 1, "no": 0}) == {"u1": 1, "u2": 0}

    def test_attach_sensitive_reports_missing_users(self):
        ds = _tiny_dataset()
        with pytest.raises(CoverageError) as excinfo:
            attach_sensitive(ds, {"a": 1})
        assert excinfo.value.missing == ["b", "c"]
        assert attach_sensitive(ds, {"a": 1, "b": 0, "c": 1}).sensitive.tolist() == [1, 0, 1]


class TestInteractionDataset:
    """Test cases for the dataset container."""

    def test_sorted_storage_and_lookup(self):
        ds = _tiny_dataset()
        assert ds.items_of(0).tolist() == [0, 1]
        assert ds.items_of(2).tolist() == [0, 1, 3]

    def test_duplicate_pairs_rejected(self):
        with pytest.raises(ShapeError, match="duplicate"):
            InteractionDataset(("a",), ("x",), np.array([0, 0]), np.array([0, 0]))

    def test_stats(self):
        stats = dataset_stats(_tiny_dataset())
        assert (stats.n_users, stats.n_items, stats.n_interactions) == (3, 4, 6)
        assert stats.sparsity == pytest.approx(0.5)

    def test_subsample_users(self, planted):
        sub = subsample_users(planted, 0.5, seed=1)
        assert sub.n_users == 100
        assert sub.n_items == planted.n_items
        kept = [planted.user_ids.index(u) for u in sub.user_ids]
        assert sub.sensitive.tolist() == planted.sensitive[kept].tolist()
        assert sub.items_of(0).tolist() == planted.items_of(kept[0]).tolist()
        assert subsample_users(planted, 1.0, seed=1) is planted


class TestColdStartSplit:
    """Test cases for the source/target partition."""

    @pytest.mark.parametrize("seed", range(50))
    def test_split_invariants(self, seed):
        ds = make_planted_dataset(200, 300, seed=seed)
        split = leave_one_out(cold_start_split(ds, 0.2, 5, seed), seed)
        source, target = set(split.source_users.tolist()), set(split.target_users.tolist())

        assert not source & target
        assert source | target | set(split.dropped_users) == set(range(ds.n_users))
        assert len(target) + len(split.dropped_users) == 40

        source_items = np.unique(np.concatenate([ds.items_of(u) for u in split.source_users]))
        np.testing.assert_array_equal(split.catalog, source_items)

        for user in split.target_users:
            assignment = split.assignments[int(user)]
            kept = assignment.items
            assert 1 <= len(kept) <= 5
            assert set(kept) <= set(split.catalog.tolist())
            assert set(kept) | set(split.hidden[int(user)]) == set(ds.items_of(int(user)).tolist())
        for user, assignment in split.assignments.items():
            held = [i for i in (assignment.val, assignment.test) if i is not None]
            assert len(set(held)) == len(held)
            assert not set(assignment.train) & set(held)
            n = len(assignment.items)
            assert (assignment.val is not None) == (n >= 3)
            assert (assignment.test is not None) == (n >= 2)

    def test_source_users_keep_everything(self, planted):
        split = cold_start_split(planted, 0.2, 5, seed=0)
        for user in split.source_users[:20]:
            assert split.interactions(int(user)) == tuple(planted.items_of(int(user)).tolist())

    def test_split_is_deterministic(self, planted):
        a = cold_start_split(planted, 0.2, 5, seed=11)
        b = cold_start_split(planted, 0.2, 5, seed=11)
        np.testing.assert_array_equal(a.target_users, b.target_users)
        assert a.assignments == b.assignments

    def test_bad_fraction(self, planted):
        with pytest.raises(ConfigError):
            cold_start_split(planted, 1.0, 5, 0)

    def test_cold_items_drop_target_users(self):
        # user c only interacted with item w, which no other user touched
        ds = InteractionDataset(
            user_ids=("a", "b", "c"),
            item_ids=("x", "w"),
            users=np.array([0, 1, 2]),
            items=np.array([0, 0, 1]),
        )
        for seed in range(60):
            split = cold_start_split(ds, 0.34, 5, seed)
            if split.dropped_users:
                assert split.dropped_users == (2,)
                assert split.target_users.size == 0
                break
        else:
            pytest.fail("user c was never drawn as a target")

    def test_domain_checks(self, planted_split):
        target = planted_split.target_users[:3]
        with pytest.raises(DomainError):
            planted_split.require_domain(target, "S")
        planted_split.require_domain(target, "T")
        with pytest.raises(DomainError):
            planted_split.domain_of(10_000)

    def test_evaluable_users_need_hold_out(self, planted):
        split = cold_start_split(planted, 0.2, 5, 0)
        with pytest.raises(ProtocolError):
            split.evaluable_users("T", "test")

    def test_access_log(self, planted):
        split = leave_one_out(cold_start_split(planted, 0.2, 5, 0), 0)
        split.pairs("S", "train")
        split.held_out_item(int(split.target_users[0]), "test")
        assert split.accessed == {("S", "train"), ("T", "test")}

    def test_known_items_include_hidden(self, planted_split):
        user = next(int(u) for u in planted_split.target_users if planted_split.hidden[int(u)])
        known = set(planted_split.known_items(user).tolist())
        assert set(planted_split.hidden[user]) <= known
        assert set(planted_split.interactions(user)) <= known


class TestSampling:
    """Test cases for negative sampling and batching."""

    def test_sample_negatives_excludes_known_and_extra(self, planted_split):
        user = int(planted_split.source_users[0])
        extra = [int(planted_split.catalog[0])]
        negatives = sample_negatives(planted_split, user, 20, exclude=extra, seed=5)
        assert len(set(negatives.tolist())) == 20
        assert not set(negatives.tolist()) & set(planted_split.known_items(user).tolist())
        assert extra[0] not in negatives
        assert set(negatives.tolist()) <= set(planted_split.catalog.tolist())

    def test_sample_negatives_pool_exhausted(self):
        ds = _tiny_dataset()
        with pytest.raises(PoolExhaustedError):
            sample_negatives(ds, 2, 2)
        assert sample_negatives(ds, 2, 1).tolist() == [2]

    def test_negatives_are_uniform_over_the_pool(self):
        ds = InteractionDataset(("a",), tuple("abcdefghijkl"), np.array([0, 0]), np.array([3, 7]))
        pool = np.setdiff1d(np.arange(12), [3, 7])
        rng = np.random.default_rng(11)
        drawn = np.concatenate([sample_negatives(ds, 0, 3, seed=rng) for _ in range(4000)])
        counts = np.bincount(drawn, minlength=12)
        assert counts[3] == counts[7] == 0
        assert stats.chisquare(counts[pool]).pvalue > 1e-3

        sampler_draws = NegativeSampler(ds, [0]).sample(np.zeros(12000, dtype=np.int64), np.random.default_rng(12))
        counts = np.bincount(sampler_draws, minlength=12)
        assert counts[3] == counts[7] == 0
        assert stats.chisquare(counts[pool]).pvalue > 1e-3

    def test_negative_sampler_rejects_known(self, planted_split):
        users, _ = planted_split.pairs("S", "train")
        sampler = NegativeSampler(planted_split, users)
        negatives = sampler.sample(users, np.random.default_rng(0))
        for user, item in zip(users[:500], negatives[:500], strict=True):
            assert item not in planted_split.known_items(int(user))
        again = sampler.sample(users, np.random.default_rng(0))
        np.testing.assert_array_equal(negatives, again)

    def test_negative_sampler_full_user(self):
        ds = InteractionDataset(("a", "b"), ("x", "y"), np.array([0, 0, 1]), np.array([0, 1, 0]))
        with pytest.raises(PoolExhaustedError):
            NegativeSampler(ds, [0])

    def test_minibatches_merge_short_tail(self):
        chunks = list(minibatches(np.arange(9), 4, min_size=2))
        assert [c.tolist() for c in chunks] == [[0, 1, 2, 3], [4, 5, 6, 7, 8]]
        assert [c.size for c in minibatches(np.arange(9), 4)] == [4, 4, 1]
        with pytest.raises(PoolExhaustedError):
            list(minibatches(np.arange(1), 4, min_size=2))


class TestSplitFiles:
    """Test cases for the split file format."""

    def test_write_then_read(self, planted, planted_split, tmp_path):
        path = write_split(planted_split, planted, tmp_path / "split.tsv")
        restored = read_split(path, planted)
        assert restored.seed == planted_split.seed
        assert restored.held_out is True
        assert restored.assignments == planted_split.assignments
        np.testing.assert_array_equal(restored.source_users, planted_split.source_users)
        np.testing.assert_array_equal(restored.target_users, planted_split.target_users)
        np.testing.assert_array_equal(restored.catalog, planted_split.catalog)
        assert restored.hidden == planted_split.hidden
        assert restored.dropped_users == planted_split.dropped_users

    def test_bad_role(self, planted, tmp_path):
        path = tmp_path / "split.tsv"
        path.write_text(f"# seed=1\n{planted.user_ids[0]}\t{planted.item_ids[0]}\tholdout\tS\n", encoding="utf-8")
        with pytest.raises(DataFormatError, match="bad role"):
            read_split(path, planted)


class TestSynthetic:
    """Test cases for the synthetic benchmarks."""

    def test_planted_labels_shape_preferences(self):
        ds = make_planted_dataset(400, 100, seed=2)
        first_half = ds.items < 50
        share = np.array([first_half[ds.users == u].mean() for u in range(ds.n_users)])
        assert share[ds.sensitive == 1].mean() > share[ds.sensitive == 0].mean() + 0.2

    def test_two_gaussian_toy(self):
        source, target = two_gaussian_toy(500, 400, dim=3, shift=2.0, seed=0)
        assert source.shape == (500, 3)
        assert target.shape == (400, 3)
        assert source.mean() == pytest.approx(2.0, abs=0.2)
        assert target.mean() == pytest.approx(0.0, abs=0.2)
