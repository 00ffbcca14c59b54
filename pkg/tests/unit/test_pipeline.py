"""
Tests for the experiment pipeline on the tiny synthetic configuration.
"""

import json
from pathlib import Path

import pytest

from transfair.config import load_config
from transfair.dataset import make_planted_dataset
from transfair.errors import CorruptArtifactError, DataError
from transfair.evalkit import EvalReport
from transfair.pipeline import (
    CONFIG_FILE,
    HISTORY_FILE,
    REPORT_FILE,
    SPLIT_FILE,
    STEP1_CHECKPOINT,
    STEP2_CHECKPOINT,
    attack,
    evaluate,
    load_prepared,
    prepare_split,
    run_experiment,
    stage,
    train_source,
    transfer,
)
from transfair.utils.checkpoint import load_checkpoint

ARTIFACTS = (SPLIT_FILE, STEP1_CHECKPOINT, STEP2_CHECKPOINT, HISTORY_FILE, REPORT_FILE)
SYNTHETIC_CONFIG = Path(__file__).parent.parent.parent / "configs" / "synthetic.conf"
BENCHMARK_SEEDS = (0, 1, 2)


def _target_roles(split) -> set[str]:
    return {role for domain, role in split.accessed if domain == "T"}


class TestRunExperiment:
    """Test cases for complete runs."""

    def test_unsupervised_run(self, tiny_config):
        config = tiny_config("tfr_unsupervised")
        report = run_experiment(config)
        out = config.output_dir
        for name in (*ARTIFACTS, CONFIG_FILE):
            assert (out / name).exists(), name

        assert report.mode == "tfr_unsupervised"
        assert report.build == "v0.1.0"
        assert set(report.metrics) == {"ndcg@5", "ndcg@10", "hit@5", "hit@10"}
        assert 0.0 <= report.metrics["ndcg@5"] <= report.metrics["ndcg@10"] <= report.metrics["hit@10"] <= 1.0
        assert 0.0 <= report.attacker_auc <= 1.0
        assert report.attacker_seeds == [0]
        assert EvalReport.read(out / REPORT_FILE) == report

        history = json.loads((out / HISTORY_FILE).read_text(encoding="utf-8"))
        assert set(history) == {"step1", "step2"}
        step2 = load_checkpoint(out / STEP2_CHECKPOINT)
        assert step2.meta["stage"] == "step2"
        assert step2.meta["mode"] == "unsupervised"

    def test_supervised_run(self, tiny_config):
        config = tiny_config("tfr_supervised")
        report = run_experiment(config)
        assert report.mode == "tfr_supervised"
        assert load_checkpoint(config.output_dir / STEP2_CHECKPOINT).meta["mode"] == "supervised"

    @pytest.mark.parametrize("mode", ["source_only", "target_only", "source_plus_target"])
    def test_baselines_skip_transfer(self, tiny_config, mode):
        config = tiny_config(mode)
        report = run_experiment(config)
        assert report.mode == mode
        assert not (config.output_dir / STEP2_CHECKPOINT).exists()
        step1 = load_checkpoint(config.output_dir / STEP1_CHECKPOINT)
        assert step1.meta["has_filter"] is False

    def test_extra_attacker_seeds(self, tiny_config):
        report = run_experiment(tiny_config("source_only", "attacker.seeds=5,6"))
        assert report.attacker_seeds == [0, 5, 6]
        assert len(report.attacker_aucs) == 3

    def test_without_sensitive_labels(self, tmp_path, tiny_overrides):
        ds = make_planted_dataset(200, 120, seed=0)
        path = tmp_path / "plays.tsv"
        lines = [f"{ds.user_ids[u]}\t{ds.item_ids[i]}\t1" for u, i in zip(ds.users, ds.items, strict=True)]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        overrides = [o for o in tiny_overrides if not o.startswith("dataset.")]
        config = load_config(
            None,
            [*overrides, f"dataset.interactions={path}", "dataset.format=tsv"],
            {"mode": "source_only", "output_dir": tmp_path / "out"},
        )
        report = run_experiment(config)
        assert report.attacker_auc is None


class TestDataAccess:
    """Test cases for which target data each stage reads."""

    @pytest.mark.parametrize("mode", ["tfr_unsupervised", "source_only"])
    def test_no_target_interactions_before_evaluation(self, tiny_config, mode):
        config = tiny_config(mode)
        prepare_split(config)
        split = load_prepared(config)
        train_source(config, split)
        assert not _target_roles(split)
        split = load_prepared(config)
        transfer(config, split)
        assert not _target_roles(split)

    def test_supervised_transfer_never_reads_test_items(self, tiny_config):
        config = tiny_config("tfr_supervised")
        prepare_split(config)
        train_source(config, load_prepared(config))
        split = load_prepared(config)
        transfer(config, split)
        assert _target_roles(split) == {"train", "val", "exclude"}


class TestReproducibility:
    """Test cases for seeded determinism."""

    def test_same_seed_same_artifacts(self, tiny_config, tmp_path):
        first = tiny_config("tfr_supervised", out=tmp_path / "first")
        second = tiny_config("tfr_supervised", out=tmp_path / "second")
        run_experiment(first)
        run_experiment(second)
        for name in ARTIFACTS:
            assert (first.output_dir / name).read_bytes() == (second.output_dir / name).read_bytes(), name

    def test_stages_in_separate_processes(self, tiny_config, tmp_path):
        whole = tiny_config(out=tmp_path / "whole")
        run_experiment(whole)

        def fresh():
            return tiny_config(out=tmp_path / "staged")

        prepare_split(fresh())
        train_source(fresh(), load_prepared(fresh()))
        transfer(fresh(), load_prepared(fresh()))
        evaluate(fresh(), load_prepared(fresh()))
        attack(fresh(), load_prepared(fresh()))
        staged = fresh().output_dir
        for name in ARTIFACTS:
            assert (whole.output_dir / name).read_bytes() == (staged / name).read_bytes(), name

    def test_seed_changes_split(self, tiny_config):
        first, second = tiny_config(seed=0), tiny_config(seed=1)
        prepare_split(first)
        prepare_split(second)
        assert (first.output_dir / SPLIT_FILE).read_text() != (second.output_dir / SPLIT_FILE).read_text()


class TestStageErrors:
    """Test cases for artifact validation between stages."""

    def test_evaluate_without_checkpoint(self, tiny_config):
        config = tiny_config()
        prepare_split(config)
        with pytest.raises(CorruptArtifactError) as excinfo:
            evaluate(config, load_prepared(config))
        assert "stage evaluate" in str(excinfo.value)
        assert excinfo.value.exit_code == 5

    def test_truncated_checkpoint(self, tiny_config):
        config = tiny_config("source_only")
        prepare_split(config)
        train_source(config, load_prepared(config))
        path = config.output_dir / STEP1_CHECKPOINT
        path.write_bytes(path.read_bytes()[:-10])
        with pytest.raises(CorruptArtifactError):
            evaluate(config, load_prepared(config))

    def test_checkpoint_from_other_dataset(self, tiny_config):
        config = tiny_config("source_only")
        prepare_split(config)
        train_source(config, load_prepared(config))
        smaller = config.model_copy(update={"dataset": config.dataset.model_copy(update={"synthetic_users": 150})})
        prepare_split(smaller)
        with pytest.raises(CorruptArtifactError, match="checkpoint covers"):
            evaluate(smaller, load_prepared(smaller))

    def test_missing_split(self, tiny_config):
        with pytest.raises(CorruptArtifactError, match="cannot read"):
            load_prepared(tiny_config())

    def test_stage_tags_errors(self):
        with pytest.raises(DataError) as excinfo, stage("split", 3):
            raise DataError("no interactions")
        assert str(excinfo.value) == "no interactions (stage split, seed 3)"


@pytest.fixture(scope="module")
def benchmark_run(tmp_path_factory):
    """Run the planted-attribute benchmark once per (mode, seed) and share the reports."""
    reports: dict[tuple[str, int], EvalReport] = {}

    def run(mode: str, seed: int) -> EvalReport:
        if (mode, seed) not in reports:
            config = load_config(
                SYNTHETIC_CONFIG,
                ["dataset.synthetic_strength=0.5"],
                {"mode": mode, "seed": seed, "output_dir": tmp_path_factory.mktemp(f"{mode}-{seed}")},
            )
            reports[mode, seed] = run_experiment(config)
        return reports[mode, seed]

    return run


def _seed_mean(benchmark_run, mode: str, field: str) -> float:
    values = []
    for seed in BENCHMARK_SEEDS:
        report = benchmark_run(mode, seed)
        values.append(report.attacker_auc if field == "auc" else report.metrics[field])
    return sum(values) / len(values)


@pytest.mark.slow
class TestPlantedBenchmark:
    """Test cases for how the modes rank against each other on the planted benchmark."""

    def test_strength_reaches_the_dataset(self):
        config = load_config(SYNTHETIC_CONFIG, ["dataset.synthetic_strength=0.5"])
        assert config.dataset.synthetic_strength == 0.5
        assert load_config(SYNTHETIC_CONFIG).dataset.synthetic_strength == 1.5

    def test_unsupervised_transfer_beats_source_only(self, benchmark_run):
        tfr = _seed_mean(benchmark_run, "tfr_unsupervised", "ndcg@10")
        source_only = _seed_mean(benchmark_run, "source_only", "ndcg@10")
        assert tfr >= 1.5 * source_only

    def test_supervised_transfer_matches_target_only(self, benchmark_run):
        tfr = _seed_mean(benchmark_run, "tfr_supervised", "ndcg@10")
        assert tfr >= _seed_mean(benchmark_run, "target_only", "ndcg@10")

    def test_transfer_leaks_less_than_joint_training(self, benchmark_run):
        tfr = _seed_mean(benchmark_run, "tfr_supervised", "auc")
        joint = _seed_mean(benchmark_run, "source_plus_target", "auc")
        assert tfr <= joint - 0.05
