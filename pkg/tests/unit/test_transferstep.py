"""
Unit tests for the transfer step.
"""

import numpy as np
import pytest

import transfair.transferstep.training as transfer_training
from transfair.dataset import cold_start_split, leave_one_out, two_gaussian_toy
from transfair.errors import DomainError, ShapeError, TrainingFailureError
from transfair.evalkit import AttackerConfig
from transfair.fairstep import Step1Config, step1_train
from transfair.numkit import Optimizer, Tensor, derive_rng, grad_check
from transfair.recmodels import ScorerSpec, init_model
from transfair.transferstep import (
    EVEN_DOMAIN_LOSS,
    DomainDiscriminator,
    MappingFunction,
    Step2Config,
    align_domains,
    discriminator_step,
    domain_accuracy,
    domain_loss,
    frozen_source,
    init_target_seeds,
    mapping_objective,
    source_side_digest,
    step2_train,
    supervised_loss,
    theorem_check,
)

SMALL_ATTACKER = AttackerConfig(hidden=8, layers=2, max_epochs=5, dropout=0.0)


def _small_config(**changes) -> Step2Config:
    values = dict(
        max_rounds=20,
        min_rounds=5,
        window=5,
        batch_size=32,
        hidden=8,
        disc_hidden=8,
        disc_layers=2,
        max_epochs=2,
        rec_batch_size=64,
        eval_negatives=20,
    )
    values.update(changes)
    return Step2Config(**values)


@pytest.fixture(scope="module")
def trained(planted):
    split = leave_one_out(cold_start_split(planted, 0.2, 5, seed=3), seed=3)
    config = Step1Config(max_epochs=1, batch_size=256, disc_steps=2, disc_hidden=8, disc_layers=2, eval_negatives=20)
    result = step1_train(split, config, ScorerSpec(dim=8))
    return split, result.fair


def _disc(dim=3, seed=0, **options):
    options = {"hidden": 4, "layers": 2, "dropout": 0.0, **options}
    return DomainDiscriminator(dim, np.random.default_rng(seed), **options)


def _default_networks(dim: int, config: Step2Config) -> tuple[MappingFunction, DomainDiscriminator]:
    mapping = MappingFunction(dim, dim, derive_rng(config.seed, "mapping"), hidden=config.hidden)
    disc = DomainDiscriminator(
        dim,
        derive_rng(config.seed, "domain_discriminator"),
        hidden=config.disc_hidden,
        layers=config.disc_layers,
        dropout=config.disc_dropout,
    )
    return mapping, disc


class TestObjectives:
    """Test cases for the domain and supervised losses."""

    def test_mapping_objective_at_zero_logit(self):
        logits = Tensor(np.zeros((4, 1)))
        assert mapping_objective(logits).item() == pytest.approx(-np.log(2.0))
        assert mapping_objective(logits, nonsaturating=True).item() == pytest.approx(np.log(2.0))

    def test_domain_loss_gradients(self, rng):
        disc = _disc()
        source = Tensor(rng.normal(size=(5, 3)), name="source", trainable=True)
        target = Tensor(rng.normal(size=(4, 3)), name="target", trainable=True)

        def disc_loss():
            return domain_loss(source, target, disc, mode="eval", spectral_update=False).disc_loss

        def map_loss():
            return domain_loss(source, target, disc, mode="eval", spectral_update=False).map_loss

        assert grad_check(disc_loss, [source, target]).passed
        assert grad_check(map_loss, [target]).passed

    def test_domain_loss_shapes(self):
        disc = _disc()
        with pytest.raises(ShapeError):
            domain_loss(Tensor(np.zeros((0, 3))), Tensor(np.zeros((2, 3))), disc)
        with pytest.raises(ShapeError):
            domain_loss(Tensor(np.zeros((2, 3))), Tensor(np.zeros((2, 4))), disc)

    @pytest.mark.parametrize("lambda_d", [1.0, 10.0])
    def test_supervised_loss_gradients(self, rng, lambda_d):
        model = init_model(ScorerSpec(dim=3, embedding_std=0.5), 4, 6, seed=1)
        disc = _disc()
        rec_vectors = Tensor(rng.normal(size=(3, 3)), name="rec", trainable=True)
        adv_vectors = Tensor(rng.normal(size=(4, 3)), name="adv", trainable=True)

        def loss():
            pos, neg = np.array([0, 1, 2]), np.array([3, 4, 5])
            return supervised_loss(model, rec_vectors, pos, neg, adv_vectors, disc, lambda_d).total

        assert grad_check(loss, [rec_vectors, adv_vectors]).passed
        losses = supervised_loss(model, rec_vectors, np.array([0]), np.array([3]), adv_vectors, disc, lambda_d)
        assert losses.total.item() == pytest.approx(losses.rec.item() + lambda_d * losses.adv.item())

    def test_supervised_loss_terms_optional(self, rng):
        model = init_model(ScorerSpec(dim=3), 4, 6, seed=1)
        disc = _disc()
        vectors = Tensor(rng.normal(size=(2, 3)))
        only_rec = supervised_loss(model, vectors, np.array([0, 1]), np.array([2, 3]), vectors, disc, 0.0)
        assert only_rec.adv is None
        only_adv = supervised_loss(model, None, np.array([]), np.array([]), vectors, disc, 2.0)
        assert only_adv.rec is None
        assert only_adv.total.item() == pytest.approx(2.0 * only_adv.adv.item())
        with pytest.raises(ShapeError):
            supervised_loss(model, None, np.array([]), np.array([]), None, None, 1.0)


class TestNetworks:
    """Test cases for the mapping function and domain discriminator."""

    def test_spectral_norms_near_one(self):
        disc = _disc(dim=8, hidden=16, layers=3)
        for norm in disc.effective_spectral_norms():
            assert norm == pytest.approx(1.0, abs=0.05)

    def test_mapping_shape(self):
        mapping = MappingFunction(5, 8, np.random.default_rng(0), hidden=16)
        assert mapping.sizes == [5, 16, 16, 16, 8]
        out = mapping.forward(Tensor(np.random.default_rng(1).normal(size=(6, 5))), "train")
        assert out.shape == (6, 8)

    def test_weights_start_small(self):
        disc = DomainDiscriminator(8, np.random.default_rng(0))
        assert disc.layers[1].weight.value.std() == pytest.approx(0.01, rel=0.1)
        assert len(disc.layers) == 6

    def test_discriminator_learns_at_default_rate(self):
        config = Step2Config()
        rng = np.random.default_rng(2)
        _, disc = _default_networks(8, config)
        optimizer = Optimizer.sgd(disc.parameters(), config.disc_learning_rate)
        source = rng.normal(size=(256, 8)) + 1.5
        target = rng.normal(size=(256, 8)) - 1.5
        losses = [discriminator_step(disc, optimizer, source, target, rng) for _ in range(300)]
        assert losses[0] == pytest.approx(EVEN_DOMAIN_LOSS, abs=0.1)
        assert min(losses) < EVEN_DOMAIN_LOSS - 0.3
        assert domain_accuracy(disc, source, target) > 0.9

    def test_summed_step_scales_the_mean_gradient(self, rng):
        source = rng.normal(size=(16, 3))
        target = rng.normal(size=(16, 3)) + 1.0
        summed, averaged, untouched = _disc(seed=5), _disc(seed=5), _disc(seed=5)
        loss = discriminator_step(
            summed, Optimizer.sgd(summed.parameters(), 1e-3), source, target, np.random.default_rng(0)
        )
        mean_loss = discriminator_step(
            averaged,
            Optimizer.sgd(averaged.parameters(), 16e-3),
            source,
            target,
            np.random.default_rng(0),
            reduction="mean",
        )
        expected = domain_loss(Tensor(source), Tensor(target), untouched, mode="train").disc_loss.item()
        assert loss == pytest.approx(expected)
        assert mean_loss == pytest.approx(expected)
        for name, value in summed.state_dict().items():
            np.testing.assert_allclose(value, averaged.state_dict()[name], rtol=1e-9, atol=1e-12)
        with pytest.raises(ShapeError):
            discriminator_step(summed, Optimizer.sgd(summed.parameters(), 1e-3), source, target[:8], rng)

    def test_spectral_norms_stay_bounded_while_aligning(self, monkeypatch):
        config = Step2Config(max_rounds=30, min_rounds=30, batch_size=64)
        source, target = two_gaussian_toy(500, 500, dim=8, shift=1.0, seed=0)
        mapping, disc = _default_networks(8, config)
        norms: list[float] = []

        def checked_step(*args, **kwargs):
            loss = discriminator_step(*args, **kwargs)
            norms.extend(disc.effective_spectral_norms())
            return loss

        monkeypatch.setattr(transfer_training, "discriminator_step", checked_step)
        history, _ = align_domains(source, Tensor(target), mapping, disc, config)
        assert history.rounds_run == 30
        assert len(norms) == 30 * len(disc.layers)
        assert max(norms) <= 1.0 + 1e-3
        assert min(norms) >= 1.0 - 1e-3

    def test_seed_init(self):
        seeds = init_target_seeds(500, 4, seed=0)
        assert seeds.shape == (500, 4)
        assert seeds.std() == pytest.approx(0.01, rel=0.1)
        np.testing.assert_array_equal(seeds, init_target_seeds(500, 4, seed=0))


class TestFrozenSource:
    """Test cases for the step-1 freeze guard."""

    def test_flags_restored(self, trained):
        _, fair = trained
        with frozen_source(fair):
            assert not any(t.trainable for t in fair.model.parameters(trainable_only=False))
            assert not any(t.trainable for t in fair.filter.parameters())
        assert all(t.trainable for t in fair.model.parameters(trainable_only=False))

    def test_detects_modification(self, trained):
        _, fair = trained
        original = fair.model.user_embeddings.value.copy()
        try:
            with pytest.raises(TrainingFailureError), frozen_source(fair):
                fair.model.user_embeddings.value = original + 1.0
        finally:
            fair.model.user_embeddings.value = original


class TestUnsupervisedTransfer:
    """Test cases for transfer without target interactions."""

    def test_reads_no_target_interactions(self, trained):
        split, fair = trained
        split.accessed.clear()
        digest = source_side_digest(fair)
        result = step2_train(fair, split, _small_config())
        assert not [entry for entry in split.accessed if entry[0] == "T"]
        assert source_side_digest(fair) == digest
        assert 5 <= result.history.rounds_run <= 20
        assert result.embeddings.shape == (split.target_users.size, 8)
        assert not result.transfer.seeds.trainable

    def test_same_seed_same_embeddings(self, trained):
        split, fair = trained
        first = step2_train(fair, split, _small_config())
        second = step2_train(fair, split, _small_config())
        np.testing.assert_array_equal(first.embeddings, second.embeddings)

    def test_rejects_source_users(self, trained):
        split, fair = trained
        result = step2_train(fair, split, _small_config(max_rounds=2, min_rounds=0))
        with pytest.raises(DomainError):
            result.transfer.user_vectors(split.source_users[:1])

    def test_idle_discriminator_never_converges(self):
        config = Step2Config(
            max_rounds=40,
            min_rounds=5,
            window=5,
            tolerance=0.49,
            engage_margin=0.2,
            batch_size=64,
            hidden=16,
            disc_hidden=16,
            disc_layers=3,
            disc_dropout=0.0,
            disc_learning_rate=1e-12,
            disc_reduction="mean",
        )
        source, target = two_gaussian_toy(300, 300, dim=4, shift=0.0, seed=1)
        mapping, disc = _default_networks(4, config)
        history, _ = align_domains(source, Tensor(target), mapping, disc, config)
        # the accuracy window alone is satisfied from round 5 on
        assert all(abs(r.accuracy - 0.5) <= 0.49 for r in history.rounds)
        assert not history.converged
        assert history.rounds_run == 40
        assert not history.engaged(config.engage_margin)
        assert history.lowest_disc_loss > EVEN_DOMAIN_LOSS - config.engage_margin

    def test_history_records_lowest_loss(self, trained):
        split, fair = trained
        result = step2_train(fair, split, _small_config())
        lowest = min(r.disc_loss for r in result.history.rounds)
        assert result.history.lowest_disc_loss == lowest
        assert result.history.to_dict()["lowest_disc_loss"] == lowest


class TestSupervisedTransfer:
    """Test cases for transfer with target interactions."""

    def test_reads_train_and_val_only(self, trained):
        split, fair = trained
        split.accessed.clear()
        digest = source_side_digest(fair)
        config = _small_config(mode="supervised")
        result = step2_train(fair, split, config)
        target_roles = {role for domain, role in split.accessed if domain == "T"}
        assert target_roles == {"train", "val", "exclude"}
        assert source_side_digest(fair) == digest
        assert result.history.validation
        initial = init_target_seeds(split.target_users.size, 8, config.seed)
        assert not np.array_equal(result.transfer.seeds.value, initial)

    def test_raw_user_vectors(self, trained):
        split, fair = trained
        result = step2_train(fair, split, _small_config(mode="supervised", rec_user_vector="raw", max_epochs=1))
        users = split.target_users[:4]
        np.testing.assert_array_equal(
            result.transfer.user_vectors(users), result.transfer.raw.value[np.searchsorted(split.target_users, users)]
        )
        assert "target.raw" in result.transfer.state_dict()

    def test_zero_lambda_skips_domain_term(self, trained):
        split, fair = trained
        result = step2_train(fair, split, _small_config(mode="supervised", lambda_d=0.0, max_epochs=1))
        assert all(r.map_loss is None for r in result.history.rounds)
        assert all(r.rec_loss is not None for r in result.history.rounds)


class TestTheoremCheck:
    """Test cases for the transfer diagnostics."""

    def test_independent_embeddings(self):
        rng = np.random.default_rng(0)
        source = rng.normal(size=(3000, 4))
        target = rng.normal(size=(3000, 4))
        labels = rng.integers(0, 2, size=3000)
        report = theorem_check(source, target, labels, None, seed=0, tolerance=0.1, config=SMALL_ATTACKER)
        assert report.source_is_fair
        assert report.domains_matched
        assert report.target_is_fair is None

    def test_shifted_target_is_detected(self):
        rng = np.random.default_rng(1)
        source = rng.normal(size=(600, 4))
        target = rng.normal(size=(600, 4)) + 3.0
        labels = rng.integers(0, 2, size=600)
        report = theorem_check(source, target, labels, labels, seed=0, config=SMALL_ATTACKER)
        assert report.domain_auc > 0.9
        assert not report.domains_matched
        assert report.target_sensitive_auc is not None

    def test_width_mismatch(self):
        with pytest.raises(ShapeError):
            theorem_check(np.zeros((10, 3)), np.zeros((10, 4)), np.arange(10) % 2, None, seed=0)


@pytest.mark.slow
class TestTwoGaussianAlignment:
    """The shipped step-2 settings merge a shifted Gaussian pair."""

    @pytest.mark.parametrize("seed", range(5))
    def test_default_settings_match_the_clouds(self, seed):
        source, target = two_gaussian_toy(2000, 2000, dim=2, shift=2.0, seed=seed)
        config = Step2Config(seed=seed)
        mapping, disc = _default_networks(2, config)
        history, _ = align_domains(source, Tensor(target), mapping, disc, config)
        mapped = mapping.forward(Tensor(target), "eval").value
        assert history.engaged(config.engage_margin)
        assert 0.45 <= domain_accuracy(disc, source, mapped) <= 0.55
        assert np.all(np.abs(mapped.mean(axis=0) - source.mean(axis=0)) < 0.3)
