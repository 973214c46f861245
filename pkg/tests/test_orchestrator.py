import dataclasses

import numpy as np
import pytest

from fedprompt import client, encoder, partition
from fedprompt.errors import ConfigError
from fedprompt.orchestrator import (
    ExperimentConfig,
    ablation_generator,
    build_data,
    run_baseline,
    run_experiment,
    run_protocol,
    temperature_grid,
)
from fedprompt.seeding import child_seed


def small_cfg(**overrides) -> ExperimentConfig:
    base = dict(
        n_clients=4,
        n_classes=5,
        embed_dim=8,
        input_dim=8,
        alpha=1.0,
        rounds=2,
        local_epochs=2,
        batch=32,
        gen_steps=30,
        lambda_kd=10.0,
        per_class_train=40,
        per_class_test=20,
        shard_cap=60,
        seed=7,
    )
    base.update(overrides)
    return ExperimentConfig(**base)


def strip_wall_time(metrics):
    # NaN gen_loss (rounds without a generator) would defeat ==; canonicalize it
    return [
        dataclasses.replace(
            rm, wall_time=0.0, gen_loss=-1.0 if np.isnan(rm.gen_loss) else rm.gen_loss
        )
        for rm in metrics
    ]


class TestConfig:
    def test_round_trip(self):
        cfg = small_cfg()
        again = ExperimentConfig.from_dict(cfg.to_dict())
        assert again == cfg

    def test_unknown_field_rejected(self):
        with pytest.raises(ConfigError, match="tau3"):
            ExperimentConfig.from_dict({"tau3": 1.0})

    def test_bad_temperature_names_field(self):
        with pytest.raises(ConfigError, match="tau1"):
            small_cfg(tau1=0.0)

    def test_semantic_space_ties_dims(self):
        with pytest.raises(ConfigError, match="input_dim"):
            small_cfg(input_dim=12)

    def test_seeded_space_frees_dims(self):
        cfg = small_cfg(input_dim=12, feature_space="seeded")
        assert cfg.validate() is cfg

    def test_loss_weights_shape(self):
        with pytest.raises(ConfigError, match="loss_weights"):
            ExperimentConfig.from_dict({"loss_weights": [1.0]})

    def test_defaults_mirror_reference_protocol(self):
        cfg = ExperimentConfig()
        assert (cfg.n_clients, cfg.rounds, cfg.local_epochs, cfg.batch) == (10, 20, 10, 128)
        assert (cfg.gen_steps, cfg.tau1, cfg.tau2) == (100, 10.0, 0.1)
        assert cfg.alpha in (0.1, 10.0)


class TestRunExperiment:
    def test_zero_rounds_reports_initialization_only(self):
        metrics = run_experiment(small_cfg(rounds=0))
        assert len(metrics) == 1
        assert metrics[0].round_index == 0
        assert np.isnan(metrics[0].gen_loss)

    def test_deterministic(self):
        cfg = small_cfg()
        a = run_experiment(cfg)
        b = run_experiment(cfg)
        assert strip_wall_time(a) == strip_wall_time(b)

    def test_workers_do_not_change_results(self):
        cfg = small_cfg()
        a = run_experiment(cfg, workers=1)
        b = run_experiment(cfg, workers=4)
        assert strip_wall_time(a) == strip_wall_time(b)

    def test_round_count_and_indices(self):
        metrics = run_experiment(small_cfg(rounds=3))
        assert [rm.round_index for rm in metrics] == [0, 1, 2, 3]

    def test_desk_default_improves_over_initialization(self):
        cfg = ExperimentConfig(lambda_kd=60.0, gen_steps=300)
        metrics = run_experiment(cfg)
        assert metrics[-1].mean_accuracy > metrics[0].mean_accuracy

    def test_communication_budget(self):
        cfg = small_cfg()
        metrics = run_experiment(cfg)
        budget = cfg.n_classes * (cfg.n_classes + 1)
        for rm in metrics[1:]:
            assert all(u <= budget for u in rm.upload_numbers)
            assert all(d == cfg.n_classes**2 for d in rm.download_numbers)
        assert all(u == 0 for u in metrics[0].upload_numbers)

    def test_wrong_protocol_rejected(self):
        with pytest.raises(ConfigError, match="protocol"):
            run_experiment(small_cfg(protocol="b1"))

    def test_probe_sees_simplex_knowledge(self):
        rows = []
        run_experiment(small_cfg(rounds=1), probe=lambda kind, rnd, arr: rows.append(arr))
        assert rows
        for arr in rows:
            assert np.allclose(arr.sum(axis=-1), 1.0, atol=1e-9)


class TestBaselines:
    def test_b1_is_repeated_local_training(self):
        cfg = small_cfg(protocol="b1", rounds=2)
        metrics = run_baseline(cfg)
        _, test, plan, shards = build_data(cfg)
        depth_rng = np.random.default_rng(child_seed(cfg.seed, "depths"))
        depths = depth_rng.choice(client.ALLOWED_DEPTHS, size=cfg.n_clients)
        accs = []
        for n in range(cfg.n_clients):
            model = client.init_local_model(
                cfg.input_dim, cfg.hidden, int(depths[n]), cfg.n_classes, child_seed(cfg.seed, "client", n)
            )
            for rnd in range(cfg.rounds + 1):
                model, _ = client.local_train(
                    model, shards[n], cfg.local_epochs, cfg.batch, cfg.lr_local,
                    child_seed(cfg.seed, "train", n, rnd),
                )
            accs.append(client.evaluate(model, test))
        assert metrics[-1].accuracies == pytest.approx(accs, abs=0)

    def test_b1_has_no_communication(self):
        metrics = run_baseline(small_cfg(protocol="b1"))
        for rm in metrics:
            assert all(u == 0 for u in rm.upload_numbers)
            assert all(d == 0 for d in rm.download_numbers)
            assert np.isnan(rm.gen_loss)

    def test_b2_shares_the_s1_prefix_with_fedd2p(self):
        aggs = {}

        def catcher(name):
            def probe(kind, rnd, arr):
                if kind == "aggregated_knowledge" and rnd == 1:
                    aggs[name] = arr.copy()
            return probe

        run_experiment(small_cfg(rounds=1), probe=catcher("fedd2p"))
        run_baseline(small_cfg(protocol="b2", rounds=1), probe=catcher("b2"))
        assert np.array_equal(aggs["fedd2p"], aggs["b2"])

    def test_b2_skips_the_generator(self):
        metrics = run_baseline(small_cfg(protocol="b2"))
        assert all(np.isnan(rm.gen_loss) for rm in metrics)
        assert all(rm.gen_loss_curve == [] for rm in metrics)

    def test_b3_trains_generator_without_kd_term(self):
        metrics = run_baseline(small_cfg(protocol="b3"))
        assert not np.isnan(metrics[-1].gen_loss)
        assert metrics[-1].gen_loss_curve

    def test_wrong_protocol_rejected(self):
        with pytest.raises(ConfigError, match="protocol"):
            run_baseline(small_cfg(protocol="fedd2p"))


class TestGridAndAblation:
    def test_single_cell_matches_plain_run(self):
        cfg = small_cfg()
        matrix = temperature_grid(cfg, [cfg.tau1], [cfg.tau2])
        run = run_protocol(cfg)
        assert matrix.shape == (1, 1)
        assert matrix[0, 0] == run[-1].mean_accuracy

    def test_grid_shape(self):
        cfg = small_cfg(rounds=1)
        matrix = temperature_grid(cfg, [1.0, 10.0], [0.1, 1.0, 10.0])
        assert matrix.shape == (2, 3)

    def test_grid_validates_temperatures(self):
        with pytest.raises(ConfigError):
            temperature_grid(small_cfg(), [0.0], [1.0])

    def test_ablation_returns_paired_series(self):
        series = ablation_generator(small_cfg(rounds=2))
        assert set(series) == {"attention", "mlp"}
        assert len(series["attention"]) == len(series["mlp"]) == 3

    def test_ablation_arms_share_the_s0_prefix(self):
        series = ablation_generator(small_cfg(rounds=1))
        assert series["attention"][0].accuracies == series["mlp"][0].accuracies


class TestEmbeddingSourceFile:
    def test_run_with_ingested_embeddings(self, tmp_path):
        cfg = small_cfg(rounds=1)
        matrix = encoder.synth_text_embed(
            [f"class {i}" for i in range(cfg.n_classes)], cfg.embed_dim, seed=99
        )
        path = tmp_path / "emb.json"
        encoder.save_embeddings(matrix, str(path))
        loaded_cfg = dataclasses.replace(cfg, embedding_source=str(path))
        metrics = run_experiment(loaded_cfg)
        assert len(metrics) == 2

    def test_class_count_mismatch_is_config_error(self, tmp_path):
        matrix = encoder.synth_text_embed(["a", "b", "c"], 8, seed=0)
        path = tmp_path / "emb.json"
        encoder.save_embeddings(matrix, str(path))
        with pytest.raises(ConfigError, match="n_classes"):
            run_experiment(small_cfg(embedding_source=str(path)))


class TestSeededFeatureSpace:
    def test_runs_with_independent_geometry(self):
        cfg = small_cfg(feature_space="seeded", input_dim=12, rounds=1)
        metrics = run_experiment(cfg)
        assert len(metrics) == 2

    def test_semantic_means_follow_embeddings(self):
        cfg = small_cfg(spread=0.0, rounds=0)
        train, _, _, _ = build_data(cfg)
        from fedprompt.orchestrator import build_embeddings

        rows = build_embeddings(cfg).rows
        for c in range(cfg.n_classes):
            feats = train.features[train.labels == c]
            assert np.allclose(feats, np.tile(rows[c], (len(feats), 1)))
