"""Experiment orchestration: the full mutual-distillation round loop
(S0 init -> repeat {S1 aggregate, S2 prompt-tune, S3 distill} -> evaluate)
plus the three reference baselines.

b1: isolated local training, no communication.
b2: the aggregated client knowledge is sent straight back (no generator).
b3: the generator is tuned on ground truth only (KD weight zero).

Every run is a pure function of its config: all randomness flows through
seeds derived from (config.seed, purpose, client, round), so client
parallelism cannot change results. Knowledge records carry a round stamp and
the orchestrator enforces the round barrier and the per-round communication
budget (at most C*(C+1) numbers up per client, exactly C*C numbers down).
"""

from __future__ import annotations

import dataclasses
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import aggregation, client, partition, promptgen
from .encoder import (
    EmbeddingMatrix,
    FrozenImageEncoder,
    load_embeddings,
    prompt_template,
    synth_text_embed,
)
from .errors import ConfigError, ProtocolViolation
from .seeding import child_seed

log = logging.getLogger(__name__)

PROTOCOLS = ("fedd2p", "b1", "b2", "b3")
DATASET_KINDS = ("general", "pets", "texture", "satellite", "digits", "synthetic")


@dataclass
class ExperimentConfig:
    """Declarative description of one run. Defaults mirror the desk benchmark."""

    protocol: str = "fedd2p"
    n_clients: int = 10
    n_classes: int = 10
    embed_dim: int = 16
    input_dim: int = 16
    alpha: float = 0.1
    rounds: int = 20
    local_epochs: int = 10
    batch: int = 128
    lr_local: float = 0.1
    lr_gen: float = 0.03
    gen_steps: int = 100
    tau1: float = 10.0
    tau2: float = 0.1
    lambda_kd: float = 1.0
    loss_weights: tuple[float, float] = (1.0, 1.0)
    heads: int = 2
    generator_kind: str = "attention"
    gen_reinit: bool = False
    hidden: int = 64
    seed: int = 0
    per_class_train: int = 150
    per_class_test: int = 100
    spread: float = 0.3
    shard_cap: int = 400
    embedding_source: str = "synthetic"
    dataset_kind: str = "synthetic"
    feature_space: str = "semantic"

    def __post_init__(self):
        self.loss_weights = tuple(float(w) for w in self.loss_weights)
        self.validate()

    def validate(self) -> "ExperimentConfig":
        if self.protocol not in PROTOCOLS:
            raise ConfigError("protocol", f"must be one of {PROTOCOLS}, got {self.protocol!r}")
        if self.generator_kind not in promptgen.GENERATOR_KINDS:
            raise ConfigError("generator_kind", f"must be one of {promptgen.GENERATOR_KINDS}")
        if self.dataset_kind not in DATASET_KINDS:
            raise ConfigError("dataset_kind", f"must be one of {DATASET_KINDS}")
        counts = {
            "n_clients": self.n_clients,
            "n_classes": self.n_classes,
            "embed_dim": self.embed_dim,
            "input_dim": self.input_dim,
            "local_epochs": self.local_epochs,
            "batch": self.batch,
            "gen_steps": self.gen_steps,
            "heads": self.heads,
            "hidden": self.hidden,
            "per_class_train": self.per_class_train,
            "per_class_test": self.per_class_test,
            "shard_cap": self.shard_cap,
        }
        for name, value in counts.items():
            if not isinstance(value, int) or value < 1:
                raise ConfigError(name, f"must be an integer >= 1, got {value!r}")
        if self.n_classes < 2:
            raise ConfigError("n_classes", "must be >= 2")
        if not isinstance(self.rounds, int) or self.rounds < 0:
            raise ConfigError("rounds", f"must be an integer >= 0, got {self.rounds!r}")
        for name in ("tau1", "tau2", "lr_local", "lr_gen"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise ConfigError(name, f"must be a positive real, got {value!r}")
        if self.lambda_kd < 0:
            raise ConfigError("lambda_kd", "must be nonnegative")
        if self.alpha <= 0:
            raise ConfigError("alpha", "must be positive")
        if self.spread < 0:
            raise ConfigError("spread", "must be nonnegative")
        if len(self.loss_weights) != 2 or any(w < 0 for w in self.loss_weights):
            raise ConfigError("loss_weights", "must be two nonnegative numbers [w_ce, w_kd]")
        if self.embed_dim % self.heads != 0:
            raise ConfigError("heads", f"must divide embed_dim={self.embed_dim}")
        if not isinstance(self.seed, int):
            raise ConfigError("seed", "must be an integer")
        if self.feature_space not in ("semantic", "seeded"):
            raise ConfigError("feature_space", "must be 'semantic' or 'seeded'")
        if self.feature_space == "semantic" and self.input_dim != self.embed_dim:
            raise ConfigError(
                "input_dim",
                f"semantic feature space ties input_dim to embed_dim={self.embed_dim}",
            )
        return self

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["loss_weights"] = list(self.loss_weights)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown field")
        kwargs = dict(data)
        if "loss_weights" in kwargs:
            lw = kwargs["loss_weights"]
            if not isinstance(lw, (list, tuple)) or len(lw) != 2:
                raise ConfigError("loss_weights", "must be a two-element array")
            kwargs["loss_weights"] = (float(lw[0]), float(lw[1]))
        try:
            cfg = cls(**kwargs)
        except TypeError as e:
            raise ConfigError("<config>", str(e)) from e
        return cfg.validate()


@dataclass
class RoundMetrics:
    """Per-round snapshot; round 0 is the post-initialization evaluation."""

    round_index: int
    accuracies: list[float]
    mean_accuracy: float
    train_losses: list[float]
    gen_loss: float
    wall_time: float
    upload_numbers: list[int]
    download_numbers: list[int]
    gen_loss_curve: list[float] = field(default_factory=list)


ProbeFn = Callable[[str, int, np.ndarray], None]


def _pmap(fn, arg_tuples, workers: int):
    if workers <= 1:
        return [fn(*args) for args in arg_tuples]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fn, *args) for args in arg_tuples]
        return [f.result() for f in futures]


def build_embeddings(cfg: ExperimentConfig) -> EmbeddingMatrix:
    """Synthetic hash-derived embeddings, or rows ingested from a file."""
    if cfg.embedding_source == "synthetic":
        names = [str(c) for c in range(cfg.n_classes)]
        descriptions = [prompt_template(cfg.dataset_kind, n) for n in names]
        return synth_text_embed(descriptions, cfg.embed_dim, child_seed(cfg.seed, "text-embed"), class_names=names)
    matrix = load_embeddings(cfg.embedding_source)
    if matrix.n_classes != cfg.n_classes:
        raise ConfigError("n_classes", f"config says {cfg.n_classes}, embedding file has {matrix.n_classes}")
    if matrix.dim != cfg.embed_dim:
        raise ConfigError("embed_dim", f"config says {cfg.embed_dim}, embedding file has {matrix.dim}")
    return matrix


def build_data(cfg: ExperimentConfig, embeddings: EmbeddingMatrix | None = None):
    """Shared train/test Gaussian benchmark plus the per-client capped shards.

    feature_space 'semantic' grounds the class centers in the frozen encoder's
    text embeddings (features cluster around class semantics, the premise that
    gives the frozen encoder its zero-shot value); 'seeded' keeps fully
    independent random centers.
    """
    if cfg.feature_space == "semantic":
        if embeddings is None:
            embeddings = build_embeddings(cfg)
        train = partition.dataset_from_means(
            embeddings.rows, cfg.per_class_train, cfg.spread, cfg.seed, noise_key=0
        )
        test = partition.dataset_from_means(
            embeddings.rows, cfg.per_class_test, cfg.spread, cfg.seed, noise_key=1
        )
    else:
        train = partition.synth_dataset(
            cfg.n_classes, cfg.input_dim, cfg.per_class_train, cfg.spread, cfg.seed, noise_key=0
        )
        test = partition.synth_dataset(
            cfg.n_classes, cfg.input_dim, cfg.per_class_test, cfg.spread, cfg.seed, noise_key=1
        )
    plan = partition.dirichlet_partition(train.labels, cfg.n_clients, cfg.alpha, child_seed(cfg.seed, "split"))
    plan = partition.cap_plan(plan, cfg.shard_cap, child_seed(cfg.seed, "cap"))
    shards = [train.subset(idx) for idx in plan.assignments]
    return train, test, plan, shards


class _Run:
    def __init__(self, cfg: ExperimentConfig, workers: int, probe: ProbeFn | None):
        self.cfg = cfg.validate()
        self.workers = max(1, int(workers))
        self.probe = probe
        self.metrics: list[RoundMetrics] = []
        self._last_barrier_round = -1

    def _stamp(self, record, round_index: int):
        if round_index <= self._last_barrier_round:
            raise ProtocolViolation(
                f"round counter must be monotone: got {round_index} after {self._last_barrier_round}"
            )
        record.round_index = round_index
        return record

    def execute(self) -> list[RoundMetrics]:
        cfg = self.cfg
        t0 = time.perf_counter()
        embeddings = build_embeddings(cfg)
        _, test, plan, shards = build_data(cfg, embeddings)
        enc = FrozenImageEncoder.orthogonal(cfg.embed_dim, child_seed(cfg.seed, "frozen"))
        frozen_state = (embeddings.fingerprint(), enc.fingerprint())

        depth_rng = np.random.default_rng(child_seed(cfg.seed, "depths"))
        depths = depth_rng.choice(client.ALLOWED_DEPTHS, size=cfg.n_clients)
        models = [
            client.init_local_model(cfg.input_dim, cfg.hidden, int(depths[n]), cfg.n_classes,
                                    child_seed(cfg.seed, "client", n))
            for n in range(cfg.n_clients)
        ]

        # S0: every client fits its own shard
        results = _pmap(
            client.local_train,
            [
                (models[n], shards[n], cfg.local_epochs, cfg.batch, cfg.lr_local,
                 child_seed(cfg.seed, "train", n, 0))
                for n in range(cfg.n_clients)
            ],
            self.workers,
        )
        models = [r[0] for r in results]
        train_losses = [r[1] for r in results]
        self._record(0, models, test, train_losses, float("nan"), [],
                     [0] * cfg.n_clients, [0] * cfg.n_clients, t0)

        omega = None
        if cfg.protocol in ("fedd2p", "b3"):
            omega = promptgen.init_prompt_generator(
                cfg.embed_dim, cfg.heads, cfg.generator_kind, child_seed(cfg.seed, "gen", 0)
            )

        for rnd in range(1, cfg.rounds + 1):
            t0 = time.perf_counter()
            gen_loss_value = float("nan")
            curve: list[float] = []
            if cfg.protocol == "b1":
                results = _pmap(
                    client.local_train,
                    [
                        (models[n], shards[n], cfg.local_epochs, cfg.batch, cfg.lr_local,
                         child_seed(cfg.seed, "train", n, rnd))
                        for n in range(cfg.n_clients)
                    ],
                    self.workers,
                )
                uploads = [0] * cfg.n_clients
                downloads = [0] * cfg.n_clients
            else:
                # S1: per-class knowledge up, count-weighted aggregation
                knowledges = _pmap(
                    client.class_knowledge,
                    [(models[n], shards[n], cfg.tau1) for n in range(cfg.n_clients)],
                    self.workers,
                )
                for k in knowledges:
                    self._stamp(k, rnd)
                uploads = [k.transmitted_numbers() for k in knowledges]
                budget = cfg.n_classes * (cfg.n_classes + 1)
                if any(u > budget for u in uploads):
                    raise ProtocolViolation(f"upload exceeds the {budget}-number budget: {uploads}")
                agg = aggregation.aggregate(knowledges)
                if agg.round_index != rnd:
                    raise ProtocolViolation("aggregate consumed knowledge from another round")
                if self.probe is not None:
                    for k in knowledges:
                        self.probe("local_knowledge", rnd, k.soft_labels[k.present()])
                    self.probe("aggregated_knowledge", rnd, agg.soft_labels)

                # S2: prompt-tune the frozen encoder (skipped for b2)
                if cfg.protocol == "b2":
                    global_soft = agg.soft_labels
                else:
                    weights = (cfg.loss_weights[0], 0.0) if cfg.protocol == "b3" else cfg.loss_weights
                    if cfg.gen_reinit:
                        omega = promptgen.init_prompt_generator(
                            cfg.embed_dim, cfg.heads, cfg.generator_kind, child_seed(cfg.seed, "gen", rnd)
                        )
                    omega, curve = promptgen.train_generator(
                        omega, embeddings, enc, agg, cfg.gen_steps, cfg.lr_gen, cfg.tau2, weights
                    )
                    knowledge = promptgen.global_knowledge(
                        promptgen.gen_forward(omega, embeddings), embeddings, enc, cfg.tau2
                    )
                    self._stamp(knowledge, rnd)
                    gen_loss_value = promptgen.gen_loss(knowledge, agg, weights)
                    global_soft = knowledge.soft_labels
                    if self.probe is not None:
                        self.probe("global_knowledge", rnd, global_soft)

                # S3: distill the global soft labels back into every client
                downloads = [global_soft.size] * cfg.n_clients
                if any(d != cfg.n_classes**2 for d in downloads):
                    raise ProtocolViolation("download must be exactly C*C numbers per client")
                self._last_barrier_round = rnd
                results = _pmap(
                    client.local_distill,
                    [
                        (models[n], shards[n], global_soft, cfg.tau1, cfg.lambda_kd,
                         cfg.local_epochs, cfg.batch, cfg.lr_local,
                         child_seed(cfg.seed, "train", n, rnd))
                        for n in range(cfg.n_clients)
                    ],
                    self.workers,
                )
            models = [r[0] for r in results]
            train_losses = [r[1] for r in results]
            self._record(rnd, models, test, train_losses, gen_loss_value, curve, uploads, downloads, t0)

        if (embeddings.fingerprint(), enc.fingerprint()) != frozen_state:
            raise ProtocolViolation("frozen encoder state changed during the experiment")
        return self.metrics

    def _record(self, rnd, models, test, train_losses, gen_loss_value, curve, uploads, downloads, t0):
        accs = _pmap(client.evaluate, [(m, test) for m in models], self.workers)
        rm = RoundMetrics(
            round_index=rnd,
            accuracies=[float(a) for a in accs],
            mean_accuracy=float(np.mean(accs)),
            train_losses=[float(x) for x in train_losses],
            gen_loss=float(gen_loss_value),
            wall_time=time.perf_counter() - t0,
            upload_numbers=list(uploads),
            download_numbers=list(downloads),
            gen_loss_curve=[float(x) for x in curve],
        )
        self.metrics.append(rm)
        log.info(
            "round %d: mean acc %.4f, gen loss %s, up %d/client max, down %d/client, %.2fs",
            rnd, rm.mean_accuracy, f"{rm.gen_loss:.4f}",
            max(uploads), max(downloads), rm.wall_time,
        )


def run_experiment(cfg: ExperimentConfig, workers: int = 1, probe: ProbeFn | None = None) -> list[RoundMetrics]:
    """Run the full protocol. cfg.protocol must be 'fedd2p'."""
    if cfg.protocol != "fedd2p":
        raise ConfigError("protocol", f"run_experiment handles 'fedd2p'; got {cfg.protocol!r}")
    return _Run(cfg, workers, probe).execute()


def run_baseline(cfg: ExperimentConfig, workers: int = 1, probe: ProbeFn | None = None) -> list[RoundMetrics]:
    """Run one of the reference baselines (protocol b1, b2, or b3)."""
    if cfg.protocol not in ("b1", "b2", "b3"):
        raise ConfigError("protocol", f"run_baseline handles b1/b2/b3; got {cfg.protocol!r}")
    return _Run(cfg, workers, probe).execute()


def run_protocol(cfg: ExperimentConfig, workers: int = 1, probe: ProbeFn | None = None) -> list[RoundMetrics]:
    if cfg.protocol == "fedd2p":
        return run_experiment(cfg, workers, probe)
    return run_baseline(cfg, workers, probe)


def temperature_grid(
    cfg: ExperimentConfig,
    taus1: list[float],
    taus2: list[float],
    workers: int = 1,
) -> np.ndarray:
    """Final mean accuracy for every (tau1, tau2) cell, sharing seed and shards."""
    if not taus1 or not taus2:
        raise ConfigError("taus", "temperature lists must be non-empty")
    if any(t <= 0 for t in list(taus1) + list(taus2)):
        raise ConfigError("taus", "temperatures must be positive")
    matrix = np.zeros((len(taus1), len(taus2)))
    for i, t1 in enumerate(taus1):
        for j, t2 in enumerate(taus2):
            cell = dataclasses.replace(cfg, tau1=float(t1), tau2=float(t2))
            metrics = run_protocol(cell, workers)
            matrix[i, j] = metrics[-1].mean_accuracy
            log.info("grid cell tau1=%g tau2=%g -> %.4f", t1, t2, matrix[i, j])
    return matrix


def ablation_generator(cfg: ExperimentConfig, workers: int = 1) -> dict[str, list[RoundMetrics]]:
    """Paired attention-vs-mlp runs differing only in the generator kind."""
    out: dict[str, list[RoundMetrics]] = {}
    for kind in promptgen.GENERATOR_KINDS:
        arm = dataclasses.replace(cfg, generator_kind=kind)
        out[kind] = run_protocol(arm, workers)
    return out
