"""Deterministic simulator for federated per-class knowledge distillation
into a prompt-tuned frozen vision-language encoder."""

__version__ = "0.1.0"

from .aggregation import AggregatedKnowledge, aggregate
from .client import (
    ClassKnowledge,
    LocalModelParams,
    class_knowledge,
    evaluate,
    init_local_model,
    local_distill,
    local_train,
)
from .encoder import (
    EmbeddingMatrix,
    FrozenImageEncoder,
    image_encode,
    load_embeddings,
    prompt_template,
    save_embeddings,
    synth_text_embed,
)
from .numerics import cosine, cross_entropy, finite_diff_grad, kl_div, sgd_step, softmax_tau
from .orchestrator import (
    ExperimentConfig,
    RoundMetrics,
    ablation_generator,
    run_baseline,
    run_experiment,
    run_protocol,
    temperature_grid,
)
from .partition import Dataset, PartitionPlan, dirichlet_partition, synth_dataset
from .promptgen import (
    GlobalKnowledge,
    PromptGenParams,
    gen_backward,
    gen_forward,
    gen_loss,
    global_knowledge,
    init_prompt_generator,
    train_generator,
)

__all__ = [
    "AggregatedKnowledge",
    "ClassKnowledge",
    "Dataset",
    "EmbeddingMatrix",
    "ExperimentConfig",
    "FrozenImageEncoder",
    "GlobalKnowledge",
    "LocalModelParams",
    "PartitionPlan",
    "PromptGenParams",
    "RoundMetrics",
    "ablation_generator",
    "aggregate",
    "class_knowledge",
    "cosine",
    "cross_entropy",
    "evaluate",
    "finite_diff_grad",
    "gen_backward",
    "gen_forward",
    "gen_loss",
    "global_knowledge",
    "image_encode",
    "init_local_model",
    "init_prompt_generator",
    "kl_div",
    "load_embeddings",
    "local_distill",
    "local_train",
    "prompt_template",
    "run_baseline",
    "run_experiment",
    "run_protocol",
    "save_embeddings",
    "sgd_step",
    "softmax_tau",
    "synth_dataset",
    "synth_text_embed",
    "temperature_grid",
    "train_generator",
]
