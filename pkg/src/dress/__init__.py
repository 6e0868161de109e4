"""Self-supervised few-shot task construction from disentangled latents.

Pipeline: render a multi-factor image dataset, encode it into grouped latent
dimensions, align and cluster each group into partitions, assemble few-shot
episodes from the partitions, and meta-train a small classifier on them. A
partition-overlap diversity metric compares task collections.
"""

from .clustering import (KMeansResult, Partition, PCAProjection, cactus_partitions,
                         cluster_per_dimension, factor_partitions, kmeans, pca_fit,
                         pca_transform)
from .config import (ConfigError, RunConfig, config_from_dict, config_hash,
                     desk_profile, load_config, paper_profile, save_config)
from .datagen import (Dataset, FactorSpec, default_factor_specs, generate_dataset,
                      render_scene, split_dataset)
from .diversity import (DiversityScore, diversity_score, iou,
                        mean_pairwise_diversity, pairwise_scores)
from .encoders import (AlignmentError, LatentRep, SlotRep, align_slots,
                       alignment_accuracy, concat_latents, encode_mixed,
                       encode_oracle, encode_slots, stack_groups)
from .experiments import (MatrixResult, SeedResult, model_inputs, run_matrix,
                          run_seed, summary_table, task_grid_image)
from .metalearn import (EvalReport, MetaState, evaluate, fsda_evaluate,
                        init_meta_state, inner_adapt, meta_train)
from .nncore import MLPArch, default_arch, init_params, num_params
from .seeding import rng_for, subseed
from .taskgen import (Episode, TaskConstructionError, TaskSetup, build_task_stream,
                      eligible_partitions, sample_supervised_task,
                      sample_task_from_partition)

__version__ = "0.1.0"

__all__ = [
    "AlignmentError", "ConfigError", "Dataset", "DiversityScore", "Episode",
    "EvalReport", "FactorSpec", "KMeansResult", "LatentRep", "MLPArch",
    "MatrixResult", "MetaState", "PCAProjection", "Partition", "RunConfig",
    "SeedResult", "SlotRep",
    "TaskConstructionError", "TaskSetup", "align_slots", "alignment_accuracy",
    "build_task_stream", "cactus_partitions", "cluster_per_dimension",
    "concat_latents", "config_from_dict", "config_hash", "default_arch",
    "default_factor_specs", "desk_profile", "diversity_score", "eligible_partitions",
    "encode_mixed", "encode_oracle", "encode_slots", "evaluate",
    "factor_partitions", "fsda_evaluate", "generate_dataset", "init_meta_state",
    "init_params", "inner_adapt", "iou", "kmeans", "load_config",
    "mean_pairwise_diversity", "meta_train", "model_inputs", "num_params",
    "paper_profile", "pairwise_scores", "pca_fit", "pca_transform",
    "render_scene", "rng_for", "run_matrix", "run_seed",
    "sample_supervised_task", "sample_task_from_partition", "save_config",
    "split_dataset", "stack_groups", "subseed", "summary_table",
    "task_grid_image",
]
