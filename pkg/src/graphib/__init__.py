"""Interpretable graph classification with an information-bottleneck edge
selector, a GIN encoder with bilinear second-order pooling, and matrix-based
Renyi mutual information."""

from .data import (Dataset, Graph, SyntheticConfig, build_graph, compute_fc,
                   generate_synthetic, load_dataset, save_dataset)
from .encoder import (GraphEncoder, classify_loss, gin_forward, load_checkpoint,
                      save_checkpoint, sopool_embed)
from .entropy import (EntropyConfig, GramMatrix, entropy_gradient, joint_entropy,
                      kernel_width, mutual_information, rbf_gram, renyi_entropy,
                      shannon_entropy)
from .evaluation import (Report, SplitPlan, evaluate, kfold_split, loso_split)
from .generator import (EdgeMask, SubgraphGenerator, apply_mask, connectivity_loss,
                        edge_scores, gumbel_sample)
from .interpret import (DENSITIES, METRICS, SystemMap, SystemProfile, density_auc,
                        dominant_subgraph, node_metrics, profile_systems,
                        sparsify_density)
from .training import (Model, TrainConfig, accuracy, batch_objective, build_model,
                       fit, predict, train_step)

__version__ = "0.1.0"
