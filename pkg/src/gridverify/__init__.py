"""gridverify: certify a perception regressor, cell by cell, over a
partitioned configuration space.

A decoder network maps configurations (distance, yaw, optional latent noise)
to images; a regressor estimates the distance back. For each cell of a grid
partition, a branch-and-prune search over sound interval enclosures either
proves the estimate stays within epsilon of ground truth, returns a validated
decodable counterexample, or reports unknown. Verdicts aggregate into proof
maps with result and timing heatmaps.
"""

__version__ = "0.1.0"

from .intervals import Interval, IntervalTensor, error_interval, propagate_composed, propagate_layer
from .layers import (
    Activation,
    AvgPool2D,
    Conv2D,
    Dense,
    Reshape,
    ShapeError,
    TransposedConv2D,
    forward_layer,
    output_shape,
)
from .network import (
    ComposedNetwork,
    ManifestError,
    NetworkSpec,
    forward,
    forward_composed,
    load_composed,
    load_network,
    save_composed,
    save_network,
)
from .proofmap import (
    Partition,
    ProofMap,
    aggregate,
    build_partition,
    build_proofmap,
    emit_heatmap,
    load_proofmap,
    presample,
    save_proofmap,
    stats_table,
)
from .scene import BreakMask, Configuration, SceneModel, apply_break, generate_dataset, render_scene, ssim
from .solver import (
    Cell,
    CellResult,
    CorrectnessProperty,
    SolverConfig,
    Verdict,
    check_candidate,
    prove_cell,
    split_box,
)

__all__ = [
    "__version__",
    "Interval", "IntervalTensor", "error_interval", "propagate_composed", "propagate_layer",
    "Activation", "AvgPool2D", "Conv2D", "Dense", "Reshape", "ShapeError",
    "TransposedConv2D", "forward_layer", "output_shape",
    "ComposedNetwork", "ManifestError", "NetworkSpec", "forward", "forward_composed",
    "load_composed", "load_network", "save_composed", "save_network",
    "Partition", "ProofMap", "aggregate", "build_partition", "build_proofmap",
    "emit_heatmap", "load_proofmap", "presample", "save_proofmap", "stats_table",
    "BreakMask", "Configuration", "SceneModel", "apply_break", "generate_dataset",
    "render_scene", "ssim",
    "Cell", "CellResult", "CorrectnessProperty", "SolverConfig", "Verdict",
    "check_candidate", "prove_cell", "split_box",
]
