"""Multi-view representation learning on anchor graphs and tensors.

Two solvers share the graph-construction and evaluation stack: an ADMM
scheme that couples per-view bipartite graphs through a low-rank tensor
consensus, and an alternating eigensolver that couples per-view locally
linear embeddings through graph-consensus Laplacians.
"""

from .clustering import KmeansResult, accuracy, kmeans, nmi, purity
from .data import (
    MultiViewDataset,
    load_manifest,
    load_matrix,
    make_synthetic_blobs,
    save_dataset,
    save_matrix,
)
from .gcmf import GcmfConfig, GcmfResult
from .gcmf import solve as gcmf_solve
from .graphs import (
    AnchorSet,
    ViewGraph,
    bipartite_graph,
    degree_and_normalize,
    gaussian_knn_graph,
    lle_weights,
    select_anchors_kmeans,
    select_anchors_svd,
)
from .tcgf import TcgfConfig, TcgfResult
from .tcgf import solve as tcgf_solve
from .tcgf import solve_dataset as tcgf_solve_dataset
from .tensor_ops import (
    prox_weighted_tnn,
    stack_rotate,
    t_product,
    t_svd,
    t_transpose,
    unstack_rotate,
    weighted_tnn,
)

__version__ = "0.1.0"

__all__ = [
    "AnchorSet",
    "GcmfConfig",
    "GcmfResult",
    "KmeansResult",
    "MultiViewDataset",
    "TcgfConfig",
    "TcgfResult",
    "ViewGraph",
    "accuracy",
    "bipartite_graph",
    "degree_and_normalize",
    "gaussian_knn_graph",
    "gcmf_solve",
    "kmeans",
    "lle_weights",
    "load_manifest",
    "load_matrix",
    "make_synthetic_blobs",
    "nmi",
    "prox_weighted_tnn",
    "purity",
    "save_dataset",
    "save_matrix",
    "select_anchors_kmeans",
    "select_anchors_svd",
    "stack_rotate",
    "t_product",
    "t_svd",
    "t_transpose",
    "tcgf_solve",
    "tcgf_solve_dataset",
    "unstack_rotate",
    "weighted_tnn",
]
