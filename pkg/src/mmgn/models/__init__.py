from .baselines import ARCHS, BaselineModel, DEFAULTS as DEFAULT_BASELINE_OPTIONS, baseline_forward, baseline_graph, init_baseline
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .gabor import GaborFilterBank, GaborTerm, gabor_apply, gabor_product_expand
from .latent import LatentTable
from .mmgn import (
    FILTER_KINDS,
    INPUT_SCALES,
    MmgnDims,
    MmgnModel,
    init_mmgn,
    linear_expansion,
    mmgn_forward,
    mmgn_graph,
)


def predict(model, x, z=None, t=None):
    """Dispatch to the MMGN decoder (needs ``z``) or a baseline (needs ``t``)."""
    if isinstance(model, MmgnModel):
        return mmgn_forward(model, z, x)
    return baseline_forward(model, x, t)
