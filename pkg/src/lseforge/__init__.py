"""Memory-efficient cross-entropy losses for large-catalog sequential recommendation."""
from .backend import Backend
from .cce import CceConfig, cce_backward, cce_forward
from .ccem import ccem_backward, ccem_forward, estimate_flops
from .memory import MemoryAccountant, MemoryModel, peak_bytes
from .oracles import (bce_forward_backward, ce_full_backward, ce_full_forward,
                      ce_sampled_backward, ce_sampled_forward)
from .sampler import PopularityTable, sample_popularity, sample_uniform
from .tensor import Rng, logsumexp_row, matmul_block, online_lse_update
from .types import GradPair, LossOutput, NegIndexMatrix

__version__ = "0.1.0"
