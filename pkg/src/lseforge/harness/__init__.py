"""End-to-end training harness: data, toy encoder, Adam, metrics."""
from .data import (InteractionLog, SplitSpec, check_no_leakage, ingest_csv,
                   make_synthetic, temporal_split)
from .metrics import evaluate, spearman
from .model import ToyEncoderParams, encode
from .optim import Adam
from .train import (RunConfig, TrainConfig, loss_step, prepare_run, run_epoch,
                    train_epoch, train_run)

__all__ = [
    "InteractionLog", "SplitSpec", "check_no_leakage", "ingest_csv", "make_synthetic",
    "temporal_split", "evaluate", "spearman", "ToyEncoderParams", "encode", "Adam",
    "RunConfig", "TrainConfig", "loss_step", "prepare_run", "run_epoch", "train_epoch",
    "train_run",
]
