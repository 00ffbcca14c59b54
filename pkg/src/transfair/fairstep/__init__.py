"""
fairstep - the fair source recommender: filter, fairness discriminator and their training loop.
"""

from .losses import Step1Batch, Step1Loss, discriminator_loss, discriminator_phase, filtered_embeddings, step1_loss
from .networks import FairnessDiscriminator, FilterNetwork
from .training import (
    EarlyStopper,
    FairModel,
    Step1Config,
    Step1History,
    Step1Result,
    Step1Round,
    fair_user_embedding,
    step1_train,
    train_base_model,
)

__all__ = [
    "EarlyStopper",
    "FairModel",
    "FairnessDiscriminator",
    "FilterNetwork",
    "Step1Batch",
    "Step1Config",
    "Step1History",
    "Step1Loss",
    "Step1Result",
    "Step1Round",
    "discriminator_loss",
    "discriminator_phase",
    "fair_user_embedding",
    "filtered_embeddings",
    "step1_loss",
    "step1_train",
    "train_base_model",
]
