"""
transferstep - cold-start target embeddings learned by adversarial domain matching.
"""

from .losses import (
    EVEN_DOMAIN_LOSS,
    DomainLoss,
    SupervisedLoss,
    discriminator_step,
    domain_accuracy,
    domain_loss,
    mapping_objective,
    supervised_loss,
)
from .networks import DomainDiscriminator, MappingFunction
from .theorem import TheoremReport, theorem_check
from .training import (
    Step2Config,
    Step2History,
    Step2Result,
    Step2Round,
    TransferModel,
    align_domains,
    frozen_source,
    init_target_seeds,
    source_side_digest,
    step2_supervised,
    step2_train,
    step2_unsupervised,
)

__all__ = [
    "EVEN_DOMAIN_LOSS",
    "DomainDiscriminator",
    "DomainLoss",
    "MappingFunction",
    "Step2Config",
    "Step2History",
    "Step2Result",
    "Step2Round",
    "SupervisedLoss",
    "TheoremReport",
    "TransferModel",
    "align_domains",
    "discriminator_step",
    "domain_accuracy",
    "domain_loss",
    "frozen_source",
    "init_target_seeds",
    "mapping_objective",
    "source_side_digest",
    "step2_supervised",
    "step2_train",
    "step2_unsupervised",
    "supervised_loss",
    "theorem_check",
]
