"""Filter and fairness-discriminator networks."""

import numpy as np

from ..numkit.layers import DEFAULT_SLOPE, MLP, BinaryClassifier
from ..numkit.params import InitScheme


class FilterNetwork(MLP):
    """f_A: a two-layer d -> d -> d network with batch normalization on the hidden layer."""

    def __init__(
        self,
        dim: int,
        rng: np.random.Generator,
        *,
        slope: float = DEFAULT_SLOPE,
        init: InitScheme = "fan_in",
        init_std: float = 0.01,
    ):
        super().__init__(
            [dim, dim, dim], rng, slope=slope, batch_norm=True, init=init, init_std=init_std, name="filter."
        )

    @property
    def dim(self) -> int:
        return self.in_features


class FairnessDiscriminator(BinaryClassifier):
    """D_A: predicts the sensitive label from a (filtered) user embedding."""

    def __init__(
        self,
        dim: int,
        rng: np.random.Generator,
        *,
        hidden: int = 64,
        layers: int = 6,
        dropout: float = 0.3,
        slope: float = DEFAULT_SLOPE,
    ):
        super().__init__(dim, rng, hidden=hidden, layers=layers, dropout=dropout, slope=slope, name="fair_disc.")
