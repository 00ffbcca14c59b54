"""Mapping function and domain discriminator."""

import numpy as np

from ..numkit.layers import DEFAULT_SLOPE, MLP, BinaryClassifier
from ..numkit.ops import spectral_normalize, spectral_sigma
from ..numkit.params import InitScheme

SPECTRAL_WARMUP_ITERS = 50


class MappingFunction(MLP):
    """M: a four-layer k -> h -> h -> h -> d network, batch norm on the hidden layers."""

    def __init__(
        self,
        seed_dim: int,
        dim: int,
        rng: np.random.Generator,
        *,
        hidden: int = 64,
        slope: float = DEFAULT_SLOPE,
        init: InitScheme = "fan_in",
        init_std: float = 0.01,
    ):
        super().__init__(
            [seed_dim, hidden, hidden, hidden, dim],
            rng,
            slope=slope,
            batch_norm=True,
            init=init,
            init_std=init_std,
            name="mapping.",
        )


class DomainDiscriminator(BinaryClassifier):
    """D_d: tells fair source embeddings from mapped target embeddings.

    Every affine weight is spectrally normalized. The power-iteration
    vectors are warmed up at construction so the first estimates are tight,
    and ``tighten_spectral_estimates`` re-converges them after an update.

    Weights start at N(0, 0.01^2). The normalized forward pass ignores that
    scale; an SGD step moves W / sigma by roughly lr / sigma^2.
    """

    def __init__(
        self,
        dim: int,
        rng: np.random.Generator,
        *,
        hidden: int = 64,
        layers: int = 6,
        dropout: float = 0.3,
        slope: float = DEFAULT_SLOPE,
        init: InitScheme = "normal",
        init_std: float = 0.01,
    ):
        super().__init__(
            dim,
            rng,
            hidden=hidden,
            layers=layers,
            dropout=dropout,
            spectral_norm=True,
            slope=slope,
            init=init,
            init_std=init_std,
            name="domain_disc.",
        )
        self.tighten_spectral_estimates()

    def tighten_spectral_estimates(self, max_iters: int = SPECTRAL_WARMUP_ITERS, tolerance: float = 1e-9) -> None:
        """Run power iterations until each sigma estimate stops moving."""
        for layer in self.layers:
            sigma = spectral_sigma(layer)
            for _ in range(max_iters):
                spectral_normalize(layer, 1)
                previous, sigma = sigma, spectral_sigma(layer)
                if abs(sigma - previous) <= tolerance * max(abs(sigma), 1e-12):
                    break

    def effective_spectral_norms(self) -> list[float]:
        """Exact largest singular value of each normalized weight W / sigma_hat."""
        norms = []
        for layer in self.layers:
            weight = spectral_normalize(layer, 1, update=False).weight.value
            norms.append(float(np.linalg.norm(weight, 2)))
        return norms
