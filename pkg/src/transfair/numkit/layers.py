"""Multi-layer perceptrons built from ``LayerParams``."""

from collections.abc import Sequence

import numpy as np

from .ops import Mode, affine_forward, batch_norm, dropout, leaky_relu, sigmoid, spectral_normalize
from .params import InitScheme, LayerParams
from .tape import Tensor

DEFAULT_SLOPE = 0.2


class MLP:
    """Affine layers with leaky-ReLU between them.

    Hidden layers can carry batch normalization (applied before the
    activation) and dropout (after it). With ``spectral_norm`` every affine
    weight is divided by its power-iteration spectral-norm estimate on each
    forward pass. The last layer is linear.
    """

    def __init__(
        self,
        sizes: Sequence[int],
        rng: np.random.Generator,
        *,
        slope: float = DEFAULT_SLOPE,
        batch_norm: bool = False,
        dropout: float = 0.0,
        spectral_norm: bool = False,
        init: InitScheme = "fan_in",
        init_std: float = 0.01,
        name: str = "",
    ):
        if len(sizes) < 2:
            raise ValueError(f"an MLP needs at least input and output sizes, got {list(sizes)}")
        self.sizes = [int(s) for s in sizes]
        self.slope = slope
        self.dropout_rate = dropout
        self.spectral_norm = spectral_norm
        self.name = name
        last = len(self.sizes) - 2
        self.layers = [
            LayerParams.init(
                fan_in,
                fan_out,
                rng,
                scheme=init,
                std=init_std,
                batch_norm=batch_norm and i < last,
                spectral=spectral_norm,
                name=f"{name}layers.{i}.",
            )
            for i, (fan_in, fan_out) in enumerate(zip(self.sizes[:-1], self.sizes[1:], strict=True))
        ]

    @property
    def in_features(self) -> int:
        return self.sizes[0]

    @property
    def out_features(self) -> int:
        return self.sizes[-1]

    def forward(
        self,
        x: Tensor,
        mode: Mode = "eval",
        rng: np.random.Generator | None = None,
        *,
        update_stats: bool = True,
        spectral_update: bool = True,
    ) -> Tensor:
        h = x
        last = len(self.layers) - 1
        for i, layer in enumerate(self.layers):
            params = spectral_normalize(layer, 1, update=spectral_update) if self.spectral_norm else layer
            h = affine_forward(h, params)
            if i == last:
                break
            if layer.norm_state is not None:
                h = batch_norm(h, layer, mode, update_stats=update_stats)
            h = leaky_relu(h, self.slope)
            if self.dropout_rate > 0.0:
                h = dropout(h, self.dropout_rate, mode, rng)
        return h

    __call__ = forward

    def parameters(self) -> list[Tensor]:
        return [p for layer in self.layers for p in layer.parameters()]

    def state_dict(self, prefix: str = "") -> dict[str, np.ndarray]:
        state: dict[str, np.ndarray] = {}
        for i, layer in enumerate(self.layers):
            state.update(layer.state_dict(f"{prefix}layers.{i}."))
        return state

    def load_state_dict(self, state: dict[str, np.ndarray], prefix: str = "") -> None:
        for i, layer in enumerate(self.layers):
            layer.load_state_dict(state, f"{prefix}layers.{i}.")

    def __repr__(self) -> str:
        return f"MLP({self.name or 'mlp'}, sizes={self.sizes})"


def classifier_sizes(in_features: int, hidden: int, layers: int) -> list[int]:
    """Sizes for a ``layers``-deep binary classifier ending in one logit."""
    if layers < 1:
        raise ValueError("a classifier needs at least one layer")
    return [in_features] + [hidden] * (layers - 1) + [1]


class BinaryClassifier(MLP):
    """An MLP ending in a single logit; ``probability`` applies the sigmoid."""

    def __init__(
        self,
        in_features: int,
        rng: np.random.Generator,
        *,
        hidden: int = 64,
        layers: int = 6,
        dropout: float = 0.3,
        spectral_norm: bool = False,
        slope: float = DEFAULT_SLOPE,
        init: InitScheme = "fan_in",
        init_std: float = 0.01,
        name: str = "",
    ):
        super().__init__(
            classifier_sizes(in_features, hidden, layers),
            rng,
            slope=slope,
            dropout=dropout,
            spectral_norm=spectral_norm,
            init=init,
            init_std=init_std,
            name=name,
        )

    def probability(self, x: np.ndarray) -> np.ndarray:
        """Eval-mode sigma(logit) per row, without touching spectral state."""
        logits = self.forward(Tensor(np.asarray(x, dtype=np.float64)), "eval", spectral_update=False)
        return sigmoid(logits).value[:, 0]
