"""
Reverse-mode gradient recording.

Operations in ``numkit.ops`` record themselves onto the innermost active
``Tape``. Outside of a ``with Tape():`` block they only compute values, which
is what evaluation and inference code relies on.
"""

from collections.abc import Callable, Sequence
from contextvars import ContextVar
from dataclasses import dataclass

import numpy as np

from ..errors import ShapeError

BackwardFn = Callable[[np.ndarray], Sequence[np.ndarray | None]]


class Tensor:
    """A 2-D float64 matrix that can take part in recorded computations.

    Parameters are ``Tensor`` objects flagged ``trainable``; optimizers replace
    ``value`` with a new array instead of mutating it, so values handed out by
    an operation are never changed afterwards.
    """

    __slots__ = ("value", "name", "trainable")

    def __init__(self, value: np.ndarray | float | Sequence, name: str = "", trainable: bool = False):
        array = np.asarray(value, dtype=np.float64)
        if array.ndim == 0:
            array = array.reshape(1, 1)
        elif array.ndim == 1:
            array = array.reshape(1, -1)
        elif array.ndim != 2:
            raise ShapeError(f"Tensor values must be at most 2-D, got shape {array.shape}")
        self.value = array
        self.name = name
        self.trainable = trainable

    @property
    def shape(self) -> tuple[int, int]:
        rows, cols = self.value.shape
        return rows, cols

    @property
    def rows(self) -> int:
        return int(self.value.shape[0])

    @property
    def cols(self) -> int:
        return int(self.value.shape[1])

    def item(self) -> float:
        """Return the single entry of a 1x1 tensor."""
        if self.value.size != 1:
            raise ShapeError(f"item() needs a 1x1 tensor, got {self.shape}")
        return float(self.value.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.value

    def __repr__(self) -> str:
        label = f" {self.name!r}" if self.name else ""
        return f"Tensor{label}(shape={self.shape}, trainable={self.trainable})"


@dataclass(frozen=True)
class _Node:
    output: Tensor
    inputs: tuple[Tensor, ...]
    backward: BackwardFn


_active_tape: ContextVar["Tape | None"] = ContextVar("numkit_active_tape", default=None)


class Tape:
    """Ordered record of forward computations.

    Nodes are appended in execution order, which is a topological order of the
    computation graph; ``gradient`` walks them once in reverse.
    """

    def __init__(self) -> None:
        self._nodes: list[_Node] = []
        self._token = None

    def __enter__(self) -> "Tape":
        self._token = _active_tape.set(self)
        return self

    def __exit__(self, *exc_info) -> None:
        if self._token is not None:
            _active_tape.reset(self._token)
            self._token = None

    def __len__(self) -> int:
        return len(self._nodes)

    def record(self, output: Tensor, inputs: Sequence[Tensor], backward: BackwardFn) -> None:
        self._nodes.append(_Node(output, tuple(inputs), backward))

    def gradient(self, loss: Tensor, sources: Sequence[Tensor]) -> list[np.ndarray]:
        """Gradients of a scalar ``loss`` with respect to each tensor in ``sources``.

        Sources that do not influence the loss get a zero gradient.
        """
        if loss.value.size != 1:
            raise ShapeError(f"gradient() needs a scalar loss, got shape {loss.shape}")

        grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.value)}
        for node in reversed(self._nodes):
            upstream = grads.get(id(node.output))
            if upstream is None:
                continue
            for tensor, grad in zip(node.inputs, node.backward(upstream), strict=True):
                if grad is None:
                    continue
                key = id(tensor)
                grads[key] = grads[key] + grad if key in grads else grad

        return [grads.get(id(source), np.zeros_like(source.value)) for source in sources]


def active_tape() -> Tape | None:
    """The innermost tape currently recording, if any."""
    return _active_tape.get()


def record(output: Tensor, inputs: Sequence[Tensor], backward: BackwardFn) -> Tensor:
    tape = _active_tape.get()
    if tape is not None:
        tape.record(output, inputs, backward)
    return output
