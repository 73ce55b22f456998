"""Convolutional classifier: stem of conv/norm/pool pairs, one block of
parallel convolution branches, global max pooling, and a 2-way softmax head.

The exact layer widths are configurable; the default is the smallest
configuration with every structural element present. All parameters are
float64 unless configured otherwise, and model construction is deterministic
given the seed.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .layers import (
    BatchNorm,
    Conv2D,
    Dense,
    Flatten,
    GlobalMaxPool,
    InceptionBlock,
    Layer,
    MaxPool2D,
    ReLU,
    softmax,
)

NUM_CLASSES = 2  # benign / malicious


class ShapeError(ValueError):
    pass


@dataclass(frozen=True)
class ConvSpec:
    filters: int
    kernel: int = 3
    stride: int = 1


@dataclass(frozen=True)
class InceptionSpec:
    b1: int = 16
    b2_reduce: int = 16
    b2: int = 32
    b3_reduce: int = 8
    b3: int = 16
    pool_proj: int = 16

    @property
    def out_channels(self) -> int:
        return self.b1 + self.b2 + self.b3 + self.pool_proj


@dataclass(frozen=True)
class DnnConfig:
    input_rows: int = 64
    input_cols: int = 64
    stem: tuple[ConvSpec, ...] = (ConvSpec(32), ConvSpec(64))
    stem_pool: int = 2
    inception: InceptionSpec | None = field(default_factory=InceptionSpec)
    batchnorm: bool = True
    learning_rate: float = 0.01
    batch_size: int = 32
    epochs: int = 30
    seed: int = 0
    dtype: str = "float64"

    def __post_init__(self) -> None:
        if self.input_rows < 1 or self.input_cols < 1:
            raise ValueError("input shape must be positive")
        for spec in self.stem:
            if spec.filters < 1:
                raise ValueError("conv widths must be >= 1")
        if self.dtype not in ("float64", "float32"):
            raise ValueError("dtype must be float64 or float32")

    def to_dict(self) -> dict:
        return {
            "input_rows": self.input_rows,
            "input_cols": self.input_cols,
            "stem": [[s.filters, s.kernel, s.stride] for s in self.stem],
            "stem_pool": self.stem_pool,
            "inception": None
            if self.inception is None
            else [
                self.inception.b1,
                self.inception.b2_reduce,
                self.inception.b2,
                self.inception.b3_reduce,
                self.inception.b3,
                self.inception.pool_proj,
            ],
            "batchnorm": self.batchnorm,
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "epochs": self.epochs,
            "seed": self.seed,
            "dtype": self.dtype,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "DnnConfig":
        return cls(
            input_rows=doc["input_rows"],
            input_cols=doc["input_cols"],
            stem=tuple(ConvSpec(*s) for s in doc["stem"]),
            stem_pool=doc["stem_pool"],
            inception=None
            if doc["inception"] is None
            else InceptionSpec(*doc["inception"]),
            batchnorm=doc["batchnorm"],
            learning_rate=doc["learning_rate"],
            batch_size=doc["batch_size"],
            epochs=doc["epochs"],
            seed=doc["seed"],
            dtype=doc["dtype"],
        )


@dataclass
class Prediction:
    label: int
    probs: np.ndarray  # (2,), nonnegative, sums to 1

    def __post_init__(self) -> None:
        if abs(float(self.probs.sum()) - 1.0) > 1e-9:
            raise ValueError("probabilities must sum to 1")
        if self.label != int(np.argmax(self.probs)):
            raise ValueError("label must be the argmax class")

    @property
    def score(self) -> float:
        """Probability of the malicious class, used for ROC sweeps."""
        return float(self.probs[1])


class DnnModel:
    def __init__(self, config: DnnConfig) -> None:
        self.config = config
        self.dtype = np.dtype(config.dtype)
        rng = np.random.default_rng(config.seed)
        self.layers: list[Layer] = []
        shape = (config.input_rows, config.input_cols, 1)
        channels = 1

        def conv_unit(spec: ConvSpec, cin: int) -> list[Layer]:
            unit: list[Layer] = [
                Conv2D(cin, spec.filters, spec.kernel, spec.stride,
                       rng=rng, dtype=self.dtype)
            ]
            if config.batchnorm:
                unit.append(BatchNorm(spec.filters, dtype=self.dtype))
            unit.append(ReLU())
            return unit

        for spec in config.stem:
            self.layers.extend(conv_unit(spec, channels))
            self.layers.append(MaxPool2D(config.stem_pool))
            channels = spec.filters

        if config.inception is not None:
            inc = config.inception
            branches = [
                conv_unit(ConvSpec(inc.b1, 1), channels),
                conv_unit(ConvSpec(inc.b2_reduce, 1), channels)
                + conv_unit(ConvSpec(inc.b2, 3), inc.b2_reduce),
                conv_unit(ConvSpec(inc.b3_reduce, 1), channels)
                + conv_unit(ConvSpec(inc.b3, 5), inc.b3_reduce),
                [MaxPool2D(3, stride=1, pad=1)] + conv_unit(ConvSpec(inc.pool_proj, 1), channels),
            ]
            self.layers.append(InceptionBlock(branches))
            channels = inc.out_channels

        if config.stem or config.inception is not None:
            self.layers.append(GlobalMaxPool())
            feature_size = channels
        else:
            self.layers.append(Flatten())
            feature_size = config.input_rows * config.input_cols
        self.layers.append(Dense(feature_size, NUM_CLASSES, rng=rng, dtype=self.dtype))

        self._declared_shapes = self._shape_algebra(shape)
        self._assert_shapes(shape)

    # -- shape bookkeeping ---------------------------------------------------

    def _shape_algebra(self, in_shape) -> list[tuple[int, ...]]:
        shapes = []
        shape = in_shape
        for layer in self.layers:
            shape = layer.out_shape(shape)
            shapes.append(shape)
        if shape != (NUM_CLASSES,):
            raise ShapeError(f"head produces {shape}, expected ({NUM_CLASSES},)")
        return shapes

    def _assert_shapes(self, in_shape) -> None:
        x = np.zeros((1, *in_shape), dtype=self.dtype)
        for layer, declared in zip(self.layers, self._declared_shapes):
            x = layer.forward(x, training=False)
            if x.shape[1:] != declared:
                raise ShapeError(
                    f"{type(layer).__name__}: declared {declared}, computed {x.shape[1:]}"
                )

    def describe(self) -> list[str]:
        return [
            f"{type(layer).__name__} -> {shape}"
            for layer, shape in zip(self.layers, self._declared_shapes)
        ]

    # -- passes ----------------------------------------------------------------

    def _check_input(self, batch: np.ndarray) -> np.ndarray:
        expect = (self.config.input_rows, self.config.input_cols)
        if batch.ndim == 3:
            batch = batch[..., None]
        if batch.ndim != 4 or batch.shape[1:3] != expect or batch.shape[3] != 1:
            raise ShapeError(
                f"input shape {batch.shape} does not match {expect} + 1 channel"
            )
        return batch.astype(self.dtype, copy=False)

    def forward_batch(self, batch: np.ndarray, training: bool) -> np.ndarray:
        x = self._check_input(batch)
        for layer in self.layers:
            x = layer.forward(x, training)
        return x

    def backward_batch(self, dlogits: np.ndarray) -> None:
        d = dlogits
        for layer in reversed(self.layers):
            d = layer.backward(d)

    def predict_proba(self, batch: np.ndarray) -> np.ndarray:
        return softmax(self.forward_batch(batch, training=False))

    def predict(self, matrix: np.ndarray) -> Prediction:
        probs = self.predict_proba(matrix[None])[0]
        return Prediction(int(np.argmax(probs)), probs)

    # -- parameter access --------------------------------------------------------

    def flat_layers(self):
        for layer in self.layers:
            if isinstance(layer, InceptionBlock):
                yield from layer._layers()
            else:
                yield layer

    def params(self) -> list[np.ndarray]:
        return [p for layer in self.layers for p in layer.params()]

    def grads(self) -> list[np.ndarray]:
        return [g for layer in self.layers for g in layer.grads()]

    def state(self) -> list[np.ndarray]:
        return [s for layer in self.layers for s in layer.state()]

    def switch_states(self) -> list[np.ndarray]:
        states = []
        for layer in self.flat_layers():
            s = layer.switch_state()
            if s is not None:
                states.append(s)
        return states

    def assert_finite(self) -> None:
        for arr in self.state():
            if not np.isfinite(arr).all():
                raise FloatingPointError("non-finite model parameter")


# -- persistence ---------------------------------------------------------------

_MAGIC = b"MHNN"
_VERSION = 1


def save_model(model: DnnModel, path: str) -> None:
    arrays = model.state()
    header = {
        "config": model.config.to_dict(),
        "arrays": [list(a.shape) for a in arrays],
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fobj:
        fobj.write(_MAGIC)
        fobj.write(struct.pack("<I", _VERSION))
        fobj.write(struct.pack("<I", len(blob)))
        fobj.write(blob)
        for a in arrays:
            fobj.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def load_model(path: str) -> DnnModel:
    with open(path, "rb") as fobj:
        magic = fobj.read(4)
        if magic != _MAGIC:
            raise ValueError(f"{path}: not a model file")
        (version,) = struct.unpack("<I", fobj.read(4))
        if version != _VERSION:
            raise ValueError(
                f"{path}: model format version {version}, expected {_VERSION}"
            )
        (blob_len,) = struct.unpack("<I", fobj.read(4))
        header = json.loads(fobj.read(blob_len).decode("utf-8"))
        model = DnnModel(DnnConfig.from_dict(header["config"]))
        arrays = model.state()
        if [list(a.shape) for a in arrays] != header["arrays"]:
            raise ValueError(f"{path}: architecture does not match stored shapes")
        for a in arrays:
            data = np.frombuffer(fobj.read(a.size * 8), dtype="<f8")
            a[...] = data.reshape(a.shape).astype(model.dtype)
    return model
