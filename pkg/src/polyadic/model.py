"""
Readout and loss: class bitstrings, per-class probabilities, argmax
prediction and the softmax-of-probabilities loss.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .circuit import Circuit, from_text, to_text
from .encoding import EncoderConfig, EncoderStats, encode
from .simulator import (Distribution, ShotCounts, bitstring_index, probabilities,
                        sample_indices)


@dataclass(frozen=True)
class ClassMap:
    """Ordered class labels and the N-bit string each one is read from."""

    labels: tuple
    bitstrings: tuple

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "bitstrings", tuple(self.bitstrings))
        if len(self.labels) != len(self.bitstrings):
            raise ValueError("need exactly one bitstring per class label")
        if not self.labels:
            raise ValueError("class map is empty")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("class labels must be distinct")
        if len(set(self.bitstrings)) != len(self.bitstrings):
            raise ValueError("class bitstrings must be distinct")
        widths = {len(s) for s in self.bitstrings}
        if len(widths) != 1:
            raise ValueError("all class bitstrings must have the same length")
        for s in self.bitstrings:
            bitstring_index(s, self.width)

    @property
    def width(self) -> int:
        return len(self.bitstrings[0])

    @property
    def n_classes(self) -> int:
        return len(self.labels)

    @property
    def indices(self) -> np.ndarray:
        return np.array([int(s, 2) for s in self.bitstrings])

    def label_index(self, label) -> int:
        return self.labels.index(label)

    @classmethod
    def default(cls, labels: Sequence, width: int) -> "ClassMap":
        """Assign bitstrings 0...0, 0...01, ... to the labels in order."""
        if len(labels) > 2 ** width:
            raise ValueError(f"{len(labels)} classes do not fit in {width} qubits")
        return cls(tuple(labels), tuple(format(i, f"0{width}b") for i in range(len(labels))))

    def to_dict(self) -> dict:
        return {"labels": list(self.labels), "bitstrings": list(self.bitstrings)}

    @classmethod
    def from_dict(cls, d) -> "ClassMap":
        return cls(tuple(d["labels"]), tuple(d["bitstrings"]))


def class_probs(source, class_map: ClassMap) -> np.ndarray:
    """Per-class probability estimates P_k.

    ``source`` may be a Distribution (exact), ShotCounts (C(s_k) / n) or an
    array of outcome probabilities of shape (..., 2^N).
    """
    if isinstance(source, Distribution):
        probs = source.probabilities
        width = source.width
    elif isinstance(source, ShotCounts):
        probs = source.frequencies()
        width = source.width
    else:
        probs = np.asarray(source, dtype=float)
        width = int(np.log2(probs.shape[-1]))
    if width != class_map.width:
        raise ValueError(f"outcome width {width} does not match class bitstrings of length {class_map.width}")
    return probs[..., class_map.indices]


def predict(probs) -> np.ndarray | int:
    """Index of the most probable class; ties go to the earliest class."""
    out = np.argmax(np.asarray(probs), axis=-1)
    return int(out) if np.ndim(out) == 0 else out


def loss_single(probs, y) -> np.ndarray | float:
    """-log softmax(P)_y, the loss of one sample (or a batch, row-wise)."""
    probs = np.asarray(probs, dtype=float)
    y = np.asarray(y)
    if probs.ndim > 1:
        y = np.broadcast_to(y, probs.shape[:-1])
        p_y = np.take_along_axis(probs, y[..., None], axis=-1)[..., 0]
    else:
        p_y = probs[y]
    out = logsumexp(probs, axis=-1) - p_y
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class Sampled:
    """Finite-shot evaluation mode."""

    shots: int
    seed: int | None = None

    def __post_init__(self):
        if self.shots < 1:
            raise ValueError(f"number of shots must be >= 1, got {self.shots}")


EXACT = "exact"


def angle_class_probs(circuit: Circuit, class_map: ClassMap, omegas, theta, mode=EXACT) -> np.ndarray:
    """P_k for a batch of encoded inputs, shape (B, K) (or (T, B, K) for a stack of theta)."""
    probs = probabilities(circuit, omegas, theta)
    if isinstance(mode, Sampled):
        flat = probs.reshape(-1, probs.shape[-1])
        counts = sample_indices(flat, mode.shots, np.random.default_rng(mode.seed))
        probs = (counts / mode.shots).reshape(probs.shape)
    elif mode != EXACT:
        raise ValueError(f"unknown evaluation mode {mode!r}")
    return class_probs(probs, class_map)


def angle_loss(circuit: Circuit, class_map: ClassMap, omegas, y, theta, mode=EXACT) -> float:
    """Mean loss over a batch of already-encoded samples."""
    y = np.asarray(y)
    if y.size == 0:
        raise ValueError("loss needs a non-empty batch")
    return float(np.mean(loss_single(angle_class_probs(circuit, class_map, omegas, theta, mode), y)))


@dataclass
class ModelSpec:
    """Everything needed to classify a raw feature vector."""

    circuit: Circuit
    class_map: ClassMap
    encoder_stats: EncoderStats | None = None
    encoder_config: EncoderConfig = field(default_factory=EncoderConfig)
    theta: np.ndarray | None = None
    summary: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.class_map.width != self.circuit.width:
            raise ValueError(f"class bitstrings have length {self.class_map.width} "
                             f"but the circuit has {self.circuit.width} qubits")
        if self.encoder_stats is not None and self.encoder_stats.dim != self.circuit.num_inputs:
            raise ValueError(f"encoder has {self.encoder_stats.dim} features, "
                             f"circuit expects {self.circuit.num_inputs}")
        if self.theta is not None:
            self.theta = np.asarray(self.theta, dtype=float)
            if self.theta.shape != (self.circuit.num_params,):
                raise ValueError(f"theta must have length {self.circuit.num_params}")

    @property
    def passthrough(self) -> bool:
        return self.encoder_stats is None

    def angles(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.circuit.num_inputs:
            raise ValueError(f"expected {self.circuit.num_inputs} features, got {X.shape[1]}")
        if self.passthrough:
            return X
        return encode(X, self.encoder_stats, self.encoder_config)

    def class_probs(self, X, theta=None, mode=EXACT) -> np.ndarray:
        theta = self.theta if theta is None else theta
        return angle_class_probs(self.circuit, self.class_map, self.angles(X), theta, mode)

    def predict_index(self, X, theta=None, mode=EXACT) -> np.ndarray:
        return np.atleast_1d(predict(self.class_probs(X, theta, mode)))

    def predict(self, X, theta=None, mode=EXACT) -> np.ndarray:
        labels = np.array(self.class_map.labels, dtype=object)
        return labels[self.predict_index(X, theta, mode)]

    def to_dict(self) -> dict:
        return {
            "circuit": to_text(self.circuit),
            "class_map": self.class_map.to_dict(),
            "encoder": None if self.passthrough else {
                **self.encoder_stats.to_dict(),
                "alpha": self.encoder_config.alpha, "q": self.encoder_config.q},
            "theta": None if self.theta is None else self.theta.tolist(),
            "summary": self.summary,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d) -> "ModelSpec":
        enc = d.get("encoder")
        return cls(
            circuit=from_text(d["circuit"]),
            class_map=ClassMap.from_dict(d["class_map"]),
            encoder_stats=None if enc is None else EncoderStats.from_dict(enc),
            encoder_config=EncoderConfig() if enc is None else EncoderConfig(enc["alpha"], enc["q"]),
            theta=d.get("theta"),
            summary=d.get("summary", {}),
        )

    @classmethod
    def from_json(cls, text: str) -> "ModelSpec":
        return cls.from_dict(json.loads(text))


def loss_batch(spec: ModelSpec, theta, X, y, mode=EXACT) -> float:
    """Mean loss of raw samples ``X`` with class indices ``y``."""
    if len(y) == 0:
        raise ValueError("loss needs a non-empty batch")
    return angle_loss(spec.circuit, spec.class_map, spec.angles(X), y, theta, mode)
