"""Backbone registry and classifier-head construction.

A model is a pretrained (or freshly initialized) convolutional trunk,
global average pooling, and a custom fully connected head: 512 units,
25% dropout, 256 units, then a softmax layer as wide as the dataset's
class space. Every layer stays trainable so fine-tuning updates the
whole network.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

os.environ.setdefault("TF_CPP_MIN_LOG_LEVEL", "2")

import keras

__all__ = ["BACKBONES", "HeadSpec", "WeightsUnavailableError", "build_model",
           "head_param_count", "preprocess_for"]


class WeightsUnavailableError(Exception):
    """Pretrained weights were requested but cannot be obtained (offline)."""


# backbone id -> (keras.applications constructor name, preprocess module name)
BACKBONES = {
    "vgg16": ("VGG16", "vgg16"),
    "vgg19": ("VGG19", "vgg19"),
    "inception_v3": ("InceptionV3", "inception_v3"),
    "mobilenet_v2": ("MobileNetV2", "mobilenet_v2"),
    "mobilenet_v3": ("MobileNetV3Large", "mobilenet_v3"),
    "inception_resnet_v2": ("InceptionResNetV2", "inception_resnet_v2"),
}


@dataclass(frozen=True)
class HeadSpec:
    hidden1: int = 512
    dropout: float = 0.25
    hidden2: int = 256


def head_param_count(feature_width: int, n_classes: int, head: HeadSpec = HeadSpec()) -> int:
    """Dense/dropout head parameter count for a pooled feature width F:
    F·h1 + h1 + h1·h2 + h2 + h2·n + n."""
    return (
        feature_width * head.hidden1 + head.hidden1
        + head.hidden1 * head.hidden2 + head.hidden2
        + head.hidden2 * n_classes + n_classes
    )


def preprocess_for(backbone: str):
    """The backbone family's input preprocessing (expects [0, 255] floats)."""
    if backbone not in BACKBONES:
        raise ValueError(f"unknown backbone {backbone!r}; known: {sorted(BACKBONES)}")
    _, module_name = BACKBONES[backbone]
    module = getattr(keras.applications, module_name)
    return module.preprocess_input


def build_model(
    backbone: str,
    input_size: int,
    n_classes: int,
    weights: str = "imagenet",
    head: HeadSpec = HeadSpec(),
) -> keras.Model:
    """Assemble trunk + pooling + head; every layer trainable.

    ``weights`` is "imagenet" for pretrained trunk weights or "none" for
    fresh initialization. Requesting "imagenet" without network access to
    the weight host raises ``WeightsUnavailableError``.
    """
    if backbone not in BACKBONES:
        raise ValueError(f"unknown backbone {backbone!r}; known: {sorted(BACKBONES)}")
    if weights not in ("imagenet", "none"):
        raise ValueError(f"weights must be 'imagenet' or 'none', got {weights!r}")
    ctor = getattr(keras.applications, BACKBONES[backbone][0])
    try:
        trunk = ctor(
            include_top=False,
            weights=None if weights == "none" else weights,
            input_shape=(input_size, input_size, 3),
        )
    except Exception as exc:
        if weights == "imagenet":
            raise WeightsUnavailableError(
                f"pretrained weights for {backbone!r} are unavailable offline "
                f"({exc}); pass weights='none' to train from fresh initialization"
            ) from exc
        raise

    inputs = keras.Input((input_size, input_size, 3))
    x = trunk(inputs)
    x = keras.layers.GlobalAveragePooling2D(name="pool")(x)
    x = keras.layers.Dense(head.hidden1, activation="relu", name="head_dense1")(x)
    x = keras.layers.Dropout(head.dropout, name="head_dropout")(x)
    x = keras.layers.Dense(head.hidden2, activation="relu", name="head_dense2")(x)
    outputs = keras.layers.Dense(n_classes, activation="softmax", name="head_output")(x)
    model = keras.Model(inputs, outputs, name=f"{backbone}_classifier")
    for layer in model.layers:
        layer.trainable = True
    return model


def pooled_feature_width(model: keras.Model) -> int:
    """Channel width F that the head sees, read back from the built model."""
    return int(model.get_layer("pool").output.shape[-1])
