"""Dual-layer VGG-16 activation export.

Per frame this produces the ReLU output of the last convolutional layer
(conv5_3, shape 512x14x14) and of the first fully-connected layer
(fc1, 4096). Preprocessing: resize to 224x224 and normalize with the
standard ImageNet per-channel mean/std the pretrained weights expect.
"""

from __future__ import annotations

import numpy as np
import torch
import torchvision

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)

CONV_SHAPE = (512, 14, 14)
FC_DIM = 4096


def build_network(weights: str = "pretrained") -> torch.nn.Module:
    """VGG-16 backbone.

    weights: "pretrained" (torchvision download / cache), a path to a state
    dict (hook for fine-tuned weights), or "random" — a seeded untrained
    network that exercises the full pipeline with correct shapes; exports
    made with it carry no semantic content and are for testing only.
    """
    if weights == "pretrained":
        net = torchvision.models.vgg16(
            weights=torchvision.models.VGG16_Weights.IMAGENET1K_V1)
    elif weights == "random":
        torch.manual_seed(0)
        net = torchvision.models.vgg16(weights=None)
    else:
        net = torchvision.models.vgg16(weights=None)
        net.load_state_dict(torch.load(weights, map_location="cpu",
                                       weights_only=True))
    net.eval()
    return net


def preprocess(frame_rgb: np.ndarray) -> torch.Tensor:
    """uint8 RGB HxWx3 -> normalized 1x3x224x224 float tensor."""
    t = torch.from_numpy(frame_rgb).float().permute(2, 0, 1).unsqueeze(0) / 255.0
    t = torch.nn.functional.interpolate(t, size=(224, 224), mode="bilinear",
                                        align_corners=False)
    mean = torch.tensor(IMAGENET_MEAN).view(1, 3, 1, 1)
    std = torch.tensor(IMAGENET_STD).view(1, 3, 1, 1)
    return (t - mean) / std


@torch.no_grad()
def frame_activations(net: torch.nn.Module,
                      frame_rgb: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(conv activation flattened to 512*14*14, fc activation of 4096)."""
    x = preprocess(frame_rgb)
    conv = net.features[:30](x)          # ReLU after conv5_3: 512x14x14
    assert tuple(conv.shape[1:]) == CONV_SHAPE
    pooled = net.features[30](conv)
    pooled = net.avgpool(pooled)
    fc = net.classifier[:2](torch.flatten(pooled, 1))  # ReLU after fc1
    assert fc.shape[1] == FC_DIM
    return (conv.squeeze(0).reshape(-1).numpy().astype(np.float32),
            fc.squeeze(0).numpy().astype(np.float32))
