"""Integrated-gradients attribution maps.

Zero baseline, matching the redact-to-zero counterfactual semantics; the
path integral is approximated with a midpoint Riemann sum over ig_steps
scaled inputs, attributing the softmax probability of the target label.
"""

from __future__ import annotations

import numpy as np
import torch

from .models import LoadedModel, to_nchw


def integrated_gradients(
    loaded: LoadedModel, flat: np.ndarray, label: int, steps: int = 50
) -> np.ndarray:
    """Per-dimension scores as a flat float32 channel-last vector."""
    x = to_nchw(loaded, flat)
    total = torch.zeros_like(x)
    for k in range(steps):
        alpha = (k + 0.5) / steps
        scaled = (alpha * x).clone().requires_grad_(True)
        prob = torch.softmax(loaded.net(scaled)[0], dim=0)[label]
        (grad,) = torch.autograd.grad(prob, scaled)
        total += grad
    ig = (x * total / steps)[0]  # C x H x W
    hwc = ig.permute(1, 2, 0).detach().numpy()
    return np.ascontiguousarray(hwc.reshape(-1), dtype="<f4")
