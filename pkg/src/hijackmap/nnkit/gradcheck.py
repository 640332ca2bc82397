"""Finite-difference verification of analytic gradients."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from hijackmap.nnkit.losses import LOSSES

FD_STEP = 1e-5


def relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(1e-8, abs(analytic) + abs(numeric))


@dataclass
class GradCheckReport:
    per_parameter: dict[str, float]
    max_relative_error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_relative_error < self.tolerance


def gradient_check(model, x: np.ndarray, y: np.ndarray, tolerance: float = 1e-4,
                   loss: str = "bce") -> GradCheckReport:
    """Compare backprop gradients against central finite differences.

    Probes every entry of every parameter tensor, so only call this on
    small models. Reports the max relative error per tensor.
    """
    loss_fn, loss_grad = LOSSES[loss]
    x = np.asarray(x)
    y = np.asarray(y, dtype=np.float64).ravel()

    def loss_at() -> float:
        return loss_fn(model.network.forward(x), y)

    model.network.zero_grad()
    probs = model.network.forward(x)
    model.network.backward(loss_grad(probs.ravel(), y).reshape(probs.shape))
    analytic = {name: g.copy() for name, g in model.network.gradients().items()}

    params = model.network.parameters()
    per_parameter: dict[str, float] = {}
    for name, tensor in params.items():
        worst = 0.0
        flat = tensor.ravel()
        for i in range(flat.size):
            saved = flat[i]
            flat[i] = saved + FD_STEP
            up = loss_at()
            flat[i] = saved - FD_STEP
            down = loss_at()
            flat[i] = saved
            numeric = (up - down) / (2 * FD_STEP)
            worst = max(worst, relative_error(analytic[name].ravel()[i], numeric))
        per_parameter[name] = worst
    overall = max(per_parameter.values()) if per_parameter else 0.0
    return GradCheckReport(per_parameter=per_parameter, max_relative_error=overall,
                           tolerance=tolerance)
