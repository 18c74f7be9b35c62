"""Swap, self, proxy and supervised objectives"""
from .functions import (
    LossParts,
    combined_objective,
    penalty,
    proxy_image_loss,
    proxy_param_loss,
    rho,
    self_loss,
    supervised_loss,
    swap_loss,
)

__all__ = [
    "LossParts",
    "combined_objective",
    "penalty",
    "proxy_image_loss",
    "proxy_param_loss",
    "rho",
    "self_loss",
    "supervised_loss",
    "swap_loss",
]
