from typing import Union

import torch

from ..common.exceptions import ConfigurationError, ShapeError

Timestep = Union[float, torch.Tensor]


def _check_timestep(t: Timestep, allow_zero: bool = True) -> None:
    value = torch.as_tensor(t)
    low_ok = (value >= 0) if allow_zero else (value > 0)
    if not bool(torch.all(low_ok & (value <= 1))):
        raise ConfigurationError(f"timestep must lie within {'[' if allow_zero else '('}0, 1], got {t}")


def _broadcast(t: Timestep, like: torch.Tensor) -> Timestep:
    if isinstance(t, torch.Tensor) and t.ndim == 1:
        return t.to(like.dtype).reshape(-1, *([1] * (like.ndim - 1)))
    return t


def noise_inject(z_hq: torch.Tensor, eps: torch.Tensor, t: Timestep) -> torch.Tensor:
    """Rectified-flow interpolation z_t = t * eps + (1 - t) * z_hq.

    Args:
        z_hq (torch.Tensor): Clean latent.
        eps (torch.Tensor): Noise, same shape.
        t (Timestep): Scalar or per-sample (B,) timestep in [0, 1].

    Raises:
        ConfigurationError: If t is outside [0, 1].
        ShapeError: If the shapes differ.

    Returns:
        torch.Tensor: z_t
    """
    _check_timestep(t)
    if z_hq.shape != eps.shape:
        raise ShapeError(f"latent {tuple(z_hq.shape)} and noise {tuple(eps.shape)} differ")

    t = _broadcast(t, z_hq)
    return t * eps + (1 - t) * z_hq


def velocity_target(z_hq: torch.Tensor, eps: torch.Tensor) -> torch.Tensor:
    """The exact rectified-flow velocity eps - z_hq"""
    return eps - z_hq


def one_step_denoise(z_t: torch.Tensor, velocity: torch.Tensor, t: Timestep) -> torch.Tensor:
    """One Euler step from t back to 0: z_t - t * v.

    Raises:
        ConfigurationError: If t is outside (0, 1].
    """
    _check_timestep(t, allow_zero=False)
    return z_t - _broadcast(t, z_t) * velocity
