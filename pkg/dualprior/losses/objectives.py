from typing import Dict, NamedTuple

import torch
import torch.nn.functional as F

from ..common.constants import PROBABILITY_CLAMP
from ..common.enums import CEReduction, Stage
from ..common.exceptions import CodeIndexError, ShapeError
from ..common.types import FlowTensor, LatentGrid, VideoTensor
from ..flow.warp import warp
from .models import LossReport, LossWeights
from .networks import Discriminator, FeatureExtractor


class LossOutput(NamedTuple):
    """A differentiable total and its named (still attached) terms"""

    total: torch.Tensor
    terms: Dict[str, torch.Tensor]

    def report(self, stage: Stage, weights: LossWeights) -> LossReport:
        values = {name: float(value.detach()) for name, value in self.terms.items()}
        return LossReport(stage=stage, weights=weights, total=float(self.total.detach()), **values)


def _require_same_shape(a: torch.Tensor, b: torch.Tensor, what: str) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{what}: shapes {tuple(a.shape)} and {tuple(b.shape)} differ")


def _probability(logits: torch.Tensor) -> torch.Tensor:
    return torch.sigmoid(logits).clamp(PROBABILITY_CLAMP, 1.0 - PROBABILITY_CLAMP)


def feature_loss(z_h: LatentGrid, z_q: LatentGrid, beta: float) -> torch.Tensor:
    """||sg(z_h) - z_q||^2 + beta ||z_h - sg(z_q)||^2, each a mean over elements.

    The first term moves the codebook entries, the second commits the encoder to its codes.
    """
    _require_same_shape(z_h, z_q, "feature loss")
    return F.mse_loss(z_q, z_h.detach()) + beta * F.mse_loss(z_h, z_q.detach())


def generator_adversarial(disc: Discriminator, fake: VideoTensor) -> torch.Tensor:
    """Non-saturating generator term -log D(x_hat)"""
    return -torch.log(_probability(disc(fake))).mean()


def discriminator_loss(disc: Discriminator, real: VideoTensor, fake: VideoTensor) -> torch.Tensor:
    """-[log D(x_hq) + log(1 - D(x_hat))], with x_hat detached from the generator graph"""
    p_real = _probability(disc(real))
    p_fake = _probability(disc(fake.detach()))
    return -(torch.log(p_real) + torch.log(1.0 - p_fake)).mean()


def discriminator_step(
    real: VideoTensor,
    fake: VideoTensor,
    disc: Discriminator,
    optimizer: torch.optim.Optimizer,
    grad_clip: float = 0.0,
) -> float:
    """One discriminator update on the negated objective; returns the d-loss.

    The global gradient norm is clipped to grad_clip when it is positive.
    """
    optimizer.zero_grad(set_to_none=True)
    loss = discriminator_loss(disc, real, fake)
    loss.backward()
    if grad_clip > 0:
        torch.nn.utils.clip_grad_norm_(disc.parameters(), grad_clip)
    optimizer.step()
    return float(loss.detach())


def code_cross_entropy(
    logits: torch.Tensor, targets: torch.Tensor, reduction: CEReduction = CEReduction.SUM
) -> torch.Tensor:
    """Per-token cross-entropy of (B, N, K) logits against (B, N) or (B, t, h, w) target indices.

    Args:
        logits (torch.Tensor): Code logits.
        targets (torch.Tensor): Ground-truth indices in [0, K).
        reduction (CEReduction): SUM adds over tokens and averages over the batch, MEAN averages both.

    Raises:
        CodeIndexError: If a target lies outside [0, K).
    """
    b, n, k = logits.shape
    targets = targets.reshape(b, -1)
    if targets.shape[1] != n:
        raise ShapeError(f"{targets.shape[1]} targets for {n} token logits", dimension="tokens")
    if targets.numel() and (targets.min() < 0 or targets.max() >= k):
        raise CodeIndexError(f"target indices must lie within [0, {k})", {"K": k})

    per_token = F.cross_entropy(logits.reshape(b * n, k), targets.reshape(-1), reduction="none").reshape(b, n)
    if CEReduction(reduction) == CEReduction.SUM:
        return per_token.sum(dim=1).mean()
    return per_token.mean()


def code_feature_loss(z_l: LatentGrid, z_q: LatentGrid) -> torch.Tensor:
    """MSE(z_l, sg(z_q)), gradients reach z_l only"""
    _require_same_shape(z_l, z_q, "code feature loss")
    return F.mse_loss(z_l, z_q.detach())


def _masked_l1(a: torch.Tensor, b: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    """Mean |a - b| over valid pixels and channels, per leading index. a, b: (..., H, W, C); mask: (..., H, W)"""
    weights = mask.to(a.dtype).unsqueeze(-1)
    count = weights.sum(dim=(-3, -2, -1)) * a.shape[-1]
    return ((a - b).abs() * weights).sum(dim=(-3, -2, -1)) / count.clamp(min=1.0)


def temporal_loss(video: VideoTensor, flows_fw: FlowTensor, flows_bw: FlowTensor) -> torch.Tensor:
    """Warp-based temporal consistency of a restored video under ground-truth flows.

    For every interior frame i (0-based 1 ... T-2) frame i is backward-warped with forward[i] and compared with frame
    i+1, and with backward[i-1] and compared with frame i-1. Each comparison is an L1 mean over in-frame pixels;
    terms are summed over i and averaged over the batch.

    Args:
        video (VideoTensor): (B, T, H, W, C) restored video, T >= 3.
        flows_fw (FlowTensor): (B, T-1, H, W, 2) forward flows of the ground truth.
        flows_bw (FlowTensor): (B, T-1, H, W, 2) backward flows of the ground truth.

    Raises:
        ShapeError: If T < 3 or the flows do not match the video.

    Returns:
        torch.Tensor: The scalar loss
    """
    b, frames = video.shape[:2]
    if frames < 3:
        raise ShapeError(f"temporal loss needs T >= 3, got T={frames}", dimension="T")
    for flows in (flows_fw, flows_bw):
        if flows.shape[:2] != (b, frames - 1) or flows.shape[2:4] != video.shape[2:4]:
            raise ShapeError(
                f"flows {tuple(flows.shape)} do not match a video of {tuple(video.shape)}", dimension="T"
            )

    source = video[:, 1 : frames - 1]

    to_next, mask_next = warp(source, flows_fw[:, 1 : frames - 1].to(video.dtype))
    to_previous, mask_previous = warp(source, flows_bw[:, 0 : frames - 2].to(video.dtype))

    forward_terms = _masked_l1(to_next, video[:, 2:frames], mask_next)
    backward_terms = _masked_l1(to_previous, video[:, 0 : frames - 2], mask_previous)

    return (forward_terms + backward_terms).sum(dim=1).mean()


def stage0_loss(reconstruction: VideoTensor, target: VideoTensor) -> LossOutput:
    """Pixel MSE + L1 of the VAE stand-in"""
    _require_same_shape(reconstruction, target, "stage 0 loss")
    terms = {
        "rec_pixel": F.mse_loss(reconstruction, target),
        "l1": F.l1_loss(reconstruction, target),
    }
    return LossOutput(total=terms["rec_pixel"] + terms["l1"], terms=terms)


def stage1_loss(
    x_hat: VideoTensor,
    x_hq: VideoTensor,
    z_h: LatentGrid,
    z_q: LatentGrid,
    disc: Discriminator,
    extractor: FeatureExtractor,
    weights: LossWeights,
) -> LossOutput:
    """L1 + per + feat + lambda_adv * adv_g for codebook learning.

    Args:
        x_hat (VideoTensor): Reconstruction.
        x_hq (VideoTensor): HQ target.
        z_h (LatentGrid): Continuous latents [z_s ; z_t].
        z_q (LatentGrid): Their selected codebook entries.
        disc (Discriminator): The discriminator, used for the generator term only.
        extractor (FeatureExtractor): Fixed perceptual features.
        weights (LossWeights): beta and lambda_adv.

    Raises:
        ShapeError: If x_hat and x_hq, or z_h and z_q, differ in shape.
    """
    _require_same_shape(x_hat, x_hq, "stage 1 loss")
    terms = {
        "l1": F.l1_loss(x_hat, x_hq),
        "per": extractor.distance(x_hat, x_hq),
        "feat": feature_loss(z_h, z_q, weights.beta),
        "adv_g": generator_adversarial(disc, x_hat),
    }
    total = terms["l1"] + terms["per"] + terms["feat"] + weights.lambda_adv * terms["adv_g"]
    return LossOutput(total=total, terms=terms)


def stage1p_loss(
    logits_s: torch.Tensor,
    logits_t: torch.Tensor,
    s_s: torch.Tensor,
    s_t: torch.Tensor,
    z_l: LatentGrid,
    z_q: LatentGrid,
    weights: LossWeights,
) -> LossOutput:
    """L_cf + lambda_ce * (ce_s + ce_t) for code prediction from LQ inputs"""
    terms = {
        "cf": code_feature_loss(z_l, z_q),
        "ce_s": code_cross_entropy(logits_s, s_s, weights.ce_reduction),
        "ce_t": code_cross_entropy(logits_t, s_t, weights.ce_reduction),
    }
    total = terms["cf"] + weights.lambda_ce * (terms["ce_s"] + terms["ce_t"])
    return LossOutput(total=total, terms=terms)


def stage2_loss(
    z_hat: LatentGrid,
    z_hq: LatentGrid,
    x_hat: VideoTensor,
    x_hq: VideoTensor,
    flows_fw: FlowTensor,
    flows_bw: FlowTensor,
    extractor: FeatureExtractor,
    weights: LossWeights,
) -> LossOutput:
    """Latent MSE + pixel MSE + per + lambda_temp * temp for the one-step restorer

    Raises:
        ShapeError: On mismatched shapes or T < 3.
    """
    _require_same_shape(z_hat, z_hq, "stage 2 latent loss")
    _require_same_shape(x_hat, x_hq, "stage 2 pixel loss")
    terms = {
        "rec_latent": F.mse_loss(z_hat, z_hq),
        "rec_pixel": F.mse_loss(x_hat, x_hq),
        "per": extractor.distance(x_hat, x_hq),
        "temp": temporal_loss(x_hat, flows_fw, flows_bw),
    }
    total = terms["rec_latent"] + terms["rec_pixel"] + terms["per"] + weights.lambda_temp * terms["temp"]
    return LossOutput(total=total, terms=terms)
